"""Hand-crafted per-address time and amount statistics.

Computed over every raw record where the address is sender or receiver,
ordered by timestamp. Time block: max interval, min interval, total span
(last - first), trading frequency (count / max(span, 1)). Amount block: max,
min, total, mean. Addresses with a single record get zero intervals and span.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from txembed.txgraph import TxRecord

TIME_FEATURES = ("max_interval", "min_interval", "total_time_span", "trading_frequency")
AMOUNT_FEATURES = ("max_amount", "min_amount", "total_amount", "mean_amount")
MODES = ("time", "amount", "both")


def feature_names(mode: str) -> tuple[str, ...]:
    if mode == "time":
        return TIME_FEATURES
    if mode == "amount":
        return AMOUNT_FEATURES
    if mode == "both":
        return TIME_FEATURES + AMOUNT_FEATURES
    raise ValueError(f"mode must be one of {MODES}")


def _touching(records: Sequence[TxRecord]):
    """(address, amount, timestamp) once per record per distinct participant."""
    addr, amt, ts = [], [], []
    for r in records:
        addr.append(r.sender)
        amt.append(r.amount)
        ts.append(r.timestamp)
        if r.receiver != r.sender:
            addr.append(r.receiver)
            amt.append(r.amount)
            ts.append(r.timestamp)
    return np.array(addr, dtype=str), np.array(amt, dtype=np.float64), np.array(ts, dtype=np.int64)


def feature_matrix(records: Sequence[TxRecord], addresses: Sequence[str],
                   mode: str = "both") -> np.ndarray:
    """Feature rows for ``addresses`` (one row each, columns per :func:`feature_names`)."""
    names = feature_names(mode)
    addr, amt, ts = _touching(records)
    keys, inv = np.unique(addr, return_inverse=True)
    # canonical order makes the output independent of record order
    order = np.lexsort((amt, ts, inv))
    inv, amt, ts = inv[order], amt[order], ts[order]
    start = np.flatnonzero(np.r_[True, inv[1:] != inv[:-1]]) if inv.size else np.zeros(0, int)
    count = np.diff(np.r_[start, inv.size])

    first = ts[start]
    last = ts[np.r_[start[1:], inv.size] - 1] if inv.size else ts[:0]
    span = (last - first).astype(np.float64)
    gaps = np.diff(ts).astype(np.float64)
    same = inv[1:] == inv[:-1]
    gap_max = np.zeros(keys.size)
    gap_min = np.zeros(keys.size)
    if same.any():
        owner = inv[1:][same]
        g = gaps[same]
        gap_max[:] = -np.inf
        gap_min[:] = np.inf
        np.maximum.at(gap_max, owner, g)
        np.minimum.at(gap_min, owner, g)
        gap_max[~np.isfinite(gap_max)] = 0.0
        gap_min[~np.isfinite(gap_min)] = 0.0
    freq = count / np.maximum(span, 1.0)

    total = np.add.reduceat(amt, start) if inv.size else amt[:0]
    amax = np.maximum.reduceat(amt, start) if inv.size else amt[:0]
    amin = np.minimum.reduceat(amt, start) if inv.size else amt[:0]
    mean = total / count

    full = np.column_stack([gap_max, gap_min, span, freq, amax, amin, total, mean])
    pos = {a: i for i, a in enumerate(keys.tolist())}
    missing = [a for a in addresses if a not in pos]
    if missing:
        raise KeyError(f"unknown address(es): {missing[:5]}")
    rows = full[[pos[a] for a in addresses]] if len(addresses) else np.zeros((0, 8))
    cols = [TIME_FEATURES.index(n) if n in TIME_FEATURES else 4 + AMOUNT_FEATURES.index(n)
            for n in names]
    return rows[:, cols]


def extract_features(records: Sequence[TxRecord], address: str, mode: str = "both") -> np.ndarray:
    """Feature vector (4 or 8 values) for one address."""
    return feature_matrix(records, [address], mode)[0]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a constant column

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValueError("standardization needs at least 2 rows")
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 0.0))

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.scale > 0, self.scale, 1.0)
        return np.where(self.scale > 0, (x - self.mean) / safe, 0.0)


def standardize(x) -> np.ndarray:
    """Zero mean, unit (population) variance per column; constant columns become 0."""
    return Standardizer.fit(x).transform(x)


def write_feature_csv(path, addresses: Sequence[str], matrix: np.ndarray, mode: str) -> None:
    names = feature_names(mode)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("address",) + names)
        for a, row in zip(addresses, matrix):
            w.writerow([a] + [repr(float(v)) for v in row])


def read_feature_csv(path) -> tuple[list[str], np.ndarray, tuple[str, ...]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows).reshape(len(rows), len(header) - 1), tuple(header[1:])
