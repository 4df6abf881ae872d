"""Transaction records, aggregated transaction graphs and label sets.

Parallel transfers between an ordered address pair collapse into one edge
carrying the summed amount and the latest timestamp. Every aggregated edge
also gets a global time rank: its 1-based position when all edges are sorted
by (timestamp, from-address, to-address).
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DIRECTED_OUT = "directed-out"
UNDIRECTED = "undirected"
DIRECTION_MODES = (DIRECTED_OUT, UNDIRECTED)

SNAPSHOT_VERSION = 1
CSV_HEADER = ("from", "to", "amount", "timestamp")


class TxGraphError(Exception):
    pass


class RecordParseError(TxGraphError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NegativeAmount(RecordParseError):
    def __init__(self, line: int):
        super().__init__(line, "negative amount")


class EmptyGraph(TxGraphError):
    pass


@dataclass(frozen=True)
class TxRecord:
    sender: str
    receiver: str
    amount: float
    timestamp: int


def load_records(path) -> list[TxRecord]:
    """Parse an edge-list CSV with header ``from,to,amount,timestamp``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"edge file not found: {path}")
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return records
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise RecordParseError(1, f"expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            records.append(_parse_row(row, lineno))
    return records


def _parse_row(row: Sequence[str], lineno: int) -> TxRecord:
    if len(row) != 4:
        raise RecordParseError(lineno, f"expected 4 fields, got {len(row)}")
    src, dst, amount_s, ts_s = (c.strip() for c in row)
    if not src or not dst:
        raise RecordParseError(lineno, "empty address")
    try:
        amount = float(amount_s)
    except ValueError:
        raise RecordParseError(lineno, f"non-numeric amount {amount_s!r}") from None
    if not np.isfinite(amount):
        raise RecordParseError(lineno, f"non-finite amount {amount_s!r}")
    if amount < 0:
        raise NegativeAmount(lineno)
    try:
        timestamp = int(ts_s)
    except ValueError:
        raise RecordParseError(lineno, f"non-integer timestamp {ts_s!r}") from None
    if timestamp < 0:
        raise RecordParseError(lineno, "negative timestamp")
    return TxRecord(src, dst, amount, timestamp)


def write_records(records: Iterable[TxRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow((r.sender, r.receiver, repr(float(r.amount)), int(r.timestamp)))


@dataclass(frozen=True)
class AggEdge:
    sender: int
    receiver: int
    amount: float
    timestamp: int
    time_rank: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TxGraph:
    """Immutable aggregated transaction graph.

    Edge arrays are parallel and ordered by (src, dst). The adjacency is a CSR
    view under ``direction``; in undirected mode a pair connected both ways
    appears once per endpoint with summed amount and the larger rank and
    timestamp of the two directions.
    """

    nodes: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    amount: np.ndarray
    timestamp: np.ndarray
    rank: np.ndarray
    direction: str
    indptr: np.ndarray = field(repr=False)
    nbr: np.ndarray = field(repr=False)
    nbr_amount: np.ndarray = field(repr=False)
    nbr_rank: np.ndarray = field(repr=False)
    nbr_timestamp: np.ndarray = field(repr=False)
    index: dict = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, nodes: Sequence[str], src, dst, amount, timestamp,
                   direction: str = UNDIRECTED) -> "TxGraph":
        """Build from already-aggregated edges; ranks are recomputed.

        ``nodes`` must be sorted and unique so that index order equals
        address order (the rank tie-break relies on it).
        """
        if direction not in DIRECTION_MODES:
            raise ValueError(f"direction must be one of {DIRECTION_MODES}")
        nodes = tuple(nodes)
        if list(nodes) != sorted(set(nodes)):
            raise ValueError("nodes must be sorted and unique")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        amount = np.asarray(amount, dtype=np.float64)
        timestamp = np.asarray(timestamp, dtype=np.int64)
        order = np.lexsort((dst, src))
        src, dst, amount, timestamp = src[order], dst[order], amount[order], timestamp[order]
        if src.size and np.any((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])):
            raise ValueError("duplicate (src, dst) edge")
        rank = np.empty(src.size, dtype=np.int64)
        rank[np.lexsort((dst, src, timestamp))] = np.arange(1, src.size + 1)
        indptr, nbr, n_amt, n_rank, n_ts = _adjacency(len(nodes), src, dst, amount,
                                                      rank, timestamp, direction)
        return cls(
            nodes=nodes, src=_frozen(src), dst=_frozen(dst), amount=_frozen(amount),
            timestamp=_frozen(timestamp), rank=_frozen(rank), direction=direction,
            indptr=_frozen(indptr), nbr=_frozen(nbr), nbr_amount=_frozen(n_amt),
            nbr_rank=_frozen(n_rank), nbr_timestamp=_frozen(n_ts),
            index={a: i for i, a in enumerate(nodes)},
        )

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edges(self) -> list[AggEdge]:
        return [AggEdge(int(s), int(d), float(a), int(t), int(r))
                for s, d, a, t, r in zip(self.src, self.dst, self.amount,
                                         self.timestamp, self.rank)]

    def degree(self, u: int | None = None):
        deg = np.diff(self.indptr)
        return deg if u is None else int(deg[u])

    def neighbors(self, u: int) -> list[tuple[int, float, int]]:
        """Neighbors of ``u`` as (node, amount, time_rank) under the direction mode."""
        self._check(u)
        s, e = self.indptr[u], self.indptr[u + 1]
        return [(int(x), float(a), int(r)) for x, a, r in
                zip(self.nbr[s:e], self.nbr_amount[s:e], self.nbr_rank[s:e])]

    def _check(self, u: int) -> None:
        if not (0 <= u < self.num_nodes):
            raise IndexError(f"node index {u} out of range [0, {self.num_nodes})")

    def with_direction(self, direction: str) -> "TxGraph":
        if direction == self.direction:
            return self
        return TxGraph.from_edges(self.nodes, self.src, self.dst, self.amount,
                                  self.timestamp, direction)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"v{SNAPSHOT_VERSION}|{self.direction}|".encode())
        h.update("\n".join(self.nodes).encode())
        for a in (self.src, self.dst, self.amount, self.timestamp, self.rank):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]

    def save(self, path) -> None:
        """Write a versioned ``.npz`` snapshot (see README for the layout)."""
        with Path(path).open("wb") as fh:
            np.savez_compressed(
                fh, format_version=np.int64(SNAPSHOT_VERSION),
                direction=np.array(self.direction), nodes=np.array(self.nodes, dtype=str),
                src=self.src, dst=self.dst, amount=self.amount, timestamp=self.timestamp,
                rank=self.rank,
            )

    @classmethod
    def load(cls, path) -> "TxGraph":
        with np.load(Path(path), allow_pickle=False) as z:
            version = int(z["format_version"])
            if version != SNAPSHOT_VERSION:
                raise TxGraphError(f"unsupported snapshot version {version}")
            nodes = [str(s) for s in z["nodes"]]
            g = cls.from_edges(nodes, z["src"], z["dst"], z["amount"], z["timestamp"],
                               str(z["direction"]))
            if not np.array_equal(g.rank, z["rank"]):
                raise TxGraphError("snapshot ranks inconsistent with edges")
        return g


def _adjacency(n, src, dst, amount, rank, timestamp, direction):
    if direction == UNDIRECTED:
        a = np.concatenate([src, dst])
        b = np.concatenate([dst, src])
        amt = np.concatenate([amount, amount])
        rk = np.concatenate([rank, rank])
        ts = np.concatenate([timestamp, timestamp])
        order = np.lexsort((b, a))
        a, b, amt, rk, ts = a[order], b[order], amt[order], rk[order], ts[order]
        if a.size:
            start = np.flatnonzero(np.r_[True, (a[1:] != a[:-1]) | (b[1:] != b[:-1])])
            a, b = a[start], b[start]
            amt = np.add.reduceat(amt, start)
            rk = np.maximum.reduceat(rk, start)
            ts = np.maximum.reduceat(ts, start)
    else:
        a, b, amt, rk, ts = src, dst, amount, rank, timestamp
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, a + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, b.astype(np.int64), amt.astype(np.float64), rk.astype(np.int64), ts.astype(np.int64)


def aggregate(records: Sequence[TxRecord], direction: str = UNDIRECTED) -> TxGraph:
    """Collapse raw records into a :class:`TxGraph`. Self-loops are dropped."""
    if len(records) == 0:
        raise EmptyGraph("no transaction records")
    senders = [r.sender for r in records]
    receivers = [r.receiver for r in records]
    amounts = np.fromiter((r.amount for r in records), dtype=np.float64, count=len(records))
    stamps = np.fromiter((r.timestamp for r in records), dtype=np.int64, count=len(records))
    return aggregate_arrays(senders, receivers, amounts, stamps, direction)


def aggregate_arrays(senders, receivers, amounts, stamps, direction: str = UNDIRECTED) -> TxGraph:
    nodes, inv = np.unique(np.concatenate([np.asarray(senders, dtype=str),
                                           np.asarray(receivers, dtype=str)]),
                           return_inverse=True)
    m = len(senders)
    if m == 0:
        raise EmptyGraph("no transaction records")
    s, d = inv[:m].astype(np.int64), inv[m:].astype(np.int64)
    amounts = np.asarray(amounts, dtype=np.float64)
    stamps = np.asarray(stamps, dtype=np.int64)
    keep = s != d
    s, d, amounts, stamps = s[keep], d[keep], amounts[keep], stamps[keep]
    # stable sort keeps file order within a pair, so sums are reproducible
    order = np.lexsort((d, s))
    s, d, amounts, stamps = s[order], d[order], amounts[order], stamps[order]
    if s.size:
        start = np.flatnonzero(np.r_[True, (s[1:] != s[:-1]) | (d[1:] != d[:-1])])
        s, d = s[start], d[start]
        amounts = np.add.reduceat(amounts, start)
        stamps = np.maximum.reduceat(stamps, start)
    return TxGraph.from_edges([str(x) for x in nodes], s, d, amounts, stamps, direction)


@dataclass(frozen=True)
class LabelSet:
    """Phishing addresses (label +1); every other address is -1."""

    phishing: frozenset[str]
    unknown: tuple[str, ...] = ()

    def indices(self, g: TxGraph) -> np.ndarray:
        return np.array(sorted(g.index[a] for a in self.phishing), dtype=np.int64)

    def label_of(self, address: str) -> int:
        return 1 if address in self.phishing else -1


def read_label_file(path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"label file not found: {path}")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def join_labels(g: TxGraph, addresses: Iterable[str]) -> LabelSet:
    """Keep labeled addresses present in ``g``; report the rest in ``unknown``."""
    known, unknown = set(), []
    for a in addresses:
        if a in g.index:
            known.add(a)
        elif a not in unknown:
            unknown.append(a)
    if unknown:
        log.warning("%d labeled address(es) not present in the graph", len(unknown))
    return LabelSet(frozenset(known), tuple(unknown))


def write_label_file(addresses: Iterable[str], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("# phishing addresses, one per line\n")
        for a in sorted(addresses):
            fh.write(f"{a}\n")
