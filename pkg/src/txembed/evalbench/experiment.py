"""Repeated subnetwork / split evaluation of embedding and feature methods.

For every subnetwork: draw unlabeled centrals, induce the ego-net graph,
compute one representation per method, then evaluate ``repeats`` stratified
train/test splits of the central nodes. All methods share the same
subnetworks, walk/training seeds and splits.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from txembed import featext, skipgram, walker
from txembed.detector import DETECTORS, OCSVM, Kernel, baseline_fit_predict, ocsvm_fit
from txembed.evalbench.metrics import metrics_from_labels
from txembed.evalbench.subnet import SubnetworkSpec, extract_subnetwork
from txembed.txgraph import LabelSet, TxGraph, TxRecord

FEATURE_METHODS = {"features_time": "time", "features_amount": "amount",
                   "features_both": "both"}
METHODS = walker.STRATEGIES + tuple(FEATURE_METHODS)
METRIC_COLUMNS = ("precision", "recall", "fscore")
ROW_COLUMNS = ("method", "subnetwork", "repeat", "tp", "fp", "fn", "tn",
               "precision", "recall", "fscore", "precision_undefined")


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    subnetworks: int = 50
    repeats: int = 100
    train_fraction: float = 0.8
    methods: tuple[str, ...] = (walker.TRANS2VEC,)
    detector: str = OCSVM
    walk: walker.WalkConfig = field(default_factory=walker.WalkConfig)
    embed: skipgram.EmbedConfig = field(default_factory=skipgram.EmbedConfig)
    nu: float = 0.1
    kernel: str = "rbf"
    gamma: float | None = None
    standardize: bool = True
    direction: str = "undirected"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise PlanError("train_fraction must lie in (0, 1)")
        if self.subnetworks < 1 or self.repeats < 1:
            raise PlanError("subnetworks and repeats must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise PlanError(f"unknown method(s) {bad}; expected a subset of {METHODS}")
        if self.detector not in DETECTORS:
            raise PlanError(f"unknown detector {self.detector!r}")
        if not (0.0 < self.nu <= 1.0):
            raise PlanError("nu must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PlanError(f"unknown plan key(s): {sorted(unknown)}")
        try:
            if "walk" in d:
                d["walk"] = walker.WalkConfig(**d["walk"])
            if "embed" in d:
                d["embed"] = skipgram.EmbedConfig(**d["embed"])
        except TypeError as e:
            raise PlanError(str(e)) from None
        except ValueError as e:
            raise PlanError(str(e)) from None
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise PlanError(f"plan file is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise PlanError("plan file must hold a JSON object")
        return cls.from_dict(data)


@dataclass
class DetectionReport:
    rows: list[dict]
    config: dict
    subnetworks: list[dict] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def aggregates(self) -> dict[str, dict[str, float]]:
        out = {}
        methods = list(dict.fromkeys(r["method"] for r in self.rows))
        for m in methods:
            sel = [r for r in self.rows if r["method"] == m]
            agg = {"runs": len(sel)}
            for k in METRIC_COLUMNS:
                v = np.array([r[k] for r in sel])
                agg[f"{k}_mean"] = float(v.mean())
                agg[f"{k}_std"] = float(v.std())
            out[m] = agg
        return out

    def mean(self, method: str, metric: str = "fscore") -> float:
        return self.aggregates()[method][f"{metric}_mean"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ROW_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in ROW_COLUMNS})
        return buf.getvalue()

    def summary(self) -> str:
        lines = ["# detection report", "config: " + json.dumps(self.config, sort_keys=True), ""]
        for s in self.subnetworks:
            lines.append(f"subnetwork {s['index']}: {s['nodes']} nodes, {s['edges']} edges, "
                         f"{s['centrals']} centrals")
        lines.append("")
        lines.append(f"{'method':<18}{'runs':>6}{'precision':>12}{'recall':>12}{'fscore':>12}{'f_std':>10}")
        for m, a in self.aggregates().items():
            lines.append(f"{m:<18}{a['runs']:>6}{a['precision_mean']:>12.4f}"
                         f"{a['recall_mean']:>12.4f}{a['fscore_mean']:>12.4f}{a['fscore_std']:>10.4f}")
        return "\n".join(lines) + "\n"

    def save(self, out_dir) -> None:
        """Write ``report.csv``, ``summary.txt``, ``config.json`` and ``timings.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv(), encoding="utf-8")
        (out / "summary.txt").write_text(self.summary(), encoding="utf-8")
        (out / "config.json").write_text(json.dumps(self.config, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
        (out / "timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(2, np.uint64)[0] >> 1)


def stratified_split(n_pos: int, n_neg: int, train_fraction: float, seed: int):
    """Boolean train masks for the positive and negative centrals."""
    rng = np.random.default_rng(seed)
    masks = []
    for n in (n_pos, n_neg):
        k = int(round(train_fraction * n))
        m = np.zeros(n, dtype=bool)
        m[rng.permutation(n)[:k]] = True
        masks.append(m)
    return masks[0], masks[1]


def embed_graph(g: TxGraph, walk_cfg: walker.WalkConfig, embed_cfg: skipgram.EmbedConfig,
                threads: int = 1) -> skipgram.EmbeddingMatrix:
    """Transition precompute, corpus generation and skip-gram training."""
    table = walker.precompute_transitions(g, walk_cfg)
    corpus = walker.generate_corpus(g, walk_cfg, table, threads=threads)
    return skipgram.train(corpus, embed_cfg, g.nodes, threads=threads)


def method_matrix(method: str, sub: TxGraph, centrals: Sequence[str], plan: ExperimentPlan,
                  walk_seed: int, embed_seed: int, records: Sequence[TxRecord] | None) -> np.ndarray:
    """Central-node rows for ``method``, standardized over every subnetwork node if asked."""
    if method in FEATURE_METHODS:
        if records is None:
            raise PlanError(f"method {method} needs the raw transaction records")
        full = featext.feature_matrix(records, sub.nodes, FEATURE_METHODS[method])
        rows = full[[sub.index[a] for a in centrals]]
    else:
        wcfg = replace(plan.walk, strategy=method, seed=walk_seed)
        ecfg = replace(plan.embed, seed=embed_seed)
        emb = embed_graph(sub, wcfg, ecfg, plan.threads)
        full, rows = emb.vectors, emb.rows(centrals)
    if plan.standardize:
        # label-free: the scaler sees the whole node set, never the split
        return featext.Standardizer.fit(full).transform(rows)
    return rows


def evaluate_split(x_train, y_train, x_test, plan: ExperimentPlan, seed: int) -> np.ndarray:
    """Fit the plan's detector and return predicted test labels."""
    if plan.detector == OCSVM:
        model = ocsvm_fit(x_train[y_train == 1], plan.nu, Kernel(plan.kernel, plan.gamma))
        return model.predict(x_test)
    labels, _ = baseline_fit_predict(x_train, y_train, x_test, plan.detector, seed=seed)
    return labels


def run_experiment(g: TxGraph, labels: LabelSet, plan: ExperimentPlan,
                   records: Sequence[TxRecord] | None = None) -> DetectionReport:
    g = g.with_direction(plan.direction)
    rows: list[dict] = []
    subs: list[dict] = []
    timings: dict[str, float] = {}
    for s in range(plan.subnetworks):
        spec, sub = extract_subnetwork(g, labels, _seed(plan.seed, 1, s))
        subs.append(dict(index=s, nodes=sub.num_nodes, edges=sub.num_edges,
                         centrals=len(spec.centrals)))
        centrals = list(spec.centrals)
        y = np.array([1] * len(spec.phishing_centrals) + [-1] * len(spec.random_centrals))
        n_pos, n_neg = len(spec.phishing_centrals), len(spec.random_centrals)
        splits = [stratified_split(n_pos, n_neg, plan.train_fraction, _seed(plan.seed, 3, s, r))
                  for r in range(plan.repeats)]
        for method in plan.methods:
            t0 = time.perf_counter()
            x = method_matrix(method, sub, centrals, plan, _seed(plan.seed, 2, s),
                              _seed(plan.seed, 4, s), records)
            timings[f"{method}/{s}"] = time.perf_counter() - t0
            for r, (mp, mn) in enumerate(splits):
                train = np.concatenate([mp, mn])
                pred = evaluate_split(x[train], y[train], x[~train], plan, _seed(plan.seed, 5, s, r))
                m = metrics_from_labels(pred, y[~train])
                rows.append(dict(method=method, subnetwork=s, repeat=r, tp=m.tp, fp=m.fp,
                                 fn=m.fn, tn=m.tn, precision=m.precision, recall=m.recall,
                                 fscore=m.fscore, precision_undefined=int(m.precision_undefined)))
    return DetectionReport(rows, plan.to_dict(), subs, timings)


SWEEPABLE = ("alpha", "d", "k", "l", "r")
SWEEP_COLUMNS = ("parameter", "value", "precision_mean", "recall_mean", "fscore_mean", "fscore_std")


def _with_param(plan: ExperimentPlan, parameter: str, value) -> ExperimentPlan:
    try:
        if parameter == "alpha":
            return replace(plan, walk=replace(plan.walk, alpha=float(value)))
        if parameter == "l":
            return replace(plan, walk=replace(plan.walk, walk_length=int(value)))
        if parameter == "r":
            return replace(plan, walk=replace(plan.walk, walks_per_node=int(value)))
        if parameter == "d":
            return replace(plan, embed=replace(plan.embed, dimension=int(value)))
        if parameter == "k":
            return replace(plan, embed=replace(plan.embed, window=int(value)))
    except ValueError as e:
        raise PlanError(f"{parameter}={value}: {e}") from None
    raise PlanError(f"cannot sweep {parameter!r}; expected one of {SWEEPABLE}")


def sweep(g: TxGraph, labels: LabelSet, plan: ExperimentPlan, parameter: str, values,
          records: Sequence[TxRecord] | None = None) -> list[dict]:
    """One experiment per value with everything else held at ``plan``; first method only."""
    method = plan.methods[0]
    plans = [_with_param(replace(plan, methods=(method,)), parameter, v) for v in values]
    out = []
    for v, p in zip(values, plans):
        agg = run_experiment(g, labels, p, records).aggregates()[method]
        out.append(dict(parameter=parameter, value=v, precision_mean=agg["precision_mean"],
                        recall_mean=agg["recall_mean"], fscore_mean=agg["fscore_mean"],
                        fscore_std=agg["fscore_std"]))
    return out


def sweep_csv(table: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in table:
        w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in SWEEP_COLUMNS})
    return buf.getvalue()
