"""Command-line entry point: ``txembed <command> [options]``.

Every option can also come from a JSON file passed with ``--config``; flags
given on the command line win over the file, the file wins over built-in
defaults. The merged settings are written next to each output as
``<output>.config.json`` (or ``config.json`` inside output directories).

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from txembed import __version__, featext, skipgram, walker
from txembed.detector import (
    DETECTORS,
    OCSVM,
    Kernel,
    baseline_fit_predict,
    ocsvm_fit,
    ocsvm_predict,
)
from txembed.evalbench import bench, synth
from txembed.evalbench.experiment import (
    SWEEPABLE,
    ExperimentPlan,
    PlanError,
    run_experiment,
    sweep,
    sweep_csv,
)
from txembed.txgraph import (
    DIRECTION_MODES,
    UNDIRECTED,
    TxGraph,
    TxGraphError,
    aggregate,
    join_labels,
    load_records,
    read_label_file,
    write_label_file,
    write_records,
)

log = logging.getLogger("txembed")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments, bad config file or missing input file (exit code 2)."""


def _csv_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _csv_ints(text):
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


def _csv_strs(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# (flag, dest, type, default, help); dest doubles as the config-file key
WALK_OPTS = [
    ("--strategy", "strategy", str, walker.TRANS2VEC, f"one of {', '.join(walker.STRATEGIES)}"),
    ("--alpha", "alpha", float, 0.5, "amount/time blend exponent in [0, 1]"),
    ("--p", "p", float, 0.25, "node2vec return parameter"),
    ("--q", "q", float, 0.75, "node2vec in-out parameter"),
    ("-r", "walks_per_node", int, 20, "walks started from each node"),
    ("-l", "walk_length", int, 5, "steps per walk"),
]
EMBED_OPTS = [
    ("-d", "dimension", int, 64, "embedding dimension"),
    ("-k", "window", int, 10, "skip-gram context window"),
    ("--negatives", "negatives", int, 5, "negative samples per pair"),
    ("--epochs", "epochs", int, 5, "passes over the walk corpus"),
    ("--learning-rate", "learning_rate", float, 0.025, "initial learning rate"),
]
DETECT_OPTS = [
    ("--detector", "detector", str, OCSVM, f"one of {', '.join(DETECTORS)}"),
    ("--nu", "nu", float, 0.1, "one-class SVM nu"),
    ("--kernel", "kernel", str, "rbf", "rbf or linear"),
    ("--gamma", "gamma", float, None, "RBF width (default 1/d)"),
    ("--standardize", "standardize", _bool, True, "standardize columns first"),
]
COMMON_OPTS = [
    ("--seed", "seed", int, 0, "master seed"),
    ("--threads", "threads", int, 1, "worker threads; 1 is deterministic"),
]

COMMANDS = {
    "ingest": [
        ("--edges", "edges", str, None, "edge-list CSV (from,to,amount,timestamp)"),
        ("--labels", "labels", str, None, "phishing address list"),
        ("--direction", "direction", str, UNDIRECTED, f"one of {', '.join(DIRECTION_MODES)}"),
        ("--out", "out", str, None, "graph snapshot to write (.npz)"),
    ],
    "embed": [
        ("--graph", "graph", str, None, "graph snapshot (.npz) or edge-list CSV"),
        ("--direction", "direction", str, UNDIRECTED, "direction used when reading a CSV"),
        ("--out", "out", str, None, "embedding text file to write"),
        ("--walks-out", "walks_out", str, None, "also write the walk corpus here"),
    ] + WALK_OPTS + EMBED_OPTS + COMMON_OPTS,
    "features": [
        ("--edges", "edges", str, None, "edge-list CSV"),
        ("--addresses", "addresses", str, None, "address list (default: every address)"),
        ("--mode", "mode", str, "both", "time, amount or both"),
        ("--out", "out", str, None, "feature CSV to write"),
    ],
    "detect": [
        ("--embeddings", "embeddings", str, None, "embedding text file or feature CSV"),
        ("--labels", "labels", str, None, "phishing addresses used for training"),
        ("--normals", "normals", str, None, "normal addresses (supervised baselines only)"),
        ("--predict", "predict", str, None, "addresses to score (default: every row)"),
        ("--out", "out", str, None, "predictions CSV to write"),
        ("--model-out", "model_out", str, None, "one-class SVM snapshot to write"),
    ] + DETECT_OPTS + COMMON_OPTS,
    "experiment": [
        ("--edges", "edges", str, None, "edge-list CSV"),
        ("--graph", "graph", str, None, "graph snapshot (embedding methods only)"),
        ("--labels", "labels", str, None, "phishing address list"),
        ("--plan", "plan", str, None, "experiment plan JSON"),
        ("--out", "out", str, None, "report directory"),
        ("--subnetworks", "subnetworks", int, None, "override plan.subnetworks"),
        ("--repeats", "repeats", int, None, "override plan.repeats"),
        ("--methods", "methods", _csv_strs, None, "override plan.methods (comma separated)"),
        ("--seed", "seed", int, None, "override plan.seed"),
        ("--threads", "threads", int, None, "override plan.threads"),
    ],
    "sweep": [
        ("--edges", "edges", str, None, "edge-list CSV"),
        ("--graph", "graph", str, None, "graph snapshot (embedding methods only)"),
        ("--labels", "labels", str, None, "phishing address list"),
        ("--plan", "plan", str, None, "experiment plan JSON"),
        ("--parameter", "parameter", str, None, f"one of {', '.join(SWEEPABLE)}"),
        ("--values", "values", _csv_floats, None, "comma-separated values"),
        ("--out", "out", str, None, "sweep CSV to write"),
        ("--subnetworks", "subnetworks", int, None, "override plan.subnetworks"),
        ("--repeats", "repeats", int, None, "override plan.repeats"),
        ("--seed", "seed", int, None, "override plan.seed"),
        ("--threads", "threads", int, None, "override plan.threads"),
    ],
    "bench": [
        ("--sizes", "sizes", _csv_ints, [100, 1000, 10000], "ascending node counts"),
        ("--trials", "trials", int, 3, "graphs timed per size"),
        ("--avg-degree", "avg_degree", float, 6.0, "expected ER degree"),
        ("--out", "out", str, None, "timing CSV to write"),
    ] + COMMON_OPTS,
    "gen-synth": [
        ("--n-normal", "n_normal", int, 2000, "unlabeled accounts"),
        ("--n-phish", "n_phish", int, 50, "phishing accounts"),
        ("--params", "params", str, None, "JSON overriding generator parameters"),
        ("--out-dir", "out_dir", str, None, "directory for edges.csv and labels.txt"),
        ("--seed", "seed", int, 0, "generator seed"),
    ],
}

REQUIRED = {
    "ingest": ("edges", "out"),
    "embed": ("graph", "out"),
    "features": ("edges", "out"),
    "detect": ("embeddings", "labels", "out"),
    "experiment": ("labels", "out"),
    "sweep": ("labels", "parameter", "values", "out"),
    "bench": (),
    "gen-synth": ("out_dir",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="txembed", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=f"{name} (see --help)")
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option values")
        for flag, dest, typ, default, text in opts:
            shown = "" if default is None else f" [default: {default}]"
            p.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS, help=text + shown)
    return parser


def resolve_options(command: str, given: dict) -> dict:
    """Merge built-in defaults, ``--config`` file and explicit flags (in that order)."""
    opts = {dest: default for _, dest, _, default, _ in COMMANDS[command]}
    types = {dest: typ for _, dest, typ, _, _ in COMMANDS[command]}
    cfg_path = given.pop("config", None)
    if cfg_path:
        path = Path(cfg_path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise UsageError(f"config file is not valid JSON: {e}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(opts))
        if unknown:
            raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        for k, v in data.items():
            if v is not None and isinstance(v, str) and types[k] is not str:
                v = types[k](v)
            opts[k] = v
    opts.update(given)
    missing = [k for k in REQUIRED[command] if opts.get(k) in (None, "", [])]
    if missing:
        raise UsageError(f"{command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


def _echo(path: Path, command: str, opts: dict) -> None:
    payload = {"command": command, "version": __version__, "options": opts}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sidecar(out: str) -> Path:
    return Path(str(out) + ".config.json")


def _need_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_graph(path, direction: str) -> TxGraph:
    p = _need_file(path, "graph file")
    if p.suffix == ".npz":
        return TxGraph.load(p).with_direction(direction)
    return aggregate(load_records(p), direction)


def cmd_ingest(o: dict) -> int:
    records = load_records(_need_file(o["edges"], "edges file"))
    g = aggregate(records, o["direction"])
    print(f"records: {len(records)}")
    print(f"nodes: {g.num_nodes}")
    print(f"edges: {g.num_edges}")
    if o["labels"]:
        addresses = read_label_file(_need_file(o["labels"], "labels file"))
        labels = join_labels(g, addresses)
        print(f"labels: {len(labels.phishing)} joined, {len(labels.unknown)} not in graph")
        if labels.unknown:
            print(f"warning: {len(labels.unknown)} labeled address(es) absent from the graph",
                  file=sys.stderr)
    g.save(o["out"])
    _echo(_sidecar(o["out"]), "ingest", o)
    return EXIT_OK


def _walk_config(o: dict) -> walker.WalkConfig:
    return walker.WalkConfig(strategy=o["strategy"], alpha=o["alpha"], p=o["p"], q=o["q"],
                             walks_per_node=o["walks_per_node"], walk_length=o["walk_length"],
                             seed=o["seed"])


def _embed_config(o: dict) -> skipgram.EmbedConfig:
    return skipgram.EmbedConfig(dimension=o["dimension"], window=o["window"],
                                negatives=o["negatives"], epochs=o["epochs"],
                                learning_rate=o["learning_rate"], seed=o["seed"])


def cmd_embed(o: dict, alpha_given: bool = False) -> int:
    try:
        wcfg, ecfg = _walk_config(o), _embed_config(o)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if alpha_given and wcfg.strategy in (walker.DEEPWALK, walker.NODE2VEC,
                                         walker.AMOUNT_ONLY, walker.TIME_ONLY):
        print(f"warning: strategy {wcfg.strategy} ignores --alpha", file=sys.stderr)
    g = _load_graph(o["graph"], o["direction"])
    t0 = time.perf_counter()
    table = walker.precompute_transitions(g, wcfg)
    corpus = walker.generate_corpus(g, wcfg, table, threads=o["threads"])
    t1 = time.perf_counter()
    emb = skipgram.train(corpus, ecfg, g.nodes, threads=o["threads"])
    t2 = time.perf_counter()
    skipgram.save_embeddings(emb, o["out"])
    if o["walks_out"]:
        corpus.save(o["walks_out"], g.nodes)
    _echo(_sidecar(o["out"]), "embed", o)
    print(f"walks: {len(corpus)} ({t1 - t0:.2f}s)")
    print(f"embedding: {g.num_nodes} x {ecfg.dimension} ({t2 - t1:.2f}s) -> {o['out']}")
    return EXIT_OK


def cmd_features(o: dict) -> int:
    if o["mode"] not in featext.MODES:
        raise UsageError(f"--mode must be one of {featext.MODES}")
    records = load_records(_need_file(o["edges"], "edges file"))
    if o["addresses"]:
        addresses = read_label_file(_need_file(o["addresses"], "address file"))
    else:
        addresses = sorted({r.sender for r in records} | {r.receiver for r in records})
    x = featext.feature_matrix(records, addresses, o["mode"])
    featext.write_feature_csv(o["out"], addresses, x, o["mode"])
    _echo(_sidecar(o["out"]), "features", o)
    print(f"features: {len(addresses)} x {x.shape[1]} -> {o['out']}")
    return EXIT_OK


def _read_matrix(path) -> tuple[list[str], np.ndarray]:
    p = _need_file(path, "embedding file")
    with p.open(encoding="utf-8") as fh:
        first = fh.readline()
    if "," in first:
        ids, x, _ = featext.read_feature_csv(p)
        return ids, x
    emb = skipgram.load_embeddings(p)
    return list(emb.ids), emb.vectors


def cmd_detect(o: dict) -> int:
    if o["detector"] not in DETECTORS:
        raise UsageError(f"--detector must be one of {DETECTORS}")
    ids, x = _read_matrix(o["embeddings"])
    pos = {a: i for i, a in enumerate(ids)}
    phish = [a for a in read_label_file(_need_file(o["labels"], "labels file")) if a in pos]
    if len(phish) < 2:
        raise UsageError("need at least 2 labeled addresses present in the embedding file")
    targets = read_label_file(_need_file(o["predict"], "predict file")) if o["predict"] else ids
    missing = [a for a in targets if a not in pos]
    if missing:
        raise UsageError(f"{len(missing)} address(es) to score are not in the embedding file")
    if o["standardize"]:
        x = featext.standardize(x)
    x_test = x[[pos[a] for a in targets]]
    if o["detector"] == OCSVM:
        model = ocsvm_fit(x[[pos[a] for a in phish]], o["nu"], Kernel(o["kernel"], o["gamma"]))
        preds = ocsvm_predict(model, x_test, targets)
        rows = [(p.node_id, p.score, p.label) for p in preds]
        if o["model_out"]:
            model.save(o["model_out"])
    else:
        if not o["normals"]:
            raise UsageError(f"detector {o['detector']} needs --normals")
        normals = [a for a in read_label_file(_need_file(o["normals"], "normals file")) if a in pos]
        train = phish + normals
        y = np.array([1] * len(phish) + [-1] * len(normals))
        labels, scores = baseline_fit_predict(x[[pos[a] for a in train]], y, x_test,
                                              o["detector"], seed=o["seed"])
        rows = list(zip(targets, scores.tolist(), labels.tolist()))
    with Path(o["out"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_id", "score", "label"))
        for a, s, lab in rows:
            w.writerow((a, repr(float(s)), int(lab)))
    _echo(_sidecar(o["out"]), "detect", o)
    n_pos = sum(1 for r in rows if r[2] == 1)
    print(f"scored {len(rows)} address(es): {n_pos} flagged as phishing -> {o['out']}")
    return EXIT_OK


def _plan(o: dict) -> ExperimentPlan:
    if o["plan"]:
        plan = ExperimentPlan.load(_need_file(o["plan"], "plan file"))
    else:
        plan = ExperimentPlan()
    over = {k: o[k] for k in ("subnetworks", "repeats", "seed", "threads") if o.get(k) is not None}
    if o.get("methods"):
        over["methods"] = tuple(o["methods"])
    if over:
        d = plan.to_dict()
        d.update(over)
        plan = ExperimentPlan.from_dict(d)
    return plan


def _experiment_inputs(o: dict, plan: ExperimentPlan):
    records = None
    if o["edges"]:
        records = load_records(_need_file(o["edges"], "edges file"))
        g = aggregate(records, plan.direction)
    elif o["graph"]:
        g = _load_graph(o["graph"], plan.direction)
    else:
        raise UsageError("pass --edges (or --graph for embedding-only plans)")
    labels = join_labels(g, read_label_file(_need_file(o["labels"], "labels file")))
    if labels.unknown:
        print(f"warning: {len(labels.unknown)} labeled address(es) absent from the graph",
              file=sys.stderr)
    if not labels.phishing:
        raise UsageError("no labeled address is present in the graph")
    return g, labels, records


def cmd_experiment(o: dict) -> int:
    plan = _plan(o)
    g, labels, records = _experiment_inputs(o, plan)
    report = run_experiment(g, labels, plan, records)
    report.save(o["out"])
    print(report.summary(), end="")
    return EXIT_OK


def cmd_sweep(o: dict) -> int:
    plan = _plan(o)
    if o["parameter"] not in SWEEPABLE:
        raise UsageError(f"--parameter must be one of {SWEEPABLE}")
    values = o["values"]
    if o["parameter"] in ("d", "k", "l", "r"):
        values = [int(v) for v in values]
    g, labels, records = _experiment_inputs(o, plan)
    table = sweep(g, labels, plan, o["parameter"], values, records)
    Path(o["out"]).write_text(sweep_csv(table), encoding="utf-8")
    echo = dict(o)
    echo["resolved_plan"] = plan.to_dict()
    _echo(_sidecar(o["out"]), "sweep", echo)
    print(sweep_csv(table), end="")
    return EXIT_OK


def cmd_bench(o: dict) -> int:
    result = bench.scalability_bench(o["sizes"], o["trials"], o["avg_degree"],
                                     walker.WalkConfig(seed=o["seed"]), o["seed"], o["threads"])
    text = result.to_csv()
    if o["out"]:
        Path(o["out"]).write_text(text, encoding="utf-8")
        _echo(_sidecar(o["out"]), "bench", o)
    print(text, end="")
    print(f"log-log slope: {result.slope:.3f}")
    return EXIT_OK


def cmd_gen_synth(o: dict) -> int:
    params = synth.SynthParams.defaults()
    if o["params"]:
        try:
            over = json.loads(_need_file(o["params"], "params file").read_text(encoding="utf-8"))
            params = synth.SynthParams.from_dict({**params.to_dict(), **over})
        except (json.JSONDecodeError, ValueError, TypeError) as e:
            raise UsageError(f"bad generator parameters: {e}") from None
    if o["n_normal"] < 1 or o["n_phish"] < 0:
        raise UsageError("need --n-normal >= 1 and --n-phish >= 0")
    data = synth.generate(o["n_normal"], o["n_phish"], o["seed"], params)
    out = Path(o["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_records(data.records, out / "edges.csv")
    write_label_file(data.labels.phishing, out / "labels.txt")
    echo = dict(o)
    echo["generator"] = params.to_dict()
    _echo(out / "config.json", "gen-synth", echo)
    print(f"{len(data.records)} records, {len(data.labels.phishing)} phishing -> {out}")
    return EXIT_OK


HANDLERS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "features": cmd_features,
    "detect": cmd_detect,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "gen-synth": cmd_gen_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    given = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    try:
        opts = resolve_options(args.command, dict(given))
        if args.command == "embed":
            return cmd_embed(opts, alpha_given="alpha" in given)
        return HANDLERS[args.command](opts)
    except (UsageError, PlanError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TxGraphError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
