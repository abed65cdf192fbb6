"""Command-line interface: ``greedybn <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .complexity import NODE_CLASSES, CostParams, node_cost
from .dataset import DataError, SplitSpec, load_csv, load_schema, write_csv
from .graph import Cpdag, Dag, GraphError, cpdag_of, format_arcs, parse_arcs, shd
from .localfit import FitError, FitMethod, load_model, save_model
from .sampling import KINDS, SampleSpec, random_reference_model, sample
from .scoring import ScoreKind, ScoreSpec, score_graph
from .search import SearchParams, greedy_search

ARMS = {
    "QR": (ScoreKind.BIC, FitMethod.QR),
    "1P": (ScoreKind.BIC, FitMethod.CLOSED1),
    "2P": (ScoreKind.BIC, FitMethod.CLOSED2),
    "PRED": (ScoreKind.PRED, FitMethod.CLOSED2),
}
BENCH_FIELDS = ("size", "replicate", "arm", "mean_seconds", "sd_seconds", "shd",
                "evaluations", "normalized_time", "status")


def _load_graph(path):
    """A Dag or Cpdag from a model JSON file or an arc-list file."""
    path = Path(path)
    if path.suffix == ".json":
        return load_model(path).dag
    return parse_arcs(path.read_text())


def _as_cpdag(g):
    return g if isinstance(g, Cpdag) else cpdag_of(g)


def _load_data(path, schema_path=None, model=None):
    schema = None
    if schema_path:
        schema = load_schema(schema_path)
    elif model is not None:
        schema = model.schema
    return load_csv(path, schema)


def _score_spec(score, estimator, test_fraction, seed, max_parents=None) -> ScoreSpec:
    kind = ScoreKind(score)
    split = None
    if kind is ScoreKind.PRED:
        split = SplitSpec(0.25 if test_fraction is None else test_fraction, seed)
    return ScoreSpec(kind, FitMethod(estimator), split, max_parents)


def cmd_learn(args) -> int:
    ds = _load_data(args.data, args.schema)
    spec = _score_spec(args.score, args.estimator, args.test_fraction, args.seed)
    params = SearchParams(args.tabu, args.tabu_list, args.restarts, args.perturb,
                          args.seed, args.max_parents)
    model, trace = greedy_search(ds, spec, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    (out / "arcs.txt").write_text(format_arcs(model.dag))
    trace.to_csv(out / "trace.csv")
    print(f"score {trace.score!r} arcs {len(model.dag.arcs)} evaluations {trace.evaluations} "
          f"seconds {trace.seconds:.3f}", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    model = load_model(args.model)
    ds = sample(model, SampleSpec(args.n, args.seed))
    write_csv(ds, args.out)
    return 0


def cmd_reference(args) -> int:
    model = random_reference_model(args.kind, args.nodes, args.density, args.seed,
                                   levels=args.levels, max_parents=args.max_parents)
    save_model(model, args.out)
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model) if args.model else None
    dag = model.dag if model is not None else _load_graph(args.graph)
    if not isinstance(dag, Dag):
        raise GraphError("scoring needs a DAG, not a CPDAG")
    ds = _load_data(args.data, args.schema, model)
    spec = _score_spec(args.score, args.estimator, args.test_fraction, args.seed)
    print(repr(score_graph(ds, spec, dag)))
    return 0


def cmd_shd(args) -> int:
    print(shd(_as_cpdag(_load_graph(args.first)), _as_cpdag(_load_graph(args.second))))
    return 0


def cmd_cpdag(args) -> int:
    text = format_arcs(_as_cpdag(_load_graph(args.graph)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cost(args) -> int:
    rows = []
    for cls in args.node_class:
        for n in args.n:
            for j in args.j:
                p = CostParams(n=n, j=j, D=args.D, l=args.l)
                rows.append((cls, n, j, args.D, args.l, node_cost(cls, p)))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("class", "n", "j", "D", "l", "count"))
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


# -- bench ------------------------------------------------------------------

@dataclass
class BenchConfig:
    sizes: list
    reference: dict = field(default_factory=lambda: {"kind": "clgbn", "nodes": 20, "density": 1.5})
    model: str | None = None
    replicates: int = 5
    repeats: int = 5
    arms: list = field(default_factory=lambda: list(ARMS))
    test_fraction: float = 0.25
    max_parents: int | None = 5
    seed: int = 0
    t0: int = 0
    t1: int = 10
    r0: int = 0
    r1: int = 5

    def __post_init__(self):
        if not self.sizes or any(int(s) < 1 for s in self.sizes):
            raise ValueError("bench sizes must be positive")
        if self.replicates < 1 or self.repeats < 1:
            raise ValueError("replicates and repeats must be at least 1")
        if not self.arms or any(a not in ARMS for a in self.arms):
            raise ValueError(f"arms must be a non-empty subset of {sorted(ARMS)}")

    @classmethod
    def from_json(cls, obj: dict) -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown bench config keys: {sorted(unknown)}")
        return cls(**obj)


def run_bench(cfg: BenchConfig, log=None) -> list[dict]:
    """Time each arm on seeded samples; returns one row per size/replicate/arm."""
    if cfg.model:
        model = load_model(cfg.model)
    else:
        ref = dict(cfg.reference)
        model = random_reference_model(ref.pop("kind"), ref.pop("nodes"), ref.pop("density"),
                                       ref.pop("seed", cfg.seed), **ref)
    truth = cpdag_of(model.dag)
    params = SearchParams(cfg.t0, cfg.t1, cfg.r0, cfg.r1, cfg.seed, cfg.max_parents)
    rows = []
    for size in cfg.sizes:
        for rep in range(cfg.replicates):
            ds = sample(model, SampleSpec(int(size), cfg.seed + 1000 * rep + 1))
            block = []
            for arm in cfg.arms:
                kind, method = ARMS[arm]
                split = SplitSpec(cfg.test_fraction, cfg.seed + rep) if kind is ScoreKind.PRED else None
                spec = ScoreSpec(kind, method, split, cfg.max_parents)
                row = {"size": int(size), "replicate": rep, "arm": arm}
                try:
                    times = []
                    for _ in range(cfg.repeats):
                        t = time.perf_counter()
                        learned, trace = greedy_search(ds, spec, params)
                        times.append(time.perf_counter() - t)
                    row.update(
                        mean_seconds=statistics.fmean(times),
                        sd_seconds=statistics.stdev(times) if len(times) > 1 else 0.0,
                        shd=shd(cpdag_of(learned.dag), truth),
                        evaluations=trace.evaluations,
                        status="ok",
                    )
                except (FitError, DataError, GraphError, ValueError) as exc:
                    row.update(mean_seconds=math.nan, sd_seconds=math.nan, shd="",
                               evaluations="", status=f"error: {exc}")
                block.append(row)
                if log:
                    log(row)
            base = next((r["mean_seconds"] for r in block if r["arm"] == "QR"), None)
            for r in block:
                ok = base is not None and r["status"] == "ok" and base > 0
                r["normalized_time"] = r["mean_seconds"] / base if ok else ""
            rows.extend(block)
    return rows


def write_bench_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def cmd_bench(args) -> int:
    with open(args.config) as fh:
        cfg = BenchConfig.from_json(json.load(fh))

    def log(row):
        print(f"n={row['size']} rep={row['replicate']} {row['arm']}: "
              f"{row['mean_seconds']:.3f}s shd={row['shd']} {row['status']}", file=sys.stderr)

    write_bench_csv(run_bench(cfg, log), args.out)
    return 0


# -- argument parsing ------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _fraction(s):
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return v


def _add_score_flags(p):
    p.add_argument("--score", choices=[k.value for k in ScoreKind], default="bic")
    p.add_argument("--estimator", choices=[m.value for m in FitMethod], default="qr")
    p.add_argument("--test-fraction", type=_fraction, default=None,
                   help="held-out fraction for --score pred (default 0.25)")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--schema", help="schema JSON fixing column kinds and level order")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greedybn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a network from a CSV file")
    p.add_argument("data")
    _add_score_flags(p)
    p.add_argument("--tabu", type=_nonneg_int, default=10, help="tabu iterations t0")
    p.add_argument("--tabu-list", type=_positive_int, default=10, help="tabu list length t1")
    p.add_argument("--restarts", type=_nonneg_int, default=0, help="random restarts r0")
    p.add_argument("--perturb", type=_positive_int, default=5, help="moves per restart r1")
    p.add_argument("--max-parents", type=_positive_int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("sample", help="draw a dataset from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reference", help="generate a random reference model")
    p.add_argument("--kind", choices=KINDS, default="clgbn")
    p.add_argument("--nodes", type=_positive_int, required=True)
    p.add_argument("--density", type=float, default=1.5, help="arcs per node")
    p.add_argument("--levels", type=_positive_int, default=3)
    p.add_argument("--max-parents", type=_positive_int, default=None)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("score", help="score a structure on data")
    p.add_argument("data")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="arc-list file")
    g.add_argument("--model", help="model JSON file")
    _add_score_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("shd", help="structural Hamming distance between two structures")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_shd)

    p = sub.add_parser("cpdag", help="equivalence-class representative of a DAG")
    p.add_argument("graph")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cpdag)

    p = sub.add_parser("cost", help="operation counts of local fits")
    p.add_argument("--class", dest="node_class", choices=NODE_CLASSES, nargs="+", required=True)
    p.add_argument("--n", type=_nonneg_int, nargs="+", required=True)
    p.add_argument("--j", type=_nonneg_int, nargs="+", default=[0, 1, 2])
    p.add_argument("--D", type=_nonneg_int, default=0)
    p.add_argument("--l", type=_positive_int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("bench", help="time the estimator/score arms")
    p.add_argument("config", help="bench configuration JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, GraphError, FitError, ValueError, OSError, KeyError) as exc:
        print(f"greedybn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
