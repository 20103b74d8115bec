"""Command-line interface.

Subcommands: ``solve`` for one pair of structured-object JSON files,
``synthetic`` (recover / delta-sweep / roc) for planted-feature recovery
experiments, ``pairwise`` for a distance matrix over a directory of
objects, and ``redistrict`` (compare / matrix / cluster) for plan
comparison on a precinct graph.

Every run writes a ``manifest.json`` (command line, resolved config,
input paths, output directory, seed, tool version) next to its outputs.
Numeric CSV cells carry 12 significant digits.  Exit codes: 0 on success,
2 on validation errors, 3 on solver errors; errors are reported as a JSON
object on stderr.  The ``FSFGW_LOG`` environment variable sets the log
level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    FEATURE_NORMS,
    MODES,
    AsymmetricCost,
    DimensionMismatch,
    FsFgwConfig,
    FsfgwError,
    InvalidConfig,
    InvalidMeasure,
    ShapeMismatch,
    validate_pair,
)
from .fgw import InstanceTooLarge
from .pipelines import (
    DisconnectedAfterRetries,
    PairwiseSolveError,
    SyntheticSpec,
    compare_plans,
    complete_linkage_cluster,
    generate_synthetic_pair,
    load_plan_csv,
    load_precinct_graph,
    load_structured_object,
    pairwise_distance_matrix,
    roc_sweep,
    separation_metric,
)
from .suppression import solve_fsfgw
from .transport import Infeasible, NumericalFailure

logger = logging.getLogger("fsfgw")

_SOLVER_ERRORS = (
    Infeasible,
    NumericalFailure,
    InstanceTooLarge,
    DisconnectedAfterRetries,
    PairwiseSolveError,
)


def _g(x) -> str:
    """12-significant-digit cell formatting for CSV output."""

    return format(float(x), ".12g")


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _config_dict(config: FsFgwConfig) -> dict:
    doc = asdict(config)
    doc["lambda"] = doc.pop("lam")
    if doc["groups"] is not None:
        doc["groups"] = [list(g) for g in doc["groups"]]
    return doc


def _write_manifest(
    out: Path, command: list[str], config: FsFgwConfig | None, inputs: list[str], seed: int
) -> None:
    doc = {
        "command": command,
        "config": _config_dict(config) if config is not None else None,
        "input_paths": inputs,
        "output_dir": str(out),
        "seed": seed,
        "tool_version": __version__,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_groups(path: str | None):
    if path is None:
        return None
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, list) or not all(isinstance(g, list) for g in doc):
        raise InvalidConfig(f"{path}: groups file must be a JSON list of index lists")
    return tuple(tuple(int(i) for i in g) for g in doc)


def _resolve_level(mode: str, lam, fraction):
    """Regularization level for a mode: simplex modes take none; lasso and
    ridge fall back to a suppression fraction of 0.3 when neither flag was
    given (passing both is rejected by the config)."""

    if mode in ("lasso", "ridge") and lam is None and fraction is None:
        return None, 0.3
    return lam, fraction


def _config_from_args(args, groups=None) -> FsFgwConfig:
    if groups is None:
        groups = _load_groups(getattr(args, "groups", None))
    lam, fraction = _resolve_level(args.mode, args.lam, args.fraction)
    return FsFgwConfig(
        mode=args.mode,
        alpha=args.alpha,
        q=args.q,
        lam=lam,
        suppression_fraction=fraction,
        groups=groups,
        feature_norm=args.norm,
        max_outer_iter=args.max_outer_iter,
        seed=args.seed,
    )


def _add_config_flags(parser: argparse.ArgumentParser, default_norm: str) -> None:
    parser.add_argument("--alpha", type=float, default=0.5, help="trade-off in [0, 1]")
    parser.add_argument("--q", type=float, default=2.0, help="cost exponent (>= 1)")
    parser.add_argument("--mode", choices=MODES, default="lasso")
    parser.add_argument(
        "--lambda", dest="lam", type=float, default=None, help="fixed regularization level"
    )
    parser.add_argument(
        "--f",
        dest="fraction",
        type=float,
        default=None,
        help="suppression fraction in (0, 1), calibrates lambda "
        "(lasso/ridge default to 0.3 when neither --lambda nor --f is given)",
    )
    parser.add_argument(
        "--groups", default=None, help="JSON file with a list of feature-index lists"
    )
    parser.add_argument("--norm", choices=FEATURE_NORMS, default=default_norm)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-outer-iter", type=int, default=50)
    parser.add_argument("--out", default="fsfgw_out", help="output directory")


def _weights_csv_rows(result, names=None) -> list[list[str]]:
    rows = []
    for r, (w, s) in enumerate(zip(result.weights.w, result.scores)):
        name = names[r] if names else f"f{r}"
        rows.append([str(r), name, _g(w), _g(s)])
    return rows


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    x = load_structured_object(args.x)
    y = load_structured_object(args.y)
    validate_pair(x, y)
    config = _config_from_args(args)
    result = solve_fsfgw(x, y, config)
    out = _out_dir(args)
    with open(out / "result.json", "w") as fh:
        json.dump(result.to_json_dict(), fh)
        fh.write("\n")
    _write_csv(
        out / "weights.csv",
        ["feature", "name", "weight", "score"],
        _weights_csv_rows(result, x.feature_names),
    )
    _write_manifest(out, args.command_line, config, [str(args.x), str(args.y)], args.seed)
    print(
        f"objective {_g(result.objective)} converged {result.converged} "
        f"outer_iters {result.outer_iters}"
    )
    return 0


def _synthetic_spec(args) -> SyntheticSpec:
    return SyntheticSpec(
        n=args.n, d=args.d, k=args.k, delta=args.delta, geo_radius=args.radius, seed=args.seed
    )


def _default_groups(d: int, k: int):
    """Correct grouping for planted recovery: the differentiating block,
    then the shared features chunked into blocks of the same size."""

    groups = [tuple(range(k))]
    rest = list(range(k, d))
    for start in range(0, len(rest), k):
        groups.append(tuple(rest[start : start + k]))
    return tuple(g for g in groups if g)


def cmd_synthetic_recover(args) -> int:
    spec = _synthetic_spec(args)
    groups = _load_groups(args.groups)
    if args.mode == "group_simplex" and groups is None:
        groups = _default_groups(spec.d, max(spec.k, 1))
    config = _config_from_args(args, groups=groups)
    x, y, diff = generate_synthetic_pair(spec)
    result = solve_fsfgw(x, y, config)
    sep = separation_metric(result.weights, diff)
    out = _out_dir(args)
    rows = []
    for r in range(spec.d):
        rows.append(
            [str(r), f"f{r}", _g(result.weights.w[r]), _g(result.scores[r]),
             str(int(r in diff))]
        )
    _write_csv(
        out / "weights.csv", ["feature", "name", "weight", "score", "differentiating"], rows
    )
    _write_manifest(out, args.command_line, config, [], args.seed)
    print(f"separation {_g(sep)}")
    return 0


def _parse_deltas(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidConfig(f"delta range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise InvalidConfig("delta count must be >= 1")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_synthetic_delta_sweep(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for mode in modes:
        if mode not in MODES:
            raise InvalidConfig(f"unknown mode {mode!r} in --modes")
    deltas = _parse_deltas(args.deltas)
    groups = _load_groups(args.groups)
    out = _out_dir(args)
    rows = []
    for delta in deltas:
        spec = SyntheticSpec(
            n=args.n, d=args.d, k=args.k, delta=delta, geo_radius=args.radius, seed=args.seed
        )
        x, y, diff = generate_synthetic_pair(spec)
        for mode in modes:
            mode_groups = groups
            if mode == "group_simplex" and mode_groups is None:
                mode_groups = _default_groups(spec.d, max(spec.k, 1))
            lam, fraction = _resolve_level(
                mode,
                args.lam if mode in ("lasso", "ridge") else None,
                args.fraction if mode in ("lasso", "ridge") else None,
            )
            config = FsFgwConfig(
                mode=mode,
                alpha=args.alpha,
                q=args.q,
                lam=lam,
                suppression_fraction=fraction,
                groups=mode_groups if mode == "group_simplex" else None,
                feature_norm=args.norm,
                max_outer_iter=args.max_outer_iter,
                seed=args.seed,
            )
            result = solve_fsfgw(x, y, config)
            sep = separation_metric(result.weights, diff)
            rows.append([_g(delta), mode, _g(sep)])
            logger.info("delta %.3g mode %s separation %.4f", delta, mode, sep)
    _write_csv(out / "sweep.csv", ["delta", "mode", "separation"], rows)
    _write_manifest(out, args.command_line, None, [], args.seed)
    print(f"wrote {len(rows)} sweep rows to {out / 'sweep.csv'}")
    return 0


def cmd_synthetic_roc(args) -> int:
    spec = _synthetic_spec(args)
    fractions = [float(v) for v in args.fracs.split(",") if v.strip()]
    sweep = roc_sweep(
        spec, args.mode, fractions, alpha=args.alpha, q=args.q, feature_norm=args.norm
    )
    out = _out_dir(args)
    rows = [[_g(p.fraction), _g(p.tpr), _g(p.fpr)] for p in sweep.points]
    _write_csv(out / "roc.csv", ["f", "tpr", "fpr"], rows)
    _write_manifest(out, args.command_line, None, [], args.seed)
    print(f"auc {_g(sweep.auc)}")
    return 0


def cmd_pairwise(args) -> int:
    obj_dir = Path(args.objects)
    files = sorted(obj_dir.glob("*.json"))
    if not files:
        raise InvalidConfig(f"no object JSON files found in {obj_dir}")
    objects = [load_structured_object(p) for p in files]
    ids = [p.stem for p in files]
    d0 = objects[0].d
    for obj, pid in zip(objects, ids):
        if obj.d != d0:
            raise DimensionMismatch(
                f"object {pid!r} has {obj.d} features, expected {d0}"
            )
    config = _config_from_args(args)
    D, records = pairwise_distance_matrix(objects, config, workers=args.workers)
    out = _out_dir(args)
    header = ["id"] + ids
    rows = [[ids[i]] + [_g(v) for v in D[i]] for i in range(len(ids))]
    _write_csv(out / "distances.csv", header, rows)
    names = objects[0].feature_names or [f"f{r}" for r in range(d0)]
    wrows = [
        [ids[rec.i], ids[rec.j]] + [_g(w) for w in rec.result.weights.w] for rec in records
    ]
    _write_csv(out / "pair_weights.csv", ["id_a", "id_b"] + list(names), wrows)
    _write_manifest(out, args.command_line, config, [str(p) for p in files], args.seed)
    print(f"wrote {len(ids)}x{len(ids)} distance matrix to {out / 'distances.csv'}")
    return 0


def _load_redistrict_inputs(args):
    graph = load_precinct_graph(args.nodes, args.edges)
    plans = [load_plan_csv(p, graph) for p in args.plans]
    return graph, plans


def cmd_redistrict_compare(args) -> int:
    graph = load_precinct_graph(args.nodes, args.edges)
    plan_p = load_plan_csv(args.plan_p, graph)
    plan_q = load_plan_csv(args.plan_q, graph)
    config = _config_from_args(args)
    comparison = compare_plans(graph, plan_p, plan_q, config)
    out = _out_dir(args)
    doc = {"plan_p": plan_p.plan_id, "plan_q": plan_q.plan_id}
    doc.update(comparison.to_json_dict())
    with open(out / "comparison.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    rows = []
    for pair, wrow in zip(comparison.matching, comparison.weight_matrix):
        rows.append([f"{pair[0]}:{pair[1]}"] + [_g(w) for w in wrow])
    _write_csv(
        out / "weight_heatmap.csv", ["district_pair"] + list(graph.feature_names), rows
    )
    _write_manifest(
        out,
        args.command_line,
        config,
        [str(args.nodes), str(args.edges), str(args.plan_p), str(args.plan_q)],
        args.seed,
    )
    print(f"total_distance {_g(comparison.total_distance)}")
    return 0


def _plan_pair_task(task):
    i, j, graph, plan_i, plan_j, config = task
    comparison = compare_plans(graph, plan_i, plan_j, config)
    return i, j, comparison.total_distance


def _plan_distance_matrix(graph, plans, config, workers: int) -> np.ndarray:
    N = len(plans)
    tasks = [
        (i, j, graph, plans[i], plans[j], config)
        for i in range(N)
        for j in range(i + 1, N)
    ]
    if workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_plan_pair_task, tasks))
    else:
        results = [_plan_pair_task(t) for t in tasks]
    D = np.zeros((N, N))
    for i, j, value in results:
        D[i, j] = D[j, i] = value
    return D


def _write_plan_matrix(out: Path, plans, D: np.ndarray) -> None:
    ids = [p.plan_id for p in plans]
    rows = [[ids[i]] + [_g(v) for v in D[i]] for i in range(len(ids))]
    _write_csv(out / "plan_distances.csv", ["id"] + ids, rows)


def cmd_redistrict_matrix(args) -> int:
    graph, plans = _load_redistrict_inputs(args)
    if len(plans) < 2:
        raise InvalidConfig("need at least two plans for a distance matrix")
    config = _config_from_args(args)
    D = _plan_distance_matrix(graph, plans, config, args.workers)
    out = _out_dir(args)
    _write_plan_matrix(out, plans, D)
    _write_manifest(
        out,
        args.command_line,
        config,
        [str(args.nodes), str(args.edges)] + [str(p) for p in args.plans],
        args.seed,
    )
    print(f"wrote {len(plans)}x{len(plans)} plan distance matrix")
    return 0


def cmd_redistrict_cluster(args) -> int:
    graph, plans = _load_redistrict_inputs(args)
    if len(plans) < 2:
        raise InvalidConfig("need at least two plans to cluster")
    config = _config_from_args(args)
    D = _plan_distance_matrix(graph, plans, config, args.workers)
    merges = complete_linkage_cluster(D)
    out = _out_dir(args)
    _write_plan_matrix(out, plans, D)
    with open(out / "dendrogram.json", "w") as fh:
        json.dump([{"a": m.a, "b": m.b, "height": m.height} for m in merges], fh, indent=2)
        fh.write("\n")
    _write_manifest(
        out,
        args.command_line,
        config,
        [str(args.nodes), str(args.edges)] + [str(p) for p in args.plans],
        args.seed,
    )
    for m in merges:
        print(f"merge {m.a} {m.b} height {_g(m.height)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsfgw",
        description="Feature-selected fused Gromov-Wasserstein solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one pair of object JSON files")
    p_solve.add_argument("x", help="first structured-object JSON file")
    p_solve.add_argument("y", help="second structured-object JSON file")
    _add_config_flags(p_solve, default_norm="per_feature")
    p_solve.set_defaults(func=cmd_solve)

    p_syn = sub.add_parser("synthetic", help="planted-feature recovery experiments")
    syn_sub = p_syn.add_subparsers(dest="synthetic_command", required=True)

    def _add_spec_flags(p):
        p.add_argument("--n", type=int, default=40)
        p.add_argument("--d", type=int, default=10)
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--delta", type=float, default=2.0)
        p.add_argument("--radius", type=float, default=0.3)

    p_rec = syn_sub.add_parser("recover", help="one recovery run")
    _add_spec_flags(p_rec)
    _add_config_flags(p_rec, default_norm="per_feature")
    p_rec.set_defaults(func=cmd_synthetic_recover)

    p_sweep = syn_sub.add_parser("delta-sweep", help="separation vs shift size")
    _add_spec_flags(p_sweep)
    p_sweep.add_argument(
        "--deltas", default="0.0:5.0:11", help="start:stop:count or comma list"
    )
    p_sweep.add_argument(
        "--modes", default="lasso,ridge,simplex,group_simplex", help="comma list"
    )
    _add_config_flags(p_sweep, default_norm="per_feature")
    p_sweep.set_defaults(func=cmd_synthetic_delta_sweep)

    p_roc = syn_sub.add_parser("roc", help="recovery ROC over suppression fractions")
    _add_spec_flags(p_roc)
    p_roc.add_argument(
        "--fracs", default="0.05,0.1,0.2,0.3,0.5,0.7", help="comma list of fractions"
    )
    _add_config_flags(p_roc, default_norm="per_feature")
    p_roc.set_defaults(func=cmd_synthetic_roc)

    p_pair = sub.add_parser("pairwise", help="distance matrix over a directory of objects")
    p_pair.add_argument("objects", help="directory of structured-object JSON files")
    p_pair.add_argument("--workers", type=int, default=1)
    _add_config_flags(p_pair, default_norm="per_feature")
    p_pair.set_defaults(func=cmd_pairwise)

    p_red = sub.add_parser("redistrict", help="district-matched plan comparison")
    red_sub = p_red.add_subparsers(dest="redistrict_command", required=True)

    p_cmp = red_sub.add_parser("compare", help="compare two plans")
    p_cmp.add_argument("nodes", help="nodes.csv")
    p_cmp.add_argument("edges", help="edges.csv")
    p_cmp.add_argument("plan_p", help="first plan CSV")
    p_cmp.add_argument("plan_q", help="second plan CSV")
    _add_config_flags(p_cmp, default_norm="per_pair")
    p_cmp.set_defaults(func=cmd_redistrict_compare)

    p_mat = red_sub.add_parser("matrix", help="plan-vs-plan distance matrix")
    p_mat.add_argument("nodes")
    p_mat.add_argument("edges")
    p_mat.add_argument("plans", nargs="+", help="plan CSV files")
    p_mat.add_argument("--workers", type=int, default=1)
    _add_config_flags(p_mat, default_norm="per_pair")
    p_mat.set_defaults(func=cmd_redistrict_matrix)

    p_clu = red_sub.add_parser("cluster", help="complete-linkage clustering of plans")
    p_clu.add_argument("nodes")
    p_clu.add_argument("edges")
    p_clu.add_argument("plans", nargs="+", help="plan CSV files")
    p_clu.add_argument("--workers", type=int, default=1)
    _add_config_flags(p_clu, default_norm="per_pair")
    p_clu.set_defaults(func=cmd_redistrict_cluster)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    level = os.environ.get("FSFGW_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    args.command_line = list(argv)
    try:
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        _report_error(exc)
        return 3
    except (FsfgwError, OSError, json.JSONDecodeError, ValueError) as exc:
        _report_error(exc)
        return 2


def _report_error(exc: Exception) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(doc), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
