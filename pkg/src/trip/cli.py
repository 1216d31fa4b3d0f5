"""``trip`` command line: synth, solve, eval, pipeline, verify-theory.

Exit codes: 0 success, 1 usage or parse error, 2 pipeline failure,
3 verification failure.
"""
import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__, fileio
from .evaluation import AlignmentError, compute_error_report
from .graphsolve import SolverDivergedError
from .locrecover import DisconnectedGraphError
from .pipeline import PipelineConfig, PipelineError, run_trip
from .synthgen import InfeasibleConfigError, SceneConfig, generate_scene
from .viewgraph import GraphInputError, build_viewing_graph

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("trip")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ arguments

def _add_scene_args(p):
    p.add_argument("--geometry", choices=("grid", "torus"), default="grid")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k-good", type=int, default=8)
    p.add_argument("--q", type=float, default=0.0, help="corrupted edge fraction")
    p.add_argument("--sigma", type=float, default=0.0, help="tangent noise level")
    p.add_argument("--model", choices=("uniform", "clustered"), default="uniform")
    p.add_argument("--seed", type=int, default=0)


def _add_solver_args(p):
    d = PipelineConfig()
    p.add_argument("--gamma", type=float, default=d.gamma, help="target coverage in (0, 1]")
    p.add_argument("--m-min", type=int, default=d.m_min)
    p.add_argument("--collinearity-eps", type=float, default=d.collinearity_eps)
    p.add_argument("--residual-max", type=float, default=d.residual_max)
    p.add_argument("--pool-cap", type=int, default=d.pool_cap)
    p.add_argument("--loss", choices=("cauchy", "welsch", "tukey", "tls"), default=d.loss,
                   help="loss for scale synchronization")
    p.add_argument("--c", type=float, default=d.c,
                   help="Cauchy scale of the location stage (and of scale sync when --stages 1)")
    p.add_argument("--tau", type=float, default=d.tau, help="annealing ratio")
    p.add_argument("--stages", type=int, default=d.stages,
                   help="annealing stages for scale synchronization (1 = fixed scale c)")
    p.add_argument("--sigma0", type=_sigma0, default=d.sigma0,
                   help="first annealing scale, or 'auto' for the largest initial residual")
    p.add_argument("--sigma-min", type=float, default=d.sigma_min, help="annealing floor")
    p.add_argument("--solver", choices=("exact", "fast"), default=None,
                   help="solver for both stages (overrides the per-stage flags)")
    p.add_argument("--scale-solver", choices=("exact", "fast"), default=d.scale_solver)
    p.add_argument("--location-solver", choices=("exact", "fast"), default=d.location_solver)
    p.add_argument("--scale-max-outer", type=int, default=d.scale_max_outer)
    p.add_argument("--location-max-outer", type=int, default=d.location_max_outer)
    p.add_argument("--max-inner", type=int, default=d.max_inner)
    p.add_argument("--no-continuation", action="store_true",
                   help="start the location stage directly at scale c")
    p.add_argument("--threads", type=int, default=d.threads)


def _pipeline_config(a):
    cfg = PipelineConfig(
        gamma=a.gamma, m_min=a.m_min, collinearity_eps=a.collinearity_eps,
        residual_max=a.residual_max, pool_cap=a.pool_cap, loss=a.loss, c=a.c, tau=a.tau,
        stages=a.stages, sigma0=a.sigma0, sigma_min=a.sigma_min,
        scale_solver=a.solver or a.scale_solver, location_solver=a.solver or a.location_solver,
        scale_max_outer=a.scale_max_outer, location_max_outer=a.location_max_outer,
        max_inner=a.max_inner, seed=getattr(a, "seed", 0), threads=a.threads,
        location_continuation=not a.no_continuation,
    )
    try:
        return cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scene_config(a):
    cfg = SceneConfig(geometry=a.geometry, n=a.n, k_good=a.k_good, q=a.q, sigma=a.sigma,
                      model=a.model, seed=a.seed)
    try:
        return cfg.validate()
    except InfeasibleConfigError as exc:
        raise UsageError(str(exc)) from None


def _sigma0(text):
    if text == "auto":
        return None
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("sigma0 must be positive or 'auto'")
    return v


def _int_range(text):
    """'6..10' -> [6, ..., 10]; '6,8' -> [6, 8]."""
    out = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


# ---------------------------------------------------------------- operations

def write_scene(scene, outdir):
    os.makedirs(outdir, exist_ok=True)
    paths = {k: os.path.join(outdir, f) for k, f in
             (("measurements", "measurements.txt"), ("ground_truth", "ground_truth.txt"),
              ("labels", "labels.txt"), ("scene", "scene.json"))}
    fileio.write_measurements(paths["measurements"], scene.edges, scene.dirs)
    fileio.write_points(paths["ground_truth"], np.arange(scene.n), scene.locations)
    fileio.write_labels(paths["labels"], scene.edges, scene.corrupt)
    fileio.write_json(paths["scene"], {"scene": scene.config.to_dict(),
                                       "corrupt_fraction": scene.corrupt_fraction,
                                       "edges": int(len(scene.edges)),
                                       "tool_version": __version__})
    return paths


def solve_measurements(ij_ext, vec, cfg, universe=None):
    """Run the pipeline on external-id measurements.

    Returns (external ids of located nodes, xyz, report, result).
    """
    index = fileio.NodeIndex.from_ids(ij_ext, universe)
    g = build_viewing_graph(len(index), (index.local(ij_ext), vec))
    res = run_trip(g, cfg)
    rep = res.report
    ext_nodes = index.external(res.locations.nodes)
    cov = rep["coverage"]
    cov["nodes"] = ext_nodes.tolist()
    cov["missing_nodes"] = index.external(np.asarray(cov["missing_nodes"], dtype=np.int64)).tolist()
    cov["num_nodes"] = len(index)
    return ext_nodes, res.locations.x, rep, res


def evaluation_report(est, gt, nodes=None, runtime=0.0, coverage=None):
    t0 = time.perf_counter()
    er = compute_error_report(est, gt, nodes, runtime=runtime, coverage=coverage)
    wanted = sorted(int(v) for v in nodes) if nodes is not None else sorted(gt)
    return {
        "config": {"tool_version": __version__, "node_set": nodes is not None},
        "stages": {"alignment": {"transform": er.transform}},
        "coverage": {"requested": len(wanted), "evaluated": len(er.nodes),
                     "missing_nodes": er.missing},
        "errors": {"median": er.median, "mean": er.mean, "p90": er.p90,
                   "per_node": dict(zip(map(str, er.nodes), er.errors))},
        "timings": {"eval": time.perf_counter() - t0, "solve": runtime},
    }


def _write_per_node_csv(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,error\n")
        for k, v in report["errors"]["per_node"].items():
            fh.write(f"{k},{fileio.FLOAT_FMT % v}\n")


def _emit(report, path):
    text = fileio.dumps_json(report)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------------ commands

def cmd_synth(a):
    scene = generate_scene(_scene_config(a))
    paths = write_scene(scene, a.out)
    print(fileio.dumps_json({"scene": scene.config.to_dict(), "files": paths,
                             "corrupt_fraction": scene.corrupt_fraction}))
    return EXIT_OK


def cmd_solve(a):
    cfg = _pipeline_config(a)
    ij, vec = fileio.read_measurements(a.measurements)
    if len(ij) == 0:
        raise UsageError(f"{a.measurements}: no measurements")
    universe = fileio.read_node_set(a.nodes) if a.nodes else None
    ids, x, rep, _ = solve_measurements(ij, vec, cfg, universe)
    rep["config"]["measurements"] = os.path.abspath(a.measurements)
    fileio.write_points(a.out, ids, x)
    rep["config"]["locations"] = os.path.abspath(a.out)
    _emit(rep, a.report)
    return EXIT_OK


def cmd_eval(a):
    est = fileio.read_points(a.locations)
    gt = fileio.read_points(a.ground_truth)
    nodes = fileio.read_node_set(a.nodes) if a.nodes else None
    rep = evaluation_report(est, gt, nodes)
    rep["config"].update(locations=os.path.abspath(a.locations),
                         ground_truth=os.path.abspath(a.ground_truth))
    if a.per_node_csv:
        _write_per_node_csv(a.per_node_csv, rep)
    _emit(rep, a.report)
    return EXIT_OK


def cmd_pipeline(a):
    scfg = _scene_config(a)
    cfg = _pipeline_config(a)
    t0 = time.perf_counter()
    scene = generate_scene(scfg)
    t_synth = time.perf_counter() - t0
    if a.out_dir:
        write_scene(scene, a.out_dir)
    ids, x, rep, res = solve_measurements(scene.edges, scene.dirs, cfg, np.arange(scene.n))
    ev = evaluation_report(dict(zip(ids.tolist(), x)), dict(enumerate(scene.locations)),
                           ids.tolist(), runtime=rep["timings"]["total"],
                           coverage=rep["coverage"]["achieved"])
    rep["config"]["scene"] = scfg.to_dict()
    rep["coverage"]["corrupt_fraction"] = scene.corrupt_fraction
    rep["errors"] = ev["errors"]
    rep["stages"]["alignment"] = ev["stages"]["alignment"]
    rep["timings"]["synth"] = t_synth
    rep["timings"]["eval"] = ev["timings"]["eval"]
    if a.out_dir:
        fileio.write_points(os.path.join(a.out_dir, "locations.txt"), ids, x)
        fileio.write_node_set(os.path.join(a.out_dir, "nodes.txt"), ids)
        fileio.write_json(os.path.join(a.out_dir, "report.json"), rep)
    _emit(rep, a.report)
    return EXIT_OK


def cmd_verify_theory(a):
    from .theorychecks import exact_recovery_experiment, verify_theory

    ns = _int_range(a.johnson_n)
    if any(n < 6 or n > 14 for n in ns):
        raise UsageError("--johnson-n values must lie in [6, 14]")
    rows = verify_theory(ns, decay=False)
    if a.decay_n > 0:
        tr = exact_recovery_experiment(n=a.decay_n, num_corrupt=a.decay_corrupt,
                                       tau=a.tau, stages=a.stages, seed=a.seed)
        tag = f"decay n={a.decay_n} bad={len(tr.corrupt_edges)}"
        rows += [
            (f"{tag} valid instance", tr.valid, f"delta_E={tr.delta_E}"),
            (f"{tag} non-increasing", tr.non_increasing(),
             " ".join(f"{e:.1e}" for e in tr.errors)),
            (f"{tag} final <= 1e-6", tr.final_error <= 1e-6, f"{tr.final_error:.2e}"),
            (f"{tag} clean lengths <= 1e-5", tr.length_rel_error <= 1e-5,
             f"{tr.length_rel_error:.2e}"),
        ]
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    failed = sum(not r[1] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser():
    p = _Parser(prog="trip", description="Triangle-based translation averaging.")
    p.add_argument("--version", action="version", version=f"trip {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="generate a synthetic scene")
    _add_scene_args(s)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("solve", help="estimate locations from a measurements file")
    s.add_argument("measurements")
    s.add_argument("--out", required=True, help="locations file to write")
    s.add_argument("--report", help="JSON report path (default: stdout)")
    s.add_argument("--nodes", help="file listing every camera id (isolated ones included)")
    s.add_argument("--seed", type=int, default=0)
    _add_solver_args(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("eval", help="align estimated locations to ground truth")
    s.add_argument("locations")
    s.add_argument("ground_truth")
    s.add_argument("--nodes", help="restrict statistics to this node set")
    s.add_argument("--report", help="JSON report path (default: stdout)")
    s.add_argument("--per-node-csv", help="write per-node errors as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("pipeline", help="synth, solve and eval in one run")
    _add_scene_args(s)
    _add_solver_args(s)
    s.add_argument("--out-dir", help="also write scene, locations and report files here")
    s.add_argument("--report", help="JSON report path (default: stdout)")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("verify-theory", help="Johnson Green forms and annealed decay")
    s.add_argument("--johnson-n", default="6..12", help="e.g. 6..10 or 6,8")
    s.add_argument("--decay-n", type=int, default=30, help="0 skips the decay experiment")
    s.add_argument("--decay-corrupt", type=int, default=5)
    s.add_argument("--tau", type=float, default=0.5)
    s.add_argument("--stages", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_verify_theory)
    return p


def main(argv=None):
    try:
        a = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return a.func(a)
    except (UsageError, fileio.ParseError, GraphInputError, InfeasibleConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, DisconnectedGraphError, SolverDivergedError, AlignmentError) as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
