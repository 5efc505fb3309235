"""Command-line entry point: ``evogame <command> --config scenario.json``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .agents import ExtinctionError, run_micro
from .analysis import bifurcation_scan, fairness_timeline, theorem_report
from .config import ConfigError, build_agent_model, build_game, derive_seed, load, with_learner_param
from .dynamics import DynamicsSpec, IntegrationError, basins, integrate, stabilization_outcome_scan, time_to_dominance
from .game import ExtrapolationError, find_equilibria, fitness_table
from .io import Provenance, ensure_dir, write_csv, write_json
from .learners import NotSeparableError
from .population import SimplexError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (IntegrationError, ExtinctionError, NotSeparableError, ExtrapolationError,
                  ArithmeticError, np.linalg.LinAlgError, SimplexError, ValueError, RuntimeError)


def _p_cols(K, prefix="p"):
    return [f"{prefix}_{k + 1}" for k in range(K)]


def _search(cfg):
    a = cfg["analysis"]
    return {"grid_resolution": a.get("grid_resolution"), "refine_tol": a["refine_tol"],
            "eq_tol": a.get("eq_tol"), "h_step": a["h_step"]}


def _initial_state(cfg):
    if "initial_state" not in cfg["analysis"]:
        raise ConfigError("/analysis/initial_state", "this command needs an initial state")
    return np.asarray(cfg["analysis"]["initial_state"], dtype=float)


def _dyn_meta(spec):
    return {"variant": spec.variant, "dt": spec.dt, "horizon": spec.horizon}


def _trajectory_rows(traj, with_n=False):
    for i, (t, p, f) in enumerate(zip(traj.times, traj.states, traj.fitness)):
        row = [t, *p, *f]
        if with_n:
            row.append(traj.extra["N"][i])
        yield row


def cmd_game(cfg, base, out, threads):
    g = build_game(cfg, base)
    states, F, se = fitness_table(g, cfg["analysis"]["table_resolution"], threads)
    cols = _p_cols(g.K) + _p_cols(g.K, "F") + (_p_cols(g.K, "SE") if se is not None else [])
    rows = [list(s) + list(f) + (list(e) if se is not None else [])
            for s, f, e in zip(states, F, se if se is not None else F)]
    write_csv(os.path.join(out, "fitness_table.csv"), cols, rows, Provenance(cfg, cfg["seed"], "game"))


def cmd_simulate(cfg, base, out, threads):
    g = build_game(cfg, base)
    spec = DynamicsSpec(**cfg["dynamics"])
    traj = integrate(g, _initial_state(cfg), spec, derive_seed(cfg["seed"], 1))
    prov = Provenance(cfg, cfg["seed"], "simulate", _dyn_meta(spec))
    write_csv(os.path.join(out, "trajectory.csv"), ["t"] + _p_cols(g.K) + _p_cols(g.K, "F"),
              _trajectory_rows(traj), prov)
    write_json(os.path.join(out, "summary.json"), {
        "terminal_state": traj.final_state,
        "terminal_fitness": traj.fitness[-1],
        "terminated_by": traj.terminated_by,
        "final_time": traj.times[-1],
        "rows": len(traj),
        "time_to_dominance": time_to_dominance(traj),
    }, prov)


def cmd_equilibria(cfg, base, out, threads):
    g = build_game(cfg, base)
    eqs = find_equilibria(g, threads=threads, **_search(cfg))
    write_json(os.path.join(out, "equilibria.json"), eqs.to_dict(),
               Provenance(cfg, cfg["seed"], "equilibria"))


def cmd_basins(cfg, base, out, threads):
    g = build_game(cfg, base)
    spec = DynamicsSpec(**cfg["dynamics"])
    eqs = find_equilibria(g, threads=threads, **_search(cfg))
    rows, eqs = basins(g, cfg["analysis"]["basin_resolution"], spec, eqs,
                       cfg["analysis"]["label_radius"], threads)
    prov = Provenance(cfg, cfg["seed"], "basins", _dyn_meta(spec))
    write_csv(os.path.join(out, "basins.csv"), _p_cols(g.K, "p0") + ["label", "time_to_outcome"],
              ([*p0, label, t] for p0, label, t in rows), prov)
    counts = {}
    for _, label, _ in rows:
        counts[label] = counts.get(label, 0) + 1
    write_json(os.path.join(out, "basins.json"), {
        "labels": {f"eq{i}": e.to_dict() for i, e in enumerate(eqs)},
        "counts": dict(sorted(counts.items())),
    }, prov)


def cmd_bifurcate(cfg, base, out, threads):
    bif = cfg["analysis"].get("bifurcation")
    if bif is None:
        raise ConfigError("/analysis/bifurcation", "this command needs a bifurcation block")
    with_learner_param(cfg, bif["param"], bif["values"][0])  # validates the parameter name
    res = bifurcation_scan(lambda v: build_game(with_learner_param(cfg, bif["param"], v), base),
                           bif["param"], bif["values"], threads=threads, **_search(cfg))
    prov = Provenance(cfg, cfg["seed"], "bifurcate")
    write_json(os.path.join(out, "bifurcation.json"), res.to_dict(), prov)
    rows = []
    for v, eqs in zip(res.values, res.equilibria):
        labels = [e.stability for e in eqs if e.kind == "nash"] if eqs is not None else []
        rows.append([v, None if eqs is None else eqs.n_kind("nash"),
                     *(labels.count(s) for s in ("stable", "unstable", "saddle", "inconclusive"))])
    write_csv(os.path.join(out, "bifurcation.csv"),
              ["value", "nash_count", "stable", "unstable", "saddle", "inconclusive"], rows, prov)


def cmd_agents(cfg, base, out, threads):
    if "agents" not in cfg:
        raise ConfigError("/agents", "this command needs an agents block")
    g = build_game(cfg, base)
    a = cfg["agents"]
    model = build_agent_model(a)
    prov = Provenance(cfg, cfg["seed"], "agents", {"model": a["model"], "horizon": a["horizon"]})
    summary = []
    for r in range(a["replicates"]):
        traj = run_micro(g, a["counts"], model, a["horizon"], derive_seed(cfg["seed"], 2 + r))
        write_csv(os.path.join(out, f"agents_{r}.csv"),
                  ["t"] + _p_cols(g.K) + _p_cols(g.K, "F") + ["N"],
                  _trajectory_rows(traj, with_n=True), prov)
        summary.append({"replicate": r, "final_state": traj.final_state,
                        "final_N": traj.extra["N"][-1], "terminated_by": traj.terminated_by,
                        "rows": len(traj)})
    write_json(os.path.join(out, "agents.json"), {"replicates": summary}, prov)


def cmd_report(cfg, base, out, threads):
    g = build_game(cfg, base)
    a = cfg["analysis"]
    opts = a.get("report", {})
    report = theorem_report(g, rng=derive_seed(cfg["seed"], 3), fairness_tol=a["fairness_tol"],
                            search=_search(cfg), threads=threads, **opts)
    prov = Provenance(cfg, cfg["seed"], "report")
    if "initial_state" in a:
        spec = DynamicsSpec(**cfg["dynamics"])
        traj = integrate(g, a["initial_state"], spec, derive_seed(cfg["seed"], 1))
        tl = fairness_timeline(traj, eps=a["fairness_eps"])
        write_csv(os.path.join(out, "fairness_timeline.csv"), tl.header(), tl.rows(), prov)
        report["fairness_timeline"] = {
            "initial_disparity": tl.disparity[0],
            "final_disparity": tl.disparity[-1],
            "masked_exclusion": tl.masked_exclusion,
            "exits": tl.exit_events,
        }
    if "stabilization" in a and g.K == 2:
        st = a["stabilization"]
        p_star = np.asarray(st.get("p_star", [0.5, 0.5]), dtype=float)
        offsets = st.get("offsets", [0.0])
        ests = [p_star + d * np.array([1.0, -1.0]) for d in offsets]
        scan = stabilization_outcome_scan(g, ests, DynamicsSpec(**cfg["dynamics"]), p_star, threads)
        report["stabilization_scan"] = [dict(r, offset=d) for r, d in zip(scan, offsets)]
    write_json(os.path.join(out, "report.json"), report, prov)


COMMANDS = {
    "game": cmd_game,
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "basins": cmd_basins,
    "bifurcate": cmd_bifurcate,
    "agents": cmd_agents,
    "report": cmd_report,
}


def _threads(value):
    if value is None:
        value = os.environ.get("EVOGAME_THREADS")
    if value is None:
        return os.cpu_count() or 1
    n = int(value)
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="evogame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"evogame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--output-dir", help="directory for output files")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", help="worker threads (default: EVOGAME_THREADS or CPU count)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        cfg, base = load(args.config, seed=args.seed)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"evogame: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = ensure_dir(args.output_dir or cfg.get("output_dir") or ".")
    prov = Provenance(cfg, cfg["seed"], args.command)
    write_json(os.path.join(out, "config.json"), cfg, prov)
    try:
        COMMANDS[args.command](cfg, base, out, threads)
    except ConfigError as exc:
        print(f"evogame: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"evogame: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
