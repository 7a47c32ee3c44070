"""Command-line front end.

    fracgraph solve-direct CONFIG --out DIR
    fracgraph solve-inverse CONFIG --out DIR [--tol T] [--max-iter N]
    fracgraph check-k1 CONFIG --out DIR
    fracgraph verify-operators CONFIG --out DIR [--seed S]
    fracgraph convergence CONFIG --out DIR [--levels 16x32,32x64,64x128] [--seed S]

Exit status: 0 success, 1 invalid input or infeasible problem, 2 divergence
or solver failure. ``summary.json`` is written in every case.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import Config, ConfigError, load_config, parse_levels
from .expr import ExpressionError

__all__ = ["main", "build_parser", "run_command", "read_field", "read_series", "summarize_outputs", "EXIT_OK",
           "EXIT_INVALID", "EXIT_DIVERGED"]

log = logging.getLogger("fracgraph")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2
COMMANDS = ("solve-direct", "solve-inverse", "check-k1", "verify-operators", "convergence")


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v: float) -> str:
    return repr(float(v))


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_summary(out: Path, summary: dict) -> None:
    text = json.dumps(_jsonable(summary), sort_keys=True, indent=2)
    (out / "summary.json").write_text(text + "\n", encoding="utf-8")


def write_series(path: Path, t: np.ndarray, v: np.ndarray, name: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", name])
        for a, b in zip(t, v):
            w.writerow([_fmt(a), _fmt(b)])


def read_series(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_field(path: Path, state, step: int, t: float) -> None:
    """Snapshot of a representation: columns ``edge, x, u_regular, phi``; ``b`` in the header."""
    reg = state.regular_part()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# step={step} t={_fmt(t)} b={_fmt(state.b)} singular={str(state.singular_at_vertex).lower()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge", "x", "u_regular", "phi"])
        for k, (g, r, p) in enumerate(zip(state.graph.grids, reg.values, state.phi.values), start=1):
            for x, a, b in zip(g.nodes, r, p):
                w.writerow([k, _fmt(x), _fmt(a), _fmt(b)])


def read_field(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        rows = list(csv.DictReader(fh))
    return {
        "step": int(meta["step"]),
        "t": float(meta["t"]),
        "b": float(meta["b"]),
        "singular": meta["singular"] == "true",
        "edge": np.array([int(r["edge"]) for r in rows]),
        "x": np.array([float(r["x"]) for r in rows]),
        "u_regular": np.array([float(r["u_regular"]) for r in rows]),
        "phi": np.array([float(r["phi"]) for r in rows]),
    }


def _trap_norm(t: np.ndarray, v: np.ndarray) -> float:
    dt = np.diff(t)
    return float(math.sqrt(np.sum(0.5 * dt * (v[1:] ** 2 + v[:-1] ** 2))))


def _field_stats(fields: list[dict]) -> dict:
    return {
        "field_max_abs_u_regular": max(float(np.max(np.abs(f["u_regular"]))) for f in fields),
        "field_max_abs_phi": max(float(np.max(np.abs(f["phi"]))) for f in fields),
        "field_b": [f["b"] for f in fields],
    }


def summarize_outputs(out: Path) -> dict:
    """Statistics recomputed from the files in ``out`` (compare with ``summary.json``)."""
    out = Path(out)
    stats: dict[str, Any] = {}
    if (out / "f.csv").exists():
        t, f = read_series(out / "f.csv")
        stats["f_l2_norm"] = _trap_norm(t, f)
    fields = sorted(out.glob("field_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if fields:
        stats.update(_field_stats([read_field(p) for p in fields]))
    return stats


def _write_snapshots(out: Path, solution, count: int) -> dict:
    M = solution.steps
    steps = sorted({int(round(v)) for v in np.linspace(0, M, count + 1)[1:]})
    t = solution.problem.time_grid.nodes
    for old in out.glob("field_*.csv"):
        old.unlink()
    for m in steps:
        write_field(out / f"field_{m}.csv", solution.state(m), m, t[m])
    stats = summarize_outputs(out)
    stats["snapshot_steps"] = steps
    return stats


# ---------------------------------------------------------------------------
# commands


def _base_summary(cfg: Config, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "T": cfg.T,
        "time_steps": cfg.time_steps,
        "edges": [{"length": e.length, "nodes": e.nodes} for e in cfg.edges],
        "tolerances": {"tol": cfg.options.tol, "max_iter": cfg.options.max_iter},
    }


def cmd_solve_direct(cfg: Config, out: Path, summary: dict) -> int:
    from .direct import alikhanov_margins, energy_monitor, friedrichs_check, solve_direct

    sol = solve_direct(cfg.direct_problem())
    lhs, rhs = energy_monitor(sol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs.values > 0, lhs.values / rhs.values, 0.0)
    fr = friedrichs_check(sol)
    summary["diagnostics"] = sol.diagnostics()
    summary["energy_monitor_max_ratio"] = float(ratios.max())
    summary["alikhanov_min_margin"] = float(alikhanov_margins(sol).min())
    summary["friedrichs"] = {"worst_ratio": fr.worst_ratio, "slack": fr.slack, "passed": fr.passed}
    summary.update(_write_snapshots(out, sol, cfg.options.snapshots))
    return EXIT_OK


def _inverse_problem(cfg: Config, psi_required: bool = True):
    from .direct import TimeSeries
    from .inverse import InverseProblem
    from .verify import synthesize_psi

    coeff = cfg.coefficients()
    tg = cfg.time_grid()
    g = cfg.space_time(cfg.sources.g)
    h = cfg.space_time(cfg.sources.h)
    eta = cfg.eta_representation()
    f_true = None
    if cfg.manufactured is not None:
        ft = cfg.manufactured.f_true
        f_true = lambda t: ft.evaluate(t, t=t)  # noqa: E731
        psi, _ = synthesize_psi(coeff, cfg.alpha, cfg.beta, tg, g, cfg.eta_representation, f_true,
                                cfg.manufactured.refinement, h)
    elif cfg.psi is not None:
        psi = TimeSeries(tg, cfg.psi_values())
    elif psi_required:
        raise ConfigError("psi", "psi is required unless a manufactured section is given")
    else:
        psi = TimeSeries(tg, np.zeros(tg.node_count))
    return InverseProblem(coeff, cfg.alpha, cfg.beta, tg, g, eta, psi, h), f_true


def cmd_check_k1(cfg: Config, out: Path, summary: dict) -> int:
    from .inverse import check_K1

    p, _ = _inverse_problem(cfg, psi_required=False)
    report = check_K1(p)
    summary["k1"] = report.as_dict()
    return EXIT_OK if report.feasible else EXIT_INVALID


def cmd_solve_inverse(cfg: Config, out: Path, summary: dict) -> int:
    from .inverse import DivergenceError, InfeasibleProblemError, check_K1, solve_inverse, time_l2_norm

    p, f_true = _inverse_problem(cfg)
    report = check_K1(p)
    summary["k1"] = report.as_dict()
    if not report.feasible:
        summary["error"] = str(InfeasibleProblemError(report))
        return EXIT_INVALID
    try:
        sol = solve_inverse(p, tol=cfg.options.tol, max_iter=cfg.options.max_iter)
    except DivergenceError as exc:
        summary["error"] = str(exc)
        summary["residual_history"] = exc.residual_history
        summary["neumann_bound"] = exc.neumann_bound
        summary["iteration_bound"] = exc.iteration_bound
        return EXIT_DIVERGED
    t = p.time_grid.nodes
    write_series(out / "f.csv", t, sol.f.values, "f")
    summary.update(sol.summary())
    summary["f_l2_norm"] = _trap_norm(t, sol.f.values)
    if f_true is not None:
        ft = np.asarray(f_true(t), dtype=float) * np.ones_like(t)
        summary["f_true_l2_norm"] = time_l2_norm(ft, p.time_grid)
        summary["relative_error_vs_f_true"] = time_l2_norm(sol.f.values - ft, p.time_grid) / time_l2_norm(ft, p.time_grid)
    summary.update(_write_snapshots(out, sol.z, cfg.options.snapshots))
    return EXIT_OK


def cmd_verify_operators(cfg: Config, out: Path, summary: dict) -> int:
    from .verify import operator_checks

    checks = operator_checks(cfg.graph(), cfg.coefficients(), cfg.beta, cfg.options.seed)
    summary["checks"] = {c.name: c.as_dict() for c in checks}
    summary["seed"] = cfg.options.seed
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVALID


def cmd_convergence(cfg: Config, out: Path, summary: dict) -> int:
    from .verify import convergence_study, direct_family

    family = direct_family([e.length for e in cfg.edges], cfg.gamma_fn(), cfg.alpha, cfg.beta,
                           cfg.T, seed=cfg.options.seed)
    table = convergence_study(family, cfg.options.levels)
    (out / "convergence.csv").write_text(table.to_csv(), encoding="utf-8")
    summary["levels"] = [list(lv) for lv in cfg.options.levels]
    summary["errors"] = table.errors.tolist()
    summary["orders"] = table.orders
    summary["monotone"] = table.monotone
    summary["seed"] = cfg.options.seed
    return EXIT_OK


HANDLERS = {
    "solve-direct": cmd_solve_direct,
    "solve-inverse": cmd_solve_inverse,
    "check-k1": cmd_check_k1,
    "verify-operators": cmd_verify_operators,
    "convergence": cmd_convergence,
}


def run_command(command: str, cfg: Config, out: Path) -> tuple[int, dict]:
    """Run one command; returns the exit status and the summary written to ``out``."""
    from .inverse import CompatibilityError, DivergenceError, InfeasibleProblemError
    from .spatial import SingularSystemError

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = _base_summary(cfg, command)
    try:
        status = HANDLERS[command](cfg, out, summary)
    except (InfeasibleProblemError, CompatibilityError, ConfigError, ExpressionError) as exc:
        summary["error"] = str(exc)
        status = EXIT_INVALID
    except (DivergenceError, SingularSystemError) as exc:
        summary["error"] = str(exc)
        status = EXIT_DIVERGED
    except ValueError as exc:
        summary["error"] = str(exc)
        status = EXIT_INVALID
    summary["exit_status"] = status
    write_summary(out, summary)
    return status, summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracgraph", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", type=Path, help="YAML configuration file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    parser.add_argument("--tol", type=float, help="fixed-point tolerance (overrides options.tol)")
    parser.add_argument("--max-iter", type=int, help="iteration cap (overrides options.max_iter)")
    parser.add_argument("--levels", help='convergence levels, e.g. "16x32,32x64,64x128"')
    parser.add_argument("--seed", type=int, help="seed of manufactured instances")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out: Path = args.out
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.tol is not None:
            if not args.tol > 0:
                raise ConfigError("--tol", "must be positive")
            changes["tol"] = args.tol
        if args.max_iter is not None:
            if args.max_iter < 1:
                raise ConfigError("--max-iter", "must be at least 1")
            changes["max_iter"] = args.max_iter
        if args.levels is not None:
            changes["levels"] = parse_levels(args.levels, "--levels")
        if args.seed is not None:
            changes["seed"] = args.seed
        cfg = cfg.with_options(**changes) if changes else cfg
    except (OSError, ConfigError, ExpressionError) as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_summary(out, {"command": args.command, "error": str(exc), "exit_status": EXIT_INVALID})
        print(f"fracgraph: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status, summary = run_command(args.command, cfg, out)
    if "error" in summary:
        print(f"fracgraph: {summary['error']}", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
