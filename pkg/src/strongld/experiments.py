"""
Experiment runners behind the command line.

Each runner takes an :class:`ExperimentConfig` and an output directory,
writes its CSV files there and returns an :class:`ExperimentReport`. All
files start with a ``#`` metadata block (preset tag, seeds, dt, versions and
the full config) and contain no timestamps, so re-running a config gives
byte-identical output.
"""
from dataclasses import dataclass, field as dc_field
import os

import numpy as np

from . import __version__
from .action import quasipotential
from .config import emit_config
from .errors import StrongLDError
from .integrate import Trajectory, WienerPath, euler_maruyama_paths, format_float, ode_solve, two_noise_shocks
from .master import (
    cubic_residual,
    cubic_stochastic_residual,
    delta_curve,
    dwell_residual,
    generic_residual,
    residual_sde_generic,
    sde_residual,
    solve_lambda_path,
)
from .mc import SWEEP_COLUMNS, conditional_sweep, eps_sweep

__all__ = [
    "ExperimentReport",
    "run_compare",
    "run_compare_stochastic",
    "run_sweep",
    "run_action",
    "run_wiener_gen",
    "metadata_lines",
    "probe_nodes",
]


@dataclass
class ExperimentReport:
    """Tables written by a runner.

    ``complete`` is False when some node or rung did not converge; the files
    are still written and the CLI exits with status 2.
    """

    columns: list
    rows: list
    metadata: list
    complete: bool = True
    files: dict = dc_field(default_factory=dict)
    sweeps: list = dc_field(default_factory=list)
    notes: list = dc_field(default_factory=list)


_NOT_ECHOED = ("workers =", "directory =")


def metadata_lines(config, extra=()):
    """Comment lines (without the leading ``# ``) identifying a run."""
    g = config.grid()
    lines = [
        f"preset={config.tag or 'none'}",
        f"seed={config.master_seed} wiener_seed={config.wiener_seed}",
        f"dt={format_float(g.dt)} t0={format_float(g.t0)} t1={format_float(g.t1)} steps={g.steps}",
        f"version=strongld-{__version__} numpy-{np.__version__}",
    ]
    lines.extend(extra)
    for ln in emit_config(config).splitlines():
        # thread count and output location do not affect results
        if ln.strip() and not ln.startswith(_NOT_ECHOED):
            lines.append("config: " + ln)
    return lines


def _write_table(path, columns, rows, metadata):
    out = [f"# {m}" for m in metadata]
    out.append(",".join(columns))
    out.extend(",".join(r) for r in rows)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise StrongLDError(f"cannot write {path}: {exc.strerror}") from exc


def _ensure_dir(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise StrongLDError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc


def _vector_columns(name, d):
    return [name] if d == 1 else [f"{name}_{i + 1}" for i in range(d)]


def _deterministic_residual(config, field):
    if config.model == "cubic":
        return cubic_residual(config.cubic_params())
    if config.model == "double_well":
        return dwell_residual(config.dwell_params())
    return generic_residual(field, np.array(config.x0), max_dt=min(config.grid().dt, 1e-3))


def _comparison_rows(grid, states, lam_path):
    delta = delta_curve(Trajectory(grid, states), lam_path)
    rows = []
    for k, t in enumerate(grid.times):
        rows.append([format_float(t)]
                    + [format_float(v) for v in states[k]]
                    + [format_float(v) for v in lam_path.lambdas[k]]
                    + [format_float(delta[k]), format_float(lam_path.residual_norms[k]),
                       str(int(lam_path.converged[k]))])
    return rows


def run_compare(config, out_dir=None):
    """Classical trajectory, quasiclassical path and their distance; writes ``compare.csv``."""
    out_dir = out_dir or config.output_dir
    _ensure_dir(out_dir)
    field, grid, d = config.field(), config.grid(), config.state_dimension
    x0 = np.array(config.x0)
    classical = ode_solve(field, x0, grid, on_divergence="nan").states
    lam_path = solve_lambda_path(_deterministic_residual(config, field), x0, grid)
    columns = (["t"] + _vector_columns("x_classical", d) + _vector_columns("lambda", d)
               + ["delta", "residual_norm", "converged"])
    rows = _comparison_rows(grid, classical, lam_path)
    meta = metadata_lines(config, [f"converged={lam_path.n_converged}/{len(grid.times)}"])
    path = os.path.join(out_dir, "compare.csv")
    _write_table(path, columns, rows, meta)
    complete = lam_path.n_converged == len(grid.times)
    notes = [] if complete else [f"{len(grid.times) - lam_path.n_converged} unconverged nodes"]
    if not np.all(np.isfinite(classical)):
        notes.append("classical trajectory diverged")
    return ExperimentReport(columns, rows, meta, complete, {"compare": path}, notes=notes)


def _wiener_for(config):
    grid, d = config.grid(), config.state_dimension
    if config.wiener == "load":
        w = WienerPath.from_csv(config.wiener_file)
        if w.grid != grid:
            raise StrongLDError(f"{config.wiener_file}: Wiener grid differs from the config grid")
        if w.dimension != d:
            raise StrongLDError(f"{config.wiener_file}: Wiener path has {w.dimension} components, model has {d}")
        return w
    return WienerPath.generate(grid, d, config.wiener_seed, label=config.tag or "none")


def probe_nodes(config):
    """Grid nodes for Monte Carlo probes: configured times, else the quartiles of the horizon."""
    grid = config.grid()
    times = config.probe_times or tuple(grid.t0 + q * (grid.t1 - grid.t0) for q in (0.25, 0.5, 0.75, 1.0))
    nodes = [int(round((t - grid.t0) / grid.dt)) for t in times]
    return sorted(set(min(max(k, 0), grid.steps) for k in nodes))


def _sweep_rows(report, d):
    lead = [format_float(report.t)] + [format_float(v) for v in report.lam]
    return [lead + r for r in report.rows()]


def _sweep_columns(d):
    return ["t"] + [f"lambda_{i + 1}" for i in range(d)] + SWEEP_COLUMNS


def run_compare_stochastic(config, out_dir=None):
    """Noise-driven trajectory for a recorded path vs the stochastic quasiclassical path.

    Writes ``compare_stochastic.csv`` and ``wiener.csv``; with
    ``conditional_check`` also ``conditional.csv``.
    """
    if not config.D > 0:
        raise StrongLDError("compare-stochastic needs D > 0")
    out_dir = out_dir or config.output_dir
    _ensure_dir(out_dir)
    field, grid, d = config.field(), config.grid(), config.state_dimension
    x0 = np.array(config.x0)
    wiener = _wiener_for(config)
    shocks = two_noise_shocks(wiener, config.D, 0.0, [0], d)
    states, _ = euler_maruyama_paths(field, x0, grid, np.ascontiguousarray(shocks))
    states = states[0]
    C = config.diffusion()
    if config.model == "cubic":
        residual = cubic_stochastic_residual(config.cubic_params(), config.D, wiener)
    else:
        residual = sde_residual(field, C, x0, wiener)
    lam_path = solve_lambda_path(residual, x0, grid)

    columns = (["t"] + _vector_columns("x_stochastic", d) + _vector_columns("lambda", d)
               + ["delta", "residual_norm", "converged"])
    rows = _comparison_rows(grid, states, lam_path)
    meta = metadata_lines(config, [f"D={format_float(config.D)}",
                                   f"converged={lam_path.n_converged}/{len(grid.times)}"])
    files = {}
    files["compare_stochastic"] = os.path.join(out_dir, "compare_stochastic.csv")
    _write_table(files["compare_stochastic"], columns, rows, meta)
    files["wiener"] = os.path.join(out_dir, "wiener.csv")
    wiener.to_csv(files["wiener"])

    complete = lam_path.n_converged == len(grid.times)
    notes = [] if complete else [f"{len(grid.times) - lam_path.n_converged} unconverged nodes"]
    sweeps = []
    if config.conditional_check:
        crow = []
        for k in probe_nodes(config):
            t = grid.times[k]
            lam = lam_path.lambdas[k]
            if not lam_path.converged[k]:
                complete = False
                notes.append(f"no quasiclassical value at t={t:g}; probe skipped")
                continue
            bound = float(np.linalg.norm(residual_sde_generic(field, C, lam, t, x0, wiener)))
            rep = conditional_sweep(field, config.D, wiener, lam, t, grid, config.epsilons,
                                    config.n_paths, config.master_seed, x0, bound, config.workers)
            complete = complete and not rep.failed
            sweeps.append(rep)
            crow.extend(_sweep_rows(rep, d))
        files["conditional"] = os.path.join(out_dir, "conditional.csv")
        _write_table(files["conditional"], _sweep_columns(d), crow, meta)
    return ExperimentReport(columns, rows, meta, complete, files, sweeps, notes)


def run_sweep(config, out_dir=None):
    """Noise-ladder sweeps at the probe times; writes ``sweep.csv``.

    The anchor at each probe is the quasiclassical value there plus
    ``lambda_offset``.
    """
    if not config.epsilons:
        raise StrongLDError("the epsilon ladder is empty")
    out_dir = out_dir or config.output_dir
    _ensure_dir(out_dir)
    field, grid, d = config.field(), config.grid(), config.state_dimension
    x0 = np.array(config.x0)
    lam_path = solve_lambda_path(_deterministic_residual(config, field), x0, grid)
    complete, notes, sweeps, rows = True, [], [], []
    for k in probe_nodes(config):
        t = grid.times[k]
        if not lam_path.converged[k]:
            complete = False
            notes.append(f"no quasiclassical value at t={t:g}; probe skipped")
            continue
        lam = lam_path.lambdas[k] + config.lambda_offset
        rep = eps_sweep(field, lam, t, grid, config.epsilons, config.n_paths, config.master_seed,
                        x0, config.workers)
        if rep.failed:
            complete = False
            notes.append(f"t={t:g}: every path diverged at eps={rep.failed}")
        sweeps.append(rep)
        rows.extend(_sweep_rows(rep, d))
    columns = _sweep_columns(d)
    meta = metadata_lines(config, [f"lambda_offset={format_float(config.lambda_offset)}",
                                   "min_mean is the ladder minimum, a finite stand-in for the small-noise limit"])
    path = os.path.join(out_dir, "sweep.csv")
    _write_table(path, columns, rows, meta)
    return ExperimentReport(columns, rows, meta, complete, {"sweep": path}, sweeps, notes)


def run_action(config, out_dir=None):
    """Minimal action from ``x`` (default ``x0``) to ``y`` over the candidate times.

    Writes ``action.csv`` (one row per candidate time) and ``action_path.csv``
    (the minimizing path).
    """
    if not config.action_y:
        raise StrongLDError("the action run needs a target point ([action] y)")
    out_dir = out_dir or config.output_dir
    _ensure_dir(out_dir)
    field = config.field()
    x = np.array(config.action_x or config.x0)
    y = np.array(config.action_y)
    d = config.state_dimension
    if x.shape != (d,) or y.shape != (d,):
        raise StrongLDError(f"action endpoints must have {d} components")
    res = quasipotential(x, y, field, config.action_times, knots=config.knots)
    meta = metadata_lines(config, [
        "x=" + " ".join(format_float(v) for v in x),
        "y=" + " ".join(format_float(v) for v in y),
        f"value={format_float(res.value)} best_t={format_float(res.best_t)}",
    ])
    columns = ["t_candidate", "value", "converged"]
    rows = [[format_float(t), format_float(v), str(int(ok))] for t, v, ok in res.candidates]
    files = {"action": os.path.join(out_dir, "action.csv")}
    _write_table(files["action"], columns, rows, meta)
    if res.path is not None:
        files["action_path"] = os.path.join(out_dir, "action_path.csv")
        res.path.to_csv(files["action_path"], meta)
    complete = all(ok for _, _, ok in res.candidates)
    notes = [] if complete else ["minimizer did not converge for some candidate times"]
    return ExperimentReport(columns, rows, meta, complete, files, notes=notes)


def run_wiener_gen(config, out_dir=None):
    """Generate the configured Wiener path and write ``wiener.csv``."""
    out_dir = out_dir or config.output_dir
    _ensure_dir(out_dir)
    w = WienerPath.generate(config.grid(), config.state_dimension, config.wiener_seed,
                            label=config.tag or "none")
    path = os.path.join(out_dir, "wiener.csv")
    w.to_csv(path)
    return ExperimentReport(["t"] + [f"w_{i + 1}" for i in range(w.dimension)], [], [], True,
                            {"wiener": path})
