"""Batch front end: config parsing, run pipelines, CSV/JSON artifacts.

Usage: sobfrac <verify|solve|optimize> --config <path> [--out <dir>] [--seed <n>]

The config is sectioned key=value text ([problem], [solver], [cost],
[optimize], [output]); unknown keys are rejected with their line number.
Every run writes report.json with the effective config echo and the
hypothesis-check report; solve and optimize additionally emit the CSV
artifacts described in the README.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, SobfracError
from .fracops import TimeGrid
from .mild_solver import (Nonlinearity, ProblemSpec, ZERO_NONLINEARITY,
                          picard_solve, sin_gradient)
from .optctrl import (ControlBundle, CostSpec, admissibility_value,
                      bundle_from_array, cost_J, hypothesis_check,
                      optimize_controls, project_admissible, zero_bundle)
from .solution_ops import SolutionOperatorCache
from .specfun import FracOrder
from .spectral import SpectralField, field_to_grid, collocation_grid, measure_bounds
from .verification import run_battery

_SCHEMA = {
    "problem": {"alpha", "q", "p", "horizon", "modes", "steps", "u0", "v0",
                "nonlocal", "nonlinearity", "controls", "r_max"},
    "solver": {"tol", "max_iter", "quad_nodes"},
    "cost": {"state_weight", "control_weight"},
    "optimize": {"budget", "grad_tol", "fd_step", "control_modes", "radius", "init"},
    "output": {"directory", "seed"},
}

_REQUIRED = (("problem", "alpha"), ("problem", "horizon"),
             ("problem", "modes"), ("problem", "steps"))

_DEFAULTS = {
    ("problem", "q"): "0.25",
    ("problem", "p"): "2.0",
    ("problem", "u0"): "",
    ("problem", "v0"): "",
    ("problem", "nonlocal"): "",
    ("problem", "nonlinearity"): "zero",
    ("problem", "controls"): "0",
    ("problem", "r_max"): "2",
    ("solver", "tol"): "1e-8",
    ("solver", "max_iter"): "80",
    ("solver", "quad_nodes"): "200",
    ("cost", "state_weight"): "1.0",
    ("cost", "control_weight"): "1.0",
    ("optimize", "budget"): "60",
    ("optimize", "grad_tol"): "1e-4",
    ("optimize", "fd_step"): "1e-4",
    ("optimize", "control_modes"): "4",
    ("optimize", "radius"): "1.0",
    ("optimize", "init"): "zero",
    ("output", "directory"): "out",
    ("output", "seed"): "0",
}


@dataclass
class RunConfig:
    """Validated run description assembled from one config file."""

    mode: str
    problem: ProblemSpec
    solver_tol: float
    solver_max_iter: int
    quad_nodes: int
    cost: CostSpec
    budget: int
    grad_tol: float
    fd_step: float
    control_modes: int
    radius: float
    init_kind: str
    out_dir: str
    seed: int
    echo: dict = field(default_factory=dict)


def _parse_modes_list(text: str, mode_count: int, line: int) -> SpectralField:
    coeffs = np.zeros(mode_count)
    if text.strip():
        for chunk in text.replace(",", " ").split():
            if ":" not in chunk:
                raise ConfigError(f"expected mode:coefficient, got {chunk!r}", line)
            n_str, v_str = chunk.split(":", 1)
            try:
                n, v = int(n_str), float(v_str)
            except ValueError:
                raise ConfigError(f"bad mode entry {chunk!r}", line) from None
            if not 1 <= n <= mode_count:
                raise ConfigError(f"mode {n} outside 1..{mode_count}", line)
            coeffs[n - 1] = v
    return SpectralField(coeffs)


def _parse_nonlocal(text: str, line: int) -> tuple:
    terms = []
    if text.strip():
        for chunk in text.replace(",", " ").split():
            if "@" not in chunk:
                raise ConfigError(f"expected weight@time, got {chunk!r}", line)
            c_str, t_str = chunk.split("@", 1)
            try:
                terms.append((float(c_str), float(t_str)))
            except ValueError:
                raise ConfigError(f"bad nonlocal entry {chunk!r}", line) from None
    return tuple(terms)


def _parse_nonlinearity(text: str, line: int) -> Nonlinearity:
    text = text.strip()
    if text == "zero" or not text:
        return ZERO_NONLINEARITY
    if text.startswith("sin_grad"):
        gain = 1.0
        if ":" in text:
            try:
                gain = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad sin_grad gain in {text!r}", line) from None
        return sin_gradient(gain)
    raise ConfigError(f"unknown nonlinearity {text!r}", line)


def parse_config(text: str, mode: str = "solve") -> RunConfig:
    """Parse and fully validate the sectioned key=value config format."""
    if mode not in ("verify", "solve", "optimize"):
        raise ConfigError(f"unknown mode {mode!r}")
    entries: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value, got {stripped!r}", lineno)
        if section is None:
            raise ConfigError("key outside any section", lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        entries[(section, key)] = (value, lineno)

    for sk in _REQUIRED:
        if sk not in entries:
            raise ConfigError(f"missing required key {sk[1]!r} in section [{sk[0]}]")
    for sk, default in _DEFAULTS.items():
        entries.setdefault(sk, (default, 0))

    def get(section, key, conv, check=None, describe=""):
        value, line = entries[(section, key)]
        try:
            out = conv(value)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"cannot parse {key}={value!r}", line) from None
        if check is not None and not check(out):
            raise ConfigError(f"{key}={value} out of {describe}", line)
        return out, line

    alpha, a_line = get("problem", "alpha", float)
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha out of (0,1]: {alpha}", a_line)
    q, q_line = get("problem", "q", float)
    if not 0.0 < q < 1.0:
        raise ConfigError(f"q out of (0,1): {q}", q_line)
    p, p_line = get("problem", "p", float)
    if not p > 1.0:
        raise ConfigError(f"p out of (1,inf): {p}", p_line)
    horizon, _ = get("problem", "horizon", float, lambda v: v > 0, "(0,inf)")
    modes, _ = get("problem", "modes", int, lambda v: v >= 1, "[1,inf)")
    steps, _ = get("problem", "steps", int, lambda v: v >= 2, "[2,inf)")
    controls, _ = get("problem", "controls", int, lambda v: v >= 0, "[0,inf)")
    r_max, _ = get("problem", "r_max", int, lambda v: v >= 1, "[1,inf)")

    u0_text, u0_line = entries[("problem", "u0")]
    v0_text, v0_line = entries[("problem", "v0")]
    nl_text, nl_line = entries[("problem", "nonlocal")]
    f_text, f_line = entries[("problem", "nonlinearity")]

    try:
        problem = ProblemSpec(
            order=FracOrder(alpha, q=q, p=p),
            horizon=horizon, mode_count=modes, step_count=steps,
            u0=_parse_modes_list(u0_text, modes, u0_line),
            v0=_parse_modes_list(v0_text, modes, v0_line),
            nonlocal_terms=_parse_nonlocal(nl_text, nl_line),
            nonlinearity=_parse_nonlinearity(f_text, f_line),
            control_count=controls, r_max=r_max)
    except SobfracError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), nl_line) from exc

    tol, _ = get("solver", "tol", float, lambda v: v > 0, "(0,inf)")
    max_iter, _ = get("solver", "max_iter", int, lambda v: v >= 1, "[1,inf)")
    quad_nodes, _ = get("solver", "quad_nodes", int, lambda v: v >= 16, "[16,inf)")
    state_w, _ = get("cost", "state_weight", float, lambda v: v >= 0, "[0,inf)")
    control_w, _ = get("cost", "control_weight", float, lambda v: v >= 0, "[0,inf)")
    budget, _ = get("optimize", "budget", int, lambda v: v >= 1, "[1,inf)")
    grad_tol, _ = get("optimize", "grad_tol", float, lambda v: v > 0, "(0,inf)")
    fd_step, _ = get("optimize", "fd_step", float, lambda v: v > 0, "(0,inf)")
    control_modes, _ = get("optimize", "control_modes", int,
                           lambda v: 1 <= v <= modes, f"[1,{modes}]")
    radius, _ = get("optimize", "radius", float, lambda v: v > 0, "(0,inf)")
    init_kind, init_line = entries[("optimize", "init")]
    init_kind = init_kind.strip()
    if init_kind not in ("zero", "random"):
        raise ConfigError(f"init must be zero or random, got {init_kind!r}", init_line)
    out_dir, _ = entries[("output", "directory")]
    seed, _ = get("output", "seed", int)

    echo = {f"{section}.{key}": entries[(section, key)][0]
            for section, key in sorted(entries)}
    echo["mode"] = mode
    return RunConfig(mode=mode, problem=problem, solver_tol=tol,
                     solver_max_iter=max_iter, quad_nodes=quad_nodes,
                     cost=CostSpec(state_w, control_w), budget=budget,
                     grad_tol=grad_tol, fd_step=fd_step,
                     control_modes=control_modes, radius=radius,
                     init_kind=init_kind, out_dir=out_dir.strip() or "out",
                     seed=seed, echo=echo)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row)
                 for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _trajectory_artifacts(out: Path, traj, mode_count: int) -> None:
    ts = traj.grid.nodes()
    n_x = 4 * mode_count
    xs = collocation_grid(n_x)
    rows = []
    for m, t in enumerate(ts):
        vals = field_to_grid(traj.field(m), n_x)
        rows.extend((float(t), float(x), float(v)) for x, v in zip(xs, vals))
    _write_csv(out / "trajectory.csv", "t,x,u", rows)
    rows = []
    for m, t in enumerate(ts):
        rows.extend((float(t), n + 1, float(c))
                    for n, c in enumerate(traj.coeffs[m]))
    _write_csv(out / "modes.csv", "t,n,coefficient", rows)


def _measured_constants(config: RunConfig) -> dict:
    b = measure_bounds(max(config.problem.mode_count, 4),
                       np.linspace(0.0, config.problem.horizon, 17)[1:],
                       q=config.problem.order.q)
    return {"C1": b.C1, "C2": b.C2, "M0": b.M0, "Mq": b.Mq, "q": b.q}


def run(config: RunConfig) -> int:
    """Execute one pipeline; returns the process exit status."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "mode": config.mode,
        "config": config.echo,
        "hypothesis_check": hypothesis_check(config.problem),
    }
    status = 0
    try:
        if config.mode == "verify":
            rows = run_battery()
            _write_csv(out / "verify.csv", "check,detail,value,threshold,status",
                       [(r.name, r.detail, r.value, r.threshold,
                         "pass" if r.passed else "fail") for r in rows])
            report["verify"] = {
                "total": len(rows),
                "failed": [r.name for r in rows if not r.passed],
            }
            status = 0 if all(r.passed for r in rows) else 1
        elif config.mode == "solve":
            cache = SolutionOperatorCache(config.problem.order,
                                          config.problem.mode_count,
                                          node_count=config.quad_nodes)
            traj, solve_report = picard_solve(
                config.problem, cache=cache, tol=config.solver_tol,
                max_iter=config.solver_max_iter)
            _trajectory_artifacts(out, traj, config.problem.mode_count)
            report["solve"] = {
                "iterations": solve_report.iterations,
                "residual_history": solve_report.residual_history,
                "converged": solve_report.converged,
                "contraction_ratio": solve_report.contraction_ratio,
                "snapped_nonlocal_times": [
                    list(s) for s in solve_report.snapped_nonlocal_times],
            }
            report["measured_constants"] = _measured_constants(config)
        else:
            rng = np.random.default_rng(config.seed)
            grid = TimeGrid(config.problem.horizon, config.problem.step_count)
            k = config.problem.control_count
            if k < 1:
                raise ConfigError("optimize mode requires problem.controls >= 1")
            if config.init_kind == "zero":
                init = zero_bundle(grid, k, config.control_modes, config.radius)
            else:
                x0 = rng.uniform(-1.0, 1.0,
                                 size=(k, grid.step_count, config.control_modes))
                init = project_admissible(
                    bundle_from_array(x0, grid, config.radius))
            bundle, traj, log = optimize_controls(
                config.problem, config.cost, init, budget=config.budget,
                grad_tol=config.grad_tol, fd_step=config.fd_step,
                solve_tol=config.solver_tol)
            _write_csv(out / "descent.csv", "iteration,J",
                       [(i, float(j)) for i, j in enumerate(log.cost_values)])
            rows = []
            for j, ctrl in enumerate(bundle.controls):
                for m, t in enumerate(grid.nodes()):
                    rows.extend((j + 1, float(t), n + 1, float(c))
                                for n, c in enumerate(ctrl.coeffs[m]))
            _write_csv(out / "controls.csv", "control,t,n,coefficient", rows)
            _trajectory_artifacts(out, traj, config.problem.mode_count)
            report["optimize"] = {
                "cost_values": [float(j) for j in log.cost_values],
                "stationarity": log.stationarity,
                "converged": log.converged,
                "budget_exhausted": log.budget_exhausted,
                "inner_solves": log.inner_solves,
                "final_cost": float(log.cost_values[-1]),
                "admissibility_value": admissibility_value(bundle),
            }
            report["measured_constants"] = _measured_constants(config)
            status = 0 if log.converged else 1
    except SobfracError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        extra = getattr(exc, "residual_history", None)
        if extra:
            report["error"]["residual_history"] = list(extra)
        status = 1
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8")
    return status


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return str(obj)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sobfrac",
        description="Verify, solve, or optimize the fractional evolution instance "
                    "described by a config file.")
    parser.add_argument("mode", choices=("verify", "solve", "optimize"))
    parser.add_argument("--config", required=True, help="path to the config file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, mode=args.mode)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        config.out_dir = args.out
        config.echo["output.directory"] = args.out
    if args.seed is not None:
        config.seed = args.seed
        config.echo["output.seed"] = str(args.seed)
    status = run(config)
    print(f"sobfrac {args.mode}: {'ok' if status == 0 else 'FAILED'} "
          f"(artifacts in {config.out_dir})")
    return status


if __name__ == "__main__":
    sys.exit(main())
