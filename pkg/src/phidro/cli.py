"""Command-line front end: run, sweep, compare, calibrate, validate.

Configs are JSON objects; unknown keys are rejected with the offending key path.
Outputs are written atomically (temporary file plus rename).  Exit codes: 0 ok,
1 failed validation, 2 bad configuration or input, 3 infeasible start,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import inspect
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import problems as builtin
from .dro_inner import InnerSpec, primal_oracle, solve_inner
from .errors import (
    ConfigError,
    ContractError,
    DegenerateSupportError,
    EmptyInputError,
    InfeasibleThresholdError,
    ParameterError,
    ParseError,
    PhidroError,
    SchemaError,
    StartPointError,
)
from .gdam import GdamConfig, OptimizerTrace, run_deterministic_gdam, run_sgd, run_stochastic_gdam
from .objectives import (
    RobustnessSpec,
    StochasticProblem,
    central_difference,
    finite_difference_check,
    relative_gradient_error,
    robust_objective,
)
from .scenario import (
    DEFAULT_COLUMNS,
    BinningSpec,
    EmpiricalDistribution,
    ScenarioSet,
    bin_scenarios,
    gamma_to_rho,
    likelihood_gamma_star,
    load_csv,
)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE_START = 3
EXIT_NUMERICAL = 4

EVALUATION_DRAWS = 200
METHODS = ("gdam", "sgd")

PROBLEMS = dict(builtin.PROBLEMS)


# -- configuration -------------------------------------------------------------

def _check_keys(section: dict, allowed: Sequence[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    for key in section:
        if key not in allowed:
            path = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key {path!r}")


def _number(section: dict, key: str, where: str, default=None, integer: bool = False):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    return int(value) if integer else float(value)


@dataclass(frozen=True)
class DataConfig:
    path: str
    columns: tuple[str, ...] = DEFAULT_COLUMNS
    widths: tuple[float, ...] | None = None
    origins: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SweepConfig:
    coordinate: int
    min: float
    max: float
    steps: int


@dataclass(frozen=True)
class RunConfig:
    problem: str
    problem_params: dict
    robustness: dict
    method: str
    optimizer: GdamConfig
    data: DataConfig | None = None
    x0: tuple[float, ...] | None = None
    output: str = "."
    sweep: SweepConfig | None = None

    def robustness_spec(self) -> RobustnessSpec:
        return _build_spec(self.robustness, "robustness")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "problem": {"name": self.problem, "params": dict(self.problem_params)},
            "robustness": dict(self.robustness),
            "optimizer": {"method": self.method, **asdict(self.optimizer)},
            "output": self.output,
        }
        if self.data is not None:
            out["data"] = {k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in asdict(self.data).items() if v is not None}
        if self.x0 is not None:
            out["x0"] = list(self.x0)
        if self.sweep is not None:
            out["sweep"] = asdict(self.sweep)
        return out


_ROBUSTNESS_KEYS = {
    "deterministic": ("mode", "nominal"),
    "empirical_mean": ("mode",),
    "mean_variance": ("mode", "mu"),
    "dro_penalized": ("mode", "kind", "delta"),
    "dro_constrained": ("mode", "kind", "rho"),
}


def _build_spec(section: dict, where: str) -> RobustnessSpec:
    mode = section.get("mode")
    if mode not in _ROBUSTNESS_KEYS:
        raise ConfigError(f"{where}.mode: expected one of {sorted(_ROBUSTNESS_KEYS)}, got {mode!r}")
    _check_keys(section, _ROBUSTNESS_KEYS[mode], where)
    try:
        if mode == "deterministic":
            return RobustnessSpec.deterministic(section.get("nominal"))
        if mode == "empirical_mean":
            return RobustnessSpec.empirical_mean()
        if mode == "mean_variance":
            mu = _number(section, "mu", where)
            if mu is None or mu < 0:
                raise ConfigError(f"{where}.mu: must be >= 0, got {mu!r}")
            return RobustnessSpec.mean_variance(mu)
        kind = section.get("kind", "chi2")
        key = "delta" if mode == "dro_penalized" else "rho"
        value = _number(section, key, where)
        if value is None:
            raise ConfigError(f"{where}.{key}: required")
        if key == "delta" and not value > 0:
            raise ConfigError(f"{where}.delta: must be > 0, got {value!r}")
        if key == "rho" and not value >= 0:
            raise ConfigError(f"{where}.rho: must be >= 0, got {value!r}")
        if mode == "dro_penalized":
            return RobustnessSpec.dro_penalized(kind, value)
        return RobustnessSpec.dro_constrained(kind, value)
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(raw: dict) -> RunConfig:
    """Validate a config object before anything is computed."""
    _check_keys(raw, ("problem", "robustness", "optimizer", "data", "x0", "output", "sweep"), "")

    prob = raw.get("problem")
    if prob is None:
        raise ConfigError("problem: required")
    if isinstance(prob, str):
        prob = {"name": prob}
    _check_keys(prob, ("name", "params"), "problem")
    name = prob.get("name")
    if name not in PROBLEMS:
        raise ConfigError(f"problem.name: expected one of {sorted(PROBLEMS)}, got {name!r}")
    params = prob.get("params", {}) or {}
    allowed = list(inspect.signature(PROBLEMS[name]).parameters)
    _check_keys(params, allowed, "problem.params")

    robustness = raw.get("robustness", {"mode": "empirical_mean"})
    _build_spec(robustness, "robustness")

    opt = dict(raw.get("optimizer", {}))
    gdam_keys = [f.name for f in fields(GdamConfig)]
    _check_keys(opt, ["method", *gdam_keys], "optimizer")
    method = opt.pop("method", "gdam")
    if method not in METHODS:
        raise ConfigError(f"optimizer.method: expected one of {list(METHODS)}, got {method!r}")
    for key in gdam_keys:
        if key == "line_search":
            if key in opt and not isinstance(opt[key], bool):
                raise ConfigError(f"optimizer.line_search: expected true/false, got {opt[key]!r}")
        elif key == "emo_estimator":
            if key in opt and not isinstance(opt[key], str):
                raise ConfigError(f"optimizer.emo_estimator: expected a string, got {opt[key]!r}")
        elif key in opt:
            integer = key in ("batch_size", "max_iters", "stall_window", "seed")
            opt[key] = _number(opt, key, "optimizer", integer=integer)
    try:
        optimizer = GdamConfig(**opt)
    except ParameterError as exc:
        raise ConfigError(f"optimizer.{exc}") from None

    data = None
    if raw.get("data") is not None:
        d = raw["data"]
        _check_keys(d, ("path", "columns", "widths", "origins"), "data")
        if not isinstance(d.get("path"), str):
            raise ConfigError("data.path: required string")
        widths = d.get("widths")
        origins = d.get("origins")
        try:
            if widths is not None:
                BinningSpec(tuple(widths), tuple(origins) if origins is not None else None)
        except (ParameterError, TypeError) as exc:
            raise ConfigError(f"data.widths: {exc}") from None
        data = DataConfig(d["path"], tuple(d.get("columns", DEFAULT_COLUMNS)),
                          tuple(float(w) for w in widths) if widths is not None else None,
                          tuple(float(o) for o in origins) if origins is not None else None)

    x0 = raw.get("x0")
    if x0 is not None:
        if not isinstance(x0, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0):
            raise ConfigError("x0: expected a list of numbers")
        x0 = tuple(float(v) for v in x0)

    output = raw.get("output", ".")
    if not isinstance(output, str):
        raise ConfigError("output: expected a path string")

    sweep = None
    if raw.get("sweep") is not None:
        s = raw["sweep"]
        _check_keys(s, ("coordinate", "min", "max", "steps"), "sweep")
        sweep = SweepConfig(_number(s, "coordinate", "sweep", 0, integer=True),
                            _number(s, "min", "sweep"), _number(s, "max", "sweep"),
                            _number(s, "steps", "sweep", integer=True))
        if sweep.min is None or sweep.max is None or sweep.steps is None:
            raise ConfigError("sweep: min, max and steps are required")
        if sweep.steps < 2:
            raise ConfigError(f"sweep.steps: must be >= 2, got {sweep.steps}")
        if not sweep.max > sweep.min:
            raise ConfigError("sweep.max: must exceed sweep.min")

    return RunConfig(name, dict(params), dict(robustness), method, optimizer, data, x0, output,
                     sweep)


def load_config_file(path: str | os.PathLike) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


# -- building blocks -------------------------------------------------------------

def build_problem(cfg: RunConfig) -> StochasticProblem:
    try:
        problem = PROBLEMS[cfg.problem](**cfg.problem_params)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"problem.params: {exc}") from None
    if cfg.data is None:
        return problem
    try:
        with open(cfg.data.path, "rb") as fh:
            support = load_csv(fh, cfg.data.columns)
    except OSError as exc:
        raise ConfigError(f"data.path: cannot read {cfg.data.path}: {exc.strerror}") from None
    if cfg.data.widths is not None:
        support = bin_scenarios(support, BinningSpec(cfg.data.widths, cfg.data.origins))
    if support.dim != problem.support.dim:
        raise ConfigError(f"data.columns: {support.dim} columns for a problem with "
                          f"{problem.support.dim}-dimensional scenarios")
    return StochasticProblem(problem.name, problem.dim, problem.loss_fn, problem.grad_fn,
                             support, problem.nominal, problem.x0, problem.constraints,
                             problem.lower, problem.upper)


def optimize(problem: StochasticProblem, cfg: RunConfig) -> OptimizerTrace:
    spec = cfg.robustness_spec()
    x0 = np.array(cfg.x0) if cfg.x0 is not None else None
    if x0 is not None and x0.size != problem.dim:
        raise ConfigError(f"x0: expected {problem.dim} entries, got {x0.size}")
    dist = problem.default_distribution()
    if cfg.method == "sgd":
        return run_sgd(problem, dist, spec, cfg.optimizer, x0)
    if spec.mode == "deterministic":
        return run_deterministic_gdam(problem, spec, cfg.optimizer, x0)
    return run_stochastic_gdam(problem, dist, spec, cfg.optimizer, x0)


def evaluation_distribution(problem: StochasticProblem, seed: int) -> EmpiricalDistribution:
    """The full support, or a seeded draw of 200 scenarios when the support is larger."""
    dist = problem.default_distribution()
    if len(dist) <= EVALUATION_DRAWS:
        return dist
    idx = np.random.default_rng(seed).choice(len(dist), EVALUATION_DRAWS, replace=True, p=dist.p)
    return dist.restrict(idx)


def evaluate_design(problem: StochasticProblem, x, spec: RobustnessSpec, seed: int) -> dict:
    dist = evaluation_distribution(problem, seed)
    rep = robust_objective(problem, x, dist, spec)
    if spec.mode == "deterministic":
        losses = robust_objective(problem, x, dist, RobustnessSpec.empirical_mean())
        mean, var, all_losses = losses.mean, losses.variance, losses.losses
    else:
        mean, var, all_losses = rep.mean, rep.variance, rep.losses
    return {
        "objective": rep.value,
        "mean": mean,
        "variance": var,
        "worst_case_value": float(np.max(all_losses)),
        "worst_case_q": None if rep.worst_case_q is None else rep.worst_case_q.tolist(),
        "nominal_loss": problem.loss(x, problem.nominal),
        "scenarios": len(dist),
    }


# -- output ----------------------------------------------------------------------

def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trace_csv(trace: OptimizerTrace, problem: StochasticProblem) -> str:
    header = (["k"] + [f"x{j}" for j in range(problem.dim)]
              + ["objective", "zeta", "step", "eta"]
              + [f"g_{c.name}" for c in problem.constraints])
    lines = [",".join(header)]
    for r in trace.records:
        row = ([str(r.k)] + [_fmt(v) for v in r.x]
               + [_fmt(r.objective), _fmt(r.zeta), _fmt(r.step), _fmt(r.eta)]
               + [_fmt(v) for v in r.constraints])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def sweep_csv(values: Sequence[float], losses: Sequence[float]) -> str:
    return "xi,loss\n" + "".join(f"{_fmt(v)},{_fmt(l)}\n" for v, l in zip(values, losses))


def sweep_losses(problem: StochasticProblem, x, sweep: SweepConfig) -> tuple[np.ndarray, np.ndarray]:
    """Losses of a fixed design along one scenario coordinate, others held at nominal."""
    if not 0 <= sweep.coordinate < problem.nominal.dim:
        raise ConfigError(f"sweep.coordinate: out of range for "
                          f"{problem.nominal.dim}-dimensional scenarios")
    grid = np.linspace(sweep.min, sweep.max, sweep.steps)
    base = problem.nominal.as_array()
    losses = []
    for v in grid:
        xi = base.copy()
        xi[sweep.coordinate] = v
        losses.append(problem.loss(x, xi))
    return grid, np.array(losses)


# -- commands --------------------------------------------------------------------

def _resolve_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    raw = load_config_file(args.config)
    if isinstance(raw, dict):
        raw = dict(raw)
        if getattr(args, "seed", None) is not None:
            raw["optimizer"] = {**raw.get("optimizer", {}), "seed": args.seed}
        if getattr(args, "max_iters", None) is not None:
            raw["optimizer"] = {**raw.get("optimizer", {}), "max_iters": args.max_iters}
        if getattr(args, "out", None) is not None:
            raw["output"] = args.out
    return parse_config(raw)


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    problem = build_problem(cfg)
    trace = optimize(problem, cfg)
    spec = cfg.robustness_spec()
    result = {
        "problem": cfg.problem,
        "x": trace.x.tolist(),
        "termination": trace.termination,
        "iterations": len(trace.records),
        "seed": cfg.optimizer.seed,
        "feasible": bool(np.all(problem.constraint_values(trace.x) < 0)),
        "evaluation": evaluate_design(problem, trace.x, spec, cfg.optimizer.seed),
        "config": cfg.to_dict(),
    }
    out = Path(cfg.output)
    atomic_write(out / "trace.csv", trace_csv(trace, problem))
    atomic_write(out / "result.json", json.dumps(_json_safe(result), indent=2) + "\n")
    if cfg.sweep is not None:
        grid, losses = sweep_losses(problem, trace.x, cfg.sweep)
        atomic_write(out / "sweep.csv", sweep_csv(grid, losses))
    print(f"{cfg.problem}: x = {trace.x.tolist()} ({trace.termination}, "
          f"{len(trace.records)} iterations); results in {out}")
    return EXIT_OK


def _read_result(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from None
    if not isinstance(data, dict) or "x" not in data or "config" not in data:
        raise ConfigError(f"{path} is not a result file")
    return data


def cmd_sweep(args) -> int:
    if (args.design is None) == (args.x is None):
        raise ConfigError("give exactly one of --design RESULT.json or --x v1,v2,...")
    if args.design is not None:
        result = _read_result(args.design)
        raw = result["config"]
        x = np.array(result["x"], dtype=float)
    else:
        raw = None
        try:
            x = np.array([float(v) for v in args.x.split(",")])
        except ValueError:
            raise ConfigError(f"--x: not a list of numbers: {args.x!r}") from None
    if args.config:
        raw = load_config_file(args.config)
    elif raw is None:
        if args.problem is None:
            raise ConfigError("an inline design needs --config or --problem")
        raw = {"problem": args.problem}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    grid_raw = dict(raw.get("sweep") or {})
    for key in ("coordinate", "min", "max", "steps"):
        flag = getattr(args, key)
        if flag is not None:
            grid_raw[key] = flag
    cfg = parse_config({**raw, "sweep": grid_raw})
    problem = build_problem(cfg)
    if x.size != problem.dim:
        raise ConfigError(f"design has {x.size} entries, problem dimension is {problem.dim}")
    grid, losses = sweep_losses(problem, x, cfg.sweep)
    target = Path(args.output) if args.output else Path(args.out or cfg.output) / "sweep.csv"
    atomic_write(target, sweep_csv(grid, losses))
    print(f"max loss {_fmt(losses.max())} at xi = {_fmt(grid[int(np.argmax(losses))])}; "
          f"written to {target}")
    return EXIT_OK


COMPARE_FIELDS = ("mean", "variance", "worst_case_value", "nominal_loss")


def cmd_compare(args) -> int:
    if len(args.results) < 2:
        raise ConfigError("compare needs at least two result files")
    rows = []
    for path in args.results:
        data = _read_result(path)
        ev = data.get("evaluation")
        if not isinstance(ev, dict) or any(k not in ev for k in COMPARE_FIELDS):
            raise ConfigError(f"{path} lacks evaluation statistics")
        rows.append({"file": path, "problem": data.get("problem"),
                     "mode": data["config"].get("robustness", {}).get("mode"),
                     **{k: ev[k] for k in COMPARE_FIELDS}})
    if len({r["problem"] for r in rows}) != 1:
        raise ConfigError("results come from different problems")
    width = max(len(r["file"]) for r in rows)
    lines = [f"{'design':<{width}}  {'mode':<16}" + "".join(f"{k:>18}" for k in COMPARE_FIELDS)]
    for r in rows:
        lines.append(f"{r['file']:<{width}}  {str(r['mode']):<16}"
                     + "".join(f"{r[k]:>18.10g}" for k in COMPARE_FIELDS))
    print("\n".join(lines))
    if args.out:
        atomic_write(Path(args.out) / "compare.json", json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    columns = tuple(c.strip() for c in args.columns.split(","))
    try:
        with open(args.csv, "rb") as fh:
            support = load_csv(fh, columns)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc.strerror}") from None
    if args.width is not None:
        widths = tuple(float(w) for w in args.width.split(","))
        origins = tuple(float(o) for o in args.origin.split(",")) if args.origin else None
        support = bin_scenarios(support, BinningSpec(widths, origins))
    gamma = likelihood_gamma_star(support, args.alpha)
    rho = gamma_to_rho(support, gamma)
    result = {"support_size": len(support), "counts": list(support.counts),
              "values": support.values.tolist(), "gamma_star": gamma, "rho": rho,
              "alpha": args.alpha}
    text = json.dumps(_json_safe(result), indent=2) + "\n"
    print(text, end="")
    if args.out:
        atomic_write(Path(args.out) / "calibration.json", text)
    return EXIT_OK


# -- validation suite ------------------------------------------------------------

def _interior_points(problem: StochasticProblem, rng: np.random.Generator, count: int,
                     h: float) -> list[np.ndarray]:
    """Random strictly feasible points at least ``10 h`` inside the box."""
    lo = problem.lower if problem.lower is not None else problem.x0 - 1.0
    hi = problem.upper if problem.upper is not None else problem.x0 + 1.0
    margin = 10.0 * h
    points = []
    for _ in range(100 * count):
        x = rng.uniform(lo + margin, hi - margin)
        if np.all(problem.constraint_values(x) < 0):
            points.append(x)
            if len(points) == count:
                break
    return points


def check_gradients(problem: StochasticProblem, points: int = 20, seed: int = 0,
                    h: float = 1e-6) -> float:
    """Worst loss/constraint gradient error over random interior points."""
    rng = np.random.default_rng(seed)
    return max(finite_difference_check(problem, x, h)
               for x in _interior_points(problem, rng, points, h))


def check_dro_gradient(problem: StochasticProblem, spec: RobustnessSpec, points: int = 20,
                       seed: int = 0, h: float = 1e-6, batch: int = 8) -> float:
    """Worst error of the robust batch gradient against central differences of its value."""
    rng = np.random.default_rng(seed)
    dist = problem.default_distribution()
    worst = 0.0
    for x in _interior_points(problem, rng, points, h):
        sub = dist.restrict(rng.choice(len(dist), size=batch, replace=True, p=dist.p))
        rep = robust_objective(problem, x, sub, spec)
        fd = central_difference(lambda z: robust_objective(problem, z, sub, spec).value, x, h)
        worst = max(worst, relative_gradient_error(fd, rep.gradient))
    return worst


def oracle_suite(instances: int = 200, seed: int = 0) -> float:
    """Worst ``|Psi_dual - Psi_oracle| / (1 + |Psi|)`` over random small instances."""
    rng = np.random.default_rng(seed)
    kinds = ("chi2", "kl", "burg")
    worst = 0.0
    for i in range(instances):
        n = int(rng.integers(2, 7))
        f = rng.uniform(-5.0, 5.0, n)
        p = rng.dirichlet(np.ones(n))
        kind = kinds[i % 3]
        if (i // 3) % 2 == 0:
            spec = InnerSpec.penalized(kind, (0.05, 0.5, 5.0)[(i // 6) % 3])
        else:
            spec = InnerSpec.constrained(kind, (0.01, 0.1, 0.5)[(i // 6) % 3])
        dual = solve_inner(f, p, spec).psi
        oracle = primal_oracle(f, p, spec, seed=i).psi
        worst = max(worst, abs(dual - oracle) / (1.0 + abs(dual)))
    return worst


GRADIENT_TOL = 1e-5
DRO_GRADIENT_TOL = 1e-4
ORACLE_TOL = 1e-6


def cmd_validate(args) -> int:
    names = [args.problem] if args.problem else sorted(PROBLEMS)
    for name in names:
        if name not in PROBLEMS:
            raise ConfigError(f"unknown problem {name!r}")
    ok = True
    for name in names:
        problem = PROBLEMS[name]()
        err = check_gradients(problem)
        dro = check_dro_gradient(problem, RobustnessSpec.dro_penalized("chi2", 0.5))
        passed = err <= GRADIENT_TOL and dro <= DRO_GRADIENT_TOL
        ok &= passed
        print(f"{name}: gradient error {err:.3e}, robust gradient error {dro:.3e} "
              f"{'ok' if passed else 'FAIL'}")
    if args.oracle_instances > 0:
        start = time.perf_counter()
        worst = oracle_suite(args.oracle_instances)
        passed = worst <= ORACLE_TOL
        ok &= passed
        print(f"dual vs oracle on {args.oracle_instances} instances: worst {worst:.3e} in "
              f"{time.perf_counter() - start:.1f} s {'ok' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VALIDATION_FAILED


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phidro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a design and write trace and result")
    run.add_argument("--config", required=False)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="evaluate a fixed design along a scenario grid")
    sweep.add_argument("--config")
    sweep.add_argument("--design", help="result JSON whose final design is swept")
    sweep.add_argument("--x", help="inline design, comma separated")
    sweep.add_argument("--problem")
    sweep.add_argument("--coordinate", type=int)
    sweep.add_argument("--min", type=float)
    sweep.add_argument("--max", type=float)
    sweep.add_argument("--steps", type=int)
    sweep.add_argument("--out")
    sweep.add_argument("--output", help="CSV path (default OUT/sweep.csv)")
    sweep.set_defaults(func=cmd_sweep)

    compare = sub.add_parser("compare", help="tabulate statistics of several results")
    compare.add_argument("results", nargs="+")
    compare.add_argument("--out")
    compare.set_defaults(func=cmd_compare)

    cal = sub.add_parser("calibrate", help="likelihood-robust radius from observed data")
    cal.add_argument("--csv", required=True)
    cal.add_argument("--columns", default=",".join(DEFAULT_COLUMNS))
    cal.add_argument("--width", help="bin widths, comma separated")
    cal.add_argument("--origin", help="bin origins, comma separated")
    cal.add_argument("--alpha", type=float, default=0.05)
    cal.add_argument("--out")
    cal.set_defaults(func=cmd_calibrate)

    val = sub.add_parser("validate", help="gradient checks and the dual-vs-oracle suite")
    val.add_argument("--problem")
    val.add_argument("--oracle-instances", type=int, default=200, dest="oracle_instances")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except StartPointError as exc:
        print(f"error: infeasible start: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE_START
    except (ConfigError, ParameterError, ContractError, SchemaError, ParseError, EmptyInputError,
            DegenerateSupportError, InfeasibleThresholdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhidroError, ArithmeticError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
