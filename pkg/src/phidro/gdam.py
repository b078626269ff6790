"""Log-barrier descent with fixed-length steps, deterministic and stochastic.

Each step moves a fixed distance ``beta`` along

    s = -grad f / |grad f| - zeta * grad Phi / |grad Phi|,    Phi = -sum log(-g_i)

so the barrier only bends the direction and never sets the step size.  When the
objective estimate rises across a step, ``zeta`` shrinks by ``tau`` and the
iterates are allowed closer to the boundary.  The stochastic variant draws a
fresh batch each iteration and judges the step on that same batch.  A step that
would leave the strictly feasible region is retried with half the length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._numeric import weighted_vector_sum
from .errors import (
    InfeasiblePointError,
    ParameterError,
    StartPointError,
    StationaryPoint,
    UndefinedBarrierParameter,
    UnsupportedModeError,
)
from .objectives import RobustnessSpec, StochasticProblem, robust_objective, scenario_losses
from .scenario import EmpiricalDistribution, ScenarioSet, sample_batch

ZETA_FLOOR = 1e-6
MIN_STEP = 1e-12
OBJECTIVE_TOL = 1e-12
LINE_SEARCH_HALVINGS = 8

TERMINATIONS = ("max-iters", "tolerance", "zeta-floor", "step-collapse")
EMO_ESTIMATORS = ("per_sample", "batch")


@dataclass(frozen=True)
class GdamConfig:
    zeta0: float = 0.9
    tau: float = 0.5
    beta: float = 1e-3
    batch_size: int = 16
    max_iters: int = 10_000
    stall_window: int = 1
    seed: int = 0
    momentum: float = 0.0
    line_search: bool = False
    # empirical-mean direction: average of per-sample unit directions, or the
    # unit batch-mean gradient
    emo_estimator: str = "per_sample"

    def __post_init__(self):
        checks = {
            "zeta0": 0.0 <= self.zeta0 < 1.0,
            "tau": 0.0 < self.tau < 1.0,
            "beta": self.beta > 0 and math.isfinite(self.beta),
            "batch_size": int(self.batch_size) == self.batch_size and self.batch_size >= 1,
            "max_iters": int(self.max_iters) == self.max_iters and self.max_iters >= 1,
            "stall_window": int(self.stall_window) == self.stall_window and self.stall_window >= 1,
            "seed": int(self.seed) == self.seed,
            "momentum": 0.0 <= self.momentum < 1.0,
            "emo_estimator": self.emo_estimator in EMO_ESTIMATORS,
        }
        for name, ok in checks.items():
            if not ok:
                raise ParameterError(f"{name} out of range: {getattr(self, name)!r}")


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: np.ndarray
    objective: float
    constraints: np.ndarray
    zeta: float
    step: float
    batch: tuple[int, ...]
    eta: float


@dataclass(frozen=True)
class OptimizerTrace:
    records: tuple[IterateRecord, ...]
    x: np.ndarray
    termination: str
    extra: dict = field(default_factory=dict)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def zetas(self) -> np.ndarray:
        return np.array([r.zeta for r in self.records])


# -- barrier and direction ---------------------------------------------------

def barrier_value_gradient(x, constraints) -> tuple[float, np.ndarray]:
    """``-sum log(-g_i)`` and its gradient ``sum grad g_i / (-g_i)``."""
    x = np.asarray(x, dtype=float)
    value = 0.0
    grad = np.zeros_like(x)
    for i, c in enumerate(constraints):
        g = float(c.fn(x))
        if not g < 0:
            raise InfeasiblePointError(i, g)
        value -= math.log(-g)
        grad += np.asarray(c.grad(x), dtype=float).reshape(x.shape) / (-g)
    return value, grad


def gdam_direction(grad_f, grad_phi, zeta: float) -> np.ndarray:
    """Normalized objective descent bent away from the boundary by weight ``zeta``.

    A zero objective gradient raises :class:`StationaryPoint`.  A zero barrier
    gradient (no constraints) leaves plain normalized descent.
    """
    grad_f = np.asarray(grad_f, dtype=float)
    grad_phi = np.asarray(grad_phi, dtype=float)
    nf = float(np.linalg.norm(grad_f))
    if nf == 0.0:
        raise StationaryPoint("objective gradient vanishes")
    s = -grad_f / nf
    nphi = float(np.linalg.norm(grad_phi))
    if nphi > 0.0 and zeta > 0.0:
        s = s - zeta * grad_phi / nphi
    return s


def implied_barrier_parameter(grad_f, grad_phi, zeta: float) -> float:
    """The barrier weight ``zeta |grad f| / |grad Phi|`` the direction corresponds to."""
    nphi = float(np.linalg.norm(grad_phi))
    if nphi == 0.0:
        raise UndefinedBarrierParameter("barrier gradient vanishes")
    return zeta * float(np.linalg.norm(grad_f)) / nphi


# -- shared loop -------------------------------------------------------------

@dataclass
class _Estimate:
    value: float
    grad: np.ndarray
    # unit objective direction(s) averaged with batch weights; None means use grad
    unit_descent: np.ndarray | None = None


class _Estimator:
    """Objective estimate on a fixed batch, with the direction rule of its mode."""

    def __init__(self, problem: StochasticProblem, spec: RobustnessSpec,
                 batch: EmpiricalDistribution | None, per_sample: bool):
        self.problem = problem
        self.spec = spec
        self.batch = batch
        self.per_sample = per_sample

    def value(self, x) -> float:
        if self.per_sample:
            losses, _ = scenario_losses(self.problem, x, self.batch.set.scenarios, False)
            return float(weighted_vector_sum(self.batch.p, losses[:, None])[0])
        return robust_objective(self.problem, x, self.batch, self.spec).value

    def evaluate(self, x) -> _Estimate:
        if not self.per_sample:
            rep = robust_objective(self.problem, x, self.batch, self.spec)
            return _Estimate(rep.value, rep.gradient)
        losses, grads = scenario_losses(self.problem, x, self.batch.set.scenarios)
        p = self.batch.p
        norms = np.linalg.norm(grads, axis=1)
        units = np.divide(grads, norms[:, None], out=np.zeros_like(grads), where=norms[:, None] > 0)
        value = float(weighted_vector_sum(p, losses[:, None])[0])
        return _Estimate(value, weighted_vector_sum(p, grads), weighted_vector_sum(p, units))


def _check_start(problem: StochasticProblem, x0: np.ndarray) -> None:
    g = problem.constraint_values(x0)
    if g.size and not np.all(g < 0):
        i = int(np.argmax(g))
        raise StartPointError(f"start point violates constraint {i} ({g[i]!r} >= 0)")
    if not np.array_equal(problem.clip(x0), x0):
        raise StartPointError("start point lies outside the box")


def _feasible(problem: StochasticProblem, x: np.ndarray) -> bool:
    g = problem.constraint_values(x)
    return bool(np.all(g < 0)) if g.size else True


def _loop(problem: StochasticProblem, spec: RobustnessSpec, config: GdamConfig, x0,
          next_batch, use_barrier: bool) -> OptimizerTrace:
    x = np.asarray(x0 if x0 is not None else problem.x0, dtype=float).reshape(problem.dim).copy()
    _check_start(problem, x)
    zeta = config.zeta0 if use_barrier else 0.0
    records: list[IterateRecord] = []
    before: list[float] = []
    after: list[float] = []
    smoothed = None
    termination = "max-iters"
    for k in range(config.max_iters):
        indices, estimator = next_batch()
        est = estimator.evaluate(x)
        g_vals = problem.constraint_values(x)
        if use_barrier and problem.constraints:
            _, grad_phi = barrier_value_gradient(x, problem.constraints)
        else:
            grad_phi = np.zeros_like(x)
        try:
            if est.unit_descent is not None:
                if not np.any(est.unit_descent):
                    raise StationaryPoint("every sampled gradient vanishes")
                s = _averaged_direction(est.unit_descent, grad_phi, zeta)
            else:
                s = gdam_direction(est.grad, grad_phi, zeta)
        except StationaryPoint:
            records.append(IterateRecord(k, x.copy(), est.value, g_vals, zeta, 0.0,
                                         indices, math.nan))
            termination = "tolerance"
            break
        try:
            eta = implied_barrier_parameter(est.grad, grad_phi, zeta)
        except UndefinedBarrierParameter:
            eta = math.nan
        if config.momentum > 0.0 and smoothed is not None:
            s = config.momentum * smoothed + (1.0 - config.momentum) * s
        smoothed = s
        norm_s = float(np.linalg.norm(s))
        if norm_s == 0.0:
            records.append(IterateRecord(k, x.copy(), est.value, g_vals, zeta, 0.0, indices, eta))
            termination = "tolerance"
            break
        unit = s / norm_s

        beta = config.beta
        trial = problem.clip(x + beta * unit)
        while not _feasible(problem, trial):
            beta *= 0.5
            if beta < MIN_STEP:
                break
            trial = problem.clip(x + beta * unit)
        if beta < MIN_STEP:
            records.append(IterateRecord(k, x.copy(), est.value, g_vals, zeta, 0.0, indices, eta))
            termination = "step-collapse"
            break
        new_value = estimator.value(trial)
        if config.line_search:
            for _ in range(LINE_SEARCH_HALVINGS):
                if new_value <= est.value:
                    break
                beta *= 0.5
                trial = problem.clip(x + beta * unit)
                new_value = estimator.value(trial)

        records.append(IterateRecord(k, x.copy(), est.value, g_vals, zeta, beta, indices, eta))
        x = trial
        before.append(est.value)
        after.append(new_value)
        w = config.stall_window
        mean_before = math.fsum(before[-w:]) / len(before[-w:])
        mean_after = math.fsum(after[-w:]) / len(after[-w:])
        if abs(new_value - est.value) < OBJECTIVE_TOL:
            termination = "tolerance"
            break
        if use_barrier and mean_after > mean_before:
            zeta *= config.tau
            if zeta < ZETA_FLOOR:
                termination = "zeta-floor"
                break
    return OptimizerTrace(tuple(records), x, termination)


def _averaged_direction(unit_descent: np.ndarray, grad_phi: np.ndarray, zeta: float) -> np.ndarray:
    """Batch average of per-sample directions: the barrier term is shared by all samples."""
    s = -unit_descent
    nphi = float(np.linalg.norm(grad_phi))
    if nphi > 0.0 and zeta > 0.0:
        s = s - zeta * grad_phi / nphi
    return s


# -- public runners ------------------------------------------------------------

def run_deterministic_gdam(problem: StochasticProblem, spec: RobustnessSpec | None = None,
                           config: GdamConfig = GdamConfig(), x0=None) -> OptimizerTrace:
    """GDAM on the loss at one nominal scenario (the problem's own by default)."""
    spec = spec or RobustnessSpec.deterministic()
    if spec.mode != "deterministic":
        raise UnsupportedModeError("deterministic GDAM needs a deterministic spec")
    xi = spec.nominal if spec.nominal is not None else problem.nominal
    point = EmpiricalDistribution(ScenarioSet((xi,), (1,)))
    estimator = _Estimator(problem, RobustnessSpec.empirical_mean(), point, per_sample=False)
    return _loop(problem, spec, config, x0, lambda: ((), estimator), use_barrier=True)


def _batch_source(problem, dist, spec, config, per_sample_emo: bool):
    if spec.mode == "deterministic":
        raise UnsupportedModeError("use run_deterministic_gdam for a deterministic spec")
    rng = np.random.default_rng(config.seed)
    per_sample = (per_sample_emo and spec.mode == "empirical_mean"
                  and config.emo_estimator == "per_sample")

    def next_batch():
        indices = sample_batch(dist, config.batch_size, rng)
        batch = dist.restrict(indices)
        return tuple(int(i) for i in indices), _Estimator(problem, spec, batch, per_sample)

    return next_batch


def run_stochastic_gdam(problem: StochasticProblem, dist: EmpiricalDistribution | None,
                        spec: RobustnessSpec, config: GdamConfig = GdamConfig(),
                        x0=None) -> OptimizerTrace:
    """Stochastic GDAM: one fresh batch per iteration, judged on that batch.

    With an empirical-mean spec the direction averages the per-sample
    directions (unless ``config.emo_estimator`` is ``"batch"``); other modes
    couple the scenarios, so a single direction is formed from the batch-level
    robust gradient.

    Averaging unit directions weighs every sample equally whatever its gradient
    size, so the fixed point is median-like rather than the empirical-mean
    minimizer when gradients differ in magnitude across scenarios.
    """
    dist = dist if dist is not None else problem.default_distribution()
    source = _batch_source(problem, dist, spec, config, per_sample_emo=True)
    return _loop(problem, spec, config, x0, source, use_barrier=True)


def run_sgd(problem: StochasticProblem, dist: EmpiricalDistribution | None,
            spec: RobustnessSpec, config: GdamConfig = GdamConfig(), x0=None) -> OptimizerTrace:
    """Normalized stochastic gradient descent for box-only problems."""
    if problem.constraints:
        raise UnsupportedModeError("SGD baseline does not handle inequality constraints")
    dist = dist if dist is not None else problem.default_distribution()
    source = _batch_source(problem, dist, spec, config, per_sample_emo=False)
    return _loop(problem, spec, config, x0, source, use_barrier=False)
