"""Stochastic problems and the estimators that turn scenario losses into one objective.

A :class:`StochasticProblem` bundles a loss ``f(x; xi)``, its gradient in ``x``,
deterministic inequality constraints ``g_i(x) < 0`` and an optional box.  The
estimators evaluate every scenario of an :class:`EmpiricalDistribution` (possibly
on worker threads), then reduce in ascending scenario order with exact summation,
so a report never depends on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numeric import ordered_map, weighted_sum, weighted_vector_sum
from .divergence import DivergenceKind
from .dro_inner import InnerSpec, solve_inner
from .errors import ContractError, MarginError, ParameterError
from .scenario import EmpiricalDistribution, Scenario, ScenarioSet

LossFn = Callable[[np.ndarray, np.ndarray], float]
GradFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Constraint:
    """Inequality ``fn(x) < 0`` with gradient ``grad(x)``."""

    name: str
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StochasticProblem:
    name: str
    dim: int
    loss_fn: LossFn
    grad_fn: GradFn
    support: ScenarioSet
    nominal: Scenario
    x0: np.ndarray
    constraints: tuple[Constraint, ...] = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != self.dim:
            raise ContractError(f"x0 has {x0.size} entries, problem dimension is {self.dim}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for attr in ("lower", "upper"):
            bound = getattr(self, attr)
            if bound is not None:
                object.__setattr__(self, attr, np.broadcast_to(
                    np.asarray(bound, dtype=float), (self.dim,)).copy())

    def loss(self, x, xi) -> float:
        return float(self.loss_fn(np.asarray(x, dtype=float), _scenario_array(xi)))

    def loss_gradient(self, x, xi) -> np.ndarray:
        g = np.asarray(self.grad_fn(np.asarray(x, dtype=float), _scenario_array(xi)), dtype=float)
        return g.reshape(self.dim)

    def constraint_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c.fn(x) for c in self.constraints], dtype=float)

    def constraint_gradients(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.constraints:
            return np.zeros((0, self.dim))
        return np.array([np.asarray(c.grad(x), dtype=float).reshape(self.dim)
                         for c in self.constraints])

    def clip(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.lower is not None:
            x = np.maximum(x, self.lower)
        if self.upper is not None:
            x = np.minimum(x, self.upper)
        return x

    def default_distribution(self) -> EmpiricalDistribution:
        return EmpiricalDistribution(self.support)


def _scenario_array(xi) -> np.ndarray:
    if isinstance(xi, Scenario):
        return xi.as_array()
    return np.atleast_1d(np.asarray(xi, dtype=float))


# -- robustness modes --------------------------------------------------------

MODES = ("deterministic", "empirical_mean", "mean_variance", "dro_penalized", "dro_constrained")


@dataclass(frozen=True)
class RobustnessSpec:
    """Which estimator to optimize, with its parameters.

    ``nominal`` of a deterministic spec may be left out, in which case the
    problem's own nominal scenario is used.
    """

    mode: str
    nominal: Scenario | None = None
    mu: float | None = None
    kind: DivergenceKind | None = None
    delta: float | None = None
    rho: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown robustness mode {self.mode!r}")
        if self.mode == "mean_variance":
            if self.mu is None or not (self.mu >= 0) or not math.isfinite(self.mu):
                raise ParameterError(f"mu must be finite and >= 0, got {self.mu!r}")
        if self.mode.startswith("dro"):
            object.__setattr__(self, "kind", DivergenceKind.parse(self.kind))
            # InnerSpec carries the range checks on delta and rho
            self.inner_spec()

    @classmethod
    def deterministic(cls, nominal: Scenario | Sequence[float] | None = None) -> "RobustnessSpec":
        if nominal is not None and not isinstance(nominal, Scenario):
            nominal = Scenario(tuple(np.atleast_1d(nominal).tolist()), -1)
        return cls("deterministic", nominal=nominal)

    @classmethod
    def empirical_mean(cls) -> "RobustnessSpec":
        return cls("empirical_mean")

    @classmethod
    def mean_variance(cls, mu: float) -> "RobustnessSpec":
        return cls("mean_variance", mu=mu)

    @classmethod
    def dro_penalized(cls, kind, delta: float) -> "RobustnessSpec":
        return cls("dro_penalized", kind=kind, delta=delta)

    @classmethod
    def dro_constrained(cls, kind, rho: float) -> "RobustnessSpec":
        return cls("dro_constrained", kind=kind, rho=rho)

    @property
    def is_dro(self) -> bool:
        return self.mode.startswith("dro")

    def inner_spec(self) -> InnerSpec:
        if self.mode == "dro_penalized":
            return InnerSpec.penalized(self.kind, self.delta)
        if self.mode == "dro_constrained":
            return InnerSpec.constrained(self.kind, self.rho)
        raise ParameterError(f"mode {self.mode!r} has no inner problem")


@dataclass(frozen=True)
class ObjectiveReport:
    value: float
    gradient: np.ndarray
    losses: np.ndarray
    mean: float
    variance: float
    worst_case_q: np.ndarray | None = None
    clamped: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


# -- estimators --------------------------------------------------------------

def scenario_losses(problem: StochasticProblem, x, scenarios: Sequence[Scenario],
                    with_gradients: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-scenario losses (and gradients), in the order given."""
    x = np.asarray(x, dtype=float)

    def one(s):
        return (problem.loss(x, s), problem.loss_gradient(x, s) if with_gradients else None)

    pairs = ordered_map(one, list(scenarios))
    losses = np.array([v for v, _ in pairs], dtype=float)
    if not with_gradients:
        return losses, None
    return losses, np.array([g for _, g in pairs], dtype=float).reshape(len(pairs), problem.dim)


def multipoint(weights, points: Sequence, problem: StochasticProblem, x) -> float:
    """Weighted sum of losses at fixed flight conditions."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(points):
        raise ContractError(f"{w.size} weights for {len(points)} points")
    if np.any(w < 0) or np.any(~np.isfinite(w)):
        raise ContractError("weights must be finite and nonnegative")
    losses, _ = scenario_losses(problem, x, points, with_gradients=False)
    return weighted_sum(w, losses)


def _moments(losses: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    mean = weighted_sum(p, losses)
    return mean, max(0.0, weighted_sum(p, (losses - mean) ** 2))


def empirical_mean(problem: StochasticProblem, x, dist: EmpiricalDistribution) -> ObjectiveReport:
    losses, grads = scenario_losses(problem, x, dist.set.scenarios)
    mean, var = _moments(losses, dist.p)
    return ObjectiveReport(mean, weighted_vector_sum(dist.p, grads), losses, mean, var)


def mean_variance(problem: StochasticProblem, x, dist: EmpiricalDistribution,
                  mu: float) -> ObjectiveReport:
    """``E f + mu V f`` under ``p``; the variance gradient is ``2 E[(f - E f) grad f]``."""
    if not (mu >= 0):
        raise ParameterError(f"mu must be >= 0, got {mu!r}")
    losses, grads = scenario_losses(problem, x, dist.set.scenarios)
    mean, var = _moments(losses, dist.p)
    centered = dist.p * (losses - mean)
    grad = weighted_vector_sum(dist.p, grads) + 2.0 * mu * weighted_vector_sum(centered, grads)
    return ObjectiveReport(mean + mu * var, grad, losses, mean, var)


def robust_objective(problem: StochasticProblem, x, dist: EmpiricalDistribution,
                     spec: RobustnessSpec) -> ObjectiveReport:
    if spec.mode == "deterministic":
        xi = spec.nominal if spec.nominal is not None else problem.nominal
        value = problem.loss(x, xi)
        return ObjectiveReport(value, problem.loss_gradient(x, xi), np.array([value]), value, 0.0)
    if spec.mode == "empirical_mean":
        return empirical_mean(problem, x, dist)
    if spec.mode == "mean_variance":
        return mean_variance(problem, x, dist, spec.mu)
    losses, grads = scenario_losses(problem, x, dist.set.scenarios)
    mean, var = _moments(losses, dist.p)
    sol = solve_inner(losses, dist.p, spec.inner_spec())
    return ObjectiveReport(sol.psi, weighted_vector_sum(sol.q_star, grads), losses, mean, var,
                           worst_case_q=sol.q_star, clamped=sol.clamped,
                           extra={"lambda": sol.lambda_star, "nu": sol.nu_star,
                                  "closed_form_valid": sol.closed_form_valid})


# -- gradient hygiene --------------------------------------------------------

def relative_gradient_error(fd: np.ndarray, analytic: np.ndarray) -> float:
    """Worst coordinate of ``|fd - g| / max(1, |fd|, |g|)``."""
    fd = np.asarray(fd, dtype=float)
    analytic = np.asarray(analytic, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(fd), np.abs(analytic)))
    return float(np.max(np.abs(fd - analytic) / scale)) if fd.size else 0.0


def central_difference(fn: Callable[[np.ndarray], float], x, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return out


def finite_difference_check(problem: StochasticProblem, x, h: float = 1e-6,
                            scenarios: Sequence[Scenario] | None = None) -> float:
    """Worst relative error of the loss and constraint gradients against central differences.

    Every scenario of the problem's support is probed unless ``scenarios`` is given.
    """
    x = np.asarray(x, dtype=float)
    if not h > 0:
        raise ParameterError(f"step must be positive, got {h!r}")
    if problem.lower is not None and np.any(x - h < problem.lower):
        raise MarginError(f"x is closer than {h} to the lower bound")
    if problem.upper is not None and np.any(x + h > problem.upper):
        raise MarginError(f"x is closer than {h} to the upper bound")
    worst = 0.0
    for xi in scenarios if scenarios is not None else problem.support.scenarios:
        fd = central_difference(lambda z: problem.loss(z, xi), x, h)
        worst = max(worst, relative_gradient_error(fd, problem.loss_gradient(x, xi)))
    for c in problem.constraints:
        fd = central_difference(c.fn, x, h)
        worst = max(worst, relative_gradient_error(fd, c.grad(x)))
    return worst
