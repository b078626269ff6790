"""Inner worst-case maximization over a phi-divergence ambiguity set.

Given per-scenario losses ``f`` and a nominal distribution ``p`` this module
evaluates

    penalized:    Psi = max_q  sum q_i f_i - delta * d_phi(q, p)
    constrained:  Psi = max_q  sum q_i f_i   s.t.  d_phi(q, p) <= rho

through their conjugate duals

    penalized:    min_lam  E_p[delta phi*((f - lam)/delta)] + lam
    constrained:  min_{lam, nu>=0}  E_p[nu phi*((f - lam)/nu)] + lam + nu rho

The dual is a one-dimensional convex problem in ``lam`` (nested with a search
over ``log nu`` in constrained mode).  For chi2 the closed forms
``mean + var/(2 delta)`` and ``mean + sqrt(2 rho var)`` are used whenever their
validity conditions hold.  :func:`primal_oracle` solves the primal directly and
exists to check the dual path on small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._numeric import fsum, weighted_sum, weighted_vector_sum
from .divergence import (
    DivergenceKind,
    check_simplex,
    conjugate_derivative_inverse,
    phi,
    phi_conjugate,
    phi_conjugate_derivative,
    phi_derivative,
    phi_second_derivative,
)
from .errors import ContractError, InnerSolverInconsistency, OracleScaleError, ParameterError

RENORMALIZE_TOL = 1e-6
ORACLE_MAX_SUPPORT = 8
_NU_RANGE = 1e8
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class InnerSpec:
    """Divergence plus either a penalty weight ``delta`` or a radius ``rho``."""

    kind: DivergenceKind
    delta: float | None = None
    rho: float | None = None
    tolerance: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "kind", DivergenceKind.parse(self.kind))
        if (self.delta is None) == (self.rho is None):
            raise ParameterError("give exactly one of delta (penalized) or rho (constrained)")
        if self.delta is not None and not (self.delta > 0 and math.isfinite(self.delta)):
            raise ParameterError(f"delta must be positive and finite, got {self.delta!r}")
        if self.rho is not None and not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ParameterError(f"rho must be nonnegative and finite, got {self.rho!r}")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")

    @classmethod
    def penalized(cls, kind, delta: float, tolerance: float = 1e-10) -> "InnerSpec":
        return cls(kind, delta=float(delta), tolerance=tolerance)

    @classmethod
    def constrained(cls, kind, rho: float, tolerance: float = 1e-10) -> "InnerSpec":
        return cls(kind, rho=float(rho), tolerance=tolerance)

    @property
    def mode(self) -> str:
        return "penalized" if self.delta is not None else "constrained"


@dataclass(frozen=True)
class InnerSolution:
    psi: float
    lambda_star: float
    nu_star: float | None
    q_star: np.ndarray
    clamped: np.ndarray
    closed_form_valid: bool


def _validate(losses, p) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(losses, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ContractError("losses must be a nonempty vector")
    if not np.all(np.isfinite(f)):
        raise ContractError("losses must be finite")
    p = check_simplex(p, "p")
    if p.shape != f.shape:
        raise ContractError(f"{f.size} losses but {p.size} probabilities")
    if np.any(p <= 0):
        raise ContractError("nominal distribution must have full support")
    return f, p


def mean_and_variance(losses, p) -> tuple[float, float]:
    """Population mean and variance of ``losses`` under ``p``."""
    f = np.asarray(losses, dtype=float)
    mean = weighted_sum(p, f)
    return mean, weighted_sum(p, (f - mean) ** 2)


# -- chi2 closed forms --------------------------------------------------------

def chi2_closed_form_penalized(losses, p, delta: float) -> tuple[float, bool]:
    """``mean + var / (2 delta)`` and whether ``mean - f_k <= delta`` for every k."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta!r}")
    f, p = _validate(losses, p)
    mean, var = mean_and_variance(f, p)
    return mean + var / (2.0 * delta), bool(np.max(mean - f) <= delta)


def chi2_closed_form_constrained(losses, p, rho: float) -> tuple[float, bool]:
    """``mean + sqrt(2 rho var)`` and whether ``(mean - f_k) sqrt(2 rho) <= sqrt(var)``."""
    if not rho >= 0:
        raise ParameterError(f"rho must be nonnegative, got {rho!r}")
    f, p = _validate(losses, p)
    mean, var = mean_and_variance(f, p)
    valid = bool(np.max(mean - f) * math.sqrt(2.0 * rho) <= math.sqrt(var))
    return mean + math.sqrt(2.0 * rho * var), valid


# -- dual machinery -----------------------------------------------------------

def _lambda_bracket(f: np.ndarray, p: np.ndarray, kind: DivergenceKind, scale: float):
    # At lam = max f every score is <= 0, so sum p (phi*)'(s) <= 1.  At the lower
    # end the top scenario alone already carries unit mass.
    j = int(np.argmax(f))
    hi = float(f[j])
    top_score = conjugate_derivative_inverse(kind, 1.0 / p[j])
    lo = max(float(np.min(f)), hi - scale * top_score)
    return lo, hi


def _dual_slope(lam: float, f, p, kind, scale) -> float:
    return 1.0 - weighted_sum(p, phi_conjugate_derivative(kind, (f - lam) / scale))


def _dual_value(lam: float, f, p, kind, scale) -> float:
    terms = p * scale * phi_conjugate(kind, (f - lam) / scale)
    return fsum(terms.tolist() + [lam])


def _solve_lambda(f: np.ndarray, p: np.ndarray, kind: DivergenceKind, scale: float) -> float:
    """Root of the (monotone) dual slope in ``lam`` by bracketed Brent iteration."""
    lo, hi = _lambda_bracket(f, p, kind, scale)
    if hi <= lo:
        return hi
    if _dual_slope(lo, f, p, kind, scale) >= 0.0:
        return lo
    if _dual_slope(hi, f, p, kind, scale) <= 0.0:
        return hi
    xtol = max(4.0 * np.finfo(float).eps * max(abs(lo), abs(hi)), 1e-300)
    return brentq(_dual_slope, lo, hi, args=(f, p, kind, scale),
                  xtol=xtol, rtol=4.0 * np.finfo(float).eps, maxiter=500)


def worst_case_distribution(losses, p, kind, lam: float, scale: float) -> np.ndarray:
    """Recover ``q_i = p_i (phi*)'((f_i - lam)/scale)`` and renormalize.

    Raises :class:`InnerSolverInconsistency` when the raw weights miss unit mass
    by more than ``1e-6``, which signals an inaccurate multiplier.
    """
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale!r}")
    f = np.asarray(losses, dtype=float)
    p = np.asarray(p, dtype=float)
    kind = DivergenceKind.parse(kind)
    q = p * phi_conjugate_derivative(kind, (f - lam) / scale)
    total = fsum(q.tolist())
    if not abs(total - 1.0) <= RENORMALIZE_TOL:
        raise InnerSolverInconsistency(f"worst-case weights sum to {total!r}")
    return q / total


def _chi2_clamped(f, lam, scale, kind) -> np.ndarray:
    if kind is not DivergenceKind.CHI2 or not scale > 0:
        return np.zeros(f.shape, dtype=bool)
    return (f - lam) / scale < -1.0


def _trivial(f: np.ndarray, p: np.ndarray, value: float, nu, valid: bool) -> InnerSolution:
    return InnerSolution(psi=value, lambda_star=value, nu_star=nu, q_star=p.copy(),
                         clamped=np.zeros(f.shape, dtype=bool), closed_form_valid=valid)


def solve_penalized_dual(losses, p, spec: InnerSpec, fast_path: bool = True) -> InnerSolution:
    """Worst-case value of the penalized problem via its one-dimensional dual.

    With ``fast_path`` the chi2 closed form is returned whenever it is valid;
    pass ``fast_path=False`` to force the general dual solve.
    """
    if spec.mode != "penalized":
        raise ParameterError("spec is not penalized")
    f, p = _validate(losses, p)
    kind, delta = spec.kind, spec.delta
    is_chi2 = kind is DivergenceKind.CHI2
    valid = is_chi2 and chi2_closed_form_penalized(f, p, delta)[1]
    if np.ptp(f) == 0.0:
        return _trivial(f, p, float(f[0]), None, valid)
    if valid and fast_path:
        psi, _ = chi2_closed_form_penalized(f, p, delta)
        lam = weighted_sum(p, f)
        q = worst_case_distribution(f, p, kind, lam, delta)
        return InnerSolution(psi, lam, None, q, np.zeros(f.shape, dtype=bool), True)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        lam = _solve_lambda(f, p, kind, delta)
        psi = _dual_value(lam, f, p, kind, delta)
        q = worst_case_distribution(f, p, kind, lam, delta)
    return InnerSolution(psi, lam, None, q, _chi2_clamped(f, lam, delta, kind), valid)


def _golden_minimize(fun, a: float, b: float, tol: float) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while abs(b - a) > tol * (1.0 + abs(c) + abs(d)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def solve_constrained_dual(losses, p, spec: InnerSpec, fast_path: bool = True) -> InnerSolution:
    """Worst-case value over the divergence ball of radius ``rho``.

    The two-multiplier dual is solved as a golden-section search over
    ``log nu`` with the ``lam`` root nested inside.  When the dual value is no
    better than ``max f`` the robust limit ``nu -> 0`` is taken: the worst case
    then sits on the maximizing scenarios, weighted like ``p``.
    """
    if spec.mode != "constrained":
        raise ParameterError("spec is not constrained")
    f, p = _validate(losses, p)
    kind, rho = spec.kind, spec.rho
    is_chi2 = kind is DivergenceKind.CHI2
    if rho == 0.0:
        return _trivial(f, p, weighted_sum(p, f), math.inf, is_chi2)
    valid = is_chi2 and chi2_closed_form_constrained(f, p, rho)[1]
    if np.ptp(f) == 0.0:
        return _trivial(f, p, float(f[0]), 0.0, valid)
    if valid and fast_path:
        psi, _ = chi2_closed_form_constrained(f, p, rho)
        mean, var = mean_and_variance(f, p)
        nu = math.sqrt(var / (2.0 * rho))
        q = worst_case_distribution(f, p, kind, mean, nu)
        return InnerSolution(psi, mean, nu, q, np.zeros(f.shape, dtype=bool), True)

    spread = float(np.ptp(f))

    def outer(u: float) -> float:
        nu = math.exp(u)
        lam = _solve_lambda(f, p, kind, nu)
        return _dual_value(lam, f, p, kind, nu) + nu * rho

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        u_lo = math.log(spread / _NU_RANGE)
        u_hi = math.log(spread * _NU_RANGE)
        u, value = _golden_minimize(outer, u_lo, u_hi, spec.tolerance)
        top = float(np.max(f))
        if top <= value:
            on_top = f == top
            q = np.where(on_top, p, 0.0)
            q = q / fsum(q.tolist())
            clamped = ~on_top if is_chi2 else np.zeros(f.shape, dtype=bool)
            return InnerSolution(top, top, 0.0, q, clamped, valid)
        nu = math.exp(u)
        lam = _solve_lambda(f, p, kind, nu)
        q = worst_case_distribution(f, p, kind, lam, nu)
    return InnerSolution(value, lam, nu, q, _chi2_clamped(f, lam, nu, kind), valid)


def solve_inner(losses, p, spec: InnerSpec, fast_path: bool = True) -> InnerSolution:
    if spec.mode == "penalized":
        return solve_penalized_dual(losses, p, spec, fast_path)
    return solve_constrained_dual(losses, p, spec, fast_path)


def dro_value_and_gradient(losses, loss_gradients, p, spec: InnerSpec) -> tuple[float, np.ndarray]:
    """Worst-case value and its gradient ``sum_i q*_i grad f_i`` (Danskin)."""
    grads = np.asarray(loss_gradients, dtype=float)
    f = np.asarray(losses, dtype=float)
    if grads.ndim != 2 or grads.shape[0] != f.size:
        raise ContractError(
            f"need one gradient per scenario: {f.size} losses, gradients of shape {grads.shape}")
    sol = solve_inner(f, p, spec)
    return sol.psi, weighted_vector_sum(sol.q_star, grads)


# -- primal oracle ------------------------------------------------------------

def _primal_value(q: np.ndarray, f, p, kind, delta) -> float:
    penalty = p * np.asarray(phi(kind, np.maximum(q, 0.0) / p))
    if np.any(np.isinf(penalty)):
        return -math.inf
    return fsum((q * f).tolist() + (-delta * penalty).tolist())


def _newton_on_face(face, f, p, kind, delta, start) -> np.ndarray | None:
    """Damped Newton ascent of the penalized primal restricted to a face.

    Returns the full-length maximizer over the relative interior of the face, or
    ``None`` when (chi2 only) the exact quadratic maximizer leaves the face.
    """
    fs, ps = f[face], p[face]
    q = start.copy()
    exact_quadratic = kind is DivergenceKind.CHI2

    def full(qs):
        out = np.zeros_like(f)
        out[face] = qs
        return out

    value = _primal_value(full(q), f, p, kind, delta)
    for _ in range(500):
        t = q / ps
        g = fs - delta * np.asarray(phi_derivative(kind, t))
        w = ps / (delta * np.asarray(phi_second_derivative(kind, t)))
        mu = fsum((g * w).tolist()) / fsum(w.tolist())
        d = (g - mu) * w
        decrement = fsum(((g - mu) * d).tolist())
        if decrement <= 1e-14 * (1.0 + abs(value)):
            # inside the quadratic basin: one full step finishes the job,
            # further line searches only chase rounding noise
            trial = q + d
            if np.all(trial > 0):
                q = trial / fsum(trial.tolist())
            break
        if exact_quadratic:
            trial = q + d
            if np.any(trial < 0):
                return None
            q = trial / fsum(trial.tolist())
            value = _primal_value(full(q), f, p, kind, delta)
            continue
        neg = d < 0
        alpha = min(1.0, 0.99 * float(np.min(-q[neg] / d[neg]))) if np.any(neg) else 1.0
        improved = False
        for _ in range(60):
            trial = q + alpha * d
            trial_value = _primal_value(full(trial), f, p, kind, delta)
            if trial_value >= value + 1e-4 * alpha * decrement:
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
        q = trial / fsum(trial.tolist())
        value = _primal_value(full(q), f, p, kind, delta)
    if np.any(q < 0):
        return None
    return full(q)


def _oracle_penalized(f, p, kind, delta, rng: np.random.Generator, restarts: int) -> np.ndarray:
    n = f.size
    if kind is DivergenceKind.CHI2:
        # phi has a finite slope at 0, so the maximizer may vanish on some
        # scenarios: enumerate every face of the simplex.
        faces = [np.array(c) for r in range(1, n + 1) for c in itertools.combinations(range(n), r)]
    else:
        # phi'(0+) = -inf pushes the maximizer into the interior.
        faces = [np.arange(n)]
    best_q, best_val = None, -math.inf
    for face in faces:
        starts = [p[face] / fsum(p[face].tolist())]
        if face.size > 1 and kind is not DivergenceKind.CHI2:
            starts += [rng.dirichlet(np.ones(face.size)) for _ in range(restarts)]
        for start in starts:
            q = _newton_on_face(face, f, p, kind, delta, start)
            if q is None:
                continue
            val = _primal_value(q, f, p, kind, delta)
            if val > best_val:
                best_q, best_val = q, val
    return best_q


def _primal_divergence(q, p, kind) -> float:
    terms = p * np.asarray(phi(kind, np.maximum(q, 0.0) / p))
    return math.inf if np.any(np.isinf(terms)) else fsum(terms.tolist())


def primal_oracle(losses, p, spec: InnerSpec, seed: int = 0, restarts: int = 2) -> InnerSolution:
    """Brute-force primal maximizer for small supports (testing only).

    Penalized mode enumerates faces of the simplex and runs damped Newton ascent
    on each, never touching conjugates.  Constrained mode bisects the penalty
    weight until the penalized maximizer sits on the divergence sphere.
    """
    f, p = _validate(losses, p)
    if f.size > ORACLE_MAX_SUPPORT:
        raise OracleScaleError(f"oracle handles at most {ORACLE_MAX_SUPPORT} scenarios, got {f.size}")
    kind = spec.kind
    rng = np.random.default_rng(seed)
    nan = math.nan
    no_clamp = np.zeros(f.shape, dtype=bool)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if np.ptp(f) == 0.0 or (spec.mode == "constrained" and spec.rho == 0.0):
            return InnerSolution(weighted_sum(p, f), nan, None, p.copy(), no_clamp, False)
        if spec.mode == "penalized":
            q = _oracle_penalized(f, p, kind, spec.delta, rng, restarts)
            return InnerSolution(_primal_value(q, f, p, kind, spec.delta), nan, None, q,
                                 no_clamp, False)

        spread = float(np.ptp(f))
        rho = spec.rho

        def div_at(delta):
            q = _oracle_penalized(f, p, kind, delta, rng, restarts)
            return _primal_divergence(q, p, kind), q

        lo = hi = math.log(spread)
        d_hi, q_hi = div_at(spread)
        while d_hi > rho:
            lo, hi = hi, hi + math.log(10.0)
            d_hi, q_hi = div_at(math.exp(hi))
        if lo == hi:
            floor = math.log(spread * 1e-12)
            while True:
                lo = hi - math.log(10.0)
                d_lo, q_lo = div_at(math.exp(lo))
                if d_lo > rho:
                    break
                hi, q_hi = lo, q_lo
                if lo <= floor:
                    # Even a vanishing penalty stays inside the ball: robust limit.
                    return InnerSolution(weighted_sum(q_hi, f), nan, 0.0, q_hi, no_clamp, False)
        while hi - lo > 1e-13:
            mid = 0.5 * (lo + hi)
            d_mid, q_mid = div_at(math.exp(mid))
            if d_mid > rho:
                lo = mid
            else:
                hi, q_hi = mid, q_mid
    return InnerSolution(weighted_sum(q_hi, f), nan, math.exp(hi), q_hi, no_clamp, False)
