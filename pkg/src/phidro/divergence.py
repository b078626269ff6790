"""phi-divergences, their convex conjugates and conjugate derivatives.

Three generators are supported, all normalized so that ``phi(1) = 0`` and
``phi''(1) = 1``::

    chi2   phi(t) = (t - 1)^2 / 2
    kl     phi(t) = t log t - t + 1
    burg   phi(t) = -log t + t - 1

Conjugates are taken over ``t >= 0``: ``phi*(s) = max_{t>=0} s t - phi(t)``.
Infinite values (Burg at ``t = 0`` or ``s >= 1``) are returned as ``inf`` rather
than raised, so ball-membership tests work at the boundary.
"""

from __future__ import annotations

import enum
from typing import Union

import numpy as np

from ._numeric import fsum
from .errors import ContractError, DomainError, ParameterError

ArrayLike = Union[float, np.ndarray]

SIMPLEX_TOL = 1e-10
BALL_TOL = 1e-12


class DivergenceKind(enum.Enum):
    CHI2 = "chi2"
    KL = "kl"
    BURG = "burg"

    @classmethod
    def parse(cls, value: "DivergenceKind | str") -> "DivergenceKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(
                f"unknown divergence {value!r}; expected one of {[k.value for k in cls]}") from None


def _scalar_or_array(x: np.ndarray, like) -> ArrayLike:
    return float(x) if np.ndim(like) == 0 else x


def phi(kind: DivergenceKind, t: ArrayLike) -> ArrayLike:
    kind = DivergenceKind.parse(kind)
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"phi is defined for t >= 0, got {t!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is DivergenceKind.CHI2:
            out = 0.5 * (arr - 1.0) ** 2
        elif kind is DivergenceKind.KL:
            safe = np.where(arr > 0, arr, 1.0)
            out = np.where(arr > 0, arr * np.log(safe) - arr + 1.0, 1.0)
        else:
            safe = np.where(arr > 0, arr, 1.0)
            out = np.where(arr > 0, -np.log(safe) + arr - 1.0, np.inf)
    return _scalar_or_array(out, t)


def phi_derivative(kind: DivergenceKind, t: ArrayLike) -> ArrayLike:
    """``phi'(t)``; ``-inf`` at ``t = 0`` for KL and Burg."""
    kind = DivergenceKind.parse(kind)
    arr = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        if kind is DivergenceKind.CHI2:
            out = arr - 1.0
        elif kind is DivergenceKind.KL:
            out = np.log(arr)
        else:
            out = 1.0 - 1.0 / arr
    return _scalar_or_array(out, t)


def phi_second_derivative(kind: DivergenceKind, t: ArrayLike) -> ArrayLike:
    kind = DivergenceKind.parse(kind)
    arr = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        if kind is DivergenceKind.CHI2:
            out = np.ones_like(arr)
        elif kind is DivergenceKind.KL:
            out = 1.0 / arr
        else:
            out = 1.0 / arr**2
    return _scalar_or_array(out, t)


def phi_conjugate(kind: DivergenceKind, s: ArrayLike) -> ArrayLike:
    kind = DivergenceKind.parse(kind)
    arr = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind is DivergenceKind.CHI2:
            out = np.where(arr < -1.0, -0.5, 0.5 * arr * arr + arr)
        elif kind is DivergenceKind.KL:
            out = np.expm1(arr)
        else:
            out = np.where(arr < 1.0, -np.log1p(-np.minimum(arr, 1.0)), np.inf)
    return _scalar_or_array(out, s)


def phi_conjugate_derivative(kind: DivergenceKind, s: ArrayLike) -> ArrayLike:
    """Derivative of the conjugate; the chi2 kink at ``s = -1`` takes the value 0."""
    kind = DivergenceKind.parse(kind)
    arr = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        if kind is DivergenceKind.CHI2:
            out = np.where(arr <= -1.0, 0.0, arr + 1.0)
        elif kind is DivergenceKind.KL:
            out = np.exp(arr)
        else:
            out = np.where(arr < 1.0, 1.0 / (1.0 - arr), np.inf)
    return _scalar_or_array(out, s)


def conjugate_derivative_inverse(kind: DivergenceKind, y: float) -> float:
    """The score ``s`` at which ``(phi*)'(s) = y`` for ``y > 0``."""
    kind = DivergenceKind.parse(kind)
    if not y > 0:
        raise DomainError("inverse defined for y > 0")
    if kind is DivergenceKind.CHI2:
        return y - 1.0
    if kind is DivergenceKind.KL:
        return float(np.log(y))
    return 1.0 - 1.0 / y


def check_simplex(q: np.ndarray, name: str = "q") -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractError(f"{name} must be a nonempty vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < -SIMPLEX_TOL):
        raise ContractError(f"{name} has negative or non-finite entries")
    if abs(fsum(arr.tolist()) - 1.0) > SIMPLEX_TOL:
        raise ContractError(f"{name} is not on the probability simplex (sum={arr.sum()!r})")
    return arr


def divergence(kind: DivergenceKind, q, p) -> float:
    """``sum_i p_i phi(q_i / p_i)``, summed exactly regardless of index order."""
    q = check_simplex(q, "q")
    p = check_simplex(p, "p")
    if q.shape != p.shape:
        raise ContractError(f"length mismatch: {q.size} vs {p.size}")
    if np.any(p <= 0):
        raise ContractError("nominal distribution must have full support")
    terms = p * np.asarray(phi(kind, np.maximum(q, 0.0) / p))
    if np.any(np.isinf(terms)):
        return float("inf")
    return fsum(terms.tolist())


def in_ball(kind: DivergenceKind, q, p, rho: float) -> bool:
    if rho < 0:
        raise ParameterError(f"radius must be nonnegative, got {rho!r}")
    return divergence(kind, q, p) <= rho + BALL_TOL
