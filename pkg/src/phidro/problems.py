"""Built-in analytic problems.

``toy_beyer`` is a one-dimensional example whose expected loss and loss
variance pull the design to opposite ends of ``[0, 1]``.
``constrained_quadratic`` has a known solution (a halfspace projection).
``airfoil_surrogate`` is a smooth stand-in for a transonic drag study.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .objectives import Constraint, StochasticProblem
from .scenario import Scenario, ScenarioSet

TOY_SUPPORT = (-0.8, -0.4, 0.0, 0.4, 0.8)


def toy_beyer() -> StochasticProblem:
    """``l(x; xi) = xi - (xi - 1) x^2`` on ``[0, 1]``.

    The mean ``x^2`` is smallest at 0, while the variance ``0.32 (1 - x^2)^2``
    vanishes at 1, where every scenario gives the same loss.
    """

    # written as x^2 + xi (1 - x^2) so that x = 1 gives exactly 1
    def loss(x, xi):
        return float(x[0] ** 2 + xi[0] * (1.0 - x[0] ** 2))

    def grad(x, xi):
        return np.array([2.0 * x[0] * (1.0 - xi[0])])

    return StochasticProblem(
        name="toy",
        dim=1,
        loss_fn=loss,
        grad_fn=grad,
        support=ScenarioSet.from_values(list(TOY_SUPPORT)),
        nominal=Scenario((0.0,), 2),
        x0=np.array([0.5]),
        lower=np.array([0.0]),
        upper=np.array([1.0]),
    )


def constrained_quadratic(c_bar=(1.0, 1.0), a=(1.0, 0.0), b: float = 0.5, sigma: float = 0.0,
                          n_scenarios: int = 32, seed: int = 0) -> StochasticProblem:
    """``||x - c_bar - sigma eps||^2`` subject to ``a.x <= b``.

    The perturbations ``eps`` are seeded standard normals shifted to zero mean,
    so the empirical-mean minimizer is the projection of ``c_bar`` onto the
    halfspace, whatever ``sigma`` is.
    """
    c_bar = np.asarray(c_bar, dtype=float)
    a = np.asarray(a, dtype=float)
    if c_bar.shape != a.shape or c_bar.ndim != 1:
        raise ParameterError("c_bar and a must be vectors of equal length")
    norm2 = float(a @ a)
    if norm2 == 0.0:
        raise ParameterError("constraint normal must be nonzero")
    if not a @ c_bar > b:
        raise ParameterError("c_bar must violate a.x <= b so the constraint is active")
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    d = c_bar.size
    eps = np.random.default_rng(seed).standard_normal((n_scenarios, d))
    eps -= eps.mean(axis=0)

    def loss(x, xi):
        r = x - c_bar - sigma * xi
        return float(r @ r)

    def grad(x, xi):
        return 2.0 * (x - c_bar - sigma * xi)

    halfspace = Constraint("halfspace", lambda x: float(a @ x - b), lambda x: a.copy())
    # start half a unit inside the boundary, on the normal through c_bar
    x0 = c_bar - ((a @ c_bar - b) + 0.5 * np.sqrt(norm2)) / norm2 * a
    return StochasticProblem(
        name="quadratic",
        dim=d,
        loss_fn=loss,
        grad_fn=grad,
        support=ScenarioSet.from_values(eps),
        nominal=Scenario(tuple([0.0] * d), -1),
        x0=x0,
        constraints=(halfspace,),
    )


# Surrogate constants.  Loss is in units of a nominal drag, so the clean design
# sits near 1.
MACH_NOMINAL = 0.729
MACH_SIGMA = 0.01
CL_NOMINAL = 0.5
CL_SIGMA = 0.02
_M_DD0 = 0.74  # drag-divergence Mach of the reference shape
_M_DD_SLOPE = 0.03  # shift of drag divergence per unit of the "supercritical" shape mode
_RISE_WIDTH = 0.004  # softplus smoothing width in Mach
_RISE_SLOPE = 25.0  # asymptotic loss per unit Mach past drag divergence
_BOWL = 0.6  # curvature of the shape penalty
_CL_COUPLING = 2.0
_MOMENT_LIMIT = 0.6
_THICKNESS_REF = 0.13
_THICKNESS_MIN = 0.12
_THICKNESS_LOSS = 0.01  # thickness lost per unit squared shape change


def _softplus(z: float) -> float:
    return float(np.logaddexp(0.0, z))


def _sigmoid(z: float) -> float:
    return float(0.5 * (1.0 + np.tanh(0.5 * z)))


def airfoil_surrogate(dim: int = 4, n_scenarios: int = 64, seed: int = 0,
                      mach_sigma: float = MACH_SIGMA, with_cl: bool = False) -> StochasticProblem:
    """Transonic drag stand-in with a Mach-dependent drag rise.

    The loss is a shape bowl plus a softplus ramp that switches on once Mach
    exceeds a design-dependent divergence Mach ``0.74 + 0.03 v.x``, where ``v``
    is a fixed unit "supercritical" shape mode.  Pushing ``v.x`` up delays the
    drag rise and costs bowl penalty, so designs aware of the Mach spread move
    further along ``v`` than the nominal design.  With ``with_cl`` a second
    scenario coordinate (lift coefficient) scales the bowl.

    Constraints: a linear pitching-moment-style bound on the first coordinate
    and a thickness-style bound from a concave thickness ``t(x) >= 0.12``.
    The reference shape ``x = 0`` is strictly feasible.
    """
    if dim < 1:
        raise ParameterError("dimension must be >= 1")
    if mach_sigma < 0:
        raise ParameterError("mach_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    mach = MACH_NOMINAL + mach_sigma * rng.standard_normal(n_scenarios)
    v = np.ones(dim) / np.sqrt(dim)
    # the bowl's center is slightly off the supercritical mode
    center = np.zeros(dim)
    center[0] = 0.1
    if with_cl:
        cl = CL_NOMINAL + CL_SIGMA * rng.standard_normal(n_scenarios)
        support = ScenarioSet.from_values(np.column_stack([mach, cl]))
        nominal = Scenario((MACH_NOMINAL, CL_NOMINAL), -1)
    else:
        support = ScenarioSet.from_values(mach)
        nominal = Scenario((MACH_NOMINAL,), -1)

    def bowl_weight(xi):
        return 1.0 + _CL_COUPLING * (xi[1] - CL_NOMINAL) if xi.size > 1 else 1.0

    def rise_arg(x, xi):
        m_dd = _M_DD0 + _M_DD_SLOPE * float(v @ x)
        return (xi[0] - m_dd) / _RISE_WIDTH

    def loss(x, xi):
        r = x - center
        return float(1.0 + 0.5 * _BOWL * bowl_weight(xi) * (r @ r)
                     + _RISE_SLOPE * _RISE_WIDTH * _softplus(rise_arg(x, xi)))

    def grad(x, xi):
        r = x - center
        return (_BOWL * bowl_weight(xi) * r
                - _RISE_SLOPE * _M_DD_SLOPE * _sigmoid(rise_arg(x, xi)) * v)

    e0 = np.zeros(dim)
    e0[0] = 1.0
    moment = Constraint("moment", lambda x: float(x[0] - _MOMENT_LIMIT), lambda x: e0.copy())
    thickness = Constraint(
        "thickness",
        lambda x: float(_THICKNESS_MIN - (_THICKNESS_REF - _THICKNESS_LOSS * (x @ x))),
        lambda x: 2.0 * _THICKNESS_LOSS * np.asarray(x, dtype=float))
    return StochasticProblem(
        name="airfoil",
        dim=dim,
        loss_fn=loss,
        grad_fn=grad,
        support=support,
        nominal=nominal,
        x0=np.zeros(dim),
        constraints=(moment, thickness),
        lower=np.full(dim, -2.0),
        upper=np.full(dim, 2.0),
    )


PROBLEMS = {
    "toy": toy_beyer,
    "quadratic": constrained_quadratic,
    "airfoil": airfoil_surrogate,
}
