import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from phidro.divergence import (
    DivergenceKind,
    check_simplex,
    divergence,
    in_ball,
    phi,
    phi_conjugate,
    phi_conjugate_derivative,
)
from phidro.errors import ContractError, DomainError, ParameterError

KINDS = list(DivergenceKind)


def grid_conjugate(kind, s):
    """Independent oracle: maximize s t - phi(t) numerically over t >= 0."""
    res = minimize_scalar(lambda t: -(s * t - phi(kind, t)), bounds=(1e-12, 50.0),
                          method="bounded", options={"xatol": 1e-12})
    return max(-res.fun, -phi(kind, 0.0))  # t = 0 endpoint; -inf for burg


@pytest.mark.parametrize("kind", KINDS)
def test_phi_vanishes_at_one(kind):
    assert phi(kind, 1.0) == 0.0


def test_phi_values():
    assert phi("chi2", 3.0) == 2.0
    assert phi("kl", 2.0) == pytest.approx(2 * math.log(2) - 1, abs=1e-12)
    assert phi("kl", 0.0) == 1.0
    assert phi("burg", 0.0) == math.inf


def test_phi_negative_argument():
    with pytest.raises(DomainError):
        phi("kl", -0.1)


def test_unknown_kind():
    with pytest.raises(ParameterError):
        DivergenceKind.parse("hellinger")


def test_chi2_conjugate_lower_branch():
    assert phi_conjugate("chi2", -2.0) == -0.5


@pytest.mark.parametrize("kind", KINDS)
def test_conjugate_at_zero(kind):
    assert phi_conjugate(kind, 0.0) == 0.0


def test_kl_conjugate_at_one():
    assert phi_conjugate("kl", 1.0) == pytest.approx(math.e - 1, abs=1e-12)
    assert grid_conjugate(DivergenceKind.KL, 1.0) == pytest.approx(math.e - 1, abs=1e-8)


def test_burg_conjugate_infinite_past_one():
    assert phi_conjugate("burg", 1.0) == math.inf
    assert phi_conjugate_derivative("burg", 2.0) == math.inf


def test_conjugate_derivative_values():
    assert phi_conjugate_derivative("chi2", -3.0) == 0.0
    assert phi_conjugate_derivative("chi2", -1.0) == 0.0
    assert phi_conjugate_derivative("chi2", 0.5) == 1.5
    assert phi_conjugate_derivative("kl", 0.0) == 1.0


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("s", [-3.0, -1.0, -0.4, 0.0, 0.3, 0.8])
def test_conjugate_matches_numeric_maximization(kind, s):
    assert phi_conjugate(kind, s) == pytest.approx(grid_conjugate(kind, s), abs=1e-7)


@settings(max_examples=80)
@given(st.sampled_from(KINDS), st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_phi_nonnegative_and_midpoint_convex(kind, a, b):
    fa, fb, fm = phi(kind, a), phi(kind, b), phi(kind, 0.5 * (a + b))
    assert fa >= 0 and fb >= 0
    assert fm <= 0.5 * (fa + fb) + 1e-12


@settings(max_examples=120)
@given(st.sampled_from(KINDS), st.floats(-4.0, 0.95), st.floats(0.0, 20.0))
def test_fenchel_young(kind, s, t):
    assert s * t <= phi(kind, t) + phi_conjugate(kind, s) + 1e-9
    t_star = phi_conjugate_derivative(kind, s)
    assert s * t_star == pytest.approx(phi(kind, t_star) + phi_conjugate(kind, s), abs=1e-9)


@settings(max_examples=80)
@given(st.sampled_from(KINDS), st.floats(-4.0, 0.95), st.floats(-4.0, 0.95))
def test_conjugate_monotone_and_convex(kind, a, b):
    lo, hi = min(a, b), max(a, b)
    assert phi_conjugate(kind, lo) <= phi_conjugate(kind, hi) + 1e-15
    mid = phi_conjugate(kind, 0.5 * (a + b))
    assert mid <= 0.5 * (phi_conjugate(kind, a) + phi_conjugate(kind, b)) + 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_divergence_of_p_from_itself(kind):
    p = np.array([0.2, 0.3, 0.5])
    assert divergence(kind, p, p) == 0.0


def test_divergence_values():
    assert divergence("chi2", [1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5, abs=1e-15)
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert divergence("kl", [0.75, 0.25], [0.5, 0.5]) == pytest.approx(expected, abs=1e-15)
    assert divergence("burg", [1.0, 0.0], [0.5, 0.5]) == math.inf


def test_divergence_contract_errors():
    with pytest.raises(ContractError):
        divergence("chi2", [0.5, 0.5], [0.2, 0.3, 0.5])
    with pytest.raises(ContractError):
        divergence("chi2", [0.6, 0.6], [0.5, 0.5])
    with pytest.raises(ContractError):
        divergence("chi2", [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ContractError):
        check_simplex([[0.5, 0.5]])


def test_ball_membership():
    p = np.array([0.5, 0.5])
    assert in_ball("kl", p, p, 0.0)
    assert not in_ball("chi2", [1.0, 0.0], p, 0.4)
    assert in_ball("chi2", [1.0, 0.0], p, 0.5)
    with pytest.raises(ParameterError):
        in_ball("chi2", p, p, -1.0)


def _perturbation(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n)) * 0.8 + 0.2 / n
    d = rng.standard_normal(n)
    d -= d.mean()
    d /= max(1.0, np.linalg.norm(d))
    return p, d


@settings(max_examples=60)
@given(st.integers(2, 3), st.integers(0, 10_000), st.sampled_from([DivergenceKind.KL,
                                                                    DivergenceKind.BURG]))
def test_locally_chi_square_uniform_nominal(n, seed, kind):
    _, d = _perturbation(n, seed)
    p = np.full(n, 1.0 / n)
    eps = 1e-3
    q = p + eps * d
    assert abs(divergence(kind, q, p) - divergence("chi2", q, p)) <= 5 * eps**3


@settings(max_examples=80)
@given(st.integers(2, 8), st.integers(0, 10_000), st.sampled_from([DivergenceKind.KL,
                                                                    DivergenceKind.BURG]))
def test_locally_chi_square_scaled(n, seed, kind):
    # the cubic remainder carries sum |d|^3 / p^2, which grows as p_i shrinks
    p, d = _perturbation(n, seed)
    eps = 1e-3
    q = p + eps * d
    scale = max(1.0, float(np.sum(np.abs(d) ** 3 / p**2)))
    assert abs(divergence(kind, q, p) - divergence("chi2", q, p)) <= 5 * eps**3 * scale


@settings(max_examples=60)
@given(st.sampled_from(KINDS), st.integers(2, 30), st.integers(0, 10_000))
def test_divergence_independent_of_index_order(kind, n, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n)) + 1e-3
    p /= p.sum()
    q = rng.dirichlet(np.ones(n)) + 1e-3
    q /= q.sum()
    assert abs(divergence(kind, q, p) - divergence(kind, q[::-1], p[::-1])) <= 1e-15
