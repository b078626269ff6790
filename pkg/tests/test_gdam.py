import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phidro.errors import (
    InfeasiblePointError,
    ParameterError,
    StartPointError,
    StationaryPoint,
    UndefinedBarrierParameter,
    UnsupportedModeError,
)
from phidro.gdam import (
    MIN_STEP,
    GdamConfig,
    barrier_value_gradient,
    gdam_direction,
    implied_barrier_parameter,
    run_deterministic_gdam,
    run_sgd,
    run_stochastic_gdam,
)
from phidro.objectives import Constraint, RobustnessSpec, StochasticProblem
from phidro.problems import airfoil_surrogate, constrained_quadratic, toy_beyer
from phidro.scenario import EmpiricalDistribution, Scenario, ScenarioSet

UPPER_ONE = Constraint("x<1", lambda x: float(x[0] - 1.0), lambda x: np.array([1.0]))


# -- building blocks -------------------------------------------------------------------

def test_barrier_examples():
    phi, grad = barrier_value_gradient([0.0], [UPPER_ONE])
    assert phi == 0.0 and grad[0] == 1.0
    phi, _ = barrier_value_gradient([1.0 - math.e], [UPPER_ONE])
    assert phi == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(InfeasiblePointError) as info:
        barrier_value_gradient([1.0], [UPPER_ONE])
    assert info.value.index == 0


def test_barrier_gradient_matches_finite_differences():
    prob = airfoil_surrogate()
    x = np.array([0.1, -0.2, 0.3, 0.05])
    _, grad = barrier_value_gradient(x, prob.constraints)
    h = 1e-6
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd = (barrier_value_gradient(x + e, prob.constraints)[0]
              - barrier_value_gradient(x - e, prob.constraints)[0]) / (2 * h)
        assert fd == pytest.approx(grad[j], rel=1e-6, abs=1e-8)


def test_direction_examples():
    np.testing.assert_allclose(gdam_direction([1.0, 0.0], [0.0, 2.0], 0.5), [-1.0, -0.5])
    np.testing.assert_allclose(gdam_direction([1.0, 0.0], [-1.0, 0.0], 0.5), [-0.5, 0.0])
    np.testing.assert_allclose(gdam_direction([3.0, 4.0], [1.0, 1.0], 0.0), [-0.6, -0.8])
    np.testing.assert_allclose(gdam_direction([3.0, 4.0], [0.0, 0.0], 0.7), [-0.6, -0.8])
    with pytest.raises(StationaryPoint):
        gdam_direction([0.0, 0.0], [1.0, 0.0], 0.5)


@settings(max_examples=100)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(0.0, 0.999))
def test_direction_norm_and_descent(gf, gp, zeta):
    gf, gp = np.array(gf), np.array(gp)
    if np.linalg.norm(gf) < 1e-6 or np.linalg.norm(gp) < 1e-6:
        return
    s = gdam_direction(gf, gp, zeta)
    assert 1 - zeta - 1e-12 <= np.linalg.norm(s) <= 1 + zeta + 1e-12
    assert s @ gf < 0


def test_implied_barrier_parameter():
    assert implied_barrier_parameter([2.0, 0.0], [0.0, 4.0], 0.5) == 0.25
    assert implied_barrier_parameter([2.0, 0.0], [0.0, 4.0], 0.0) == 0.0
    assert implied_barrier_parameter([3.0, 4.0], [0.0, 5.0], 0.3) == 0.3
    with pytest.raises(UndefinedBarrierParameter):
        implied_barrier_parameter([1.0], [0.0], 0.5)


def test_config_ranges():
    for bad in ({"zeta0": 1.0}, {"tau": 1.0}, {"beta": 0.0}, {"batch_size": 0},
                {"stall_window": 0}, {"momentum": 1.0}, {"emo_estimator": "median"}):
        with pytest.raises(ParameterError):
            GdamConfig(**bad)


# -- deterministic runs ------------------------------------------------------------------

def _assert_trace_invariants(trace, problem, beta):
    ks = [r.k for r in trace.records]
    assert ks == list(range(len(ks)))
    for r in trace.records:
        if problem.constraints:
            assert np.all(r.constraints < 0)
    zetas = trace.zetas
    assert np.all(np.diff(zetas) <= 0)
    assert np.all((zetas >= 0) & (zetas < 1))
    xs = [r.x for r in trace.records] + [trace.x]
    for r, nxt in zip(trace.records, xs[1:]):
        if r.step > 0:
            # a halved step is recorded as such; box clipping can only shorten it
            assert np.linalg.norm(nxt - r.x) <= r.step + 1e-14
            assert r.step == beta or r.step <= beta / 2


def test_deterministic_quadratic_reaches_projection():
    prob = constrained_quadratic()
    trace = run_deterministic_gdam(prob, config=GdamConfig(zeta0=0.9, beta=1e-3, max_iters=20_000))
    assert np.linalg.norm(trace.x - [0.5, 1.0]) <= 1e-3
    _assert_trace_invariants(trace, prob, 1e-3)
    # unconstrained interior steps have exactly the fixed length
    first = trace.records[0]
    assert np.linalg.norm(trace.records[1].x - first.x) == pytest.approx(1e-3, rel=1e-12)


def test_deterministic_toy_goes_to_zero():
    trace = run_deterministic_gdam(toy_beyer(), RobustnessSpec.deterministic([0.0]),
                                   GdamConfig(beta=1e-3, max_iters=5000))
    assert abs(trace.x[0]) <= 1e-3


def test_box_only_problem_is_normalized_descent():
    trace = run_deterministic_gdam(toy_beyer(), config=GdamConfig(beta=0.01, max_iters=10))
    np.testing.assert_allclose([r.x[0] for r in trace.records], 0.5 - 0.01 * np.arange(10),
                               atol=1e-14)


def test_infeasible_start_rejected():
    prob = constrained_quadratic()
    with pytest.raises(StartPointError):
        run_deterministic_gdam(prob, x0=[0.5, 0.0])
    with pytest.raises(StartPointError):
        run_deterministic_gdam(toy_beyer(), x0=[1.5])


def test_deterministic_spec_required():
    with pytest.raises(UnsupportedModeError):
        run_deterministic_gdam(toy_beyer(), RobustnessSpec.empirical_mean())
    with pytest.raises(UnsupportedModeError):
        run_stochastic_gdam(toy_beyer(), None, RobustnessSpec.deterministic())


def test_zeta_decreases_only_after_increase():
    prob = constrained_quadratic()
    trace = run_deterministic_gdam(prob, config=GdamConfig(beta=1e-2, max_iters=2000))
    objs = trace.objectives
    for k in range(1, len(trace.records)):
        if trace.zetas[k] < trace.zetas[k - 1]:
            assert objs[k] > objs[k - 1]


# -- stochastic runs -----------------------------------------------------------------------

def test_noise_free_stochastic_matches_deterministic():
    prob = constrained_quadratic(sigma=0.0)
    cfg = GdamConfig(beta=1e-2, max_iters=300, batch_size=4)
    det = run_deterministic_gdam(prob, config=cfg)
    for seed in range(5):
        sto = run_stochastic_gdam(prob, None, RobustnessSpec.empirical_mean(),
                                  GdamConfig(beta=1e-2, max_iters=300, batch_size=4, seed=seed))
        assert len(sto.records) == len(det.records)
        assert sto.termination == det.termination
        for a, b in zip(sto.records, det.records):
            np.testing.assert_allclose(a.x, b.x, atol=1e-12)
            assert a.zeta == b.zeta


@pytest.mark.parametrize("delta", [0.1, 1.0, 10.0])
def test_toy_dro_drives_design_to_zero(delta):
    trace = run_stochastic_gdam(toy_beyer(), None, RobustnessSpec.dro_penalized("chi2", delta),
                                GdamConfig(beta=1e-3, batch_size=5, max_iters=2000))
    assert trace.x[0] <= 1e-3


def test_quadratic_emo_with_noise():
    prob = constrained_quadratic(sigma=0.1)
    trace = run_stochastic_gdam(prob, None, RobustnessSpec.empirical_mean(),
                                GdamConfig(beta=1e-3, batch_size=16, max_iters=20_000))
    assert np.linalg.norm(trace.x - [0.5, 1.0]) <= 5e-2
    _assert_trace_invariants(trace, prob, 1e-3)


def test_stochastic_trace_is_bitwise_reproducible():
    prob = airfoil_surrogate()
    cfg = GdamConfig(beta=2e-3, batch_size=8, max_iters=200, seed=11)
    spec = RobustnessSpec.dro_penalized("kl", 0.05)
    a = run_stochastic_gdam(prob, None, spec, cfg)
    b = run_stochastic_gdam(prob, None, spec, cfg)
    assert a.termination == b.termination and len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        assert ra.x.tobytes() == rb.x.tobytes()
        assert ra.objective == rb.objective and ra.batch == rb.batch
    assert all(len(r.batch) == 8 for r in a.records)


def test_airfoil_trace_feasible_every_mode():
    prob = airfoil_surrogate()
    cfg = GdamConfig(beta=5e-3, batch_size=8, max_iters=300)
    for spec in (RobustnessSpec.empirical_mean(), RobustnessSpec.mean_variance(5.0),
                 RobustnessSpec.dro_constrained("chi2", 0.05)):
        _assert_trace_invariants(run_stochastic_gdam(prob, None, spec, cfg), prob, 5e-3)


def test_feasibility_guard_halves_step():
    # start right at the boundary: the first full step would cross a.x <= b
    prob = constrained_quadratic()
    trace = run_deterministic_gdam(prob, config=GdamConfig(zeta0=0.0, beta=0.1, max_iters=50),
                                   x0=[0.5 - 1e-3, 1.0])
    steps = [r.step for r in trace.records]
    assert any(0 < s < 0.1 for s in steps) or trace.termination == "step-collapse"
    _assert_trace_invariants(trace, prob, 0.1)
    assert MIN_STEP > 0


def test_per_sample_emo_has_median_like_fixed_point():
    # with per-sample unit directions every sample votes with equal weight,
    # so on a scalar quadratic with skewed centers the run settles at the median
    centers = np.array([0.0, 0.1, 1.0])
    prob = StochasticProblem(
        name="skewed", dim=1,
        loss_fn=lambda x, xi: float((x[0] - xi[0]) ** 2),
        grad_fn=lambda x, xi: np.array([2.0 * (x[0] - xi[0])]),
        support=ScenarioSet.from_values(centers), nominal=Scenario((0.1,), -1),
        x0=np.array([0.5]))
    # slow zeta decay: without constraints the floor would otherwise end the run early
    cfg = dict(beta=1e-3, batch_size=3, max_iters=3000, tau=0.999)
    dist = EmpiricalDistribution(prob.support)
    spec = RobustnessSpec.empirical_mean()
    per = run_stochastic_gdam(prob, dist, spec, GdamConfig(**cfg))
    batch = run_stochastic_gdam(prob, dist, spec, GdamConfig(emo_estimator="batch", **cfg))
    assert abs(batch.x[0] - centers.mean()) <= 0.02
    assert abs(per.x[0] - np.median(centers)) <= 0.02
    assert abs(per.x[0] - np.median(centers)) < abs(per.x[0] - centers.mean())


# -- SGD baseline ------------------------------------------------------------------------------

def test_sgd_toy_mean_goes_to_zero():
    trace = run_sgd(toy_beyer(), None, RobustnessSpec.empirical_mean(),
                    GdamConfig(beta=1e-3, batch_size=5, max_iters=2000))
    assert trace.x[0] <= 1e-3


def test_sgd_toy_mean_variance_interior():
    trace = run_sgd(toy_beyer(), None, RobustnessSpec.mean_variance(3.125),
                    GdamConfig(beta=1e-3, batch_size=2000, max_iters=2000))
    assert abs(trace.x[0] - math.sqrt(0.5)) <= 1e-2


def test_sgd_zero_gradient_start_terminates():
    trace = run_sgd(toy_beyer(), None, RobustnessSpec.empirical_mean(), GdamConfig(), x0=[0.0])
    assert trace.termination == "tolerance" and len(trace.records) == 1


def test_sgd_rejects_constraints():
    with pytest.raises(UnsupportedModeError):
        run_sgd(constrained_quadratic(), None, RobustnessSpec.empirical_mean())
