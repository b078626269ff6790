import numpy as np
import pytest

from phidro.errors import ParameterError
from phidro.gdam import GdamConfig, run_deterministic_gdam, run_stochastic_gdam
from phidro.objectives import RobustnessSpec, empirical_mean
from phidro.problems import PROBLEMS, TOY_SUPPORT, airfoil_surrogate, constrained_quadratic, toy_beyer


def test_registry():
    assert set(PROBLEMS) == {"toy", "quadratic", "airfoil"}


def test_toy_loss_at_ends():
    prob = toy_beyer()
    for xi in TOY_SUPPORT:
        assert prob.loss([0.0], [xi]) == xi
        assert prob.loss([1.0], [xi]) == 1.0


def test_toy_box_and_support():
    prob = toy_beyer()
    assert prob.constraints == ()
    assert prob.lower[0] == 0.0 and prob.upper[0] == 1.0
    np.testing.assert_allclose(prob.support.values[:, 0], TOY_SUPPORT)


def test_quadratic_noise_free_is_deterministic():
    prob = constrained_quadratic(sigma=0.0)
    losses = [prob.loss([0.5, 1.0], s) for s in prob.support.scenarios]
    assert set(losses) == {0.25}


def test_quadratic_zero_mean_perturbations():
    prob = constrained_quadratic(sigma=0.5, n_scenarios=40)
    np.testing.assert_allclose(prob.support.values.mean(axis=0), 0.0, atol=1e-15)
    rep = empirical_mean(prob, [0.5, 1.0], prob.default_distribution())
    # E||r - sigma eps||^2 = ||r||^2 + sigma^2 E||eps||^2 when eps has zero mean
    expected = 0.25 + 0.25 * np.mean(np.sum(prob.support.values**2, axis=1))
    assert rep.value == pytest.approx(expected, rel=1e-12)


def test_quadratic_start_point_and_errors():
    prob = constrained_quadratic()
    np.testing.assert_allclose(prob.x0, [0.0, 1.0])
    assert prob.constraint_values(prob.x0)[0] < 0
    with pytest.raises(ParameterError):
        constrained_quadratic(c_bar=(0.0, 0.0))
    with pytest.raises(ParameterError):
        constrained_quadratic(sigma=-1.0)


def test_quadratic_gdam_reaches_projection():
    trace = run_deterministic_gdam(constrained_quadratic(), config=GdamConfig(beta=1e-3))
    np.testing.assert_allclose(trace.x, [0.5, 1.0], atol=2e-3)


def test_airfoil_reference_shape_strictly_feasible():
    for with_cl in (False, True):
        prob = airfoil_surrogate(with_cl=with_cl)
        assert np.all(prob.constraint_values(prob.x0) < 0)
        assert np.all(np.isfinite([prob.loss(prob.x0, s) for s in prob.support.scenarios]))


def test_airfoil_deterministic_and_mean_optima_differ():
    prob = airfoil_surrogate()
    cfg = GdamConfig(zeta0=0.5, beta=2e-3, batch_size=32, max_iters=3000, seed=1,
                     emo_estimator="batch")
    det = run_deterministic_gdam(prob, config=GdamConfig(zeta0=0.5, beta=2e-3, max_iters=3000))
    emo = run_stochastic_gdam(prob, prob.default_distribution(), RobustnessSpec.empirical_mean(),
                              cfg)
    assert np.linalg.norm(det.x - emo.x) > 1e-2
    dist = prob.default_distribution()
    assert empirical_mean(prob, emo.x, dist).value < empirical_mean(prob, det.x, dist).value
