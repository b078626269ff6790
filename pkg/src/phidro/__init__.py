"""Distributionally robust design optimization over phi-divergence ambiguity sets."""

from .divergence import DivergenceKind, divergence, in_ball
from .dro_inner import InnerSolution, InnerSpec, dro_value_and_gradient, primal_oracle, solve_inner
from .gdam import GdamConfig, OptimizerTrace, run_deterministic_gdam, run_sgd, run_stochastic_gdam
from .objectives import ObjectiveReport, RobustnessSpec, StochasticProblem, robust_objective
from .problems import airfoil_surrogate, constrained_quadratic, toy_beyer
from .scenario import EmpiricalDistribution, Scenario, ScenarioSet

__all__ = [
    "DivergenceKind", "divergence", "in_ball",
    "InnerSolution", "InnerSpec", "dro_value_and_gradient", "primal_oracle", "solve_inner",
    "GdamConfig", "OptimizerTrace", "run_deterministic_gdam", "run_sgd", "run_stochastic_gdam",
    "ObjectiveReport", "RobustnessSpec", "StochasticProblem", "robust_objective",
    "airfoil_surrogate", "constrained_quadratic", "toy_beyer",
    "EmpiricalDistribution", "Scenario", "ScenarioSet",
]
