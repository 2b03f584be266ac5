"""Cooperative sensor selection as a potential game.

Agents choose sensing points; each agent's utility is the conditional mutual
information of its measurement given everyone else's, so the team mutual
information is an exact potential.  Joint strategy fictitious play with
inertia finds a pure Nash equilibrium; enumeration and greedy baselines are
provided for comparison, along with a Lorenz-95 targeting scenario and a
particle-filter range-only tracking scenario.
"""
__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    BudgetExceededError,
    CatalogError,
    ConfigError,
    DegeneracyError,
    GridCoverageError,
    InfoGameError,
    NumericError,
)
from .game import (
    STRATEGIES,
    JsfpSolver,
    SensingGame,
    SolveTrace,
    audit_nash,
    generalized_utility,
    local_utility,
    potential,
    run_strategy,
    solve_iterative_greedy,
    solve_jsfp,
    solve_local_greedy,
    solve_optimal,
    solve_sequential_greedy,
)
from .gaussian import GaussianEngine, JointGaussian, load_joint_gaussian, save_joint_gaussian
from .info import InformationEngine, chain_rule_check
from .particle import (
    GaussianMixtureNoise,
    GaussianNoise,
    ParticleEngine,
    ParticleSet,
    QuadratureRule,
    RangeSensorModel,
    particle_mi,
    pf_update,
)

__all__ = [
    "ArgumentError", "BudgetExceededError", "CatalogError", "ConfigError", "DegeneracyError",
    "GridCoverageError", "InfoGameError", "NumericError",
    "STRATEGIES", "JsfpSolver", "SensingGame", "SolveTrace", "audit_nash", "generalized_utility",
    "local_utility", "potential", "run_strategy", "solve_iterative_greedy", "solve_jsfp",
    "solve_local_greedy", "solve_optimal", "solve_sequential_greedy",
    "GaussianEngine", "JointGaussian", "load_joint_gaussian", "save_joint_gaussian",
    "InformationEngine", "chain_rule_check",
    "GaussianMixtureNoise", "GaussianNoise", "ParticleEngine", "ParticleSet", "QuadratureRule",
    "RangeSensorModel", "particle_mi", "pf_update",
]
