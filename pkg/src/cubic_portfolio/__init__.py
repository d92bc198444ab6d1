"""Cardinality-constrained portfolio selection with a cubic co-selection term.

Native solver (HAMD hybrid), Rosenberg-quadratized SA/tabu baselines, and the
diagnostics used to compare them on the native objective.
"""

from .baselines import AnnealConfig, TabuConfig, decoded_native, sa_solve, tabu_solve
from .diagnostics import FeasibilityRecord, brute_force_optimum, feasibility_record, random_reference
from .hamd import MODES, HamdConfig, RunTrace, solve
from .instance import Portfolio, PortfolioInstance, generate_instance, load_instance, save_instance
from .native import EnergyParams, eval_native, gradient, hvp, swap_delta
from .quadratize import AugmentedQubo, build_augmented, decode, decompose, embed

__all__ = [
    "MODES", "AnnealConfig", "AugmentedQubo", "EnergyParams", "FeasibilityRecord", "HamdConfig", "Portfolio",
    "PortfolioInstance", "RunTrace", "TabuConfig", "brute_force_optimum", "build_augmented", "decode",
    "decoded_native", "decompose", "embed", "eval_native", "feasibility_record", "generate_instance", "gradient", "hvp",
    "load_instance", "random_reference", "sa_solve", "save_instance", "solve", "swap_delta", "tabu_solve",
]
