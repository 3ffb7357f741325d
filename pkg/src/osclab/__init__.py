"""Lattice stopping-time construction, measure and function-class checks."""

__version__ = "0.1.0"

from .lattice import (BasicCube, CenteredCube, LatticeParams, RogueSet, random_rogue_set, read_rogue_file,
                      write_rogue_file)
from .stopping import BudgetError, Construction, StoppingParams, construct
from .verify import SequenceReport, verify_property_Q, verify_seq_length
from .measure import DensityGrid, PsiFunction, check_psi_condition
from .fclass import ClassParams, GridFunction, check_mean_value, check_weak_max, generate_test_function
from .oscillation import BudgetFunction, OscillationReport, classify, is_f_oscillating
from .growth import ChainReport, GrowthCurve, growth_curve, positive_mass_ratio, run_chain

__all__ = [
    "BasicCube", "CenteredCube", "LatticeParams", "RogueSet", "random_rogue_set", "read_rogue_file",
    "write_rogue_file", "BudgetError", "Construction", "StoppingParams", "construct", "SequenceReport",
    "verify_property_Q", "verify_seq_length", "DensityGrid", "PsiFunction", "check_psi_condition",
    "ClassParams", "GridFunction", "check_mean_value", "check_weak_max", "generate_test_function",
    "BudgetFunction", "OscillationReport", "classify", "is_f_oscillating", "ChainReport", "GrowthCurve",
    "growth_curve", "positive_mass_ratio", "run_chain",
]
