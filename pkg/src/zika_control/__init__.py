"""Optimal control of vertical Zika transmission (women and Aedes mosquitoes)."""
from .model import ControlPair, ModelParams, StateVector, rhs_controlled, rhs_uncontrolled, total_adult_mosquitoes, total_women
from .pmp import ObjectiveWeights, adjoint_rhs, characterize_controls, hamiltonian, transversality
from .scenarios import ScenarioResult, ScenarioSpec, comparison_table, run_scenario, weight_sweep
from .solver import FbsmConfig, FbsmSolution, TimeGrid, evaluate_objective, fbsm_solve, rk4_backward, rk4_forward

__version__ = "0.1.0"
