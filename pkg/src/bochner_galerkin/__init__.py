"""Faedo-Galerkin solver, energy ledger and condition probes for nonlinear
evolution equations of p-Laplace and p-Navier-Stokes type."""

__version__ = "0.1.0"

from .apriori import AprioriBounds, audit_trajectory, gronwall_bounds
from .conditions import (ProbeReport, check_coercivity_C5, check_growth_C3, check_nemyckii_growth,
                         comp2_demo, interpolation_probe, oscillation_demo)
from .function_space import (Domain, GalerkinBasis, bochner_norms, h_inner, intersection_norm,
                             make_basis, project_initial, v_norm)
from .operators import (OperatorFamily, StressParams, assemble_load, convective_pairing,
                        nemyckii_pairing, p_laplace_pairing, stress_pairing, sum_operator)
from .perturbation import PerturbationSpec
from .scenarios import ScenarioConfig, build_scenario, manufactured_forced, manufactured_heat, run_study
from .solver import (EnergyLedger, SolveConfig, Trajectory, discrete_ibp_check, energy_report, ode_rhs,
                     solve, step)

__all__ = [
    "AprioriBounds", "audit_trajectory", "gronwall_bounds", "ProbeReport", "check_coercivity_C5",
    "check_growth_C3", "check_nemyckii_growth", "comp2_demo", "interpolation_probe",
    "oscillation_demo", "Domain", "GalerkinBasis", "bochner_norms", "h_inner", "intersection_norm",
    "make_basis", "project_initial", "v_norm", "OperatorFamily", "StressParams", "assemble_load",
    "convective_pairing", "nemyckii_pairing", "p_laplace_pairing", "stress_pairing", "sum_operator",
    "PerturbationSpec", "ScenarioConfig", "build_scenario", "manufactured_forced", "manufactured_heat",
    "run_study", "EnergyLedger", "SolveConfig", "Trajectory", "discrete_ibp_check", "energy_report",
    "ode_rhs", "solve", "step",
]
