"""Gradient flow of the m-relative entropy: JKO steps and the PDE solver."""
from .trace import FlowTrace, TRACE_COLUMNS, reference_measure, w2_to_reference
from .jko import (JkoConfig, JkoError, QuantileEnergy, discrete_ground_state, jko_objective,
                  jko_step, jko_trajectory, quantile_energy)
from .pde import StabilityError, barenblatt, barenblatt_measure, pde_run, pde_step, stable_dt
from .checks import (compare_jko_pde, contraction_check, energy_dissipation_check,
                     m_gaussian_closure_check, ou_moments, slope_identity_check, weak_residual)
