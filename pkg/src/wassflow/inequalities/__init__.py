"""Numerical checks of convexity, functional inequalities and concentration."""
from .convexity import ConvexityProfile, convexity_profile
from .functional import hwi_lsi_check, poincare_check, talagrand_check
from .concentration import (ConcentrationReport, alpha_estimate, classical_bound,
                            conc_bound_check, g_c_moment, m_normal_bound)
