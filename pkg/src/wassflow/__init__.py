"""m-relative entropy and its Wasserstein gradient flow on 1-D weighted domains."""
from .mcalc import MParam, e_m, exp_m, ln_m
from .domain import (Domain1D, ReferencePotential, k_modulus, quadratic_reference,
                     renormalize_reference, ric_N, support_radius_bound)
from .measures import GridMeasure, QuantileRep, m_gaussian, to_density, to_quantile
from .transport import displacement, w2, w2_lp_oracle
from .entropy import EntropyValue, fisher_i_m, h_m, renyi, tsallis

__version__ = "0.1.0"
