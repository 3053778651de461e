"""Realized quadratic variation and the randomized periodogram for mixed
Brownian-fractional Brownian motion ``X = W + B^H``, ``1/2 < H < 1``."""

from .paths import (FactorizationError, SamplePath, Seed, TimeGrid,
                    fbm_covariance, make_equidistant_grid, sample_brownian,
                    sample_fbm, sample_mixed)
from .integrals import (iterated_double_integral, oscillatory_integral_ibp,
                        oscillatory_integral_rs, realized_qv, rs_integral)
from .periodogram import (QuadratureSpec, RandomizerSpec, parse_xi,
                          periodogram, periodogram_rs, randomized_periodogram,
                          spectral_error_term)
from .quadrature import QuadratureError
from .moments import (MomentReport, j1_variance, j2_variance, j3_variance,
                      j4_variance, randomized_bias, rqv_bias,
                      rqv_bias_equidistant, rqv_variance,
                      rqv_variance_equidistant)
from .experiments import ConfigError, ExperimentConfig

__version__ = "0.1.0"
