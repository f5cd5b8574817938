"""Seneta constants for supercritical Bellman-Harris branching processes."""

__version__ = "0.1.0"

from .errors import (AccuracyError, ConsistencyError, ConvergenceError, DomainError,  # noqa: E402
                     HypothesisError, NoDataError, ParseError, SenetaError)
from .gw_oracle import ChiSeries, gw_theorem_check, iterate_pgf, seneta_chi  # noqa: E402
from .laplace import (LaplaceSolution, SenetaSeries, X_of_t, Y_asymptote,  # noqa: E402
                      backward_residual, build_series, closed_form_X, integral_identity_residual,
                      potter_check, sigma_of_t, solve_R, uchiyama_estimate, verify_pipeline)
from .lifetime import (LifetimeLaw, TiltedLifetime, lattice_class, malthusian, nu,  # noqa: E402
                       parse_lifetime_spec, tilt)
from .offspring import (OffspringLaw, extinction_root, format_offspring_spec, h_eval,  # noqa: E402
                        parse_offspring_spec, pgf_eval, pgf_inverse, tail_gap, xlogx_diverges)
from .renewal import RenewalTable, build_table, utilde_tail  # noqa: E402
from .simulator import (SimConfig, SimEnsemble, empirical_laplace, ks_limit_check,  # noqa: E402
                        simulate_bh, simulate_gw)
