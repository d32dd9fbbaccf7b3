"""Fluctuation theory of Markov additive processes: simulation and numerics."""

__version__ = "0.1.0"

from .analytics import (AnalyticsError, TestFunction, char_matrix_exponent, drift_dichotomy, invariant_measure,
                        ladder_laplace_exponent, lyapunov_drift_report, overshoot_marginal, resolvent,
                        spectral_bound_check, stationary_distribution, subgeometric_rate)
from .ergodicity import (EmpiricalMeasure, RateFit, beta_mixing_stationary, fit_rate, stable_hitting_mixing_bound,
                         tv_decay_curve, tv_distance)
from .lamperti import (RealPath, lamperti_kiu_forward, lamperti_kiu_inverse, lamperti_stable_spec,
                       map_path_distance)
from .laws import (Exponential, FiniteMixture, LogStable, Negated, Pareto, PointMass, SignFlipLog, Truncated,
                   UniformInterval)
from .model import (CompoundPoisson, LadderSpec, LampertiStableJumps, LevyComponentSpec, MapSpec, SpecError,
                    StableJumps, dualize, ladder_irreducibility_sufficient, q_matrix_irreducible, stationary_of_Q,
                    validate)
from .rng import RngStream
from .simulator import (MapPath, estimate_ladder_spec, estimate_potential_measure, estimate_resolvent, first_passage,
                        run_ladder, sample_overshoots, simulate_endpoints, simulate_path)
from .vigon import (absolute_continuity_transfer, moment_transfer_check, vigon_check, vigon_rhs, vigon_rhs_dual,
                    wiener_hopf_residual)
