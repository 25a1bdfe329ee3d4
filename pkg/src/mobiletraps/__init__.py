"""
Survival of a random walk among moving Poisson traps on Z^d.

Exact annealed computations (Volterra and hitting solvers), Monte Carlo
and PAM estimators for quenched survival, the discrete Pascal principle,
and passage-function diagnostics.
"""
__version__ = "0.1.0"

from .lattice_kernels import (INFINITY, DivergenceError, ModelParams, green_function, hat_v0,
                              laplace_p, lclt_approx, rate_function_J, transition_prob)
from .paths import WalkPath
from .trap_field import (OutOfWindowError, TrapFieldConfig, TrapFieldRealization, integrate_along_path,
                         load_field, occupancy, sample_field, save_field, window_radius)
from .volterra_annealed import (CertificationError, annealed_survival_given_path,
                                annealed_survival_infinite_gamma, annealed_survival_pinned,
                                lyapunov_annealed_pinned, solve_hitting, solve_m_along_path, solve_v0)
from .survival_mc import (McEstimate, PamGrid, annealed_survival_mc, lyapunov_quenched_estimate,
                          pam_solve, quenched_survival_mc, quenched_survival_pde, sample_walk)
from .pascal_discrete import (DiscretePath, LazyWalkKernel, brute_force_oracle, expected_range,
                              induction_gap, kernel_monotonicity_check, pascal_check, trapping_sum)
from .lyapunov_shape import (PassageSample, passage, shape_profile, subadditivity_annealed_check,
                             triangle_check)
