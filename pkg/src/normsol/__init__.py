"""Normalized solutions of -Delta U + lam U = |U|^{p-1} U with prescribed
L^2 mass on intervals, rectangles and disks."""
from .grid import DomainSpec, Field, Grid, ProblemParams, build_grid, measure, norms
from .soliton import (Constants, SolitonProfile, gn_constant, mu_from_rho, mu_hat_1,
                      rho_from_mu, shoot_ground_state, thresholds)
from .spectral import EigenPair, dirichlet_eigs, eigen_sphere_points, morse_index, yang_check
from .twoconstraint import (Branch, CriticalPoint, antisym_lower_bound_M3, continue_branch,
                            maximize_on_level, multistart, recover_multipliers)
from .sphere import (MinimizerResult, admissible_mu_bound, blowup_witness, energy,
                     minimize_local)
from .tiling import mass_ladder, sector_lambda1_bound, tile_rectangle
from .blowup import (BlowupReport, asymptotic_ratios, bump_detect, decay_fit,
                     pohozaev_check)

__version__ = "0.1.0"
