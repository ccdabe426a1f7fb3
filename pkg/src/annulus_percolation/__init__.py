"""Crossing and circuit probabilities of critical percolation in annuli.

Four cross-validating routes to the same quantities: the elliptic drift and
its diffusion (Monte Carlo), the crossing PDE (finite differences), the
triangular-lattice percolation sampler, and the eta-quotient closed form.
"""

__version__ = "0.1.0"

from .annulus import (
    AnnulusDomain,
    BoundaryData,
    dirichlet_series,
    vector_field_V,
    villat_extension,
    villat_residuals,
)
from .cardy import cardy_pn
from .diffusion import (
    CircuitEstimates,
    HalfStripState,
    McEstimate,
    SdeConfig,
    apply_shift_operator,
    estimate_circuit_probs,
    invert_cn,
    sde_step,
    simulate_trajectory,
)
from .elliptic import (
    LatticePeriods,
    ModulusParam,
    ThetaParams,
    dedekind_eta,
    drift,
    drift_profile,
    eta1_from_periods,
    lattice_periods,
    theta1_logderiv,
    theta_params,
    weierstrass_zeta,
    zeta3,
    zeta_lattice_sum,
)
from .lattice import (
    Coloring,
    LatticeAnnulus,
    build_annulus,
    estimate_events,
    estimate_F,
    sample_coloring,
    wrapping_profile,
)
from .pde import (
    GridField,
    GridSpec,
    solve_cn_recursion,
    solve_crossing_F,
    solve_exit_H,
)

__all__ = [name for name in dir() if not name.startswith("_")]
