"""Annihilating and coalescing Brownian motions, the continuous-space voter model,
duality checks and density estimators."""

__version__ = "0.1.0"

from .configurations import (  # noqa: E402
    LINE,
    DensityClass,
    DensityProfile,
    DiscreteConfig,
    Line,
    TestFunction,
    Torus,
    class_equiv,
    class_from_config,
    constant_profile,
    entrance_family,
    hat_function,
    indicator_profile,
    interface_of,
    lattice_profile,
    vague_limit_check,
    vague_pairing,
)
from .density import (  # noqa: E402
    DensityQuery,
    density1_quadrature,
    density_maximal_mc,
    density_mc,
    density_n_dual_mc,
    gaussian_density,
    homogeneous_density,
    q_estimate,
    thinned_density_formula,
    thinned_density_mc,
)
from .duality import (  # noqa: E402
    DualityQuery,
    closed_form_match,
    closed_form_moment,
    lhs_moment,
    lhs_parity,
    rhs_match,
    rhs_moment,
)
from .estimates import EstimateWithCI, verdict  # noqa: E402
from .particles import (  # noqa: E402
    AnnihilatingState,
    CoalescingState,
    StepScheme,
    abm_run,
    abm_via_parity,
    cbm_run,
    count_in,
    parity_in,
    parity_restrict,
    thin,
)
from .rng import RngStream, resolve_seed, stream_id_for  # noqa: E402
from .stochastic import (  # noqa: E402
    PairLaw,
    bridge_cross_prob,
    gaussian,
    noncolliding_pair,
    noncolliding_pair_density,
    pair_meeting_time,
    pair_survival_prob,
)
from .voter import MarkedEndpoints, VoterState, match_indicator, voter_marginal_marks, voter_run_interface  # noqa: E402
