//! Log-scale arithmetic and the counting chains for packing and covering
//! numbers of spaces of normed and operator spaces.

mod chains;
mod loglevel;

pub use chains::{
    default_spherical_gamma, eps_chain, hh_iteration, liminf_constant, liminf_routes, lower_chain,
    lower_chain_threshold, measure_chain, neighbour_count, os_claim_counter, spherical_variant_bound, upper_chain,
    CountingBound, EpsChain, HhIteration, LiminfRoutes, LowerChain, MeasureChain, SphericalVariant, UpperChain,
    DEFAULT_C_ASSUMED, DEFAULT_GAMMA_NET, N0_SEARCH_LIMIT,
};
pub use loglevel::{LogLevelNumber, PROMOTE_ABOVE};
