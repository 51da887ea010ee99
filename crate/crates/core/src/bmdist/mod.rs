//! Operator norms between normed spaces, Banach–Mazur distance bounds, norm
//! certificates and greedy packing.

mod certificate;
mod distance;
mod john;
mod opnorm;
mod packing;

pub use certificate::{identity_certificate, identity_certificate_with, Certificate, CertificateKind};
pub use distance::{
    bm_exact_2d, bm_exact_2d_with_budget, bm_upper, BmUpper, Exact2d, UpperRoute, DEFAULT_EFFORT,
    EXACT_2D_DEFAULT_TOL, EXACT_2D_MAX_CELLS, SEARCH_EVALS_PER_ENTRY,
};
pub use john::{john_ellipsoid, JohnEllipsoid, JOHN_CHECK_TOL, JOHN_GAP_TOL, JOHN_MAX_ITER};
pub use opnorm::{op_norm, op_norm_from_l1, op_norm_sandwich, LinearMapBetween, OpNorm};
pub use packing::{claim_counter, greedy_packing, PackingReport, PairCertificate, Rejection};
