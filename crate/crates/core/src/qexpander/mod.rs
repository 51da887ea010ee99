//! Haar unitary tuples, quantum-expander defect, tensor overlaps, the
//! operator spaces `F_x` and the concentration experiments around them.
//!
//! Matrices are vectorized row-major, so `(a ⊗ b) vec(x) = vec(a x bᵀ)`.

mod experiments;
mod family;
mod fx;
mod tuple;

pub use crate::bounds::{eps_chain, EpsChain};
pub use experiments::{
    alignment_check, alignment_lower_bound, average_defect_constant, identity_counterexample, sum_norm,
    trace_tail_experiment, unitary_net_bound, Alignment, AlignmentCheck, AverageDefect, DefectRow,
    IdentityCounterexample, ReferenceTail, SampleRow, TraceTail, DEFECT_RATIO_ENVELOPE, TAIL_REFERENCE_CONSTANTS,
};
pub use family::{separated_family, FamilyVerification, SeparatedUnitaryFamily, VERIFY_DENSE_MAX_N};
pub use fx::{
    dn_identity_certificate, dn_identity_certificate_with, fx_norm_level1, fx_norm_level_n, DnCertificate,
    OperatorSpaceFx, DN_SOURCE_TOL,
};
pub use tuple::{
    apply_channel, defect, defect_estimate, defect_kronecker, haar_matrices, haar_tuple, haar_unitary, overlap_estimate,
    overlap_matrix, overlap_norm, overlap_norm_svd, UnitaryTuple, DEFECT_AGREEMENT_TOL, OVERLAP_DENSE_MAX_N,
    OVERLAP_SVD_MAX_N,     UNITARITY_TOL,
};
