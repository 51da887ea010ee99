//! Desk-scale experiments on the metric entropy of the Banach–Mazur
//! compactum.
//!
//! * [`signset`]: separated sign sets, half-size antichains, spherical codes.
//! * [`spaces`]: polytopal and ellipsoidal normed spaces, the `E_x` family,
//!   Auerbach bases, ball and subspace nets, ℓ∞ embeddings.
//! * [`bmdist`]: operator norms, Banach–Mazur distance bounds and
//!   certificates, greedy packing.
//! * [`qexpander`]: Haar unitary tuples, expander defect, tensor overlaps,
//!   the operator spaces `F_x`, concentration experiments.
//! * [`bounds`]: log-level arithmetic for the double-exponential counting
//!   chains.
//! * [`harness`]: experiment configs, reports and their verification.

pub mod bmdist;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod qexpander;
pub mod rng;
pub mod signset;
pub mod spaces;

pub use error::{Error, Result};
