use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{
    from_interleaved, identity, kron, power_iteration, spectral_norm, standard_complex, to_interleaved,
    top_singular_value, unitarity_residual, CMat, SpectralNorm, C64, POWER_MAX_ITER, POWER_TOL,
};
use crate::rng::{rng_from_seed, Rng};

/// Largest tolerated `‖u*u − I‖` entry for a stored matrix.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Required agreement between the two defect routes and between restarts.
pub const DEFECT_AGREEMENT_TOL: f64 = 1e-8;

const DEFECT_SEED: u64 = 0xdefe_c7;
const OVERLAP_SEED: u64 = 0x07e7_1a9;

/// Largest `N` for which the overlap matrix `Σ sⱼ⊗t̄ⱼ` is materialized.
pub const OVERLAP_DENSE_MAX_N: usize = 32;
/// Up to this `N` the overlap comes from a full SVD of the `N²×N²` matrix
/// rather than power iteration.
pub const OVERLAP_SVD_MAX_N: usize = 8;

/// An `n`-tuple of `N×N` unitaries with its cached expander defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleRepr", into = "TupleRepr")]
pub struct UnitaryTuple {
    n: usize,
    big_n: usize,
    matrices: Vec<CMat>,
    defect: f64,
    /// The defect estimate did not converge or its two starts disagreed.
    defect_flagged: bool,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct TupleRepr {
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    /// Row-major `[re, im, ...]` per matrix.
    matrices: Vec<Vec<f64>>,
    defect: f64,
    #[serde(default)]
    defect_flagged: bool,
    #[serde(default)]
    seed: Option<u64>,
}

impl From<UnitaryTuple> for TupleRepr {
    fn from(t: UnitaryTuple) -> Self {
        TupleRepr {
            n: t.n,
            big_n: t.big_n,
            matrices: t.matrices.iter().map(to_interleaved).collect(),
            defect: t.defect,
            defect_flagged: t.defect_flagged,
            seed: t.seed,
        }
    }
}

impl TryFrom<TupleRepr> for UnitaryTuple {
    type Error = Error;

    fn try_from(r: TupleRepr) -> Result<Self> {
        check_dim(r.n, r.matrices.len())?;
        let matrices = r
            .matrices
            .iter()
            .map(|m| from_interleaved(r.big_n, r.big_n, m).ok_or_else(|| invalid("matrix has the wrong length")))
            .collect::<Result<Vec<_>>>()?;
        for m in &matrices {
            let res = unitarity_residual(m);
            if res > UNITARITY_TOL {
                return Err(Error::Validation(format!("stored matrix is not unitary (residual {res:e})")));
            }
        }
        Ok(UnitaryTuple {
            n: r.n,
            big_n: r.big_n,
            matrices,
            defect: r.defect,
            defect_flagged: r.defect_flagged,
            seed: r.seed,
        })
    }
}

impl UnitaryTuple {
    /// Builds a tuple and computes its defect.
    pub fn new(matrices: Vec<CMat>, seed: Option<u64>) -> Result<Self> {
        let n = matrices.len();
        if n == 0 {
            return Err(invalid("a tuple needs at least one matrix"));
        }
        let big_n = matrices[0].nrows();
        for m in &matrices {
            check_dim(big_n, m.nrows())?;
            check_dim(big_n, m.ncols())?;
            let res = unitarity_residual(m);
            if res > UNITARITY_TOL {
                return Err(invalid(format!("matrix is not unitary (residual {res:e})")));
            }
        }
        let mut t = UnitaryTuple { n, big_n, matrices, defect: 0.0, defect_flagged: false, seed };
        let d = defect_estimate(&t);
        t.defect = d.value;
        t.defect_flagged = !d.agrees(DEFECT_AGREEMENT_TOL);
        Ok(t)
    }

    /// `(I, …, I)`.
    pub fn constant_identity(n: usize, big_n: usize) -> Result<Self> {
        if n == 0 || big_n == 0 {
            return Err(invalid("n and N must be positive"));
        }
        Self::new(vec![identity(big_n); n], None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    /// Cached defect.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn defect_flagged(&self) -> bool {
        self.defect_flagged
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.matrices.iter().map(unitarity_residual).fold(0.0, f64::max)
    }

    /// Membership in `S_ε(n, N)`.
    pub fn in_s_epsilon(&self, epsilon: f64) -> bool {
        self.defect <= epsilon
    }

    /// Recomputes the defect and compares it with the cache.
    pub fn recheck_defect(&self) -> bool {
        (defect(self) - self.defect).abs() <= DEFECT_AGREEMENT_TOL
    }
}

/// Haar unitary: QR of a complex Gaussian matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn haar_unitary(big_n: usize, rng: &mut Rng) -> CMat {
    let z = CMat::from_fn(big_n, big_n, |_, _| standard_complex(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..big_n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..big_n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// The matrices [`haar_tuple`] would hold, without computing the defect.
pub fn haar_matrices(n: usize, big_n: usize, seed: u64) -> Result<Vec<CMat>> {
    if n == 0 || big_n == 0 {
        return Err(invalid("n and N must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| haar_unitary(big_n, &mut rng)).collect())
}

pub fn haar_tuple(n: usize, big_n: usize, seed: u64) -> Result<UnitaryTuple> {
    UnitaryTuple::new(haar_matrices(n, big_n, seed)?, Some(seed))
}

fn unvec(v: &[C64], big_n: usize) -> CMat {
    CMat::from_row_slice(big_n, big_n, v)
}

fn vec_of(m: &CMat) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

fn remove_trace(v: &mut [C64], big_n: usize) {
    let mean: C64 = (0..big_n).map(|i| v[i * big_n + i]).sum::<C64>() / big_n as f64;
    for i in 0..big_n {
        v[i * big_n + i] -= mean;
    }
}

/// `x ↦ Σ uⱼ x uⱼ*`.
pub fn apply_channel(u: &UnitaryTuple, x: &CMat) -> CMat {
    u.matrices.iter().fold(CMat::zeros(u.big_n, u.big_n), |acc, m| acc + m * x * m.adjoint())
}

fn apply_channel_adjoint(u: &UnitaryTuple, x: &CMat) -> CMat {
    u.matrices.iter().fold(CMat::zeros(u.big_n, u.big_n), |acc, m| acc + m.adjoint() * x * m)
}

/// Defect by power iteration on `Φ*Φ` over trace-zero matrices, from two
/// starts. `value` is the larger estimate divided by `n`.
pub fn defect_estimate(u: &UnitaryTuple) -> SpectralNorm {
    let nn = u.big_n;
    let gram = |v: &[C64]| {
        let x = unvec(v, nn);
        vec_of(&apply_channel_adjoint(u, &apply_channel(u, &x)))
    };
    let project = |v: &mut [C64]| remove_trace(v, nn);
    let run = |seed| power_iteration(nn * nn, gram, project, seed, POWER_TOL, POWER_MAX_ITER);
    let a = run(DEFECT_SEED);
    let b = run(DEFECT_SEED ^ 0x9e37_79b9_7f4a_7c15);
    let n = u.n as f64;
    let sa = a.eigenvalue.max(0.0).sqrt() / n;
    let sb = b.eigenvalue.max(0.0).sqrt() / n;
    SpectralNorm {
        value: sa.max(sb).min(1.0),
        converged: a.converged && b.converged,
        start_disagreement: (sa - sb).abs(),
    }
}

/// `n⁻¹ ‖Φ‖` on trace-zero matrices in the `L₂(τ_N)` metric.
pub fn defect(u: &UnitaryTuple) -> f64 {
    defect_estimate(u).value
}

/// The same quantity as `n⁻¹ ‖Σ uⱼ⊗ūⱼ (1 − P)‖`, `P` the projection onto
/// the vectorized identity, from a dense SVD of the `N²×N²` matrix.
pub fn defect_kronecker(u: &UnitaryTuple) -> f64 {
    let nn = u.big_n;
    let d = nn * nn;
    let m = u.matrices.iter().fold(CMat::zeros(d, d), |acc, a| acc + kron(a, &a.map(|z| z.conj())));
    let mut p = CMat::identity(d, d);
    let w = 1.0 / nn as f64;
    for i in 0..nn {
        for j in 0..nn {
            p[(i * nn + i, j * nn + j)] -= C64::new(w, 0.0);
        }
    }
    let s = (m * p).svd(false, false).singular_values.max();
    (s / u.n as f64).min(1.0)
}

fn check_pair(s: &UnitaryTuple, t: &UnitaryTuple) -> Result<()> {
    check_dim(s.n, t.n)?;
    check_dim(s.big_n, t.big_n)
}

/// `‖Σ sⱼ ⊗ t̄ⱼ‖` in `M_{N²}`: a full SVD for small `N`, otherwise power
/// iteration on `A*A`.
pub fn overlap_estimate(s: &UnitaryTuple, t: &UnitaryTuple) -> Result<SpectralNorm> {
    check_pair(s, t)?;
    let nn = s.big_n;
    if nn <= OVERLAP_SVD_MAX_N {
        return Ok(SpectralNorm { value: overlap_norm_svd(s, t)?, converged: true, start_disagreement: 0.0 });
    }
    if nn <= OVERLAP_DENSE_MAX_N {
        return Ok(spectral_norm(&overlap_matrix(s, t)?));
    }
    // (a ⊗ b̄) vec(x) = vec(a x b*), adjoint vec(a* y b)
    let apply = |v: &[C64]| {
        let x = unvec(v, nn);
        let y = s.matrices.iter().zip(&t.matrices).fold(CMat::zeros(nn, nn), |acc, (a, b)| acc + a * &x * b.adjoint());
        vec_of(&y)
    };
    let adjoint = |v: &[C64]| {
        let y = unvec(v, nn);
        let x = s.matrices.iter().zip(&t.matrices).fold(CMat::zeros(nn, nn), |acc, (a, b)| acc + a.adjoint() * &y * b);
        vec_of(&x)
    };
    Ok(top_singular_value(nn * nn, apply, adjoint, OVERLAP_SEED))
}

pub fn overlap_norm(s: &UnitaryTuple, t: &UnitaryTuple) -> Result<f64> {
    Ok(overlap_estimate(s, t)?.value)
}

/// Dense `Σ sⱼ ⊗ t̄ⱼ`.
pub fn overlap_matrix(s: &UnitaryTuple, t: &UnitaryTuple) -> Result<CMat> {
    check_pair(s, t)?;
    let d = s.big_n * s.big_n;
    Ok(s.matrices.iter().zip(&t.matrices).fold(CMat::zeros(d, d), |acc, (a, b)| acc + kron(a, &b.map(|z| z.conj()))))
}

/// Overlap from a full SVD; used to double-check separation decisions.
pub fn overlap_norm_svd(s: &UnitaryTuple, t: &UnitaryTuple) -> Result<f64> {
    Ok(overlap_matrix(s, t)?.svd(false, false).singular_values.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn haar_is_unitary_and_deterministic() {
        for big_n in [1, 2, 5, 8] {
            let t = haar_tuple(3, big_n, 17).unwrap();
            assert!(t.unitarity_residual() <= UNITARITY_TOL);
            assert_eq!(t, haar_tuple(3, big_n, 17).unwrap());
        }
        let scalars = haar_tuple(4, 1, 3).unwrap();
        for m in scalars.matrices() {
            assert!((m[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_trace_moments() {
        // N⁻¹ Re tr u has mean 0 and variance 1/(2N²)
        let big_n = 3;
        let mut rng = rng_from_seed(5);
        let samples = 10_000;
        let xs: Vec<f64> =
            (0..samples).map(|_| haar_unitary(big_n, &mut rng).trace().re / big_n as f64).collect();
        let mean = xs.iter().sum::<f64>() / samples as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / samples as f64;
        assert!(mean.abs() < 3.0 * (2.0 * samples as f64).sqrt().recip());
        let expected = 1.0 / (2.0 * (big_n * big_n) as f64);
        assert!((var - expected).abs() < 0.1 * expected, "{var} vs {expected}");
    }

    #[test]
    fn defect_trivial_cases() {
        let id = UnitaryTuple::constant_identity(5, 4).unwrap();
        assert_eq!(id.defect(), 1.0);
        let one = haar_tuple(1, 6, 2).unwrap();
        assert!((one.defect() - 1.0).abs() < 1e-10);
        let scalar = haar_tuple(3, 1, 2).unwrap();
        assert_eq!(scalar.defect(), 0.0);
    }

    #[test]
    fn defect_routes_agree() {
        for (n, big_n, seed) in [(4, 8, 1), (2, 3, 2), (8, 4, 3), (3, 2, 4)] {
            let t = haar_tuple(n, big_n, seed).unwrap();
            let k = defect_kronecker(&t);
            assert!((t.defect() - k).abs() <= DEFECT_AGREEMENT_TOL, "{} vs {}", t.defect(), k);
            assert!(!t.defect_flagged());
        }
    }

    #[test]
    fn haar_defect_is_below_one() {
        let t = haar_tuple(4, 8, 11).unwrap();
        assert!(t.defect() < 0.95);
        assert!(t.defect() > 0.5);
    }

    #[test]
    fn overlap_basics() {
        let s = haar_tuple(8, 4, 1).unwrap();
        let t = haar_tuple(8, 4, 2).unwrap();
        assert!((overlap_norm(&s, &s).unwrap() - 8.0).abs() < 1e-8);
        let st = overlap_norm(&s, &t).unwrap();
        assert!((st - overlap_norm(&t, &s).unwrap()).abs() < 1e-8);
        assert!((st - overlap_norm_svd(&s, &t).unwrap()).abs() < 1e-8);
        assert!(st < 0.9 * 8.0);
        let a = haar_tuple(3, 1, 4).unwrap();
        let b = haar_tuple(3, 1, 5).unwrap();
        let scalar: C64 = a.matrices().iter().zip(b.matrices()).map(|(x, y)| x[(0, 0)] * y[(0, 0)].conj()).sum();
        assert!((overlap_norm(&a, &b).unwrap() - scalar.norm()).abs() < 1e-10);
        assert!(overlap_norm(&a, &s).is_err());
    }

    #[test]
    fn implicit_overlap_matches_dense() {
        let s = haar_tuple(3, 33, 1).unwrap();
        let est = overlap_estimate(&s, &s).unwrap();
        assert!((est.value - 3.0).abs() < 1e-8);
        let a = haar_tuple(3, 10, 2).unwrap();
        let b = haar_tuple(3, 10, 3).unwrap();
        let est = overlap_estimate(&a, &b).unwrap();
        assert!(est.converged);
        assert!((est.value - overlap_norm_svd(&a, &b).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn serde_roundtrip() {
        let t = haar_tuple(2, 3, 9).unwrap();
        let js = serde_json::to_string(&t).unwrap();
        assert!(js.contains("\"N\":3"));
        let back: UnitaryTuple = serde_json::from_str(&js).unwrap();
        assert_eq!(back, t);
        let mut v: serde_json::Value = serde_json::from_str(&js).unwrap();
        v["matrices"][0][0] = serde_json::json!(2.0);
        assert!(serde_json::from_value::<UnitaryTuple>(v).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn overlap_and_defect_invariants(seed in any::<u64>(), n in 1usize..6, big_n in 1usize..5) {
            let s = haar_tuple(n, big_n, seed).unwrap();
            let t = haar_tuple(n, big_n, seed.wrapping_add(1)).unwrap();
            prop_assert!((overlap_norm(&s, &s).unwrap() - n as f64).abs() < 1e-8);
            let st = overlap_norm(&s, &t).unwrap();
            prop_assert!((st - overlap_norm(&t, &s).unwrap()).abs() < 1e-8);
            prop_assert!((0.0..=1.0).contains(&s.defect()));
            prop_assert!(s.unitarity_residual() <= UNITARITY_TOL);
        }
    }
}
