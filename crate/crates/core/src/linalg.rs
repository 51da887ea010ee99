//! Small dense linear-algebra helpers shared by the real (normed space) and
//! complex (unitary tuple) parts of the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::{rng_from_seed, Rng};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 10_000;

/// Outcome of a power iteration on a positive semidefinite operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Largest eigenvalue estimate (Rayleigh quotient of the final iterate).
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn standard_complex(rng: &mut Rng) -> C64 {
    // E|z|^2 = 1
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration for the top eigenvalue of a Hermitian PSD operator given
/// by its action. `project` is applied to every iterate (use it to confine
/// the iteration to an invariant subspace). Stops when successive Rayleigh
/// quotients differ by at most `tol * max(1, value)`.
pub fn power_iteration<F, P>(
    dim: usize,
    apply: F,
    project: P,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PowerEstimate
where
    F: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&mut [C64]),
{
    let mut rng = rng_from_seed(seed);
    let fresh = |rng: &mut Rng| -> Option<Vec<C64>> {
        let mut v: Vec<C64> = (0..dim).map(|_| standard_complex(rng)).collect();
        project(&mut v);
        let n = norm(&v);
        if n < 1e-300 {
            return None;
        }
        v.iter_mut().for_each(|z| *z /= n);
        Some(v)
    };
    let Some(mut v) = fresh(&mut rng) else {
        // the projected subspace is trivial
        return PowerEstimate { eigenvalue: 0.0, iterations: 0, converged: true };
    };
    let mut previous = f64::NEG_INFINITY;
    let mut restarts = 0;
    for iter in 1..=max_iter {
        let mut w = apply(&v);
        project(&mut w);
        let rayleigh = inner(&v, &w).re;
        let wn = norm(&w);
        if wn < 1e-300 {
            // start vector fell into the kernel; re-randomize a few times
            if restarts < 3 {
                restarts += 1;
                if let Some(nv) = fresh(&mut rng) {
                    v = nv;
                    continue;
                }
            }
            return PowerEstimate { eigenvalue: 0.0, iterations: iter, converged: true };
        }
        if (rayleigh - previous).abs() <= tol * rayleigh.abs().max(1.0) {
            return PowerEstimate { eigenvalue: rayleigh, iterations: iter, converged: true };
        }
        previous = rayleigh;
        w.iter_mut().for_each(|z| *z /= wn);
        v = w;
    }
    PowerEstimate { eigenvalue: previous, iterations: max_iter, converged: false }
}

/// Spectral norm estimate, with the two independent starts it was checked
/// against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
    /// |difference| between the estimates from the two starts.
    pub start_disagreement: f64,
}

impl SpectralNorm {
    pub fn agrees(&self, tol: f64) -> bool {
        self.converged && self.start_disagreement <= tol
    }
}

/// Largest singular value of the operator `a` (with adjoint `a_adj`), by
/// power iteration on `a* a` from two seeded starts.
pub fn top_singular_value<A, B>(dim: usize, a: A, a_adj: B, seed: u64) -> SpectralNorm
where
    A: Fn(&[C64]) -> Vec<C64>,
    B: Fn(&[C64]) -> Vec<C64>,
{
    let gram = |v: &[C64]| a_adj(&a(v));
    let first = power_iteration(dim, gram, |_| {}, seed, POWER_TOL, POWER_MAX_ITER);
    let second = power_iteration(dim, gram, |_| {}, seed ^ 0x9e37_79b9_7f4a_7c15, POWER_TOL, POWER_MAX_ITER);
    let s1 = first.eigenvalue.max(0.0).sqrt();
    let s2 = second.eigenvalue.max(0.0).sqrt();
    SpectralNorm {
        value: s1.max(s2),
        converged: first.converged && second.converged,
        start_disagreement: (s1 - s2).abs(),
    }
}

const SPECTRAL_SEED: u64 = 0x5eed_0f_5bec;

pub fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let x = DVector::from_column_slice(v);
    (m * x).as_slice().to_vec()
}

pub fn adj_mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let x = DVector::from_column_slice(v);
    (m.adjoint() * x).as_slice().to_vec()
}

/// Spectral (operator) norm of a dense complex matrix by power iteration.
pub fn spectral_norm(m: &CMat) -> SpectralNorm {
    let adj = m.adjoint();
    top_singular_value(
        m.ncols(),
        |v| mat_vec(m, v),
        |v| {
            let x = DVector::from_column_slice(v);
            (&adj * x).as_slice().to_vec()
        },
        SPECTRAL_SEED,
    )
}

/// Kronecker product with row-major vectorization convention:
/// `(a ⊗ b) vec(x) = vec(a x bᵀ)`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max entrywise deviation of `u* u` from the identity.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    let n = u.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

/// Row-major `[re, im, re, im, ...]` flattening.
pub fn to_interleaved(m: &CMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn from_interleaved(rows: usize, cols: usize, data: &[f64]) -> Option<CMat> {
    if data.len() != 2 * rows * cols {
        return None;
    }
    Some(CMat::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        C64::new(data[k], data[k + 1])
    }))
}

/// Real matrix as row-major nested vectors (for JSON).
pub fn rows_of(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<RMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(RMat::from_fn(r, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = rng_from_seed(11);
        for n in [1, 2, 5, 9] {
            let m = CMat::from_fn(n, n, |_, _| standard_complex(&mut rng));
            let svd = m.clone().svd(false, false);
            let exact = svd.singular_values.max();
            let est = spectral_norm(&m);
            assert!(est.converged);
            assert!((est.value - exact).abs() < 1e-8, "{} vs {}", est.value, exact);
        }
    }

    #[test]
    fn kron_convention_is_row_major_vec() {
        let mut rng = rng_from_seed(2);
        let a = CMat::from_fn(3, 3, |_, _| standard_complex(&mut rng));
        let b = CMat::from_fn(3, 3, |_, _| standard_complex(&mut rng));
        let x = CMat::from_fn(3, 3, |_, _| standard_complex(&mut rng));
        let vec_rm = |m: &CMat| -> Vec<C64> { (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect() };
        let lhs = mat_vec(&kron(&a, &b), &vec_rm(&x));
        let rhs = vec_rm(&(&a * &x * b.transpose()));
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-12);
        }
    }

    #[test]
    fn interleaved_roundtrip() {
        let mut rng = rng_from_seed(4);
        let m = CMat::from_fn(2, 3, |_, _| standard_complex(&mut rng));
        let back = from_interleaved(2, 3, &to_interleaved(&m)).unwrap();
        assert_eq!(m, back);
        assert!(from_interleaved(2, 2, &to_interleaved(&m)).is_none());
    }

    #[test]
    fn power_iteration_on_trivial_subspace_returns_zero() {
        let est = power_iteration(3, |v| v.to_vec(), |v| v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0)), 1, POWER_TOL, 10);
        assert_eq!(est.eigenvalue, 0.0);
        assert!(est.converged);
    }
}
