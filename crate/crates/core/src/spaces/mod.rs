//! Finite-dimensional real normed spaces.
//!
//! A [`PolytopalSpace`] has norm `max(maxᵢ |φᵢ(a)|, ‖L a‖₂)` where the
//! functional list or the Euclidean part may be absent. With only
//! functionals the unit ball is a symmetric polytope; with only `L` it is an
//! ellipsoid; with both it is their intersection.

mod auerbach;
mod families;
mod nets;

use std::sync::OnceLock;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::RMat;
use crate::rng::Rng;

pub use auerbach::{auerbach_basis, AuerbachBasis, AUERBACH_ROUNDS};
pub use families::{biorthogonal_l2_system, make_ex, make_biorthogonal_space, BiorthogonalPair, BIORTHOGONAL_TOL};
pub use nets::{
    ball_net, embed_linf, grid_covering_radius, sampled_covering_radius, subspace_net, verify_subspace_net, BallNet,
    Certification, DualBall, LinfEmbedding, NetOptions, NormOracle, PoolKind, SubspaceNet, SubspaceNetCheck,
    NET_GUARD, SUBSPACE_TUPLE_GUARD,
};

/// Largest dimension handled by vertex enumeration.
pub const MAX_VERTEX_DIM: usize = 6;
/// Cap on `binomial(m, n) · 2ⁿ` linear solves during vertex enumeration.
pub const VERTEX_WORK_GUARD: u128 = 4_000_000;
/// Feasibility slack when testing candidate vertices.
pub const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Polytopal,
    Ellipsoidal,
    Composite,
}

/// A normed space on ℝⁿ given by finitely many functionals and an optional
/// Euclidean part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopalSpace {
    dim: usize,
    functionals: Vec<Vec<f64>>,
    /// Row-major `L` of the Euclidean part, if any.
    euclidean: Option<Vec<Vec<f64>>>,
    label: String,
    #[serde(skip)]
    vertices: OnceLock<Vec<Vec<f64>>>,
}

impl PartialEq for PolytopalSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.functionals == other.functionals
            && self.euclidean == other.euclidean
            && self.label == other.label
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matrix_rank(rows: &[Vec<f64>], dim: usize) -> usize {
    if rows.is_empty() || dim == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count()
}

impl PolytopalSpace {
    /// General constructor. Fails unless the functionals (together with the
    /// rows of `L`) span the dual, i.e. unless the result is a norm.
    pub fn new(
        dim: usize,
        functionals: Vec<Vec<f64>>,
        euclidean: Option<Vec<Vec<f64>>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        for f in &functionals {
            check_dim(dim, f.len())?;
            if f.iter().any(|x| !x.is_finite()) {
                return Err(invalid("functional has non-finite entries"));
            }
        }
        if let Some(l) = &euclidean {
            for row in l {
                check_dim(dim, row.len())?;
            }
        }
        let mut all = functionals.clone();
        if let Some(l) = &euclidean {
            all.extend(l.iter().cloned());
        }
        if matrix_rank(&all, dim) < dim {
            return Err(invalid("functionals do not span the dual space; the result would not be a norm"));
        }
        Ok(PolytopalSpace { dim, functionals, euclidean, label: label.into(), vertices: OnceLock::new() })
    }

    pub fn polytopal(dim: usize, functionals: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        Self::new(dim, functionals, None, label)
    }

    /// `‖a‖ = ‖L a‖₂` for invertible `L`.
    pub fn ellipsoidal(l: &RMat, label: impl Into<String>) -> Result<Self> {
        if l.nrows() != l.ncols() {
            return Err(invalid("ellipsoidal space needs a square matrix"));
        }
        Self::new(l.ncols(), Vec::new(), Some(crate::linalg::rows_of(l)), label)
    }

    pub fn l_inf(n: usize) -> Self {
        let fs = (0..n).map(|j| unit(n, j)).collect();
        Self::polytopal(n, fs, format!("l_inf^{n}")).expect("coordinate functionals span")
    }

    /// ℓ₁ⁿ as the max over sign functionals (one per ± pair), `n ≤ 16`.
    pub fn l_1(n: usize) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::ResourceGuard(format!("l_1^n as a polytope needs 1 <= n <= 16, got {n}")));
        }
        let fs = (0..(1u64 << (n - 1)))
            .map(|idx| crate::signset::lexicographic_signs(n, idx).into_iter().map(f64::from).collect())
            .collect();
        Self::polytopal(n, fs, format!("l_1^{n}"))
    }

    pub fn l_2(n: usize) -> Self {
        Self::ellipsoidal(&RMat::identity(n, n), format!("l_2^{n}")).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn functionals(&self) -> &[Vec<f64>] {
        &self.functionals
    }

    pub fn euclidean_rows(&self) -> Option<&[Vec<f64>]> {
        self.euclidean.as_deref()
    }

    pub fn euclidean_matrix(&self) -> Option<RMat> {
        self.euclidean.as_ref().and_then(|rows| crate::linalg::from_rows(rows))
    }

    pub fn kind(&self) -> SpaceKind {
        match (self.functionals.is_empty(), self.euclidean.is_some()) {
            (false, false) => SpaceKind::Polytopal,
            (true, true) => SpaceKind::Ellipsoidal,
            _ => SpaceKind::Composite,
        }
    }

    /// Norm without the dimension check. Callers guarantee `a.len() == dim`.
    pub(crate) fn eval(&self, a: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for f in &self.functionals {
            best = best.max(dot(f, a).abs());
        }
        if let Some(l) = &self.euclidean {
            let sq: f64 = l.iter().map(|row| dot(row, a).powi(2)).sum();
            best = best.max(sq.sqrt());
        }
        best
    }

    pub fn norm(&self, a: &[f64]) -> Result<f64> {
        check_dim(self.dim, a.len())?;
        Ok(self.eval(a))
    }

    /// Whether `sup|aⱼ| ≤ ‖a‖ ≤ Σ|aⱼ|` holds structurally: every coordinate
    /// functional is present and every piece of the norm is ℓ₁-contractive.
    pub fn has_norm_sandwich(&self) -> bool {
        let has_coordinates = (0..self.dim).all(|j| {
            self.functionals.iter().any(|f| {
                f.iter().enumerate().all(|(k, &x)| if k == j { (x.abs() - 1.0).abs() <= 1e-12 } else { x == 0.0 })
            })
        });
        let contractive = self.functionals.iter().all(|f| f.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        let euclid_ok = match &self.euclidean {
            None => true,
            Some(l) => (0..self.dim).all(|j| l.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt() <= 1.0 + 1e-12),
        };
        has_coordinates && contractive && euclid_ok
    }

    /// The space with norm `λ‖·‖`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let fs = self.functionals.iter().map(|f| f.iter().map(|x| x * lambda).collect()).collect();
        let l = self.euclidean.as_ref().map(|rows| rows.iter().map(|r| r.iter().map(|x| x * lambda).collect()).collect());
        PolytopalSpace { dim: self.dim, functionals: fs, euclidean: l, label: self.label.clone(), vertices: OnceLock::new() }
    }

    /// The space on ℝᵏ with norm `c ↦ ‖M c‖` for an `n × k` matrix `M`.
    /// Fails if the result is not a norm (`M` not injective).
    pub fn pullback(&self, m: &RMat) -> Result<Self> {
        check_dim(self.dim, m.nrows())?;
        let k = m.ncols();
        let pull = |row: &Vec<f64>| -> Vec<f64> { (0..k).map(|c| (0..self.dim).map(|r| row[r] * m[(r, c)]).sum()).collect() };
        let fs = self.functionals.iter().map(pull).collect();
        let l = self.euclidean.as_ref().map(|rows| rows.iter().map(pull).collect());
        Self::new(k, fs, l, format!("{}∘M", self.label))
    }

    /// Deduplicated functionals (up to sign), used for vertex enumeration.
    fn distinct_functionals(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for f in &self.functionals {
            if f.iter().all(|x| *x == 0.0) {
                continue;
            }
            let dup = out.iter().any(|g| {
                let same = f.iter().zip(g).all(|(a, b)| (a - b).abs() <= 1e-12);
                let opposite = f.iter().zip(g).all(|(a, b)| (a + b).abs() <= 1e-12);
                same || opposite
            });
            if !dup {
                out.push(f.clone());
            }
        }
        out
    }

    /// Vertices of the unit ball of a purely polytopal space, enumerated by
    /// solving every nonsingular `n × n` subsystem `φᵢ(a) = ±1` and keeping the
    /// feasible solutions. Cached after the first call.
    pub fn vertices(&self) -> Result<&[Vec<f64>]> {
        if let Some(v) = self.vertices.get() {
            return Ok(v);
        }
        if self.kind() != SpaceKind::Polytopal {
            return Err(Error::Unsupported(format!("vertex enumeration needs a polytopal space, {} is {:?}", self.label, self.kind())));
        }
        let n = self.dim;
        if n > MAX_VERTEX_DIM {
            return Err(Error::ResourceGuard(format!("vertex enumeration limited to dim <= {MAX_VERTEX_DIM}, got {n}")));
        }
        let fs = self.distinct_functionals();
        let work = crate::signset::binomial(fs.len() as u64, n as u64).saturating_mul(1u128 << n);
        if work > VERTEX_WORK_GUARD {
            return Err(Error::ResourceGuard(format!(
                "vertex enumeration over {} functionals in dim {n} needs {work} solves",
                fs.len()
            )));
        }
        let mut verts: Vec<Vec<f64>> = Vec::new();
        for combo in (0..fs.len()).combinations(n) {
            let a = DMatrix::from_fn(n, n, |i, j| fs[combo[i]][j]);
            let Some(lu) = Some(a.lu()).filter(|lu| lu.determinant().abs() > 1e-12) else {
                continue;
            };
            for signs in 0..(1u64 << n) {
                let rhs = DVector::from_fn(n, |i, _| if (signs >> i) & 1 == 0 { 1.0 } else { -1.0 });
                let Some(x) = lu.solve(&rhs) else { continue };
                let x: Vec<f64> = x.iter().copied().collect();
                if self.eval(&x) <= 1.0 + VERTEX_TOL
                    && !verts.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() <= 1e-9))
                {
                    verts.push(x);
                }
            }
        }
        Ok(self.vertices.get_or_init(|| verts))
    }

    /// `sup{|f(a)| : ‖a‖ ≤ 1}`.
    pub fn dual_norm(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.dim, f.len())?;
        match self.kind() {
            SpaceKind::Polytopal => Ok(self.vertices()?.iter().map(|v| dot(f, v).abs()).fold(0.0, f64::max)),
            SpaceKind::Ellipsoidal => {
                let l = self.euclidean_matrix().expect("ellipsoidal space has L");
                let lt = l.transpose();
                let y = lt
                    .lu()
                    .solve(&DVector::from_column_slice(f))
                    .ok_or_else(|| Error::ConstructionFailed("singular Euclidean part".into()))?;
                Ok(y.norm())
            }
            SpaceKind::Composite => Err(Error::Unsupported(format!(
                "dual norm of the composite space {} has no closed form",
                self.label
            ))),
        }
    }

    /// Half-widths `sup{|aₖ| : ‖a‖ ≤ 1}` of the unit ball.
    pub fn half_widths(&self) -> Result<Vec<f64>> {
        let coord = |k: usize| unit(self.dim, k);
        match self.kind() {
            SpaceKind::Polytopal | SpaceKind::Ellipsoidal => (0..self.dim).map(|k| self.dual_norm(&coord(k))).collect(),
            SpaceKind::Composite => {
                // the ball sits inside each of its pieces; use whichever is bounded
                if matrix_rank(&self.functionals, self.dim) == self.dim {
                    let poly = PolytopalSpace::polytopal(self.dim, self.functionals.clone(), "part")?;
                    poly.half_widths()
                } else {
                    let l = self.euclidean_matrix().expect("composite has L");
                    let ell = PolytopalSpace::ellipsoidal(&l, "part")?;
                    ell.half_widths()
                }
            }
        }
    }

    /// Uniform point of the unit ball (rejection from the bounding box, or a
    /// direct map for ellipsoids).
    pub fn sample_ball(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        if self.kind() == SpaceKind::Ellipsoidal {
            let l = self.euclidean_matrix().expect("ellipsoidal space has L");
            let g: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let gn = dot(&g, &g).sqrt();
            let radius = rng.gen::<f64>().powf(1.0 / self.dim as f64);
            let y = DVector::from_iterator(self.dim, g.iter().map(|x| x / gn * radius));
            let x = l.lu().solve(&y).ok_or_else(|| Error::ConstructionFailed("singular Euclidean part".into()))?;
            return Ok(x.iter().copied().collect());
        }
        let widths = self.half_widths()?;
        for _ in 0..1_000_000 {
            let a: Vec<f64> = widths.iter().map(|w| rng.gen_range(-1.0..=1.0) * w).collect();
            if self.eval(&a) <= 1.0 {
                return Ok(a);
            }
        }
        Err(Error::ConstructionFailed("rejection sampling of the unit ball did not terminate".into()))
    }

    /// Gaussian direction (not normalized).
    pub fn sample_direction(&self, rng: &mut Rng) -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            if g.iter().any(|x| *x != 0.0) {
                return g;
            }
        }
    }
}

pub(crate) fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[j] = 1.0;
    v
}
