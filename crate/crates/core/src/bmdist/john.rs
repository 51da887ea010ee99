use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rows_of, RMat};
use crate::rng::rng_from_seed;
use crate::spaces::{PolytopalSpace, SpaceKind, MAX_VERTEX_DIM};

/// Iteration budget of the design-weight ascent.
pub const JOHN_MAX_ITER: usize = 200_000;
/// Stop once `maxᵢ gᵢ / n − 1` (the optimality gap of the design) drops
/// below this.
pub const JOHN_GAP_TOL: f64 = 1e-9;
/// Slack on containment checks over sampled directions.
pub const JOHN_CHECK_TOL: f64 = 1e-6;

/// The maximal-volume centered ellipsoid `M B₂ⁿ` inside a unit ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JohnEllipsoid {
    pub dim: usize,
    /// `M`, with the ellipsoid equal to `{M b : ‖b‖₂ ≤ 1}`.
    pub shape: Vec<Vec<f64>>,
    /// Largest `s` with `s·ellipsoid ⊆ ball`.
    pub inner_radius_factor: f64,
    /// Smallest `r` with `ball ⊆ r·ellipsoid`.
    pub outer_radius_factor: f64,
    pub iterations: usize,
    pub gap: f64,
}

impl JohnEllipsoid {
    pub fn shape_matrix(&self) -> RMat {
        crate::linalg::from_rows(&self.shape).expect("square shape matrix")
    }

    /// Upper bound on the distance to Euclidean space implied by the factors.
    pub fn euclidean_distance_bound(&self) -> f64 {
        self.outer_radius_factor / self.inner_radius_factor
    }

    /// The ellipsoid's own norm, `a ↦ ‖M⁻¹a‖₂`.
    pub fn as_space(&self) -> Result<PolytopalSpace> {
        let inv = self
            .shape_matrix()
            .try_inverse()
            .ok_or_else(|| Error::ConstructionFailed("singular John shape".into()))?;
        PolytopalSpace::ellipsoidal(&inv, "john")
    }

    /// Sampled check of `inner·E ⊆ B ⊆ outer·E`: for each direction `d`,
    /// `inner·‖d‖_B ≤ ‖d‖_E ≤ outer·‖d‖_B` up to `JOHN_CHECK_TOL`.
    /// Returns the worst relative violation (≤ 0 when all hold).
    pub fn verify(&self, space: &PolytopalSpace, samples: usize, seed: u64) -> Result<f64> {
        let e = self.as_space()?;
        let mut rng = rng_from_seed(seed);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let d = space.sample_direction(&mut rng);
            let nb = space.eval(&d);
            let ne = e.eval(&d);
            worst = worst.max(self.inner_radius_factor * nb / ne - 1.0).max(ne / (self.outer_radius_factor * nb) - 1.0);
        }
        Ok(worst)
    }
}

/// John ellipsoid of a polytopal or ellipsoidal unit ball.
///
/// For `B = {|φᵢ(a)| ≤ 1}`, the inscribed ellipsoid is the polar of the
/// minimum-volume ellipsoid around `{±φᵢ}`, found through its dual
/// (D-optimal design) by Fedorov–Wynn steps on the weights `wᵢ`. With
/// `Σ = Σ wᵢ φᵢ φᵢᵀ` the ellipsoid is `{a : aᵀ(nΣ)a ≤ 1}`, rescaled so it
/// touches the boundary exactly.
pub fn john_ellipsoid(space: &PolytopalSpace) -> Result<JohnEllipsoid> {
    let n = space.dim();
    if n > MAX_VERTEX_DIM {
        return Err(Error::ResourceGuard(format!("John ellipsoid limited to dim <= {MAX_VERTEX_DIM}")));
    }
    match space.kind() {
        SpaceKind::Ellipsoidal => {
            let l = space.euclidean_matrix().expect("ellipsoidal space has L");
            let m = l.try_inverse().ok_or_else(|| Error::ConstructionFailed("singular L".into()))?;
            return Ok(JohnEllipsoid {
                dim: n,
                shape: rows_of(&m),
                inner_radius_factor: 1.0,
                outer_radius_factor: 1.0,
                iterations: 0,
                gap: 0.0,
            });
        }
        SpaceKind::Composite => return Err(Error::Unsupported("John ellipsoid of composite spaces".into())),
        SpaceKind::Polytopal => {}
    }
    let phis: Vec<DVector<f64>> = space.functionals().iter().map(|f| DVector::from_column_slice(f)).collect();
    let k = phis.len();
    let mut w = vec![1.0 / k as f64; k];
    let moment = |w: &[f64]| {
        let mut s = RMat::zeros(n, n);
        for (wi, p) in w.iter().zip(&phis) {
            s += (p * p.transpose()) * *wi;
        }
        s
    };
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut sigma = moment(&w);
    while iterations < JOHN_MAX_ITER {
        iterations += 1;
        let inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::ConstructionFailed("functionals do not span".into()))?;
        let (best, g) = phis
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p.transpose() * &inv * p)[(0, 0)]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty functional list");
        gap = g / n as f64 - 1.0;
        if gap <= JOHN_GAP_TOL {
            break;
        }
        // exact line search for the log-det objective
        let alpha = (g / n as f64 - 1.0) / (g - 1.0);
        w.iter_mut().for_each(|x| *x *= 1.0 - alpha);
        w[best] += alpha;
        if iterations % 1000 == 0 {
            sigma = moment(&w);
        } else {
            let p = &phis[best];
            sigma = sigma * (1.0 - alpha) + (p * p.transpose()) * alpha;
        }
    }
    if gap > JOHN_GAP_TOL.max(1e-7) {
        return Err(Error::NonConvergence(format!("John ellipsoid gap {gap} after {iterations} iterations")));
    }
    let q = moment(&w) * n as f64;
    // M = Q^{-1/2}
    let eig = SymmetricEigen::new(q);
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::ConstructionFailed("degenerate John moment matrix".into()));
    }
    let d = RMat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let mut m = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    // touch the boundary exactly: maxᵢ ‖Mᵀφᵢ‖ = 1
    let reach = phis.iter().map(|p| (m.transpose() * p).norm()).fold(0.0, f64::max);
    m /= reach;
    let m_inv = m.clone().try_inverse().ok_or_else(|| Error::ConstructionFailed("singular John shape".into()))?;
    let outer = space
        .vertices()?
        .iter()
        .map(|v| (&m_inv * DVector::from_column_slice(v)).norm())
        .fold(0.0, f64::max);
    Ok(JohnEllipsoid {
        dim: n,
        shape: rows_of(&m),
        inner_radius_factor: 1.0,
        outer_radius_factor: outer,
        iterations,
        gap,
    })
}
