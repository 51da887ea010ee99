use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::RMat;
use crate::spaces::{PolytopalSpace, SpaceKind};

/// Two-sided bound on an operator norm. `lower == upper` when exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNorm {
    pub lower: f64,
    pub upper: f64,
}

impl OpNorm {
    pub fn exact(value: f64) -> Self {
        OpNorm { lower: value, upper: value }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

fn apply(u: &RMat, a: &[f64]) -> Vec<f64> {
    (0..u.nrows()).map(|i| (0..u.ncols()).map(|j| u[(i, j)] * a[j]).sum()).collect()
}

/// `‖u : ℓ₁ⁿ → F‖ = maxⱼ ‖u eⱼ‖_F`.
pub fn op_norm_from_l1(u: &RMat, target: &PolytopalSpace) -> Result<f64> {
    check_dim(target.dim(), u.nrows())?;
    Ok((0..u.ncols())
        .map(|j| {
            let col: Vec<f64> = u.column(j).iter().copied().collect();
            target.norm(&col).expect("dimension checked")
        })
        .fold(0.0, f64::max))
}

/// `(‖u : ℓ₁ⁿ → F‖, n‖u : ℓ₁ⁿ → F‖)`, which brackets `‖u : E → F‖` whenever
/// `sup|aⱼ| ≤ ‖a‖_E ≤ Σ|aⱼ|`.
pub fn op_norm_sandwich(u: &RMat, source: &PolytopalSpace, target: &PolytopalSpace) -> Result<OpNorm> {
    check_dim(source.dim(), u.ncols())?;
    if !source.has_norm_sandwich() {
        return Err(invalid(format!(
            "source {} does not satisfy sup|a_j| <= ||a|| <= sum|a_j|",
            source.label()
        )));
    }
    let lower = op_norm_from_l1(u, target)?;
    Ok(OpNorm { lower, upper: source.dim() as f64 * lower })
}

/// Largest singular value of a real matrix.
fn spectral(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `‖u : E → F‖`, exact when the unit ball of `E` is enumerable (polytopal
/// with vertex enumeration in budget) or an ellipsoid; otherwise a bracket
/// from the coordinate vectors and the bounding box of the ball.
pub fn op_norm(u: &RMat, source: &PolytopalSpace, target: &PolytopalSpace) -> Result<OpNorm> {
    check_dim(source.dim(), u.ncols())?;
    check_dim(target.dim(), u.nrows())?;
    match source.kind() {
        SpaceKind::Polytopal => {
            if let Ok(verts) = source.vertices() {
                let v = verts.iter().map(|p| target.eval(&apply(u, p))).fold(0.0, f64::max);
                return Ok(OpNorm::exact(v));
            }
        }
        SpaceKind::Ellipsoidal => {
            let l = source.euclidean_matrix().expect("ellipsoidal space has L");
            let l_inv = l.try_inverse().ok_or_else(|| Error::ConstructionFailed("singular L".into()))?;
            let w = u * l_inv;
            let mut best: f64 = 0.0;
            for f in target.functionals() {
                let g = w.transpose() * DVector::from_column_slice(f);
                best = best.max(g.norm());
            }
            if let Some(lf) = target.euclidean_matrix() {
                best = best.max(spectral(&(lf * &w)));
            }
            return Ok(OpNorm::exact(best));
        }
        SpaceKind::Composite => {}
    }
    bracket(u, source, target)
}

fn bracket(u: &RMat, source: &PolytopalSpace, target: &PolytopalSpace) -> Result<OpNorm> {
    let n = source.dim();
    let mut lower: f64 = 0.0;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let ne = source.eval(&e);
        lower = lower.max(target.eval(&apply(u, &e)) / ne);
    }
    let widths = if source.has_norm_sandwich() { Some(vec![1.0; n]) } else { source.half_widths().ok() };
    let mut upper = f64::INFINITY;
    if let Some(w) = widths {
        // sup over the box Π[−wₖ, wₖ] ⊇ ball
        let mut box_bound: f64 = 0.0;
        for f in target.functionals() {
            let row = DVector::from_column_slice(f).transpose() * u;
            box_bound = box_bound.max(row.iter().zip(&w).map(|(x, wk)| x.abs() * wk).sum());
        }
        if let Some(lf) = target.euclidean_matrix() {
            let lu = lf * u;
            box_bound = box_bound.max((0..n).map(|k| lu.column(k).norm() * w[k]).sum());
        }
        upper = box_bound;
    }
    if source.has_norm_sandwich() {
        upper = upper.min(n as f64 * op_norm_from_l1(u, target)?);
    }
    Ok(OpNorm { lower, upper: upper.max(lower) })
}

/// A linear map between two spaces with its cached norm bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearMapBetween {
    pub matrix: Vec<Vec<f64>>,
    pub forward: OpNorm,
    pub inverse: Option<Vec<Vec<f64>>>,
    pub backward: Option<OpNorm>,
    /// Max entry of `u u⁻¹ − I` when invertible.
    pub inverse_residual: Option<f64>,
}

impl LinearMapBetween {
    pub fn new(u: &RMat, source: &PolytopalSpace, target: &PolytopalSpace) -> Result<Self> {
        let forward = op_norm(u, source, target)?;
        let (inverse, backward, residual) = match u.clone().try_inverse() {
            Some(inv) if u.nrows() == u.ncols() => {
                let res = (u * &inv - RMat::identity(u.nrows(), u.nrows())).abs().max();
                let back = op_norm(&inv, target, source)?;
                (Some(crate::linalg::rows_of(&inv)), Some(back), Some(res))
            }
            _ => (None, None, None),
        };
        Ok(LinearMapBetween { matrix: crate::linalg::rows_of(u), forward, inverse, backward, inverse_residual: residual })
    }

    /// Upper bound on `‖u‖‖u⁻¹‖` (∞ for singular maps).
    pub fn distortion_upper(&self) -> f64 {
        self.backward.map_or(f64::INFINITY, |b| self.forward.upper * b.upper)
    }

    pub fn distortion_lower(&self) -> f64 {
        self.backward.map_or(f64::INFINITY, |b| self.forward.lower * b.lower)
    }
}
