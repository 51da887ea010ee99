use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{PolytopalSpace, SpaceKind, MAX_VERTEX_DIM};
use crate::error::{Error, Result};
use crate::linalg::rows_of;

/// Coordinate-ascent budget (full sweeps over the basis).
pub const AUERBACH_ROUNDS: usize = 200;

/// A basis with `‖eⱼ‖ = ‖eⱼ*‖ = 1` up to `quality`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuerbachBasis {
    /// `vectors[j]` is `eⱼ`.
    pub vectors: Vec<Vec<f64>>,
    /// `duals[j]` is `eⱼ*` as a row.
    pub duals: Vec<Vec<f64>>,
    /// `max_j max(‖eⱼ‖, ‖eⱼ*‖)`.
    pub quality: f64,
    /// `max |eᵢ*(eⱼ) − δᵢⱼ|`.
    pub biorthogonality_residual: f64,
    pub rounds: usize,
}

/// Best point of the unit ball for the linear objective `|c · v|`.
fn maximize_linear(space: &PolytopalSpace, c: &[f64]) -> Result<Vec<f64>> {
    match space.kind() {
        SpaceKind::Polytopal => {
            let verts = space.vertices()?;
            let best = verts
                .iter()
                .max_by(|a, b| {
                    let fa: f64 = a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>().abs();
                    let fb: f64 = b.iter().zip(c).map(|(x, y)| x * y).sum::<f64>().abs();
                    fa.total_cmp(&fb)
                })
                .ok_or_else(|| Error::ConstructionFailed("unit ball has no vertices".into()))?;
            Ok(best.clone())
        }
        SpaceKind::Ellipsoidal => {
            // maximize c·v over ‖Lv‖ ≤ 1: v = L⁻¹ L⁻ᵀ c / ‖L⁻ᵀ c‖
            let l = space.euclidean_matrix().expect("ellipsoidal space has L");
            let lu_t = l.transpose().lu();
            let y = lu_t.solve(&DVector::from_column_slice(c)).ok_or_else(|| Error::ConstructionFailed("singular L".into()))?;
            let yn = y.norm();
            if yn == 0.0 {
                return Err(Error::ConstructionFailed("zero objective".into()));
            }
            let v = l.lu().solve(&(y / yn)).ok_or_else(|| Error::ConstructionFailed("singular L".into()))?;
            Ok(v.iter().copied().collect())
        }
        SpaceKind::Composite => Err(Error::Unsupported("Auerbach search on composite spaces".into())),
    }
}

/// Auerbach basis by determinant maximization.
///
/// Start from a well-conditioned tuple of ball points (greedy Gram–Schmidt
/// residual over the vertex set, or the Euclidean principal axes), then run
/// coordinate ascent: replace `vⱼ` by the ball point maximizing
/// `|det(v₁ … v … v_n)|`, which is linear in `v`. At a coordinatewise
/// maximum every dual functional has norm exactly one.
pub fn auerbach_basis(space: &PolytopalSpace) -> Result<AuerbachBasis> {
    let n = space.dim();
    if n > MAX_VERTEX_DIM {
        return Err(Error::ResourceGuard(format!("Auerbach search limited to dim <= {MAX_VERTEX_DIM}")));
    }
    let mut basis: Vec<Vec<f64>> = match space.kind() {
        SpaceKind::Polytopal => {
            let verts = space.vertices()?.to_vec();
            let mut chosen: Vec<Vec<f64>> = Vec::new();
            let mut ortho: Vec<DVector<f64>> = Vec::new();
            for _ in 0..n {
                let residual = |v: &Vec<f64>| {
                    let mut r = DVector::from_column_slice(v);
                    for q in &ortho {
                        let p = q.dot(&r);
                        r -= q * p;
                    }
                    r
                };
                let best = verts
                    .iter()
                    .max_by(|a, b| residual(a).norm().total_cmp(&residual(b).norm()))
                    .ok_or_else(|| Error::ConstructionFailed("no vertices".into()))?;
                let r = residual(best);
                if r.norm() < 1e-12 {
                    return Err(Error::ConstructionFailed("vertices do not span".into()));
                }
                ortho.push(r.normalize());
                chosen.push(best.clone());
            }
            chosen
        }
        SpaceKind::Ellipsoidal => {
            let l = space.euclidean_matrix().expect("ellipsoidal space has L");
            let inv = l.try_inverse().ok_or_else(|| Error::ConstructionFailed("singular L".into()))?;
            (0..n).map(|j| inv.column(j).iter().copied().collect()).collect()
        }
        SpaceKind::Composite => return Err(Error::Unsupported("Auerbach search on composite spaces".into())),
    };

    let as_matrix = |b: &[Vec<f64>]| DMatrix::from_fn(n, n, |i, j| b[j][i]);
    let mut det = as_matrix(&basis).determinant().abs();
    let mut rounds = 0;
    for round in 1..=AUERBACH_ROUNDS {
        rounds = round;
        let mut improved = false;
        for j in 0..n {
            let m = as_matrix(&basis);
            let inv = m.clone().try_inverse().ok_or_else(|| Error::ConstructionFailed("degenerate basis".into()))?;
            // det(V with column j = v) = det(V) · (row j of V⁻¹) · v
            let c: Vec<f64> = inv.row(j).iter().copied().collect();
            let candidate = maximize_linear(space, &c)?;
            let mut trial = basis.clone();
            trial[j] = candidate;
            let trial_det = as_matrix(&trial).determinant().abs();
            if trial_det > det * (1.0 + 1e-13) {
                basis = trial;
                det = trial_det;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    let m = as_matrix(&basis);
    let inv = m.clone().try_inverse().ok_or_else(|| Error::ConstructionFailed("degenerate basis".into()))?;
    let duals = rows_of(&inv);
    let mut quality: f64 = 0.0;
    for (v, d) in basis.iter().zip(&duals) {
        quality = quality.max(space.eval(v)).max(space.dual_norm(d)?);
    }
    let residual = (&inv * &m - DMatrix::<f64>::identity(n, n)).abs().max();
    if quality > 1.0 + 1e-6 {
        return Err(Error::NonConvergence(format!(
            "Auerbach ascent stopped after {rounds} rounds with quality {quality}"
        )));
    }
    Ok(AuerbachBasis { vectors: basis, duals, quality, biorthogonality_residual: residual, rounds })
}
