use serde::{Deserialize, Serialize};

use super::{unit, PolytopalSpace, SpaceKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::signset::SignSet;

/// Slack used when validating the local-family hypotheses.
pub const BIORTHOGONAL_TOL: f64 = 1e-9;

/// The space `E_x`: norm `max{ sup |aⱼ|, sup_{t∈x} |Σ aⱼ tⱼ| }` where `x` is
/// given as indices into `set`.
pub fn make_ex(set: &SignSet, x: &[usize]) -> Result<PolytopalSpace> {
    let n = set.n;
    let mut functionals: Vec<Vec<f64>> = (0..n).map(|j| unit(n, j)).collect();
    for &idx in x {
        let t = set
            .vectors
            .get(idx)
            .ok_or_else(|| invalid(format!("index {idx} is not a member of the sign set (size {})", set.len())))?;
        functionals.push(t.iter().map(|&s| s as f64).collect());
    }
    PolytopalSpace::polytopal(n, functionals, format!("E_x(|x|={})", x.len()))
}

/// One pair `(x_t, x_t*)` of the biorthogonal-type system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalPair {
    pub vector: Vec<f64>,
    pub functional: Vec<f64>,
}

/// The system `x_t = x_t* = t/√n` over a sign set, for `E = ℓ₂ⁿ`.
pub fn biorthogonal_l2_system(set: &SignSet) -> Vec<BiorthogonalPair> {
    let scale = 1.0 / (set.n as f64).sqrt();
    set.vectors
        .iter()
        .map(|t| {
            let v: Vec<f64> = t.iter().map(|&s| s as f64 * scale).collect();
            BiorthogonalPair { vector: v.clone(), functional: v }
        })
        .collect()
}

fn validate_system(e: &PolytopalSpace, system: &[BiorthogonalPair], theta: f64, c: f64) -> Result<()> {
    for (t, pair) in system.iter().enumerate() {
        check_dim(e.dim(), pair.vector.len())?;
        check_dim(e.dim(), pair.functional.len())?;
        let xn = e.eval(&pair.vector);
        if xn > c + BIORTHOGONAL_TOL {
            return Err(Error::Validation(format!("||x_{t}||_E = {xn} exceeds C = {c}")));
        }
        let fn_ = e.dual_norm(&pair.functional)?;
        if fn_ > c + BIORTHOGONAL_TOL {
            return Err(Error::Validation(format!("||x*_{t}||_E* = {fn_} exceeds C = {c}")));
        }
        let diag: f64 = pair.functional.iter().zip(&pair.vector).map(|(a, b)| a * b).sum();
        if (diag - 1.0).abs() > BIORTHOGONAL_TOL {
            return Err(Error::Validation(format!("x*_{t}(x_{t}) = {diag}, expected 1")));
        }
    }
    for (s, ps) in system.iter().enumerate() {
        for (t, pt) in system.iter().enumerate() {
            if s == t {
                continue;
            }
            let off: f64 = ps.functional.iter().zip(&pt.vector).map(|(a, b)| a * b).sum();
            if off.abs() > theta + BIORTHOGONAL_TOL {
                return Err(Error::Validation(format!("|x*_{s}(x_{t})| = {} exceeds theta = {theta}", off.abs())));
            }
        }
    }
    Ok(())
}

/// `‖a‖_{E_x} = max{ C⁻¹θ‖a‖_E, sup_{t∈x} |x_t*(a)| }`.
///
/// The system hypotheses are checked first; the first violated inequality
/// is reported.
pub fn make_biorthogonal_space(
    e: &PolytopalSpace,
    system: &[BiorthogonalPair],
    theta: f64,
    c: f64,
    x: &[usize],
) -> Result<PolytopalSpace> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    if c < 1.0 {
        return Err(invalid(format!("C must be >= 1, got {c}")));
    }
    validate_system(e, system, theta, c)?;
    let base = e.scaled(theta / c);
    let mut functionals = base.functionals().to_vec();
    for &idx in x {
        let pair = system.get(idx).ok_or_else(|| invalid(format!("index {idx} outside the system")))?;
        functionals.push(pair.functional.clone());
    }
    let euclid = base.euclidean_rows().map(<[Vec<f64>]>::to_vec);
    let space = PolytopalSpace::new(e.dim(), functionals, euclid, format!("biorthogonal(|x|={})", x.len()))?;
    debug_assert!(x.is_empty() || space.kind() != SpaceKind::Ellipsoidal);
    Ok(space)
}
