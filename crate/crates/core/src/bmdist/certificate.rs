use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{from_rows, RMat};
use crate::signset::SignSet;
use crate::spaces::{make_ex, PolytopalSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// `‖Id : Y → X‖ ≥ ‖w‖_X / ‖w‖_Y`.
    IdentityWitness,
    /// `‖u : Y → X‖ ≥ ‖u w‖_X / ‖w‖_Y`.
    MapWitness,
}

/// A witness vector proving an operator-norm lower bound.
///
/// `source_norm` is the numerator, evaluated in the space `X` where the
/// witness (or its image) is large; `target_norm` is the denominator,
/// evaluated in `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub witness: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<Vec<f64>>>,
    pub source_norm: f64,
    pub target_norm: f64,
    pub implied_ratio: f64,
}

impl Certificate {
    /// Identity witness `w`, large in `x_space`, small in `y_space`.
    pub fn identity(w: Vec<f64>, x_space: &PolytopalSpace, y_space: &PolytopalSpace) -> Result<Self> {
        check_dim(x_space.dim(), w.len())?;
        check_dim(y_space.dim(), w.len())?;
        let source_norm = x_space.eval(&w);
        let target_norm = y_space.eval(&w);
        if target_norm == 0.0 {
            return Err(invalid("zero witness"));
        }
        Ok(Certificate {
            kind: CertificateKind::IdentityWitness,
            witness: w,
            map: None,
            source_norm,
            target_norm,
            implied_ratio: source_norm / target_norm,
        })
    }

    pub fn for_map(u: &RMat, w: Vec<f64>, x_space: &PolytopalSpace, y_space: &PolytopalSpace) -> Result<Self> {
        check_dim(y_space.dim(), w.len())?;
        check_dim(u.ncols(), w.len())?;
        check_dim(x_space.dim(), u.nrows())?;
        let image: Vec<f64> = (0..u.nrows()).map(|i| (0..u.ncols()).map(|j| u[(i, j)] * w[j]).sum()).collect();
        let source_norm = x_space.eval(&image);
        let target_norm = y_space.eval(&w);
        if target_norm == 0.0 {
            return Err(invalid("zero witness"));
        }
        Ok(Certificate {
            kind: CertificateKind::MapWitness,
            witness: w,
            map: Some(crate::linalg::rows_of(u)),
            source_norm,
            target_norm,
            implied_ratio: source_norm / target_norm,
        })
    }

    /// Recompute `(source_norm, target_norm)` from the witness alone.
    pub fn reevaluate(&self, x_space: &PolytopalSpace, y_space: &PolytopalSpace) -> Result<(f64, f64)> {
        let fresh = match self.kind {
            CertificateKind::IdentityWitness => Self::identity(self.witness.clone(), x_space, y_space)?,
            CertificateKind::MapWitness => {
                let rows = self.map.as_ref().ok_or_else(|| Error::Validation("map witness without its map".into()))?;
                let u = from_rows(rows).ok_or_else(|| Error::Validation("ragged map".into()))?;
                Self::for_map(&u, self.witness.clone(), x_space, y_space)?
            }
        };
        Ok((fresh.source_norm, fresh.target_norm))
    }

    /// Whether re-evaluation reproduces the stored numbers exactly.
    pub fn reproduces(&self, x_space: &PolytopalSpace, y_space: &PolytopalSpace) -> bool {
        match self.reevaluate(x_space, y_space) {
            Ok((s, t)) => s == self.source_norm && t == self.target_norm && self.implied_ratio == s / t,
            Err(_) => false,
        }
    }
}

/// Identity certificate between `E_x` and `E_y`: the first `s ∈ x \ y` (in
/// the sign set's order) has `‖s‖_{E_x} = n` and `‖s‖_{E_y} ≤ θn`, so
/// `‖Id : E_y → E_x‖ ≥ 1/θ`.
pub fn identity_certificate(set: &SignSet, x: &[usize], y: &[usize]) -> Result<Certificate> {
    let ex = make_ex(set, x)?;
    let ey = make_ex(set, y)?;
    identity_certificate_with(set, x, y, &ex, &ey)
}

/// As [`identity_certificate`] with the two spaces already built.
pub fn identity_certificate_with(
    set: &SignSet,
    x: &[usize],
    y: &[usize],
    ex: &PolytopalSpace,
    ey: &PolytopalSpace,
) -> Result<Certificate> {
    let n = set.n as f64;
    if set.theta * n < 1.0 {
        return Err(invalid(format!("need theta·n >= 1, got {}", set.theta * n)));
    }
    if x.len() != y.len() {
        return Err(invalid("antichain members must have equal cardinality"));
    }
    let mut xs = x.to_vec();
    xs.sort_unstable();
    let s = xs
        .into_iter()
        .find(|i| !y.contains(i))
        .ok_or_else(|| Error::Validation("x is contained in y; equal-size members must then coincide".into()))?;
    let w: Vec<f64> = set.vectors[s].iter().map(|&v| f64::from(v)).collect();
    let cert = Certificate::identity(w, ex, ey)?;
    if cert.source_norm != n {
        return Err(Error::Validation(format!("witness norm {} in E_x, expected {n}", cert.source_norm)));
    }
    if cert.target_norm > set.theta * n {
        return Err(Error::Validation(format!("witness norm {} in E_y exceeds theta·n", cert.target_norm)));
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signset::{greedy_sign_set, SignSetMode};

    #[test]
    fn witness_gives_inverse_theta() {
        let set = greedy_sign_set(8, 0.5, SignSetMode::Exhaustive, 0).unwrap();
        assert!(set.len() >= 4);
        let c = identity_certificate(&set, &[0, 1], &[0, 2]).unwrap();
        assert_eq!(c.witness, set.vectors[1].iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        assert_eq!(c.source_norm, 8.0);
        assert!(c.implied_ratio >= 2.0);
        let ex = make_ex(&set, &[0, 1]).unwrap();
        let ey = make_ex(&set, &[0, 2]).unwrap();
        assert!(c.reproduces(&ex, &ey));
        let mut bad = c.clone();
        bad.witness[0] *= 1.1;
        assert!(!bad.reproduces(&ex, &ey));
    }

    #[test]
    fn preconditions() {
        let set = greedy_sign_set(4, 0.2, SignSetMode::Exhaustive, 0).unwrap();
        assert!(identity_certificate(&set, &[0], &[0]).is_err());
        let set = greedy_sign_set(8, 0.5, SignSetMode::Exhaustive, 0).unwrap();
        assert!(matches!(identity_certificate(&set, &[0, 1], &[1, 0]), Err(Error::Validation(_))));
        assert!(identity_certificate(&set, &[0, 1], &[2]).is_err());
    }

    #[test]
    fn map_witness_roundtrip() {
        let e = PolytopalSpace::l_inf(2);
        let f = PolytopalSpace::l_1(2).unwrap();
        let u = RMat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let c = Certificate::for_map(&u, vec![1.0, 1.0], &f, &e).unwrap();
        assert_eq!(c.implied_ratio, 2.0);
        assert!(c.reproduces(&f, &e));
    }
}
