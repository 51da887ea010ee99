use serde::{Deserialize, Serialize};

use super::family::SeparatedUnitaryFamily;
use super::tuple::UnitaryTuple;
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{from_interleaved, kron, spectral_norm, to_interleaved, CMat, C64};

/// Tolerance on `‖Σ s̄ⱼ⊗sⱼ‖ = n` for a witness.
pub const DN_SOURCE_TOL: f64 = 1e-8;

/// `F_x = span[uⱼˣ]` with `uⱼˣ = e_jj ⊕ [⊕_{t∈x} tⱼ]` inside
/// `ℓ∞ⁿ ⊕_∞ [ℓ∞(x) ⊗ M_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpaceFx {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub x: Vec<UnitaryTuple>,
}

impl OperatorSpaceFx {
    pub fn new(n: usize, big_n: usize, x: Vec<UnitaryTuple>) -> Result<Self> {
        if n == 0 || big_n == 0 {
            return Err(invalid("n and N must be positive"));
        }
        for t in &x {
            check_dim(n, t.n())?;
            check_dim(big_n, t.big_n())?;
        }
        Ok(OperatorSpaceFx { n, big_n, x })
    }

    /// `F_x` for the members of `family` listed in `subset`.
    pub fn from_members(members: &[UnitaryTuple], n: usize, big_n: usize, subset: &[usize]) -> Result<Self> {
        let x = subset
            .iter()
            .map(|&i| members.get(i).cloned().ok_or_else(|| invalid(format!("member {i} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, big_n, x)
    }

    /// `‖Σ aⱼ uⱼˣ‖ = max{maxⱼ|aⱼ|, max_{t∈x} ‖Σ aⱼ tⱼ‖}`.
    pub fn norm_level1(&self, a: &[C64]) -> Result<f64> {
        check_dim(self.n, a.len())?;
        let mut best = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for t in &self.x {
            let sum = t.matrices().iter().zip(a).fold(CMat::zeros(self.big_n, self.big_n), |acc, (m, &c)| acc + m * c);
            best = best.max(spectral_norm(&sum).value);
        }
        Ok(best)
    }

    /// `‖Σ Aⱼ ⊗ uⱼˣ‖ = max{maxⱼ‖Aⱼ‖, max_{t∈x} ‖Σ Aⱼ ⊗ tⱼ‖}` with `Aⱼ` of
    /// size `N`.
    pub fn norm_level_n(&self, a: &[CMat]) -> Result<f64> {
        check_dim(self.n, a.len())?;
        let mut best: f64 = 0.0;
        for m in a {
            check_dim(self.big_n, m.nrows())?;
            check_dim(self.big_n, m.ncols())?;
            best = best.max(spectral_norm(m).value);
        }
        let d = self.big_n * self.big_n;
        for t in &self.x {
            let sum = a.iter().zip(t.matrices()).fold(CMat::zeros(d, d), |acc, (c, m)| acc + kron(c, m));
            best = best.max(spectral_norm(&sum).value);
        }
        Ok(best)
    }
}

pub fn fx_norm_level1(f: &OperatorSpaceFx, a: &[C64]) -> Result<f64> {
    f.norm_level1(a)
}

pub fn fx_norm_level_n(f: &OperatorSpaceFx, a: &[CMat]) -> Result<f64> {
    f.norm_level_n(a)
}

/// Level-`N` witness for `‖Id_N : F_y → F_x‖ ≥ source/target`, with
/// coefficients `Aⱼ = s̄ⱼ` for a member `s ∈ x \ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnCertificate {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub witness_member: usize,
    /// `Aⱼ`, row-major interleaved.
    pub witness: Vec<Vec<f64>>,
    pub source_norm: f64,
    pub target_norm: f64,
    pub implied_ratio: f64,
    pub delta: f64,
}

impl DnCertificate {
    pub fn coefficients(&self, big_n: usize) -> Result<Vec<CMat>> {
        self.witness
            .iter()
            .map(|m| from_interleaved(big_n, big_n, m).ok_or_else(|| Error::Validation("witness has the wrong size".into())))
            .collect()
    }

    pub fn reevaluate(&self, fx: &OperatorSpaceFx, fy: &OperatorSpaceFx) -> Result<(f64, f64)> {
        let a = self.coefficients(fx.big_n)?;
        Ok((fx.norm_level_n(&a)?, fy.norm_level_n(&a)?))
    }

    /// Re-evaluation reproduces the stored norms exactly.
    pub fn reproduces(&self, fx: &OperatorSpaceFx, fy: &OperatorSpaceFx) -> bool {
        match self.reevaluate(fx, fy) {
            Ok((s, t)) => s == self.source_norm && t == self.target_norm && self.implied_ratio == s / t,
            Err(_) => false,
        }
    }
}

/// Certificate for `d_N(F_x, F_y) ≥ 1/(1−δ)` over a δ-separated family.
pub fn dn_identity_certificate(family: &SeparatedUnitaryFamily, x: &[usize], y: &[usize]) -> Result<DnCertificate> {
    dn_identity_certificate_with(&family.members, family.n, family.big_n, family.delta, x, y)
}

/// As [`dn_identity_certificate`] for any member list assumed δ-separated.
pub fn dn_identity_certificate_with(
    members: &[UnitaryTuple],
    n: usize,
    big_n: usize,
    delta: f64,
    x: &[usize],
    y: &[usize],
) -> Result<DnCertificate> {
    let nf = n as f64;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    if (1.0 - delta) * nf < 1.0 {
        return Err(invalid(format!("need (1-delta)·n >= 1, got {}", (1.0 - delta) * nf)));
    }
    if x.len() != y.len() {
        return Err(invalid("subsets must have equal cardinality"));
    }
    let mut xs = x.to_vec();
    xs.sort_unstable();
    let s = xs
        .into_iter()
        .find(|i| !y.contains(i))
        .ok_or_else(|| invalid("x and y coincide"))?;
    let fx = OperatorSpaceFx::from_members(members, n, big_n, x)?;
    let fy = OperatorSpaceFx::from_members(members, n, big_n, y)?;
    let a: Vec<CMat> = members[s].matrices().iter().map(|m| m.map(|z| z.conj())).collect();
    let source_norm = fx.norm_level_n(&a)?;
    let target_norm = fy.norm_level_n(&a)?;
    if (source_norm - nf).abs() > DN_SOURCE_TOL {
        return Err(Error::Validation(format!("witness norm {source_norm} in F_x, expected {n}")));
    }
    if target_norm > (1.0 - delta) * nf * (1.0 + 1e-12) {
        return Err(Error::Validation(format!("witness norm {target_norm} in F_y exceeds (1-delta)·n")));
    }
    Ok(DnCertificate {
        x: x.to_vec(),
        y: y.to_vec(),
        witness_member: s,
        witness: a.iter().map(to_interleaved).collect(),
        source_norm,
        target_norm,
        implied_ratio: source_norm / target_norm,
        delta,
    })
}
