use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tuple::{
    defect_kronecker, haar_tuple, overlap_norm, overlap_norm_svd, UnitaryTuple, DEFECT_AGREEMENT_TOL,
    UNITARITY_TOL,
};
use crate::bounds::LogLevelNumber;
use crate::error::{invalid, Result};
use crate::rng::derive_seed;

/// Largest `N` for which verification recomputes overlaps and defects from
/// dense SVDs instead of power iteration.
pub const VERIFY_DENSE_MAX_N: usize = 16;

const BATCH: usize = 32;

/// Greedily extracted δ-separated subset of `S_ε(n, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedUnitaryFamily {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub members: Vec<UnitaryTuple>,
    /// `‖Σ sⱼ⊗t̄ⱼ‖` over ordered member pairs; the diagonal is `n`.
    pub pairwise_overlaps: Vec<Vec<f64>>,
    pub samples_drawn: usize,
    pub defect_rejections: usize,
    /// Samples whose defect estimate was flagged (and therefore skipped).
    pub flagged_rejections: usize,
    pub overlap_rejections: usize,
    /// `nN²`: the family size sought is `exp(β nN²)` for an unnamed `β`.
    pub target_exponent: f64,
    /// `exp(nN²)`, the target at `β = 1`.
    pub target_at_unit_beta: LogLevelNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyVerification {
    pub members: usize,
    pub max_defect: f64,
    pub max_off_diagonal_overlap: f64,
    pub max_diagonal_error: f64,
    pub max_unitarity_residual: f64,
    pub all_in_s_epsilon: bool,
    pub separated: bool,
    /// Recomputed overlaps match the stored matrix to 1e−8.
    pub overlaps_reproduce: bool,
    pub defects_reproduce: bool,
    pub ok: bool,
}

/// Rejection-samples Haar tuples, keeping those with defect `≤ ε` whose
/// overlap with every kept tuple is `≤ (1−δ)n`.
pub fn separated_family(
    n: usize,
    big_n: usize,
    epsilon: f64,
    delta: f64,
    max_samples: usize,
    seed: u64,
) -> Result<SeparatedUnitaryFamily> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("epsilon and delta must lie in (0, 1)"));
    }
    if n == 0 || big_n == 0 {
        return Err(invalid("n and N must be positive"));
    }
    let threshold = (1.0 - delta) * n as f64;
    let mut members: Vec<UnitaryTuple> = Vec::new();
    let (mut defect_rejections, mut flagged_rejections, mut overlap_rejections) = (0, 0, 0);
    let mut drawn = 0;
    while drawn < max_samples {
        let batch = BATCH.min(max_samples - drawn);
        let tuples: Vec<UnitaryTuple> = (drawn..drawn + batch)
            .into_par_iter()
            .map(|i| haar_tuple(n, big_n, derive_seed(seed, &["qexpander", "separated_family"], i as u64)))
            .collect::<Result<_>>()?;
        drawn += batch;
        for t in tuples {
            if t.defect_flagged() {
                flagged_rejections += 1;
                continue;
            }
            if !t.in_s_epsilon(epsilon) {
                defect_rejections += 1;
                continue;
            }
            let overlaps: Vec<f64> =
                members.par_iter().map(|m| overlap_norm(&t, m)).collect::<Result<_>>()?;
            if overlaps.iter().all(|&o| o <= threshold) {
                members.push(t);
            } else {
                overlap_rejections += 1;
            }
        }
    }
    let pairwise_overlaps = overlap_table(&members)?;
    let target_exponent = (n * big_n * big_n) as f64;
    Ok(SeparatedUnitaryFamily {
        n,
        big_n,
        epsilon,
        delta,
        seed,
        members,
        pairwise_overlaps,
        samples_drawn: drawn,
        defect_rejections,
        flagged_rejections,
        overlap_rejections,
        target_exponent,
        target_at_unit_beta: LogLevelNumber::exp_of(target_exponent),
    })
}

fn overlap_table(members: &[UnitaryTuple]) -> Result<Vec<Vec<f64>>> {
    members
        .par_iter()
        .map(|s| members.iter().map(|t| overlap_norm(s, t)).collect::<Result<Vec<_>>>())
        .collect()
}

impl SeparatedUnitaryFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Recomputes every defect and overlap (by dense SVD when `N` is
    /// small) and checks membership and separation.
    pub fn verify(&self) -> Result<FamilyVerification> {
        let nf = self.n as f64;
        let threshold = (1.0 - self.delta) * nf;
        let dense = self.big_n <= VERIFY_DENSE_MAX_N;
        let defects: Vec<f64> = self
            .members
            .par_iter()
            .map(|t| if dense { defect_kronecker(t) } else { super::tuple::defect(t) })
            .collect();
        let stored = overlap_table(&self.members)?;
        let fresh: Vec<Vec<f64>> = self
            .members
            .par_iter()
            .map(|s| {
                self.members
                    .iter()
                    .map(|t| if dense { overlap_norm_svd(s, t) } else { overlap_norm(s, t) })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut max_off: f64 = 0.0;
        let mut max_diag_err: f64 = 0.0;
        let mut overlaps_reproduce = stored.len() == self.pairwise_overlaps.len();
        for (i, row) in fresh.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j {
                    max_diag_err = max_diag_err.max((v - nf).abs());
                } else {
                    max_off = max_off.max(v);
                }
                let recorded = self.pairwise_overlaps.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN);
                overlaps_reproduce &= recorded == stored[i][j] && (recorded - v).abs() <= DEFECT_AGREEMENT_TOL;
            }
        }
        let max_defect = defects.iter().copied().fold(0.0, f64::max);
        let defects_reproduce = self
            .members
            .iter()
            .zip(&defects)
            .all(|(t, &d)| (t.defect() - d).abs() <= DEFECT_AGREEMENT_TOL);
        let max_unitarity_residual = self.members.iter().map(UnitaryTuple::unitarity_residual).fold(0.0, f64::max);
        let all_in_s_epsilon = defects.iter().all(|&d| d <= self.epsilon);
        let separated = max_off <= threshold && max_diag_err <= DEFECT_AGREEMENT_TOL;
        let ok = all_in_s_epsilon
            && separated
            && overlaps_reproduce
            && defects_reproduce
            && max_unitarity_residual <= UNITARITY_TOL;
        Ok(FamilyVerification {
            members: self.members.len(),
            max_defect,
            max_off_diagonal_overlap: max_off,
            max_diagonal_error: max_diag_err,
            max_unitarity_residual,
            all_in_s_epsilon,
            separated,
            overlaps_reproduce,
            defects_reproduce,
            ok,
        })
    }
}
