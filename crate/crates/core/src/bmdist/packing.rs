use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certificate::Certificate;
use super::distance::bm_upper;
use crate::bounds::{neighbour_count, CountingBound};
use crate::error::{invalid, Result};
use crate::rng::derive_seed;
use crate::spaces::PolytopalSpace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rejection {
    pub candidate: usize,
    /// Accepted member it was proved close to.
    pub against: usize,
    /// Certified `d(candidate, against) ≤ upper < r`.
    pub upper: f64,
}

/// Best identity witness for an ordered pair of accepted members:
/// `‖Id : E_small → E_large‖ ≥ certificate.implied_ratio`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCertificate {
    pub large: usize,
    pub small: usize,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingReport {
    pub r: f64,
    pub effort: usize,
    pub accepted: Vec<usize>,
    pub rejections: Vec<Rejection>,
    pub pair_certificates: Vec<PairCertificate>,
    /// Smallest `max(ratio(i→j), ratio(j→i))` over accepted pairs.
    pub min_pair_ratio: Option<f64>,
    /// Acceptance only means no closeness proof was found.
    pub acceptance_is_heuristic: bool,
    pub rejection_is_certified: bool,
}

/// Witness with the largest `‖w‖_large / ‖w‖_small` among the functional
/// rows of both spaces, read as vectors.
fn best_identity_witness(large: &PolytopalSpace, small: &PolytopalSpace) -> Result<Certificate> {
    let mut best: Option<Certificate> = None;
    for w in large.functionals().iter().chain(small.functionals()) {
        if w.iter().all(|&v| v == 0.0) {
            continue;
        }
        let c = Certificate::identity(w.clone(), large, small)?;
        if best.as_ref().is_none_or(|b| c.implied_ratio > b.implied_ratio) {
            best = Some(c);
        }
    }
    match best {
        Some(c) => Ok(c),
        None => {
            let mut e = vec![0.0; large.dim()];
            e[0] = 1.0;
            Certificate::identity(e, large, small)
        }
    }
}

/// Greedy `r`-packing: scan `family` in order and reject a candidate only
/// when [`bm_upper`] proves it closer than `r` to an accepted member.
pub fn greedy_packing(family: &[PolytopalSpace], r: f64, effort: usize, seed: u64) -> Result<PackingReport> {
    if !(r > 1.0) {
        return Err(invalid("packing radius r must exceed 1"));
    }
    let mut accepted: Vec<usize> = Vec::new();
    let mut rejections = Vec::new();
    for (c, cand) in family.iter().enumerate() {
        if cand.dim() != family[0].dim() {
            return Err(invalid("family members must share a dimension"));
        }
        let uppers: Vec<Result<f64>> = accepted
            .par_iter()
            .map(|&a| {
                let s = derive_seed(seed, &["bmdist", "greedy_packing"], (c * family.len() + a) as u64);
                bm_upper(cand, &family[a], effort, s).map(|u| u.value)
            })
            .collect();
        let mut close = None;
        for (&a, u) in accepted.iter().zip(uppers) {
            let u = u?;
            if u < r {
                close = Some(Rejection { candidate: c, against: a, upper: u });
                break;
            }
        }
        match close {
            Some(rej) => rejections.push(rej),
            None => accepted.push(c),
        }
    }
    let pairs: Vec<(usize, usize)> =
        accepted.iter().flat_map(|&i| accepted.iter().filter(move |&&j| j != i).map(move |&j| (i, j))).collect();
    let pair_certificates: Vec<PairCertificate> = pairs
        .par_iter()
        .map(|&(i, j)| {
            best_identity_witness(&family[i], &family[j]).map(|certificate| PairCertificate { large: i, small: j, certificate })
        })
        .collect::<Result<_>>()?;
    let mut min_pair_ratio: Option<f64> = None;
    for pc in pair_certificates.iter().filter(|p| p.large < p.small) {
        let back = pair_certificates
            .iter()
            .find(|q| q.large == pc.small && q.small == pc.large)
            .map_or(0.0, |q| q.certificate.implied_ratio);
        let v = pc.certificate.implied_ratio.max(back);
        min_pair_ratio = Some(min_pair_ratio.map_or(v, |m: f64| m.min(v)));
    }
    Ok(PackingReport {
        r,
        effort,
        accepted,
        rejections,
        pair_certificates,
        min_pair_ratio,
        acceptance_is_heuristic: true,
        rejection_is_certified: true,
    })
}

/// `|{y : d(E_x, E_y) < r}| ≤ (1+4n/η)^{n²}` with `1+η = 1/(rθ)`.
pub fn claim_counter(n: u64, r: f64, theta: f64) -> Result<CountingBound> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta must lie in (0, 1)"));
    }
    neighbour_count(n, r * theta, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signset::{antichain_for, greedy_sign_set, AntichainMode, SignSetMode};
    use crate::spaces::make_ex;

    #[test]
    fn singleton_family() {
        let rep = greedy_packing(&[PolytopalSpace::l_inf(2)], 1.5, 4, 0).unwrap();
        assert_eq!(rep.accepted, vec![0]);
        assert!(rep.pair_certificates.is_empty());
    }

    #[test]
    fn permuted_copy_is_rejected() {
        let a = PolytopalSpace::polytopal(2, vec![vec![1.0, 0.0], vec![0.3, 1.0], vec![1.0, -1.0]], "a").unwrap();
        let b = PolytopalSpace::polytopal(2, vec![vec![1.0, -1.0], vec![1.0, 0.0], vec![0.3, 1.0]], "b").unwrap();
        let swapped =
            PolytopalSpace::polytopal(2, vec![vec![0.0, 1.0], vec![1.0, 0.3], vec![-1.0, 1.0]], "swapped").unwrap();
        let rep = greedy_packing(&[a, b, swapped], 1.1, 4, 1).unwrap();
        assert_eq!(rep.accepted, vec![0]);
        assert_eq!(rep.rejections.len(), 2);
        assert!(rep.rejections.iter().all(|r| r.upper < 1.0 + 1e-6));
    }

    #[test]
    fn ex_family_pairs_have_ratio_two() {
        let set = greedy_sign_set(10, 0.5, SignSetMode::Exhaustive, 0).unwrap();
        let ac = antichain_for(&set, AntichainMode::Sampled { count: 6, seed: 3 }).unwrap();
        let family: Vec<PolytopalSpace> = ac.subsets.iter().map(|x| make_ex(&set, x).unwrap()).collect();
        let rep = greedy_packing(&family, 1.5, 1, 2).unwrap();
        assert!(rep.accepted.len() >= 2);
        assert!(rep.min_pair_ratio.unwrap() >= 2.0);
    }

    #[test]
    fn claim_arithmetic() {
        let c = claim_counter(16, 1.5, 0.5).unwrap();
        assert!((c.bound.ln_f64().unwrap() - 256.0 * 193f64.ln()).abs() < 1e-9);
        let near_one = claim_counter(3, 1.0 + 1e-12, 0.5).unwrap();
        assert!((near_one.base - 13.0).abs() < 1e-9);
        assert!(claim_counter(4, 2.0, 0.5).is_err());
    }
}
