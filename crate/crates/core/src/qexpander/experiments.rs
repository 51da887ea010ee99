use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tuple::{haar_matrices, haar_tuple, overlap_norm, UnitaryTuple};
use crate::bounds::{eps_chain, LogLevelNumber};
use crate::error::{check_dim, invalid, Result};
use crate::linalg::{CMat, C64};
use crate::rng::derive_seed;

/// Constants `c` of the reference tails `exp(−c s²N²/n)`.
pub const TAIL_REFERENCE_CONSTANTS: [f64; 3] = [0.25, 0.5, 1.0];
/// Envelope asserted for `E‖Σ uⱼ⊗ūⱼ(1−P)‖ / √n`.
pub const DEFECT_RATIO_ENVELOPE: f64 = 3.0;

fn sample_seed(seed: u64, op: &str, i: usize) -> u64 {
    derive_seed(seed, &["qexpander", op], i as u64)
}

/// One Monte-Carlo sample, kept for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTail {
    pub c: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTail {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub s: f64,
    pub samples: usize,
    pub exceedances: usize,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub standard_error: f64,
    /// Gaussian tail with the exact variance `n/(2N²)`.
    pub gaussian_prediction: f64,
    pub reference: Vec<ReferenceTail>,
    /// Largest `c` with `frequency ≤ exp(−c s²N²/n)`, when the frequency is
    /// positive.
    pub fitted_c: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

/// Frequency of `Re(N⁻¹ tr Σ vⱼ) > s` over Haar tuples.
pub fn trace_tail_experiment(n: usize, big_n: usize, s: f64, samples: usize, seed: u64) -> Result<TraceTail> {
    if samples < 100 {
        return Err(invalid("trace tail needs at least 100 samples"));
    }
    let rows: Vec<SampleRow> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let sd = sample_seed(seed, "trace_tail", i);
            let tr: C64 = haar_matrices(n, big_n, sd)?.iter().map(CMat::trace).sum();
            Ok(SampleRow { index: i, seed: sd, n, big_n, value: tr.re / big_n as f64 })
        })
        .collect::<Result<_>>()?;
    let exceedances = rows.iter().filter(|r| r.value > s).count();
    let frequency = exceedances as f64 / samples as f64;
    let sigma = (n as f64 / (2.0 * (big_n * big_n) as f64)).sqrt();
    let gaussian_prediction = 0.5 * libm::erfc(s / (sigma * std::f64::consts::SQRT_2));
    let scale = s * s * (big_n * big_n) as f64 / n as f64;
    let reference = TAIL_REFERENCE_CONSTANTS.iter().map(|&c| ReferenceTail { c, bound: (-c * scale).exp() }).collect();
    let fitted_c = (frequency > 0.0 && scale > 0.0).then(|| -frequency.ln() / scale);
    Ok(TraceTail {
        n,
        big_n,
        s,
        samples,
        exceedances,
        frequency,
        standard_error: (frequency * (1.0 - frequency) / samples as f64).sqrt(),
        gaussian_prediction,
        reference,
        fitted_c,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub n: usize,
    /// Mean of `‖Σ uⱼ⊗ūⱼ(1−P)‖ = n·defect`.
    pub mean_norm: f64,
    pub ratio: f64,
    pub max_defect: f64,
    /// Fraction of samples with defect `≤ ε`.
    pub empirical_membership: f64,
    /// `1 − (C_emp/ε) n^{−1/2}`.
    pub membership_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageDefect {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub samples: usize,
    pub epsilon: f64,
    pub rows: Vec<DefectRow>,
    /// Largest ratio over the table, used as the fitted constant.
    pub c_emp: f64,
    pub within_envelope: bool,
    /// Reported only.
    pub non_increasing: bool,
    /// Empirical membership dominates its Markov lower bound for every `n`.
    pub membership_bound_holds: bool,
    #[serde(skip)]
    pub samples_detail: Vec<SampleRow>,
}

/// Empirical `E‖Σ uⱼ⊗ūⱼ(1−P)‖ / √n` per `n`, with the `S_ε` membership
/// frequency at `epsilon` against its Markov lower bound.
pub fn average_defect_constant(
    n_list: &[usize],
    big_n: usize,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<AverageDefect> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let mut detail = Vec::new();
    let mut rows = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        let draws: Vec<SampleRow> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let sd = sample_seed(seed, "average_defect", k * samples + i);
                let t = haar_tuple(n, big_n, sd)?;
                Ok(SampleRow { index: i, seed: sd, n, big_n, value: t.defect() })
            })
            .collect::<Result<_>>()?;
        let nf = n as f64;
        let mean_norm = draws.iter().map(|r| r.value * nf).sum::<f64>() / samples as f64;
        let inside = draws.iter().filter(|r| r.value <= epsilon).count();
        rows.push(DefectRow {
            n,
            mean_norm,
            ratio: mean_norm / nf.sqrt(),
            max_defect: draws.iter().map(|r| r.value).fold(0.0, f64::max),
            empirical_membership: inside as f64 / samples as f64,
            membership_lower_bound: 0.0,
        });
        detail.extend(draws);
    }
    let c_emp = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    for r in &mut rows {
        r.membership_lower_bound = 1.0 - c_emp / epsilon / (r.n as f64).sqrt();
    }
    Ok(AverageDefect {
        big_n,
        samples,
        epsilon,
        within_envelope: rows.iter().all(|r| r.ratio <= DEFECT_RATIO_ENVELOPE),
        non_increasing: rows.windows(2).all(|w| w[1].ratio <= w[0].ratio),
        membership_bound_holds: rows.iter().all(|r| r.empirical_membership >= r.membership_lower_bound),
        c_emp,
        rows,
        samples_detail: detail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCounterexample {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub delta: f64,
    pub samples: usize,
    pub exceedances: usize,
    pub frequency: f64,
    /// `exp(−nN)`.
    pub reference_n_big_n: f64,
    /// `exp(−nN²)`.
    pub reference_n_big_n_sq: f64,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

/// Frequency of `‖Σ vⱼ‖ > (1−δ)n` for Haar `v`, the overlap of `v` with
/// the constant identity tuple.
pub fn identity_counterexample(
    n: usize,
    big_n: usize,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<IdentityCounterexample> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid("delta must lie in [0, 1]"));
    }
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let threshold = (1.0 - delta) * n as f64;
    let rows: Vec<SampleRow> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let sd = sample_seed(seed, "identity_counterexample", i);
            let v = haar_matrices(n, big_n, sd)?;
            Ok(SampleRow { index: i, seed: sd, n, big_n, value: sum_norm(&v) })
        })
        .collect::<Result<_>>()?;
    // strict inequality, read above rounding of the SVD
    let exceedances = rows.iter().filter(|r| r.value > threshold + 1e-12 * n as f64).count();
    Ok(IdentityCounterexample {
        n,
        big_n,
        delta,
        samples,
        exceedances,
        frequency: exceedances as f64 / samples as f64,
        reference_n_big_n: (-((n * big_n) as f64)).exp(),
        reference_n_big_n_sq: (-((n * big_n * big_n) as f64)).exp(),
        rows,
    })
}

/// `‖Σ vⱼ‖` by dense SVD.
pub fn sum_norm(v: &[CMat]) -> f64 {
    let nn = v.first().map_or(0, CMat::nrows);
    let s = v.iter().fold(CMat::zeros(nn, nn), |acc, m| acc + m);
    s.svd(false, false).singular_values.max()
}

/// `(γ/ξ)^{2N²}`, the size of a `ξ`-net of `U(N)` in operator norm.
pub fn unitary_net_bound(big_n: usize, xi: f64, gamma: f64) -> Result<LogLevelNumber> {
    if !(xi > 0.0) || !(gamma > xi) {
        return Err(invalid("need 0 < xi < gamma"));
    }
    Ok(LogLevelNumber::exp_of(2.0 * (big_n * big_n) as f64 * (gamma / xi).ln()))
}

/// Lower bound for `sup_{U,V ∈ U(N)} Re N⁻¹ tr(Σ uⱼ U vⱼ* V*)` and the
/// unitaries attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub value: f64,
    pub u: CMat,
    pub v: CMat,
    pub sweeps: usize,
}

fn polar_factor(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

fn alignment_value(u: &UnitaryTuple, v: &UnitaryTuple, a: &CMat, b: &CMat) -> f64 {
    let nn = u.big_n();
    let sum = u.matrices().iter().zip(v.matrices()).fold(CMat::zeros(nn, nn), |acc, (x, y)| acc + x * a * y.adjoint());
    (sum * b.adjoint()).trace().re / nn as f64
}

/// Alternating maximization over `U` and `V`: each step replaces one of
/// them by the polar factor that maximizes the trace with the other fixed,
/// so the value never decreases.
pub fn alignment_lower_bound(u: &UnitaryTuple, v: &UnitaryTuple, max_sweeps: usize) -> Result<Alignment> {
    check_dim(u.n(), v.n())?;
    check_dim(u.big_n(), v.big_n())?;
    let nn = u.big_n();
    let mut a = CMat::identity(nn, nn);
    let mut b = CMat::identity(nn, nn);
    let mut value = alignment_value(u, v, &a, &b);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        // Re tr(V* C) is maximal at V = polar(C), C = Σ uⱼ U vⱼ*
        let c = u.matrices().iter().zip(v.matrices()).fold(CMat::zeros(nn, nn), |acc, (x, y)| acc + x * &a * y.adjoint());
        b = polar_factor(&c);
        // Re tr(U B) with B = Σ vⱼ* V* uⱼ is maximal at U = polar(B)*
        let bm = u.matrices().iter().zip(v.matrices()).fold(CMat::zeros(nn, nn), |acc, (x, y)| acc + y.adjoint() * b.adjoint() * x);
        a = polar_factor(&bm).adjoint();
        let next = alignment_value(u, v, &a, &b);
        let gain = next - value;
        value = value.max(next);
        if gain <= 1e-13 * value.abs().max(1.0) {
            break;
        }
    }
    Ok(Alignment { value, u: a, v: b, sweeps })
}

/// The inclusion of the cone `C_u(δ) = {v : ‖Σ uⱼ⊗v̄ⱼ‖ > (1−δ)n}` in the
/// set where the alignment exceeds `ε′n`, checked for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCheck {
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub overlap: f64,
    pub in_cone: bool,
    pub both_in_s_epsilon: bool,
    pub alignment: f64,
    /// Alignment never exceeds the overlap.
    pub dominated_by_overlap: bool,
    /// `in_cone ∧ both_in_s_epsilon ⇒ alignment > ε′n`.
    pub holds: bool,
}

pub fn alignment_check(u: &UnitaryTuple, v: &UnitaryTuple, delta: f64) -> Result<AlignmentCheck> {
    let chain = eps_chain(delta)?;
    let n = u.n() as f64;
    let overlap = overlap_norm(u, v)?;
    let in_cone = overlap > (1.0 - delta) * n;
    let both_in_s_epsilon = u.in_s_epsilon(chain.epsilon) && v.in_s_epsilon(chain.epsilon);
    let alignment = alignment_lower_bound(u, v, 200)?.value;
    Ok(AlignmentCheck {
        delta,
        epsilon: chain.epsilon,
        epsilon_prime: chain.epsilon_prime,
        overlap,
        in_cone,
        both_in_s_epsilon,
        alignment,
        dominated_by_overlap: alignment <= overlap + 1e-9 * n,
        holds: !(in_cone && both_in_s_epsilon) || alignment > chain.epsilon_prime * n,
    })
}
