//! Separated sign sets, half-size antichains and spherical codes.
//!
//! These are the combinatorial inputs of the lower-bound constructions: a
//! family of sign vectors with small pairwise correlations, and the family
//! of half-size subsets of it, any two of which are incomparable.

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Largest dimension accepted for the exhaustive 2ⁿ scan.
pub const EXHAUSTIVE_MAX_DIM: usize = 25;
/// Largest binomial(K, K/2) enumerated in exhaustive antichain mode.
pub const ANTICHAIN_EXHAUSTIVE_MAX: u128 = 1_000_000;
/// Absolute slack on spherical-code coherence comparisons.
pub const COHERENCE_TOL: f64 = 1e-12;

/// `P{|Σ ωⱼ| > θn} ≤ 2 exp(−θ²n/2)` for uniform signs ωⱼ.
pub fn hoeffding_tail(theta: f64, n: usize) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1], got {theta}")));
    }
    Ok(2.0 * (-theta * theta * n as f64 / 2.0).exp())
}

/// `P{|Σ ωⱼ| > θn}` for uniform signs, as `count / 2ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTail {
    pub n: usize,
    pub theta: f64,
    pub count: u128,
    pub total: u128,
    pub probability: f64,
}

/// Exact tail by summing binomial coefficients over the number of `−1`s.
pub fn exact_sign_tail(n: usize, theta: f64) -> Result<SignTail> {
    if n > 120 {
        return Err(Error::ResourceGuard(format!("exact tail limited to n <= 120, got {n}")));
    }
    let count: u128 = (0..=n as u64)
        .filter(|&k| (n as i64 - 2 * k as i64).unsigned_abs() as f64 > theta * n as f64)
        .map(|k| binomial(n as u64, k))
        .sum();
    let total = 1u128 << n;
    Ok(SignTail { n, theta, count, total, probability: count as f64 / total as f64 })
}

/// Frequency of `|Σ ωⱼ| > θn` over `samples` seeded draws.
pub fn empirical_sign_tail(n: usize, theta: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &["signset", "empirical_tail"], 0));
    let mut hits = 0usize;
    for _ in 0..samples {
        let sum: i64 = (0..n).map(|_| if rng.gen::<bool>() { 1i64 } else { -1 }).sum();
        if sum.unsigned_abs() as f64 > theta * n as f64 {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// How candidates are produced for the greedy sign-set scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SignSetMode {
    /// All 2ⁿ sign vectors in lexicographic order, `+1` before `−1`.
    Exhaustive,
    /// `count` seeded uniform draws.
    Sampled { count: usize },
}

/// A set of sign vectors with pairwise `|⟨s, t⟩| ≤ θn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSet {
    pub n: usize,
    pub theta: f64,
    pub vectors: Vec<Vec<i8>>,
    pub pool_size: u64,
    pub exhaustive: bool,
}

/// Bit-packed sign vector: bit set ⇔ coordinate is −1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Packed(Vec<u64>);

impl Packed {
    fn from_signs(signs: &[i8]) -> Self {
        let mut words = vec![0u64; signs.len().div_ceil(64).max(1)];
        for (j, &s) in signs.iter().enumerate() {
            if s < 0 {
                words[j / 64] |= 1 << (j % 64);
            }
        }
        Packed(words)
    }

    fn inner(&self, other: &Packed, n: usize) -> i64 {
        let disagreements: u32 = self.0.iter().zip(&other.0).map(|(a, b)| (a ^ b).count_ones()).sum();
        n as i64 - 2 * disagreements as i64
    }
}

/// The `index`-th sign vector of dimension `n` in lexicographic order.
pub fn lexicographic_signs(n: usize, index: u64) -> Vec<i8> {
    (0..n)
        .map(|j| {
            let bit = u32::try_from(n - 1 - j).ok().and_then(|sh| index.checked_shr(sh)).unwrap_or(0) & 1;
            if bit == 0 { 1 } else { -1 }
        })
        .collect()
}

/// Exact integer inner product of two sign vectors.
pub fn sign_inner(s: &[i8], t: &[i8]) -> i64 {
    s.iter().zip(t).map(|(&a, &b)| a as i64 * b as i64).sum()
}

fn separated(ip: i64, theta: f64, n: usize) -> bool {
    (ip.abs() as f64) <= theta * n as f64
}

/// Greedy maximal θ-separated subset of the candidate pool.
pub fn greedy_sign_set(n: usize, theta: f64, mode: SignSetMode, seed: u64) -> Result<SignSet> {
    if n == 0 {
        return Err(invalid("dimension n must be positive"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    let mut accepted: Vec<Packed> = Vec::new();
    let mut vectors: Vec<Vec<i8>> = Vec::new();
    let consider = |signs: Vec<i8>, accepted: &mut Vec<Packed>, vectors: &mut Vec<Vec<i8>>| {
        let packed = Packed::from_signs(&signs);
        if accepted.iter().all(|a| a != &packed && separated(a.inner(&packed, n), theta, n)) {
            accepted.push(packed);
            vectors.push(signs);
        }
    };
    let (pool_size, exhaustive) = match mode {
        SignSetMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_DIM {
                return Err(Error::ResourceGuard(format!(
                    "exhaustive scan limited to n <= {EXHAUSTIVE_MAX_DIM}, got {n}"
                )));
            }
            let total = 1u64 << n;
            for idx in 0..total {
                consider(lexicographic_signs(n, idx), &mut accepted, &mut vectors);
            }
            (total, true)
        }
        SignSetMode::Sampled { count } => {
            if count == 0 {
                return Err(invalid("sampled mode needs count >= 1"));
            }
            let mut rng = rng_from_seed(derive_seed(seed, &["signset", "sampled"], 0));
            for _ in 0..count {
                let signs: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                consider(signs, &mut accepted, &mut vectors);
            }
            (count as u64, false)
        }
    };
    let set = SignSet { n, theta, vectors, pool_size, exhaustive };
    if exhaustive {
        let required = set.size_lower_bound();
        if (set.len() as f64) < required {
            return Err(Error::ConstructionFailed(format!(
                "exhaustive sign set has {} members, below (1/2)exp(theta^2 n/2) = {required}",
                set.len()
            )));
        }
    }
    Ok(set)
}

impl SignSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `(1/2) exp(θ²n/2)`, the guaranteed size of a maximal set.
    pub fn size_lower_bound(&self) -> f64 {
        0.5 * (self.theta * self.theta * self.n as f64 / 2.0).exp()
    }

    /// Largest `|⟨s, t⟩|` over distinct members (0 when fewer than two).
    pub fn max_correlation(&self) -> i64 {
        let mut worst = 0;
        for (i, s) in self.vectors.iter().enumerate() {
            for t in &self.vectors[i + 1..] {
                worst = worst.max(sign_inner(s, t).abs());
            }
        }
        worst
    }

    /// Full pairwise check of the type invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, s) in self.vectors.iter().enumerate() {
            if s.len() != self.n || s.iter().any(|&x| x != 1 && x != -1) {
                return Err(Error::Validation(format!("member {i} is not a sign vector of length {}", self.n)));
            }
            if !seen.insert(s.clone()) {
                return Err(Error::Validation(format!("member {i} is a duplicate")));
            }
        }
        for (i, s) in self.vectors.iter().enumerate() {
            for (j, t) in self.vectors.iter().enumerate().skip(i + 1) {
                let ip = sign_inner(s, t);
                if !separated(ip, self.theta, self.n) {
                    return Err(Error::Validation(format!("|<s{i}, s{j}>| = {} exceeds theta*n", ip.abs())));
                }
            }
        }
        Ok(())
    }

    /// Scans all 2ⁿ sign vectors and returns the first one that could still
    /// be added, if any. `None` certifies maximality.
    pub fn find_addable(&self) -> Result<Option<Vec<i8>>> {
        if self.n > EXHAUSTIVE_MAX_DIM {
            return Err(Error::ResourceGuard(format!("maximality scan limited to n <= {EXHAUSTIVE_MAX_DIM}")));
        }
        let members: Vec<Packed> = self.vectors.iter().map(|v| Packed::from_signs(v)).collect();
        let present: HashSet<&Packed> = members.iter().collect();
        for idx in 0..(1u64 << self.n) {
            let cand = lexicographic_signs(self.n, idx);
            let packed = Packed::from_signs(&cand);
            if present.contains(&packed) {
                continue;
            }
            if members.iter().all(|m| separated(m.inner(&packed, self.n), self.theta, self.n)) {
                return Ok(Some(cand));
            }
        }
        Ok(None)
    }

    /// Members as real vectors.
    pub fn real_vectors(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect()
    }
}

/// Enumeration mode for half-size subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AntichainMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

/// A family of `K/2`-element subsets of `{0, …, K−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antichain {
    pub ground_size: usize,
    pub subsets: Vec<Vec<usize>>,
    pub mode: AntichainMode,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc = C(n, i); (i+1)/g divides n-i because C(n, i+1) is integral
        let g = gcd(acc, i + 1);
        match (acc / g).checked_mul((n as u128 - i) / ((i + 1) / g)) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All (or a seeded sample of) half-size subsets of a `K`-set.
pub fn antichain_half_subsets(k: usize, mode: AntichainMode) -> Result<Antichain> {
    if k < 2 {
        return Err(invalid(format!("ground size must be >= 2, got {k}")));
    }
    if k % 2 == 1 {
        return Err(invalid(format!(
            "ground size {k} is odd; drop one element (e.g. the last) and use {} instead",
            k - 1
        )));
    }
    let half = k / 2;
    let total = binomial(k as u64, half as u64);
    let subsets = match mode {
        AntichainMode::Exhaustive => {
            if total > ANTICHAIN_EXHAUSTIVE_MAX {
                return Err(Error::ResourceGuard(format!(
                    "binomial({k}, {half}) = {total} exceeds {ANTICHAIN_EXHAUSTIVE_MAX}"
                )));
            }
            let all: Vec<Vec<usize>> = (0..k).combinations(half).collect();
            if k >= 8 && (all.len() as f64) < (k as f64 / 2.0).exp() {
                return Err(Error::ConstructionFailed(format!(
                    "antichain of size {} below exp(K/2)",
                    all.len()
                )));
            }
            all
        }
        AntichainMode::Sampled { count, seed } => {
            let wanted = (count as u128).min(total) as usize;
            let mut rng = rng_from_seed(derive_seed(seed, &["signset", "antichain"], 0));
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(wanted);
            while out.len() < wanted {
                let mut s = index::sample(&mut rng, k, half).into_vec();
                s.sort_unstable();
                if seen.insert(s.clone()) {
                    out.push(s);
                }
            }
            out
        }
    };
    Ok(Antichain { ground_size: k, subsets, mode })
}

/// Antichain over the members of `set`; an odd member count drops the last
/// member first.
pub fn antichain_for(set: &SignSet, mode: AntichainMode) -> Result<Antichain> {
    let k = set.len() - set.len() % 2;
    antichain_half_subsets(k, mode)
}

impl Antichain {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// binomial(K, K/2), regardless of how many subsets are listed.
    pub fn total_count(&self) -> u128 {
        binomial(self.ground_size as u64, self.ground_size as u64 / 2)
    }

    /// Checks cardinalities and pairwise incomparability of the listed sets.
    pub fn validate(&self) -> Result<()> {
        let half = self.ground_size / 2;
        let as_sets: Vec<HashSet<usize>> = self.subsets.iter().map(|s| s.iter().copied().collect()).collect();
        for (i, s) in as_sets.iter().enumerate() {
            if s.len() != half || self.subsets[i].len() != half {
                return Err(Error::Validation(format!("subset {i} does not have {half} distinct elements")));
            }
            if s.iter().any(|&e| e >= self.ground_size) {
                return Err(Error::Validation(format!("subset {i} leaves the ground set")));
            }
        }
        for i in 0..as_sets.len() {
            for j in i + 1..as_sets.len() {
                if as_sets[i].is_subset(&as_sets[j]) || as_sets[j].is_subset(&as_sets[i]) {
                    return Err(Error::Validation(format!("subsets {i} and {j} are comparable")));
                }
            }
        }
        Ok(())
    }
}

/// Unit vectors with pairwise `|⟨s, t⟩| ≤ θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalCode {
    pub n: usize,
    pub theta: f64,
    pub points: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy spherical code from `samples` uniform unit vectors.
pub fn greedy_spherical_code(n: usize, theta: f64, samples: usize, seed: u64) -> Result<SphericalCode> {
    if n == 0 {
        return Err(invalid("dimension n must be positive"));
    }
    if samples == 0 {
        return Err(invalid("samples must be >= 1"));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &["signset", "spherical"], 0));
    let mut points: Vec<Vec<f64>> = Vec::new();
    for _ in 0..samples {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        if points.iter().all(|p| dot(p, &v).abs() <= theta + COHERENCE_TOL) {
            points.push(v);
        }
    }
    Ok(SphericalCode { n, theta, points })
}

impl SphericalCode {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if (dot(p, p).sqrt() - 1.0).abs() > COHERENCE_TOL {
                return Err(Error::Validation(format!("point {i} is not a unit vector")));
            }
            for (j, q) in self.points.iter().enumerate().skip(i + 1) {
                if dot(p, q).abs() > self.theta + COHERENCE_TOL {
                    return Err(Error::Validation(format!("points {i} and {j} violate coherence")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_tail(1.0, 0).unwrap(), 2.0);
        assert!((hoeffding_tail(0.5, 100).unwrap() - 2.0 * (-12.5f64).exp()).abs() < 1e-18);
        assert!(hoeffding_tail(0.0, 3).is_err());
        assert!(hoeffding_tail(1.5, 3).is_err());
    }

    #[test]
    fn exact_tail_small_cases() {
        // n = 4, θ = 0.5: |Σ| = 4 only, two of sixteen
        let t = exact_sign_tail(4, 0.5).unwrap();
        assert_eq!((t.count, t.total), (2, 16));
        let f = empirical_sign_tail(4, 0.5, 20_000, 1).unwrap();
        assert!((f - 0.125).abs() < 0.01);
    }

    #[test]
    fn lexicographic_order_puts_plus_first() {
        assert_eq!(lexicographic_signs(2, 0), vec![1, 1]);
        assert_eq!(lexicographic_signs(2, 1), vec![1, -1]);
        assert_eq!(lexicographic_signs(2, 2), vec![-1, 1]);
    }

    #[test]
    fn tiny_exhaustive_sets() {
        let t = greedy_sign_set(2, 0.4, SignSetMode::Exhaustive, 0).unwrap();
        assert_eq!(t.vectors, vec![vec![1, 1], vec![1, -1]]);
        assert!(t.find_addable().unwrap().is_none());

        let t = greedy_sign_set(1, 0.5, SignSetMode::Exhaustive, 0).unwrap();
        assert_eq!(t.vectors, vec![vec![1]]);
    }

    #[test]
    fn exhaustive_guard() {
        assert!(matches!(
            greedy_sign_set(26, 0.5, SignSetMode::Exhaustive, 0),
            Err(Error::ResourceGuard(_))
        ));
        assert!(greedy_sign_set(4, 0.5, SignSetMode::Sampled { count: 0 }, 0).is_err());
    }

    #[test]
    fn sampled_mode_is_seeded_and_valid() {
        let a = greedy_sign_set(40, 0.5, SignSetMode::Sampled { count: 300 }, 9).unwrap();
        let b = greedy_sign_set(40, 0.5, SignSetMode::Sampled { count: 300 }, 9).unwrap();
        assert_eq!(a, b);
        assert!(!a.exhaustive);
        assert_eq!(a.pool_size, 300);
        a.validate().unwrap();
        assert!(a.max_correlation() <= 20);
    }

    #[test]
    fn packed_inner_matches_plain() {
        let s = lexicographic_signs(70, 0x1234_5678_9abc);
        let mut t = lexicographic_signs(70, 0x0fed_cba9_8765);
        t[69] = -t[69];
        assert_eq!(Packed::from_signs(&s).inner(&Packed::from_signs(&t), 70), sign_inner(&s, &t));
    }

    #[test]
    fn antichain_sizes() {
        let a = antichain_half_subsets(2, AntichainMode::Exhaustive).unwrap();
        assert_eq!(a.subsets, vec![vec![0], vec![1]]);
        assert_eq!(antichain_half_subsets(4, AntichainMode::Exhaustive).unwrap().len(), 6);
        let a10 = antichain_half_subsets(10, AntichainMode::Exhaustive).unwrap();
        assert_eq!(a10.len(), 252);
        assert!(252.0 >= 5f64.exp());
        a10.validate().unwrap();
    }

    #[test]
    fn odd_ground_size_is_rejected_with_guidance() {
        let err = antichain_half_subsets(7, AntichainMode::Exhaustive).unwrap_err().to_string();
        assert!(err.contains("drop one element"), "{err}");
    }

    #[test]
    fn sampled_antichain_is_distinct_and_incomparable() {
        let a = antichain_half_subsets(30, AntichainMode::Sampled { count: 200, seed: 3 }).unwrap();
        assert_eq!(a.len(), 200);
        a.validate().unwrap();
        // asking for more than exist caps at the total
        let small = antichain_half_subsets(4, AntichainMode::Sampled { count: 50, seed: 3 }).unwrap();
        assert_eq!(small.len(), 6);
    }

    #[test]
    fn antichain_for_odd_signset_drops_last() {
        let set = SignSet { n: 1, theta: 0.5, vectors: vec![vec![1]; 5], pool_size: 0, exhaustive: false };
        assert_eq!(antichain_for(&set, AntichainMode::Exhaustive).unwrap().ground_size, 4);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(40, 20), 137_846_528_820);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(200, 100), u128::MAX);
    }

    #[test]
    fn binomials_match_pascal_up_to_saturation() {
        let mut row = vec![1u128];
        for n in 1..=140u64 {
            let mut next = vec![1u128; n as usize + 1];
            for k in 1..n as usize {
                next[k] = row[k - 1].saturating_add(row[k]);
            }
            row = next;
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(binomial(n, k as u64), v, "C({n}, {k})");
            }
        }
    }

    #[test]
    fn orthogonal_code_in_dimension_three() {
        let code = greedy_spherical_code(3, 1e-9, 2000, 1).unwrap();
        assert!(code.len() <= 3);
        code.validate().unwrap();
    }
}
