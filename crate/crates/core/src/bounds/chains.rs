use serde::{Deserialize, Serialize};

use super::loglevel::LogLevelNumber;
use crate::error::{invalid, Result};

/// Largest `n` the threshold searches will look at.
pub const N0_SEARCH_LIMIT: u64 = 1 << 40;
/// Default stand-in for the concentration constant.
pub const DEFAULT_C_ASSUMED: f64 = 0.5;
/// Default constant of the unitary net size `(γ/ξ)^{2N²}`.
pub const DEFAULT_GAMMA_NET: f64 = 6.0;

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

/// `(1 + 4n/η)^{mult · n²}` with `1 + η = 1/ρ`, the count of members within
/// distance `r` of a fixed one in the packing argument. `ρ` is `rθ` for
/// normed spaces and `r(1−δ)` for operator spaces.
pub fn neighbour_count(n: u64, rho: f64, mult: f64) -> Result<CountingBound> {
    need(n >= 1, "n must be positive")?;
    need(rho > 0.0 && rho.is_finite(), "r·θ must be positive")?;
    if rho >= 1.0 {
        return Err(invalid(format!("need r·θ < 1 so that 1 + η = 1/(r·θ) defines η > 0, got {rho}")));
    }
    let eta = 1.0 / rho - 1.0;
    let base = 1.0 + 4.0 * n as f64 / eta;
    let exponent = mult * (n as f64) * (n as f64);
    Ok(CountingBound { eta, base, exponent, bound: LogLevelNumber::exp_of(exponent * base.ln()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingBound {
    pub eta: f64,
    pub base: f64,
    pub exponent: f64,
    /// `base^exponent`.
    pub bound: LogLevelNumber,
}

/// `|{y : d_N(F_x, F_y) < r}| ≤ (1+4n/η)^{2n²}` with `1+η = 1/(r(1−δ))`.
pub fn os_claim_counter(n: u64, r: f64, delta: f64) -> Result<CountingBound> {
    need((0.0..1.0).contains(&delta), "delta must lie in [0, 1)")?;
    need(r > 0.0, "r must be positive")?;
    neighbour_count(n, r * (1.0 - delta), 2.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerChain {
    pub n: u64,
    pub theta: f64,
    pub r: f64,
    pub eta: f64,
    /// `K = ½ e^{θ²n/2}`.
    pub k: LogLevelNumber,
    /// `log |𝓐| ≥ K/2`.
    pub log_antichain: LogLevelNumber,
    /// `4n³/η`.
    pub penalty: LogLevelNumber,
    /// `log |𝓧| ≥ K/2 − 4n³/η`.
    pub log_packing: LogLevelNumber,
    /// `|𝓧| ≥ exp(K/2 − 4n³/η)`.
    pub packing_lower: LogLevelNumber,
    /// `e^{θ²n/4}`.
    pub target: LogLevelNumber,
    pub passes: bool,
    pub n0_hint: u64,
}

fn lower_parts(n: u64, theta: f64, r: f64) -> Result<(f64, LogLevelNumber, LogLevelNumber, LogLevelNumber, LogLevelNumber, LogLevelNumber)> {
    let nf = n as f64;
    let eta = 1.0 / (r * theta) - 1.0;
    let k = LogLevelNumber::exp_of(theta * theta * nf / 2.0 - 2f64.ln());
    let half_k = LogLevelNumber::exp_of(theta * theta * nf / 2.0 - 2.0 * 2f64.ln());
    let penalty = LogLevelNumber::from_f64(4.0 / eta).mul(&LogLevelNumber::from_f64(nf).pow(3.0)?)?;
    let log_packing = half_k.sub(&penalty)?;
    let target = LogLevelNumber::exp_of(theta * theta * nf / 4.0);
    Ok((eta, k, half_k, penalty, log_packing, target))
}

fn lower_passes(n: u64, theta: f64, r: f64) -> Result<bool> {
    let (_, _, _, _, log_packing, target) = lower_parts(n, theta, r)?;
    Ok(log_packing >= target)
}

/// Lower-bound chain for the packing of `E_x` spaces: antichain size minus
/// the neighbour count, compared with `exp(e^{θ²n/4})`.
pub fn lower_chain(n: u64, theta: f64, r: f64) -> Result<LowerChain> {
    need(n >= 1, "n must be positive")?;
    need(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)")?;
    need(r > 1.0, "r must exceed 1")?;
    if r * theta >= 1.0 {
        return Err(invalid(format!("need r < 1/theta = {}, got r = {r}", 1.0 / theta)));
    }
    let (eta, k, log_antichain, penalty, log_packing, target) = lower_parts(n, theta, r)?;
    let packing_lower = if log_packing.is_positive() { log_packing.exp()? } else { LogLevelNumber::exp_of(log_packing.value()) };
    Ok(LowerChain {
        n,
        theta,
        r,
        eta,
        k,
        log_antichain,
        penalty,
        passes: log_packing >= target,
        log_packing,
        packing_lower,
        target,
        n0_hint: lower_chain_threshold(theta, r)?,
    })
}

/// Smallest `n` from which the chain passes: doubling to bracket, binary
/// search inside, then a scan confirming no smaller `n` passes.
pub fn lower_chain_threshold(theta: f64, r: f64) -> Result<u64> {
    let mut hi = 1u64;
    while !lower_passes(hi, theta, r)? {
        hi *= 2;
        if hi > N0_SEARCH_LIMIT {
            return Err(invalid("threshold search exceeded n = 2^40"));
        }
    }
    let mut lo = hi / 2;
    // invariant: passes(hi), lo == 0 or !passes(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lower_passes(mid, theta, r)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi <= 1 << 20 {
        for m in 1..hi {
            if lower_passes(m, theta, r)? {
                return Ok(m);
            }
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiminfRoutes {
    /// `1/(2r²)`, through packing at separation `r²`.
    pub closed_form: f64,
    /// `θ²/4` at `θ = 1/r`, through the lower chain's target.
    pub chain_target: f64,
    /// `θ²/2` at `θ = 1/r`; equals `closed_form`.
    pub chain_growth: f64,
}

/// `1/(2r²)`.
pub fn liminf_constant(r: f64) -> Result<f64> {
    need(r >= 1.0 && r.is_finite(), "r must be at least 1")?;
    Ok(1.0 / (2.0 * r * r))
}

pub fn liminf_routes(r: f64) -> Result<LiminfRoutes> {
    let closed_form = liminf_constant(r)?;
    let theta = 1.0 / r;
    Ok(LiminfRoutes { closed_form, chain_target: theta * theta / 4.0, chain_growth: theta * theta / 2.0 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperChain {
    pub n: u64,
    pub epsilon: f64,
    /// `m = ⌊(1+2/ε)ⁿ⌋` (the continuous bound when it does not fit a double).
    pub m: LogLevelNumber,
    /// `log N ≤ n·m·log(3n/ε)`.
    pub log_covering: LogLevelNumber,
    /// `N ≤ exp(n·m·log(3n/ε))`.
    pub covering: LogLevelNumber,
}

/// Covering-number upper bound `(3n/ε)^{nm}` with `m = ⌊(1+2/ε)ⁿ⌋`.
pub fn upper_chain(n: u64, epsilon: f64) -> Result<UpperChain> {
    need(n >= 1, "n must be positive")?;
    need(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)")?;
    let nf = n as f64;
    let ln_m = nf * (1.0 + 2.0 / epsilon).ln();
    let m = if ln_m < 700.0 {
        LogLevelNumber::from_f64((1.0 + 2.0 / epsilon).powf(nf).floor())
    } else {
        LogLevelNumber::exp_of(ln_m)
    };
    let log_covering = LogLevelNumber::from_f64(nf * (3.0 * nf / epsilon).ln()).mul(&m)?;
    Ok(UpperChain { n, epsilon, m, log_covering, covering: log_covering.exp()? })
}

/// `(ε, ε′, ξ)` with `3ε′^{1/3} = (1−δ)/2`, `2ε = (1−δ)/2`, `ξ = ε′/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsChain {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub xi: f64,
    /// `|1 − δ − 3ε′^{1/3} − 2ε|`.
    pub identity_residual: f64,
}

pub fn eps_chain(delta: f64) -> Result<EpsChain> {
    need(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)")?;
    let half = (1.0 - delta) / 2.0;
    let epsilon_prime = (half / 3.0).powi(3);
    let epsilon = half / 2.0;
    let residual = (1.0 - delta - 3.0 * epsilon_prime.cbrt() - 2.0 * epsilon).abs();
    if residual > 1e-12 {
        return Err(invalid(format!("epsilon chain identity off by {residual}")));
    }
    Ok(EpsChain { epsilon, epsilon_prime, xi: epsilon_prime / 4.0, identity_residual: residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureChain {
    pub n: u64,
    pub big_n: u64,
    pub delta: f64,
    pub eps: EpsChain,
    pub gamma: f64,
    pub c_assumed: f64,
    /// `4N² log(4γ/ε′)`.
    pub log_net_factor: f64,
    /// `c (ε′/2)² N² n`.
    pub concentration_exponent: f64,
    /// `(4γ/ε′)^{4N²} exp(−c(ε′/2)²N²n)`.
    pub bound: LogLevelNumber,
    /// `½ c (ε′/2)²`.
    pub c_delta: f64,
    /// Smallest `n` with `(4γ/ε′)⁴ ≤ e^{c_δ n}`.
    pub n_delta_hint: u64,
    /// Whether `bound ≤ exp(−c_δ n N²)`.
    pub below_rate: bool,
}

/// Measure of the set of tuples too close to a fixed one, from the net
/// count times the concentration tail.
pub fn measure_chain(n: u64, big_n: u64, delta: f64, c_assumed: f64, gamma: f64) -> Result<MeasureChain> {
    need(n >= 1, "n must be positive")?;
    need(big_n >= 1, "N must be positive")?;
    need(c_assumed > 0.0 && c_assumed.is_finite(), "c_assumed must be positive")?;
    need(gamma > 0.0 && gamma.is_finite(), "gamma must be positive")?;
    let eps = eps_chain(delta)?;
    let nn = (big_n * big_n) as f64;
    let l = (4.0 * gamma / eps.epsilon_prime).ln();
    let log_net_factor = 4.0 * nn * l;
    let concentration_exponent = c_assumed * (eps.epsilon_prime / 2.0).powi(2) * nn * n as f64;
    let c_delta = 0.5 * c_assumed * (eps.epsilon_prime / 2.0).powi(2);
    let n_delta_hint = (4.0 * l / c_delta).ceil().max(1.0) as u64;
    let log_bound = log_net_factor - concentration_exponent;
    Ok(MeasureChain {
        n,
        big_n,
        delta,
        eps,
        gamma,
        c_assumed,
        log_net_factor,
        concentration_exponent,
        bound: LogLevelNumber::exp_of(log_bound),
        c_delta,
        n_delta_hint,
        below_rate: log_bound <= -c_delta * n as f64 * nn,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HhIteration {
    pub n: u64,
    pub big_n: u64,
    pub r_requested: f64,
    /// `2^{k+1}`, the power of two nearest `r_requested`.
    pub r: f64,
    pub k: u32,
    /// `2ᵏ exp(4nN² 2⁻ᵏ)`.
    pub bound: LogLevelNumber,
    /// Whether `n ≥ (r log r)/4`.
    pub condition_holds: bool,
    /// `exp(8nN²/2ᵏ)`, reported when the condition holds.
    pub headline: Option<LogLevelNumber>,
}

/// Iterated doubling bound `m(n, N, 2^{k+1}) ≤ 2ᵏ exp(4nN² 2⁻ᵏ)`.
pub fn hh_iteration(n: u64, big_n: u64, r: f64) -> Result<HhIteration> {
    need(n >= 1 && big_n >= 1, "n and N must be positive")?;
    need(r >= 2.0 && r.is_finite(), "r must be at least 2")?;
    let k = (r.log2().round() as u32).max(1) - 1;
    let rr = 2f64.powi(k as i32 + 1);
    let two_k = 2f64.powi(k as i32);
    let nn = (n * big_n * big_n) as f64;
    let bound = LogLevelNumber::exp_of(k as f64 * 2f64.ln() + 4.0 * nn / two_k);
    let condition_holds = n as f64 >= rr * rr.ln() / 4.0;
    let headline = condition_holds.then(|| LogLevelNumber::exp_of(8.0 * nn / two_k));
    Ok(HhIteration { n, big_n, r_requested: r, r: rr, k, bound, condition_holds, headline })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphericalVariant {
    pub n: u64,
    pub theta: f64,
    pub k_theta: f64,
    pub gamma: f64,
    /// `γ 2^K K^{−1/2} exp(−4n²/θ²)`.
    pub bound: LogLevelNumber,
    /// `4n²/θ²`.
    pub threshold: f64,
    /// Whether `K > 4n²/θ²`.
    pub significant: bool,
}

/// Packing bound from a spherical code of size `K_θ`.
pub fn spherical_variant_bound(n: u64, theta: f64, k_theta: f64, gamma: f64) -> Result<SphericalVariant> {
    need(n >= 1, "n must be positive")?;
    need(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)")?;
    need(k_theta >= 2.0 && k_theta.is_finite(), "K_theta must be at least 2")?;
    need(gamma > 0.0, "gamma must be positive")?;
    let threshold = 4.0 * (n * n) as f64 / (theta * theta);
    let ln = gamma.ln() + k_theta * 2f64.ln() - 0.5 * k_theta.ln() - threshold;
    Ok(SphericalVariant {
        n,
        theta,
        k_theta,
        gamma,
        bound: LogLevelNumber::exp_of(ln),
        threshold,
        significant: k_theta > threshold,
    })
}

/// `√(2/π)`, the constant in the central binomial asymptotics.
pub fn default_spherical_gamma() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}
