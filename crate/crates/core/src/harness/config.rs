use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::from_rows;
use crate::signset::EXHAUSTIVE_MAX_DIM;
use crate::spaces::PolytopalSpace;

/// A named list of experiments sharing one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Report path; defaults to `<out dir>/<name>.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    /// Directory for per-sample CSV tables; none are written when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

/// A normed space named in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceSpec {
    LInf { dim: usize },
    L1 { dim: usize },
    L2 { dim: usize },
    /// Regular polygon with `sides` (even) sides and inradius 1.
    RegularPolygon { sides: usize },
    Polytopal { dim: usize, functionals: Vec<Vec<f64>> },
    /// `a ↦ ‖L a‖₂`.
    Ellipsoidal { matrix: Vec<Vec<f64>> },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<PolytopalSpace> {
        match self {
            SpaceSpec::LInf { dim } => {
                need(*dim >= 1, "dimension must be positive")?;
                Ok(PolytopalSpace::l_inf(*dim))
            }
            SpaceSpec::L1 { dim } => PolytopalSpace::l_1(*dim),
            SpaceSpec::L2 { dim } => {
                need(*dim >= 1, "dimension must be positive")?;
                Ok(PolytopalSpace::l_2(*dim))
            }
            SpaceSpec::RegularPolygon { sides } => {
                need(*sides >= 4 && sides % 2 == 0, "a symmetric polygon needs an even number >= 4 of sides")?;
                let m = sides / 2;
                let fs = (0..m)
                    .map(|k| {
                        let a = k as f64 * PI / m as f64;
                        vec![a.cos(), a.sin()]
                    })
                    .collect();
                PolytopalSpace::polytopal(2, fs, format!("{sides}-gon"))
            }
            SpaceSpec::Polytopal { dim, functionals } => PolytopalSpace::polytopal(*dim, functionals.clone(), "custom"),
            SpaceSpec::Ellipsoidal { matrix } => {
                let l = from_rows(matrix).ok_or_else(|| invalid("ragged ellipsoid matrix"))?;
                PolytopalSpace::ellipsoidal(&l, "ellipsoid")
            }
        }
    }
}

fn default_tol() -> f64 {
    1e-3
}

fn default_effort() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub e: SpaceSpec,
    pub f: SpaceSpec,
    /// Known distance the oracle must reproduce within `tol`.
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Also run the heuristic upper bound with this effort.
    #[serde(default)]
    pub upper_effort: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingParams {
    /// Number of leading `E_x` spaces fed to the greedy packing.
    pub members: usize,
    pub r: f64,
    #[serde(default = "default_effort")]
    pub effort: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub lower_n: u64,
    pub theta: f64,
    pub r: f64,
    pub upper_n: u64,
    pub upper_epsilon: f64,
    pub hh_n: u64,
    pub hh_big_n: u64,
    pub hh_r: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            lower_n: 400,
            theta: 0.5,
            r: 1.9,
            upper_n: 10,
            upper_epsilon: 0.5,
            hh_n: 8,
            hh_big_n: 4,
            hh_r: 2.0,
        }
    }
}

/// One experiment; `kind` selects the variant in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Exact and sampled sign-sum tails against the Hoeffding bound.
    HoeffdingTail { n: usize, theta: f64, samples: usize },
    /// Exhaustive greedy sign set, optionally with a maximality scan.
    SignSet {
        n: usize,
        theta: f64,
        #[serde(default)]
        check_maximality: bool,
    },
    /// Identity certificates between `E_x` spaces over sampled antichain
    /// pairs, with optional greedy packing and counting claim.
    ExCertificates {
        n: usize,
        theta: f64,
        subsets: usize,
        pairs: usize,
        #[serde(default)]
        packing: Option<PackingParams>,
        #[serde(default)]
        claim_r: Option<f64>,
    },
    /// `sup|aⱼ| ≤ ‖a‖ ≤ Σ|aⱼ|` on random vectors of `E_x` spaces.
    NormSandwich { n: usize, theta: f64, spaces: usize, vectors: usize },
    /// 2-d distance oracle on pairs of spaces.
    Distance2d { pairs: Vec<DistancePair> },
    /// John ellipsoid factors against expected values.
    John { space: SpaceSpec, inner: f64, outer: f64, tol: f64 },
    /// `ℓ∞^m` embedding through a dual net.
    Embedding {
        space: SpaceSpec,
        delta: f64,
        directions: usize,
        #[serde(default)]
        max_m: Option<usize>,
    },
    /// Subspace net of an ambient space and one random test subspace.
    SubspaceNet { n: usize, ambient: SpaceSpec, xi: f64, directions: usize },
    /// Overlap and defect identities on Haar tuples.
    ExpanderIdentities {
        n: usize,
        #[serde(rename = "N")]
        big_n: usize,
        tuples: usize,
    },
    /// Separated family in `S_ε(n, N)` and level-`N` certificates between
    /// half-subsets of its first `dn_members` members.
    UnitaryFamily {
        n: usize,
        #[serde(rename = "N")]
        big_n: usize,
        epsilon: f64,
        delta: f64,
        max_samples: usize,
        #[serde(default)]
        min_size: usize,
        #[serde(default)]
        dn_members: usize,
    },
    TraceTail {
        n: usize,
        #[serde(rename = "N")]
        big_n: usize,
        s: f64,
        samples: usize,
        #[serde(default)]
        max_frequency: Option<f64>,
    },
    AverageDefect {
        n_list: Vec<usize>,
        #[serde(rename = "N")]
        big_n: usize,
        samples: usize,
        epsilon: f64,
    },
    IdentityCounterexample {
        n: usize,
        #[serde(rename = "N")]
        big_n: usize,
        delta: f64,
        samples: usize,
        /// Require `frequency ≥ factor · exp(−nN²)`.
        #[serde(default)]
        min_factor: Option<f64>,
    },
    /// Counting chains at fixed parameters.
    Chains {
        #[serde(default)]
        params: ChainParams,
    },
}

pub(crate) fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

fn unit_open(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::HoeffdingTail { .. } => "hoeffding_tail",
            Experiment::SignSet { .. } => "sign_set",
            Experiment::ExCertificates { .. } => "ex_certificates",
            Experiment::NormSandwich { .. } => "norm_sandwich",
            Experiment::Distance2d { .. } => "distance2d",
            Experiment::John { .. } => "john",
            Experiment::Embedding { .. } => "embedding",
            Experiment::SubspaceNet { .. } => "subspace_net",
            Experiment::ExpanderIdentities { .. } => "expander_identities",
            Experiment::UnitaryFamily { .. } => "unitary_family",
            Experiment::TraceTail { .. } => "trace_tail",
            Experiment::AverageDefect { .. } => "average_defect",
            Experiment::IdentityCounterexample { .. } => "identity_counterexample",
            Experiment::Chains { .. } => "chains",
        }
    }

    /// Preconditions checked before anything runs.
    pub fn validate(&self) -> Result<()> {
        match self {
            Experiment::HoeffdingTail { n, theta, samples } => {
                need(*n >= 1 && *n <= 120, "n must lie in 1..=120")?;
                need(*theta > 0.0 && *theta <= 1.0, "theta must lie in (0, 1]")?;
                need(*samples >= 1, "samples must be positive")
            }
            Experiment::SignSet { n, theta, .. } => {
                need(*n >= 1 && *n <= EXHAUSTIVE_MAX_DIM, "exhaustive sign sets need 1 <= n <= 25")?;
                need(unit_open(*theta), "theta must lie in (0, 1)")
            }
            Experiment::ExCertificates { n, theta, subsets, pairs, packing, claim_r } => {
                need(*n >= 1 && *n <= EXHAUSTIVE_MAX_DIM, "exhaustive sign sets need 1 <= n <= 25")?;
                need(unit_open(*theta), "theta must lie in (0, 1)")?;
                need(*theta * *n as f64 >= 1.0, "need theta·n >= 1")?;
                need(*subsets >= 2, "need at least two subsets")?;
                need(*pairs >= 1, "pairs must be positive")?;
                if let Some(p) = packing {
                    need(p.r > 1.0, "packing radius must exceed 1")?;
                    need(p.members >= 1 && p.members <= *subsets, "packing members must lie in 1..=subsets")?;
                }
                if let Some(r) = claim_r {
                    need(*r > 0.0 && r * theta < 1.0, "claim needs 0 < r·theta < 1")?;
                }
                Ok(())
            }
            Experiment::NormSandwich { n, theta, spaces, vectors } => {
                need(*n >= 1 && *n <= EXHAUSTIVE_MAX_DIM, "exhaustive sign sets need 1 <= n <= 25")?;
                need(unit_open(*theta), "theta must lie in (0, 1)")?;
                need(*spaces >= 1 && *vectors >= 1, "spaces and vectors must be positive")
            }
            Experiment::Distance2d { pairs } => {
                for p in pairs {
                    let (e, f) = (p.e.build()?, p.f.build()?);
                    need(e.dim() == 2 && f.dim() == 2, "the distance oracle is two-dimensional")?;
                    need(p.tol > 0.0, "tol must be positive")?;
                }
                Ok(())
            }
            Experiment::John { space, tol, .. } => {
                let s = space.build()?;
                need(s.dim() <= 6, "John ellipsoids are computed up to dimension 6")?;
                need(*tol > 0.0, "tol must be positive")
            }
            Experiment::Embedding { space, delta, directions, .. } => {
                space.build()?;
                need(unit_open(*delta), "delta must lie in (0, 1)")?;
                need(*directions >= 1, "directions must be positive")
            }
            Experiment::SubspaceNet { n, ambient, xi, directions } => {
                let x = ambient.build()?;
                need(*n >= 1 && *n <= x.dim(), "subspace dimension must lie in 1..=dim X")?;
                need(*xi > 0.0 && xi * (*n as f64) < 1.0, "need 0 < xi·n < 1")?;
                need(*directions >= 1, "directions must be positive")
            }
            Experiment::ExpanderIdentities { n, big_n, tuples } => {
                need(*n >= 1 && *big_n >= 1 && *tuples >= 1, "n, N and tuples must be positive")
            }
            Experiment::UnitaryFamily { n, big_n, epsilon, delta, max_samples, dn_members, .. } => {
                need(*n >= 1 && *big_n >= 1, "n and N must be positive")?;
                need(unit_open(*epsilon) && unit_open(*delta), "epsilon and delta must lie in (0, 1)")?;
                need(*max_samples >= 1, "max_samples must be positive")?;
                need(*dn_members == 0 || (*dn_members >= 2 && dn_members % 2 == 0), "dn_members must be 0 or even")?;
                need(
                    *dn_members == 0 || (1.0 - delta) * *n as f64 >= 1.0,
                    "level-N certificates need (1-delta)·n >= 1",
                )
            }
            Experiment::TraceTail { n, big_n, samples, .. } => {
                need(*n >= 1 && *big_n >= 1, "n and N must be positive")?;
                need(*samples >= 100, "trace tail needs at least 100 samples")
            }
            Experiment::AverageDefect { n_list, big_n, samples, epsilon } => {
                need(!n_list.is_empty() && n_list.iter().all(|&n| n >= 1), "n_list must hold positive sizes")?;
                need(*big_n >= 1 && *samples >= 1, "N and samples must be positive")?;
                need(*epsilon > 0.0, "epsilon must be positive")
            }
            Experiment::IdentityCounterexample { n, big_n, delta, samples, .. } => {
                need(*n >= 1 && *big_n >= 1 && *samples >= 1, "n, N and samples must be positive")?;
                need((0.0..=1.0).contains(delta), "delta must lie in [0, 1]")
            }
            Experiment::Chains { params } => {
                need(params.lower_n >= 1 && params.upper_n >= 1, "chain sizes must be positive")?;
                need(unit_open(params.theta) && params.r > 1.0 && params.r * params.theta < 1.0, "need 1 < r < 1/theta")?;
                need(unit_open(params.upper_epsilon), "upper epsilon must lie in (0, 1)")?;
                need(params.hh_r >= 2.0, "hh r must be at least 2")
            }
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        need(!self.name.is_empty(), "config name must not be empty")?;
        need(
            self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'),
            "config name must be alphanumeric with - or _",
        )?;
        for (i, e) in self.experiments.iter().enumerate() {
            e.validate().map_err(|err| invalid(format!("experiment {i} ({}): {err}", e.kind())))?;
        }
        Ok(())
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["packing-desk", "unitary-desk", "smoke", "geometry-desk", "concentration-desk", "chains"];

/// Built-in configurations.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let experiments = match name {
        "packing-desk" => vec![
            Experiment::SignSet { n: 16, theta: 0.5, check_maximality: true },
            Experiment::ExCertificates {
                n: 16,
                theta: 0.5,
                subsets: 50,
                pairs: 100,
                packing: Some(PackingParams { members: 6, r: 1.5, effort: 1 }),
                claim_r: Some(1.5),
            },
            Experiment::NormSandwich { n: 16, theta: 0.5, spaces: 20, vectors: 1000 },
        ],
        "unitary-desk" => vec![
            Experiment::ExpanderIdentities { n: 8, big_n: 4, tuples: 20 },
            Experiment::UnitaryFamily {
                n: 8,
                big_n: 4,
                epsilon: 0.85,
                delta: 0.15,
                max_samples: 48,
                min_size: 8,
                dn_members: 4,
            },
        ],
        "smoke" => vec![
            Experiment::HoeffdingTail { n: 12, theta: 0.5, samples: 2000 },
            Experiment::SignSet { n: 8, theta: 0.5, check_maximality: true },
            Experiment::ExCertificates { n: 8, theta: 0.5, subsets: 6, pairs: 6, packing: None, claim_r: Some(1.5) },
            Experiment::NormSandwich { n: 8, theta: 0.5, spaces: 2, vectors: 50 },
            Experiment::John { space: SpaceSpec::LInf { dim: 2 }, inner: 1.0, outer: 2f64.sqrt(), tol: 1e-6 },
            Experiment::ExpanderIdentities { n: 3, big_n: 2, tuples: 3 },
            Experiment::UnitaryFamily {
                n: 6,
                big_n: 2,
                epsilon: 0.95,
                delta: 0.2,
                max_samples: 12,
                min_size: 2,
                dn_members: 2,
            },
            Experiment::TraceTail { n: 2, big_n: 2, s: 0.5, samples: 200, max_frequency: None },
            Experiment::Chains { params: ChainParams::default() },
        ],
        "geometry-desk" => vec![
            Experiment::HoeffdingTail { n: 20, theta: 0.5, samples: 100_000 },
            Experiment::Distance2d {
                pairs: vec![
                    DistancePair {
                        e: SpaceSpec::L1 { dim: 2 },
                        f: SpaceSpec::LInf { dim: 2 },
                        expected: Some(1.0),
                        tol: 1e-3,
                        upper_effort: None,
                    },
                    DistancePair {
                        e: SpaceSpec::L2 { dim: 2 },
                        f: SpaceSpec::LInf { dim: 2 },
                        expected: Some(2f64.sqrt()),
                        tol: 1e-3,
                        upper_effort: Some(8),
                    },
                ],
            },
            Experiment::John { space: SpaceSpec::LInf { dim: 2 }, inner: 1.0, outer: 2f64.sqrt(), tol: 1e-6 },
            Experiment::Embedding { space: SpaceSpec::L2 { dim: 2 }, delta: 0.5, directions: 10_000, max_m: Some(25) },
            Experiment::SubspaceNet { n: 2, ambient: SpaceSpec::LInf { dim: 3 }, xi: 0.2, directions: 10_000 },
        ],
        "concentration-desk" => vec![
            Experiment::TraceTail { n: 8, big_n: 8, s: 0.5, samples: 10_000, max_frequency: Some(0.05) },
            Experiment::AverageDefect { n_list: vec![2, 4, 8, 16], big_n: 8, samples: 50, epsilon: 0.85 },
            Experiment::IdentityCounterexample { n: 2, big_n: 2, delta: 0.5, samples: 10_000, min_factor: Some(10.0) },
        ],
        "chains" => vec![Experiment::Chains { params: ChainParams::default() }],
        other => {
            return Err(invalid(format!("unknown preset {other:?}; known: {}", PRESET_NAMES.join(", "))));
        }
    };
    Ok(ExperimentConfig { name: name.to_string(), seed: 2024, report_path: None, csv_dir: None, experiments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let js = serde_json::to_string(&c).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&js).unwrap();
            assert_eq!(back, c);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let mut c = preset("smoke").unwrap();
        c.experiments = vec![Experiment::TraceTail { n: 2, big_n: 2, s: 0.5, samples: 10, max_frequency: None }];
        assert!(c.validate().is_err());
        c.experiments = vec![Experiment::SubspaceNet { n: 2, ambient: SpaceSpec::LInf { dim: 3 }, xi: 0.5, directions: 10 }];
        assert!(c.validate().is_err());
        c.experiments = vec![];
        c.validate().unwrap();
        c.name = "bad name".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let js = r#"{"name":"x","seed":1,"experiments":[{"kind":"trace_tail","n":2,"N":3,"s":0.1,"samples":100}]}"#;
        let c: ExperimentConfig = serde_json::from_str(js).unwrap();
        assert_eq!(c.experiments[0], Experiment::TraceTail { n: 2, big_n: 3, s: 0.1, samples: 100, max_frequency: None });
    }

    #[test]
    fn polygon_spec() {
        let hex = SpaceSpec::RegularPolygon { sides: 6 }.build().unwrap();
        assert_eq!(hex.functionals().len(), 3);
        assert!((hex.norm(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(SpaceSpec::RegularPolygon { sides: 5 }.build().is_err());
    }
}
