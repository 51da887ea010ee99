use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::bmdist::{Certificate, LinearMapBetween};
use crate::error::{invalid, Error, Result};
use crate::linalg::from_rows;
use crate::qexpander::{DnCertificate, OperatorSpaceFx, SeparatedUnitaryFamily, UnitaryTuple, DN_SOURCE_TOL};
use crate::signset::SignSet;
use crate::spaces::{make_ex, PolytopalSpace};

pub const REPORT_FORMAT: u32 = 1;

/// Relative slack allowed when re-evaluating a stored map distortion.
pub const MAP_RECHECK_TOL: f64 = 1e-9;

/// One asserted relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `"<="`, `">="`, `"=="` (within `tol`) or `"holds"`.
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::numeric(name, "<=", observed, bound, None, observed <= bound)
    }

    pub fn ge(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::numeric(name, ">=", observed, bound, None, observed >= bound)
    }

    pub fn near(name: impl Into<String>, observed: f64, target: f64, tol: f64) -> Self {
        Self::numeric(name, "==", observed, target, Some(tol), (observed - target).abs() <= tol)
    }

    pub fn holds(name: impl Into<String>, passed: bool) -> Self {
        Check { name: name.into(), relation: "holds".into(), observed: None, bound: None, tol: None, passed }
    }

    fn numeric(name: impl Into<String>, rel: &str, observed: f64, bound: f64, tol: Option<f64>, passed: bool) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Check {
            name: name.into(),
            relation: rel.into(),
            observed: finite(observed),
            bound: finite(bound),
            tol,
            passed: passed && observed.is_finite(),
        }
    }
}

/// Result of one experiment: the operation, its inputs, outputs and checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationResult {
    /// `<index>:<kind>`.
    pub experiment: String,
    pub operation: String,
    pub inputs: serde_json::Value,
    pub outputs: serde_json::Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExPair {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub certificate: Certificate,
}

/// Everything needed to re-check a claim without re-running a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "certificate", rename_all = "snake_case")]
pub enum CertificateRecord {
    /// `‖Id : E_y → E_x‖ ≥ 1/θ` from a sign vector `s ∈ x \ y`.
    ExIdentity { experiment: String, set: SignSet, pairs: Vec<ExPair> },
    /// `‖Id_N : F_y → F_x‖ ≥ 1/(1−δ)` from `Aⱼ = s̄ⱼ`.
    DnIdentity {
        experiment: String,
        n: usize,
        #[serde(rename = "N")]
        big_n: usize,
        delta: f64,
        members: Vec<UnitaryTuple>,
        pairs: Vec<DnCertificate>,
    },
    /// Membership and separation of a unitary family.
    SeparatedFamily { experiment: String, family: SeparatedUnitaryFamily },
    /// `d(E, F) ≤ claimed` through an explicit map `E → F`.
    MapDistortion {
        experiment: String,
        e: PolytopalSpace,
        f: PolytopalSpace,
        map: Vec<Vec<f64>>,
        claimed: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

impl CertificateRecord {
    pub fn experiment(&self) -> &str {
        match self {
            CertificateRecord::ExIdentity { experiment, .. }
            | CertificateRecord::DnIdentity { experiment, .. }
            | CertificateRecord::SeparatedFamily { experiment, .. }
            | CertificateRecord::MapDistortion { experiment, .. } => experiment,
        }
    }

    /// Re-evaluates the record; returns one message per failing item.
    pub fn recheck(&self) -> Vec<String> {
        let mut failures = Vec::new();
        match self {
            CertificateRecord::ExIdentity { experiment, set, pairs } => {
                if let Err(e) = set.validate() {
                    failures.push(format!("{experiment}: sign set invalid: {e}"));
                    return failures;
                }
                let n = set.n as f64;
                for (k, p) in pairs.iter().enumerate() {
                    let ok = match (make_ex(set, &p.x), make_ex(set, &p.y)) {
                        (Ok(ex), Ok(ey)) => {
                            p.certificate.reproduces(&ex, &ey)
                                && p.certificate.source_norm == n
                                && p.certificate.target_norm <= set.theta * n
                                && p.certificate.implied_ratio >= 1.0 / set.theta
                        }
                        _ => false,
                    };
                    if !ok {
                        failures.push(format!("{experiment}: E_x identity certificate {k} (x={:?}, y={:?})", p.x, p.y));
                    }
                }
            }
            CertificateRecord::DnIdentity { experiment, n, big_n, delta, members, pairs } => {
                let nf = *n as f64;
                for (k, c) in pairs.iter().enumerate() {
                    let spaces = OperatorSpaceFx::from_members(members, *n, *big_n, &c.x)
                        .and_then(|fx| OperatorSpaceFx::from_members(members, *n, *big_n, &c.y).map(|fy| (fx, fy)));
                    let ok = match spaces {
                        Ok((fx, fy)) => {
                            c.reproduces(&fx, &fy)
                                && (c.source_norm - nf).abs() <= DN_SOURCE_TOL
                                && c.target_norm <= (1.0 - delta) * nf * (1.0 + 1e-12)
                                && c.delta == *delta
                        }
                        Err(_) => false,
                    };
                    if !ok {
                        failures.push(format!("{experiment}: level-N certificate {k} (x={:?}, y={:?})", c.x, c.y));
                    }
                }
            }
            CertificateRecord::SeparatedFamily { experiment, family } => match family.verify() {
                Ok(v) if v.ok => {}
                Ok(v) => failures.push(format!("{experiment}: separated family fails re-verification: {v:?}")),
                Err(e) => failures.push(format!("{experiment}: separated family: {e}")),
            },
            CertificateRecord::MapDistortion { experiment, e, f, map, claimed, bound } => {
                let fresh = from_rows(map)
                    .ok_or_else(|| invalid("ragged map"))
                    .and_then(|u| LinearMapBetween::new(&u, e, f))
                    .map(|m| m.distortion_upper());
                let ok = match fresh {
                    Ok(d) => {
                        (d - claimed).abs() <= MAP_RECHECK_TOL * claimed.abs().max(1.0)
                            && bound.is_none_or(|b| *claimed <= b)
                    }
                    Err(_) => false,
                };
                if !ok {
                    failures.push(format!("{experiment}: map distortion certificate ({} -> {})", e.label(), f.label()));
                }
            }
        }
        failures
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_experiment_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub results: Vec<OperationResult>,
    pub certificates: Vec<CertificateRecord>,
    pub all_passed: bool,
    /// Wall-clock only; excluded from reproducibility comparisons.
    pub timing: Timing,
}

impl Report {
    /// The report as JSON with the timing field removed.
    pub fn without_timing(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        Ok(v)
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.results
            .iter()
            .flat_map(|r| r.checks.iter().filter(|c| !c.passed).map(move |c| format!("{}: {}", r.experiment, c.name)))
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub certificates_checked: usize,
    pub failures: Vec<String>,
}

/// Re-evaluates every certificate of a report from its stored witnesses.
pub fn verify_report(report: &Report) -> Verification {
    let failures: Vec<String> = report.certificates.iter().flat_map(CertificateRecord::recheck).collect();
    Verification { ok: failures.is_empty(), certificates_checked: report.certificates.len(), failures }
}

/// As [`verify_report`] on raw JSON: each certificate is parsed on its own,
/// so a witness that no longer deserializes (say, a non-unitary member) is
/// reported against its certificate instead of failing the whole parse.
pub fn verify_report_value(report: &serde_json::Value) -> Result<Verification> {
    let certs = report
        .get("certificates")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| Error::Validation("report has no certificates array".into()))?;
    let mut failures = Vec::new();
    for (k, raw) in certs.iter().enumerate() {
        match CertificateRecord::deserialize(raw) {
            Ok(rec) => failures.extend(rec.recheck()),
            Err(e) => {
                let experiment = raw.get("experiment").and_then(|v| v.as_str()).unwrap_or("?");
                let kind = raw.get("certificate").and_then(|v| v.as_str()).unwrap_or("?");
                failures.push(format!("{experiment}: certificate {k} ({kind}) has invalid witness data: {e}"));
            }
        }
    }
    Ok(Verification { ok: failures.is_empty(), certificates_checked: certs.len(), failures })
}

/// [`verify_report_value`] on a report file.
pub fn verify_report_path(path: &Path) -> Result<Verification> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("report does not parse: {e}")))?;
    verify_report_value(&value)
}
