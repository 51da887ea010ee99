use std::path::{Path, PathBuf};
use std::time::Instant;

use itertools::Itertools;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ChainParams, DistancePair, Experiment, ExperimentConfig, PackingParams, SpaceSpec};
use super::report::{Check, CertificateRecord, ExPair, OperationResult, Report, Timing, REPORT_FORMAT};
use crate::bmdist::{
    bm_exact_2d, bm_upper, claim_counter, greedy_packing, identity_certificate_with, john_ellipsoid, LinearMapBetween,
};
use crate::bounds::{hh_iteration, liminf_routes, lower_chain, upper_chain};
use crate::error::{Error, Result};
use crate::linalg::{from_rows, RMat};
use crate::qexpander::{
    average_defect_constant, defect_kronecker, dn_identity_certificate_with, haar_tuple, identity_counterexample,
    overlap_norm, separated_family, trace_tail_experiment, SampleRow, UnitaryTuple, DEFECT_AGREEMENT_TOL,
    DN_SOURCE_TOL,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::signset::{
    antichain_for, antichain_half_subsets, empirical_sign_tail, exact_sign_tail, greedy_sign_set, hoeffding_tail,
    AntichainMode, SignSet, SignSetMode,
};
use crate::spaces::{embed_linf, make_ex, subspace_net, verify_subspace_net, NetOptions, PolytopalSpace};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BMLAB_OUT_DIR";

/// Slack on the norm sandwich `sup|aⱼ| ≤ ‖a‖ ≤ Σ|aⱼ|`.
const SANDWICH_TOL: f64 = 1e-12;

/// A per-sample table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, `<index>-<kind>`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn from_samples(name: String, samples: &[SampleRow], value_column: &str) -> Self {
        Table {
            name,
            header: ["index", "seed", "n", "N", value_column].iter().map(|s| s.to_string()).collect(),
            rows: samples
                .iter()
                .map(|r| {
                    vec![r.index.to_string(), r.seed.to_string(), r.n.to_string(), r.big_n.to_string(), r.value.to_string()]
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl RunOutcome {
    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_passed {
            0
        } else {
            1
        }
    }
}

struct Step {
    operation: &'static str,
    inputs: Value,
    outputs: Value,
    checks: Vec<Check>,
    certificates: Vec<CertificateRecord>,
    tables: Vec<Table>,
}

impl Step {
    fn new(operation: &'static str, inputs: Value) -> Self {
        Step { operation, inputs, outputs: json!({}), checks: Vec::new(), certificates: Vec::new(), tables: Vec::new() }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Validates `config` and runs its experiments in order.
///
/// Each experiment draws from `derive_seed(seed, ["harness", kind], index)`.
/// An operation that errors is recorded as a failed `completed` check; the
/// remaining experiments still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate().map_err(|e| Error::Validation(e.to_string()))?;
    let start = Instant::now();
    let mut results = Vec::with_capacity(config.experiments.len());
    let mut certificates = Vec::new();
    let mut tables = Vec::new();
    let mut per_experiment = Vec::with_capacity(config.experiments.len());
    for (i, exp) in config.experiments.iter().enumerate() {
        let t0 = Instant::now();
        let label = format!("{i}:{}", exp.kind());
        let seed = derive_seed(config.seed, &["harness", exp.kind()], i as u64);
        let step = match dispatch(exp, seed, &label) {
            Ok(step) => step,
            Err(e) => {
                let mut s = Step::new(operation_name(exp), to_value(exp)?);
                s.outputs = json!({ "error": e.to_string() });
                s.checks.push(Check::holds("completed", false));
                s
            }
        };
        let passed = step.checks.iter().all(|c| c.passed);
        results.push(OperationResult {
            experiment: label,
            operation: step.operation.to_string(),
            inputs: step.inputs,
            outputs: step.outputs,
            checks: step.checks,
            passed,
        });
        certificates.extend(step.certificates);
        tables.extend(step.tables);
        per_experiment.push(t0.elapsed().as_secs_f64());
    }
    let all_passed = results.iter().all(|r| r.passed);
    let report = Report {
        format: REPORT_FORMAT,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        results,
        certificates,
        all_passed,
        timing: Timing { total_seconds: start.elapsed().as_secs_f64(), per_experiment_seconds: per_experiment },
    };
    Ok(RunOutcome { report, tables })
}

/// Directory from [`OUT_DIR_ENV`], else the current directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes the report (to `report_path` or `<out_dir>/<name>.json`) and, when
/// `csv_dir` is set, one CSV per table. Returns the report path.
pub fn write_outputs(outcome: &RunOutcome, out_dir: &Path) -> Result<PathBuf> {
    let config = &outcome.report.config;
    let path = config.report_path.clone().unwrap_or_else(|| out_dir.join(format!("{}.json", config.name)));
    outcome.report.write(&path)?;
    if let Some(dir) = &config.csv_dir {
        std::fs::create_dir_all(dir)?;
        for t in &outcome.tables {
            t.write(&dir.join(format!("{}-{}.csv", config.name, t.name)))?;
        }
    }
    Ok(path)
}

fn operation_name(exp: &Experiment) -> &'static str {
    match exp {
        Experiment::HoeffdingTail { .. } => "signset::exact_sign_tail",
        Experiment::SignSet { .. } => "signset::greedy_sign_set",
        Experiment::ExCertificates { .. } => "bmdist::identity_certificate",
        Experiment::NormSandwich { .. } => "spaces::make_ex",
        Experiment::Distance2d { .. } => "bmdist::bm_exact_2d",
        Experiment::John { .. } => "bmdist::john_ellipsoid",
        Experiment::Embedding { .. } => "spaces::embed_linf",
        Experiment::SubspaceNet { .. } => "spaces::subspace_net",
        Experiment::ExpanderIdentities { .. } => "qexpander::defect",
        Experiment::UnitaryFamily { .. } => "qexpander::separated_family",
        Experiment::TraceTail { .. } => "qexpander::trace_tail_experiment",
        Experiment::AverageDefect { .. } => "qexpander::average_defect_constant",
        Experiment::IdentityCounterexample { .. } => "qexpander::identity_counterexample",
        Experiment::Chains { .. } => "bounds::chains",
    }
}

fn dispatch(exp: &Experiment, seed: u64, label: &str) -> Result<Step> {
    let mut step = Step::new(operation_name(exp), to_value(exp)?);
    if let Some(obj) = step.inputs.as_object_mut() {
        obj.insert("seed".into(), json!(seed));
    }
    match exp {
        Experiment::HoeffdingTail { n, theta, samples } => hoeffding(&mut step, *n, *theta, *samples, seed)?,
        Experiment::SignSet { n, theta, check_maximality } => sign_set(&mut step, *n, *theta, *check_maximality, seed)?,
        Experiment::ExCertificates { n, theta, subsets, pairs, packing, claim_r } => {
            ex_certificates(&mut step, label, *n, *theta, *subsets, *pairs, packing.as_ref(), *claim_r, seed)?
        }
        Experiment::NormSandwich { n, theta, spaces, vectors } => sandwich(&mut step, *n, *theta, *spaces, *vectors, seed)?,
        Experiment::Distance2d { pairs } => distance2d(&mut step, label, pairs, seed)?,
        Experiment::John { space, inner, outer, tol } => john(&mut step, space, *inner, *outer, *tol)?,
        Experiment::Embedding { space, delta, directions, max_m } => {
            embedding(&mut step, space, *delta, *directions, *max_m, seed)?
        }
        Experiment::SubspaceNet { n, ambient, xi, directions } => net(&mut step, *n, ambient, *xi, *directions, seed)?,
        Experiment::ExpanderIdentities { n, big_n, tuples } => identities(&mut step, label, *n, *big_n, *tuples, seed)?,
        Experiment::UnitaryFamily { n, big_n, epsilon, delta, max_samples, min_size, dn_members } => family(
            &mut step,
            label,
            FamilyParams {
                n: *n,
                big_n: *big_n,
                epsilon: *epsilon,
                delta: *delta,
                max_samples: *max_samples,
                min_size: *min_size,
                dn_members: *dn_members,
            },
            seed,
        )?,
        Experiment::TraceTail { n, big_n, s, samples, max_frequency } => {
            let t = trace_tail_experiment(*n, *big_n, *s, *samples, seed)?;
            if let Some(m) = max_frequency {
                step.checks.push(Check::le("frequency <= max_frequency", t.frequency, *m));
            }
            step.tables.push(Table::from_samples(table_name(label), &t.rows, "normalized_trace"));
            step.outputs = to_value(&t)?;
        }
        Experiment::AverageDefect { n_list, big_n, samples, epsilon } => {
            let a = average_defect_constant(n_list, *big_n, *samples, *epsilon, seed)?;
            for r in &a.rows {
                step.checks.push(Check::le(format!("n={}: mean norm / sqrt(n) <= envelope", r.n), r.ratio, 3.0));
                step.checks.push(Check::ge(
                    format!("n={}: membership >= Markov lower bound", r.n),
                    r.empirical_membership,
                    r.membership_lower_bound,
                ));
            }
            step.tables.push(Table::from_samples(table_name(label), &a.samples_detail, "defect"));
            step.outputs = to_value(&a)?;
        }
        Experiment::IdentityCounterexample { n, big_n, delta, samples, min_factor } => {
            let c = identity_counterexample(*n, *big_n, *delta, *samples, seed)?;
            if let Some(f) = min_factor {
                step.checks.push(Check::ge("frequency >= factor * exp(-nN^2)", c.frequency, f * c.reference_n_big_n_sq));
            }
            step.tables.push(Table::from_samples(table_name(label), &c.rows, "sum_norm"));
            step.outputs = to_value(&c)?;
        }
        Experiment::Chains { params } => chains(&mut step, params)?,
    }
    Ok(step)
}

fn table_name(label: &str) -> String {
    label.replace(':', "-")
}

fn hoeffding(step: &mut Step, n: usize, theta: f64, samples: usize, seed: u64) -> Result<()> {
    let exact = exact_sign_tail(n, theta)?;
    let empirical = empirical_sign_tail(n, theta, samples, seed)?;
    let bound = hoeffding_tail(theta, n)?;
    step.checks.push(Check::le("exact tail <= hoeffding bound", exact.probability, bound));
    step.checks.push(Check::le("empirical tail <= hoeffding bound", empirical, bound));
    step.outputs = json!({
        "exact_count": exact.count.to_string(),
        "total": exact.total.to_string(),
        "exact_probability": exact.probability,
        "empirical_frequency": empirical,
        "hoeffding_bound": bound,
    });
    Ok(())
}

fn exhaustive_set(n: usize, theta: f64, seed: u64) -> Result<SignSet> {
    greedy_sign_set(n, theta, SignSetMode::Exhaustive, seed)
}

fn sign_set(step: &mut Step, n: usize, theta: f64, check_maximality: bool, seed: u64) -> Result<()> {
    let set = exhaustive_set(n, theta, seed)?;
    let max_corr = set.max_correlation();
    let lower = set.size_lower_bound().ceil();
    step.checks.push(Check::le("max |<s,t>| <= theta*n", max_corr as f64, theta * n as f64));
    step.checks.push(Check::ge("size >= ceil(exp(theta^2 n/2)/2)", set.len() as f64, lower));
    step.checks.push(Check::holds("pairwise validation", set.validate().is_ok()));
    let addable = if check_maximality { Some(set.find_addable()?) } else { None };
    if let Some(a) = &addable {
        step.checks.push(Check::holds("maximal over all 2^n sign vectors", a.is_none()));
    }
    step.outputs = json!({
        "size": set.len(),
        "max_correlation": max_corr,
        "size_lower_bound": set.size_lower_bound(),
        "pool_size": set.pool_size,
        "maximality_checked": check_maximality,
        "vectors": set.vectors,
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ex_certificates(
    step: &mut Step,
    label: &str,
    n: usize,
    theta: f64,
    subsets: usize,
    pairs: usize,
    packing: Option<&PackingParams>,
    claim_r: Option<f64>,
    seed: u64,
) -> Result<()> {
    let set = exhaustive_set(n, theta, seed)?;
    let antichain = antichain_for(
        &set,
        AntichainMode::Sampled { count: subsets, seed: derive_seed(seed, &["harness", "antichain"], 0) },
    )?;
    let family: Vec<PolytopalSpace> = antichain.subsets.iter().map(|x| make_ex(&set, x)).collect::<Result<_>>()?;
    let k = family.len();
    if k < 2 {
        return Err(Error::ConstructionFailed(format!("antichain has {k} subsets, need two")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &["harness", "pairs"], 0));
    let mut ex_pairs = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let i = rng.gen_range(0..k);
        let j = (i + rng.gen_range(1..k)) % k;
        let (x, y) = (&antichain.subsets[i], &antichain.subsets[j]);
        let c = identity_certificate_with(&set, x, y, &family[i], &family[j])?;
        ex_pairs.push(ExPair { x: x.clone(), y: y.clone(), certificate: c });
    }
    let nf = n as f64;
    let ratios = ex_pairs.iter().map(|p| p.certificate.implied_ratio);
    let min_ratio = ratios.clone().fold(f64::INFINITY, f64::min);
    let max_target = ex_pairs.iter().map(|p| p.certificate.target_norm).fold(0.0, f64::max);
    step.checks.push(Check::ge("min identity ratio >= 1/theta", min_ratio, 1.0 / theta));
    step.checks.push(Check::holds("every source norm equals n", ex_pairs.iter().all(|p| p.certificate.source_norm == nf)));
    step.checks.push(Check::le("max target norm <= theta*n", max_target, theta * nf));
    let mut outputs = json!({
        "sign_set_size": set.len(),
        "antichain_size": k,
        "pairs": ex_pairs.len(),
        "min_ratio": min_ratio,
        "max_target_norm": max_target,
    });
    if let Some(p) = packing {
        let report = greedy_packing(&family[..p.members], p.r, p.effort, derive_seed(seed, &["harness", "packing"], 0))?;
        if let Some(m) = report.min_pair_ratio {
            step.checks.push(Check::ge("packing pair ratios >= 1/theta", m, 1.0 / theta));
        }
        outputs["packing"] = json!({
            "r": report.r,
            "effort": report.effort,
            "accepted": report.accepted,
            "rejections": report.rejections.len(),
            "min_pair_ratio": report.min_pair_ratio,
            "acceptance_is_heuristic": report.acceptance_is_heuristic,
        });
        for pc in &report.pair_certificates {
            let (x, y) = (&antichain.subsets[pc.large], &antichain.subsets[pc.small]);
            // only the sign-vector witnesses fit the E_x certificate form
            if pc.certificate.source_norm == nf && pc.certificate.target_norm <= theta * nf {
                ex_pairs.push(ExPair { x: x.clone(), y: y.clone(), certificate: pc.certificate.clone() });
            }
        }
    }
    if let Some(r) = claim_r {
        let c = claim_counter(n as u64, r, theta)?;
        outputs["claim"] = json!({
            "r": r,
            "eta": c.eta,
            "base": c.base,
            "exponent": c.exponent,
            "ln_bound": c.bound.ln_f64()?,
        });
    }
    step.outputs = outputs;
    step.certificates.push(CertificateRecord::ExIdentity { experiment: label.to_string(), set, pairs: ex_pairs });
    Ok(())
}

fn sandwich(step: &mut Step, n: usize, theta: f64, spaces: usize, vectors: usize, seed: u64) -> Result<()> {
    let set = exhaustive_set(n, theta, seed)?;
    let antichain = antichain_for(
        &set,
        AntichainMode::Sampled { count: spaces, seed: derive_seed(seed, &["harness", "antichain"], 0) },
    )?;
    let mut violations = 0usize;
    let mut checked = 0usize;
    for (s, x) in antichain.subsets.iter().enumerate() {
        let e = make_ex(&set, x)?;
        let mut rng = rng_from_seed(derive_seed(seed, &["harness", "sandwich"], s as u64));
        for _ in 0..vectors {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = e.norm(&a)?;
            let sup = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let sum: f64 = a.iter().map(|v| v.abs()).sum();
            if norm < sup - SANDWICH_TOL || norm > sum * (1.0 + SANDWICH_TOL) {
                violations += 1;
            }
            checked += 1;
        }
    }
    step.checks.push(Check::le("sandwich violations", violations as f64, 0.0));
    step.outputs = json!({ "spaces": antichain.subsets.len(), "vectors_checked": checked, "violations": violations });
    Ok(())
}

fn map_record(label: &str, e: &PolytopalSpace, f: &PolytopalSpace, map: &[Vec<f64>], bound: Option<f64>) -> Result<(f64, CertificateRecord)> {
    let u: RMat = from_rows(map).ok_or_else(|| Error::Validation("ragged map".into()))?;
    let claimed = LinearMapBetween::new(&u, e, f)?.distortion_upper();
    Ok((
        claimed,
        CertificateRecord::MapDistortion {
            experiment: label.to_string(),
            e: e.clone(),
            f: f.clone(),
            map: map.to_vec(),
            claimed,
            bound,
        },
    ))
}

fn distance2d(step: &mut Step, label: &str, pairs: &[DistancePair], seed: u64) -> Result<()> {
    let mut outs = Vec::with_capacity(pairs.len());
    for (k, p) in pairs.iter().enumerate() {
        let (e, f) = (p.e.build()?, p.f.build()?);
        let name = format!("{} vs {}", e.label(), f.label());
        let exact = bm_exact_2d(&e, &f, p.tol)?;
        step.checks.push(Check::holds(format!("{name}: oracle reached tolerance"), exact.tol_reached));
        let (claimed, rec) = map_record(label, &e, &f, &exact.map, p.expected.map(|x| x + p.tol))?;
        step.certificates.push(rec);
        if let Some(x) = p.expected {
            step.checks.push(Check::near(format!("{name}: oracle value"), exact.value, x, p.tol));
            step.checks.push(Check::ge(format!("{name}: certified lower bound"), exact.lower, x - p.tol));
            step.checks.push(Check::le(format!("{name}: map distortion"), claimed, x + p.tol));
        }
        let mut out = json!({
            "e": e.label(),
            "f": f.label(),
            "value": exact.value,
            "lower": exact.lower,
            "tol_reached": exact.tol_reached,
            "cells": exact.cells,
            "john_factors": [exact.john_factors.0, exact.john_factors.1],
            "map_distortion": claimed,
        });
        if let Some(effort) = p.upper_effort {
            let up = bm_upper(&e, &f, effort, derive_seed(seed, &["harness", "bm_upper"], k as u64))?;
            let (claimed_up, rec) = map_record(label, &e, &f, &up.map, p.expected.map(|x| x + p.tol))?;
            step.certificates.push(rec);
            if let Some(x) = p.expected {
                step.checks.push(Check::le(format!("{name}: heuristic upper bound"), up.value, x + p.tol));
            }
            out["upper"] = json!({
                "value": up.value,
                "route": up.route,
                "john_bound": up.john_bound,
                "map_distortion": claimed_up,
            });
        }
        outs.push(out);
    }
    step.outputs = json!({ "pairs": outs });
    Ok(())
}

fn john(step: &mut Step, space: &SpaceSpec, inner: f64, outer: f64, tol: f64) -> Result<()> {
    let s = space.build()?;
    let j = john_ellipsoid(&s)?;
    step.checks.push(Check::near("inner radius factor", j.inner_radius_factor, inner, tol));
    step.checks.push(Check::near("outer radius factor", j.outer_radius_factor, outer, tol));
    step.outputs = to_value(&j)?;
    Ok(())
}

fn net_options(seed: u64) -> NetOptions {
    NetOptions { seed, ..NetOptions::default() }
}

fn embedding(step: &mut Step, space: &SpaceSpec, delta: f64, directions: usize, max_m: Option<usize>, seed: u64) -> Result<()> {
    let e = space.build()?;
    let emb = embed_linf(&e, delta, directions, &net_options(seed))?;
    if let Some(m) = max_m {
        step.checks.push(Check::le("m <= max_m", emb.m as f64, m as f64));
    }
    step.checks.push(Check::le("sampled distortion <= 1/(1-delta)", emb.distortion.max_observed, emb.distortion.bound));
    step.checks.push(Check::le("image norm never exceeds the original", emb.max_contraction_violation, 1.0 + 1e-12));
    step.outputs = json!({
        "m": emb.m,
        "delta": emb.delta,
        "distortion": emb.distortion,
        "max_contraction_violation": emb.max_contraction_violation,
        "functionals": emb.image.functionals(),
    });
    Ok(())
}

fn net(step: &mut Step, n: usize, ambient: &SpaceSpec, xi: f64, directions: usize, seed: u64) -> Result<()> {
    let x = ambient.build()?;
    let sn = subspace_net(n, &x, xi, &net_options(seed))?;
    let mut rng = rng_from_seed(derive_seed(seed, &["harness", "test_subspace"], 0));
    let basis = RMat::from_fn(x.dim(), n, |_, _| rng.sample(StandardNormal));
    let check = verify_subspace_net(&x, &sn.ball_net, &basis, directions, derive_seed(seed, &["harness", "check"], 0))?;
    step.checks.push(Check::le("net members <= (1+2/xi)^(nm)", sn.members.len() as f64, sn.count_bound));
    step.checks.push(Check::le("test subspace distortion <= R", check.distortion.max_observed, check.distortion.bound));
    step.outputs = json!({
        "radius": sn.radius,
        "ball_net_size": sn.ball_net.len(),
        "members": sn.members.len(),
        "skipped_degenerate": sn.skipped_degenerate,
        "count_bound": sn.count_bound,
        "test_basis": crate::linalg::rows_of(&basis),
        "check": check,
    });
    Ok(())
}

fn identities(step: &mut Step, label: &str, n: usize, big_n: usize, tuples: usize, seed: u64) -> Result<()> {
    let nf = n as f64;
    let mut rows = Vec::with_capacity(tuples);
    let (mut max_self, mut max_route, mut in_range) = (0.0f64, 0.0f64, true);
    for i in 0..tuples {
        let sd = derive_seed(seed, &["harness", "tuple"], i as u64);
        let t = haar_tuple(n, big_n, sd)?;
        let own = overlap_norm(&t, &t)?;
        let kron = defect_kronecker(&t);
        max_self = max_self.max((own - nf).abs());
        max_route = max_route.max((t.defect() - kron).abs());
        in_range &= (0.0..=1.0).contains(&t.defect());
        rows.push(vec![
            i.to_string(),
            sd.to_string(),
            t.defect().to_string(),
            kron.to_string(),
            own.to_string(),
            t.defect_flagged().to_string(),
        ]);
    }
    let ident = UnitaryTuple::constant_identity(n, big_n)?.defect();
    step.checks.push(Check::le("max |overlap(s,s) - n|", max_self, 1e-8));
    step.checks.push(Check::holds("defect of the constant identity tuple is exactly 1", ident == 1.0));
    step.checks.push(Check::holds("defects lie in [0, 1]", in_range));
    step.checks.push(Check::le("max defect route disagreement", max_route, DEFECT_AGREEMENT_TOL));
    step.outputs = json!({
        "tuples": tuples,
        "max_self_overlap_error": max_self,
        "identity_defect": ident,
        "max_route_disagreement": max_route,
    });
    step.tables.push(Table {
        name: table_name(label),
        header: ["index", "seed", "defect", "defect_kronecker", "self_overlap", "flagged"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    Ok(())
}

struct FamilyParams {
    n: usize,
    big_n: usize,
    epsilon: f64,
    delta: f64,
    max_samples: usize,
    min_size: usize,
    dn_members: usize,
}

fn family(step: &mut Step, label: &str, p: FamilyParams, seed: u64) -> Result<()> {
    let nf = p.n as f64;
    let fam = separated_family(p.n, p.big_n, p.epsilon, p.delta, p.max_samples, seed)?;
    let v = fam.verify()?;
    step.checks.push(Check::ge("family size", fam.len() as f64, p.min_size as f64));
    step.checks.push(Check::le("max pairwise overlap <= (1-delta)n", v.max_off_diagonal_overlap, (1.0 - p.delta) * nf));
    step.checks.push(Check::le("max defect <= epsilon", v.max_defect, p.epsilon));
    step.checks.push(Check::holds("family re-verification", v.ok));
    let mut outputs = json!({
        "size": fam.len(),
        "samples_drawn": fam.samples_drawn,
        "defect_rejections": fam.defect_rejections,
        "flagged_rejections": fam.flagged_rejections,
        "overlap_rejections": fam.overlap_rejections,
        "target_exponent": fam.target_exponent,
        "verification": v,
    });
    if p.dn_members > 0 {
        let k = p.dn_members;
        step.checks.push(Check::ge("members available for level-N certificates", fam.len() as f64, k as f64));
        if fam.len() >= k {
            let members: Vec<UnitaryTuple> = fam.members[..k].to_vec();
            let halves = antichain_half_subsets(k, AntichainMode::Exhaustive)?;
            let mut certs = Vec::new();
            let mut failures = 0usize;
            for (x, y) in halves.subsets.iter().tuple_combinations().flat_map(|(a, b)| [(a, b), (b, a)]) {
                match dn_identity_certificate_with(&members, p.n, p.big_n, p.delta, x, y) {
                    Ok(c) => certs.push(c),
                    Err(_) => failures += 1,
                }
            }
            let min_ratio = certs.iter().map(|c| c.implied_ratio).fold(f64::INFINITY, f64::min);
            let max_source_err = certs.iter().map(|c| (c.source_norm - nf).abs()).fold(0.0, f64::max);
            step.checks.push(Check::le("level-N pairs without a certificate", failures as f64, 0.0));
            step.checks.push(Check::ge("min level-N ratio >= 1/(1-delta)", min_ratio, 1.0 / (1.0 - p.delta)));
            step.checks.push(Check::le("max |source norm - n|", max_source_err, DN_SOURCE_TOL));
            outputs["level_n"] = json!({
                "members": k,
                "ordered_pairs": certs.len() + failures,
                "min_ratio": min_ratio,
                "max_source_error": max_source_err,
            });
            step.certificates.push(CertificateRecord::DnIdentity {
                experiment: label.to_string(),
                n: p.n,
                big_n: p.big_n,
                delta: p.delta,
                members,
                pairs: certs,
            });
        }
    }
    let rows = fam
        .members
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let worst = fam.pairwise_overlaps[i].iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).fold(0.0, f64::max);
            vec![i.to_string(), t.seed().map_or(String::new(), |s| s.to_string()), t.defect().to_string(), worst.to_string()]
        })
        .collect();
    step.tables.push(Table {
        name: table_name(label),
        header: ["member", "seed", "defect", "max_overlap"].iter().map(|s| s.to_string()).collect(),
        rows,
    });
    step.outputs = outputs;
    step.certificates.push(CertificateRecord::SeparatedFamily { experiment: label.to_string(), family: fam });
    Ok(())
}

fn chains(step: &mut Step, p: &ChainParams) -> Result<()> {
    let lower = lower_chain(p.lower_n, p.theta, p.r)?;
    let upper = upper_chain(p.upper_n, p.upper_epsilon)?;
    let hh = hh_iteration(p.hh_n, p.hh_big_n, p.hh_r)?;
    let routes = liminf_routes(p.r)?;
    step.checks.push(Check::holds("lower chain passes", lower.passes));
    let nn = (p.hh_n * p.hh_big_n * p.hh_big_n) as f64;
    let expected_hh = hh.k as f64 * 2f64.ln() + 4.0 * nn / 2f64.powi(hh.k as i32);
    step.checks.push(Check::near("hh bound exponent", hh.bound.ln_f64()?, expected_hh, 1e-9 * expected_hh.max(1.0)));
    step.checks.push(Check::near("theta^2/2 at theta=1/r equals 1/(2r^2)", routes.chain_growth, routes.closed_form, 1e-15));
    step.outputs = json!({
        "lower": {
            "K_half": lower.log_antichain.to_f64(),
            "penalty": lower.penalty.to_f64(),
            "target": lower.target.to_f64(),
            "log_packing": lower.log_packing.to_f64(),
            "passes": lower.passes,
            "n0_hint": lower.n0_hint,
            "chain": lower,
        },
        "upper": {
            "log_covering": upper.log_covering.to_f64(),
            "chain": upper,
        },
        "hh": hh,
        "liminf": routes,
    });
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{preset, verify_report, verify_report_value};

    fn config(experiments: Vec<Experiment>) -> ExperimentConfig {
        ExperimentConfig { name: "t".into(), seed: 5, report_path: None, csv_dir: None, experiments }
    }

    #[test]
    fn empty_config_gives_empty_passing_report() {
        let out = run_experiment(&config(vec![])).unwrap();
        assert!(out.report.results.is_empty());
        assert!(out.report.all_passed);
        assert_eq!(out.exit_code(), 0);
        assert!(verify_report(&out.report).ok);
    }

    #[test]
    fn invalid_config_is_a_validation_error() {
        let bad = config(vec![Experiment::SignSet { n: 40, theta: 0.5, check_maximality: false }]);
        assert!(matches!(run_experiment(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn smoke_preset_runs_verifies_and_repeats() {
        let cfg = preset("smoke").unwrap();
        let a = run_experiment(&cfg).unwrap();
        assert!(a.report.all_passed, "{:?}", a.report.failed_checks());
        let v = verify_report(&a.report);
        assert!(v.ok, "{:?}", v.failures);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.report.without_timing().unwrap(), b.report.without_timing().unwrap());
        let value = serde_json::to_value(&a.report).unwrap();
        assert!(verify_report_value(&value).unwrap().ok);
    }

    #[test]
    fn failing_check_sets_exit_code() {
        let cfg = config(vec![Experiment::TraceTail { n: 2, big_n: 2, s: 0.0, samples: 100, max_frequency: Some(0.0) }]);
        let out = run_experiment(&cfg).unwrap();
        assert!(!out.report.all_passed);
        assert_eq!(out.exit_code(), 1);
        assert_eq!(out.tables.len(), 1);
        assert_eq!(out.tables[0].rows.len(), 100);
    }

    #[test]
    fn outputs_land_in_the_requested_places() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(vec![Experiment::TraceTail { n: 2, big_n: 2, s: 0.5, samples: 100, max_frequency: None }]);
        cfg.csv_dir = Some(dir.path().join("csv"));
        let out = run_experiment(&cfg).unwrap();
        let path = write_outputs(&out, dir.path()).unwrap();
        assert_eq!(path, dir.path().join("t.json"));
        let back = Report::read(&path).unwrap();
        assert_eq!(back, out.report);
        let csv = std::fs::read_to_string(dir.path().join("csv").join("t-0-trace_tail.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "index,seed,n,N,normalized_trace");
        assert_eq!(csv.lines().count(), 101);
    }
}
