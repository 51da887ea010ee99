//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Wherever possible the library output is
//! compared against a value computed here by other means.

use std::f64::consts::SQRT_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::Rng as _;
use rand_distr::StandardNormal;

use bmlab::bmdist::{bm_exact_2d, bm_upper, identity_certificate_with, john_ellipsoid};
use bmlab::bounds::{hh_iteration, liminf_routes, lower_chain, upper_chain};
use bmlab::harness::{preset, run_experiment, verify_report, verify_report_value, CertificateRecord, PRESET_NAMES};
use bmlab::linalg::RMat;
use bmlab::qexpander::{
    average_defect_constant, defect_kronecker, dn_identity_certificate_with, haar_tuple, identity_counterexample,
    overlap_norm, overlap_norm_svd, separated_family, trace_tail_experiment, UnitaryTuple,
};
use bmlab::rng::{derive_seed, rng_from_seed};
use bmlab::signset::{
    antichain_for, antichain_half_subsets, empirical_sign_tail, exact_sign_tail, greedy_sign_set, hoeffding_tail,
    AntichainMode, SignSetMode,
};
use bmlab::spaces::{embed_linf, make_ex, subspace_net, verify_subspace_net, NetOptions, PolytopalSpace};

const SEED: u64 = 20_240_601;

/// Sub-checks of one criterion.
#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn that(&mut self, what: impl Into<String>, ok: bool) {
        self.0.push((what.into(), ok));
    }

    fn within(&mut self, what: &str, elapsed: Duration, limit_s: f64) {
        let s = elapsed.as_secs_f64();
        self.that(format!("{what}: {s:.2}s < {limit_s}s"), s < limit_s);
    }
}

fn seed(label: &str) -> u64 {
    derive_seed(SEED, &["acceptance", label], 0)
}

fn inner(s: &[i8], t: &[i8]) -> i32 {
    s.iter().zip(t).map(|(&a, &b)| a as i32 * b as i32).sum()
}

fn signs_of(bits: u32, n: usize) -> Vec<i8> {
    (0..n).map(|j| if bits >> j & 1 == 1 { -1 } else { 1 }).collect()
}

/// `max{sup|wⱼ|, sup_{t∈x} |⟨w,t⟩|}` from the raw sign vectors.
fn ex_norm(vectors: &[Vec<i8>], x: &[usize], w: &[f64]) -> f64 {
    let sup = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter().fold(sup, |m, &i| {
        let d: f64 = vectors[i].iter().zip(w).map(|(&t, &v)| t as f64 * v).sum();
        m.max(d.abs())
    })
}

fn l1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

fn linf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn apply(m: &[Vec<f64>], a: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum()).collect()
}

fn inverse2(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]]
}

/// `‖T‖·‖T⁻¹‖` for a 2×2 map, sampled on `k` directions.
fn sampled_distortion(map: &[Vec<f64>], ne: impl Fn(&[f64]) -> f64, nf: impl Fn(&[f64]) -> f64, k: usize) -> f64 {
    let inv = inverse2(map);
    let (mut fwd, mut back) = (0.0f64, 0.0f64);
    for i in 0..k {
        let a = i as f64 * std::f64::consts::PI / k as f64;
        let v = [a.cos(), a.sin()];
        fwd = fwd.max(nf(&apply(map, &v)) / ne(&v));
        back = back.max(ne(&apply(&inv, &v)) / nf(&v));
    }
    fwd * back
}

fn c1_hoeffding(c: &mut Checks) {
    let t = Instant::now();
    // |Σsⱼ| > 10 ⇔ popcount ≤ 4 or ≥ 16
    let count = (0u32..1 << 20).filter(|b| (20 - 2 * b.count_ones() as i32).abs() > 10).count();
    let oracle = count as f64 / (1u64 << 20) as f64;
    let exact = exact_sign_tail(20, 0.5).unwrap();
    let bound = hoeffding_tail(0.5, 20).unwrap();
    let emp = empirical_sign_tail(20, 0.5, 100_000, seed("hoeffding")).unwrap();
    c.that(format!("enumeration gives 6196/2^19 (count {count})"), count == 2 * 6196);
    c.that(format!("exact tail {} equals enumeration", exact.probability), exact.probability == oracle);
    c.that(format!("bound {bound} equals 2e^-2.5"), (bound - 2.0 * (-2.5f64).exp()).abs() < 1e-15);
    c.that(format!("exact {oracle:.5} <= bound"), oracle <= bound);
    c.that(format!("empirical {emp:.5} <= bound"), emp <= bound);
    let se = (oracle * (1.0 - oracle) / 1e5).sqrt();
    c.that(format!("empirical within 5 SE of exact (se {se:.2e})"), (emp - oracle).abs() <= 5.0 * se);
    c.within("runtime", t.elapsed(), 1.0);
}

fn c2_sign_set(c: &mut Checks) {
    let t = Instant::now();
    let set = greedy_sign_set(16, 0.5, SignSetMode::Exhaustive, seed("signset")).unwrap();
    let v = &set.vectors;
    let worst = v.iter().tuple_combinations().map(|(a, b)| inner(a, b).abs()).max().unwrap_or(0);
    c.that(format!("pairwise |<s,t>| max {worst} <= 8"), worst <= 8);
    let lower = (0.5 * (2.0f64).exp()).ceil() as usize;
    c.that(format!("size {} >= {lower}", set.len()), set.len() >= lower);
    let addable = (0u32..1 << 16).map(|b| signs_of(b, 16)).find(|s| v.iter().all(|t| inner(s, t).abs() <= 8));
    c.that("no sign vector in 2^16 can be added", addable.is_none());
    c.within("runtime", t.elapsed(), 5.0);
}

fn c3_ex_certificates(c: &mut Checks) {
    let t = Instant::now();
    let set = greedy_sign_set(16, 0.5, SignSetMode::Exhaustive, seed("signset")).unwrap();
    let ac = antichain_for(&set, AntichainMode::Sampled { count: 50, seed: seed("antichain") }).unwrap();
    let k = ac.subsets.len();
    let spaces: Vec<PolytopalSpace> = ac.subsets.iter().map(|x| make_ex(&set, x).unwrap()).collect();
    let mut rng = rng_from_seed(seed("pairs"));
    let (mut min_ratio, mut bad_norms, mut not_antichain) = (f64::INFINITY, 0, 0);
    for _ in 0..100 {
        let i = rng.gen_range(0..k);
        let j = (i + rng.gen_range(1..k)) % k;
        let (x, y) = (&ac.subsets[i], &ac.subsets[j]);
        if x.iter().all(|e| y.contains(e)) {
            not_antichain += 1;
        }
        let cert = identity_certificate_with(&set, x, y, &spaces[i], &spaces[j]).unwrap();
        let src = ex_norm(&set.vectors, x, &cert.witness);
        let tgt = ex_norm(&set.vectors, y, &cert.witness);
        if src != 16.0 || tgt > 8.0 || src != cert.source_norm || tgt != cert.target_norm {
            bad_norms += 1;
        }
        min_ratio = min_ratio.min(src / tgt);
    }
    c.that(format!("{k} sampled subsets form an antichain"), not_antichain == 0);
    c.that(format!("witness norms re-evaluate to source 16, target <= 8 ({bad_norms} bad)"), bad_norms == 0);
    c.that(format!("min ratio {min_ratio} >= 2"), min_ratio >= 2.0);
    c.within("runtime", t.elapsed(), 10.0);
}

fn c4_sandwich(c: &mut Checks) {
    let set = greedy_sign_set(16, 0.5, SignSetMode::Exhaustive, seed("signset")).unwrap();
    let ac = antichain_for(&set, AntichainMode::Sampled { count: 20, seed: seed("sandwich") }).unwrap();
    let mut rng = rng_from_seed(seed("vectors"));
    let (mut violations, mut checked) = (0, 0);
    for x in &ac.subsets {
        let e = make_ex(&set, x).unwrap();
        for _ in 0..1000 {
            let a: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = e.norm(&a).unwrap();
            if norm < linf(&a) || norm > l1(&a) * (1.0 + 1e-12) || (norm - ex_norm(&set.vectors, x, &a)).abs() > 1e-12 {
                violations += 1;
            }
            checked += 1;
        }
    }
    c.that(format!("{} spaces", ac.subsets.len()), ac.subsets.len() == 20);
    c.that(format!("{violations} violations over {checked} vectors"), violations == 0 && checked == 20_000);
}

fn c5_distances(c: &mut Checks) {
    let t = Instant::now();
    let (s1, sinf, s2) = (PolytopalSpace::l_1(2).unwrap(), PolytopalSpace::l_inf(2), PolytopalSpace::l_2(2));
    let a = bm_exact_2d(&s1, &sinf, 1e-3).unwrap();
    c.that(format!("d(l1,linf) = {:.6} within 1e-3 of 1", a.value), (a.value - 1.0).abs() <= 1e-3);
    let da = sampled_distortion(&a.map, l1, linf, 4000);
    c.that(format!("returned map distortion {da:.6} <= value + 1e-9"), da <= a.value + 1e-9);
    // (x,y) -> (x+y, x-y) is an isometry l1 -> linf
    let rot = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
    c.that("rotation oracle is an isometry", (sampled_distortion(&rot, l1, linf, 4000) - 1.0).abs() < 1e-12);

    let b = bm_exact_2d(&s2, &sinf, 1e-3).unwrap();
    c.that(format!("d(l2,linf) = {:.6} within 1e-3 of sqrt2", b.value), (b.value - SQRT_2).abs() <= 1e-3);
    c.that(format!("certified lower {:.6} >= sqrt2 - 1e-3", b.lower), b.lower >= SQRT_2 - 1e-3);
    let db = sampled_distortion(&b.map, l2, linf, 4000);
    c.that(format!("returned map distortion {db:.6} <= value + 1e-9"), db <= b.value + 1e-9);
    let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    c.that("identity oracle has distortion sqrt2", (sampled_distortion(&id, l2, linf, 4000) - SQRT_2).abs() < 1e-12);

    let up = bm_upper(&s2, &sinf, 8, seed("upper")).unwrap();
    c.that(format!("heuristic upper {:.6} <= sqrt2 + 1e-3", up.value), up.value <= SQRT_2 + 1e-3);
    let j = john_ellipsoid(&sinf).unwrap();
    c.that(
        format!("John factors ({:.8}, {:.8}) vs (1, sqrt2)", j.inner_radius_factor, j.outer_radius_factor),
        (j.inner_radius_factor - 1.0).abs() <= 1e-6 && (j.outer_radius_factor - SQRT_2).abs() <= 1e-6,
    );
    c.within("runtime", t.elapsed(), 30.0);
}

fn c6_embedding(c: &mut Checks) {
    let e = PolytopalSpace::l_2(2);
    let emb = embed_linf(&e, 0.5, 10_000, &NetOptions { seed: seed("embed"), ..NetOptions::default() }).unwrap();
    c.that(format!("m = {} <= 25", emb.m), emb.m <= 25);
    c.that(format!("reported distortion {:.4} <= 2", emb.distortion.max_observed), emb.distortion.max_observed <= 2.0);
    // image norm a -> max |<f,a>| against the Euclidean norm, 10^4 directions
    let fs = emb.image.functionals();
    let (mut up, mut down) = (0.0f64, 0.0f64);
    for i in 0..10_000 {
        let th = i as f64 * std::f64::consts::PI / 10_000.0;
        let a = [th.cos(), th.sin()];
        let img = fs.iter().map(|f| (f[0] * a[0] + f[1] * a[1]).abs()).fold(0.0, f64::max);
        up = up.max(img);
        down = down.max(1.0 / img);
    }
    c.that(format!("image never exceeds the Euclidean norm (max {up:.12})"), up <= 1.0 + 1e-12);
    c.that(format!("recomputed distortion {:.4} <= 2", up * down), up * down <= 2.0);
}

fn c7_subspace_net(c: &mut Checks) {
    let x = PolytopalSpace::l_inf(3);
    let opts = NetOptions { seed: seed("net"), ..NetOptions::default() };
    let sn = subspace_net(2, &x, 0.2, &opts).unwrap();
    let bound = 11f64.powi(6);
    c.that(format!("count bound {} equals 11^6", sn.count_bound), sn.count_bound == bound);
    c.that(format!("{} members <= 11^6", sn.members.len()), (sn.members.len() as f64) <= bound);
    let mut rng = rng_from_seed(seed("basis"));
    let basis = RMat::from_fn(3, 2, |_, _| rng.sample(StandardNormal));
    let check = verify_subspace_net(&x, &sn.ball_net, &basis, 10_000, seed("check")).unwrap();
    let r = 1.4 / 0.6;
    c.that(format!("R = {} equals 1.4/0.6", check.distortion.bound), (check.distortion.bound - r).abs() < 1e-12);
    c.that(format!("test subspace distortion {:.4} <= R on {} directions", check.distortion.max_observed, check.distortion.verified_on),
        check.distortion.max_observed <= r && check.distortion.verified_on >= 10_000);
}

fn c8_identities(c: &mut Checks) {
    let (mut self_err, mut route, mut in_range, mut svd_err) = (0.0f64, 0.0f64, true, 0.0f64);
    for i in 0..20 {
        let t = haar_tuple(8, 4, derive_seed(SEED, &["acceptance", "tuple"], i)).unwrap();
        self_err = self_err.max((overlap_norm(&t, &t).unwrap() - 8.0).abs());
        svd_err = svd_err.max((overlap_norm_svd(&t, &t).unwrap() - 8.0).abs());
        route = route.max((t.defect() - defect_kronecker(&t)).abs());
        in_range &= (0.0..=1.0).contains(&t.defect());
    }
    let ident = UnitaryTuple::constant_identity(8, 4).unwrap().defect();
    c.that(format!("max |overlap(s,s) - 8| = {self_err:.2e}"), self_err <= 1e-8);
    c.that(format!("dense SVD route agrees ({svd_err:.2e})"), svd_err <= 1e-8);
    c.that(format!("identity tuple defect = {ident}"), ident == 1.0);
    c.that("all defects in [0, 1]", in_range);
    c.that(format!("defect routes agree to {route:.2e}"), route <= 1e-8);
}

fn c9_family(c: &mut Checks) {
    let t = Instant::now();
    let fam = separated_family(8, 4, 0.85, 0.15, 500, seed("family")).unwrap();
    c.that(format!("family size {} >= 8", fam.len()), fam.len() >= 8);
    let mut worst = 0.0f64;
    for (a, b) in fam.members.iter().tuple_combinations() {
        worst = worst.max(overlap_norm_svd(a, b).unwrap());
    }
    let max_defect = fam.members.iter().map(defect_kronecker).fold(0.0, f64::max);
    c.that(format!("recomputed max overlap {worst:.4} <= 6.8"), worst <= 6.8);
    c.that(format!("recomputed max defect {max_defect:.4} <= 0.85"), max_defect <= 0.85);
    let v = fam.verify().unwrap();
    c.that("re-verification passes", v.ok);
    c.within("runtime", t.elapsed(), 300.0);
}

fn c10_dn(c: &mut Checks) {
    let fam = separated_family(8, 4, 0.85, 0.15, 48, seed("dn")).unwrap();
    c.that(format!("family has {} >= 4 members", fam.len()), fam.len() >= 4);
    if fam.len() < 4 {
        return;
    }
    let members: Vec<UnitaryTuple> = fam.members[..4].to_vec();
    let halves = antichain_half_subsets(4, AntichainMode::Exhaustive).unwrap();
    let mut certs = Vec::new();
    let mut failures = 0;
    for (x, y) in halves.subsets.iter().tuple_combinations().flat_map(|(a, b)| [(a, b), (b, a)]) {
        match dn_identity_certificate_with(&members, 8, 4, 0.15, x, y) {
            Ok(cert) => certs.push(cert),
            Err(_) => failures += 1,
        }
    }
    c.that(format!("{} ordered pairs, {failures} without certificate", certs.len() + failures), certs.len() == 30 && failures == 0);
    let min_ratio = certs.iter().map(|c| c.implied_ratio).fold(f64::INFINITY, f64::min);
    c.that(format!("min ratio {min_ratio:.4} >= 1/0.85"), min_ratio >= 1.0 / 0.85);
    let src = certs.iter().map(|c| (c.source_norm - 8.0).abs()).fold(0.0, f64::max);
    c.that(format!("source norms equal n to {src:.2e}"), src <= 1e-8);
    // ‖Σ ūⱼ⊗uⱼ‖ = n by dense SVD for each witness member
    let dense = members.iter().map(|m| (overlap_norm_svd(m, m).unwrap() - 8.0).abs()).fold(0.0, f64::max);
    c.that(format!("dense ||sum conj(u)(x)u|| = n to {dense:.2e}"), dense <= 1e-8);
    let rec = CertificateRecord::DnIdentity { experiment: "acceptance".into(), n: 8, big_n: 4, delta: 0.15, members, pairs: certs };
    c.that("certificates recheck from stored witnesses", rec.recheck().is_empty());
}

fn c11_concentration(c: &mut Checks) {
    let t = Instant::now();
    let tail = trace_tail_experiment(8, 8, 0.5, 10_000, seed("trace")).unwrap();
    c.that(format!("trace tail frequency {:.4} <= 0.05 (gaussian {:.4})", tail.frequency, tail.gaussian_prediction), tail.frequency <= 0.05);
    let avg = average_defect_constant(&[2, 4, 8, 16], 8, 50, 0.85, seed("avg")).unwrap();
    for r in &avg.rows {
        c.that(format!("n={}: mean/sqrt(n) = {:.3} <= 3", r.n, r.ratio), r.ratio <= 3.0);
    }
    let ce = identity_counterexample(2, 2, 0.5, 10_000, seed("counter")).unwrap();
    let floor = 10.0 * (-8.0f64).exp();
    c.that(format!("counterexample frequency {:.4} >= 10e^-8 = {floor:.5}", ce.frequency), ce.frequency >= floor);
    c.within("runtime", t.elapsed(), 600.0);
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c12_chains(c: &mut Checks) {
    let (theta, r, n) = (0.5, 1.9, 400.0);
    let low = lower_chain(400, theta, r).unwrap();
    let k_half = (theta * theta * n / 2.0).exp() / 4.0;
    let eta = 1.0 / (r * theta) - 1.0;
    let penalty = 4.0 / eta * n * n * n;
    let target = (theta * theta * n / 4.0).exp();
    let (kh, pen, tg) = (low.log_antichain.to_f64(), low.penalty.to_f64(), low.target.to_f64());
    c.that(format!("K/2 = {kh:.4e} ~ 1.30e21"), rel(kh, k_half) < 1e-12 && rel(kh, 1.30e21) < 5e-3);
    c.that(format!("penalty = {pen:.4e} ~ 4.87e9"), rel(pen, penalty) < 1e-12 && rel(pen, 4.87e9) < 5e-3);
    c.that(format!("target = {tg:.4e} ~ 7.2e10"), rel(tg, target) < 1e-12 && rel(tg, 7.2e10) < 5e-3);
    c.that("lower chain passes", low.passes && k_half - penalty >= target);

    let up = upper_chain(10, 0.5).unwrap();
    let log_n = 10.0 * 60f64.ln() * 5f64.powi(10);
    let got = up.log_covering.to_f64();
    c.that(format!("log N = {got:.4e} equals 10*5^10*ln60 ~ 4.00e8"), rel(got, log_n) < 1e-12 && rel(got, 4.00e8) < 5e-3);

    let hh = hh_iteration(8, 4, 2.0).unwrap();
    let ln_bound = hh.bound.ln_f64().unwrap();
    c.that(format!("m(8,4,2) <= exp({ln_bound}) = exp(4nN^2)"), (ln_bound - 4.0 * 8.0 * 16.0).abs() < 1e-9);

    for r in [1.5, 1.9, 3.0, 10.0] {
        let routes = liminf_routes(r).unwrap();
        let th = 1.0 / r;
        c.that(
            format!("r={r}: theta^2/2 = {:.15} = 1/(2r^2)", routes.chain_growth),
            (routes.chain_growth - th * th / 2.0).abs() < 1e-15 && (routes.closed_form - 1.0 / (2.0 * r * r)).abs() < 1e-15,
        );
    }
}

fn c13_reproducibility(c: &mut Checks) {
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        let a = run_experiment(&cfg).unwrap();
        // the embedded config alone must reproduce the report
        let back: bmlab::harness::ExperimentConfig =
            serde_json::from_value(serde_json::to_value(&a.report.config).unwrap()).unwrap();
        let b = run_experiment(&back).unwrap();
        c.that(format!("{name}: all checks pass"), a.report.all_passed);
        c.that(format!("{name}: bit-identical rerun"), a.report.without_timing().unwrap() == b.report.without_timing().unwrap());
        let value = serde_json::to_value(&a.report).unwrap();
        let v = verify_report_value(&value).unwrap();
        c.that(format!("{name}: verifies ({} certificates)", v.certificates_checked), v.ok && verify_report(&a.report).ok);
    }
    let mut report = serde_json::to_value(run_experiment(&preset("packing-desk").unwrap()).unwrap().report).unwrap();
    let ex = report["certificates"].as_array_mut().unwrap().iter_mut().find(|c| c["certificate"] == "ex_identity").unwrap();
    let w = &mut ex["pairs"][0]["certificate"]["witness"][0];
    *w = serde_json::json!(w.as_f64().unwrap() * 1.1);
    c.that("tampered witness fails verification", !verify_report_value(&report).unwrap().ok);
}

fn main() {
    let criteria: [(&str, fn(&mut Checks)); 13] = [
        ("Hoeffding consistency", c1_hoeffding),
        ("separated sign set", c2_sign_set),
        ("E_x certificates", c3_ex_certificates),
        ("norm sandwich", c4_sandwich),
        ("distance oracle agreement", c5_distances),
        ("l_inf embedding", c6_embedding),
        ("subspace nets", c7_subspace_net),
        ("expander identities", c8_identities),
        ("separated unitary family", c9_family),
        ("level-N certificates", c10_dn),
        ("concentration experiments", c11_concentration),
        ("arithmetic chains", c12_chains),
        ("reproducibility", c13_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut checks = Checks::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut checks)));
        let ok = outcome.is_ok() && checks.0.iter().all(|(_, p)| *p);
        println!("{} [{:>2}] {name} ({:.2}s)", if ok { "PASS" } else { "FAIL" }, i + 1, t.elapsed().as_secs_f64());
        for (what, p) in &checks.0 {
            println!("        {} {what}", if *p { "ok  " } else { "FAIL" });
        }
        if outcome.is_err() {
            println!("        FAIL panicked");
        }
        failed += usize::from(!ok);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
