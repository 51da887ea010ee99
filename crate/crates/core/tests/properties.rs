use std::sync::OnceLock;

use proptest::prelude::*;

use bmlab::bmdist::{identity_certificate_with, LinearMapBetween};
use bmlab::harness::{run_experiment, verify_report, CertificateRecord, ExPair, ExperimentConfig, Report};
use bmlab::linalg::RMat;
use bmlab::signset::{antichain_for, exact_sign_tail, greedy_sign_set, hoeffding_tail, AntichainMode, SignSet, SignSetMode};
use bmlab::spaces::{make_ex, PolytopalSpace};

fn set8() -> &'static SignSet {
    static SET: OnceLock<SignSet> = OnceLock::new();
    SET.get_or_init(|| greedy_sign_set(8, 0.5, SignSetMode::Exhaustive, 3).unwrap())
}

fn half_subsets() -> &'static Vec<Vec<usize>> {
    static SUBSETS: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    SUBSETS.get_or_init(|| antichain_for(set8(), AntichainMode::Sampled { count: 64, seed: 5 }).unwrap().subsets)
}

fn ex_record(pairs: Vec<ExPair>) -> Report {
    let mut report = run_experiment(&empty()).unwrap().report;
    report.certificates = vec![CertificateRecord::ExIdentity { experiment: "p".into(), set: set8().clone(), pairs }];
    report
}

fn empty() -> ExperimentConfig {
    ExperimentConfig { name: "p".into(), seed: 0, report_path: None, csv_dir: None, experiments: vec![] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_tail_never_exceeds_hoeffding(n in 1usize..=24, theta in 0.01f64..0.99) {
        let exact = exact_sign_tail(n, theta).unwrap().probability;
        prop_assert!(exact <= hoeffding_tail(theta, n).unwrap());
    }

    #[test]
    fn ex_norm_is_sandwiched(idx in 0usize..64, a in prop::collection::vec(-10.0f64..10.0, 8)) {
        let subsets = half_subsets();
        let e = make_ex(set8(), &subsets[idx % subsets.len()]).unwrap();
        let norm = e.norm(&a).unwrap();
        let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sum: f64 = a.iter().map(|v| v.abs()).sum();
        prop_assert!(sup <= norm && norm <= sum * (1.0 + 1e-12));
    }

    #[test]
    fn identity_certificates_beat_one_over_theta(i in 0usize..1000, j in 0usize..1000) {
        let subsets = half_subsets();
        let (i, j) = (i % subsets.len(), j % subsets.len());
        prop_assume!(i != j);
        let (x, y) = (&subsets[i], &subsets[j]);
        let (ex, ey) = (make_ex(set8(), x).unwrap(), make_ex(set8(), y).unwrap());
        let c = identity_certificate_with(set8(), x, y, &ex, &ey).unwrap();
        prop_assert_eq!(c.source_norm, 8.0);
        prop_assert!(c.target_norm <= 4.0);
        prop_assert!(c.implied_ratio >= 2.0);
    }

    #[test]
    fn scaled_witness_entry_is_rejected(i in 0usize..1000, j in 0usize..1000, k in 0usize..8, f in 1.01f64..3.0) {
        let subsets = half_subsets();
        let (i, j) = (i % subsets.len(), j % subsets.len());
        prop_assume!(i != j);
        let (x, y) = (&subsets[i], &subsets[j]);
        let (ex, ey) = (make_ex(set8(), x).unwrap(), make_ex(set8(), y).unwrap());
        let c = identity_certificate_with(set8(), x, y, &ex, &ey).unwrap();
        let pair = ExPair { x: x.clone(), y: y.clone(), certificate: c };
        prop_assert!(verify_report(&ex_record(vec![pair.clone()])).ok);
        let mut bad = pair;
        bad.certificate.witness[k] *= f;
        prop_assert!(!verify_report(&ex_record(vec![bad])).ok);
    }

    #[test]
    fn map_distortion_is_at_least_one(m in prop::collection::vec(-3.0f64..3.0, 4)) {
        let u = RMat::from_row_slice(2, 2, &m);
        prop_assume!(u.determinant().abs() > 1e-3);
        let (e, f) = (PolytopalSpace::l_1(2).unwrap(), PolytopalSpace::l_inf(2));
        let d = LinearMapBetween::new(&u, &e, &f).unwrap().distortion_upper();
        prop_assert!(d >= 1.0 - 1e-12);
    }
}
