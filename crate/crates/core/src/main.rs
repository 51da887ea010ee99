use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use bmlab::bmdist::{bm_exact_2d, bm_upper, claim_counter, greedy_packing, EXACT_2D_DEFAULT_TOL};
use bmlab::bounds::{
    default_spherical_gamma, hh_iteration, lower_chain, measure_chain, os_claim_counter, spherical_variant_bound,
    upper_chain, LogLevelNumber, DEFAULT_C_ASSUMED, DEFAULT_GAMMA_NET,
};
use bmlab::harness::{
    default_out_dir, preset, run_experiment, verify_report_path, write_outputs, ExperimentConfig, SpaceSpec, Table,
    OUT_DIR_ENV,
};
use bmlab::qexpander::{
    average_defect_constant, defect_kronecker, haar_tuple, identity_counterexample, overlap_norm, separated_family,
    trace_tail_experiment, SampleRow,
};
use bmlab::signset::{antichain_for, greedy_sign_set, AntichainMode, SignSetMode};
use bmlab::spaces::{embed_linf, make_ex, subspace_net, NetOptions};
use bmlab::{Error, Result};

#[derive(Parser)]
#[command(name = "bmlab", version, about = "Desk-scale experiments on the Banach-Mazur compactum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy θ-separated sign set.
    Signset(SignsetArgs),
    /// Space constructions.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Banach-Mazur distance bounds and packing.
    #[command(subcommand)]
    Bmdist(BmdistCmd),
    /// Haar unitary tuples and the concentration experiments.
    #[command(subcommand)]
    Qx(QxCmd),
    /// Log-level counting chains.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Run an experiment config and write its report.
    Run {
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Re-check every certificate of a report from its witnesses.
    Verify { report: PathBuf },
    /// Run a built-in config (or print it with --print-config).
    Preset {
        name: String,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Args)]
struct SignsetArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    theta: f64,
    #[arg(long, conflicts_with = "samples")]
    exhaustive: bool,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Space argument: `linf:D`, `l1:D`, `l2:D`, `polygon:SIDES` or a JSON file
/// holding a space spec.
#[derive(Clone)]
struct SpaceArg(SpaceSpec);

fn parse_space(s: &str) -> std::result::Result<SpaceArg, String> {
    if let Some((kind, arg)) = s.split_once(':') {
        let k: usize = arg.parse().map_err(|_| format!("bad size in {s:?}"))?;
        let spec = match kind {
            "linf" => SpaceSpec::LInf { dim: k },
            "l1" => SpaceSpec::L1 { dim: k },
            "l2" => SpaceSpec::L2 { dim: k },
            "polygon" => SpaceSpec::RegularPolygon { sides: k },
            _ => return Err(format!("unknown space kind {kind:?}")),
        };
        return Ok(SpaceArg(spec));
    }
    let text = std::fs::read_to_string(s).map_err(|e| format!("{s}: {e}"))?;
    serde_json::from_str(&text).map(SpaceArg).map_err(|e| format!("{s}: {e}"))
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// `E_x` for a sampled half-subset of an exhaustive sign set.
    MakeEx {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: f64,
        /// Explicit member indices; a sampled half-subset when absent.
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    EmbedLinf {
        #[arg(long, value_parser = parse_space)]
        space: SpaceArg,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    SubspaceNet {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_space)]
        space: SpaceArg,
        #[arg(long)]
        xi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum BmdistCmd {
    Upper {
        #[arg(long, value_parser = parse_space)]
        e: SpaceArg,
        #[arg(long, value_parser = parse_space)]
        f: SpaceArg,
        #[arg(long, default_value_t = 8)]
        effort: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Exact2d {
        #[arg(long, value_parser = parse_space)]
        e: SpaceArg,
        #[arg(long, value_parser = parse_space)]
        f: SpaceArg,
        #[arg(long, default_value_t = EXACT_2D_DEFAULT_TOL)]
        tol: f64,
    },
    /// Greedy packing of `E_x` spaces over a sampled antichain.
    Pack {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        members: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 8)]
        effort: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Claim {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        theta: f64,
    },
}

#[derive(Args)]
struct Dims {
    #[arg(long)]
    n: usize,
    #[arg(long = "N")]
    big_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum QxCmd {
    Sample(Dims),
    Defect(Dims),
    Overlap {
        #[command(flatten)]
        dims: Dims,
        /// Seed of the second tuple.
        #[arg(long)]
        other_seed: u64,
    },
    Family {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Tail {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Avgdefect {
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0.85)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Counterexample {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    Lower {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        r: f64,
    },
    Upper {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Neighbour count for operator spaces.
    Claim {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        delta: f64,
    },
    Measure {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        big_n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_C_ASSUMED)]
        c_assumed: f64,
        #[arg(long, default_value_t = DEFAULT_GAMMA_NET)]
        gamma: f64,
    },
    Hh {
        #[arg(long)]
        n: u64,
        #[arg(long = "N")]
        big_n: u64,
        #[arg(long)]
        r: f64,
    },
    Spherical {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        k_theta: f64,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn print<T: Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_samples(path: &Path, rows: &[SampleRow], column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "seed", "n", "N", column])?;
    for r in rows {
        w.write_record([r.index.to_string(), r.seed.to_string(), r.n.to_string(), r.big_n.to_string(), r.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn level(x: &LogLevelNumber) -> Value {
    json!({ "level": x.level(), "value": x.value() })
}

fn bounds_out<T: Serialize>(inputs: Value, intermediate: &T, result: &LogLevelNumber, flags: Value) -> Result<()> {
    print(&json!({ "inputs": inputs, "intermediate": intermediate, "result": level(result), "flags": flags }))
}

fn signset(a: SignsetArgs) -> Result<i32> {
    let mode = match a.samples {
        Some(count) if !a.exhaustive => SignSetMode::Sampled { count },
        _ => SignSetMode::Exhaustive,
    };
    let set = greedy_sign_set(a.n, a.theta, mode, a.seed)?;
    print(&json!({
        "n": set.n,
        "theta": set.theta,
        "size": set.len(),
        "exhaustive": set.exhaustive,
        "vectors": set.vectors,
    }))?;
    Ok(0)
}

fn space(cmd: SpaceCmd) -> Result<i32> {
    match cmd {
        SpaceCmd::MakeEx { n, theta, x, seed } => {
            let set = greedy_sign_set(n, theta, SignSetMode::Exhaustive, seed)?;
            let x = match x {
                Some(x) => x,
                None => antichain_for(&set, AntichainMode::Sampled { count: 1, seed })?.subsets.remove(0),
            };
            let e = make_ex(&set, &x)?;
            print(&json!({ "n": n, "theta": theta, "x": x, "label": e.label(), "functionals": e.functionals() }))?;
        }
        SpaceCmd::EmbedLinf { space, delta, samples, seed } => {
            let e = space.0.build()?;
            let emb = embed_linf(&e, delta, samples, &NetOptions { seed, ..NetOptions::default() })?;
            print(&json!({
                "m": emb.m,
                "delta": emb.delta,
                "functionals": emb.image.functionals(),
                "distortion": emb.distortion,
                "max_contraction_violation": emb.max_contraction_violation,
            }))?;
        }
        SpaceCmd::SubspaceNet { n, space, xi, seed } => {
            let x = space.0.build()?;
            let net = subspace_net(n, &x, xi, &NetOptions { seed, ..NetOptions::default() })?;
            let members: Vec<Value> = net
                .members
                .iter()
                .map(|(t, s)| json!({ "tuple": t, "functionals": s.functionals() }))
                .collect();
            print(&json!({
                "n": n,
                "xi": xi,
                "radius": net.radius,
                "ball_net": net.ball_net.points,
                "count_bound": net.count_bound,
                "skipped_degenerate": net.skipped_degenerate,
                "members": members,
            }))?;
        }
    }
    Ok(0)
}

fn bmdist(cmd: BmdistCmd) -> Result<i32> {
    match cmd {
        BmdistCmd::Upper { e, f, effort, seed } => {
            let up = bm_upper(&e.0.build()?, &f.0.build()?, effort, seed)?;
            print(&json!({
                "value": up.value,
                "bound_kind": "certified",
                "route": up.route,
                "witnesses": { "map": up.map },
                "details": up,
            }))?;
        }
        BmdistCmd::Exact2d { e, f, tol } => {
            let ex = bm_exact_2d(&e.0.build()?, &f.0.build()?, tol)?;
            print(&json!({
                "value": ex.value,
                "lower": ex.lower,
                "bound_kind": "certified",
                "witnesses": { "map": ex.map },
                "details": ex,
            }))?;
        }
        BmdistCmd::Pack { n, theta, members, r, effort, seed } => {
            let set = greedy_sign_set(n, theta, SignSetMode::Exhaustive, seed)?;
            let anti = antichain_for(&set, AntichainMode::Sampled { count: members, seed })?;
            let family = anti.subsets.iter().map(|x| make_ex(&set, x)).collect::<Result<Vec<_>>>()?;
            let report = greedy_packing(&family, r, effort, seed)?;
            print(&json!({
                "value": report.accepted.len(),
                "bound_kind": "heuristic",
                "subsets": anti.subsets,
                "witnesses": report.pair_certificates,
                "details": report,
            }))?;
        }
        BmdistCmd::Claim { n, r, theta } => {
            let c = claim_counter(n, r, theta)?;
            print(&json!({ "value": level(&c.bound), "bound_kind": "certified", "witnesses": c }))?;
        }
    }
    Ok(0)
}

fn maybe_csv(path: Option<PathBuf>, rows: &[SampleRow], column: &str) -> Result<()> {
    if let Some(p) = path {
        write_samples(&p, rows, column)?;
    }
    Ok(())
}

fn qx(cmd: QxCmd) -> Result<i32> {
    match cmd {
        QxCmd::Sample(d) => print(&haar_tuple(d.n, d.big_n, d.seed)?)?,
        QxCmd::Defect(d) => {
            let t = haar_tuple(d.n, d.big_n, d.seed)?;
            print(&json!({
                "n": d.n, "N": d.big_n, "seed": d.seed,
                "defect": t.defect(),
                "defect_kronecker": defect_kronecker(&t),
                "flagged": t.defect_flagged(),
            }))?;
        }
        QxCmd::Overlap { dims: d, other_seed } => {
            let s = haar_tuple(d.n, d.big_n, d.seed)?;
            let t = haar_tuple(d.n, d.big_n, other_seed)?;
            print(&json!({ "n": d.n, "N": d.big_n, "seeds": [d.seed, other_seed], "overlap": overlap_norm(&s, &t)? }))?;
        }
        QxCmd::Family { dims: d, epsilon, delta, samples, csv } => {
            let fam = separated_family(d.n, d.big_n, epsilon, delta, samples, d.seed)?;
            if let Some(p) = csv {
                let rows: Vec<SampleRow> = fam
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, t)| SampleRow { index: i, seed: t.seed().unwrap_or(0), n: d.n, big_n: d.big_n, value: t.defect() })
                    .collect();
                write_samples(&p, &rows, "defect")?;
            }
            print(&fam)?;
        }
        QxCmd::Tail { dims: d, s, samples, csv } => {
            let t = trace_tail_experiment(d.n, d.big_n, s, samples, d.seed)?;
            maybe_csv(csv, &t.rows, "normalized_trace")?;
            print(&t)?;
        }
        QxCmd::Avgdefect { n_list, big_n, samples, epsilon, seed, csv } => {
            let a = average_defect_constant(&n_list, big_n, samples, epsilon, seed)?;
            maybe_csv(csv, &a.samples_detail, "defect")?;
            print(&a)?;
        }
        QxCmd::Counterexample { dims: d, delta, samples, csv } => {
            let c = identity_counterexample(d.n, d.big_n, delta, samples, d.seed)?;
            maybe_csv(csv, &c.rows, "sum_norm")?;
            print(&c)?;
        }
    }
    Ok(0)
}

fn bounds(cmd: BoundsCmd) -> Result<i32> {
    match cmd {
        BoundsCmd::Lower { n, theta, r } => {
            let c = lower_chain(n, theta, r)?;
            bounds_out(json!({ "n": n, "theta": theta, "r": r }), &c, &c.packing_lower, json!({ "passes": c.passes }))?;
        }
        BoundsCmd::Upper { n, epsilon } => {
            let c = upper_chain(n, epsilon)?;
            bounds_out(json!({ "n": n, "epsilon": epsilon }), &c, &c.covering, json!({}))?;
        }
        BoundsCmd::Claim { n, r, delta } => {
            let c = os_claim_counter(n, r, delta)?;
            bounds_out(json!({ "n": n, "r": r, "delta": delta }), &c, &c.bound, json!({}))?;
        }
        BoundsCmd::Measure { n, big_n, delta, c_assumed, gamma } => {
            let c = measure_chain(n, big_n, delta, c_assumed, gamma)?;
            bounds_out(
                json!({ "n": n, "N": big_n, "delta": delta, "c_assumed": c_assumed, "gamma": gamma }),
                &c,
                &c.bound,
                json!({ "below_rate": c.below_rate }),
            )?;
        }
        BoundsCmd::Hh { n, big_n, r } => {
            let c = hh_iteration(n, big_n, r)?;
            bounds_out(json!({ "n": n, "N": big_n, "r": r }), &c, &c.bound, json!({ "condition_holds": c.condition_holds }))?;
        }
        BoundsCmd::Spherical { n, theta, k_theta, gamma } => {
            let gamma = gamma.unwrap_or_else(default_spherical_gamma);
            let c = spherical_variant_bound(n, theta, k_theta, gamma)?;
            bounds_out(
                json!({ "n": n, "theta": theta, "k_theta": k_theta, "gamma": gamma }),
                &c,
                &c.bound,
                json!({ "significant": c.significant }),
            )?;
        }
    }
    Ok(0)
}

fn run_config(config: &ExperimentConfig, out_dir: Option<PathBuf>) -> Result<i32> {
    let outcome = run_experiment(config)?;
    let path = write_outputs(&outcome, &out_dir.unwrap_or_else(default_out_dir))?;
    let failed = outcome.report.failed_checks();
    print(&json!({
        "report": path,
        "all_passed": outcome.report.all_passed,
        "experiments": outcome.report.results.len(),
        "certificates": outcome.report.certificates.len(),
        "tables": outcome.tables.iter().map(|t: &Table| t.name.clone()).collect::<Vec<_>>(),
        "failed_checks": failed,
    }))?;
    Ok(outcome.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Signset(a) => signset(a),
        Command::Space(c) => space(c),
        Command::Bmdist(c) => bmdist(c),
        Command::Qx(c) => qx(c),
        Command::Bounds(c) => bounds(c),
        Command::Run { config, out_dir } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", config.display())))?;
            run_config(&cfg, out_dir)
        }
        Command::Verify { report } => {
            let v = verify_report_path(&report)?;
            print(&v)?;
            Ok(if v.ok { 0 } else { 1 })
        }
        Command::Preset { name, out_dir, print_config } => {
            let cfg = preset(&name).map_err(|e| Error::Validation(e.to_string()))?;
            if print_config {
                print(&cfg)?;
                return Ok(0);
            }
            run_config(&cfg, out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidArgument(_) | Error::Validation(_) | Error::DimensionMismatch { .. } | Error::Json(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
