//! `gmnl`: membership, bounds, thresholds and quantum optimization for
//! tripartite binary behaviors.
//!
//! Exit status: 0 on success (and "member" for `classify`), 1 for a
//! nonmember or a failed verification, 2 for usage and runtime errors.
//! Tables go to stdout; certificates, behaviors, angle files and reports
//! are written only to the paths given.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gmnl::behavior::AnyBehavior;
use gmnl::fixtures;
use gmnl::inequalities::{
    expr_ghz_witness, expr_i, expr_i_ab, expr_i_ba, verify_bound, verify_facet, BellExpression, Catalog,
};
use gmnl::membership::{classify, CertificateFile, LocalityClass, Verdict};
use gmnl::quantum::{
    born_behavior, expression_value, coefficients_f64, optimize_threshold, scan_pure_states,
    seesaw_maximize, seesaw_state_and_measurements, Measurements, QuantumScenario, QuantumState,
};
use gmnl::{Behavior, Mode, Scalar};

#[derive(Parser)]
#[command(name = "gmnl", version, about = "Genuine multipartite nonlocality toolkit for three parties")]
struct Cli {
    /// Worker threads for parallel solves and restarts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide membership of a behavior file in a class and write the certificate.
    Classify(ClassifyArgs),
    /// Exact maximum of an inequality over NS₂, T₂ and S₂ (or one class).
    Maximize(MaximizeArgs),
    /// Value of an inequality on a behavior file.
    Evaluate(EvaluateArgs),
    /// Smallest visibility of a noisy GHZ or W state that leaves a class.
    Threshold(ThresholdArgs),
    /// Behavior and inequality value of a state under given measurement angles.
    QuantumEval(QuantumEvalArgs),
    /// Seesaw maximization of an inequality over measurements (and optionally the state).
    QuantumOptimize(QuantumOptimizeArgs),
    /// Recompute catalog bounds and optionally check facets.
    CatalogVerify(CatalogVerifyArgs),
    /// Seesaw the inequality I over a grid of pure states.
    Scan(ScanArgs),
    /// Write the built-in example behaviors as behavior files.
    FixturesExport(FixturesExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rational,
    Double,
}

#[derive(Clone, Copy, ValueEnum)]
enum StateArg {
    Ghz,
    W,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Behavior file.
    behavior: PathBuf,
    /// local, ns2, t2, k2, s2 or ns.
    #[arg(long)]
    class: LocalityClass,
    /// Arithmetic (default: the file's own mode).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Certificate path (default: <behavior stem>.<class>.cert.json next to the input).
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Args)]
struct InequalityArgs {
    /// Catalog family number.
    #[arg(long, conflicts_with = "ineq")]
    family: Option<u32>,
    /// Inequality: a family number, i, i-ab, i-ba, ghz-witness, or a catalog-format file.
    #[arg(long)]
    ineq: Option<String>,
}

#[derive(Args)]
struct MaximizeArgs {
    #[command(flatten)]
    inequality: InequalityArgs,
    /// Single class (default: ns2, t2 and s2).
    #[arg(long)]
    class: Option<LocalityClass>,
}

#[derive(Args)]
struct EvaluateArgs {
    behavior: PathBuf,
    #[command(flatten)]
    inequality: InequalityArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, value_enum)]
    state: StateArg,
    #[arg(long)]
    class: LocalityClass,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Write the optimal measurement angles here.
    #[arg(long)]
    angles: Option<PathBuf>,
}

#[derive(Args)]
struct QuantumEvalArgs {
    /// ghz, w, mixed or 8 comma-separated real amplitudes; append @p for white noise.
    #[arg(long)]
    state: String,
    /// Angle file.
    #[arg(long)]
    angles: PathBuf,
    /// Inequality: a family number, i, i-ab, i-ba, ghz-witness, or a catalog-format file.
    #[arg(long)]
    ineq: Option<String>,
    /// Write the behavior file here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuantumOptimizeArgs {
    /// Same syntax as quantum-eval; ignored with --joint.
    #[arg(long, default_value = "ghz")]
    state: String,
    #[arg(long)]
    ineq: String,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimize the pure state as well.
    #[arg(long)]
    joint: bool,
    /// Write the optimal angles here.
    #[arg(long)]
    angles: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogVerifyArgs {
    /// Catalog file (default: the built-in catalog).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// "all" or a list such as 1-20,99,184.
    #[arg(long, default_value = "all")]
    families: String,
    /// Also check that each family is a facet of NS₂.
    #[arg(long)]
    facets: bool,
}

#[derive(Args)]
struct ScanArgs {
    /// Points per parameter (at least 2).
    #[arg(long, value_parser = clap::value_parser!(u16).range(2..))]
    grid: u16,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Report path.
    #[arg(long, default_value = "scan_report.txt")]
    report: PathBuf,
}

#[derive(Args)]
struct FixturesExportArgs {
    #[arg(long, default_value = "fixtures")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Classify(a) => cmd_classify(a),
        Command::Maximize(a) => cmd_maximize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::QuantumEval(a) => cmd_quantum_eval(a),
        Command::QuantumOptimize(a) => cmd_quantum_optimize(a),
        Command::CatalogVerify(a) => cmd_catalog_verify(a),
        Command::Scan(a) => cmd_scan(a),
        Command::FixturesExport(a) => cmd_fixtures_export(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_behavior(path: &Path) -> Result<AnyBehavior> {
    AnyBehavior::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_classify(a: ClassifyArgs) -> Result<bool> {
    let behavior = read_behavior(&a.behavior)?;
    let mode = match (a.mode, &behavior) {
        (Some(ModeArg::Rational), _) | (None, AnyBehavior::Rational(_)) => Mode::Rational,
        _ => Mode::Double,
    };
    let (file, member, detail) = match mode {
        Mode::Rational => {
            let b = match behavior {
                AnyBehavior::Rational(b) => b,
                AnyBehavior::Double(b) => Behavior::new(b.entries().iter().map(Scalar::to_rational).collect())?,
            };
            decide(&b, a.class, 0.0)?
        }
        Mode::Double => decide(&behavior.to_f64(), a.class, 1e-7)?,
    };
    let path = a.certificate.unwrap_or_else(|| {
        let mut name = a.behavior.file_stem().unwrap_or_default().to_os_string();
        name.push(format!(".{}.cert.json", a.class));
        a.behavior.with_file_name(name)
    });
    write(&path, &file.to_json())?;
    println!("{:<6} {:<10} {}", a.class.tag(), if member { "member" } else { "nonmember" }, detail);
    println!("certificate: {}", path.display());
    Ok(member)
}

fn decide<T: Scalar>(b: &Behavior<T>, class: LocalityClass, tol: f64) -> Result<(CertificateFile, bool, String)> {
    let verdict = classify(b, class)?;
    let detail = match &verdict {
        Verdict::Member(c) => {
            c.verify(b, tol)?;
            format!("{} weights", c.weights.len())
        }
        Verdict::Nonmember(f) => {
            f.verify(b, class, tol)?;
            format!("violation {}", f.gap.to_text())
        }
    };
    Ok((CertificateFile::new(class, &verdict), verdict.is_member(), detail))
}

fn load_inequality(spec: &str) -> Result<BellExpression> {
    let spec = spec.trim();
    Ok(match spec {
        "i" => expr_i().to_correlator_basis(),
        "i-ab" => expr_i_ab(),
        "i-ba" => expr_i_ba(),
        "ghz-witness" => expr_ghz_witness(),
        _ => {
            if let Ok(family) = spec.parse::<u32>() {
                Catalog::embedded().get(family)?.expression.clone()
            } else {
                let catalog = Catalog::from_jsonl(&read(Path::new(spec))?)?;
                match catalog.entries() {
                    [one] => one.expression.clone(),
                    _ => bail!("{spec} must hold exactly one record"),
                }
            }
        }
    })
}

fn resolve(a: &InequalityArgs) -> Result<BellExpression> {
    match (a.family, &a.ineq) {
        (Some(f), _) => Ok(Catalog::embedded().get(f)?.expression.clone()),
        (None, Some(spec)) => load_inequality(spec),
        (None, None) => bail!("give --family or --ineq"),
    }
}

fn cmd_maximize(a: MaximizeArgs) -> Result<bool> {
    let expr = resolve(&a.inequality)?;
    let classes = match a.class {
        Some(c) => vec![c],
        None => vec![LocalityClass::Ns2, LocalityClass::T2, LocalityClass::S2],
    };
    println!("{:<6} {:>14} {:>14}", "class", "bound", "decimal");
    for class in classes {
        let m = expr.maximize(class)?;
        println!("{:<6} {:>14} {:>14.9}", class.tag(), m.value.to_text(), m.value.to_f64());
    }
    Ok(true)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<bool> {
    let expr = resolve(&a.inequality)?;
    match read_behavior(&a.behavior)? {
        AnyBehavior::Rational(b) => {
            let v = expr.evaluate(&b);
            println!("{} ({:.12})", v.to_text(), v.to_f64());
        }
        AnyBehavior::Double(b) => println!("{:.12}", expr.evaluate(&b)),
    }
    Ok(true)
}

fn print_angles(m: &Measurements) {
    println!("{:<6} {:>8} {:>12} {:>12}", "party", "setting", "theta", "phi");
    for (p, party) in ["A", "B", "C"].iter().enumerate() {
        for (s, o) in m.settings[p].iter().enumerate() {
            println!("{party:<6} {s:>8} {:>12.8} {:>12.8}", o.theta(), o.phi());
        }
    }
}

fn cmd_threshold(a: ThresholdArgs) -> Result<bool> {
    let state = match a.state {
        StateArg::Ghz => QuantumState::ghz(),
        StateArg::W => QuantumState::w(),
    };
    let search = optimize_threshold(&state, a.class, a.restarts, a.seed)?;
    println!("threshold {:.6} ({} restarts, seed {})", search.p, a.restarts, a.seed);
    print_angles(&search.measurements);
    if let Some(path) = a.angles {
        write(&path, &search.measurements.to_angle_file())?;
    }
    Ok(true)
}

fn parse_state(spec: &str) -> Result<QuantumState> {
    let (base, noise) = match spec.split_once('@') {
        Some((s, p)) => (s.trim(), Some(p.trim().parse::<f64>().context("noise weight")?)),
        None => (spec.trim(), None),
    };
    let state = match base {
        "ghz" => QuantumState::ghz(),
        "w" => QuantumState::w(),
        "mixed" => QuantumState::maximally_mixed(),
        _ => {
            let amps: Vec<f64> = base
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("state {spec:?}: expected ghz, w, mixed or 8 amplitudes"))?;
            let amps: [f64; 8] = amps.try_into().map_err(|_| anyhow::anyhow!("expected 8 amplitudes"))?;
            QuantumState::from_amplitudes(amps)?
        }
    };
    Ok(match noise {
        Some(p) => state.with_white_noise(p)?,
        None => state,
    })
}

fn cmd_quantum_eval(a: QuantumEvalArgs) -> Result<bool> {
    let state = parse_state(&a.state)?;
    let measurements = Measurements::from_angle_file(&read(&a.angles)?)?;
    let scenario = QuantumScenario { state, measurements };
    let b = born_behavior(&scenario)?;
    if let Some(path) = &a.out {
        write(path, &b.to_json())?;
    }
    if let Some(spec) = &a.ineq {
        let expr = load_inequality(spec)?;
        println!("{:.9}", expr.evaluate(&b));
    }
    Ok(true)
}

fn cmd_quantum_optimize(a: QuantumOptimizeArgs) -> Result<bool> {
    let expr = load_inequality(&a.ineq)?;
    let measurements = if a.joint {
        let r = seesaw_state_and_measurements(&expr, a.restarts, a.seed);
        println!("value {:.9} (state and measurements, {} restarts, seed {})", r.value, a.restarts, a.seed);
        r.measurements
    } else {
        let state = parse_state(&a.state)?;
        let r = seesaw_maximize(&expr, &state, a.restarts, a.seed);
        let check = expression_value(&coefficients_f64(&expr), &state.pauli_tensor(), &r.measurements);
        println!("value {:.9} ({} restarts, seed {})", check, a.restarts, a.seed);
        r.measurements
    };
    print_angles(&measurements);
    if let Some(path) = a.angles {
        write(&path, &measurements.to_angle_file())?;
    }
    Ok(true)
}

fn parse_families(spec: &str, catalog: &Catalog) -> Result<Vec<u32>> {
    if spec.trim() == "all" {
        return Ok(catalog.entries().iter().map(|e| e.family).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u32, u32) = (lo.trim().parse()?, hi.trim().parse()?);
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().with_context(|| format!("family {part:?}"))?),
        }
    }
    Ok(out)
}

fn cmd_catalog_verify(a: CatalogVerifyArgs) -> Result<bool> {
    let owned;
    let catalog = match &a.catalog {
        Some(path) => {
            owned = Catalog::from_jsonl(&read(path)?)?;
            &owned
        }
        None => Catalog::embedded(),
    };
    let families = parse_families(&a.families, catalog)?;
    let classes = [LocalityClass::Ns2, LocalityClass::T2, LocalityClass::S2];
    print!("{:>6}", "family");
    for c in classes {
        print!(" {:>18}", c.tag());
    }
    println!("{}", if a.facets { "  facet" } else { "" });
    let mut all_ok = true;
    for family in families {
        print!("{family:>6}");
        for class in classes {
            let check = verify_bound(catalog, family, class)?;
            let cell = match &check.declared {
                None => format!("{} (-)", check.computed.to_text()),
                Some(_) if check.passed() => format!("{} ok", check.computed.to_text()),
                Some(d) => {
                    all_ok = false;
                    format!("{}!={} FAIL", check.computed.to_text(), d.to_text())
                }
            };
            print!(" {cell:>18}");
        }
        if a.facets {
            let f = verify_facet(catalog, family)?;
            all_ok &= f.is_facet();
            let rank = f.rank.map_or("-".into(), |r| r.to_string());
            print!("  rank {rank}/{} {}", f.dimension - 1, if f.is_facet() { "ok" } else { "FAIL" });
        }
        println!();
    }
    println!("{}", if all_ok { "all checks passed" } else { "some checks FAILED" });
    Ok(all_ok)
}

fn cmd_scan(a: ScanArgs) -> Result<bool> {
    let report = scan_pure_states(a.grid as usize, &expr_i(), a.restarts, a.seed)?;
    write(&a.report, &report.to_text())?;
    let bad = report.non_violating();
    println!(
        "grid {}: tested {}, skipped {}, minimum violation {}",
        a.grid,
        report.tested().count(),
        report.skipped(),
        report.min_value().map_or("none".into(), |v| format!("{v:.6e}"))
    );
    for p in &bad {
        println!("no violation found: {}", p.params);
    }
    println!("report: {}", a.report.display());
    Ok(bad.is_empty())
}

fn cmd_fixtures_export(a: FixturesExportArgs) -> Result<bool> {
    for path in fixtures::export(&a.dir)? {
        println!("{}", path.display());
    }
    Ok(true)
}
