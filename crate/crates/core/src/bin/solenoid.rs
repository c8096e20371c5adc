use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use solenoid::decompose::{check_div_free, decompose_with_report, DecomposeParams, DEFAULT_DIV_THRESHOLD};
use solenoid::lift::{decompose_with_divergence, DivergencePair, LiftParams};
use solenoid::scenario::{Scenario, ScenarioKind};
use solenoid::threads::with_threads;
use solenoid::verify::{comparable, max_scalar_difference, run_verify, VerifyConfig, VerifyReport};
use solenoid::{make_panel, AtomicCharge, BoundingBox, CurveEnsemble, Error, FieldPanel, FlowConfig, ScalarAtomicMeasure};

#[derive(Parser)]
#[command(name = "solenoid", version, about = "Decompose atomic charges into weighted 1-Lipschitz curves")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in scenario charge (and its divergence, when known).
    Gen(GenArgs),
    /// Normalized panel divergence of a charge.
    CheckDiv(CheckDivArgs),
    /// Flow decomposition of a divergence-free charge.
    Decompose(DecomposeArgs),
    /// Decomposition of a charge with atomic divergence through a lift.
    LiftDecompose(LiftArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Print a report, or compare two reports ignoring their timestamps.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: ScenarioKind,
    /// Atoms per loop or segment (default 512 for loops, 64 for segments).
    #[arg(long)]
    atoms: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the divergence measure, for scenarios that have one.
    #[arg(long)]
    div: Option<PathBuf>,
}

#[derive(Args)]
struct PanelArgs {
    /// Seed of the random test panel.
    #[arg(long, default_value_t = 0)]
    panel_seed: u64,
    #[arg(long, default_value_t = 10)]
    fields: usize,
    #[arg(long, default_value_t = 10)]
    functions: usize,
}

#[derive(Args)]
struct CheckDivArgs {
    #[arg(long)]
    charge: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIV_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    panel: PanelArgs,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    curves: usize,
    /// RK4 step; ell/step must be an integer.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Export curve samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    panel: PanelArgs,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    charge: PathBuf,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    charge: PathBuf,
    #[arg(long)]
    div: PathBuf,
    #[arg(long, default_value_t = 64)]
    column_atoms: usize,
    /// Slab width (default 2 eps).
    #[arg(long)]
    slab: Option<f64>,
    #[arg(long, default_value_t = solenoid::lift::DEFAULT_CERTIFICATION_THRESHOLD)]
    certification_threshold: f64,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON configuration; missing keys take the acceptance defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance_scale: Option<f64>,
    /// Comma-separated criterion numbers.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Largest scalar difference accepted by --compare.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Json(_) => 3,
            Error::Uncertified { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<u8, Failure>;

fn parse_scenario(s: &str) -> std::result::Result<ScenarioKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Any failure while loading an input file is an input error.
fn load<T>(path: &Path, read: impl FnOnce(&Path) -> solenoid::Result<T>) -> std::result::Result<T, Failure> {
    read(path).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_json(path: &Path, v: &Value) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(Error::from)?;
    Ok(())
}

fn seed_override(seed: u64) -> std::result::Result<u64, Failure> {
    match std::env::var("SOLENOID_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Failure {
            code: 2,
            message: format!("SOLENOID_SEED is not an unsigned integer: '{s}'"),
        }),
        Err(_) => Ok(seed),
    }
}

fn timestamp(started: Instant) -> Value {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({ "unix_seconds": unix, "elapsed_seconds": started.elapsed().as_secs_f64() })
}

fn panel_for(dim: usize, points: Vec<&[f64]>, margin: f64, args: &PanelArgs) -> solenoid::Result<FieldPanel> {
    let bx = if points.is_empty() {
        BoundingBox::cube(dim, 1.0)?
    } else {
        BoundingBox::around(dim, points, margin)?
    };
    make_panel(args.panel_seed, args.fields, args.functions, &bx)
}

fn write_ensemble(nu: &CurveEnsemble, out: &Option<PathBuf>, csv: &Option<PathBuf>) -> std::result::Result<(), Failure> {
    if let Some(path) = out {
        nu.write(path)?;
    }
    if let Some(path) = csv {
        let f = File::create(path).map_err(Error::from)?;
        nu.write_csv(BufWriter::new(f))?;
    }
    Ok(())
}

fn gen(a: GenArgs) -> CliResult {
    let mut s = Scenario::new(a.scenario).with_seed(seed_override(a.seed)?);
    if let Some(n) = a.atoms {
        s.atoms = n;
    }
    s.radius = a.radius;
    let (mu, sigma) = s.generate()?;
    mu.write(&a.out)?;
    if let Some(path) = a.div {
        match sigma {
            Some(sigma) => sigma.write(&path)?,
            None => {
                return Err(Failure {
                    code: 2,
                    message: format!("scenario {} has no atomic divergence", a.scenario),
                })
            }
        }
    }
    println!("{}: {} atoms, Var = {}", a.scenario, mu.len(), mu.total_variation());
    Ok(0)
}

fn check_div(a: CheckDivArgs) -> CliResult {
    let mu = load(&a.charge, |p| AtomicCharge::read(p))?;
    let panel = panel_for(mu.dim(), mu.atoms().iter().map(|x| x.position.as_slice()).collect(), 0.5, &a.panel)?;
    let d = check_div_free(&mu, &panel)?;
    let ok = d <= a.threshold;
    println!("normalized divergence {d:.6e} (threshold {}) {}", a.threshold, if ok { "PASS" } else { "FAIL" });
    Ok(if ok { 0 } else { 1 })
}

fn decompose_params(f: &FlowArgs, seed: u64) -> solenoid::Result<DecomposeParams> {
    DecomposeParams::new(f.eps, f.curves, FlowConfig::with_default_record(f.ell, f.step)?, seed)
}

fn decompose(a: DecomposeArgs) -> CliResult {
    let started = Instant::now();
    let mu = load(&a.charge, |p| AtomicCharge::read(p))?;
    let p = decompose_params(&a.flow, seed_override(a.flow.seed)?)?;
    let panel = panel_for(mu.dim(), mu.atoms().iter().map(|x| x.position.as_slice()).collect(), 5.0 * p.epsilon, &a.flow.panel)?;
    let (nu, report) = decompose_with_report(&mu, &p, &panel)?;
    write_ensemble(&nu, &a.flow.out, &a.flow.csv)?;
    let mass_ok = report.mass.relative_error <= 1e-12;
    println!(
        "{} curves, mass {} (expected {}), mean length / ell {:.4}, divergence check {:.3e}",
        nu.len(),
        report.mass.ensemble_mass,
        report.mass.expected,
        report.lengths.mean_over_ell,
        report.divergence_check
    );
    if let Some(path) = &a.flow.report {
        write_json(path, &json!({ "command": "decompose", "report": report, "timestamp": timestamp(started) }))?;
    }
    Ok(if mass_ok { 0 } else { 1 })
}

fn lift_decompose(a: LiftArgs) -> CliResult {
    let started = Instant::now();
    let mu = load(&a.charge, |p| AtomicCharge::read(p))?;
    let sigma = load(&a.div, |p| ScalarAtomicMeasure::read(p))?;
    let inner = decompose_params(&a.flow, seed_override(a.flow.seed)?)?;
    let mut p = LiftParams::new(a.flow.ell, a.column_atoms, a.slab.unwrap_or(2.0 * inner.epsilon), inner)?;
    p.certification_threshold = a.certification_threshold;
    let points: Vec<&[f64]> = mu
        .atoms()
        .iter()
        .map(|x| x.position.as_slice())
        .chain(sigma.atoms().iter().map(|s| s.position.as_slice()))
        .collect();
    let panel = panel_for(mu.dim(), points, 5.0 * inner.epsilon, &a.flow.panel)?;
    let pair = DivergencePair::certify(mu, sigma, &panel)?;
    let out = decompose_with_divergence(&pair, &p, &panel)?;
    write_ensemble(&out.ensemble, &a.flow.out, &a.flow.csv)?;
    let r = &out.report;
    println!(
        "{} of {} lifted curves kept, weight {} + {} (expected {}), certification {:.3e}, lift divergence {:.3e}",
        r.mass.kept_curves,
        r.mass.kept_curves + r.mass.discarded_curves,
        r.mass.kept_weight,
        r.mass.discarded_weight,
        r.mass.expected_total,
        r.certification,
        r.lift_divergence
    );
    if let Some(path) = &a.flow.report {
        write_json(path, &json!({ "command": "lift-decompose", "report": r, "timestamp": timestamp(started) }))?;
    }
    Ok(if r.mass.relative_error <= 1e-12 { 0 } else { 1 })
}

fn verify(a: VerifyArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(path) => load(path, |p| VerifyConfig::from_json(&std::fs::read_to_string(p)?))?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.seed = seed_override(cfg.seed)?;
    if let Some(t) = a.tolerance_scale {
        cfg.tolerance_scale = t;
    }
    if !a.only.is_empty() {
        cfg.only = a.only;
    }
    let report = run_verify(&cfg)?;
    print!("{}", report.summary());
    if !report.failing.is_empty() {
        println!("failing checks:");
        for f in &report.failing {
            println!("  {f}");
        }
    }
    if let Some(path) = &a.report {
        std::fs::write(path, report.to_json()? + "\n").map_err(Error::from)?;
    }
    Ok(report.exit_code() as u8)
}

fn report(a: ReportArgs) -> CliResult {
    let read_json = |p: &Path| -> solenoid::Result<Value> { Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?) };
    let doc = load(&a.input, read_json)?;
    let Some(other) = &a.compare else {
        match serde_json::from_value::<VerifyReport>(doc.clone()) {
            Ok(r) => print!("{}", r.summary()),
            Err(_) => println!("{}", serde_json::to_string_pretty(&comparable(&doc)).map_err(Error::from)?),
        }
        return Ok(0);
    };
    let other = load(other, read_json)?;
    let (x, y) = (comparable(&doc), comparable(&other));
    if x == y {
        println!("identical (timestamp excluded)");
        return Ok(0);
    }
    match max_scalar_difference(&x, &y) {
        Some(d) if d <= a.tolerance => {
            println!("max scalar difference {d:.3e} within {}", a.tolerance);
            Ok(0)
        }
        Some(d) => {
            println!("max scalar difference {d:.3e} exceeds {}", a.tolerance);
            Ok(1)
        }
        None => {
            println!("reports differ in structure or non-numeric content");
            Ok(1)
        }
    }
}

fn main() -> ExitCode {
    let Cli { threads, command } = Cli::parse();
    let run = move || match command {
        Command::Gen(a) => gen(a),
        Command::CheckDiv(a) => check_div(a),
        Command::Decompose(a) => decompose(a),
        Command::LiftDecompose(a) => lift_decompose(a),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
    };
    let outcome = match with_threads(threads, run) {
        Ok(r) => r,
        Err(e) => Err(Failure::from(e)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
