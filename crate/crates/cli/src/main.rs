//! Command-line surface. Every subcommand reads a system description,
//! runs one pipeline stage, prints a human summary, and writes a
//! machine-readable report: JSON for structured results, CSV for series.
//! Reports are deterministic given identical inputs and seed. Exit status:
//! 0 on success, 2 when a mathematical precondition fails (resonance,
//! instability, certificate, residual), 1 on any other error.

mod records;
mod report;
mod sec5;

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use koopman_core::bilinearize::{
    bilinearize, simulate_bilinear, BilinearizeOptions, Schedule, SimulateOptions,
};
use koopman_core::conditions::{
    check_all, scan_parameter_resonances, FlagReason, Order, PointStatus,
};
use koopman_core::defaults;
use koopman_core::flow::{flow_map, IntegratorConfig};
use koopman_core::gedmd::{eigenfunctions_from_generator, fit_generator, Dictionary};
use koopman_core::linearize::{
    continuity_sweep, linearize_parameterized, verify_conjugacy, PullbackConfig, SolveOptions,
    VerifyOptions,
};
use koopman_core::polyfield::ControlAffineSystem;
use koopman_core::sampling::sample_box;
use koopman_core::spectral::eigen_decompose;
use report::fmt_float;

#[derive(Parser)]
#[command(
    name = "koopman",
    version,
    about = "Global linearization and bilinearization of polynomial control-affine systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nonresonance and spectral-spread report for the frozen-input Jacobian
    Check(CheckArgs),
    /// Solve for the linearizing map at one input value and save it
    Linearize(LinearizeArgs),
    /// Sample-based conjugacy verification of the linearizing map
    Verify(VerifyArgs),
    /// Shrinking-perturbation continuity sweep of the map in the input
    Sweep(SweepArgs),
    /// Scan an input grid for resonant parameter values
    ResonanceScan(ScanArgs),
    /// Build a certified bilinear model z' = Az + sum u_i B_i z
    Bilinearize(BilinearizeArgs),
    /// Integrate the true system under a piecewise-constant input
    Simulate(SimulateArgs),
    /// Run the bilinear model against the true system and report the gap
    SimulateBilinear(SimulateBilinearArgs),
    /// Fit the generator on a monomial dictionary and match eigenfunctions
    Gedmd(GedmdArgs),
    /// Run the worked two-state example end to end and assert its goldens
    ExampleSec5(Sec5Args),
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    /// Input value, comma-separated per channel; defaults to zero
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    /// Check the unbounded-order variant instead of order k
    #[arg(long)]
    inf: bool,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    #[arg(long, default_value = "check.json")]
    out: PathBuf,
}

#[derive(Args)]
struct LinearizeArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    /// Override the pull-back horizon (0 = evaluate the polynomial only)
    #[arg(long, value_name = "F")]
    pullback_horizon: Option<f64>,
    #[arg(long, default_value = "linearize.json")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    #[arg(long, default_value_t = defaults::SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_name = "F")]
    pullback_horizon: Option<f64>,
    #[arg(long, default_value = "verify.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    /// Base input value; defaults to zero
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    /// Perturbation direction in input space; defaults to the first axis
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [0.1, 0.05, 0.025, 0.0125]
    )]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    /// Evaluation grid size for the map gap
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    /// Grid LO:HI:STEP over a single input channel
    #[arg(long, value_name = "LO:HI:STEP", value_parser = parse_grid_spec, allow_hyphen_values = true)]
    u_grid: GridSpec,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    /// Gap threshold for a direct flag
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value = "resonance-scan.json")]
    out: PathBuf,
}

#[derive(Args)]
struct BilinearizeArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    #[arg(long, default_value_t = defaults::LIE_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = defaults::LIE_DEGREE_CAP)]
    degree_cap: u32,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    #[arg(long, default_value_t = defaults::RANK_TOL)]
    rank_tol: f64,
    /// Verification sample count (0 = automatic)
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = defaults::BILINEAR_RESIDUAL)]
    residual_threshold: f64,
    /// Build the model even without an isomorphic certificate
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = "bilinearize.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", required = true, allow_hyphen_values = true)]
    x0: Vec<f64>,
    /// Piecewise-constant input "t:u1[,u2..];t:u1[,u2..]" starting at t=0
    #[arg(long, value_name = "SPEC", value_parser = parse_schedule, allow_hyphen_values = true)]
    schedule: Option<Schedule>,
    /// Constant input; mutually exclusive with --schedule
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", conflicts_with = "schedule", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    #[arg(long, default_value_t = 121)]
    grid_points: usize,
    #[arg(long, default_value = "simulate.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateBilinearArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", required = true, allow_hyphen_values = true)]
    x0: Vec<f64>,
    /// Piecewise-constant input "t:u1[,u2..];t:u1[,u2..]" starting at t=0
    #[arg(long, value_name = "SPEC", value_parser = parse_schedule, allow_hyphen_values = true)]
    schedule: Option<Schedule>,
    /// Constant input; mutually exclusive with --schedule
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", conflicts_with = "schedule", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5.0)]
    horizon: f64,
    #[arg(long, default_value_t = defaults::ORDER_K)]
    k: u32,
    #[arg(long, default_value_t = defaults::DENOMINATOR_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 121)]
    grid_points: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    force: bool,
    #[arg(long, value_name = "F")]
    pullback_horizon: Option<f64>,
    #[arg(long, default_value = "simulate-bilinear.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GedmdArgs {
    #[arg(long, value_name = "PATH")]
    system: PathBuf,
    #[arg(long, value_delimiter = ',', value_name = "F[,F...]", allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
    /// Monomial dictionary: every monomial of degree 1..=D
    #[arg(long, default_value_t = 2, value_name = "D")]
    dict_degree: u32,
    /// Sample count (raised to 2x the dictionary size if below it)
    #[arg(long, default_value_t = defaults::SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "gedmd.json")]
    out: PathBuf,
}

#[derive(Args)]
struct Sec5Args {
    /// Family parameter of the worked example
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value = "example-sec5.json")]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct GridSpec {
    lo: f64,
    hi: f64,
    step: f64,
}

impl GridSpec {
    fn points(&self) -> Vec<Vec<f64>> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|j| vec![self.lo + self.step * j as f64]).collect()
    }
}

fn parse_grid_spec(text: &str) -> std::result::Result<GridSpec, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err("expected LO:HI:STEP".into());
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("LO: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("HI: {e}"))?;
    let step: f64 = parts[2].parse().map_err(|e| format!("STEP: {e}"))?;
    if !(step > 0.0) || hi < lo {
        return Err("need STEP > 0 and HI >= LO".into());
    }
    if (hi - lo) / step > 1e7 {
        return Err("grid would exceed 1e7 points".into());
    }
    Ok(GridSpec { lo, hi, step })
}

fn parse_schedule(text: &str) -> std::result::Result<Schedule, String> {
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    for piece in text.split(';') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (t, vals) = piece
            .split_once(':')
            .ok_or_else(|| format!("piece {piece:?} is not T:U[,U...]"))?;
        breakpoints.push(t.trim().parse::<f64>().map_err(|e| format!("time {t:?}: {e}"))?);
        let u: std::result::Result<Vec<f64>, _> = vals
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("value {v:?}: {e}")))
            .collect();
        values.push(u?);
    }
    Schedule::new(breakpoints, values).map_err(|e| e.to_string())
}

fn main() {
    if let Ok(text) = std::env::var("KOOPMAN_THREADS") {
        if let Ok(threads) = text.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let mut code = 1;
        match e.chain().find_map(|c| c.downcast_ref::<koopman_core::Error>()) {
            Some(core) => {
                eprintln!("error[{}]: {core}", core.code());
                if core.is_condition_failure() {
                    code = 2;
                }
            }
            None => eprintln!("error: {e:#}"),
        }
        std::process::exit(code);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Check(a) => cmd_check(a),
        Command::Linearize(a) => cmd_linearize(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ResonanceScan(a) => cmd_scan(a),
        Command::Bilinearize(a) => cmd_bilinearize(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::SimulateBilinear(a) => cmd_simulate_bilinear(a),
        Command::Gedmd(a) => cmd_gedmd(a),
        Command::ExampleSec5(a) => sec5::run(a.a, &a.out),
    }
}

fn load_system(path: &Path) -> Result<ControlAffineSystem> {
    ControlAffineSystem::load_json(path)
        .with_context(|| format!("loading system {}", path.display()))
}

fn resolve_u(sys: &ControlAffineSystem, u: Option<Vec<f64>>) -> Result<Vec<f64>> {
    let u = u.unwrap_or_else(|| vec![0.0; sys.input_dim()]);
    ensure!(
        u.len() == sys.input_dim(),
        "input has {} channels but system declares {}",
        u.len(),
        sys.input_dim()
    );
    Ok(u)
}

fn solve_opts(tol: f64) -> SolveOptions {
    SolveOptions {
        tol,
        reverse_order: false,
    }
}

fn cmd_check(a: CheckArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let u = resolve_u(&sys, a.u)?;
    let field = sys.materialize(&u)?;
    let spec = eigen_decompose(&field.jacobian_at_origin())?;
    let order = if a.inf { Order::Infinite } else { Order::Finite(a.k) };
    let rep = check_all(spec.eigenvalues(), order, a.tol)?;

    println!("conditions at u = {u:?}, order {order}, tol {:.1e}", a.tol);
    println!("{:<6}{:>24}{:>13}{:>9}{:>13}", "index", "eigenvalue", "nonres", "spread", "min gap");
    for (i, c) in rep.per_index.iter().enumerate() {
        let l = rep.eigenvalues[i];
        println!(
            "{i:<6}{:>24}{:>13}{:>9}{:>13.3e}",
            format!("{:.6} {:+.6}i", l[0], l[1]),
            if c.nonresonant { "ok" } else { "VIOLATED" },
            if c.spread_ok { "ok" } else { "FAIL" },
            c.min_gap,
        );
        for v in &c.violations {
            println!("       witness m = {:?}, gap {:.3e}", v.witness, v.gap);
        }
    }
    println!(
        "all nonresonant: {}  all spread: {}  overall min gap: {:.3e}",
        rep.all_nonresonant, rep.all_spread, rep.min_gap
    );
    report::write_json(&a.out, &rep)?;
    println!("report: {}", a.out.display());

    if !rep.all_ok() {
        let witness = rep
            .per_index
            .iter()
            .enumerate()
            .find(|(_, c)| !c.nonresonant || !c.spread_ok)
            .map(|(i, c)| match c.violations.first() {
                Some(v) => format!("index {i}, m = {:?}, gap {:.3e}", v.witness, v.gap),
                None => format!("index {i}, spread margin {:.3e}", c.spread_margin),
            })
            .unwrap_or_default();
        return Err(koopman_core::Error::ConditionFailed {
            condition: format!("nonresonance/spread at order {order}"),
            witness,
        }
        .into());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct LinearizeReport {
    u: Vec<f64>,
    map: records::MapRecord,
    residual_by_degree: Vec<DegreeResidual>,
}

#[derive(serde::Serialize)]
struct DegreeResidual {
    degree: u32,
    residual: f64,
}

fn cmd_linearize(a: LinearizeArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let u = resolve_u(&sys, a.u)?;
    let field = sys.materialize(&u)?;
    let mut map = linearize_parameterized(&sys, &u, a.k, &solve_opts(a.tol), None)?;
    if let Some(h) = a.pullback_horizon {
        map.set_pullback(PullbackConfig {
            horizon: h,
            integrator: IntegratorConfig::default(),
        });
    }
    let by_degree: Vec<DegreeResidual> = map
        .residual_by_degree(&field)?
        .into_iter()
        .map(|(degree, residual)| DegreeResidual { degree, residual })
        .collect();

    println!("linearizing map at u = {u:?}, order {}", map.k());
    for (i, l) in map.spectrum().eigenvalues().iter().enumerate() {
        println!("  lambda_{i} = {:.6} {:+.6}i", l.re, l.im);
    }
    println!(
        "min denominator {:.3e}, {} near-resonance warning(s), realification residue {:.3e}",
        map.min_denominator(),
        map.warnings().len(),
        map.realification_residue()
    );
    for r in &by_degree {
        println!("  defect at degree {:>2}: {:.3e}", r.degree, r.residual);
    }
    let rep = LinearizeReport {
        u,
        map: records::MapRecord::from_map(&map),
        residual_by_degree: by_degree,
    };
    report::write_json(&a.out, &rep)?;
    println!("map file: {}", a.out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct VerifyReport {
    u: Vec<f64>,
    k: u32,
    samples: usize,
    seed: u64,
    horizon: f64,
    pullback_horizon: f64,
    max_trajectory_residual: f64,
    max_instantaneous_residual: f64,
    per_degree_residual: Vec<DegreeResidual>,
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let u = resolve_u(&sys, a.u)?;
    let field = sys.materialize(&u)?;
    let mut map = linearize_parameterized(&sys, &u, a.k, &solve_opts(a.tol), None)?;
    if let Some(h) = a.pullback_horizon {
        map.set_pullback(PullbackConfig {
            horizon: h,
            integrator: IntegratorConfig::default(),
        });
    }
    let samples = sample_box(sys.domain(), a.samples, a.seed)?;
    let diag = verify_conjugacy(
        &map,
        &field,
        &samples,
        &VerifyOptions {
            horizon: a.horizon,
            ..Default::default()
        },
    )?;
    println!(
        "verified on {} samples over horizon {}: trajectory residual {:.3e}, instantaneous {:.3e}",
        diag.samples, diag.horizon, diag.max_trajectory_residual, diag.max_instantaneous_residual
    );
    let rows: Vec<Vec<String>> = diag
        .per_degree_residual
        .iter()
        .map(|(d, r)| vec![d.to_string(), fmt_float(*r)])
        .collect();
    report::write_csv(&a.out, &["degree", "residual"], &rows)?;
    let rep = VerifyReport {
        u,
        k: a.k,
        samples: diag.samples,
        seed: a.seed,
        horizon: diag.horizon,
        pullback_horizon: diag.pullback_horizon,
        max_trajectory_residual: diag.max_trajectory_residual,
        max_instantaneous_residual: diag.max_instantaneous_residual,
        per_degree_residual: diag
            .per_degree_residual
            .iter()
            .map(|&(degree, residual)| DegreeResidual { degree, residual })
            .collect(),
    };
    let json_path = report::with_ext(&a.out, "json");
    report::write_json(&json_path, &rep)?;
    println!("series: {}  report: {}", a.out.display(), json_path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct SweepReport {
    base_u: Vec<f64>,
    direction: Vec<f64>,
    k: u32,
    rows: Vec<SweepRowRecord>,
}

#[derive(serde::Serialize)]
struct SweepRowRecord {
    delta: f64,
    value_gap: f64,
    derivative_gap: f64,
    ratio: Option<f64>,
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let u = resolve_u(&sys, a.u)?;
    let direction = match a.direction {
        Some(d) => {
            ensure!(d.len() == sys.input_dim(), "direction dimension mismatch");
            d
        }
        None => {
            let mut d = vec![0.0; sys.input_dim()];
            ensure!(!d.is_empty(), "system has no inputs to sweep");
            d[0] = 1.0;
            d
        }
    };
    ensure!(!a.deltas.is_empty(), "need at least one delta");
    let grid = sample_box(sys.domain(), a.samples, a.seed)?;
    let table = continuity_sweep(&sys, &u, &direction, &a.deltas, a.k, &solve_opts(a.tol), &grid)?;

    println!(
        "continuity sweep at u = {:?} along {:?}, order {}",
        table.base_u, table.direction, table.k
    );
    println!("{:>12}{:>16}{:>16}{:>10}", "delta", "value gap", "deriv gap", "ratio");
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for r in &table.rows {
        println!(
            "{:>12.4e}{:>16.6e}{:>16.6e}{:>10}",
            r.delta,
            r.value_gap,
            r.derivative_gap,
            r.ratio.map(|x| format!("{x:.3}")).unwrap_or_default()
        );
        rows.push(vec![
            fmt_float(r.delta),
            fmt_float(r.value_gap),
            fmt_float(r.derivative_gap),
            r.ratio.map(fmt_float).unwrap_or_default(),
        ]);
        records.push(SweepRowRecord {
            delta: r.delta,
            value_gap: r.value_gap,
            derivative_gap: r.derivative_gap,
            ratio: r.ratio,
        });
    }
    report::write_csv(&a.out, &["delta", "value_gap", "derivative_gap", "ratio"], &rows)?;
    let json_path = report::with_ext(&a.out, "json");
    report::write_json(
        &json_path,
        &SweepReport {
            base_u: table.base_u.clone(),
            direction: table.direction.clone(),
            k: table.k,
            rows: records,
        },
    )?;
    println!("series: {}  report: {}", a.out.display(), json_path.display());
    Ok(())
}

fn cmd_scan(a: ScanArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    ensure!(
        sys.input_dim() == 1,
        "--u-grid scans a single input channel; system declares {}",
        sys.input_dim()
    );
    let grid = a.u_grid.points();
    let rep = scan_parameter_resonances(&sys, &grid, Order::Finite(a.k), a.tol)?;

    let flagged: Vec<_> = rep.flagged_points().collect();
    println!(
        "scanned {} points at order {}, tol {:.1e}: {} flagged",
        rep.points.len(),
        a.k,
        a.tol,
        flagged.len()
    );
    println!("{:>12}{:>14}{:>14}  witness", "u", "min gap", "reason");
    for p in &flagged {
        let reason = match p.flag_reason {
            Some(FlagReason::GapBelowTol) => "gap<tol",
            Some(FlagReason::LocalMinimum) => "local-min",
            None => "",
        };
        let witness = p
            .worst
            .as_ref()
            .map(|w| format!("target {} m = {:?}", w.target, w.witness))
            .unwrap_or_default();
        println!("{:>12.4}{:>14.3e}{:>14}  {witness}", p.u[0], p.min_gap, reason);
    }
    let unchecked = rep
        .points
        .iter()
        .filter(|p| p.status != PointStatus::Checked)
        .count();
    if unchecked > 0 {
        println!("{unchecked} point(s) skipped (origin not exponentially stable there)");
    }

    let rows: Vec<Vec<String>> = rep
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_float(p.u[0]),
                fmt_float(p.min_gap),
                (p.flagged as u8).to_string(),
            ]
        })
        .collect();
    let csv_path = report::with_ext(&a.out, "csv");
    report::write_csv(&csv_path, &["u", "min_gap", "flagged"], &rows)?;
    report::write_json(&a.out, &rep)?;
    println!("report: {}  series: {}", a.out.display(), csv_path.display());
    Ok(())
}

fn cmd_bilinearize(a: BilinearizeArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let opts = BilinearizeOptions {
        k: a.k,
        depth: a.depth,
        degree_cap: a.degree_cap,
        tol: a.tol,
        rank_tol: a.rank_tol,
        samples: a.samples,
        seed: a.seed,
        residual_threshold: a.residual_threshold,
        force: a.force,
    };
    let model = bilinearize(&sys, &opts)?;
    println!("{}", model.certificate().to_text());
    println!("A = {}", model.a());
    for (i, b) in model.b().iter().enumerate() {
        println!("B_{i} = {b}");
    }
    println!(
        "defect residual {:.3e}, fit gap {:.3e} on {} samples",
        model.residual(),
        model.fit_gap(),
        model.samples_used()
    );
    report::write_json(&a.out, &records::ModelRecord::from_model(&model))?;
    println!("model file: {}", a.out.display());
    Ok(())
}

/// True-system rollout under a piecewise-constant schedule, recorded on a
/// uniform grid; schedule breakpoints are inserted as integration
/// boundaries so each leg sees one constant input.
fn rollout(
    sys: &ControlAffineSystem,
    x0: &[f64],
    schedule: &Schedule,
    horizon: f64,
    grid_points: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    ensure!(horizon > 0.0 && grid_points >= 2, "need horizon > 0 and at least 2 grid points");
    let times: Vec<f64> = (0..grid_points)
        .map(|j| horizon * j as f64 / (grid_points - 1) as f64)
        .collect();
    let mut marks = times.clone();
    for &b in schedule.breakpoints() {
        if b > 0.0 && b < horizon && times.iter().all(|&t| (t - b).abs() > 1e-12) {
            marks.push(b);
        }
    }
    marks.sort_by(f64::total_cmp);
    let cfg = IntegratorConfig::default();
    let mut x = x0.to_vec();
    let mut states = vec![x.clone()];
    for j in 1..marks.len() {
        let (t0, t1) = (marks[j - 1], marks[j]);
        let u = schedule.value_at(0.5 * (t0 + t1));
        let field = sys.materialize(u)?;
        x = flow_map(&field, &x, t1 - t0, &cfg)?;
        if times.iter().any(|&t| (t - marks[j]).abs() <= 1e-12) {
            states.push(x.clone());
        }
    }
    Ok((times, states))
}

fn resolve_schedule(
    sys: &ControlAffineSystem,
    schedule: Option<Schedule>,
    u: Option<Vec<f64>>,
) -> Result<Schedule> {
    let schedule = match schedule {
        Some(s) => s,
        None => Schedule::constant(resolve_u(sys, u)?),
    };
    ensure!(
        schedule.input_dim() == sys.input_dim(),
        "schedule has {} channels but system declares {}",
        schedule.input_dim(),
        sys.input_dim()
    );
    Ok(schedule)
}

#[derive(serde::Serialize)]
struct TrajectoryReport {
    x0: Vec<f64>,
    horizon: f64,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    ensure!(a.x0.len() == sys.n(), "x0 has wrong dimension");
    let schedule = resolve_schedule(&sys, a.schedule, a.u)?;
    let (times, states) = rollout(&sys, &a.x0, &schedule, a.horizon, a.grid_points)?;

    let norm_last = DVector::from_vec(states.last().unwrap().clone()).norm();
    println!(
        "integrated {} grid points to t = {}; final state norm {:.3e}",
        times.len(),
        a.horizon,
        norm_last
    );
    let mut header = vec!["t".to_string()];
    header.extend((1..=sys.n()).map(|i| format!("x{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(&states)
        .map(|(t, x)| {
            let mut row = vec![fmt_float(*t)];
            row.extend(x.iter().map(|v| fmt_float(*v)));
            row
        })
        .collect();
    report::write_csv(&a.out, &header_refs, &rows)?;
    let json_path = report::with_ext(&a.out, "json");
    report::write_json(
        &json_path,
        &TrajectoryReport {
            x0: a.x0,
            horizon: a.horizon,
            times,
            states,
        },
    )?;
    println!("series: {}  report: {}", a.out.display(), json_path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct BilinearSimReport {
    x0: Vec<f64>,
    horizon: f64,
    k: u32,
    max_error: f64,
    model_residual: f64,
    times: Vec<f64>,
    errors: Vec<f64>,
}

fn cmd_simulate_bilinear(a: SimulateBilinearArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    ensure!(a.x0.len() == sys.n(), "x0 has wrong dimension");
    let schedule = resolve_schedule(&sys, a.schedule, a.u)?;
    let opts = BilinearizeOptions {
        k: a.k,
        tol: a.tol,
        seed: a.seed,
        force: a.force,
        residual_threshold: if a.force {
            f64::INFINITY
        } else {
            defaults::BILINEAR_RESIDUAL
        },
        ..Default::default()
    };
    let mut model = bilinearize(&sys, &opts)?;
    if let Some(h) = a.pullback_horizon {
        model.psi_mut().set_pullback(PullbackConfig {
            horizon: h,
            integrator: IntegratorConfig::default(),
        });
    }
    let sim = simulate_bilinear(
        &model,
        &a.x0,
        &schedule,
        a.horizon,
        &SimulateOptions {
            grid_points: a.grid_points,
            integrator: IntegratorConfig::default(),
        },
    )?;
    println!(
        "model vs truth over horizon {}: max |z - psi(x)| = {:.3e} ({} grid points)",
        a.horizon,
        sim.max_error,
        sim.times.len()
    );
    let rows: Vec<Vec<String>> = sim
        .times
        .iter()
        .zip(&sim.errors)
        .map(|(t, e)| vec![fmt_float(*t), fmt_float(*e)])
        .collect();
    report::write_csv(&a.out, &["t", "err"], &rows)?;
    let json_path = report::with_ext(&a.out, "json");
    report::write_json(
        &json_path,
        &BilinearSimReport {
            x0: a.x0,
            horizon: a.horizon,
            k: a.k,
            max_error: sim.max_error,
            model_residual: model.residual(),
            times: sim.times,
            errors: sim.errors,
        },
    )?;
    println!("series: {}  report: {}", a.out.display(), json_path.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct GedmdReport {
    u: Vec<f64>,
    dictionary: Vec<Vec<u32>>,
    l: Vec<Vec<f64>>,
    conditioning: f64,
    residual: f64,
    samples_used: usize,
    generator_eigenvalues: Vec<[f64; 2]>,
    matched: Vec<MatchedRecord>,
}

#[derive(serde::Serialize)]
struct MatchedRecord {
    index: usize,
    eigenvalue: [f64; 2],
    eigenvalue_found: [f64; 2],
    degree1_gap: f64,
    coefficients: Vec<[f64; 2]>,
}

fn cmd_gedmd(a: GedmdArgs) -> Result<()> {
    let sys = load_system(&a.system)?;
    let u = resolve_u(&sys, a.u)?;
    let field = sys.materialize(&u)?;
    let dict = Dictionary::up_to_degree(sys.n(), a.dict_degree)?;
    let wanted = a.samples.max(2 * dict.len());
    let samples = sample_box(sys.domain(), wanted, a.seed)?;
    let gm = fit_generator(&field, &dict, &samples)?;
    let reference = eigen_decompose(&field.jacobian_at_origin())?;
    let efs = eigenfunctions_from_generator(&gm, &dict, &reference)?;
    let gen_spec = eigen_decompose(&gm.l().transpose())?;

    println!(
        "generator fit on {} monomials, {} samples: residual {:.3e}, Gram cond {:.3e}",
        dict.len(),
        gm.samples_used(),
        gm.residual(),
        gm.conditioning()
    );
    println!("generator eigenvalues:");
    for l in gen_spec.eigenvalues() {
        println!("  {:.6} {:+.6}i", l.re, l.im);
    }
    for ef in &efs {
        println!(
            "matched lambda_{} = {:.6} {:+.6}i (found {:.6} {:+.6}i, degree-1 gap {:.3e})",
            ef.index,
            ef.eigenvalue.re,
            ef.eigenvalue.im,
            ef.eigenvalue_found.re,
            ef.eigenvalue_found.im,
            ef.degree1_gap
        );
        for (m, c) in dict.monomials().iter().zip(&ef.coefficients) {
            if c.norm() > 1e-12 {
                println!("   {m}: {:.6} {:+.6}i", c.re, c.im);
            }
        }
    }

    let rows: Vec<Vec<String>> = gen_spec
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), fmt_float(l.re), fmt_float(l.im)])
        .collect();
    let csv_path = report::with_ext(&a.out, "csv");
    report::write_csv(&csv_path, &["index", "re", "im"], &rows)?;
    let rep = GedmdReport {
        u,
        dictionary: dict.monomials().iter().map(|m| m.exponents().to_vec()).collect(),
        l: records::matrix_rows(gm.l()),
        conditioning: gm.conditioning(),
        residual: gm.residual(),
        samples_used: gm.samples_used(),
        generator_eigenvalues: gen_spec.eigenvalues().iter().map(|l| [l.re, l.im]).collect(),
        matched: efs
            .iter()
            .map(|ef| MatchedRecord {
                index: ef.index,
                eigenvalue: [ef.eigenvalue.re, ef.eigenvalue.im],
                eigenvalue_found: [ef.eigenvalue_found.re, ef.eigenvalue_found.im],
                degree1_gap: ef.degree1_gap,
                coefficients: ef.coefficients.iter().map(|c| [c.re, c.im]).collect(),
            })
            .collect(),
    };
    report::write_json(&a.out, &rep)?;
    println!("report: {}  series: {}", a.out.display(), csv_path.display());
    Ok(())
}
