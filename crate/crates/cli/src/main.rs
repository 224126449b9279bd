//! `lrpulse` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain or acceptance failure, 2 on a usage
//! or parameter-file error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrpulse::dynamics::{propagate, QState, SimSettings, DEFAULT_STEPS};
use lrpulse::export::{
    load_params, save_params, write_sensitivity_csv, write_trajectory_csv, write_waveform_csv,
};
use lrpulse::metrics::{dwell_time, fidelity, sensitivity_report};
use lrpulse::optimizer::{optimize_an_with, ObjectiveWeights, OptimizeOptions};
use lrpulse::sweeps::{
    beam_effective_fidelity, fidelity_half_width, linspace, sweep_a2, sweep_beam, sweep_c1_width,
    sweep_detuning, sweep_rabi, BeamModel, RingWeighting, SweepReport,
};
use lrpulse::{AnsatzParams, BoundaryTolerance, PulseError};

mod reproduce;

#[derive(Parser)]
#[command(
    name = "lrpulse",
    version,
    about = "Invariant-based robust pulse design for Lambda systems"
)]
struct Cli {
    /// Directory for CSV/JSON outputs
    #[arg(long, global = true, env = "LRPULSE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads for sweeps (default: available parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the endpoint constraints of a parameter file
    Validate(ValidateArgs),
    /// Sample the pump and Stokes Rabi frequencies
    Synth(SynthArgs),
    /// Propagate from |1> and write the state trajectory
    Propagate(PropagateArgs),
    /// Fidelity and populations over a detuning grid
    SweepDetuning(DetuningArgs),
    /// Fidelity over Rabi-scale variation eta and detuning
    SweepRabi(RabiArgs),
    /// Effective fidelity under a Gaussian beam profile
    Beam(BeamArgs),
    /// Fidelity and P0 under fractional variation of a2
    SweepA2(A2Args),
    /// Fidelity of the single-Gaussian width study
    SweepC1(C1Args),
    /// Numeric and closed-form error sensitivity
    Sensitivity(ParamsArg),
    /// Search a3..aN for a lower weighted objective
    Optimize(OptimizeArgs),
    /// Regenerate every figure dataset and a summary
    Reproduce(reproduce::ReproduceArgs),
}

#[derive(Args)]
struct ParamsArg {
    /// Parameter file (JSON); defaults to the built-in Table-1 pulse
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    params: PathBuf,
    /// Tolerance on the two linear endpoint conditions
    #[arg(long, default_value_t = BoundaryTolerance::default().linear)]
    linear_tol: f64,
    /// Allowed endpoint Rabi frequency relative to the pulse peak
    #[arg(long, default_value_t = BoundaryTolerance::default().endpoint_rabi)]
    endpoint_tol: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    params: ParamsArg,
    #[arg(long, default_value_t = 4001)]
    samples: usize,
}

#[derive(Args)]
struct StepsArg {
    /// RK4 steps over the pulse
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    params: ParamsArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    detuning_khz: f64,
    #[arg(long, default_value_t = 1.0)]
    rabi_scale: f64,
    #[command(flatten)]
    steps: StepsArg,
    /// Keep every n-th integrator step in the CSV
    #[arg(long, default_value_t = 40)]
    stride: usize,
}

#[derive(Args)]
struct DetuningGrid {
    #[arg(long, default_value_t = -5000.0, allow_negative_numbers = true)]
    min_khz: f64,
    #[arg(long, default_value_t = 5000.0, allow_negative_numbers = true)]
    max_khz: f64,
    #[arg(long, default_value_t = 1001)]
    points: usize,
}

impl DetuningGrid {
    fn values(&self) -> Result<Vec<f64>, Failure> {
        grid(self.min_khz, self.max_khz, self.points, "detuning")
    }
}

#[derive(Args)]
struct DetuningArgs {
    #[command(flatten)]
    params: ParamsArg,
    #[command(flatten)]
    grid: DetuningGrid,
    #[command(flatten)]
    steps: StepsArg,
}

#[derive(Args)]
struct RabiArgs {
    #[command(flatten)]
    params: ParamsArg,
    #[arg(long, default_value_t = -0.3, allow_negative_numbers = true)]
    eta_min: f64,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    eta_max: f64,
    #[arg(long, default_value_t = 25)]
    eta_points: usize,
    /// Detunings (kHz), comma separated
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,100,200,300"
    )]
    detunings_khz: Vec<f64>,
    #[command(flatten)]
    steps: StepsArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Annular,
    Radial,
}

impl From<Weighting> for RingWeighting {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Annular => RingWeighting::Annular,
            Weighting::Radial => RingWeighting::Radial,
        }
    }
}

#[derive(Args)]
struct BeamArgs {
    #[command(flatten)]
    params: ParamsArg,
    /// Collection radii r/w0, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.25,0.5,0.75,1,1.25,1.5,2"
    )]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    rings: usize,
    #[arg(long, value_enum, default_value_t = Weighting::Annular)]
    weighting: Weighting,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    detuning_khz: f64,
    #[command(flatten)]
    steps: StepsArg,
}

#[derive(Args)]
struct A2Args {
    #[command(flatten)]
    params: ParamsArg,
    /// Fractional variations of a2, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-0.1,-0.05,0,0.05,0.1"
    )]
    deltas: Vec<f64>,
    #[command(flatten)]
    grid: DetuningGrid,
    #[command(flatten)]
    steps: StepsArg,
}

#[derive(Args)]
struct C1Args {
    /// Gaussian widths C1, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4")]
    c1: Vec<f64>,
    #[command(flatten)]
    grid: DetuningGrid,
    #[command(flatten)]
    steps: StepsArg,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    params: ParamsArg,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    w_band: f64,
    #[arg(long, default_value_t = 1.0)]
    w_leak: f64,
    #[arg(long, default_value_t = 1.0)]
    w_qs: f64,
    #[arg(long, default_value_t = 270.0)]
    band_khz: f64,
    /// Far-detuned probe offsets (kHz), comma separated
    #[arg(long, value_delimiter = ',', default_value = "3500,4000,5000")]
    leak_khz: Vec<f64>,
    /// Exit with status 1 when the budget runs out before convergence
    #[arg(long)]
    fail_on_budget: bool,
}

/// Process outcome carrying the exit status and a one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<PulseError> for Failure {
    fn from(e: PulseError) -> Self {
        let message = match &e {
            PulseError::SingularGamma { .. } | PulseError::StepTooCoarse { .. } => e.to_string(),
            _ => format!("{}: {e}", e.kind()),
        };
        Failure::domain(message)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::domain(format!("Io: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Loads a parameter file; any problem with the file itself is a usage error.
pub fn read_params(path: Option<&Path>) -> CliResult<AnsatzParams> {
    match path {
        None => Ok(AnsatzParams::table1()),
        Some(path) => load_params(path).map_err(|e| Failure::usage(e.to_string())),
    }
}

fn grid(min: f64, max: f64, points: usize, what: &str) -> CliResult<Vec<f64>> {
    if points == 0 || !min.is_finite() || !max.is_finite() || min > max {
        return Err(Failure::usage(format!(
            "invalid {what} grid: [{min}, {max}] with {points} points"
        )));
    }
    Ok(linspace(min, max, points))
}

/// Creates `dir/name` and hands a buffered writer to `fill`.
pub fn write_output<F>(dir: &Path, name: &str, fill: F) -> CliResult<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    fill(&mut w)?;
    w.flush()?;
    Ok(path)
}

fn write_report(dir: &Path, name: &str, report: &SweepReport) -> CliResult<PathBuf> {
    write_output(dir, name, |w| report.write_csv(w))
}

fn min_fidelity(report: &SweepReport) -> f64 {
    report
        .rows
        .iter()
        .map(|r| r.fidelity)
        .fold(f64::INFINITY, f64::min)
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Validate(a) => {
            let p = read_params(Some(&a.params))?;
            let report = p.constraint_report();
            println!("res13 = {:.4}", report.res13);
            println!("res14 = {:.4}", report.res14);
            println!("res15_start = {:.6}", report.res15_start);
            println!("res15_end = {:.6}", report.res15_end);
            println!("peak_gamma_rate = {:.6}", report.peak_gamma_rate);
            if let Some(r) = report.peak_rabi {
                println!("peak_rabi_rad_per_us = {r:.6}");
            }
            let tol = BoundaryTolerance {
                linear: a.linear_tol,
                endpoint_rabi: a.endpoint_tol,
            };
            let failures = report.failures(&tol);
            if failures.is_empty() {
                println!("boundary-safe");
                Ok(())
            } else {
                Err(Failure::domain(format!(
                    "ConstraintViolation: {}",
                    failures.join("; ")
                )))
            }
        }
        Command::Synth(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let wf = p.sample_waveform(a.samples)?;
            let path = write_output(out, "waveform.csv", |w| write_waveform_csv(&wf, w))?;
            let mhz = |x: f64| x / (2.0 * std::f64::consts::PI);
            println!(
                "peak omega_p/2pi = {:.4} MHz, peak omega_s/2pi = {:.4} MHz -> {}",
                mhz(wf.peak_p()),
                mhz(wf.peak_s()),
                path.display()
            );
            Ok(())
        }
        Command::Propagate(a) => {
            let p = read_params(a.params.params.as_deref())?;
            if a.stride == 0 {
                return Err(Failure::usage("stride must be positive"));
            }
            let s = SimSettings::default()
                .with_detuning_khz(a.detuning_khz)
                .with_rabi_scale(a.rabi_scale)
                .with_steps(a.steps.steps);
            let traj = propagate(&p, &s, QState::ground_one())?;
            let last = traj.final_state();
            let [p1, pe, p0] = last.populations();
            let f = fidelity(last, p.theta, p.phi);
            let dwell = dwell_time(&traj);
            let path = write_output(out, "trajectory.csv", |w| {
                write_trajectory_csv(&traj.decimate(a.stride), w)
            })?;
            println!(
                "F = {f:.6}  P1 = {p1:.6}  Pe = {pe:.3e}  P0 = {p0:.6}  dwell_us = {dwell:.6} -> {}",
                path.display()
            );
            Ok(())
        }
        Command::SweepDetuning(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let g = &a.grid;
            grid(g.min_khz, g.max_khz, g.points, "detuning")?;
            let report = sweep_detuning(&p, g.min_khz, g.max_khz, g.points, a.steps.steps)?;
            let path = write_report(out, "detuning.csv", &report)?;
            println!(
                "{} rows, min F = {:.6} -> {}",
                report.rows.len(),
                min_fidelity(&report),
                path.display()
            );
            Ok(())
        }
        Command::SweepRabi(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let etas = grid(a.eta_min, a.eta_max, a.eta_points, "eta")?;
            let report = sweep_rabi(&p, &etas, &a.detunings_khz, a.steps.steps)?;
            let path = write_report(out, "rabi.csv", &report)?;
            println!(
                "{} rows, min F = {:.6} -> {}",
                report.rows.len(),
                min_fidelity(&report),
                path.display()
            );
            Ok(())
        }
        Command::Beam(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let sweep = sweep_beam(
                &p,
                &a.radii,
                a.rings,
                a.weighting.into(),
                a.detuning_khz,
                a.steps.steps,
            )?;
            let path = write_output(out, "beam.csv", |w| sweep.write_csv(w))?;
            for (r, f) in &sweep.rows {
                println!("r/w0 = {r:.3}  F_eff = {f:.6}");
            }
            println!("-> {}", path.display());
            Ok(())
        }
        Command::SweepA2(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let report = sweep_a2(&p, &a.deltas, &a.grid.values()?, a.steps.steps)?;
            let path = write_report(out, "a2.csv", &report)?;
            println!("{} rows -> {}", report.rows.len(), path.display());
            Ok(())
        }
        Command::SweepC1(a) => {
            let report = sweep_c1_width(&a.c1, &a.grid.values()?, a.steps.steps)?;
            let path = write_report(out, "c1.csv", &report)?;
            for c1 in &a.c1 {
                let rows: Vec<_> = report.slice(std::slice::from_ref(c1)).collect();
                match fidelity_half_width(&rows, 0.9) {
                    Some(hw) => println!("C1 = {c1}  half-width at F = 0.9: {hw:.1} kHz"),
                    None => println!("C1 = {c1}  half-width at F = 0.9: not bracketed"),
                }
            }
            println!("-> {}", path.display());
            Ok(())
        }
        Command::Sensitivity(a) => {
            let p = read_params(a.params.as_deref())?;
            let r = sensitivity_report(&p)?;
            let path = write_output(out, "sensitivity.csv", |w| write_sensitivity_csv(&r, w))?;
            println!(
                "qs_numeric = {:.6}  epsilon = {:.6}  qs_approx = {:.6} -> {}",
                r.qs_numeric,
                r.epsilon,
                r.qs_approx,
                path.display()
            );
            Ok(())
        }
        Command::Optimize(a) => {
            let p = read_params(a.params.params.as_deref())?;
            let w = ObjectiveWeights {
                w_band: a.w_band,
                w_leak: a.w_leak,
                w_qs: a.w_qs,
                band_khz: a.band_khz,
                leak_khz: a.leak_khz,
            };
            let outcome =
                optimize_an_with(&p, &w, &OptimizeOptions::new(a.budget, a.seed), |_, _| {})?;
            let trace = write_output(out, "optimize_trace.csv", |f| outcome.write_trace_csv(f))?;
            fs::create_dir_all(out)?;
            let best = out.join("optimized_params.json");
            save_params(&outcome.params, &best)?;
            let v = outcome.value;
            println!(
                "start {:.6} -> best {:.6} (band_infid = {:.3e}, leak = {:.4}, qs = {:.5}) after {} evaluations",
                outcome.start_value.scalar, v.scalar, v.band_infid, v.leak, v.qs, outcome.evaluations
            );
            println!("-> {} , {}", trace.display(), best.display());
            if outcome.budget_exhausted {
                eprintln!(
                    "BudgetExhausted: best-so-far returned after {} evaluations",
                    outcome.evaluations
                );
                if a.fail_on_budget {
                    return Err(Failure::domain(
                        "BudgetExhausted: search stopped before convergence",
                    ));
                }
            }
            Ok(())
        }
        Command::Reproduce(a) => reproduce::run(&a, out),
    }
}

pub fn headline_beam(p: &AnsatzParams, steps: usize) -> CliResult<f64> {
    Ok(beam_effective_fidelity(
        p,
        &BeamModel::new(1.0, 200, 1.0),
        0.0,
        steps,
    )?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
