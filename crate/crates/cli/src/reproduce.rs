//! One-shot regeneration of every figure dataset plus `summary.json`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::{json, Map, Value};

use lrpulse::dynamics::{propagate, QState, SimSettings, DEFAULT_STEPS};
use lrpulse::export::{calibrate_convention, write_trajectory_csv, write_waveform_csv};
use lrpulse::metrics::{dwell_time, fidelity, sensitivity_report};
use lrpulse::sweeps::{
    linspace, sweep_a2, sweep_beam, sweep_c1_width, sweep_detuning, sweep_rabi, RingWeighting,
};

use crate::{headline_beam, read_params, write_output, CliResult, Failure};

pub const FIGURES: [&str; 6] = ["fig2", "fig3_4", "fig5", "fig6", "fig7", "fig8"];

#[derive(Args)]
pub struct ReproduceArgs {
    /// Parameter file (JSON); defaults to the built-in Table-1 pulse
    #[arg(long)]
    params: Option<PathBuf>,
    /// RK4 steps per propagation
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    /// Figure datasets to leave out (fig2, fig3_4, fig5, fig6, fig7, fig8)
    #[arg(long, value_delimiter = ',')]
    skip: Vec<String>,
}

fn normalize(id: &str) -> Option<&'static str> {
    match id {
        "fig3" | "fig4" => Some("fig3_4"),
        other => FIGURES.iter().copied().find(|f| *f == other),
    }
}

struct Check {
    name: &'static str,
    value: f64,
    rule: String,
    pass: bool,
}

fn within(name: &'static str, value: f64, target: f64, tol: f64) -> Check {
    Check {
        name,
        value,
        rule: format!("{target} +/- {tol}"),
        pass: (value - target).abs() <= tol,
    }
}

fn at_least(name: &'static str, value: f64, bound: f64) -> Check {
    Check {
        name,
        value,
        rule: format!(">= {bound}"),
        pass: value >= bound,
    }
}

pub fn run(a: &ReproduceArgs, out: &Path) -> CliResult<()> {
    let mut skip = Vec::new();
    for id in &a.skip {
        match normalize(id) {
            Some(f) => skip.push(f),
            None => return Err(Failure::usage(format!("unknown figure id '{id}'"))),
        }
    }
    let wanted = |f: &str| !skip.contains(&f);
    let p = read_params(a.params.as_deref())?;
    let steps = a.steps;
    let mut written: Vec<String> = Vec::new();
    let mut emit = |name: &str, path: PathBuf| {
        println!("wrote {}", path.display());
        written.push(name.to_string());
    };

    let traj = propagate(
        &p,
        &SimSettings::default().with_steps(steps),
        QState::ground_one(),
    )?;
    if wanted("fig2") {
        let wf = p.sample_waveform(4001)?;
        emit(
            "fig2_waveform.csv",
            write_output(out, "fig2_waveform.csv", |w| write_waveform_csv(&wf, w))?,
        );
        let stride = (steps / 1000).max(1);
        let path = write_output(out, "fig2_populations.csv", |w| {
            write_trajectory_csv(&traj.decimate(stride), w)
        })?;
        emit("fig2_populations.csv", path);
    }
    if wanted("fig3_4") {
        let r = sweep_detuning(&p, -5000.0, 5000.0, 1001, steps)?;
        emit(
            "fig3_4_detuning.csv",
            write_output(out, "fig3_4_detuning.csv", |w| r.write_csv(w))?,
        );
    }
    if wanted("fig5") {
        let r = sweep_rabi(
            &p,
            &linspace(-0.3, 0.3, 61),
            &[0.0, 100.0, 200.0, 300.0],
            steps,
        )?;
        emit(
            "fig5_rabi.csv",
            write_output(out, "fig5_rabi.csv", |w| r.write_csv(w))?,
        );
    }
    if wanted("fig6") {
        let radii = linspace(0.05, 2.0, 40);
        let r = sweep_beam(&p, &radii, 200, RingWeighting::Annular, 0.0, steps)?;
        emit(
            "fig6_beam.csv",
            write_output(out, "fig6_beam.csv", |w| r.write_csv(w))?,
        );
    }
    if wanted("fig7") {
        let r = sweep_a2(
            &p,
            &[-0.1, -0.05, 0.0, 0.05, 0.1],
            &linspace(0.0, 5000.0, 101),
            steps,
        )?;
        emit(
            "fig7_a2.csv",
            write_output(out, "fig7_a2.csv", |w| r.write_csv(w))?,
        );
    }
    if wanted("fig8") {
        let r = sweep_c1_width(&[0.2, 0.3, 0.4], &linspace(-5000.0, 5000.0, 401), steps)?;
        emit(
            "fig8_c1.csv",
            write_output(out, "fig8_c1.csv", |w| r.write_csv(w))?,
        );
    }

    let last = traj.final_state();
    let [p1, pe, p0] = last.populations();
    let sens = sensitivity_report(&p)?;
    let dwell = dwell_time(&traj);
    let calibration = calibrate_convention(&p, steps)?;
    let beam = headline_beam(&p, steps)?;
    let band_min = calibration.cyclic.band_min_fidelity;
    let plateau_p1 = calibration.cyclic.plateau_min_p1;

    let checks = [
        within("qs", sens.qs_numeric, 0.0137, 0.002),
        within("dwell_us", dwell, 0.04, 0.02),
        at_least("band_min_fidelity", band_min, 0.995),
        at_least("plateau_min_p1", plateau_p1, 0.94),
        within("beam_fidelity_w0", beam, 0.93, 0.02),
    ];
    let all_pass = checks.iter().all(|c| c.pass);
    let mut check_map = Map::new();
    for c in &checks {
        check_map.insert(
            c.name.into(),
            json!({ "value": c.value, "rule": c.rule, "pass": c.pass }),
        );
    }

    let summary = json!({
        "tool": "lrpulse",
        "version": env!("CARGO_PKG_VERSION"),
        "steps": steps,
        "frequency_convention": calibration,
        "metrics": {
            "qs": sens.qs_numeric,
            "epsilon": sens.epsilon,
            "qs_approx": sens.qs_approx,
            "dwell_us": dwell,
            "fidelity": fidelity(last, p.theta, p.phi),
            "p1": p1,
            "pe": pe,
            "p0": p0,
            "band_min_fidelity": band_min,
            "plateau_min_p1": plateau_p1,
            "beam_fidelity_w0": beam,
            "beam_weighting": "annular",
        },
        "checks": Value::Object(check_map),
        "all_pass": all_pass,
        "skipped": skip,
        "files": written,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = write_output(out, "summary.json", |w| {
        use std::io::Write;
        writeln!(w, "{text}")
    })?;
    println!("wrote {}", path.display());

    for c in &checks {
        println!(
            "{:<18} {:>12.6}  {:<16} {}",
            c.name,
            c.value,
            c.rule,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(Failure::domain(format!(
            "AcceptanceFailure: {}",
            failed.join(", ")
        )))
    }
}
