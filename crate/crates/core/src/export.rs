//! Parameter files, CSV writers and the frequency-convention calibration.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::ansatz::{AnsatzParams, Waveform};
use crate::dynamics::Trajectory;
use crate::error::{PulseError, Result};
use crate::metrics::SensitivityReport;
use crate::sweeps::{linspace, sweep_detuning_grid};

pub fn params_from_json(text: &str) -> Result<AnsatzParams> {
    let p: AnsatzParams =
        serde_json::from_str(text).map_err(|e| PulseError::Parse(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn load_params(path: &Path) -> Result<AnsatzParams> {
    let text =
        fs::read_to_string(path).map_err(|e| PulseError::Io(format!("{}: {e}", path.display())))?;
    params_from_json(&text)
}

pub fn save_params(p: &AnsatzParams, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(p).map_err(|e| PulseError::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| PulseError::Io(format!("{}: {e}", path.display())))
}

pub fn write_waveform_csv<W: Write>(wf: &Waveform, mut w: W) -> io::Result<()> {
    writeln!(w, "t_us,omega_p_rad_per_us,omega_s_rad_per_us")?;
    for ((t, op), os) in wf.times.iter().zip(&wf.omega_p).zip(&wf.omega_s) {
        writeln!(w, "{t},{op},{os}")?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "t_us,p1,pe,p0,re_c1,im_c1,re_ce,im_ce,re_c0,im_c0")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let [p1, pe, p0] = s.populations();
        writeln!(
            w,
            "{t},{p1},{pe},{p0},{},{},{},{},{},{}",
            s.c1.re, s.c1.im, s.ce.re, s.ce.im, s.c0.re, s.c0.im
        )?;
    }
    Ok(())
}

pub fn write_sensitivity_csv<W: Write>(r: &SensitivityReport, mut w: W) -> io::Result<()> {
    writeln!(w, "qs_numeric,epsilon,qs_approx,theta")?;
    writeln!(
        w,
        "{},{},{},{}",
        r.qs_numeric, r.epsilon, r.qs_approx, r.theta
    )
}

/// How user-facing kHz values are mapped onto the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    /// `omega = 2 pi nu`; the library's convention.
    Cyclic,
    /// `omega = nu` with the kHz value read directly as krad/s.
    Angular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionScore {
    pub convention: FrequencyConvention,
    /// Minimum fidelity over |detuning| <= 270 kHz.
    pub band_min_fidelity: f64,
    /// Minimum P1 over 3.5..5 MHz.
    pub plateau_min_p1: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionCalibration {
    pub cyclic: ConventionScore,
    pub angular: ConventionScore,
    pub chosen: FrequencyConvention,
}

pub const CALIBRATION_BAND_KHZ: f64 = 270.0;
pub const CALIBRATION_BAND_MIN_F: f64 = 0.995;
pub const CALIBRATION_PLATEAU_KHZ: [f64; 2] = [3500.0, 5000.0];
pub const CALIBRATION_PLATEAU_MIN_P1: f64 = 0.94;

/// Runs the band and plateau checks under both conventions.
///
/// Angular reading of a kHz value `k` is the same Hamiltonian as a cyclic
/// detuning of `k / 2 pi`, so both are evaluated through the cyclic sweep.
pub fn calibrate_convention(p: &AnsatzParams, steps: usize) -> Result<ConventionCalibration> {
    let score = |convention: FrequencyConvention| -> Result<ConventionScore> {
        let factor = match convention {
            FrequencyConvention::Cyclic => 1.0,
            FrequencyConvention::Angular => 1.0 / (2.0 * std::f64::consts::PI),
        };
        let band: Vec<f64> = linspace(-CALIBRATION_BAND_KHZ, CALIBRATION_BAND_KHZ, 55)
            .into_iter()
            .map(|k| k * factor)
            .collect();
        let plateau: Vec<f64> =
            linspace(CALIBRATION_PLATEAU_KHZ[0], CALIBRATION_PLATEAU_KHZ[1], 31)
                .into_iter()
                .flat_map(|k| [k * factor, -k * factor])
                .collect();
        let band_min_fidelity = sweep_detuning_grid(p, &band, steps)?
            .rows
            .iter()
            .map(|r| r.fidelity)
            .fold(f64::INFINITY, f64::min);
        let plateau_min_p1 = sweep_detuning_grid(p, &plateau, steps)?
            .rows
            .iter()
            .map(|r| r.p1)
            .fold(f64::INFINITY, f64::min);
        let matches = band_min_fidelity >= CALIBRATION_BAND_MIN_F
            && plateau_min_p1 >= CALIBRATION_PLATEAU_MIN_P1;
        Ok(ConventionScore {
            convention,
            band_min_fidelity,
            plateau_min_p1,
            matches,
        })
    };
    let cyclic = score(FrequencyConvention::Cyclic)?;
    let angular = score(FrequencyConvention::Angular)?;
    let chosen = if cyclic.matches || !angular.matches {
        FrequencyConvention::Cyclic
    } else {
        FrequencyConvention::Angular
    };
    Ok(ConventionCalibration {
        cyclic,
        angular,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate, QState, SimSettings};
    use crate::metrics::sensitivity_report;

    #[test]
    fn params_roundtrip_through_file() {
        let dir = std::env::temp_dir().join(format!("lrpulse-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.json");
        save_params(&AnsatzParams::table1(), &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), AnsatzParams::table1());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert_eq!(params_from_json("{ not json").unwrap_err().kind(), "Parse");
        assert_eq!(
            load_params(Path::new("/nonexistent/p.json"))
                .unwrap_err()
                .kind(),
            "Io"
        );
    }

    #[test]
    fn invalid_values_are_rejected_after_parsing() {
        let text = r#"{"theta_rad":0.7,"phi_rad":1.5,"t_f_us":-4,"gaussians":[],"sines":[0,0.5]}"#;
        assert_eq!(params_from_json(text).unwrap_err().kind(), "InvalidParams");
    }

    #[test]
    fn csv_headers_and_row_counts() {
        let p = AnsatzParams::table1();
        let mut buf = Vec::new();
        write_waveform_csv(&p.sample_waveform(11).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_us,omega_p_rad_per_us,omega_s_rad_per_us\n"));
        assert_eq!(text.lines().count(), 12);

        let traj = propagate(
            &p,
            &SimSettings::default().with_steps(200),
            QState::ground_one(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_us,p1,pe,p0,re_c1,im_c1,re_ce,im_ce,re_c0,im_c0\n"));
        assert_eq!(text.lines().count(), traj.len() + 1);
        assert!(!text.contains('\r'));

        let mut buf = Vec::new();
        write_sensitivity_csv(&sensitivity_report(&p).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
