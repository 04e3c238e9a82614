//! File formats.
//!
//! * trajectory CSV: `t,re_a,im_a,re_m,im_m,re_b,im_b`, time in units of `1/omega_b`
//! * spectrum CSV: `freq_over_omega_b,power,log10_power`
//! * sweep CSV: `<param>_over_omega_b,steady_m2,line_count,plateau_lo,plateau_hi,cutoff_order,flatness,lyapunov,regime,low_lying_ratio`,
//!   with `lyapunov` in rad/s and absent values left empty
//! * contour CSV: one row per sweep point, one column per frequency cell
//!
//! Floats are written in their shortest round-trip form, so identical
//! results give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{ContourAxis, SweepRow, SweepSpec};
use crate::error::IoError;
use crate::integrator::{IntegrationConfig, Trajectory};
use crate::model::{ModeState, PhysicalParams, ScaledParams};
use crate::spectral::Spectrum;

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "re_a", "im_a", "re_m", "im_m", "re_b", "im_b"];
pub const SPECTRUM_HEADER: [&str; 3] = ["freq_over_omega_b", "power", "log10_power"];
pub const SWEEP_COLUMNS: [&str; 9] = [
    "steady_m2",
    "line_count",
    "plateau_lo",
    "plateau_hi",
    "cutoff_order",
    "flatness",
    "lyapunov",
    "regime",
    "low_lying_ratio",
];

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| IoError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), IoError> {
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| IoError::io(path, e))?;
    finish(w, path)
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| IoError::io(path, e))?;
    Ok(s)
}

/// Sidecar written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: PhysicalParams,
    pub scaled: ScaledParams,
    pub integration: IntegrationConfig,
    pub params_digest: String,
    pub samples: usize,
    pub t0: f64,
    pub dt_sample: f64,
    pub steady_m2: f64,
    pub max_m2: f64,
    pub low_lying_ratio: f64,
}

pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    let mut rec: [String; 7] = Default::default();
    for (k, s) in traj.samples.iter().enumerate() {
        let vals = [traj.time(k), s.a.re, s.a.im, s.m.re, s.m.im, s.b.re, s.b.im];
        for (slot, v) in rec.iter_mut().zip(vals) {
            slot.clear();
            use std::fmt::Write as _;
            let _ = write!(slot, "{v}");
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(IoError::Write)?;
    Ok(())
}

pub fn save_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let w = create(path)?;
    write_trajectory_csv(w, traj)
}

/// Parses a trajectory CSV. The header must match [`TRAJECTORY_HEADER`]
/// and the time column must be uniformly spaced.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory, IoError> {
    let bad = |msg: String| IoError::Trajectory(msg);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().map(str::trim).ne(TRAJECTORY_HEADER) {
        return Err(bad(format!("expected header `{}`", TRAJECTORY_HEADER.join(","))));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 7 {
            return Err(bad(format!("row {} has {} fields, expected 7", line + 1, rec.len())));
        }
        let mut v = [0.0f64; 7];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 1)))?;
            if !slot.is_finite() {
                return Err(bad(format!("row {}: non-finite value `{field}`", line + 1)));
            }
        }
        times.push(v[0]);
        samples.push(ModeState::new(
            Complex64::new(v[1], v[2]),
            Complex64::new(v[3], v[4]),
            Complex64::new(v[5], v[6]),
        ));
    }
    if samples.len() < 2 {
        return Err(bad(format!("need at least two rows, found {}", samples.len())));
    }
    let n = samples.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(bad("time column must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * dt;
        if (t - expected).abs() > 1e-6 * dt {
            return Err(bad(format!("row {}: time {t} breaks the uniform spacing {dt}", k + 1)));
        }
    }
    Ok(Trajectory {
        t0: times[0],
        dt_sample: dt,
        samples,
        params_digest: String::new(),
    })
}

pub fn load_trajectory_csv(path: &Path) -> Result<Trajectory, IoError> {
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    read_trajectory_csv(std::io::BufReader::new(f))
}

pub fn write_spectrum_csv<W: Write>(out: W, spec: &Spectrum) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPECTRUM_HEADER)?;
    for ((f, p), l) in spec.freqs.iter().zip(&spec.power).zip(&spec.log_power) {
        w.write_record([f.to_string(), p.to_string(), l.to_string()])?;
    }
    w.flush().map_err(IoError::Write)?;
    Ok(())
}

pub fn save_spectrum_csv(path: &Path, spec: &Spectrum) -> Result<(), IoError> {
    write_spectrum_csv(create(path)?, spec)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sweep rows as CSV, the exponent converted to rad/s.
pub fn write_sweep_csv<W: Write>(out: W, spec: &SweepSpec, rows: &[SweepRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let first = format!("{}_over_omega_b", spec.parameter.name());
    w.write_record(std::iter::once(first.as_str()).chain(SWEEP_COLUMNS))?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.steady_m2.to_string(),
            r.line_count.to_string(),
            opt(r.plateau_lo),
            opt(r.plateau_hi),
            opt(r.cutoff_order),
            r.flatness.to_string(),
            opt(r.lyapunov.map(|l| l * spec.base.omega_b)),
            r.regime.label().to_string(),
            r.low_lying_ratio.to_string(),
        ])?;
    }
    w.flush().map_err(IoError::Write)?;
    Ok(())
}

/// Max-pooled `log10` power per sweep point and frequency cell; empty
/// cells are left blank.
pub fn write_contour_csv<W: Write>(
    out: W,
    spec: &SweepSpec,
    axis: &ContourAxis,
    rows: &[SweepRow],
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![format!("{}_over_omega_b", spec.parameter.name())];
    header.extend(axis.centers().iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.value.to_string()];
        match &r.contour {
            Some(cells) => rec.extend(
                cells
                    .iter()
                    .map(|v| if v.is_nan() { String::new() } else { v.to_string() }),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), axis.cells())),
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(IoError::Write)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub workers: usize,
    pub omega_b_rad_per_s: f64,
    pub files: Vec<String>,
    pub rows: Vec<SweepRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> Trajectory {
        let samples = (0..5)
            .map(|k| {
                let x = k as f64;
                ModeState::new(
                    Complex64::new(0.1 * x, -x),
                    Complex64::new(1e17 / 3.0, x / 7.0),
                    Complex64::new(-0.0, 1e-300),
                )
            })
            .collect();
        Trajectory {
            t0: 12.5,
            dt_sample: 0.25,
            samples,
            params_digest: "x".into(),
        }
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let t = traj();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,re_a,im_a,re_m,im_m,re_b,im_b\n"));
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, t.samples);
        assert_eq!(back.t0, t.t0);
        assert_eq!(back.dt_sample, t.dt_sample);
    }

    #[test]
    fn trajectory_parse_errors() {
        for doc in [
            "",
            "t,a\n0,1\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n0,0,0,0,0,0,0\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n0,0,0,0,0,0,0\n1,0,0,x,0,0,0\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n0,0,0,0,0,0,0\n1,0,0,NaN,0,0,0\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n0,0,0,0,0,0,0\n1,0,0,0,0,0\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n0,0,0,0,0,0,0\n1,0,0,0,0,0,0\n3,0,0,0,0,0,0\n2.9,0,0,0,0,0,0\n",
            "t,re_a,im_a,re_m,im_m,re_b,im_b\n1,0,0,0,0,0,0\n0,0,0,0,0,0,0\n",
        ] {
            assert!(read_trajectory_csv(doc.as_bytes()).is_err(), "{doc:?}");
        }
    }

    #[test]
    fn sweep_csv_leaves_absent_values_empty() {
        let spec = SweepSpec::new(vec![0.0]);
        let row = SweepRow {
            value: 0.0,
            steady_m2: 1.5,
            line_count: 3,
            plateau_lo: None,
            plateau_hi: None,
            cutoff_order: None,
            flatness: 0.25,
            repetition_rate: None,
            lyapunov: None,
            lyapunov_std_error: None,
            regime: crate::analysis::Regime::BelowThreshold,
            low_lying_ratio: 1e-3,
            error: None,
            contour: None,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &spec, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "j_am_over_omega_b,steady_m2,line_count,plateau_lo,plateau_hi,cutoff_order,flatness,lyapunov,regime,low_lying_ratio\n\
             0,1.5,3,,,,0.25,,below-threshold,0.001\n"
        );
    }
}
