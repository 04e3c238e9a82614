//! Run configuration files.
//!
//! Configs are JSON in SI units. Every dimensional key carries its unit as
//! a suffix, and a quantity may be given in any one of its units:
//!
//! | suffix            | meaning                          |
//! |-------------------|----------------------------------|
//! | `_hz`             | cyclic frequency, multiplied by 2π |
//! | `_rad_per_s`      | angular frequency                |
//! | `_over_omega_b`   | multiple of the mechanical frequency |
//! | `_s`              | seconds                          |
//! | `_periods`        | mechanical periods `2π/ω_b`       |
//! | `_times_omega_b`  | dimensionless time `t·ω_b`        |
//!
//! Unknown keys are rejected. [`RunConfig::to_json`] writes every value
//! back in the canonical unit (`_rad_per_s`, `_times_omega_b`), which
//! resolves to the identical configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::{AnalysisThresholds, ContourAxis, LyapunovConfig, SweepParameter, SweepSpec};
use crate::error::ConfigError;
use crate::integrator::{IntegrationConfig, Method};
use crate::model::{compute_rabi, PhysicalParams, DEFAULT_B0_TESLA, DEFAULT_N_SPIN, YIG_GYRO_RAD_PER_S_PER_T};
use crate::spectral::{CombCriteria, Window};

/// Unit suffixes, longest first so `_rad_per_s` is not read as `_s`.
pub const UNIT_SUFFIXES: [&str; 6] = ["_times_omega_b", "_over_omega_b", "_rad_per_s", "_periods", "_hz", "_s"];

/// Coupling grid used when none is given, in units of `omega_b`.
pub const DEFAULT_GRID: [f64; 7] = [0.0, 0.5, 0.8, 1.0, 1.3, 2.0, 3.0];

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Pulls typed values out of one JSON object, tracking which keys were used.
struct Section<'a> {
    path: &'static str,
    map: &'a Map<String, Value>,
    used: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(path: &'static str, root: &'a Map<String, Value>) -> Result<Option<Self>, ConfigError> {
        match root.get(path) {
            None => Ok(None),
            Some(Value::Object(map)) => Ok(Some(Section {
                path,
                map,
                used: Vec::new(),
            })),
            Some(other) => Err(invalid(format!("`{path}` must be an object, got {other}"))),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a Value> {
        let v = self.map.get(key)?;
        self.used.push(key.to_string());
        Some(v)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(other) => Err(invalid(format!("`{}.{key}` must be a number, got {other}", self.path))),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| invalid(format!("`{}.{key}` must be a non-negative integer, got {n}", self.path))),
            Some(other) => Err(invalid(format!(
                "`{}.{key}` must be an integer, got {other}",
                self.path
            ))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(other) => Err(invalid(format!(
                "`{}.{key}` must be true or false, got {other}",
                self.path
            ))),
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|e| invalid(format!("`{}.{key}`: {e}", self.path))),
            Some(other) => Err(invalid(format!("`{}.{key}` must be a string, got {other}", self.path))),
        }
    }

    fn numbers(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| invalid(format!("`{}.{key}` must hold numbers, got {v}", self.path)))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(Value::String(s)) => parse_grid(s).map(Some),
            Some(other) => Err(invalid(format!("`{}.{key}` must be an array, got {other}", self.path))),
        }
    }

    /// At most one unit variant of `stem`, returned with its suffix.
    fn unit(&mut self, stem: &str, allowed: &[&'static str]) -> Result<Option<(&'static str, f64)>, ConfigError> {
        let mut found = None;
        for &suffix in allowed {
            let key = format!("{stem}{suffix}");
            if let Some(v) = self.number(&key)? {
                if let Some((prev, _)) = found {
                    return Err(invalid(format!(
                        "`{}.{stem}` given twice (`{stem}{prev}` and `{key}`); keep one",
                        self.path
                    )));
                }
                found = Some((suffix, v));
            }
        }
        Ok(found)
    }

    fn finish(self) -> Result<(), ConfigError> {
        let mut unknown: Vec<&String> = self.map.keys().filter(|k| !self.used.contains(k)).collect();
        unknown.sort();
        match unknown.first() {
            None => Ok(()),
            Some(k) => Err(invalid(format!("unknown key `{}.{k}`{}", self.path, suggestion(k)))),
        }
    }
}

fn suggestion(key: &str) -> String {
    if UNIT_SUFFIXES.iter().any(|s| key.ends_with(s)) {
        String::new()
    } else {
        format!(" (dimensional keys need a unit suffix: {})", UNIT_SUFFIXES.join(", "))
    }
}

const FREQ_UNITS: [&str; 3] = ["_hz", "_rad_per_s", "_over_omega_b"];
const TIME_UNITS: [&str; 3] = ["_s", "_periods", "_times_omega_b"];

fn freq_value(unit: (&str, f64), omega_b: f64) -> f64 {
    match unit {
        ("_hz", v) => 2.0 * PI * v,
        ("_over_omega_b", v) => v * omega_b,
        (_, v) => v,
    }
}

/// Time in units of `1/omega_b`.
fn time_value(unit: (&str, f64), omega_b: f64) -> f64 {
    match unit {
        ("_s", v) => v * omega_b,
        ("_periods", v) => v * 2.0 * PI,
        (_, v) => v,
    }
}

/// Sweep settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub parameter: SweepParameter,
    /// Values in units of `omega_b`.
    pub grid: Vec<f64>,
    pub contour: Option<ContourAxis>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::JAm,
            grid: DEFAULT_GRID.to_vec(),
            contour: Some(ContourAxis::default()),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PhysicalParams,
    /// Spin count used by the low-lying excitation diagnostic.
    pub n_spin: f64,
    pub integration: IntegrationConfig,
    pub thresholds: AnalysisThresholds,
    /// `None` disables the Lyapunov estimate in sweeps.
    pub lyapunov: Option<LyapunovConfig>,
    pub sweep: SweepSettings,
    pub out: PathBuf,
    pub workers: usize,
    /// Seed for synthetic fixtures; the physics itself is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysicalParams::reference(),
            n_spin: DEFAULT_N_SPIN,
            integration: IntegrationConfig::default(),
            thresholds: AnalysisThresholds::default(),
            lyapunov: Some(LyapunovConfig::default()),
            sweep: SweepSettings::default(),
            out: PathBuf::from("out"),
            workers: 1,
            seed: 0,
        }
    }
}

const TOP_LEVEL: [&str; 8] = [
    "params",
    "integration",
    "analysis",
    "lyapunov",
    "sweep",
    "out",
    "workers",
    "seed",
];

impl RunConfig {
    /// Parses a config document. An empty object gives the defaults.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    /// Parses `text` (or the defaults when `None`) after applying
    /// `key=value` overrides in order.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value = match text {
            Some(t) => serde_json::from_str(t)?,
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, ConfigError> {
        let root = value
            .as_object()
            .ok_or_else(|| invalid("configuration must be a JSON object"))?;
        if let Some(k) = root.keys().find(|k| !TOP_LEVEL.contains(&k.as_str())) {
            return Err(invalid(format!(
                "unknown key `{k}` (expected one of {})",
                TOP_LEVEL.join(", ")
            )));
        }
        let mut cfg = RunConfig::default();

        if let Some(mut s) = Section::new("params", root)? {
            let reference = PhysicalParams::reference();
            let omega_b = s
                .unit("omega_b", &["_hz", "_rad_per_s"])?
                .map(|u| freq_value(u, 0.0))
                .unwrap_or(reference.omega_b);
            let p = &mut cfg.params;
            p.omega_b = omega_b;
            let freq = |s: &mut Section, stem: &str, slot: &mut f64| -> Result<bool, ConfigError> {
                match s.unit(stem, &FREQ_UNITS)? {
                    Some(u) => {
                        *slot = freq_value(u, omega_b);
                        Ok(true)
                    }
                    None => Ok(false),
                }
            };
            freq(&mut s, "omega_l", &mut p.omega_l)?;
            p.omega_a = p.omega_l - omega_b;
            p.omega_m = p.omega_l - omega_b;
            freq(&mut s, "omega_a", &mut p.omega_a)?;
            freq(&mut s, "omega_m", &mut p.omega_m)?;
            if let Some(d) = s.unit("delta_a", &FREQ_UNITS)? {
                p.omega_a = p.omega_l - freq_value(d, omega_b);
            }
            if let Some(d) = s.unit("delta_m", &FREQ_UNITS)? {
                p.omega_m = p.omega_l - freq_value(d, omega_b);
            }
            let kappa_a_set = freq(&mut s, "kappa_a", &mut p.kappa_a)?;
            let kappa_m_set = freq(&mut s, "kappa_m", &mut p.kappa_m)?;
            if !kappa_a_set && (kappa_m_set || p.omega_b != reference.omega_b) {
                p.kappa_a = crate::model::calibrated_kappa_a(p.omega_b, p.kappa_m);
            }
            freq(&mut s, "kappa_b", &mut p.kappa_b)?;
            freq(&mut s, "g_mb", &mut p.g_mb)?;
            freq(&mut s, "j_am", &mut p.j_am)?;
            freq(&mut s, "g_coh", &mut p.g_coh)?;
            let n_spin = s.number("n_spin")?.unwrap_or(DEFAULT_N_SPIN);
            let b0 = s.number("b0_tesla")?.unwrap_or(DEFAULT_B0_TESLA);
            let gyro = s.number("gyro_rad_per_s_per_t")?.unwrap_or(YIG_GYRO_RAD_PER_S_PER_T);
            p.drive_omega = match s.unit("drive_omega", &FREQ_UNITS)? {
                Some(u) => freq_value(u, omega_b),
                None => compute_rabi(b0, n_spin, gyro).map_err(|e| invalid(e.to_string()))?,
            };
            cfg.n_spin = n_spin;
            s.finish()?;
        }
        cfg.params.validate().map_err(|e| invalid(e.to_string()))?;
        if !(cfg.n_spin > 0.0) {
            return Err(invalid(format!("params.n_spin must be positive, got {}", cfg.n_spin)));
        }
        let omega_b = cfg.params.omega_b;

        if let Some(mut s) = Section::new("integration", root)? {
            let i = &mut cfg.integration;
            if let Some(m) = s.parsed::<Method>("method")? {
                i.method = m;
            }
            if let Some(u) = s.unit("dt", &TIME_UNITS)? {
                i.dt = time_value(u, omega_b);
            }
            // An explicit null keeps the automatic 3 / kappa_b horizon.
            if let Some(u) = s.unit("t_transient", &TIME_UNITS)? {
                i.t_transient = Some(time_value(u, omega_b));
            }
            if let Some(u) = s.unit("t_record", &TIME_UNITS)? {
                i.t_record = time_value(u, omega_b);
            }
            if let Some(n) = s.count("sample_stride")? {
                i.sample_stride = n;
            }
            if let Some(v) = s.number("rel_tol")? {
                i.rel_tol = v;
            }
            if let Some(v) = s.number("abs_tol")? {
                i.abs_tol = v;
            }
            s.finish()?;
        }
        cfg.integration.validate().map_err(|e| invalid(e.to_string()))?;

        if let Some(mut s) = Section::new("analysis", root)? {
            let t = &mut cfg.thresholds;
            if let Some(w) = s.parsed::<Window>("window")? {
                t.window = w;
            }
            let c: &mut CombCriteria = &mut t.comb;
            if let Some(v) = s.number("rep_guess_over_omega_b")? {
                c.rep_guess = v;
            }
            if let Some(v) = s.number("prominence_decades")? {
                c.prominence_decades = v;
            }
            if let Some(v) = s.number("plateau_band_decades")? {
                c.plateau_band_decades = v;
            }
            if let Some(v) = s.number("dynamic_range_decades")? {
                c.dynamic_range_decades = v;
            }
            if let Some(v) = s.number("flatness_chaos")? {
                t.flatness_chaos = v;
            }
            if let Some(n) = s.count("comb_min_lines")? {
                t.comb_min_lines = n;
            }
            if let Some(v) = s.number("tail_fraction")? {
                t.tail_fraction = v;
            }
            if let Some(v) = s.number("lyapunov_significance")? {
                t.lyapunov_significance = v;
            }
            s.finish()?;
        }
        validate_thresholds(&cfg.thresholds)?;

        if let Some(mut s) = Section::new("lyapunov", root)? {
            let enabled = s.boolean("enabled")?.unwrap_or(true);
            let mut l = LyapunovConfig::default();
            if let Some(u) = s.unit("renorm_interval", &TIME_UNITS)? {
                l.renorm_interval = time_value(u, omega_b);
            }
            if let Some(v) = s.number("perturbation_norm")? {
                l.perturbation_norm = v;
            }
            if let Some(n) = s.count("intervals")? {
                l.intervals = n;
            }
            s.finish()?;
            cfg.lyapunov = enabled.then_some(l);
        }
        if let Some(l) = &cfg.lyapunov {
            if !(l.renorm_interval > 0.0) || !(l.perturbation_norm > 0.0) || l.intervals < 100 {
                return Err(invalid(
                    "lyapunov needs renorm_interval > 0, perturbation_norm > 0 and at least 100 intervals",
                ));
            }
        }

        if let Some(mut s) = Section::new("sweep", root)? {
            let w = &mut cfg.sweep;
            if let Some(p) = s.parsed::<SweepParameter>("parameter")? {
                w.parameter = p;
            }
            if let Some(g) = s.numbers("grid_over_omega_b")? {
                w.grid = g;
            }
            let enabled = s.boolean("contour")?.unwrap_or(true);
            let mut axis = ContourAxis::default();
            if let Some(v) = s.number("contour_max_offset_over_omega_b")? {
                axis.max_offset = v;
            }
            if let Some(v) = s.number("contour_resolution_over_omega_b")? {
                axis.resolution = v;
            }
            s.finish()?;
            if enabled && !(axis.max_offset > 0.0 && axis.resolution > 0.0 && axis.resolution <= axis.max_offset) {
                return Err(invalid("contour axis needs 0 < resolution <= max_offset"));
            }
            w.contour = enabled.then_some(axis);
        }

        if let Some(v) = root.get("out") {
            cfg.out = match v {
                Value::String(s) if !s.is_empty() => PathBuf::from(s),
                other => return Err(invalid(format!("`out` must be a non-empty path string, got {other}"))),
            };
        }
        if let Some(v) = root.get("workers") {
            cfg.workers = v
                .as_u64()
                .filter(|&w| w >= 1)
                .ok_or_else(|| invalid(format!("`workers` must be a positive integer, got {v}")))?
                as usize;
        }
        if let Some(v) = root.get("seed") {
            cfg.seed = v
                .as_u64()
                .ok_or_else(|| invalid(format!("`seed` must be a non-negative integer, got {v}")))?;
        }
        cfg.sweep_spec().validate().map_err(invalid)?;
        Ok(cfg)
    }

    /// Canonical JSON form; parsing it yields an identical config.
    pub fn to_value(&self) -> Value {
        let p = &self.params;
        let i = &self.integration;
        let t = &self.thresholds;
        let mut params = serde_json::json!({
            "omega_b_rad_per_s": p.omega_b,
            "omega_a_rad_per_s": p.omega_a,
            "omega_m_rad_per_s": p.omega_m,
            "omega_l_rad_per_s": p.omega_l,
            "kappa_a_rad_per_s": p.kappa_a,
            "kappa_m_rad_per_s": p.kappa_m,
            "kappa_b_rad_per_s": p.kappa_b,
            "g_mb_rad_per_s": p.g_mb,
            "j_am_rad_per_s": p.j_am,
            "g_coh_rad_per_s": p.g_coh,
            "drive_omega_rad_per_s": p.drive_omega,
            "n_spin": self.n_spin,
        });
        params.as_object_mut().expect("object").sort_keys();
        let lyapunov = match &self.lyapunov {
            Some(l) => serde_json::json!({
                "enabled": true,
                "renorm_interval_times_omega_b": l.renorm_interval,
                "perturbation_norm": l.perturbation_norm,
                "intervals": l.intervals,
            }),
            None => serde_json::json!({ "enabled": false }),
        };
        let mut sweep = serde_json::json!({
            "parameter": self.sweep.parameter.name(),
            "grid_over_omega_b": self.sweep.grid,
            "contour": self.sweep.contour.is_some(),
        });
        if let Some(axis) = &self.sweep.contour {
            let m = sweep.as_object_mut().expect("object");
            m.insert("contour_max_offset_over_omega_b".into(), axis.max_offset.into());
            m.insert("contour_resolution_over_omega_b".into(), axis.resolution.into());
        }
        serde_json::json!({
            "params": params,
            "integration": {
                "method": match i.method { Method::Rk4 => "rk4", Method::Dp54 => "dp54" },
                "dt_times_omega_b": i.dt,
                "t_transient_times_omega_b": i.t_transient,
                "t_record_times_omega_b": i.t_record,
                "sample_stride": i.sample_stride,
                "rel_tol": i.rel_tol,
                "abs_tol": i.abs_tol,
            },
            "analysis": {
                "window": t.window.name(),
                "rep_guess_over_omega_b": t.comb.rep_guess,
                "prominence_decades": t.comb.prominence_decades,
                "plateau_band_decades": t.comb.plateau_band_decades,
                "dynamic_range_decades": t.comb.dynamic_range_decades,
                "flatness_chaos": t.flatness_chaos,
                "comb_min_lines": t.comb_min_lines,
                "tail_fraction": t.tail_fraction,
                "lyapunov_significance": t.lyapunov_significance,
            },
            "lyapunov": lyapunov,
            "sweep": sweep,
            "out": self.out.to_string_lossy(),
            "workers": self.workers,
            "seed": self.seed,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("config serializes") + "\n"
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            parameter: self.sweep.parameter,
            grid: self.sweep.grid.clone(),
            base: self.params,
            integration: self.integration,
            thresholds: self.thresholds,
            lyapunov: self.lyapunov,
            n_spin: self.n_spin,
            workers: self.workers,
            contour: self.sweep.contour,
        }
    }
}

fn validate_thresholds(t: &AnalysisThresholds) -> Result<(), ConfigError> {
    let c = &t.comb;
    let checks = [
        (
            c.rep_guess > 0.0 && c.rep_guess.is_finite(),
            "analysis.rep_guess_over_omega_b must be positive",
        ),
        (
            c.prominence_decades.is_finite(),
            "analysis.prominence_decades must be finite",
        ),
        (
            c.plateau_band_decades > 0.0,
            "analysis.plateau_band_decades must be positive",
        ),
        (
            c.dynamic_range_decades > 0.0,
            "analysis.dynamic_range_decades must be positive",
        ),
        (
            (0.0..=1.0).contains(&t.flatness_chaos),
            "analysis.flatness_chaos must lie in [0, 1]",
        ),
        (
            t.tail_fraction > 0.0 && t.tail_fraction <= 0.5,
            "analysis.tail_fraction must lie in (0, 0.5]",
        ),
        (
            t.lyapunov_significance >= 0.0,
            "analysis.lyapunov_significance must be non-negative",
        ),
    ];
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, msg)) => Err(invalid(*msg)),
        None => Ok(()),
    }
}

/// Splits a dotted key into its stem and unit suffix, if it has one.
pub fn split_unit(key: &str) -> (&str, Option<&'static str>) {
    for s in UNIT_SUFFIXES {
        if let Some(stem) = key.strip_suffix(s) {
            if !stem.is_empty() {
                return (stem, Some(s));
            }
        }
    }
    (key, None)
}

/// Applies `dotted.path=value` to a config document.
///
/// The value is read as JSON when it parses, otherwise as a string. Setting
/// one unit variant of a quantity removes its siblings, so
/// `params.kappa_m_hz=1e6` replaces a `kappa_m_rad_per_s` from the file.
/// Setting anything the drive is derived from drops an explicit drive.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{spec}` must look like key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(invalid(format!("override `{spec}` has an empty key segment")));
    }
    let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut segments: Vec<&str> = path.split('.').collect();
    let leaf = segments.pop().expect("non-empty path");
    let mut node = doc;
    for seg in segments {
        let map = node
            .as_object_mut()
            .ok_or_else(|| invalid(format!("override `{path}`: parent of `{seg}` is not an object")))?;
        node = map.entry(seg.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| invalid(format!("override `{path}`: parent of `{leaf}` is not an object")))?;
    let (stem, unit) = split_unit(leaf);
    if unit.is_some() {
        map.retain(|k, _| k == leaf || split_unit(k).0 != stem || split_unit(k).1.is_none());
    }
    if matches!(leaf, "b0_tesla" | "n_spin" | "gyro_rad_per_s_per_t") {
        map.retain(|k, _| split_unit(k).0 != "drive_omega");
    }
    map.insert(leaf.to_string(), value);
    Ok(())
}

/// Parses a grid flag: comma-separated values and `start:stop:step`
/// inclusive ranges, e.g. `0,0.5,0.8,1:3:0.5`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(invalid(format!("grid `{text}` has an empty entry")));
        }
        let num = |s: &str| -> Result<f64, ConfigError> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| invalid(format!("grid entry `{s}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(format!("grid entry `{s}` is not finite")))
            }
        };
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || b < a {
                    return Err(invalid(format!("range `{part}` needs start <= stop and step > 0")));
                }
                let n = ((b - a) / step + 1e-9).floor();
                if n > 1e5 {
                    return Err(invalid(format!("range `{part}` has more than 100000 points")));
                }
                for k in 0..=(n as usize) {
                    out.push(a + k as f64 * step);
                }
            }
            _ => {
                return Err(invalid(format!(
                    "grid entry `{part}` must be a number or start:stop:step"
                )))
            }
        }
    }
    if out.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(format!("grid `{text}` must be ascending")));
    }
    Ok(out)
}
