//! Sweeps over the dissipative coupling and the per-point diagnostics:
//! steady magnon number, largest Lyapunov exponent and regime label.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::IntegrationError;
use crate::integrator::{integrate, rk4_step, IntegrationConfig, Trajectory};
use crate::model::{ModeState, PhysicalParams, ScaledParams, DEFAULT_N_SPIN};
use crate::spectral::{analyze_comb, power_spectrum, CombAnalysis, CombCriteria, Spectrum, Window};

/// Time average of `|m|^2` over the final `tail_fraction` of the record.
pub fn steady_magnon_number(traj: &Trajectory, tail_fraction: f64) -> f64 {
    let n = traj.len();
    let count = ((n as f64 * tail_fraction).round() as usize).clamp(1, n);
    traj.samples[n - count..].iter().map(|s| s.magnon_number()).sum::<f64>() / count as f64
}

/// Relative spread of `|m|^2` over the tail: standard deviation over mean.
pub fn tail_relative_spread(traj: &Trajectory, tail_fraction: f64) -> f64 {
    let n = traj.len();
    let count = ((n as f64 * tail_fraction).round() as usize).clamp(1, n);
    let tail = &traj.samples[n - count..];
    let mean = tail.iter().map(|s| s.magnon_number()).sum::<f64>() / count as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let var = tail.iter().map(|s| (s.magnon_number() - mean).powi(2)).sum::<f64>() / count as f64;
    var.sqrt() / mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Scaled time between renormalizations.
    pub renorm_interval: f64,
    /// Initial separation relative to the fiducial state norm (floored at 1).
    pub perturbation_norm: f64,
    pub intervals: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            renorm_interval: 2.0 * PI,
            perturbation_norm: 1e-8,
            intervals: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Mean of the second half of `history`, in units of `omega_b`.
    pub lambda_max: f64,
    /// Standard error of that mean.
    pub std_error: f64,
    /// Local exponent `ln(d / d0) / interval` at every renormalization.
    pub history: Vec<f64>,
    /// Running mean of `history`.
    pub running: Vec<f64>,
    pub renorm_interval: f64,
    pub perturbation_norm: f64,
}

impl LyapunovResult {
    pub fn lambda_max_si(&self, omega_b_si: f64) -> f64 {
        self.lambda_max * omega_b_si
    }

    /// Inverse of the time spanned by the averaged half of `history`: the
    /// smallest exponent distinguishable from zero over that span.
    pub fn resolution(&self) -> f64 {
        let tail = self.history.len() - self.history.len() / 2;
        1.0 / (tail.max(1) as f64 * self.renorm_interval)
    }
}

/// Fixed direction in the six real coordinates, unit norm.
fn perturbation_direction() -> ModeState {
    let raw = [0.31, -0.47, 0.52, 0.18, -0.39, 0.46];
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    ModeState::from_real(raw.map(|x| x / norm))
}

/// Benettin estimate starting from `start`, which should already sit on
/// the attractor.
pub fn lyapunov_from_state(
    p: &ScaledParams,
    start: &ModeState,
    dt: f64,
    cfg: &LyapunovConfig,
) -> Result<LyapunovResult, IntegrationError> {
    if !(cfg.renorm_interval > 0.0) || !(cfg.perturbation_norm > 0.0) || cfg.intervals < 100 {
        return Err(IntegrationError::InvalidConfig(
            "lyapunov needs renorm_interval > 0, perturbation_norm > 0 and at least 100 intervals".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(IntegrationError::InvalidConfig(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let steps = ((cfg.renorm_interval / dt).round() as u64).max(1);
    let interval = steps as f64 * dt;
    let d0 = cfg.perturbation_norm * start.norm().max(1.0);
    let mut fiducial = *start;
    let mut perturbed = *start + perturbation_direction() * d0;
    let mut history = Vec::with_capacity(cfg.intervals);
    let mut step: u64 = 0;
    for _ in 0..cfg.intervals {
        for _ in 0..steps {
            fiducial = rk4_step(&fiducial, p, dt);
            perturbed = rk4_step(&perturbed, p, dt);
            step += 1;
        }
        if !fiducial.is_finite() {
            return Err(IntegrationError::Diverged {
                step,
                time: step as f64 * dt,
            });
        }
        let sep = perturbed - fiducial;
        let d = sep.norm();
        if !(d > 0.0) || !d.is_finite() {
            // Perturbation lost to rounding or blew up; restart it along the fixed direction.
            history.push(if d.is_finite() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            });
            perturbed = fiducial + perturbation_direction() * d0;
            continue;
        }
        history.push((d / d0).ln() / interval);
        perturbed = fiducial + sep * (d0 / d);
    }
    if history.iter().any(|h| !h.is_finite()) {
        return Err(IntegrationError::InvalidConfig(
            "perturbation collapsed below rounding; raise perturbation_norm".into(),
        ));
    }
    let tail = &history[history.len() / 2..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (tail.len() as f64 - 1.0).max(1.0);
    let std_error = (var / tail.len() as f64).sqrt();
    let mut acc = 0.0;
    let running = history
        .iter()
        .enumerate()
        .map(|(i, h)| {
            acc += h;
            acc / (i + 1) as f64
        })
        .collect();
    Ok(LyapunovResult {
        lambda_max: mean,
        std_error,
        history,
        running,
        renorm_interval: interval,
        perturbation_norm: cfg.perturbation_norm,
    })
}

/// Integrates through the transient of `cfg`, then runs the Benettin
/// estimator from the state reached.
pub fn lyapunov_largest(
    p: &ScaledParams,
    cfg: &IntegrationConfig,
    initial: &ModeState,
    lyap: &LyapunovConfig,
) -> Result<LyapunovResult, IntegrationError> {
    cfg.validate()?;
    let n = cfg.transient_steps(p)?;
    let mut s = *initial;
    for step in 1..=n {
        s = rk4_step(&s, p, cfg.dt);
        if !s.is_finite() {
            return Err(IntegrationError::Diverged {
                step,
                time: step as f64 * cfg.dt,
            });
        }
    }
    lyapunov_from_state(p, &s, cfg.dt, lyap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    BelowThreshold,
    Comb,
    Chaotic,
    Diverged,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowThreshold => "below-threshold",
            Regime::Comb => "comb",
            Regime::Chaotic => "chaotic",
            Regime::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisThresholds {
    pub window: Window,
    pub comb: CombCriteria,
    pub flatness_chaos: f64,
    pub comb_min_lines: usize,
    pub tail_fraction: f64,
    /// A positive exponent only counts as chaos when it exceeds this many
    /// standard errors of the estimate, or this many resolution units if
    /// larger. Zero gives the bare sign test.
    pub lyapunov_significance: f64,
}

impl Default for AnalysisThresholds {
    fn default() -> Self {
        Self {
            window: Window::Hann,
            comb: CombCriteria::default(),
            flatness_chaos: 0.3,
            comb_min_lines: 5,
            tail_fraction: 0.25,
            lyapunov_significance: 2.0,
        }
    }
}

pub fn classify_regime(
    line_count: usize,
    flatness: f64,
    lyapunov: Option<&LyapunovResult>,
    diverged: bool,
    thresholds: &AnalysisThresholds,
) -> Regime {
    if diverged {
        return Regime::Diverged;
    }
    let chaotic_exponent = lyapunov.is_some_and(|l| {
        l.lambda_max > 0.0 && l.lambda_max > thresholds.lyapunov_significance * l.std_error.max(l.resolution())
    });
    if chaotic_exponent || flatness > thresholds.flatness_chaos {
        Regime::Chaotic
    } else if line_count >= thresholds.comb_min_lines {
        Regime::Comb
    } else {
        Regime::BelowThreshold
    }
}

/// Parameter varied by a sweep, given in units of `omega_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    JAm,
    GCoh,
    KappaA,
    DeltaA,
    DeltaM,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::JAm => "j_am",
            SweepParameter::GCoh => "g_coh",
            SweepParameter::KappaA => "kappa_a",
            SweepParameter::DeltaA => "delta_a",
            SweepParameter::DeltaM => "delta_m",
        }
    }

    pub fn apply(self, base: &PhysicalParams, value_over_omega_b: f64) -> PhysicalParams {
        let mut p = *base;
        let v = value_over_omega_b * base.omega_b;
        match self {
            SweepParameter::JAm => p.j_am = v,
            SweepParameter::GCoh => p.g_coh = v,
            SweepParameter::KappaA => p.kappa_a = v,
            SweepParameter::DeltaA => p.omega_a = p.omega_l - v,
            SweepParameter::DeltaM => p.omega_m = p.omega_l - v,
        }
        p
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "j_am" => Ok(SweepParameter::JAm),
            "g_coh" => Ok(SweepParameter::GCoh),
            "kappa_a" => Ok(SweepParameter::KappaA),
            "delta_a" => Ok(SweepParameter::DeltaA),
            "delta_m" => Ok(SweepParameter::DeltaM),
            other => Err(format!("unknown sweep parameter `{other}`")),
        }
    }
}

/// Frequency axis of the contour matrix, in units of `omega_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourAxis {
    pub max_offset: f64,
    pub resolution: f64,
}

impl Default for ContourAxis {
    fn default() -> Self {
        Self {
            max_offset: 256.0,
            resolution: 0.25,
        }
    }
}

impl ContourAxis {
    pub fn cells(&self) -> usize {
        (2.0 * self.max_offset / self.resolution).round() as usize
    }

    /// Center frequency of every cell.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells())
            .map(|i| -self.max_offset + (i as f64 + 0.5) * self.resolution)
            .collect()
    }

    /// Max-pooled `log10` power per cell; `NaN` for cells with no bins.
    pub fn pool(&self, spec: &Spectrum) -> Vec<f64> {
        let cells = self.cells();
        let mut out = vec![f64::NAN; cells];
        for (f, l) in spec.freqs.iter().zip(&spec.log_power) {
            let pos = (f + self.max_offset) / self.resolution;
            if pos < 0.0 || pos >= cells as f64 {
                continue;
            }
            let c = &mut out[pos as usize];
            if c.is_nan() || *l > *c {
                *c = *l;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    /// Values in units of `omega_b`, sorted ascending.
    pub grid: Vec<f64>,
    pub base: PhysicalParams,
    pub integration: IntegrationConfig,
    pub thresholds: AnalysisThresholds,
    /// `None` skips the Lyapunov estimate.
    pub lyapunov: Option<LyapunovConfig>,
    pub n_spin: f64,
    pub workers: usize,
    pub contour: Option<ContourAxis>,
}

impl SweepSpec {
    pub fn new(grid: Vec<f64>) -> Self {
        Self {
            parameter: SweepParameter::JAm,
            grid,
            base: PhysicalParams::reference(),
            integration: IntegrationConfig::default(),
            thresholds: AnalysisThresholds::default(),
            lyapunov: Some(LyapunovConfig::default()),
            n_spin: DEFAULT_N_SPIN,
            workers: 1,
            contour: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.grid.is_empty() {
            return Err("sweep grid is empty".into());
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err("sweep grid contains non-finite values".into());
        }
        if self.grid.windows(2).any(|w| w[1] < w[0]) {
            return Err("sweep grid must be sorted ascending".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        if !(self.n_spin > 0.0) {
            return Err("n_spin must be positive".into());
        }
        let tf = self.thresholds.tail_fraction;
        if !(tf > 0.0 && tf <= 0.5) {
            return Err(format!("tail_fraction must lie in (0, 0.5], got {tf}"));
        }
        self.integration.validate().map_err(|e| e.to_string())?;
        self.base.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Swept value in units of `omega_b`.
    pub value: f64,
    pub steady_m2: f64,
    pub line_count: usize,
    pub plateau_lo: Option<i64>,
    pub plateau_hi: Option<i64>,
    pub cutoff_order: Option<i64>,
    pub flatness: f64,
    pub repetition_rate: Option<f64>,
    /// Largest Lyapunov exponent in units of `omega_b`.
    pub lyapunov: Option<f64>,
    pub lyapunov_std_error: Option<f64>,
    pub regime: Regime,
    /// `max |m|^2 / (2 N_spin)`, the low-lying excitation check.
    pub low_lying_ratio: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub contour: Option<Vec<f64>>,
}

impl SweepRow {
    fn diverged(value: f64, err: String) -> Self {
        SweepRow {
            value,
            steady_m2: f64::NAN,
            line_count: 0,
            plateau_lo: None,
            plateau_hi: None,
            cutoff_order: None,
            flatness: f64::NAN,
            repetition_rate: None,
            lyapunov: None,
            lyapunov_std_error: None,
            regime: Regime::Diverged,
            low_lying_ratio: f64::NAN,
            error: Some(err),
            contour: None,
        }
    }
}

/// Everything computed for one parameter point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub trajectory: Trajectory,
    pub spectrum: Spectrum,
    pub comb: CombAnalysis,
    pub lyapunov: Option<LyapunovResult>,
    pub row: SweepRow,
}

/// Integrate, transform, analyze and optionally estimate the exponent for
/// one parameter set.
pub fn run_point(
    physical: &PhysicalParams,
    value: f64,
    integration: &IntegrationConfig,
    thresholds: &AnalysisThresholds,
    lyapunov: Option<&LyapunovConfig>,
    n_spin: f64,
) -> Result<PointResult, String> {
    let p = physical.scaled().map_err(|e| e.to_string())?;
    let trajectory = integrate(&p, integration, &ModeState::ZERO).map_err(|e| e.to_string())?;
    let spectrum = power_spectrum(&trajectory, thresholds.window).map_err(|e| e.to_string())?;
    let comb = analyze_comb(&spectrum, &thresholds.comb).map_err(|e| e.to_string())?;
    let lyap = match lyapunov {
        Some(cfg) => Some(lyapunov_from_state(&p, &trajectory.last(), integration.dt, cfg).map_err(|e| e.to_string())?),
        None => None,
    };
    let regime = classify_regime(comb.line_count, comb.flatness, lyap.as_ref(), false, thresholds);
    let row = SweepRow {
        value,
        steady_m2: steady_magnon_number(&trajectory, thresholds.tail_fraction),
        line_count: comb.line_count,
        plateau_lo: comb.plateau.as_ref().map(|pl| pl.first_order),
        plateau_hi: comb.plateau.as_ref().map(|pl| pl.last_order),
        cutoff_order: comb.cutoff_order,
        flatness: comb.flatness,
        repetition_rate: comb.repetition_rate,
        lyapunov: lyap.as_ref().map(|l| l.lambda_max),
        lyapunov_std_error: lyap.as_ref().map(|l| l.std_error),
        regime,
        low_lying_ratio: trajectory.max_magnon_number() / (2.0 * n_spin),
        error: None,
        contour: None,
    };
    Ok(PointResult {
        trajectory,
        spectrum,
        comb,
        lyapunov: lyap,
        row,
    })
}

fn sweep_point(spec: &SweepSpec, value: f64) -> SweepRow {
    let physical = spec.parameter.apply(&spec.base, value);
    match run_point(
        &physical,
        value,
        &spec.integration,
        &spec.thresholds,
        spec.lyapunov.as_ref(),
        spec.n_spin,
    ) {
        Ok(point) => {
            let mut row = point.row;
            row.contour = spec.contour.map(|axis| axis.pool(&point.spectrum));
            row
        }
        Err(e) => SweepRow::diverged(value, e),
    }
}

/// Runs every grid point on a pool of `spec.workers` threads. Rows come
/// back in grid order; a failing point yields a diverged row.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, String> {
    spec.validate()?;
    if spec.workers == 1 {
        return Ok(spec.grid.iter().map(|&v| sweep_point(spec, v)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| e.to_string())?;
    Ok(pool.install(|| spec.grid.par_iter().map(|&v| sweep_point(spec, v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lyap_result(lambda: f64, se: f64) -> LyapunovResult {
        LyapunovResult {
            lambda_max: lambda,
            std_error: se,
            history: vec![lambda; 4096],
            running: vec![lambda; 4096],
            renorm_interval: 1.0,
            perturbation_norm: 1e-8,
        }
    }

    #[test]
    fn classify_examples() {
        let th = AnalysisThresholds::default();
        let neg = lyap_result(-0.01, 1e-4);
        assert_eq!(classify_regime(2, 0.01, Some(&neg), false, &th), Regime::BelowThreshold);
        assert_eq!(classify_regime(160, 0.05, Some(&neg), false, &th), Regime::Comb);
        let pos = lyap_result(0.02, 1e-4);
        assert_eq!(classify_regime(300, 0.6, Some(&pos), false, &th), Regime::Chaotic);
        assert_eq!(classify_regime(300, 0.01, Some(&pos), false, &th), Regime::Chaotic);
        assert_eq!(classify_regime(300, 0.6, None, false, &th), Regime::Chaotic);
        assert_eq!(classify_regime(300, 0.01, Some(&pos), true, &th), Regime::Diverged);
    }

    #[test]
    fn insignificant_positive_exponent_is_not_chaos() {
        let th = AnalysisThresholds::default();
        let noisy = lyap_result(1e-5, 1e-4);
        assert_eq!(classify_regime(80, 0.01, Some(&noisy), false, &th), Regime::Comb);
        let literal = AnalysisThresholds {
            lyapunov_significance: 0.0,
            ..th
        };
        assert_eq!(
            classify_regime(80, 0.01, Some(&noisy), false, &literal),
            Regime::Chaotic
        );
    }

    #[test]
    fn exponent_below_resolution_is_not_chaos() {
        let th = AnalysisThresholds::default();
        // Tiny scatter, but the averaging span only resolves 1/2048.
        let short = lyap_result(5e-4, 1e-9);
        assert!((short.resolution() - 1.0 / 2048.0).abs() < 1e-15);
        assert_eq!(classify_regime(80, 0.01, Some(&short), false, &th), Regime::Comb);
        let clear = lyap_result(5e-3, 1e-9);
        assert_eq!(classify_regime(80, 0.01, Some(&clear), false, &th), Regime::Chaotic);
    }

    #[test]
    fn sweep_spec_validation() {
        assert!(SweepSpec::new(vec![]).validate().is_err());
        assert!(SweepSpec::new(vec![1.0, 0.5]).validate().is_err());
        assert!(SweepSpec::new(vec![f64::NAN]).validate().is_err());
        let mut s = SweepSpec::new(vec![0.0]);
        s.thresholds.tail_fraction = 0.8;
        assert!(s.validate().is_err());
        assert!(SweepSpec::new(vec![0.0, 0.5, 0.5, 1.0]).validate().is_ok());
    }

    #[test]
    fn sweep_parameter_application() {
        let base = PhysicalParams::reference();
        let p = SweepParameter::JAm.apply(&base, 1.3);
        assert!((p.j_am / p.omega_b - 1.3).abs() < 1e-15);
        let p = SweepParameter::DeltaM.apply(&base, 0.5);
        assert!((p.delta_m() / p.omega_b - 0.5).abs() < 1e-9);
    }

    #[test]
    fn contour_pooling() {
        let axis = ContourAxis {
            max_offset: 2.0,
            resolution: 1.0,
        };
        assert_eq!(axis.centers(), vec![-1.5, -0.5, 0.5, 1.5]);
        let spec = Spectrum {
            freqs: vec![-1.8, -1.2, 0.1, 0.4, 3.0],
            power: vec![1.0; 5],
            log_power: vec![1.0, 2.0, -1.0, -0.5, 9.0],
            window: Window::Hann,
            bin_width: 0.3,
        };
        let pooled = axis.pool(&spec);
        assert_eq!(pooled[0], 2.0);
        assert!(pooled[1].is_nan());
        assert_eq!(pooled[2], -0.5);
        assert!(pooled[3].is_nan());
    }

    #[test]
    fn steady_number_zero_without_drive() {
        let traj = Trajectory {
            t0: 0.0,
            dt_sample: 0.1,
            samples: vec![ModeState::ZERO; 64],
            params_digest: String::new(),
        };
        assert_eq!(steady_magnon_number(&traj, 0.25), 0.0);
        assert_eq!(tail_relative_spread(&traj, 0.25), 0.0);
    }
}
