//! Time integration of the mode equations.
//!
//! Fixed-step classic RK4 is the production path: it is bit-reproducible
//! and its sample grid is exactly the step grid. An adaptive Dormand-Prince
//! 5(4) integrator that lands on the same sample times serves as a
//! cross-check.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IntegrationError;
use crate::model::{rhs, ModeState, ScaledParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Dp54,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "dp54" => Ok(Method::Dp54),
            other => Err(format!("unknown integration method `{other}` (expected rk4 or dp54)")),
        }
    }
}

/// Integration settings, all times in units of `1/omega_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    /// `None` means three phonon ring-down times, `3 / kappa_b`.
    pub t_transient: Option<f64>,
    pub t_record: f64,
    pub sample_stride: usize,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 2.0 * PI / 1024.0,
            t_transient: None,
            t_record: 2048.0 * 2.0 * PI,
            sample_stride: 1,
            method: Method::Rk4,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |msg: String| Err(IntegrationError::InvalidConfig(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_record > 0.0) || !self.t_record.is_finite() {
            return bad(format!("t_record must be positive, got {}", self.t_record));
        }
        if let Some(t) = self.t_transient {
            if !(t >= 0.0) || !t.is_finite() {
                return bad(format!("t_transient must be non-negative, got {t}"));
            }
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1".into());
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return bad("adaptive tolerances must be positive".into());
        }
        if self.sample_count() < 2 {
            return bad(format!(
                "t_record = {} holds fewer than two samples at dt = {}",
                self.t_record, self.dt
            ));
        }
        Ok(())
    }

    /// Transient horizon actually used for `p`.
    pub fn transient_horizon(&self, p: &ScaledParams) -> Result<f64, IntegrationError> {
        match self.t_transient {
            Some(t) => Ok(t),
            None if p.kappa_b > 0.0 => Ok(3.0 / p.kappa_b),
            None => Err(IntegrationError::InvalidConfig(
                "automatic transient needs kappa_b > 0; set t_transient explicitly".into(),
            )),
        }
    }

    /// Number of steps integrated before the first recorded sample.
    pub fn transient_steps(&self, p: &ScaledParams) -> Result<u64, IntegrationError> {
        let t = self.transient_horizon(p)?;
        Ok(snapped_ceil(t / self.dt) as u64)
    }

    pub fn dt_sample(&self) -> f64 {
        self.dt * self.sample_stride as f64
    }

    /// `floor(t_record / dt_sample)` truncated to a power of two.
    pub fn sample_count(&self) -> usize {
        let raw = snapped_floor(self.t_record / self.dt_sample());
        if raw < 1.0 {
            return 0;
        }
        let raw = raw.min((1u64 << 62) as f64) as u64;
        1usize << (63 - raw.leading_zeros())
    }

    /// Same config with the transient made explicit for `p`.
    pub fn resolved(&self, p: &ScaledParams) -> Result<IntegrationConfig, IntegrationError> {
        Ok(IntegrationConfig {
            t_transient: Some(self.transient_horizon(p)?),
            ..*self
        })
    }
}

/// Ratios within 1e-9 of an integer snap to it, so that
/// `2048 periods / (period / 1024)` gives exactly 2^21 rather than one less.
fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * r.abs().max(1.0)).then_some(r)
}

fn snapped_floor(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.floor())
}

fn snapped_ceil(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.ceil())
}

/// Uniformly sampled magnomechanical time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dt_sample: f64,
    pub samples: Vec<ModeState>,
    pub params_digest: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt_sample
    }

    pub fn last(&self) -> ModeState {
        *self.samples.last().expect("trajectory holds at least two samples")
    }

    pub fn max_magnon_number(&self) -> f64 {
        self.samples.iter().map(|s| s.magnon_number()).fold(0.0, f64::max)
    }
}

/// Classic fourth-order Runge-Kutta step.
#[inline]
pub fn rk4_step(s: &ModeState, p: &ScaledParams, dt: f64) -> ModeState {
    let h2 = 0.5 * dt;
    let k1 = rhs(s, p);
    let k2 = rhs(&(*s + k1 * h2), p);
    let k3 = rhs(&(*s + k2 * h2), p);
    let k4 = rhs(&(*s + k3 * dt), p);
    *s + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
}

/// Reproducibility fingerprint of the inputs to [`integrate`].
pub fn params_digest(p: &ScaledParams, cfg: &IntegrationConfig, initial: &ModeState) -> String {
    #[derive(Serialize)]
    struct Inputs<'a> {
        params: &'a ScaledParams,
        config: &'a IntegrationConfig,
        initial: &'a ModeState,
    }
    let bytes = serde_json::to_vec(&Inputs {
        params: p,
        config: cfg,
        initial,
    })
    .expect("plain data serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Integrates through the transient, then records `sample_count` samples.
pub fn integrate(
    p: &ScaledParams,
    cfg: &IntegrationConfig,
    initial: &ModeState,
) -> Result<Trajectory, IntegrationError> {
    cfg.validate()?;
    if !initial.is_finite() {
        return Err(IntegrationError::Diverged { step: 0, time: 0.0 });
    }
    let cfg = cfg.resolved(p)?;
    let digest = params_digest(p, &cfg, initial);
    match cfg.method {
        Method::Rk4 => integrate_rk4(p, &cfg, initial, digest),
        Method::Dp54 => integrate_dp54(p, &cfg, initial, digest),
    }
}

fn integrate_rk4(
    p: &ScaledParams,
    cfg: &IntegrationConfig,
    initial: &ModeState,
    digest: String,
) -> Result<Trajectory, IntegrationError> {
    let dt = cfg.dt;
    let n_transient = cfg.transient_steps(p)?;
    let n_samples = cfg.sample_count();
    let stride = cfg.sample_stride as u64;
    let mut state = *initial;
    let mut step: u64 = 0;

    let advance = |state: &mut ModeState, step: &mut u64| -> Result<(), IntegrationError> {
        *state = rk4_step(state, p, dt);
        *step += 1;
        if !state.is_finite() {
            return Err(IntegrationError::Diverged {
                step: *step,
                time: *step as f64 * dt,
            });
        }
        Ok(())
    };

    while step < n_transient {
        advance(&mut state, &mut step)?;
    }
    let t0 = step as f64 * dt;
    let mut samples = Vec::with_capacity(n_samples);
    samples.push(state);
    for _ in 1..n_samples {
        for _ in 0..stride {
            advance(&mut state, &mut step)?;
        }
        samples.push(state);
    }
    Ok(Trajectory {
        t0,
        dt_sample: cfg.dt_sample(),
        samples,
        params_digest: digest,
    })
}

// Dormand-Prince 5(4) tableau; the node coefficients are unused because the
// system is autonomous.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dp54<'a> {
    p: &'a ScaledParams,
    rel_tol: f64,
    abs_tol: f64,
    h: f64,
    /// First-same-as-last derivative at the current state.
    k1: ModeState,
}

impl<'a> Dp54<'a> {
    fn new(p: &'a ScaledParams, cfg: &IntegrationConfig, state: &ModeState) -> Self {
        Self {
            p,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            h: cfg.dt,
            k1: rhs(state, p),
        }
    }

    /// Advances `state` from `t` to exactly `t_end`.
    fn advance_to(&mut self, state: &mut ModeState, t: &mut f64, t_end: f64) -> Result<(), IntegrationError> {
        let p = self.p;
        while *t < t_end {
            let remaining = t_end - *t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let s = *state;
            let k1 = self.k1;
            let k2 = rhs(&(s + k1 * (h * A21)), p);
            let k3 = rhs(&(s + (k1 * A31 + k2 * A32) * h), p);
            let k4 = rhs(&(s + (k1 * A41 + k2 * A42 + k3 * A43) * h), p);
            let k5 = rhs(&(s + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h), p);
            let k6 = rhs(&(s + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h), p);
            let next = s + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
            let k7 = rhs(&next, p);
            let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;

            let (ys, yn, ye) = (s.to_real(), next.to_real(), err.to_real());
            let mut sum = 0.0;
            for i in 0..6 {
                let scale = self.abs_tol + self.rel_tol * ys[i].abs().max(yn[i].abs());
                let r = ye[i] / scale;
                sum += r * r;
            }
            let err_norm = (sum / 6.0).sqrt();
            if !err_norm.is_finite() || !next.is_finite() {
                // Shrink and retry; a genuinely divergent solution ends in underflow.
                self.h = h * 0.2;
            } else if err_norm <= 1.0 {
                *state = next;
                self.k1 = k7;
                *t = if last { t_end } else { *t + h };
                let factor = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                // Keep the step that was limited by the sample grid, not the shortened one.
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                continue;
            } else {
                self.h = h * (0.9 * err_norm.powf(-0.25)).clamp(0.1, 1.0);
            }
            if self.h < 1e-14 * t.abs().max(1.0) {
                if !state.is_finite() || !next.is_finite() {
                    return Err(IntegrationError::Diverged { step: 0, time: *t });
                }
                return Err(IntegrationError::StepUnderflow {
                    time: *t,
                    step_size: self.h,
                });
            }
        }
        Ok(())
    }
}

fn integrate_dp54(
    p: &ScaledParams,
    cfg: &IntegrationConfig,
    initial: &ModeState,
    digest: String,
) -> Result<Trajectory, IntegrationError> {
    let n_transient = cfg.transient_steps(p)?;
    let n_samples = cfg.sample_count();
    let t0 = n_transient as f64 * cfg.dt;
    let dt_sample = cfg.dt_sample();
    let mut state = *initial;
    let mut t = 0.0;
    let mut dp = Dp54::new(p, cfg, &state);
    dp.advance_to(&mut state, &mut t, t0)?;
    let mut samples = Vec::with_capacity(n_samples);
    samples.push(state);
    for k in 1..n_samples {
        dp.advance_to(&mut state, &mut t, t0 + k as f64 * dt_sample)?;
        samples.push(state);
    }
    Ok(Trajectory {
        t0,
        dt_sample,
        samples,
        params_digest: digest,
    })
}

/// Agreement between the fixed-step and adaptive integrators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckReport {
    /// `max_k |x_rk4(k) - x_dp54(k)| / max_k |x_rk4(k)|` over the record.
    pub max_rel_deviation: f64,
    pub mean_m2_rk4: f64,
    pub mean_m2_dp54: f64,
    /// `|mean_m2_rk4 - mean_m2_dp54| / mean_m2_rk4`, zero when both vanish.
    pub mean_m2_rel_diff: f64,
    pub bound: f64,
    pub flagged: bool,
}

/// Runs both methods on the same inputs; the caller shortens `cfg` as needed.
pub fn cross_check(
    p: &ScaledParams,
    cfg: &IntegrationConfig,
    initial: &ModeState,
    bound: f64,
) -> Result<CrossCheckReport, IntegrationError> {
    let fixed = integrate(
        p,
        &IntegrationConfig {
            method: Method::Rk4,
            ..*cfg
        },
        initial,
    )?;
    let adaptive = integrate(
        p,
        &IntegrationConfig {
            method: Method::Dp54,
            ..*cfg
        },
        initial,
    )?;
    let mut max_dev: f64 = 0.0;
    let mut max_norm: f64 = 0.0;
    for (x, y) in fixed.samples.iter().zip(&adaptive.samples) {
        max_dev = max_dev.max((*x - *y).norm());
        max_norm = max_norm.max(x.norm());
    }
    let max_rel_deviation = match (max_dev == 0.0, max_norm == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => max_dev / max_norm,
    };
    let mean = |t: &Trajectory| t.samples.iter().map(|s| s.magnon_number()).sum::<f64>() / t.len() as f64;
    let (m_fixed, m_adaptive) = (mean(&fixed), mean(&adaptive));
    let mean_m2_rel_diff = if m_fixed == m_adaptive {
        0.0
    } else {
        (m_fixed - m_adaptive).abs() / m_fixed.abs()
    };
    Ok(CrossCheckReport {
        max_rel_deviation,
        mean_m2_rk4: m_fixed,
        mean_m2_dp54: m_adaptive,
        mean_m2_rel_diff,
        bound,
        flagged: !(max_rel_deviation <= bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linear_steady_state, PhysicalParams};
    use num_complex::Complex64;

    fn reference() -> ScaledParams {
        PhysicalParams::reference().scaled().unwrap()
    }

    fn short_cfg() -> IntegrationConfig {
        IntegrationConfig {
            t_transient: Some(0.0),
            t_record: 64.0 * 2.0 * PI,
            ..Default::default()
        }
    }

    #[test]
    fn default_sample_count_is_exact_power_of_two() {
        let cfg = IntegrationConfig::default();
        assert_eq!(cfg.sample_count(), 1 << 21);
        let cfg = IntegrationConfig {
            sample_stride: 4,
            ..cfg
        };
        assert_eq!(cfg.sample_count(), 1 << 19);
        let cfg = IntegrationConfig {
            t_record: 3000.0 * 2.0 * PI,
            sample_stride: 1,
            ..cfg
        };
        assert_eq!(cfg.sample_count(), 1 << 21);
    }

    #[test]
    fn automatic_transient_is_three_ringdowns() {
        let p = reference();
        let t = IntegrationConfig::default().transient_horizon(&p).unwrap();
        assert!((t - 3.0 / p.kappa_b).abs() < 1e-9 * t);
        let p0 = ScaledParams { kappa_b: 0.0, ..p };
        assert!(IntegrationConfig::default().transient_horizon(&p0).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = reference();
        for cfg in [
            IntegrationConfig { dt: 0.0, ..short_cfg() },
            IntegrationConfig {
                dt: -1.0,
                ..short_cfg()
            },
            IntegrationConfig {
                t_record: 0.0,
                ..short_cfg()
            },
            IntegrationConfig {
                sample_stride: 0,
                ..short_cfg()
            },
            IntegrationConfig {
                t_record: 1e-3,
                ..short_cfg()
            },
            IntegrationConfig {
                t_transient: Some(-1.0),
                ..short_cfg()
            },
        ] {
            assert!(integrate(&p, &cfg, &ModeState::ZERO).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn zero_state_is_preserved_without_drive() {
        let p = ScaledParams {
            drive: 0.0,
            j_am: 1.0,
            ..reference()
        };
        assert_eq!(rk4_step(&ModeState::ZERO, &p, 0.01), ModeState::ZERO);
        let traj = integrate(&p, &short_cfg(), &ModeState::ZERO).unwrap();
        assert!(traj.samples.iter().all(|s| *s == ModeState::ZERO));
    }

    #[test]
    fn single_step_matches_phonon_exponential() {
        let p = ScaledParams {
            g_mb: 0.0,
            drive: 0.0,
            j_am: 0.0,
            ..reference()
        };
        let b0 = Complex64::new(0.7, -0.2);
        let s = ModeState::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), b0);
        let lambda = Complex64::new(-p.kappa_b, -1.0);
        let mut errors = Vec::new();
        for dt in [0.2, 0.1] {
            let exact = (lambda * dt).exp() * b0;
            errors.push((rk4_step(&s, &p, dt).b - exact).norm());
        }
        // Local error of RK4 is O(dt^5): halving dt divides it by ~32.
        let ratio = errors[0] / errors[1];
        assert!((26.0..38.0).contains(&ratio), "ratio {ratio}");
        assert!(errors[1] < 1e-7);
    }

    #[test]
    fn transient_and_record_bookkeeping() {
        let p = reference();
        let cfg = IntegrationConfig {
            t_transient: Some(10.0),
            t_record: 40.0,
            sample_stride: 3,
            dt: 0.01,
            ..Default::default()
        };
        let traj = integrate(&p, &cfg, &ModeState::ZERO).unwrap();
        // floor(40 / 0.03) = 1333 -> 1024.
        assert_eq!(traj.len(), 1024);
        assert!((traj.t0 - 10.0).abs() <= cfg.dt);
        assert!((traj.dt_sample - 0.03).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported_with_time() {
        // dt far outside the RK4 stability region for kappa_m.
        let p = ScaledParams {
            kappa_m: 1e3,
            drive: 1.0,
            ..reference()
        };
        let cfg = IntegrationConfig {
            dt: 1.0,
            t_transient: Some(0.0),
            t_record: 4096.0,
            ..Default::default()
        };
        match integrate(&p, &cfg, &ModeState::ZERO) {
            Err(IntegrationError::Diverged { step, time }) => {
                assert!(step > 0);
                assert_eq!(time, step as f64);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let p = ScaledParams {
            j_am: 1.0,
            ..reference()
        };
        let a = integrate(&p, &short_cfg(), &ModeState::ZERO).unwrap();
        let b = integrate(&p, &short_cfg(), &ModeState::ZERO).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dp54_tracks_linear_steady_state() {
        let base = reference();
        let p = ScaledParams {
            g_mb: 0.0,
            j_am: 0.1 * base.symmetric_threshold(),
            ..base
        };
        let cfg = IntegrationConfig {
            method: Method::Dp54,
            t_transient: Some(600.0),
            ..short_cfg()
        };
        let traj = integrate(&p, &cfg, &ModeState::ZERO).unwrap();
        let ss = linear_steady_state(&p);
        let last = traj.last();
        assert!((last.m - ss.m_ss).norm() / ss.m_ss.norm() < 1e-6);
    }

    #[test]
    fn cross_check_zero_drive_is_exact() {
        let p = ScaledParams {
            drive: 0.0,
            ..reference()
        };
        let r = cross_check(&p, &short_cfg(), &ModeState::ZERO, 1e-7).unwrap();
        assert_eq!(r.max_rel_deviation, 0.0);
        assert!(!r.flagged);
    }

    #[test]
    fn cross_check_flags_when_bound_is_exceeded() {
        let base = reference();
        let p = ScaledParams {
            g_mb: 0.0,
            j_am: 0.1,
            ..base
        };
        let r = cross_check(&p, &short_cfg(), &ModeState::ZERO, 0.0).unwrap();
        assert!(r.flagged);
        assert!(r.max_rel_deviation > 0.0 && r.max_rel_deviation < 1e-7);
    }
}
