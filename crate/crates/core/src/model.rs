//! Physical parameters and the three-mode equations of motion.
//!
//! The cavity mode `a`, the Kittel (magnon) mode `m` and the mechanical
//! mode `b` are treated as semiclassical complex amplitudes in the frame
//! rotating at the drive frequency. Everything that is integrated lives in
//! [`ScaledParams`], where the mechanical frequency is exactly one and time
//! is measured in units of `1/omega_b`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Gyromagnetic ratio of YIG, 2π × 28 GHz/T, in rad/s per tesla.
pub const YIG_GYRO_RAD_PER_S_PER_T: f64 = 2.0 * PI * 28.0e9;

/// Spin count of a 250 µm YIG sphere (spin density 4.22e27 m⁻³).
pub const DEFAULT_N_SPIN: f64 = 3.5e16;

/// Drive field amplitude used for the reference parameter set, tesla.
pub const DEFAULT_B0_TESLA: f64 = 3.5e-5;

/// Rabi frequency of a microwave drive acting on the Kittel mode,
/// `sqrt(5 N) * gyro * b0 / 4`.
pub fn compute_rabi(b0: f64, n_spin: f64, gyro: f64) -> Result<f64, ModelError> {
    if !(n_spin > 0.0) || !n_spin.is_finite() {
        return Err(ModelError::invalid("n_spin", n_spin, "must be positive"));
    }
    if !(gyro > 0.0) || !gyro.is_finite() {
        return Err(ModelError::invalid("gyro", gyro, "must be positive"));
    }
    if !(b0 >= 0.0) || !b0.is_finite() {
        return Err(ModelError::invalid("b0", b0, "must be non-negative"));
    }
    Ok((5.0 * n_spin).sqrt() * gyro * b0 / 4.0)
}

/// Kittel-mode frequency for a bias field `h_field` (tesla).
pub fn kittel_frequency(h_field: f64, gyro: f64) -> Result<f64, ModelError> {
    if !(h_field >= 0.0) || !h_field.is_finite() {
        return Err(ModelError::invalid("h_field", h_field, "must be non-negative"));
    }
    Ok(gyro * h_field)
}

/// Lab-frame parameters, all angular quantities in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega_b: f64,
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_l: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub g_mb: f64,
    /// Dissipative magnon-photon coupling (Γ ≡ J_am).
    pub j_am: f64,
    /// Coherent magnon-photon coupling, zero unless a sensitivity study asks for it.
    pub g_coh: f64,
    /// Rabi frequency Ω of the magnon drive.
    pub drive_omega: f64,
}

impl PhysicalParams {
    /// Reference operating point: 11.42 MHz phonon, 0.56 MHz magnon
    /// linewidth, 150 Hz phonon linewidth, 9.88 mHz magnetostrictive
    /// coupling, both detunings equal to `omega_b`, `B0 = 3.5e-5 T`.
    ///
    /// `kappa_a` is chosen so that `sqrt(kappa_a * kappa_m) = omega_b / 2`,
    /// the coupling at which the linear magnon-photon system loses
    /// stability.
    pub fn reference() -> Self {
        let two_pi = 2.0 * PI;
        let omega_b = two_pi * 11.42e6;
        let kappa_m = two_pi * 0.56e6;
        let omega_l = two_pi * 10.0e9;
        let drive = compute_rabi(DEFAULT_B0_TESLA, DEFAULT_N_SPIN, YIG_GYRO_RAD_PER_S_PER_T)
            .expect("reference drive parameters are valid");
        Self {
            omega_b,
            omega_a: omega_l - omega_b,
            omega_m: omega_l - omega_b,
            omega_l,
            kappa_a: calibrated_kappa_a(omega_b, kappa_m),
            kappa_m,
            kappa_b: two_pi * 150.0,
            g_mb: two_pi * 9.88e-3,
            j_am: 0.0,
            g_coh: 0.0,
            drive_omega: drive,
        }
    }

    pub fn delta_a(&self) -> f64 {
        self.omega_l - self.omega_a
    }

    pub fn delta_m(&self) -> f64 {
        self.omega_l - self.omega_m
    }

    pub fn with_j_am_over_omega_b(mut self, ratio: f64) -> Self {
        self.j_am = ratio * self.omega_b;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega_b", self.omega_b),
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_l", self.omega_l),
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_b", self.kappa_b),
            ("g_mb", self.g_mb),
            ("j_am", self.j_am),
            ("g_coh", self.g_coh),
            ("drive_omega", self.drive_omega),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::invalid(name, v, "must be finite"));
            }
        }
        if !(self.omega_b > 0.0) {
            return Err(ModelError::invalid("omega_b", self.omega_b, "must be positive"));
        }
        let non_negative = [
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_b", self.kappa_b),
            ("g_mb", self.g_mb),
            ("j_am", self.j_am),
            ("drive_omega", self.drive_omega),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(ModelError::invalid(name, v, "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Divides every rate by `omega_b`.
    pub fn scaled(&self) -> Result<ScaledParams, ModelError> {
        self.validate()?;
        let u = self.omega_b;
        Ok(ScaledParams {
            omega_b_si: u,
            omega_l: self.omega_l / u,
            delta_a: self.delta_a() / u,
            delta_m: self.delta_m() / u,
            kappa_a: self.kappa_a / u,
            kappa_m: self.kappa_m / u,
            kappa_b: self.kappa_b / u,
            g_mb: self.g_mb / u,
            j_am: self.j_am / u,
            g_coh: self.g_coh / u,
            drive: self.drive_omega / u,
        })
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// `kappa_a` that puts the linear instability threshold at `omega_b / 2`.
pub fn calibrated_kappa_a(omega_b: f64, kappa_m: f64) -> f64 {
    let threshold = 0.5 * omega_b;
    threshold * threshold / kappa_m
}

/// Dimensionless parameters in units of the mechanical frequency.
///
/// The mechanical frequency itself is implicitly one; `omega_b_si` keeps
/// the time unit so that results can be mapped back to SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub omega_b_si: f64,
    /// Drive frequency over `omega_b`; only needed to undo the scaling.
    pub omega_l: f64,
    pub delta_a: f64,
    pub delta_m: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub kappa_b: f64,
    pub g_mb: f64,
    pub j_am: f64,
    pub g_coh: f64,
    pub drive: f64,
}

impl ScaledParams {
    /// Scaled mechanical frequency, exactly one by construction.
    pub const OMEGA_B: f64 = 1.0;

    pub fn to_physical(&self) -> PhysicalParams {
        let u = self.omega_b_si;
        let omega_l = self.omega_l * u;
        PhysicalParams {
            omega_b: u,
            omega_a: omega_l - self.delta_a * u,
            omega_m: omega_l - self.delta_m * u,
            omega_l,
            kappa_a: self.kappa_a * u,
            kappa_m: self.kappa_m * u,
            kappa_b: self.kappa_b * u,
            g_mb: self.g_mb * u,
            j_am: self.j_am * u,
            g_coh: self.g_coh * u,
            drive_omega: self.drive * u,
        }
    }

    /// `sqrt(kappa_a * kappa_m)`, the equal-detuning instability threshold.
    pub fn symmetric_threshold(&self) -> f64 {
        (self.kappa_a * self.kappa_m).sqrt()
    }
}

/// Complex amplitudes of the cavity, magnon and phonon modes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeState {
    pub a: Complex64,
    pub m: Complex64,
    pub b: Complex64,
}

impl ModeState {
    pub const ZERO: ModeState = ModeState {
        a: Complex64 { re: 0.0, im: 0.0 },
        m: Complex64 { re: 0.0, im: 0.0 },
        b: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(a: Complex64, m: Complex64, b: Complex64) -> Self {
        Self { a, m, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.re.is_finite()
            && self.a.im.is_finite()
            && self.m.re.is_finite()
            && self.m.im.is_finite()
            && self.b.re.is_finite()
            && self.b.im.is_finite()
    }

    /// Magnon number `|m|^2`.
    pub fn magnon_number(&self) -> f64 {
        self.m.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.m.norm_sqr() + self.b.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Flattened `[re a, im a, re m, im m, re b, im b]`.
    pub fn to_real(&self) -> [f64; 6] {
        [self.a.re, self.a.im, self.m.re, self.m.im, self.b.re, self.b.im]
    }

    pub fn from_real(x: [f64; 6]) -> Self {
        Self {
            a: Complex64::new(x[0], x[1]),
            m: Complex64::new(x[2], x[3]),
            b: Complex64::new(x[4], x[5]),
        }
    }
}

impl Add for ModeState {
    type Output = ModeState;
    fn add(self, rhs: ModeState) -> ModeState {
        ModeState::new(self.a + rhs.a, self.m + rhs.m, self.b + rhs.b)
    }
}

impl Sub for ModeState {
    type Output = ModeState;
    fn sub(self, rhs: ModeState) -> ModeState {
        ModeState::new(self.a - rhs.a, self.m - rhs.m, self.b - rhs.b)
    }
}

impl AddAssign for ModeState {
    fn add_assign(&mut self, rhs: ModeState) {
        self.a += rhs.a;
        self.m += rhs.m;
        self.b += rhs.b;
    }
}

impl Mul<f64> for ModeState {
    type Output = ModeState;
    fn mul(self, k: f64) -> ModeState {
        ModeState::new(self.a * k, self.m * k, self.b * k)
    }
}

impl Mul<Complex64> for ModeState {
    type Output = ModeState;
    fn mul(self, k: Complex64) -> ModeState {
        ModeState::new(self.a * k, self.m * k, self.b * k)
    }
}

/// Time derivative of the mode amplitudes.
///
/// ```text
/// db/dt = (-i ω_b - κ_b) b - i g |m|²
/// da/dt = (i Δ_a - κ_a) a - Γ m - i g_coh m
/// dm/dt = (i Δ_m - κ_m) m - Γ a - i g_coh a - i g (b + b*) m + Ω
/// ```
#[inline]
pub fn rhs(s: &ModeState, p: &ScaledParams) -> ModeState {
    let m2 = s.m.norm_sqr();
    let db = Complex64::new(-p.kappa_b, -ScaledParams::OMEGA_B) * s.b - Complex64::new(0.0, p.g_mb * m2);
    let coupling = Complex64::new(p.j_am, p.g_coh);
    let da = Complex64::new(-p.kappa_a, p.delta_a) * s.a - coupling * s.m;
    let dm = Complex64::new(-p.kappa_m, p.delta_m) * s.m - coupling * s.a - I * (p.g_mb * 2.0 * s.b.re) * s.m + p.drive;
    ModeState::new(da, dm, db)
}

/// Fixed point of the `(a, m)` subsystem with the magnetostrictive
/// coupling switched off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSteadyState {
    pub a_ss: Complex64,
    pub m_ss: Complex64,
    pub stable: bool,
    /// Dissipative coupling at which the linear system becomes unstable.
    pub gamma_star: f64,
    /// Largest real part of the `(a, m)` eigenvalues.
    pub max_growth: f64,
}

/// Eigenvalues of the linear `(a, m)` drift matrix
/// `[[iΔ_a - κ_a, -c], [-c, iΔ_m - κ_m]]` with `c = Γ + i g_coh`.
pub fn linear_eigenvalues(p: &ScaledParams) -> [Complex64; 2] {
    let la = Complex64::new(-p.kappa_a, p.delta_a);
    let lm = Complex64::new(-p.kappa_m, p.delta_m);
    let c = Complex64::new(p.j_am, p.g_coh);
    let half_trace = (la + lm) * 0.5;
    let half_diff = (la - lm) * 0.5;
    let root = (half_diff * half_diff + c * c).sqrt();
    [half_trace + root, half_trace - root]
}

/// Largest real part of [`linear_eigenvalues`].
pub fn linear_max_growth(p: &ScaledParams) -> f64 {
    let [l1, l2] = linear_eigenvalues(p);
    l1.re.max(l2.re)
}

/// Documented as the `g_mb = 0` oracle: the magnetostrictive coupling in
/// `p` is ignored.
pub fn linear_steady_state(p: &ScaledParams) -> LinearSteadyState {
    let la = Complex64::new(-p.kappa_a, p.delta_a);
    let lm = Complex64::new(-p.kappa_m, p.delta_m);
    let c = Complex64::new(p.j_am, p.g_coh);
    let m_ss = -p.drive / (lm - c * c / la);
    let a_ss = c * m_ss / la;
    let max_growth = linear_max_growth(p);
    LinearSteadyState {
        a_ss,
        m_ss,
        stable: max_growth < 0.0,
        gamma_star: instability_threshold(p),
        max_growth,
    }
}

/// Dissipative coupling `Γ*` at which the largest growth rate crosses zero.
///
/// Closed form `sqrt(κ_a κ_m)` for equal detunings without coherent
/// coupling; bisection on the eigenvalue otherwise. Returns infinity if no
/// crossing exists below `1e6` (scaled units).
pub fn instability_threshold(p: &ScaledParams) -> f64 {
    if p.delta_a == p.delta_m && p.g_coh == 0.0 {
        return p.symmetric_threshold();
    }
    let growth = |gamma: f64| linear_max_growth(&ScaledParams { j_am: gamma, ..*p });
    if growth(0.0) >= 0.0 {
        return 0.0;
    }
    let mut hi = p.symmetric_threshold().max(1e-6);
    while growth(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if growth(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
