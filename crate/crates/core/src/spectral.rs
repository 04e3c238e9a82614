//! Magnonic power spectra and comb metrics.
//!
//! Frequencies are offsets from the drive in units of `omega_b`; a tooth of
//! signed order `n` sits at `n * repetition`. The transform convention is
//! `X_k = sum_j x_j exp(-2πi jk/N)`, so `m(t) = exp(-i 5 t)` lands at `-5`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::SpectralError;
use crate::integrator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rect,
}

impl Window {
    /// Periodic window coefficient for sample `k` of `n`.
    pub fn coefficient(self, k: usize, n: usize) -> f64 {
        match self {
            Window::Hann => 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos(),
            Window::Rect => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hann" => Ok(Window::Hann),
            "rect" | "rectangular" => Ok(Window::Rect),
            other => Err(format!("unknown window `{other}` (expected hann or rect)")),
        }
    }
}

/// Two-sided power spectrum with `fftshift` ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub log_power: Vec<f64>,
    pub window: Window,
    pub bin_width: f64,
}

/// Smallest value `log_power` reports; keeps exact zeros out of `-inf`.
pub const LOG_POWER_FLOOR: f64 = f64::MIN_POSITIVE;

impl Spectrum {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Index of the bin nearest to `freq`, if it lies inside the spectrum.
    pub fn bin_of(&self, freq: f64) -> Option<usize> {
        let half = (self.len() / 2) as i64;
        let k = (freq / self.bin_width).round() as i64 + half;
        (0..self.len() as i64).contains(&k).then_some(k as usize)
    }

    /// Mean square of the windowed signal recovered from the bins.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn nyquist(&self) -> f64 {
        self.bin_width * (self.len() / 2) as f64
    }
}

fn apply_window(series: &[Complex64], window: Window) -> Vec<Complex64> {
    let n = series.len();
    series
        .iter()
        .enumerate()
        .map(|(k, &x)| x * window.coefficient(k, n))
        .collect()
}

/// `|X_k|^2 / N^2` for every bin of the windowed series, natural FFT order.
///
/// Works for any length; [`power_spectrum`] restricts itself to powers of two.
pub fn windowed_power(series: &[Complex64], window: Window) -> Vec<f64> {
    let n = series.len();
    let mut buf = apply_window(series, window);
    if n == 0 {
        return Vec::new();
    }
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let norm = 1.0 / (n as f64 * n as f64);
    buf.iter().map(|x| x.norm_sqr() * norm).collect()
}

/// Mean square of the windowed series, the Parseval partner of the spectrum.
pub fn windowed_mean_square(series: &[Complex64], window: Window) -> f64 {
    let n = series.len();
    series
        .iter()
        .enumerate()
        .map(|(k, x)| x.norm_sqr() * window.coefficient(k, n).powi(2))
        .sum::<f64>()
        / n as f64
}

/// Spectrum of a uniformly sampled complex series with spacing `dt`.
pub fn spectrum_of_series(series: &[Complex64], dt: f64, window: Window) -> Result<Spectrum, SpectralError> {
    let n = series.len();
    if n < 1024 || !n.is_power_of_two() {
        return Err(SpectralError::InvalidInput(format!(
            "series length {n} must be a power of two >= 1024; truncate the record to 2^k samples"
        )));
    }
    if !(dt > 0.0) {
        return Err(SpectralError::InvalidInput(format!(
            "sample spacing must be positive, got {dt}"
        )));
    }
    let raw = windowed_power(series, window);
    let half = n / 2;
    let bin_width = 2.0 * PI / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    for j in 0..n {
        let k = j as i64 - half as i64;
        freqs.push(k as f64 * bin_width);
        power.push(raw[(j + half) % n]);
    }
    let log_power = power.iter().map(|p| p.max(LOG_POWER_FLOOR).log10()).collect();
    Ok(Spectrum {
        freqs,
        power,
        log_power,
        window,
        bin_width,
    })
}

/// Spectrum of the magnon amplitude `m(t)`.
pub fn power_spectrum(traj: &Trajectory, window: Window) -> Result<Spectrum, SpectralError> {
    let m: Vec<Complex64> = traj.samples.iter().map(|s| s.m).collect();
    spectrum_of_series(&m, traj.dt_sample, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombTooth {
    pub order: i64,
    pub freq: f64,
    /// `log10` of the peak bin power.
    pub amplitude: f64,
    /// Decades above the local floor.
    pub prominence: f64,
}

/// Bins on either side of `n * rep` searched for the tooth peak.
pub const TOOTH_HALF_WIDTH_BINS: usize = 2;

fn median_of(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Finds comb teeth at integer multiples of `rep_guess`.
///
/// For every order whose neighborhood fits inside the band, the strongest
/// bin within ±2 bins of `n * rep_guess` is compared against the median
/// `log10` power of the remaining bins within `±rep_guess / 2`. Teeth at
/// least `prominence_decades` above that floor are kept.
pub fn detect_teeth(spec: &Spectrum, rep_guess: f64, prominence_decades: f64) -> Result<Vec<CombTooth>, SpectralError> {
    if !(rep_guess > 2.0 * spec.bin_width) || !rep_guess.is_finite() {
        return Err(SpectralError::InvalidInput(format!(
            "repetition guess {rep_guess} must exceed two bins ({})",
            2.0 * spec.bin_width
        )));
    }
    let n = spec.len();
    let half = (n / 2) as i64;
    let w = TOOTH_HALF_WIDTH_BINS as i64;
    let floor_half = ((0.5 * rep_guess / spec.bin_width).floor() as i64).max(w + 1);
    let max_order = ((spec.nyquist() - (w as f64 + 0.5) * spec.bin_width) / rep_guess).floor() as i64;

    let mut teeth = Vec::new();
    let mut scratch = Vec::with_capacity(2 * floor_half as usize + 1);
    for order in -max_order..=max_order {
        let center = (order as f64 * rep_guess / spec.bin_width).round() as i64 + half;
        if center - w < 0 || center + w >= n as i64 {
            continue;
        }
        let (mut peak, mut peak_idx) = (f64::NEG_INFINITY, center as usize);
        for k in (center - w)..=(center + w) {
            let v = spec.log_power[k as usize];
            if v > peak {
                peak = v;
                peak_idx = k as usize;
            }
        }
        scratch.clear();
        let lo = (center - floor_half).max(0);
        let hi = (center + floor_half).min(n as i64 - 1);
        for k in lo..=hi {
            if (k - center).abs() > w {
                scratch.push(spec.log_power[k as usize]);
            }
        }
        if scratch.is_empty() {
            continue;
        }
        let floor = median_of(&mut scratch);
        let prominence = peak - floor;
        if prominence >= prominence_decades {
            teeth.push(CombTooth {
                order,
                freq: spec.freqs[peak_idx],
                amplitude: peak,
                prominence,
            });
        }
    }
    Ok(teeth)
}

/// Median spacing of consecutive teeth, normalized by their order gap.
pub fn estimate_repetition(teeth: &[CombTooth]) -> Result<f64, SpectralError> {
    if teeth.len() < 3 {
        return Err(SpectralError::InsufficientComb {
            needed: 3,
            found: teeth.len(),
        });
    }
    let mut sorted: Vec<&CombTooth> = teeth.iter().collect();
    sorted.sort_by_key(|t| t.order);
    let mut spacings: Vec<f64> = sorted
        .windows(2)
        .filter(|w| w[1].order != w[0].order)
        .map(|w| (w[1].freq - w[0].freq) / (w[1].order - w[0].order) as f64)
        .collect();
    if spacings.len() < 2 {
        return Err(SpectralError::InsufficientComb {
            needed: 3,
            found: spacings.len() + 1,
        });
    }
    Ok(median_of(&mut spacings))
}

/// Plateau found on one side of the comb, orders counted outward from the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidePlateau {
    pub first: i64,
    pub last: i64,
    pub median: f64,
    pub cutoff: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub first_order: i64,
    pub last_order: i64,
    pub median_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlateauCutoff {
    pub plateau: Option<Plateau>,
    pub cutoff_order: Option<i64>,
    /// `(inner, outer)` neighbor pairs inside the plateau where the outer
    /// tooth is stronger.
    pub nonperturbative_pairs: Vec<(i64, i64)>,
    pub positive: Option<SidePlateau>,
    pub negative: Option<SidePlateau>,
}

/// Minimum plateau length in teeth.
pub const MIN_PLATEAU_TEETH: usize = 5;

/// Decades below the plateau median that count as cut off.
pub const CUTOFF_DROP_DECADES: f64 = 2.0;

/// Longest run of consecutive orders with every amplitude within
/// `±band` of the run median. Ties resolve toward the carrier.
fn longest_plateau(side: &[(i64, f64)], band: f64) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    let mut window: Vec<f64> = Vec::with_capacity(side.len());
    for i in 0..side.len() {
        window.clear();
        for j in i..side.len() {
            if j > i && side[j].0 != side[j - 1].0 + 1 {
                break;
            }
            let v = side[j].1;
            let pos = window.partition_point(|&x| x < v);
            window.insert(pos, v);
            let len = window.len();
            if len < MIN_PLATEAU_TEETH || best.is_some_and(|(bi, bj, _)| len <= bj - bi + 1) {
                continue;
            }
            let median = if len % 2 == 1 {
                window[len / 2]
            } else {
                0.5 * (window[len / 2 - 1] + window[len / 2])
            };
            if window[len - 1] - median <= band && median - window[0] <= band {
                best = Some((i, j, median));
            }
        }
    }
    best
}

fn side_plateau(side: &[(i64, f64)], band: f64) -> Option<(SidePlateau, Vec<(i64, i64)>)> {
    let (i, j, median) = longest_plateau(side, band)?;
    let (first, last) = (side[i].0, side[j].0);
    let last_high = side[j + 1..]
        .iter()
        .filter(|(_, a)| *a > median - CUTOFF_DROP_DECADES)
        .map(|(o, _)| *o)
        .max()
        .unwrap_or(last);
    let pairs = side[i..=j]
        .windows(2)
        .filter(|w| w[1].1 > w[0].1)
        .map(|w| (w[0].0, w[1].0))
        .collect();
    Some((
        SidePlateau {
            first,
            last,
            median,
            cutoff: last_high + 1,
        },
        pairs,
    ))
}

/// Plateau and cutoff per side of the carrier, then merged.
///
/// Each side uses orders `|n| >= 1`. The merged plateau spans from the far
/// end of the negative-side plateau to the far end of the positive-side
/// one; the reported cutoff is the positive side's, falling back to the
/// (negative) negative-side cutoff.
pub fn measure_plateau_cutoff(teeth: &[CombTooth], band_decades: f64) -> PlateauCutoff {
    let mut pos: Vec<(i64, f64)> = teeth
        .iter()
        .filter(|t| t.order >= 1)
        .map(|t| (t.order, t.amplitude))
        .collect();
    let mut neg: Vec<(i64, f64)> = teeth
        .iter()
        .filter(|t| t.order <= -1)
        .map(|t| (-t.order, t.amplitude))
        .collect();
    pos.sort_by_key(|t| t.0);
    neg.sort_by_key(|t| t.0);

    let positive = side_plateau(&pos, band_decades);
    let negative = side_plateau(&neg, band_decades);

    let mut out = PlateauCutoff::default();
    let mut members: Vec<f64> = Vec::new();
    if let Some((p, pairs)) = &positive {
        members.extend(pos.iter().filter(|(o, _)| (p.first..=p.last).contains(o)).map(|t| t.1));
        out.nonperturbative_pairs.extend(pairs.iter().copied());
    }
    if let Some((p, pairs)) = &negative {
        members.extend(neg.iter().filter(|(o, _)| (p.first..=p.last).contains(o)).map(|t| t.1));
        out.nonperturbative_pairs.extend(pairs.iter().map(|&(a, b)| (-a, -b)));
    }
    out.plateau = match (&positive, &negative) {
        (None, None) => None,
        (Some((p, _)), None) => Some((p.first, p.last)),
        (None, Some((n, _))) => Some((-n.last, -n.first)),
        (Some((p, _)), Some((n, _))) => Some((-n.last, p.last)),
    }
    .map(|(first_order, last_order)| Plateau {
        first_order,
        last_order,
        median_amplitude: median_of(&mut members),
    });
    out.cutoff_order = positive
        .as_ref()
        .map(|(p, _)| p.cutoff)
        .or_else(|| negative.as_ref().map(|(n, _)| -n.cutoff));
    out.nonperturbative_pairs.sort();
    out.positive = positive.map(|(p, _)| p);
    out.negative = negative.map(|(n, _)| n);
    out
}

/// Geometric over arithmetic mean of the bin power, skipping the tooth bins.
///
/// With teeth given, only bins between the outermost teeth (padded by half
/// a spacing) are considered, so the flatness describes the floor inside
/// the comb band rather than the empty band beyond the cutoff. Powers are
/// regularized by `EPSILON * max_power`.
pub fn spectral_flatness(spec: &Spectrum, exclude_teeth: &[CombTooth]) -> Result<f64, SpectralError> {
    if spec.is_empty() {
        return Err(SpectralError::InvalidInput("empty spectrum".into()));
    }
    let n = spec.len();
    let (lo, hi) = if exclude_teeth.len() >= 2 {
        let fmin = exclude_teeth.iter().map(|t| t.freq).fold(f64::INFINITY, f64::min);
        let fmax = exclude_teeth.iter().map(|t| t.freq).fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.5 * estimate_repetition(exclude_teeth).unwrap_or((fmax - fmin) / (exclude_teeth.len() - 1) as f64);
        let lo = spec.bin_of(fmin - pad).unwrap_or(0);
        let hi = spec.bin_of(fmax + pad).unwrap_or(n - 1);
        (lo, hi)
    } else {
        (0, n - 1)
    };
    let mut excluded = vec![false; n];
    for t in exclude_teeth {
        if let Some(c) = spec.bin_of(t.freq) {
            let w = TOOTH_HALF_WIDTH_BINS;
            for flag in &mut excluded[c.saturating_sub(w)..=(c + w).min(n - 1)] {
                *flag = true;
            }
        }
    }
    let max_power = spec.power.iter().copied().fold(0.0, f64::max);
    let eps = f64::EPSILON * max_power.max(f64::MIN_POSITIVE);
    let (mut log_sum, mut sum, mut count) = (0.0, 0.0, 0usize);
    for (&power, _) in spec.power[lo..=hi].iter().zip(&excluded[lo..=hi]).filter(|(_, &x)| !x) {
        let p = power + eps;
        log_sum += p.ln();
        sum += p;
        count += 1;
    }
    if count == 0 {
        return Err(SpectralError::InvalidInput("every bin is excluded".into()));
    }
    let geometric = (log_sum / count as f64).exp();
    let arithmetic = sum / count as f64;
    Ok((geometric / arithmetic).clamp(0.0, 1.0))
}

/// Thresholds for turning a spectrum into comb metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombCriteria {
    /// Initial repetition guess in units of `omega_b`.
    pub rep_guess: f64,
    pub prominence_decades: f64,
    pub plateau_band_decades: f64,
    /// Teeth weaker than the strongest one by more than this many decades
    /// are discarded as round-off.
    pub dynamic_range_decades: f64,
}

impl Default for CombCriteria {
    fn default() -> Self {
        Self {
            rep_guess: 1.0,
            prominence_decades: 1.0,
            plateau_band_decades: 0.5,
            dynamic_range_decades: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombAnalysis {
    pub teeth: Vec<CombTooth>,
    /// `None` with fewer than three teeth.
    pub repetition_rate: Option<f64>,
    pub line_count: usize,
    pub plateau: Option<Plateau>,
    pub cutoff_order: Option<i64>,
    pub flatness: f64,
    pub nonperturbative_pairs: Vec<(i64, i64)>,
    pub plateau_sides: (Option<SidePlateau>, Option<SidePlateau>),
    pub bin_width: f64,
    pub criteria: CombCriteria,
}

/// Drops teeth more than `decades` below the strongest tooth.
pub fn gate_dynamic_range(teeth: &mut Vec<CombTooth>, decades: f64) {
    let top = teeth.iter().map(|t| t.amplitude).fold(f64::NEG_INFINITY, f64::max);
    teeth.retain(|t| t.amplitude >= top - decades);
}

/// Full comb analysis: teeth, repetition rate, plateau/cutoff and flatness.
///
/// Teeth are located with `rep_guess`; if at least three are found the
/// detection is repeated at the estimated repetition rate.
pub fn analyze_comb(spec: &Spectrum, criteria: &CombCriteria) -> Result<CombAnalysis, SpectralError> {
    let detect = |rep: f64| -> Result<Vec<CombTooth>, SpectralError> {
        let mut teeth = detect_teeth(spec, rep, criteria.prominence_decades)?;
        gate_dynamic_range(&mut teeth, criteria.dynamic_range_decades);
        Ok(teeth)
    };
    let mut teeth = detect(criteria.rep_guess)?;
    let mut repetition = estimate_repetition(&teeth).ok();
    if let Some(rep) = repetition {
        if (rep - criteria.rep_guess).abs() > 0.5 * spec.bin_width && rep > 2.0 * spec.bin_width {
            let refined = detect(rep)?;
            if refined.len() >= 3 {
                repetition = estimate_repetition(&refined).ok();
                teeth = refined;
            }
        }
    }
    let pc = measure_plateau_cutoff(&teeth, criteria.plateau_band_decades);
    let flatness = spectral_flatness(spec, &teeth)?;
    Ok(CombAnalysis {
        line_count: teeth.len(),
        teeth,
        repetition_rate: repetition,
        plateau: pc.plateau,
        cutoff_order: pc.cutoff_order,
        flatness,
        nonperturbative_pairs: pc.nonperturbative_pairs,
        plateau_sides: (pc.positive, pc.negative),
        bin_width: spec.bin_width,
        criteria: *criteria,
    })
}
