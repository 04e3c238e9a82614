use std::f64::consts::PI;
use std::fmt::Write;

use magcomb::config::RunConfig;
use magcomb::model::{DEFAULT_B0_TESLA, YIG_GYRO_RAD_PER_S_PER_T};

/// Ten significant digits, trailing noise from unit conversion removed.
fn sig(v: f64) -> String {
    let rounded: f64 = format!("{v:.9e}").parse().unwrap_or(v);
    let mag = rounded.abs();
    if mag != 0.0 && !(1e-3..1e7).contains(&mag) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

/// Every default, with units, for the `--help` epilogue.
pub fn defaults_text(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let i = &cfg.integration;
    let t = &cfg.thresholds;
    let mut s = String::from("Defaults (config key = value):\n");
    let mut line = |k: &str, v: String, note: &str| {
        let _ = writeln!(
            s,
            "  {k:<44} {v}{}",
            if note.is_empty() {
                String::new()
            } else {
                format!("   {note}")
            }
        );
    };
    let hz = |w: f64| sig(w / (2.0 * PI));
    line("params.omega_b_hz", hz(p.omega_b), "mechanical frequency");
    line("params.omega_l_hz", hz(p.omega_l), "drive frequency");
    line("params.omega_a_hz", hz(p.omega_a), "cavity, omega_l - omega_b");
    line("params.omega_m_hz", hz(p.omega_m), "magnon (Kittel), omega_l - omega_b");
    line(
        "params.kappa_a_hz",
        hz(p.kappa_a),
        "calibrated: sqrt(kappa_a kappa_m) = omega_b / 2",
    );
    line("params.kappa_m_hz", hz(p.kappa_m), "");
    line("params.kappa_b_hz", hz(p.kappa_b), "");
    line("params.g_mb_hz", hz(p.g_mb), "magnomechanical coupling");
    line(
        "params.j_am_over_omega_b",
        sig(p.j_am / p.omega_b),
        "dissipative coupling",
    );
    line(
        "params.g_coh_over_omega_b",
        sig(p.g_coh / p.omega_b),
        "coherent coupling",
    );
    line("params.b0_tesla", sig(DEFAULT_B0_TESLA), "drive field amplitude");
    line("params.n_spin", sig(cfg.n_spin), "spin count");
    line(
        "params.gyro_rad_per_s_per_t",
        sig(YIG_GYRO_RAD_PER_S_PER_T),
        "2 pi x 28 GHz/T",
    );
    line(
        "params.drive_omega_rad_per_s",
        sig(p.drive_omega),
        "derived: sqrt(5 n_spin) gyro b0 / 4",
    );
    line("integration.method", "rk4".into(), "rk4 | dp54");
    line("integration.dt_periods", sig(i.dt / (2.0 * PI)), "mechanical periods");
    line("integration.t_transient_periods", "null".into(), "null = 3 / kappa_b");
    line("integration.t_record_periods", sig(i.t_record / (2.0 * PI)), "");
    line(
        "integration.sample_stride",
        i.sample_stride.to_string(),
        "steps per sample",
    );
    line("integration.rel_tol", sig(i.rel_tol), "dp54 only");
    line("integration.abs_tol", sig(i.abs_tol), "dp54 only");
    line("analysis.window", t.window.name().into(), "hann | rect");
    line("analysis.rep_guess_over_omega_b", sig(t.comb.rep_guess), "");
    line(
        "analysis.prominence_decades",
        sig(t.comb.prominence_decades),
        "tooth over local floor",
    );
    line(
        "analysis.plateau_band_decades",
        sig(t.comb.plateau_band_decades),
        "+/- about run median",
    );
    line(
        "analysis.dynamic_range_decades",
        sig(t.comb.dynamic_range_decades),
        "below strongest tooth",
    );
    line("analysis.flatness_chaos", sig(t.flatness_chaos), "");
    line("analysis.comb_min_lines", t.comb_min_lines.to_string(), "");
    line(
        "analysis.tail_fraction",
        sig(t.tail_fraction),
        "of the record, for steady |m|^2",
    );
    line(
        "analysis.lyapunov_significance",
        sig(t.lyapunov_significance),
        "standard errors / resolutions",
    );
    if let Some(l) = &cfg.lyapunov {
        line("lyapunov.enabled", "true".into(), "");
        line(
            "lyapunov.renorm_interval_periods",
            sig(l.renorm_interval / (2.0 * PI)),
            "",
        );
        line(
            "lyapunov.perturbation_norm",
            sig(l.perturbation_norm),
            "relative to max(|state|, 1)",
        );
        line("lyapunov.intervals", l.intervals.to_string(), "");
    }
    line(
        "sweep.parameter",
        cfg.sweep.parameter.name().into(),
        "j_am | g_coh | kappa_a | delta_a | delta_m",
    );
    let grid: Vec<String> = cfg.sweep.grid.iter().map(|g| g.to_string()).collect();
    line("sweep.grid_over_omega_b", format!("[{}]", grid.join(", ")), "");
    if let Some(a) = &cfg.sweep.contour {
        line("sweep.contour_max_offset_over_omega_b", sig(a.max_offset), "");
        line("sweep.contour_resolution_over_omega_b", sig(a.resolution), "");
    }
    line("out", cfg.out.display().to_string(), "");
    line("workers", cfg.workers.to_string(), "");
    line("seed", cfg.seed.to_string(), "synthetic fixtures only");
    s.push_str(
        "\nFrequencies accept _hz, _rad_per_s or _over_omega_b; times accept _s, _periods or _times_omega_b.\n\
         Exit codes: 0 success, 2 usage, 3 divergence, 4 I/O.\n",
    );
    s
}
