//! Post-processing of runs: error norms, observed convergence rates,
//! harmonic decomposition of gauge records, scaling efficiencies and the
//! two-gauge decomposition of incident and reflected wave amplitude.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub fn inf_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

/// Pairwise observed orders between consecutive (h, error) samples.
pub fn convergence_rates(h: &[f64], err: &[f64]) -> Vec<f64> {
    assert_eq!(h.len(), err.len());
    h.windows(2)
        .zip(err.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect()
}

/// Least-squares slope of ln(err) against ln(h): the fitted global order.
pub fn fit_rate_loglog(h: &[f64], err: &[f64]) -> f64 {
    assert_eq!(h.len(), err.len());
    assert!(h.len() >= 2);
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..h.len() {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    sxy / sxx
}

/// Result of fitting `y ~ mean + sum_n A_n cos(n omega t - theta_n)`.
#[derive(Debug, Clone)]
pub struct HarmonicFit {
    pub mean: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Raw cosine/sine pairs, in case the caller needs the complex form.
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
}

impl HarmonicFit {
    /// Complex amplitude of harmonic `n` (1-based) against `exp(i n omega t)`:
    /// `a - i b` for the fitted `a cos + b sin`.
    pub fn complex_amplitude(&self, n: usize) -> Complex<f64> {
        Complex::new(self.cos_coeffs[n - 1], -self.sin_coeffs[n - 1])
    }
}

/// Linear least squares on the basis `{1, cos(n omega t), sin(n omega t)}`
/// for `n = 1..=n_harmonics`, solved through the normal equations. The
/// sample window should cover at least one full period of the fundamental
/// for the basis to stay well conditioned.
pub fn harmonic_fit(
    t: &[f64],
    y: &[f64],
    omega: f64,
    n_harmonics: usize,
) -> Result<HarmonicFit> {
    assert_eq!(t.len(), y.len());
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", "fundamental frequency must be positive"));
    }
    if n_harmonics == 0 {
        return Err(Error::invalid("n_harmonics", "need at least one harmonic"));
    }
    let cols = 1 + 2 * n_harmonics;
    if t.len() < cols {
        return Err(Error::invalid(
            "samples",
            format!("{} samples cannot pin down {cols} coefficients", t.len()),
        ));
    }
    let mut a = DMatrix::zeros(t.len(), cols);
    for (r, &ti) in t.iter().enumerate() {
        a[(r, 0)] = 1.0;
        for n in 1..=n_harmonics {
            let arg = n as f64 * omega * ti;
            a[(r, 2 * n - 1)] = arg.cos();
            a[(r, 2 * n)] = arg.sin();
        }
    }
    let rhs = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * rhs;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::NonlinearFailure {
            what: "harmonic fit".into(),
            why: "normal equations are singular; the window is too short or \
                  the sampling aliases a harmonic"
                .into(),
        })?;
    let mut amplitudes = Vec::with_capacity(n_harmonics);
    let mut phases = Vec::with_capacity(n_harmonics);
    let mut cos_coeffs = Vec::with_capacity(n_harmonics);
    let mut sin_coeffs = Vec::with_capacity(n_harmonics);
    for n in 1..=n_harmonics {
        let a_n = sol[2 * n - 1];
        let b_n = sol[2 * n];
        amplitudes.push(a_n.hypot(b_n));
        phases.push(b_n.atan2(a_n));
        cos_coeffs.push(a_n);
        sin_coeffs.push(b_n);
    }
    Ok(HarmonicFit {
        mean: sol[0],
        amplitudes,
        phases,
        cos_coeffs,
        sin_coeffs,
    })
}

/// Index range of samples with `t0 <= t <= t1`, for transient exclusion.
pub fn window_indices(t: &[f64], t0: f64, t1: f64) -> std::ops::Range<usize> {
    let start = t.partition_point(|&v| v < t0);
    let end = t.partition_point(|&v| v <= t1);
    start..end
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeStats {
    pub eta_max: f64,
    pub eta_min: f64,
    /// Crest-to-trough excursion over the window.
    pub range: f64,
    pub mean: f64,
    pub samples: usize,
}

pub fn probe_stats(y: &[f64]) -> ProbeStats {
    assert!(!y.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in y {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    ProbeStats {
        eta_max: hi,
        eta_min: lo,
        range: hi - lo,
        mean: sum / y.len() as f64,
        samples: y.len(),
    }
}

/// Strong-scaling efficiency: ideal is 1 when `n` workers finish `n` times
/// faster than the `n_base`-worker baseline.
pub fn strong_scaling_efficiency(t_base: f64, n_base: usize, t_n: f64, n: usize) -> f64 {
    (t_base * n_base as f64) / (t_n * n as f64)
}

/// Weak-scaling efficiency: ideal is 1 when the time stays flat while the
/// problem grows with the workers.
pub fn weak_scaling_efficiency(t_base: f64, t_n: f64) -> f64 {
    t_base / t_n
}

/// Incident/reflected decomposition from two gauges a known distance
/// apart, using the first-harmonic complex amplitudes at each gauge.
/// Returns the reflection coefficient `|A_R| / |A_I|`.
///
/// `spacing` is `x2 - x1`; the conditioning collapses when `k * spacing`
/// approaches a multiple of pi, so a quarter wavelength is the sweet spot.
pub fn reflection_estimate(
    t: &[f64],
    y1: &[f64],
    y2: &[f64],
    omega: f64,
    k: f64,
    spacing: f64,
) -> Result<f64> {
    let kd = k * spacing;
    if kd.sin().abs() < 0.05 {
        return Err(Error::invalid(
            "spacing",
            format!(
                "gauge spacing resolves nothing: |sin(k dx)| = {:.3e}",
                kd.sin().abs()
            ),
        ));
    }
    let f1 = harmonic_fit(t, y1, omega, 1)?;
    let f2 = harmonic_fit(t, y2, omega, 1)?;
    let c1 = f1.complex_amplitude(1);
    let c2 = f2.complex_amplitude(1);
    // eta_j = Re[(zi e^{-i k x_j} + zr e^{+i k x_j}) e^{i omega t}] with
    // x1 = 0, x2 = spacing in local coordinates.
    let e_m = Complex::new(0.0, -kd).exp();
    let e_p = Complex::new(0.0, kd).exp();
    let det = e_m - e_p;
    let zi = (c2 - c1 * e_p) / det;
    let zr = (c1 * e_m - c2) / det;
    let ai = zi.norm();
    if ai <= 0.0 {
        return Err(Error::NonlinearFailure {
            what: "reflection estimate".into(),
            why: "no incident wave energy at the fundamental".into(),
        });
    }
    Ok(zr.norm() / ai)
}
