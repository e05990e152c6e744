//! Regular wave solutions used for initial conditions, generation-zone
//! targets, and reference values in tests: linear (Airy) waves and steady
//! nonlinear stream-function waves computed by collocation.
//!
//! The stream-function solver works in dimensionless form (unit gravity and
//! wavenumber) and carries Newton iteration with height continuation for
//! steep waves. Evaluation happens in the lab frame with the gauge fixed so
//! that the surface potential satisfies the same dynamic condition the time
//! stepper integrates, constant-free.

use crate::error::{Error, Result};

/// Solve the linear dispersion relation `omega^2 = g k tanh(k h)` for the
/// wavenumber. Safeguarded Newton on `f(x) = x tanh(x) - omega^2 h / g`
/// with `x = k h`; the residual is driven below 1e-12 relative.
pub fn dispersion_solve(omega: f64, depth: f64, gravity: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid("omega", "angular frequency must be positive"));
    }
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::invalid("depth", "water depth must be positive"));
    }
    if !(gravity > 0.0) || !gravity.is_finite() {
        return Err(Error::invalid("gravity", "gravity must be positive"));
    }
    let alpha = omega * omega * depth / gravity;
    // Initial guess exact in both limits (deep: x = alpha, shallow:
    // x = sqrt(alpha)).
    let mut x = alpha / alpha.tanh().sqrt().max(1e-12);
    if !x.is_finite() || x <= 0.0 {
        x = alpha.sqrt().max(1e-12);
    }
    let (mut lo, mut hi) = (0.0_f64, x.max(alpha).max(alpha.sqrt()) + 1.0);
    for _ in 0..100 {
        let t = x.tanh();
        let f = x * t - alpha;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let df = t + x * (1.0 - t * t);
        let mut next = x - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 1e-15 * x.abs();
        x = next;
        if done {
            break;
        }
    }
    let k = x / depth;
    let resid = (gravity * k * (k * depth).tanh() - omega * omega).abs();
    if resid > 1e-12 * omega * omega {
        return Err(Error::NonlinearFailure {
            what: "dispersion".into(),
            why: format!("residual {resid:.3e} after Newton iteration"),
        });
    }
    Ok(k)
}

/// Limiting steepness `H_max / L` of a steady wave as a function of relative
/// depth `k h`, from the rational fit of the breaking-height data in terms
/// of `q = L / h`:
///
/// `H_max/h = (0.141063 q + 0.0095721 q^2 + 0.0077829 q^3)
///          / (1 + 0.0788340 q + 0.0317567 q^2 + 0.0093407 q^3)`.
///
/// Deep water approaches H/L = 0.141063; shallow water approaches the
/// height-to-depth ratio 0.8332 while the steepness itself goes to zero.
/// The curve rises monotonically with `k h` through the shoaling range and
/// levels off at the deep-water limit, which the rational fit overshoots by
/// under half a percent around kh = 4.
pub fn max_steepness(kh: f64) -> f64 {
    assert!(kh > 0.0, "relative depth must be positive");
    let q = 2.0 * std::f64::consts::PI / kh;
    let num = q * (0.141063 + q * (0.0095721 + q * 0.0077829));
    let den = 1.0 + q * (0.0788340 + q * (0.0317567 + q * 0.0093407));
    (num / den) / q
}

/// Surface fields every wave generator must provide; the relaxation zones
/// and initial conditions are written against this interface.
pub trait WaveTargets: Sync {
    fn eta(&self, x: f64, t: f64) -> f64;
    fn phi_eta(&self, x: f64, t: f64) -> f64;
    fn w_eta(&self, x: f64, t: f64) -> f64;
    fn celerity(&self) -> f64;
    fn period(&self) -> f64;
    fn wavelength(&self) -> f64;
    fn height(&self) -> f64;
}

/// Linear progressive wave on finite depth, crest at the origin at t = 0.
#[derive(Debug, Clone)]
pub struct AiryWave {
    pub k: f64,
    pub omega: f64,
    pub height: f64,
    pub depth: f64,
    pub gravity: f64,
}

impl AiryWave {
    pub fn from_wavenumber(k: f64, height: f64, depth: f64, gravity: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid("k", "wavenumber must be positive"));
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(Error::invalid("height", "wave height must be positive"));
        }
        if !(depth > 0.0) {
            return Err(Error::invalid("depth", "water depth must be positive"));
        }
        let omega = (gravity * k * (k * depth).tanh()).sqrt();
        Ok(AiryWave { k, omega, height, depth, gravity })
    }

    pub fn from_period(period: f64, height: f64, depth: f64, gravity: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("period", "wave period must be positive"));
        }
        let omega = 2.0 * std::f64::consts::PI / period;
        let k = dispersion_solve(omega, depth, gravity)?;
        Self::from_wavenumber(k, height, depth, gravity)
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        self.k * x - self.omega * t
    }
}

impl WaveTargets for AiryWave {
    fn eta(&self, x: f64, t: f64) -> f64 {
        0.5 * self.height * self.phase(x, t).cos()
    }

    fn phi_eta(&self, x: f64, t: f64) -> f64 {
        0.5 * self.height * self.gravity / self.omega * self.phase(x, t).sin()
    }

    fn w_eta(&self, x: f64, t: f64) -> f64 {
        0.5 * self.height * self.omega * self.phase(x, t).sin()
    }

    fn celerity(&self) -> f64 {
        self.omega / self.k
    }

    fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    fn height(&self) -> f64 {
        self.height
    }
}

/// `sinh(a) / cosh(b)` without overflow for large arguments; both must be
/// nonnegative and of comparable size (a = j (eta + d), b = j d).
fn sinh_ratio(a: f64, b: f64) -> f64 {
    ((a - b).exp() - (-a - b).exp()) / (1.0 + (-2.0 * b).exp())
}

/// `cosh(a) / cosh(b)` in the same stable form.
fn cosh_ratio(a: f64, b: f64) -> f64 {
    ((a - b).exp() + (-a - b).exp()) / (1.0 + (-2.0 * b).exp())
}

/// Steady nonlinear wave from stream-function collocation.
///
/// Dimensionless unknowns: surface elevations at N+1 evenly spaced phases
/// over half a wavelength, N stream-function mode amplitudes, the celerity,
/// the surface streamline constant and the Bernoulli constant. Collocated
/// kinematic and dynamic surface conditions plus zero mean level and the
/// height closure make the square system.
#[derive(Debug, Clone)]
pub struct StreamFunctionWave {
    pub k: f64,
    pub depth: f64,
    pub height: f64,
    pub gravity: f64,
    n_modes: usize,
    /// Dimensionless relative depth k h.
    d: f64,
    /// Dimensionless celerity, streamline and Bernoulli constants.
    c: f64,
    q: f64,
    r: f64,
    /// Stream-function mode amplitudes B_1..B_N.
    b: Vec<f64>,
    /// Cosine coefficients E_0..E_N of the dimensionless elevation.
    e: Vec<f64>,
}

/// Collocation count: grows with steepness and relative depth, floor 16.
/// Capped at 32: beyond that the crest factors cosh(j(eta+d))/cosh(jd)
/// spread over too many orders of magnitude and the Newton system turns
/// hopelessly ill-conditioned before accuracy improves.
fn mode_count(kh: f64, steepness_ratio: f64) -> usize {
    let n = (8.0 * steepness_ratio * kh + 8.0).ceil() as usize;
    n.clamp(16, 32)
}

struct Collocation {
    n: usize,
    d: f64,
    target_height: f64,
}

impl Collocation {
    /// x = [eta_0..eta_N, B_1..B_N, c, Q, R]
    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let eta = &x[..n + 1];
        let b = &x[n + 1..2 * n + 1];
        let c = x[2 * n + 1];
        let q = x[2 * n + 2];
        let r = x[2 * n + 3];
        for m in 0..=n {
            let xm = std::f64::consts::PI * m as f64 / n as f64;
            let mut psi = 0.0;
            let mut u = -c;
            let mut w = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let sr = sinh_ratio(jf * (eta[m] + self.d), jf * self.d);
                let cr = cosh_ratio(jf * (eta[m] + self.d), jf * self.d);
                let (sin_jx, cos_jx) = (jf * xm).sin_cos();
                psi += b[j - 1] * sr * cos_jx;
                u += jf * b[j - 1] * cr * cos_jx;
                w += jf * b[j - 1] * sr * sin_jx;
            }
            out[m] = -c * eta[m] + psi + q;
            out[n + 1 + m] = 0.5 * (u * u + w * w) + eta[m] - r;
        }
        let mut mean = 0.5 * (eta[0] + eta[n]);
        for em in &eta[1..n] {
            mean += em;
        }
        out[2 * n + 2] = mean / n as f64;
        out[2 * n + 3] = eta[0] - eta[n] - self.target_height;
    }

    fn newton(&self, x: &mut [f64]) -> Result<()> {
        let size = 2 * self.n + 4;
        assert_eq!(x.len(), size);
        let mut f = vec![0.0; size];
        let mut fp = vec![0.0; size];
        let mut trial = vec![0.0; size];
        let tol = 1e-12;
        for _ in 0..60 {
            self.residual(x, &mut f);
            let norm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if norm < tol {
                return Ok(());
            }
            let mut jac = nalgebra::DMatrix::zeros(size, size);
            let mut fm = vec![0.0; size];
            for col in 0..size {
                let save = x[col];
                // Central differences: the forward-difference noise floor
                // (~1e-8 of the residual scale) is not far below where
                // near-breaking waves converge, and stalls the line search.
                let delta = f64::EPSILON.cbrt() * save.abs().max(1e-2);
                x[col] = save + delta;
                self.residual(x, &mut fp);
                x[col] = save - delta;
                self.residual(x, &mut fm);
                x[col] = save;
                for row in 0..size {
                    jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * delta);
                }
            }
            let rhs = nalgebra::DVector::from_fn(size, |i, _| -f[i]);
            let step = jac.lu().solve(&rhs).ok_or_else(|| Error::NonlinearFailure {
                what: "stream function wave".into(),
                why: "singular collocation Jacobian".into(),
            })?;
            // Backtracking: the crest factors exponentiate any overshoot,
            // so insist on residual decrease before accepting a step.
            let mut lambda = 1.0_f64;
            loop {
                for i in 0..size {
                    trial[i] = x[i] + lambda * step[i];
                }
                self.residual(&trial, &mut fp);
                let trial_norm = fp.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if trial_norm.is_finite() && (trial_norm < norm || trial_norm < tol) {
                    x.copy_from_slice(&trial);
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    // Numerical floor, not divergence: good enough next to
                    // any discretization error this wave will meet.
                    if norm < 1e-8 {
                        return Ok(());
                    }
                    return Err(Error::NonlinearFailure {
                        what: "stream function wave".into(),
                        why: format!(
                            "line search stalled at residual {norm:.3e}; wave too close to breaking for this collocation"
                        ),
                    });
                }
            }
        }
        self.residual(x, &mut f);
        let norm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm < 1e-10 {
            Ok(())
        } else {
            Err(Error::NonlinearFailure {
                what: "stream function wave".into(),
                why: format!("collocation residual {norm:.3e} after 60 Newton steps"),
            })
        }
    }
}

impl StreamFunctionWave {
    pub fn from_wavenumber(k: f64, height: f64, depth: f64, gravity: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid("k", "wavenumber must be positive"));
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(Error::invalid("height", "wave height must be positive"));
        }
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::invalid("depth", "water depth must be positive"));
        }
        if !(gravity > 0.0) || !gravity.is_finite() {
            return Err(Error::invalid("gravity", "gravity must be positive"));
        }
        let kh = k * depth;
        let steepness = height * k / (2.0 * std::f64::consts::PI);
        let limit = max_steepness(kh);
        let ratio = steepness / limit;
        if ratio >= 1.0 {
            return Err(Error::NonlinearFailure {
                what: "stream function wave".into(),
                why: format!(
                    "steepness H/L = {steepness:.4} exceeds the breaking limit {limit:.4} at kh = {kh:.3}"
                ),
            });
        }

        let n = mode_count(kh, ratio);
        let d = kh;
        let target = height * k;

        // Airy seed at a fraction of the height, then continuation upward.
        let steps = if ratio > 0.25 {
            ((10.0 * ratio).ceil() as usize).clamp(3, 10)
        } else {
            1
        };
        let c0 = d.tanh().sqrt();
        let mut x = vec![0.0; 2 * n + 4];
        let h_first = target * 1.0 / steps as f64;
        let a0 = 0.5 * h_first;
        for m in 0..=n {
            let xm = std::f64::consts::PI * m as f64 / n as f64;
            x[m] = a0 * xm.cos();
        }
        x[n + 1] = a0 * c0 / d.tanh();
        x[2 * n + 1] = c0;
        x[2 * n + 2] = 0.0;
        x[2 * n + 3] = 0.5 * c0 * c0;

        for step in 1..=steps {
            let colloc = Collocation {
                n,
                d,
                target_height: target * step as f64 / steps as f64,
            };
            colloc.newton(&mut x)?;
        }

        // Cosine coefficients of the elevation by direct matrix solve of the
        // half-period collocation values.
        let cmat = nalgebra::DMatrix::from_fn(n + 1, n + 1, |m, j| {
            (j as f64 * std::f64::consts::PI * m as f64 / n as f64).cos()
        });
        let rhs = nalgebra::DVector::from_fn(n + 1, |m, _| x[m]);
        let e = cmat.lu().solve(&rhs).ok_or_else(|| Error::NonlinearFailure {
            what: "stream function wave".into(),
            why: "singular elevation transform".into(),
        })?;

        Ok(StreamFunctionWave {
            k,
            depth,
            height,
            gravity,
            n_modes: n,
            d,
            c: x[2 * n + 1],
            q: x[2 * n + 2],
            r: x[2 * n + 3],
            b: x[n + 1..2 * n + 1].to_vec(),
            e: e.iter().copied().collect(),
        })
    }

    /// Solve for the wave of a given period: secant iteration on the
    /// wavenumber around the linear-dispersion seed, with the nonlinear
    /// celerity from each candidate solution.
    pub fn from_period(period: f64, height: f64, depth: f64, gravity: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("period", "wave period must be positive"));
        }
        let omega = 2.0 * std::f64::consts::PI / period;
        let k_lin = dispersion_solve(omega, depth, gravity)?;
        let solve = |k: f64| StreamFunctionWave::from_wavenumber(k, height, depth, gravity);

        let mut k0 = k_lin;
        let mut w0 = solve(k0)?;
        let mut f0 = w0.period() - period;
        if f0.abs() <= 1e-12 * period {
            return Ok(w0);
        }
        // Nonlinear waves run faster than linear ones: the true k is a bit
        // larger than the linear seed for the same period.
        let mut k1 = k0 * (1.0 + 1e-3);
        for _ in 0..40 {
            let w1 = solve(k1)?;
            let f1 = w1.period() - period;
            if f1.abs() <= 1e-12 * period {
                return Ok(w1);
            }
            let denom = f1 - f0;
            if denom.abs() < 1e-300 {
                break;
            }
            let k2 = k1 - f1 * (k1 - k0) / denom;
            k0 = k1;
            f0 = f1;
            w0 = w1;
            k1 = if k2 > 0.0 { k2 } else { 0.5 * k1 };
        }
        let check = (w0.period() - period).abs();
        if check <= 1e-9 * period {
            Ok(w0)
        } else {
            Err(Error::NonlinearFailure {
                what: "stream function wave".into(),
                why: format!("period iteration stalled {check:.3e} s away from the target"),
            })
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Bernoulli constant in physical units.
    pub fn bernoulli(&self) -> f64 {
        self.r * self.gravity / self.k
    }

    /// Volume flux under the wave in the frame moving with the crest,
    /// in physical units.
    pub fn flux(&self) -> f64 {
        self.q * (self.gravity / self.k.powi(3)).sqrt()
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        (self.k * (x - self.celerity() * t)).rem_euclid(2.0 * std::f64::consts::PI)
    }

    /// Dimensionless elevation at phase X.
    fn eta_star(&self, xp: f64) -> f64 {
        let mut acc = 0.0;
        for (j, ej) in self.e.iter().enumerate() {
            acc += ej * (j as f64 * xp).cos();
        }
        acc
    }

    fn eta_star_slope(&self, xp: f64) -> f64 {
        let mut acc = 0.0;
        for (j, ej) in self.e.iter().enumerate() {
            acc -= j as f64 * ej * (j as f64 * xp).sin();
        }
        acc
    }

    /// Dimensionless lab-frame surface kinematics at phase X: (u, w, phi).
    fn surface_star(&self, xp: f64) -> (f64, f64, f64) {
        let es = self.eta_star(xp);
        let mut u = 0.0;
        let mut w = 0.0;
        let mut phi = 0.0;
        for (jm, bj) in self.b.iter().enumerate() {
            let jf = (jm + 1) as f64;
            let cr = cosh_ratio(jf * (es + self.d), jf * self.d);
            let sr = sinh_ratio(jf * (es + self.d), jf * self.d);
            let (sin_jx, cos_jx) = (jf * xp).sin_cos();
            u += jf * bj * cr * cos_jx;
            w += jf * bj * sr * sin_jx;
            phi += bj * cr * sin_jx;
        }
        (u, w, phi)
    }

    /// Gauge drift rate of the surface potential, physical units: the
    /// constant that keeps the dynamic condition free of a Bernoulli term.
    pub fn gauge_rate(&self) -> f64 {
        (0.5 * self.c * self.c - self.r) * self.gravity / self.k
    }

    /// Surface-restricted x-derivative of the potential.
    pub fn phi_eta_x(&self, x: f64, t: f64) -> f64 {
        let xp = self.phase(x, t);
        let (u, w, _) = self.surface_star(xp);
        (u + w * self.eta_star_slope(xp)) * (self.gravity / self.k).sqrt()
    }

    /// Time derivative of the surface potential at a fixed surface node; for
    /// a steady wave this is `-c d(phi_eta)/dx + gauge_rate`.
    pub fn phi_eta_t(&self, x: f64, t: f64) -> f64 {
        -self.celerity() * self.phi_eta_x(x, t) + self.gauge_rate()
    }
}

impl WaveTargets for StreamFunctionWave {
    fn eta(&self, x: f64, t: f64) -> f64 {
        self.eta_star(self.phase(x, t)) / self.k
    }

    fn phi_eta(&self, x: f64, t: f64) -> f64 {
        let (_, _, phi) = self.surface_star(self.phase(x, t));
        phi * (self.gravity / self.k.powi(3)).sqrt() + self.gauge_rate() * t
    }

    fn w_eta(&self, x: f64, t: f64) -> f64 {
        let (_, w, _) = self.surface_star(self.phase(x, t));
        w * (self.gravity / self.k).sqrt()
    }

    fn celerity(&self) -> f64 {
        self.c * (self.gravity / self.k).sqrt()
    }

    fn period(&self) -> f64 {
        self.wavelength() / self.celerity()
    }

    fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k
    }

    fn height(&self) -> f64 {
        self.height
    }
}
