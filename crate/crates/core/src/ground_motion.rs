//! Kanai-Tajimi stochastic ground motion: spectral density, amplitude
//! modulation, seeded realization synthesis, intensity calibration against a
//! measured record, and the flat measurement-noise density.
//!
//! Synthesis uses the spectral representation: cosines on a half-bin-offset
//! frequency grid with amplitudes `sqrt(2*S(w_i)*dw)` and independent
//! uniform phases, evaluated through one inverse FFT. The half-bin offset
//! keeps ensemble Fourier magnitudes genuinely dispersed at every DFT bin,
//! which the calibration band statistics rely on.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::record::{Record, Units};

fn default_g0() -> f64 {
    1.0
}

fn default_noise_ratio() -> f64 {
    0.02
}

/// Stochastic ground-motion description. `g0` is the white-noise intensity
/// feeding the ground filter, in (m/s^2)^2 * s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundMotionSpec {
    /// Ground filter damping ratio, in (0, 1).
    pub xi_g: f64,
    /// Ground filter frequency (rad/s).
    pub omega_g: f64,
    /// Spectral intensity scale; calibration overwrites it.
    #[serde(default = "default_g0")]
    pub g0: f64,
    /// Envelope decay rate (1/s); the envelope is `t*exp(-alpha*t)`.
    pub alpha: f64,
    /// Record duration (s).
    pub duration: f64,
    /// Sample interval (s).
    pub dt: f64,
    /// Sensor noise RMS as a fraction of the clean signal RMS.
    #[serde(default = "default_noise_ratio")]
    pub noise_rms_ratio: f64,
}

impl GroundMotionSpec {
    pub fn validate(&self) -> Result<()> {
        if !positive(self.g0) {
            return Err(Error::validation("g0 must be positive"));
        }
        if !positive(self.omega_g) {
            return Err(Error::validation("omega_g must be positive"));
        }
        if !(positive(self.xi_g) && self.xi_g < 1.0) {
            return Err(Error::validation("xi_g must lie in (0, 1)"));
        }
        if !positive(self.alpha) {
            return Err(Error::validation("alpha must be positive"));
        }
        if !positive(self.duration) || !positive(self.dt) {
            return Err(Error::validation("duration and dt must be positive"));
        }
        if PI / self.dt < 3.0 * self.omega_g {
            return Err(Error::validation(format!(
                "dt = {} is too coarse for omega_g = {} (need Nyquist >= 3*omega_g)",
                self.dt, self.omega_g
            )));
        }
        if self.noise_rms_ratio < 0.0 {
            return Err(Error::validation("noise_rms_ratio must be non-negative"));
        }
        Ok(())
    }

    fn n_samples(&self) -> usize {
        ((self.duration / self.dt).round() as usize).max(8)
    }
}

/// Measurement-noise description: white Gaussian with a given RMS ratio.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise-to-signal RMS ratio.
    pub rms_ratio: f64,
}

/// Ground spectral density at `omega` (rad/s). Even in `omega`.
pub fn kanai_tajimi_psd(omega: f64, spec: &GroundMotionSpec) -> f64 {
    let r = omega / spec.omega_g;
    let r2 = r * r;
    let four_xi2 = 4.0 * spec.xi_g * spec.xi_g;
    spec.g0 * (1.0 + four_xi2 * r2) / ((1.0 - r2).powi(2) + four_xi2 * r2)
}

/// Amplitude envelope `t*exp(-alpha*t)`; peaks at `t = 1/alpha`.
pub fn modulating(t: f64, alpha: f64) -> f64 {
    t * (-alpha * t).exp()
}

/// Stationary (unmodulated) realization of the ground process.
pub fn generate_stationary(spec: &GroundMotionSpec, seed: u64) -> Result<Record> {
    spec.validate()?;
    let x = synthesize(spec, spec.n_samples(), seed);
    Ok(Record::new(spec.dt, Units::Acceleration, "ground", x))
}

/// Modulated realization: stationary synthesis times the envelope.
pub fn generate_realization(spec: &GroundMotionSpec, seed: u64) -> Result<Record> {
    spec.validate()?;
    let n = spec.n_samples();
    let mut x = synthesize(spec, n, seed);
    for (j, v) in x.iter_mut().enumerate() {
        *v *= modulating(j as f64 * spec.dt, spec.alpha);
    }
    Ok(Record::new(spec.dt, Units::Acceleration, "ground", x))
}

/// Spectral-representation synthesis of `n` samples at the spec's dt.
///
/// Components sit at `w_i = (i + 1/2) * dw` with `dw = 2*pi/(n*dt)`, so the
/// sum is one length-n inverse FFT followed by a half-bin phase twist.
fn synthesize(spec: &GroundMotionSpec, n: usize, seed: u64) -> Vec<f64> {
    let dt = spec.dt;
    let dw = 2.0 * PI / (n as f64 * dt);
    let m = n / 2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (i, slot) in buf.iter_mut().enumerate().take(m) {
        let w = (i as f64 + 0.5) * dw;
        let amp = (2.0 * kanai_tajimi_psd(w, spec) * dw).sqrt();
        let phase = rng.random::<f64>() * 2.0 * PI;
        *slot = Complex::from_polar(amp, phase);
    }

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut buf);

    // x_j = Re( e^{i*pi*j/n} * sum_i C_i e^{2*pi*i*i*j/n} )
    buf.iter()
        .enumerate()
        .map(|(j, c)| {
            let twist = Complex::from_polar(1.0, PI * j as f64 / n as f64);
            (c * twist).re
        })
        .collect()
}

/// Flat two-sided measurement-noise density for a signal: integrating it
/// over the resolvable band `[-pi/dt, pi/dt]` gives the noise variance
/// `(rms_ratio * RMS)^2`.
pub fn noise_psd(signal: &Record, noise: &NoiseSpec) -> f64 {
    let target_rms = noise.rms_ratio * signal.rms();
    target_rms * target_rms * signal.dt / (2.0 * PI)
}

/// Calibration search parameters.
#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub ensemble_size: usize,
    /// Fraction of band bins that must fall inside the two-sigma band.
    pub coverage_target: f64,
    /// Base seed for the calibration ensemble.
    pub seed: u64,
    /// Relative width at which the bisection stops.
    pub tol: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            ensemble_size: 200,
            coverage_target: 0.95,
            seed: 0x5e15,
            tol: 1e-3,
        }
    }
}

/// Calibration outcome: the intensity and the coverage it achieved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub g0: f64,
    pub coverage: f64,
    pub coverage_target: f64,
}

/// Per-bin ensemble Fourier-magnitude statistics at g0 = 1. Amplitudes of
/// the linear synthesis scale as sqrt(g0), so one ensemble serves every
/// candidate intensity.
struct EnsembleBand {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl EnsembleBand {
    /// Fraction of band bins whose measured magnitude lies within
    /// `sqrt(g0) * (mean +- 2*std)`.
    ///
    /// Magnitudes are bounded below by zero and the population lower edge
    /// of a two-sigma magnitude band sits below zero, so the lower edge is
    /// dropped entirely; keeping finite-ensemble sample edges would break
    /// the monotonicity in g0 that the bisection relies on.
    fn coverage(&self, rho: &[f64], g0: f64) -> f64 {
        let s = g0.sqrt();
        let mut hit = 0usize;
        for (b, r) in rho.iter().enumerate() {
            let hi = s * (self.mean[b] + 2.0 * self.std[b]);
            if *r <= hi {
                hit += 1;
            }
        }
        hit as f64 / rho.len() as f64
    }
}

fn fft_magnitudes(x: &[f64], n_bins: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut buf);
    buf[..n_bins].iter().map(|c| c.norm()).collect()
}

/// Calibrate the spectral intensity so that the measured record's Fourier
/// magnitudes fall inside the ensemble two-sigma band at the target rate.
///
/// The band covers frequencies up to half the Nyquist rate; magnitudes (not
/// real/imaginary parts) are compared. The ensemble is modulated, matching
/// how field records are produced. Coverage is non-decreasing in g0 because
/// only the upper band edge constrains, so the smallest intensity reaching
/// the target is found by doubling to bracket and bisecting in log scale.
/// `spec.g0` is ignored.
pub fn calibrate_g0(
    measured: &Record,
    spec: &GroundMotionSpec,
    cfg: &CalibrationConfig,
) -> Result<Calibration> {
    measured.expect_units(Units::Acceleration, "calibrate_g0")?;
    let mut unit_spec = spec.clone();
    unit_spec.g0 = 1.0;
    unit_spec.dt = measured.dt;
    unit_spec.duration = measured.len() as f64 * measured.dt;
    unit_spec.validate()?;
    let n = measured.len();
    if (n as f64 * measured.dt) * spec.omega_g < 4.0 * PI {
        return Err(Error::validation(
            "measured record shorter than two ground-filter cycles",
        ));
    }
    if cfg.ensemble_size < 8 {
        return Err(Error::validation("calibration ensemble too small"));
    }

    // band [0, Nyquist/2]: bins with 2*pi*b/(n*dt) <= pi/(2*dt)
    let n_bins = n / 4 + 1;
    let mut planner = FftPlanner::new();
    let rho = fft_magnitudes(&measured.samples, n_bins, &mut planner);

    let mut mean = vec![0.0f64; n_bins];
    let mut m2 = vec![0.0f64; n_bins];
    for i in 0..cfg.ensemble_size {
        let seed = cfg
            .seed
            .wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut x = synthesize(&unit_spec, n, seed);
        for (j, v) in x.iter_mut().enumerate() {
            *v *= modulating(j as f64 * unit_spec.dt, unit_spec.alpha);
        }
        let mags = fft_magnitudes(&x, n_bins, &mut planner);
        // Welford over the ensemble, per bin
        let k = (i + 1) as f64;
        for b in 0..n_bins {
            let d = mags[b] - mean[b];
            mean[b] += d / k;
            m2[b] += d * (mags[b] - mean[b]);
        }
    }
    let std: Vec<f64> = m2
        .iter()
        .map(|v| (v / (cfg.ensemble_size.saturating_sub(1)).max(1) as f64).sqrt())
        .collect();
    let band = EnsembleBand { mean, std };

    // scale-aware start: least-squares amplitude match, clamped positive
    let num: f64 = rho.iter().zip(&band.mean).map(|(r, m)| r * m).sum();
    let den: f64 = band.mean.iter().map(|m| m * m).sum();
    let mut g = if den > 0.0 && num > 0.0 {
        (num / den).powi(2)
    } else {
        1.0
    };

    let target = cfg.coverage_target;
    let mut best = band.coverage(&rho, g);

    // walk down while the target is already met: the answer is the smallest
    // such g0; a degenerate (e.g. zero) record bottoms out at the cap
    if best >= target {
        for _ in 0..200 {
            let lower = g / 2.0;
            let c = band.coverage(&rho, lower);
            if c >= target {
                g = lower;
                best = c;
            } else {
                // bracket [lower, g]; bisect below
                return Ok(bisect(&band, &rho, lower, g, target, cfg.tol));
            }
        }
        return Ok(Calibration {
            g0: g,
            coverage: best,
            coverage_target: target,
        });
    }

    // walk up to find a passing upper end
    let mut lo = g;
    let mut hi = g;
    let mut reached = false;
    for _ in 0..200 {
        hi *= 2.0;
        let c = band.coverage(&rho, hi);
        best = best.max(c);
        if c >= target {
            reached = true;
            break;
        }
        lo = hi;
    }
    if !reached {
        return Err(Error::CalibrationFailure {
            best_coverage: best,
            target,
        });
    }
    Ok(bisect(&band, &rho, lo, hi, target, cfg.tol))
}

/// Geometric bisection: `lo` fails the target, `hi` meets it.
fn bisect(
    band: &EnsembleBand,
    rho: &[f64],
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
) -> Calibration {
    while hi / lo > 1.0 + tol {
        let mid = (lo * hi).sqrt();
        if band.coverage(rho, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Calibration {
        g0: hi,
        coverage: band.coverage(rho, hi),
        coverage_target: target,
    }
}
