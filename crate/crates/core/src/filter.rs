//! Zero-phase Butterworth high-pass filtering and drift-free integration of
//! acceleration records.
//!
//! The filter is built as cascaded digital biquads with the classic
//! Butterworth quality factors, applied forward and backward over an
//! odd-reflection padded signal so that the net phase is zero and the net
//! magnitude is the squared section response.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::record::{Record, Units};

/// High-pass filter parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Butterworth order of the one-way filter.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Cutoff frequency (Hz).
    #[serde(default = "default_cutoff")]
    pub cutoff_hz: f64,
}

fn default_order() -> usize {
    4
}

fn default_cutoff() -> f64 {
    0.1
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: default_order(),
            cutoff_hz: default_cutoff(),
        }
    }
}

/// One direct-form-II-transposed second-order section.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// High-pass section at `fc` Hz with quality `q`, sample rate `fs`.
    fn highpass(fc: f64, q: f64, fs: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let cosw = w0.cos();
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cosw) / (2.0 * a0),
            b1: -(1.0 + cosw) / a0,
            b2: (1.0 + cosw) / (2.0 * a0),
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// First-order high-pass expressed as a degenerate section.
    fn highpass_first_order(fc: f64, fs: f64) -> Biquad {
        let k = (PI * fc / fs).tan();
        Biquad {
            b0: 1.0 / (1.0 + k),
            b1: -1.0 / (1.0 + k),
            b2: 0.0,
            a1: -(1.0 - k) / (1.0 + k),
            a2: 0.0,
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Run the section with its state pre-settled for a constant input
    /// equal to the first sample, so a step into the pad leaves no
    /// start-up transient.
    fn run(&self, x: &mut [f64]) {
        let u0 = x[0];
        let h1 = self.dc_gain();
        let mut s1 = (h1 - self.b0) * u0;
        let mut s2 = (self.b2 - self.a2 * h1) * u0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = self.b0 * xin + s1;
            s1 = self.b1 * xin - self.a1 * y + s2;
            s2 = self.b2 * xin - self.a2 * y;
            *v = y;
        }
    }
}

/// Butterworth high-pass as a cascade of sections.
fn design_highpass(spec: &FilterSpec, fs: f64) -> Result<Vec<Biquad>> {
    if spec.order == 0 {
        return Err(Error::validation("filter order must be at least 1"));
    }
    if !positive(spec.cutoff_hz) || spec.cutoff_hz >= fs / 2.0 {
        return Err(Error::validation(format!(
            "cutoff {} Hz must lie in (0, Nyquist = {} Hz)",
            spec.cutoff_hz,
            fs / 2.0
        )));
    }
    let n = spec.order;
    let mut sections = Vec::with_capacity(n / 2 + 1);
    for k in 0..n / 2 {
        // Butterworth pole-pair quality factors
        let psi = PI * (2 * k + 1) as f64 / (2.0 * n as f64);
        sections.push(Biquad::highpass(
            spec.cutoff_hz,
            1.0 / (2.0 * psi.sin()),
            fs,
        ));
    }
    if n % 2 == 1 {
        sections.push(Biquad::highpass_first_order(spec.cutoff_hz, fs));
    }
    Ok(sections)
}

/// Zero-phase high-pass: forward and backward passes over an odd-reflection
/// padded copy. The padding covers roughly three cutoff periods so the
/// filter state settles before the true signal begins.
pub fn highpass_zero_phase(x: &[f64], dt: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::validation("signal too short to filter"));
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::validation("sample interval must be positive"));
    }
    let fs = 1.0 / dt;
    let sections = design_highpass(spec, fs)?;

    let n = x.len();
    let pad = ((3.0 / (spec.cutoff_hz * dt)).ceil() as usize)
        .min(n - 1)
        .max(1);

    let mut padded = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        padded.push(2.0 * x[0] - x[i]);
    }
    padded.extend_from_slice(x);
    for i in (n - 1 - pad..n - 1).rev() {
        padded.push(2.0 * x[n - 1] - x[i]);
    }

    for s in &sections {
        s.run(&mut padded);
    }
    padded.reverse();
    for s in &sections {
        s.run(&mut padded);
    }
    padded.reverse();

    Ok(padded[pad..pad + n].to_vec())
}

/// Integrate an acceleration record to velocity: cumulative trapezoid then a
/// zero-phase high pass to remove the drift the integration introduces.
pub fn accel_to_velocity(rec: &Record, spec: &FilterSpec) -> Result<Record> {
    rec.expect_units(Units::Acceleration, "accel_to_velocity")?;
    if rec.samples.len() < 2 {
        return Err(Error::validation("record too short to integrate"));
    }
    let dt = rec.dt;
    let mut v = Vec::with_capacity(rec.samples.len());
    let mut acc = 0.0;
    v.push(0.0);
    for i in 1..rec.samples.len() {
        acc += 0.5 * (rec.samples[i - 1] + rec.samples[i]) * dt;
        v.push(acc);
    }
    let filtered = highpass_zero_phase(&v, dt, spec)?;
    Ok(Record::new(
        dt,
        Units::Velocity,
        rec.channel.clone(),
        filtered,
    ))
}
