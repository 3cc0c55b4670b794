//! Random-phase multisine excitation.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::FftPlanner;

use super::record::{rms, SignalRecord};
use crate::error::{Error, Result};

/// Phases are drawn from ChaCha20 seeded with `rng_seed`, so records are
/// reproducible across platforms.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisineSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub period_length: usize,
    pub fs: f64,
    pub rms_amplitude: f64,
    pub periods: usize,
    /// Bins never excited in addition to DC.
    pub excluded_lines: BTreeSet<usize>,
    pub rng_seed: u64,
}

impl MultisineSpec {
    /// Flat-band multisine `f_min..f_max`, no extra excluded bins.
    pub fn band(f_min: f64, f_max: f64, fs: f64, period_length: usize, rms_amplitude: f64, periods: usize, rng_seed: u64) -> Self {
        Self {
            f_min,
            f_max,
            period_length,
            fs,
            rms_amplitude,
            periods,
            excluded_lines: BTreeSet::new(),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) {
            return Err(Error::InvalidArgument("fs must be positive".into()));
        }
        if self.period_length < 2 {
            return Err(Error::InvalidArgument("period length must be at least 2".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(Error::InvalidArgument("need 0 <= f_min < f_max".into()));
        }
        if self.f_max > self.fs / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "f_max {} exceeds Nyquist {}",
                self.f_max,
                self.fs / 2.0
            )));
        }
        if self.periods == 0 {
            return Err(Error::InvalidArgument("at least one period required".into()));
        }
        if !(self.rms_amplitude > 0.0 && self.rms_amplitude.is_finite()) {
            return Err(Error::InvalidArgument("rms amplitude must be positive".into()));
        }
        Ok(())
    }

    /// Excited DFT bins: `ceil(f_min N / fs) ..= floor(f_max N / fs)`, minus DC,
    /// the Nyquist bin, and `excluded_lines`.
    pub fn excited_lines(&self) -> Vec<usize> {
        let n = self.period_length as f64;
        let lo = (self.f_min * n / self.fs).ceil().max(1.0) as usize;
        let hi = (self.f_max * n / self.fs).floor() as usize;
        let nyq = self.period_length.div_ceil(2);
        (lo..=hi.min(nyq.saturating_sub(1)))
            .filter(|k| !self.excluded_lines.contains(k))
            .collect()
    }
}

pub fn generate_multisine(spec: &MultisineSpec) -> Result<SignalRecord> {
    spec.validate()?;
    let lines = spec.excited_lines();
    if lines.is_empty() {
        return Err(Error::InvalidArgument("multisine excites no frequency line".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let phases: Vec<f64> = lines.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let period = multisine_from_phases(&lines, &phases, spec.period_length, spec.rms_amplitude)?;
    let mut samples = Vec::with_capacity(period.len() * spec.periods);
    for _ in 0..spec.periods {
        samples.extend_from_slice(&period);
    }
    SignalRecord::single(samples, "u", spec.fs, spec.period_length)
}

/// One period of `sum_k cos(2 pi k t / N + phase_k)` scaled to `rms_amplitude`.
pub fn multisine_from_phases(lines: &[usize], phases: &[f64], period_length: usize, rms_amplitude: f64) -> Result<Vec<f64>> {
    if lines.len() != phases.len() {
        return Err(Error::Dimension("one phase per line required".into()));
    }
    if lines.is_empty() {
        return Err(Error::InvalidArgument("no excited lines".into()));
    }
    let n = period_length;
    if let Some(&k) = lines.iter().find(|&&k| k == 0 || 2 * k >= n) {
        return Err(Error::InvalidArgument(format!("line {k} outside (0, N/2)")));
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for (&k, &ph) in lines.iter().zip(phases) {
        let c = Complex64::from_polar(0.5, ph);
        spec[k] += c;
        spec[n - k] += c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let mut x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let r = rms(&x);
    for v in &mut x {
        *v *= rms_amplitude / r;
    }
    Ok(x)
}
