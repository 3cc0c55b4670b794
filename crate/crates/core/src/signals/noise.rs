use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::dft::SpectrumRecord;
use super::record::{rms, SignalRecord};
use crate::error::{Error, Result};

/// Per-line, per-channel output noise variances, indexed `[channel][line]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Variance of a single-period spectrum (unbiased, `P - 1` divisor).
    pub per_period: Vec<Vec<f64>>,
    /// Variance of the period-averaged spectrum, `per_period / P`.
    pub averaged: Vec<Vec<f64>>,
    pub periods: usize,
}

impl NoiseModel {
    /// Weights `1/sigma` of the averaged spectrum. A noiseless record gets
    /// unit weights everywhere.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        if self.is_noiseless() {
            return self.averaged.iter().map(|c| vec![1.0; c.len()]).collect();
        }
        let floor = self
            .averaged
            .iter()
            .flatten()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        self.averaged
            .iter()
            .map(|c| c.iter().map(|&v| 1.0 / v.max(floor).sqrt()).collect())
            .collect()
    }

    pub fn is_noiseless(&self) -> bool {
        self.averaged.iter().flatten().all(|&v| v == 0.0)
    }
}

pub fn estimate_noise_variance(per_period: &SpectrumRecord) -> Result<NoiseModel> {
    let p = per_period.n_periods();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "noise variance needs at least two periods".into(),
        ));
    }
    let mean = per_period.averaged();
    let mut var = vec![vec![0.0; per_period.n_lines()]; per_period.n_channels()];
    for period in &per_period.values {
        for (c, ch) in period.iter().enumerate() {
            for (f, v) in ch.iter().enumerate() {
                var[c][f] += (v - mean.values[0][c][f]).norm_sqr();
            }
        }
    }
    for ch in &mut var {
        for v in ch.iter_mut() {
            *v /= (p - 1) as f64;
        }
    }
    let averaged = var.iter().map(|c| c.iter().map(|v| v / p as f64).collect()).collect();
    Ok(NoiseModel { per_period: var, averaged, periods: p })
}

/// Adds white Gaussian noise to `channels` so that each reaches `snr_db`
/// relative to its own RMS.
pub fn add_white_noise(rec: &SignalRecord, channels: &[usize], snr_db: f64, seed: u64) -> Result<SignalRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut data = rec.channels().to_vec();
    for &c in channels {
        if c >= data.len() {
            return Err(Error::ChannelOutOfRange { index: c, len: data.len() });
        }
        let sigma = rms(&data[c]) * 10f64.powf(-snr_db / 20.0);
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidArgument(format!("noise level: {e}")))?;
        for v in &mut data[c] {
            *v += normal.sample(&mut rng);
        }
    }
    SignalRecord::new(data, rec.labels().to_vec(), rec.fs(), rec.period_length())
}
