use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::record::SignalRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    PerPeriod,
    CoherentAverage,
}

/// DFT values on processed lines, indexed `[period][channel][line]`.
///
/// Scaling is `X(k) = (1/N) sum_t x(t) exp(-i 2 pi k t / N)`, so a cosine of
/// amplitude `a` shows up as `a/2` on its bin regardless of record length.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub values: Vec<Vec<Vec<Complex64>>>,
    pub lines: Vec<usize>,
    pub period_length: usize,
    pub fs: f64,
}

impl SpectrumRecord {
    pub fn n_periods(&self) -> usize {
        self.values.len()
    }

    pub fn n_channels(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Channel `c` of period `p`.
    pub fn channel(&self, p: usize, c: usize) -> &[Complex64] {
        &self.values[p][c]
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|&k| k as f64 * self.fs / self.period_length as f64).collect()
    }

    /// Mean over periods.
    pub fn averaged(&self) -> SpectrumRecord {
        let p = self.n_periods() as f64;
        let mut mean = vec![vec![Complex64::new(0.0, 0.0); self.n_lines()]; self.n_channels()];
        for period in &self.values {
            for (acc, ch) in mean.iter_mut().zip(period) {
                for (a, v) in acc.iter_mut().zip(ch) {
                    *a += v;
                }
            }
        }
        for ch in &mut mean {
            for v in ch.iter_mut() {
                *v /= p;
            }
        }
        SpectrumRecord {
            values: vec![mean],
            lines: self.lines.clone(),
            period_length: self.period_length,
            fs: self.fs,
        }
    }

    /// Channels `channels` only, in that order.
    pub fn select(&self, channels: &[usize]) -> Result<SpectrumRecord> {
        if let Some(&c) = channels.iter().find(|&&c| c >= self.n_channels()) {
            return Err(Error::ChannelOutOfRange { index: c, len: self.n_channels() });
        }
        Ok(SpectrumRecord {
            values: self
                .values
                .iter()
                .map(|p| channels.iter().map(|&c| p[c].clone()).collect())
                .collect(),
            lines: self.lines.clone(),
            period_length: self.period_length,
            fs: self.fs,
        })
    }
}

pub(crate) fn validate_lines(lines: &[usize], period_length: usize) -> Result<()> {
    if lines.is_empty() {
        return Err(Error::InvalidArgument("empty line set".into()));
    }
    if lines.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("lines must be strictly increasing".into()));
    }
    let last = *lines.last().unwrap();
    if 2 * last >= period_length {
        return Err(Error::InvalidArgument(format!(
            "line {last} is not below N/2 = {}",
            period_length / 2
        )));
    }
    Ok(())
}

/// Full scaled DFT of one period (all N bins).
pub(crate) fn dft_period(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

pub fn dft_lines(rec: &SignalRecord, lines: &[usize], averaging: Averaging) -> Result<SpectrumRecord> {
    validate_lines(lines, rec.period_length())?;
    let mut planner = FftPlanner::new();
    let mut values = Vec::with_capacity(rec.periods());
    for p in 0..rec.periods() {
        let per_channel = (0..rec.n_channels())
            .map(|c| {
                let full = dft_period(rec.period(c, p), &mut planner);
                lines.iter().map(|&k| full[k]).collect()
            })
            .collect();
        values.push(per_channel);
    }
    let spec = SpectrumRecord {
        values,
        lines: lines.to_vec(),
        period_length: rec.period_length(),
        fs: rec.fs(),
    };
    Ok(match averaging {
        Averaging::PerPeriod => spec,
        Averaging::CoherentAverage => spec.averaged(),
    })
}

/// Time derivative of a periodic record, computed per period by multiplying
/// the band-limited spectrum with `i 2 pi k / (N T)`; the Nyquist bin is dropped.
pub fn differentiate_periodic(rec: &SignalRecord) -> Result<SignalRecord> {
    let n = rec.period_length();
    let mut planner = FftPlanner::new();
    let inverse = planner.plan_fft_inverse(n);
    let w0 = 2.0 * PI * rec.fs() / n as f64;
    let mut data = Vec::with_capacity(rec.n_channels());
    for c in 0..rec.n_channels() {
        let mut out = Vec::with_capacity(rec.n_samples());
        for p in 0..rec.periods() {
            let mut spec = dft_period(rec.period(c, p), &mut planner);
            for (k, v) in spec.iter_mut().enumerate() {
                let signed = if 2 * k < n { k as f64 } else if 2 * k == n { 0.0 } else { k as f64 - n as f64 };
                *v *= Complex64::new(0.0, w0 * signed);
            }
            inverse.process(&mut spec);
            out.extend(spec.iter().map(|v| v.re));
        }
        data.push(out);
    }
    let labels = rec.labels().iter().map(|l| format!("d{l}")).collect();
    SignalRecord::new(data, labels, rec.fs(), n)
}

/// Per-line FRF estimate `Y(k) / U(k)` from period-averaged spectra of a
/// single-input record. Returns one series per output channel.
pub fn estimate_frf(input: &SpectrumRecord, output: &SpectrumRecord) -> Result<Vec<Vec<Complex64>>> {
    if input.lines != output.lines {
        return Err(Error::Dimension("input and output spectra use different lines".into()));
    }
    if input.n_channels() != 1 {
        return Err(Error::Dimension("FRF estimate needs a single input channel".into()));
    }
    let (u, y) = (input.averaged(), output.averaged());
    (0..y.n_channels())
        .map(|c| {
            u.channel(0, 0)
                .iter()
                .zip(y.channel(0, c))
                .zip(&u.lines)
                .map(|((uk, yk), &line)| {
                    if uk.norm() == 0.0 {
                        Err(Error::SingularAtLine { line })
                    } else {
                        Ok(yk / uk)
                    }
                })
                .collect()
        })
        .collect()
}
