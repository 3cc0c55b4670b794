use crate::error::{Error, Result};

/// Periodic multichannel time record, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    data: Vec<Vec<f64>>,
    labels: Vec<String>,
    fs: f64,
    period_length: usize,
}

impl SignalRecord {
    pub fn new(data: Vec<Vec<f64>>, labels: Vec<String>, fs: f64, period_length: usize) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidArgument("sampling frequency must be positive".into()));
        }
        if period_length == 0 {
            return Err(Error::InvalidArgument("period length must be positive".into()));
        }
        if labels.len() != data.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} channels",
                labels.len(),
                data.len()
            )));
        }
        if let Some(first) = data.first() {
            if data.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Dimension("channels differ in length".into()));
            }
            if first.len() % period_length != 0 {
                return Err(Error::Dimension(format!(
                    "record length {} not a multiple of the period {}",
                    first.len(),
                    period_length
                )));
            }
        }
        Ok(Self { data, labels, fs, period_length })
    }

    /// Single channel record with label `label`.
    pub fn single(samples: Vec<f64>, label: &str, fs: f64, period_length: usize) -> Result<Self> {
        Self::new(vec![samples], vec![label.to_string()], fs, period_length)
    }

    /// Builds a record from per-sample rows (`rows[t][channel]`).
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<String>, fs: f64, period_length: usize) -> Result<Self> {
        let nch = labels.len();
        let mut data = vec![Vec::with_capacity(rows.len()); nch];
        for row in rows {
            if row.len() != nch {
                return Err(Error::Dimension("row width differs from channel count".into()));
            }
            for (c, v) in row.iter().enumerate() {
                data[c].push(*v);
            }
        }
        Self::new(data, labels, fs, period_length)
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn periods(&self) -> usize {
        self.n_samples() / self.period_length
    }

    pub fn period_length(&self) -> usize {
        self.period_length
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn period(&self, c: usize, p: usize) -> &[f64] {
        let n = self.period_length;
        &self.data[c][p * n..(p + 1) * n]
    }

    /// Sample `t` of every channel.
    pub fn sample(&self, t: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[t]).collect()
    }

    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(channels.len());
        let mut labels = Vec::with_capacity(channels.len());
        for &c in channels {
            if c >= self.n_channels() {
                return Err(Error::ChannelOutOfRange { index: c, len: self.n_channels() });
            }
            data.push(self.data[c].clone());
            labels.push(self.labels[c].clone());
        }
        Self::new(data, labels, self.fs, self.period_length)
    }

    /// Concatenates the channels of `other` after those of `self`.
    pub fn stack(&self, other: &SignalRecord) -> Result<Self> {
        if other.n_samples() != self.n_samples() || other.period_length != self.period_length {
            return Err(Error::Dimension("records are not time-aligned".into()));
        }
        if (other.fs - self.fs).abs() > 1e-12 * self.fs {
            return Err(Error::Dimension("records have different sampling rates".into()));
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Self::new(data, labels, self.fs, self.period_length)
    }

    pub fn rms(&self, c: usize) -> f64 {
        rms(&self.data[c])
    }

    /// True when every period of every channel equals the first one exactly.
    pub fn is_exactly_periodic(&self) -> bool {
        let n = self.period_length;
        self.data.iter().all(|ch| ch.chunks(n).all(|p| p == &ch[..n]))
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Drops the first `discard` periods.
pub fn trim_transient(rec: &SignalRecord, discard: usize) -> Result<SignalRecord> {
    if discard >= rec.periods() {
        return Err(Error::InvalidArgument(format!(
            "cannot discard {discard} of {} periods",
            rec.periods()
        )));
    }
    let start = discard * rec.period_length;
    let data = rec.data.iter().map(|c| c[start..].to_vec()).collect();
    SignalRecord::new(data, rec.labels.clone(), rec.fs, rec.period_length)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(periods: usize, n: usize) -> SignalRecord {
        SignalRecord::single((0..periods * n).map(|i| i as f64).collect(), "x", 10.0, n).unwrap()
    }

    #[test]
    fn trim_counts() {
        let r = ramp(25, 4);
        let t = trim_transient(&r, 5).unwrap();
        assert_eq!(t.periods(), 20);
        assert_eq!(t.channel(0)[0], 20.0);
        assert_eq!(trim_transient(&r, 0).unwrap(), r);
        assert!(trim_transient(&r, 25).is_err());
    }

    #[test]
    fn rejects_ragged_records() {
        assert!(SignalRecord::single(vec![0.0; 7], "x", 1.0, 4).is_err());
        assert!(SignalRecord::new(vec![vec![0.0; 4], vec![0.0; 8]], vec!["a".into(), "b".into()], 1.0, 4).is_err());
        assert!(SignalRecord::single(vec![0.0; 4], "x", 0.0, 4).is_err());
    }
}
