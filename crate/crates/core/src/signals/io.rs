//! Dataset file.
//!
//! ```text
//! greybox-dataset 1
//! fs 2.4410000000000000e3
//! period_length 8192
//! periods 25
//! seed 42
//! channel u N input
//! channel y m output
//! excited 1 2 3 ... 1006
//! meta <key> <value...>
//! data text
//! <one row per sample, one column per channel>
//! ```
//!
//! With `data binary` the header line is followed by the raw samples as
//! little-endian `f64`, channel-major (all samples of channel 0 first). The
//! `seed`, `excited` and `meta` lines are optional; `channel` lines define the
//! channel order as `label unit role`, where role is `input` or `output`.

use std::io::{BufRead, Write};

use super::record::SignalRecord;
use crate::error::{Error, Result};
use crate::model::io::{fmt_f64, parse_f64, parse_usize};

pub const DATASET_MAGIC: &str = "greybox-dataset";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelRole {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    #[default]
    Text,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub record: SignalRecord,
    pub units: Vec<String>,
    pub roles: Vec<ChannelRole>,
    pub excited_lines: Vec<usize>,
    pub seed: Option<u64>,
    pub meta: Vec<(String, String)>,
}

impl Dataset {
    fn channels_with(&self, role: ChannelRole) -> Vec<usize> {
        self.roles.iter().enumerate().filter(|(_, r)| **r == role).map(|(i, _)| i).collect()
    }

    pub fn input_channels(&self) -> Vec<usize> {
        self.channels_with(ChannelRole::Input)
    }

    pub fn output_channels(&self) -> Vec<usize> {
        self.channels_with(ChannelRole::Output)
    }

    pub fn inputs(&self) -> Result<SignalRecord> {
        self.record.select(&self.input_channels())
    }

    pub fn outputs(&self) -> Result<SignalRecord> {
        self.record.select(&self.output_channels())
    }

    /// Same dataset with the samples replaced (channel layout must match).
    pub fn with_record(&self, record: SignalRecord) -> Result<Self> {
        if record.n_channels() != self.record.n_channels() {
            return Err(Error::Dimension("channel count changed".into()));
        }
        Ok(Self { record, ..self.clone() })
    }
}

pub fn write_dataset(w: &mut impl Write, ds: &Dataset, format: DataFormat) -> Result<()> {
    let rec = &ds.record;
    if ds.units.len() != rec.n_channels() || ds.roles.len() != rec.n_channels() {
        return Err(Error::Dimension("units/roles must cover every channel".into()));
    }
    writeln!(w, "{DATASET_MAGIC} 1")?;
    writeln!(w, "fs {}", fmt_f64(rec.fs()))?;
    writeln!(w, "period_length {}", rec.period_length())?;
    writeln!(w, "periods {}", rec.periods())?;
    if let Some(seed) = ds.seed {
        writeln!(w, "seed {seed}")?;
    }
    for c in 0..rec.n_channels() {
        let role = match ds.roles[c] {
            ChannelRole::Input => "input",
            ChannelRole::Output => "output",
        };
        writeln!(w, "channel {} {} {role}", rec.labels()[c], ds.units[c])?;
    }
    if !ds.excited_lines.is_empty() {
        let l: Vec<String> = ds.excited_lines.iter().map(usize::to_string).collect();
        writeln!(w, "excited {}", l.join(" "))?;
    }
    for (k, v) in &ds.meta {
        writeln!(w, "meta {k} {v}")?;
    }
    match format {
        DataFormat::Text => {
            writeln!(w, "data text")?;
            let mut line = String::new();
            for t in 0..rec.n_samples() {
                line.clear();
                for c in 0..rec.n_channels() {
                    if c > 0 {
                        line.push(' ');
                    }
                    line.push_str(&fmt_f64(rec.channel(c)[t]));
                }
                writeln!(w, "{line}")?;
            }
        }
        DataFormat::Binary => {
            writeln!(w, "data binary")?;
            for ch in rec.channels() {
                for v in ch {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_dataset(mut r: impl BufRead) -> Result<Dataset> {
    let mut line = String::new();
    let mut ln = 0usize;
    let mut next_line = |r: &mut dyn BufRead, line: &mut String| -> Result<bool> {
        line.clear();
        ln += 1;
        Ok(r.read_line(line)? > 0)
    };

    if !next_line(&mut r, &mut line)? || line.split_whitespace().next() != Some(DATASET_MAGIC) {
        return Err(Error::format(1, "missing greybox-dataset header"));
    }
    let mut fs = None;
    let mut period_length = None;
    let mut periods = None;
    let mut seed = None;
    let mut labels = Vec::new();
    let mut units = Vec::new();
    let mut roles = Vec::new();
    let mut excited = Vec::new();
    let mut meta = Vec::new();
    let mut current = 1usize;
    let format = loop {
        if !next_line(&mut r, &mut line)? {
            return Err(Error::format(current, "missing data section"));
        }
        current += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.splitn(2, char::is_whitespace);
        let key = it.next().unwrap_or_default();
        let rest = it.next().unwrap_or_default().trim();
        match key {
            "fs" => fs = Some(parse_f64(rest, current)?),
            "period_length" => period_length = Some(parse_usize(Some(rest), current, key)?),
            "periods" => periods = Some(parse_usize(Some(rest), current, key)?),
            "seed" => {
                seed = Some(rest.parse::<u64>().map_err(|_| Error::format(current, "bad seed"))?)
            }
            "channel" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::format(current, "channel needs label, unit and role"));
                }
                labels.push(parts[0].to_string());
                units.push(parts[1].to_string());
                roles.push(match parts[2] {
                    "input" => ChannelRole::Input,
                    "output" => ChannelRole::Output,
                    other => return Err(Error::format(current, format!("unknown role '{other}'"))),
                });
            }
            "excited" => {
                for tok in rest.split_whitespace() {
                    excited.push(parse_usize(Some(tok), current, "excited line")?);
                }
            }
            "meta" => {
                let mut kv = rest.splitn(2, char::is_whitespace);
                let k = kv.next().unwrap_or_default().to_string();
                meta.push((k, kv.next().unwrap_or_default().trim().to_string()));
            }
            "data" => match rest {
                "text" => break DataFormat::Text,
                "binary" => break DataFormat::Binary,
                other => return Err(Error::format(current, format!("unknown data format '{other}'"))),
            },
            other => return Err(Error::format(current, format!("unknown key '{other}'"))),
        }
    };
    let fs = fs.ok_or_else(|| Error::format(current, "missing fs"))?;
    let n = period_length.ok_or_else(|| Error::format(current, "missing period_length"))?;
    let p = periods.ok_or_else(|| Error::format(current, "missing periods"))?;
    let nch = labels.len();
    let total = n * p;
    let mut data = vec![Vec::with_capacity(total); nch];
    match format {
        DataFormat::Text => {
            for t in 0..total {
                if !next_line(&mut r, &mut line)? {
                    return Err(Error::format(current + t + 1, "unexpected end of data"));
                }
                let mut count = 0;
                for (c, tok) in line.split_whitespace().enumerate() {
                    if c >= nch {
                        return Err(Error::format(current + t + 1, "too many columns"));
                    }
                    data[c].push(parse_f64(tok, current + t + 1)?);
                    count += 1;
                }
                if count != nch {
                    return Err(Error::format(current + t + 1, "too few columns"));
                }
            }
        }
        DataFormat::Binary => {
            let mut buf = [0u8; 8];
            for ch in &mut data {
                for _ in 0..total {
                    r.read_exact(&mut buf)
                        .map_err(|_| Error::format(current, "binary block truncated"))?;
                    ch.push(f64::from_le_bytes(buf));
                }
            }
        }
    }
    let record = SignalRecord::new(data, labels, fs, n)?;
    Ok(Dataset { record, units, roles, excited_lines: excited, seed, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let u: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let y: Vec<f64> = (0..12).map(|i| 1e-7 * i as f64 - 5e300).collect();
        Dataset {
            record: SignalRecord::new(vec![u, y], vec!["u".into(), "y".into()], 2441.0, 4).unwrap(),
            units: vec!["N".into(), "m".into()],
            roles: vec![ChannelRole::Input, ChannelRole::Output],
            excited_lines: vec![1],
            seed: Some(99),
            meta: vec![("rms".into(), "0.15".into())],
        }
    }

    #[test]
    fn text_and_binary_round_trip() {
        let ds = sample();
        for fmt in [DataFormat::Text, DataFormat::Binary] {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds, fmt).unwrap();
            let back = read_dataset(buf.as_slice()).unwrap();
            assert_eq!(back, ds);
        }
        assert_eq!(ds.input_channels(), vec![0]);
        assert_eq!(ds.outputs().unwrap().labels(), &["y".to_string()]);
    }

    #[test]
    fn truncated_data_rejected() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &sample(), DataFormat::Binary).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_dataset(buf.as_slice()), Err(Error::Format { .. })));
        let mut buf = Vec::new();
        write_dataset(&mut buf, &sample(), DataFormat::Text).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let short: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(read_dataset(short.as_bytes()).is_err());
    }
}
