//! Frequency-domain nonlinear subspace identification: the nonlinear basis
//! signals are treated as extra measured inputs of the underlying linear system.

mod diagram;
mod fnsi;

pub use diagram::{
    stabilization_diagram, write_diagram_csv, DiagramPole, DiagramRow, Stability, StabilityTolerances, StabilizationDiagram,
};
pub use fnsi::{fnsi_identify, singular_values, SubspaceConfig, Weighting};

use crate::error::{Error, Result};
use crate::model::BasisFunctionSet;
use crate::signals::{dft_lines, differentiate_periodic, Averaging, SignalRecord, SpectrumRecord};

/// Spectra of `ubar = [u; g(y)]` on `lines`, with `g` evaluated sample by
/// sample on the measured outputs.
pub fn build_extended_input_spectra(
    u: &SignalRecord,
    y: &SignalRecord,
    basis: &BasisFunctionSet,
    lines: &[usize],
    averaging: Averaging,
) -> Result<SpectrumRecord> {
    dft_lines(&extended_input_signal(u, y, basis)?, lines, averaging)
}

/// Time-domain extended input `[u; g(y)]`.
pub fn extended_input_signal(u: &SignalRecord, y: &SignalRecord, basis: &BasisFunctionSet) -> Result<SignalRecord> {
    if u.n_samples() != y.n_samples() || u.period_length() != y.period_length() || u.fs() != y.fs() {
        return Err(Error::Dimension("input and output records are not aligned".into()));
    }
    if basis.n_outputs() != y.n_channels() {
        return Err(Error::Dimension(format!(
            "basis is defined over {} outputs, record has {}",
            basis.n_outputs(),
            y.n_channels()
        )));
    }
    let y_dot = if basis.any_velocity() { Some(differentiate_periodic(y)?) } else { None };
    let n = y.n_samples();
    let mut g = vec![Vec::with_capacity(n); basis.len()];
    let mut yt = vec![0.0; y.n_channels()];
    let mut ydt = vec![0.0; y.n_channels()];
    for t in 0..n {
        for c in 0..y.n_channels() {
            yt[c] = y.channel(c)[t];
            if let Some(d) = &y_dot {
                ydt[c] = d.channel(c)[t];
            }
        }
        let vals = basis.eval(&yt, y_dot.as_ref().map(|_| ydt.as_slice()))?;
        for (ch, v) in g.iter_mut().zip(vals) {
            ch.push(v);
        }
    }
    let mut labels = u.labels().to_vec();
    labels.extend(basis.entries().iter().map(|e| format!("g[{e}]")));
    let mut data = u.channels().to_vec();
    data.extend(g);
    SignalRecord::new(data, labels, u.fs(), u.period_length())
}

/// All bins in `(0, min(degree * f_max, 0.9 fs / 2)]`, where `degree` is the
/// highest basis degree (1 for a linear model).
pub fn default_processed_lines(f_max: f64, fs: f64, period_length: usize, basis: &BasisFunctionSet) -> Vec<usize> {
    let degree = basis.entries().iter().map(|e| e.degree()).max().unwrap_or(1).max(1) as f64;
    let f_top = (degree * f_max).min(0.9 * fs / 2.0);
    let k_top = ((f_top * period_length as f64 / fs).floor() as usize).min((period_length - 1) / 2);
    (1..=k_top).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_basis_gives_input_only() {
        let u = SignalRecord::single((0..64).map(|t| (t as f64).sin()).collect(), "u", 1.0, 64).unwrap();
        let y = SignalRecord::single(vec![1.0; 64], "y", 1.0, 64).unwrap();
        let s = build_extended_input_spectra(&u, &y, &BasisFunctionSet::empty(1), &[1, 2, 3], Averaging::CoherentAverage).unwrap();
        let direct = dft_lines(&u, &[1, 2, 3], Averaging::CoherentAverage).unwrap();
        assert_eq!(s.values, direct.values);
    }

    #[test]
    fn square_of_cosine_lands_on_dc_and_double_bin() {
        let n = 64;
        let k = 5;
        let y: Vec<f64> = (0..n).map(|t| (2.0 * PI * (k * t) as f64 / n as f64).cos()).collect();
        let u = SignalRecord::single(vec![0.0; n], "u", 1.0, n).unwrap();
        let y = SignalRecord::single(y, "y", 1.0, n).unwrap();
        let g = extended_input_signal(&u, &y, &BasisFunctionSet::powers(0, &[2], 1).unwrap()).unwrap();
        let all: Vec<usize> = (0..n / 2).collect();
        let spec = dft_lines(&g.select(&[1]).unwrap(), &all, Averaging::CoherentAverage).unwrap();
        for (bin, v) in spec.channel(0, 0).iter().enumerate() {
            if bin == 0 || bin == 2 * k {
                assert!(v.norm() > 0.2);
            } else {
                assert!(v.norm() < 1e-14, "bin {bin}");
            }
        }
    }

    #[test]
    fn default_lines_cover_cubic_harmonics() {
        let basis = BasisFunctionSet::powers(0, &[2, 3], 1).unwrap();
        let lines = default_processed_lines(300.0, 2441.0, 8192, &basis);
        assert_eq!(lines[0], 1);
        assert_eq!(*lines.last().unwrap(), (900.0 * 8192.0 / 2441.0_f64).floor() as usize);
        let linear = default_processed_lines(300.0, 2441.0, 8192, &BasisFunctionSet::empty(1));
        assert_eq!(*linear.last().unwrap(), 1006);
    }

    #[test]
    fn misaligned_records_rejected() {
        let u = SignalRecord::single(vec![0.0; 64], "u", 1.0, 64).unwrap();
        let y = SignalRecord::single(vec![0.0; 32], "y", 1.0, 32).unwrap();
        assert!(extended_input_signal(&u, &y, &BasisFunctionSet::empty(1)).is_err());
    }
}
