//! Physical nonlinear coefficients from an identified extended FRF.
//!
//! A restoring force `-c_a g_a` acting where the excitation force acts gives
//! `H_e[i, m+a](k) = -c_a H_e[i, j](k) / alpha`, with `alpha` the force per
//! unit of input `j`. The per-line ratio is therefore a frequency-dependent,
//! complex estimate of `c_a`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{extended_frf, GreyBoxModel};

/// Lines where `|H_e[i, j]|` falls below this fraction of its maximum are dropped.
pub const DEFAULT_EXCLUSION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSummary {
    pub mean_real: f64,
    /// `log10(|mean Re c| / mean |Im c|)`.
    pub log10_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearCoefficientEstimate {
    /// Index into the model's basis.
    pub basis_index: usize,
    pub label: String,
    pub lines: Vec<usize>,
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Requested lines dropped because the force FRF nearly vanished there.
    pub excluded_lines: Vec<usize>,
    pub units: String,
}

impl NonlinearCoefficientEstimate {
    pub fn summary(&self) -> Result<CoefficientSummary> {
        coefficient_summary(&self.values)
    }

    /// Summary restricted to the lines in `subset` (e.g. the excited band).
    pub fn summary_on(&self, subset: &[usize]) -> Result<CoefficientSummary> {
        let vals: Vec<Complex64> = self
            .lines
            .iter()
            .zip(&self.values)
            .filter(|(k, _)| subset.contains(k))
            .map(|(_, v)| *v)
            .collect();
        coefficient_summary(&vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionConfig {
    pub force_input_column: usize,
    pub nl_location_output: usize,
    /// Physical force produced by one unit of the force input.
    pub force_per_input_unit: f64,
    pub exclusion_threshold: f64,
}

impl ConversionConfig {
    pub fn new(force_input_column: usize, nl_location_output: usize) -> Self {
        Self {
            force_input_column,
            nl_location_output,
            force_per_input_unit: 1.0,
            exclusion_threshold: DEFAULT_EXCLUSION_THRESHOLD,
        }
    }

    pub fn with_force_per_input_unit(mut self, alpha: f64) -> Self {
        self.force_per_input_unit = alpha;
        self
    }
}

/// One estimate per basis function, `c_a(k) = -alpha H_e[i, m+a](k) / H_e[i, j](k)`.
pub fn convert_coefficients(
    model: &GreyBoxModel,
    lines: &[usize],
    period_length: usize,
    cfg: &ConversionConfig,
) -> Result<Vec<NonlinearCoefficientEstimate>> {
    let d = model.dims();
    if cfg.force_input_column >= d.n_inputs || cfg.nl_location_output >= d.n_outputs {
        return Err(Error::InvalidArgument(format!(
            "force input {} / output {} out of range for a {}-input {}-output model",
            cfg.force_input_column, cfg.nl_location_output, d.n_inputs, d.n_outputs
        )));
    }
    if !(cfg.force_per_input_unit.is_finite() && cfg.force_per_input_unit != 0.0) {
        return Err(Error::InvalidArgument("force per input unit must be finite and nonzero".into()));
    }
    if lines.is_empty() {
        return Err(Error::InvalidArgument("no lines to convert".into()));
    }
    let h = extended_frf(model, lines, period_length)?;
    let (i, j) = (cfg.nl_location_output, cfg.force_input_column);
    let hmax = h.iter().map(|hk| hk[(i, j)].norm()).fold(0.0, f64::max);
    let keep: Vec<bool> = h.iter().map(|hk| hmax > 0.0 && hk[(i, j)].norm() >= cfg.exclusion_threshold * hmax).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::InvalidArgument("force FRF vanishes on every line".into()));
    }
    let fs = 1.0 / model.sample_period();
    let kept_lines: Vec<usize> = lines.iter().zip(&keep).filter(|(_, &k)| k).map(|(l, _)| *l).collect();
    let excluded: Vec<usize> = lines.iter().zip(&keep).filter(|(_, &k)| !k).map(|(l, _)| *l).collect();
    let freqs: Vec<f64> = kept_lines.iter().map(|&k| k as f64 * fs / period_length as f64).collect();
    let basis = model.basis();
    Ok((0..d.n_basis)
        .map(|a| {
            let values = h
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(hk, _)| -cfg.force_per_input_unit * hk[(i, d.n_inputs + a)] / hk[(i, j)])
                .collect();
            let degree = basis.entries()[a].degree();
            NonlinearCoefficientEstimate {
                basis_index: a,
                label: basis.entries()[a].to_string(),
                lines: kept_lines.clone(),
                frequencies_hz: freqs.clone(),
                values,
                excluded_lines: excluded.clone(),
                units: format!("force/output^{degree}"),
            }
        })
        .collect())
}

pub fn coefficient_summary(values: &[Complex64]) -> Result<CoefficientSummary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient series".into()));
    }
    let n = values.len() as f64;
    let mean_real = values.iter().map(|v| v.re).sum::<f64>() / n;
    let mean_imag = values.iter().map(|v| v.im.abs()).sum::<f64>() / n;
    Ok(CoefficientSummary { mean_real, log10_ratio: (mean_real.abs() / mean_imag).log10() })
}

/// Columns `frequency_hz`, then `re`/`im` per basis function; summaries as `#` rows.
pub fn write_coefficients_csv(w: &mut impl Write, est: &[NonlinearCoefficientEstimate]) -> Result<()> {
    let Some(first) = est.first() else {
        return Err(Error::InvalidArgument("no coefficients to write".into()));
    };
    write!(w, "frequency_hz")?;
    for e in est {
        write!(w, ",re[{0}],im[{0}]", e.label)?;
    }
    writeln!(w)?;
    for (row, f) in first.frequencies_hz.iter().enumerate() {
        write!(w, "{f:.6}")?;
        for e in est {
            write!(w, ",{:.12e},{:.12e}", e.values[row].re, e.values[row].im)?;
        }
        writeln!(w)?;
    }
    for e in est {
        let s = e.summary()?;
        writeln!(w, "# summary {} mean_real {:.9e} log10_ratio {:.4} units {}", e.label, s.mean_real, s.log10_ratio, e.units)?;
    }
    if !first.excluded_lines.is_empty() {
        let ex: Vec<String> = first.excluded_lines.iter().map(|k| k.to_string()).collect();
        writeln!(w, "# excluded_lines {}", ex.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::simulator::{virtual_silverbox, SILVERBOX_CUBIC, SILVERBOX_INPUT_GAIN, SILVERBOX_QUADRATIC};

    const N: usize = 8192;
    const FS: f64 = 2441.0;

    fn silverbox_model() -> GreyBoxModel {
        virtual_silverbox().discretize(1.0 / FS).unwrap()
    }

    fn cfg() -> ConversionConfig {
        ConversionConfig::new(0, 0).with_force_per_input_unit(SILVERBOX_INPUT_GAIN)
    }

    #[test]
    fn exact_discretisation_gives_flat_real_coefficients() {
        let lines: Vec<usize> = (1..1000).collect();
        let est = convert_coefficients(&silverbox_model(), &lines, N, &cfg()).unwrap();
        assert_eq!(est.len(), 2);
        for (e, truth) in est.iter().zip([SILVERBOX_CUBIC, SILVERBOX_QUADRATIC]) {
            assert_eq!(e.values.len(), lines.len());
            for v in &e.values {
                assert!((v - truth).norm() <= 1e-6 * truth.abs(), "{} {v}", e.label);
            }
            let s = e.summary().unwrap();
            assert!((s.mean_real - truth).abs() <= 0.01 * truth.abs());
            assert!(s.log10_ratio > 3.0);
        }
    }

    #[test]
    fn zero_nonlinear_columns_give_zero() {
        let m = silverbox_model().scale_nonlinear(0.0);
        let est = convert_coefficients(&m, &[10, 200, 500], N, &cfg()).unwrap();
        assert!(est.iter().all(|e| e.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))));
    }

    #[test]
    fn scales_linearly_with_nonlinear_columns() {
        let lines = [3, 150, 229, 640];
        let base = convert_coefficients(&silverbox_model(), &lines, N, &cfg()).unwrap();
        let scaled = convert_coefficients(&silverbox_model().scale_nonlinear(-2.5), &lines, N, &cfg()).unwrap();
        for (b, s) in base.iter().zip(&scaled) {
            for (vb, vs) in b.values.iter().zip(&s.values) {
                assert!((vs - vb * -2.5).norm() <= 1e-14 * vb.norm());
            }
        }
    }

    #[test]
    fn invariant_under_similarity() {
        let m = silverbox_model();
        let t = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -1.1, 0.7]);
        let lines: Vec<usize> = (1..400).step_by(7).collect();
        let a = convert_coefficients(&m, &lines, N, &cfg()).unwrap();
        let b = convert_coefficients(&m.similarity(&t).unwrap(), &lines, N, &cfg()).unwrap();
        for (ea, eb) in a.iter().zip(&b) {
            for (va, vb) in ea.values.iter().zip(&eb.values) {
                assert!((va - vb).norm() <= 1e-10 * va.norm());
            }
        }
    }

    #[test]
    fn excludes_lines_where_force_frf_vanishes() {
        // force transfer with a zero at xi = -1 (line N/2)
        let basis = crate::model::BasisFunctionSet::powers(0, &[3], 1).unwrap();
        let m = GreyBoxModel::from_extended(
            DMatrix::from_row_slice(1, 1, &[0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1,
            basis,
            1e-3,
        )
        .unwrap();
        let est = convert_coefficients(&m, &[1, 4, 8], 16, &ConversionConfig::new(0, 0)).unwrap();
        assert_eq!(est[0].excluded_lines, vec![8]);
        assert_eq!(est[0].lines, vec![1, 4]);
    }

    #[test]
    fn summary_examples() {
        let s = coefficient_summary(&[Complex64::new(3.95, 1e-10); 5]).unwrap();
        assert!((s.mean_real - 3.95).abs() < 1e-15);
        assert!((s.log10_ratio - 10.5966).abs() < 1e-3);
        let s = coefficient_summary(&[Complex64::new(1.0, 0.01); 3]).unwrap();
        assert!((s.log10_ratio - 2.0).abs() < 1e-12);
        let s = coefficient_summary(&[Complex64::new(1.0, 0.02), Complex64::new(3.0, -0.02)]).unwrap();
        assert!((s.mean_real - 2.0).abs() < 1e-15 && (s.log10_ratio - 2.0).abs() < 1e-12);
        assert!(coefficient_summary(&[]).is_err());
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(convert_coefficients(&silverbox_model(), &[1], N, &ConversionConfig::new(1, 0)).is_err());
        assert!(convert_coefficients(&silverbox_model(), &[], N, &cfg()).is_err());
    }

    #[test]
    fn csv_has_one_row_per_line() {
        let est = convert_coefficients(&silverbox_model(), &[10, 20, 30], N, &cfg()).unwrap();
        let mut buf = Vec::new();
        write_coefficients_csv(&mut buf, &est).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], "frequency_hz,re[0:0:3],im[0:0:3],re[0:0:2],im[0:0:2]");
        assert_eq!(text.lines().filter(|l| l.starts_with("# summary")).count(), 2);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn similarity_and_scaling(t in proptest::collection::vec(-2.0f64..2.0, 4), alpha in -5.0f64..5.0) {
            let t = DMatrix::from_row_slice(2, 2, &t);
            proptest::prop_assume!(t.determinant().abs() > 0.1);
            let m = silverbox_model();
            let lines = [5, 120, 230, 480, 900];
            let base = convert_coefficients(&m, &lines, N, &cfg()).unwrap();
            let other = convert_coefficients(&m.similarity(&t).unwrap().scale_nonlinear(alpha), &lines, N, &cfg()).unwrap();
            for (b, o) in base.iter().zip(&other) {
                for (vb, vo) in b.values.iter().zip(&o.values) {
                    proptest::prop_assert!((vo - vb * alpha).norm() <= 1e-9 * vb.norm() * alpha.abs().max(1.0));
                }
            }
        }
    }
}
