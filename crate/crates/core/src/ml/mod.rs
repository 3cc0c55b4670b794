//! Frequency-domain weighted least-squares refinement of a grey-box model.
//!
//! The model is simulated in the time domain on the measured input, the
//! simulated output is transformed on the processed lines and compared with
//! the measured spectra:
//!
//! ```text
//! eps(k) = Y_m(k, theta) - Y(k),   V = sum_k eps(k)^H W(k)^2 eps(k)
//! ```

mod jacobian;
mod lm;

pub use jacobian::jacobian;
pub use lm::{cost_gradient, gauss_newton_step, levenberg_marquardt, write_trace_csv, LMConfig, LMIteration, LMTrace, Termination};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{pack_parameters, unpack_slice, GreyBoxModel};
use crate::signals::{dft_lines, estimate_noise_variance, validate_lines, Averaging, SignalRecord, SpectrumRecord};
use crate::simulator::{simulate_trajectory, Trajectory};

/// Noise below this fraction of the largest spectral line counts as none.
pub const NOISELESS_RELATIVE_LEVEL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MLProblem {
    input: SignalRecord,
    /// Measured spectra, `[output][line]`, period-averaged.
    measured: Vec<Vec<Complex64>>,
    weights: Vec<Vec<f64>>,
    initial: GreyBoxModel,
    lines: Vec<usize>,
    settle_periods: usize,
    /// Sample-major input over settle + kept periods.
    drive: Vec<f64>,
}

impl MLProblem {
    /// `measured` holds averaged output spectra on `lines`, one channel per
    /// output; `weights` is `[output][line]` and strictly positive.
    pub fn new(
        input: SignalRecord,
        measured: &SpectrumRecord,
        weights: Vec<Vec<f64>>,
        initial: GreyBoxModel,
        settle_periods: usize,
    ) -> Result<Self> {
        let d = initial.dims();
        if input.n_channels() != d.n_inputs {
            return Err(Error::Dimension(format!(
                "model has {} inputs, record has {} channels",
                d.n_inputs,
                input.n_channels()
            )));
        }
        if measured.n_channels() != d.n_outputs || measured.period_length != input.period_length() {
            return Err(Error::Dimension("measured spectra do not match the model outputs or period".into()));
        }
        validate_lines(&measured.lines, input.period_length())?;
        check_weights(&weights, d.n_outputs, measured.n_lines())?;
        let averaged = if measured.n_periods() == 1 { measured.clone() } else { measured.averaged() };
        let drive = build_drive(&input, settle_periods);
        Ok(Self {
            input,
            measured: averaged.values[0].clone(),
            weights,
            initial,
            lines: measured.lines.clone(),
            settle_periods,
            drive,
        })
    }

    /// Builds the problem from time records: spectra on `lines`, coherent
    /// average over periods, weights from the sample variance over periods
    /// (unit weights when the outputs are noiseless or single-period).
    pub fn from_records(
        input: SignalRecord,
        output: &SignalRecord,
        lines: &[usize],
        initial: GreyBoxModel,
        settle_periods: usize,
    ) -> Result<Self> {
        let per_period = dft_lines(output, lines, Averaging::PerPeriod)?;
        let unit = vec![vec![1.0; lines.len()]; output.n_channels()];
        let weights = if output.periods() >= 2 {
            let noise = estimate_noise_variance(&per_period)?;
            // period-to-period differences at rounding level are not noise
            let peak = per_period.averaged().values[0].iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
            let sigma = noise.averaged.iter().flatten().fold(0.0_f64, |a, &v| a.max(v)).sqrt();
            if sigma <= NOISELESS_RELATIVE_LEVEL * peak { unit } else { noise.weights() }
        } else {
            unit
        };
        Self::new(input, &per_period, weights, initial, settle_periods)
    }

    pub fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Result<Self> {
        check_weights(&weights, self.measured.len(), self.lines.len())?;
        self.weights = weights;
        Ok(self)
    }

    pub fn with_initial(mut self, model: GreyBoxModel) -> Result<Self> {
        if model.dims() != self.initial.dims() {
            return Err(Error::Dimension("replacement model has different dimensions".into()));
        }
        self.initial = model;
        Ok(self)
    }

    pub fn input(&self) -> &SignalRecord {
        &self.input
    }
    pub fn measured(&self) -> &[Vec<Complex64>] {
        &self.measured
    }
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
    pub fn initial(&self) -> &GreyBoxModel {
        &self.initial
    }
    pub fn lines(&self) -> &[usize] {
        &self.lines
    }
    pub fn settle_periods(&self) -> usize {
        self.settle_periods
    }
    pub fn initial_theta(&self) -> Vec<f64> {
        pack_parameters(&self.initial).values
    }
    pub fn model_from(&self, theta: &[f64]) -> Result<GreyBoxModel> {
        unpack_slice(theta, &self.initial)
    }

    fn kept_start(&self) -> usize {
        self.settle_periods * self.input.period_length()
    }

    fn total_samples(&self) -> usize {
        (self.settle_periods + self.input.periods()) * self.input.period_length()
    }

    /// `sum |W Y|^2`, the cost of a model with zero output.
    pub fn data_energy(&self) -> f64 {
        self.measured
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| y.iter().zip(w).map(|(v, w)| (v * w).norm_sqr()).sum::<f64>())
            .sum()
    }
}

fn check_weights(weights: &[Vec<f64>], l: usize, nf: usize) -> Result<()> {
    if weights.len() != l || weights.iter().any(|w| w.len() != nf) {
        return Err(Error::Dimension("weights must be [output][line]".into()));
    }
    if weights.iter().flatten().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("weights must be strictly positive".into()));
    }
    Ok(())
}

/// Settle periods are a cyclic continuation backwards from the first period.
fn build_drive(input: &SignalRecord, settle: usize) -> Vec<f64> {
    let (n, p, m) = (input.period_length(), input.periods(), input.n_channels());
    let total = (settle + p) * n;
    let mut out = vec![0.0; total * m];
    for t in 0..total {
        let src = if t < settle * n {
            let period = (p - (settle - t / n) % p) % p;
            period * n + t % n
        } else {
            t - settle * n
        };
        for c in 0..m {
            out[t * m + c] = input.channel(c)[src];
        }
    }
    out
}

/// Base simulation and simulated spectra, `[f * l + o]`.
pub(crate) struct Evaluation {
    pub trajectory: Trajectory,
    pub simulated: Vec<Complex64>,
}

/// Averages the kept periods of a sample-major signal and returns its
/// scaled DFT on `lines`, `[f * width + c]`.
pub(crate) fn kept_spectrum(
    signal: &[f64],
    width: usize,
    start: usize,
    n: usize,
    periods: usize,
    lines: &[usize],
    planner: &mut FftPlanner<f64>,
) -> Vec<Complex64> {
    let fft = planner.plan_fft_forward(n);
    let mut out = vec![Complex64::new(0.0, 0.0); lines.len() * width];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / (n * periods) as f64;
    for c in 0..width {
        for (t, b) in buf.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..periods {
                acc += signal[(start + p * n + t) * width + c];
            }
            *b = Complex64::new(acc * scale, 0.0);
        }
        fft.process(&mut buf);
        for (f, &k) in lines.iter().enumerate() {
            out[f * width + c] = buf[k];
        }
    }
    out
}

pub(crate) fn evaluate(theta: &[f64], problem: &MLProblem) -> Result<(GreyBoxModel, Evaluation)> {
    let model = problem.model_from(theta)?;
    let ns = model.dims().n_states;
    let l = model.dims().n_outputs;
    let trajectory = simulate_trajectory(&model, &problem.drive, problem.total_samples(), &vec![0.0; ns])?;
    let mut planner = FftPlanner::new();
    let simulated = kept_spectrum(
        &trajectory.y,
        l,
        problem.kept_start(),
        problem.input.period_length(),
        problem.input.periods(),
        &problem.lines,
        &mut planner,
    );
    Ok((model, Evaluation { trajectory, simulated }))
}

fn residual_flat(problem: &MLProblem, simulated: &[Complex64]) -> Vec<Complex64> {
    let l = problem.measured.len();
    let mut out = simulated.to_vec();
    for (f, chunk) in out.chunks_mut(l).enumerate() {
        for (o, v) in chunk.iter_mut().enumerate() {
            *v -= problem.measured[o][f];
        }
    }
    out
}

fn cost_flat(problem: &MLProblem, eps: &[Complex64]) -> f64 {
    let l = problem.measured.len();
    eps.iter().enumerate().map(|(i, e)| (e * problem.weights[i % l][i / l]).norm_sqr()).sum()
}

/// `eps(k, theta) = Y_m(k, theta) - Y(k)` as an `l x F` matrix.
pub fn residuals(theta: &[f64], problem: &MLProblem) -> Result<DMatrix<Complex64>> {
    let (_, ev) = evaluate(theta, problem)?;
    let eps = residual_flat(problem, &ev.simulated);
    let l = problem.measured.len();
    Ok(DMatrix::from_fn(l, problem.lines.len(), |o, f| eps[f * l + o]))
}

/// `V(theta) = sum_k eps^H W^2 eps`.
pub fn cost_value(theta: &[f64], problem: &MLProblem) -> Result<f64> {
    let (_, ev) = evaluate(theta, problem)?;
    Ok(cost_flat(problem, &residual_flat(problem, &ev.simulated)))
}

/// `V` from an already computed residual matrix.
pub fn cost_from_residuals(eps: &DMatrix<Complex64>, weights: &[Vec<f64>]) -> f64 {
    let mut v = 0.0;
    for f in 0..eps.ncols() {
        for o in 0..eps.nrows() {
            v += (eps[(o, f)] * weights[o][f]).norm_sqr();
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisFunctionSet;
    use crate::signals::{generate_multisine, MultisineSpec};
    use crate::simulator::simulate_greybox;

    pub(crate) fn test_model(e: f64, f: f64) -> GreyBoxModel {
        GreyBoxModel::new(
            DMatrix::from_row_slice(2, 2, &[1.2, -0.5, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.3, 0.2]),
            DMatrix::from_element(1, 1, 0.05),
            DMatrix::from_row_slice(2, 2, &[0.6 * e, -e, 0.1 * e, 0.3 * e]),
            DMatrix::from_row_slice(1, 2, &[f, -0.5 * f]),
            BasisFunctionSet::powers(0, &[2, 3], 1).unwrap(),
            1.0 / 1000.0,
        )
        .unwrap()
    }

    pub(crate) fn self_problem(model: &GreyBoxModel, n: usize, periods: usize) -> MLProblem {
        let spec = MultisineSpec::band(0.0, 300.0, 1000.0, n, 0.5, periods + 2, 4);
        let u = generate_multisine(&spec).unwrap();
        let y = simulate_greybox(model, &u, &[0.0, 0.0]).unwrap();
        let (u, y) = (crate::signals::trim_transient(&u, 2).unwrap(), crate::signals::trim_transient(&y, 2).unwrap());
        let lines: Vec<usize> = (1..n / 2 - 1).collect();
        MLProblem::from_records(u, &y, &lines, model.clone(), 2).unwrap()
    }

    #[test]
    fn truth_has_zero_residual() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let eps = residuals(&problem.initial_theta(), &problem).unwrap();
        let ynorm: f64 = problem.measured()[0].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(eps.norm() / ynorm < 1e-8);
    }

    #[test]
    fn zero_output_model_residual_is_minus_data() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        let d = model.dims();
        let c_start = d.n_states * d.n_states + d.n_states * d.n_extended();
        theta[c_start..].iter_mut().for_each(|v| *v = 0.0);
        let eps = residuals(&theta, &problem).unwrap();
        for (f, y) in problem.measured()[0].iter().enumerate() {
            assert_eq!(eps[(0, f)], -y);
        }
        assert!((cost_value(&theta, &problem).unwrap() - problem.data_energy()).abs() <= 1e-12 * problem.data_energy());
    }

    #[test]
    fn cost_matches_residuals_exactly() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        theta[0] += 1e-3;
        theta[7] -= 2e-3;
        let eps = residuals(&theta, &problem).unwrap();
        assert_eq!(cost_from_residuals(&eps, problem.weights()), cost_value(&theta, &problem).unwrap());
    }

    #[test]
    fn single_line_cost() {
        let eps = DMatrix::from_element(1, 1, Complex64::new(3.0, 4.0));
        assert_eq!(cost_from_residuals(&eps, &[vec![1.0]]), 25.0);
        assert_eq!(cost_from_residuals(&eps, &[vec![2.0]]), 100.0);
    }

    #[test]
    fn drive_continues_cyclically() {
        let u = SignalRecord::single((0..12).map(|v| v as f64).collect(), "u", 1.0, 4).unwrap();
        let d = build_drive(&u, 2);
        assert_eq!(&d[..8], &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
        assert_eq!(&d[8..], u.channel(0));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 128, 2);
        let w = vec![vec![0.0; problem.lines().len()]];
        assert!(problem.with_weights(w).is_err());
        let problem = self_problem(&model, 128, 2);
        let spec = crate::signals::dft_lines(&simulate_greybox(&model, problem.input(), &[0.0, 0.0]).unwrap(), problem.lines(), Averaging::CoherentAverage).unwrap();
        let bad = MLProblem::new(problem.input().clone(), &spec, vec![vec![-1.0; problem.lines().len()]], model, 1);
        assert!(bad.is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn cost_scales_with_weight_squared(c in 0.05f64..20.0, shift in -0.02f64..0.02) {
            let model = test_model(0.05, 0.02);
            let problem = self_problem(&model, 128, 2);
            let mut theta = problem.initial_theta();
            theta[0] += shift;
            let scaled_w: Vec<Vec<f64>> = problem.weights().iter().map(|w| w.iter().map(|v| c * v).collect()).collect();
            let scaled = problem.clone().with_weights(scaled_w).unwrap();
            let (v, vc) = (cost_value(&theta, &problem).unwrap(), cost_value(&theta, &scaled).unwrap());
            proptest::prop_assert!((vc - c * c * v).abs() <= 1e-12 * vc.max(f64::MIN_POSITIVE));
        }
    }
}
