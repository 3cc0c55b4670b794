#![allow(dead_code)]

use greybox::model::{BasisFunctionSet, GreyBoxModel};
use greybox::signals::{dft_lines, Averaging, MultisineSpec, SpectrumRecord};
use greybox::simulator::*;
use greybox::subspace::{build_extended_input_spectra, default_processed_lines};

pub const FS: f64 = 2441.0;
pub const F_MAX: f64 = 300.0;

pub fn linear_sdof() -> MechanicalSystemSpec {
    sdof(SILVERBOX_FREQUENCY_HZ, SILVERBOX_DAMPING, 1.0, vec![]).unwrap()
}

pub fn band(n: usize, rms: f64, periods: usize, seed: u64) -> MultisineSpec {
    MultisineSpec::band(0.0, F_MAX, FS, n, rms, periods, seed)
}

/// Steady-state Newton response; ZOH input when `hold` is set.
pub fn newton_data(sys: &MechanicalSystemSpec, spec: &MultisineSpec, settle: usize, os: usize, hold: bool) -> SteadyState {
    let interpolation = if hold { InputInterpolation::ZeroOrderHold } else { InputInterpolation::Trigonometric };
    let newton = Newton { system: sys, config: IntegratorConfig { oversampling: os, interpolation } };
    steady_state_response(&newton, spec, settle).unwrap()
}

pub struct Spectra {
    pub lines: Vec<usize>,
    pub ubar: SpectrumRecord,
    pub y: SpectrumRecord,
}

pub fn spectra(ss: &SteadyState, basis: &BasisFunctionSet, lines: Vec<usize>) -> Spectra {
    let ubar = build_extended_input_spectra(&ss.input, &ss.output, basis, &lines, Averaging::CoherentAverage).unwrap();
    let y = dft_lines(&ss.output, &lines, Averaging::CoherentAverage).unwrap();
    Spectra { lines, ubar, y }
}

pub fn default_lines(n: usize, basis: &BasisFunctionSet) -> Vec<usize> {
    default_processed_lines(F_MAX, FS, n, basis)
}

pub fn rel(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn silverbox_truth() -> GreyBoxModel {
    virtual_silverbox().discretize(1.0 / FS).unwrap()
}

pub const N_SILVERBOX: usize = 8192;

/// Virtual Silverbox steady state: `periods` kept after two settling periods,
/// optional white output noise at `snr_db`.
pub fn silverbox_dataset(rms: f64, periods: usize, seed: u64, snr_db: Option<f64>) -> (MultisineSpec, SteadyState) {
    let spec = band(N_SILVERBOX, rms, periods, seed);
    let mut ss = newton_data(&virtual_silverbox(), &spec, 2, 8, false);
    if let Some(snr) = snr_db {
        ss.output = greybox::signals::add_white_noise(&ss.output, &[0], snr, seed + 1000).unwrap();
    }
    (spec, ss)
}

/// Order-2 subspace estimate on the default processed lines.
pub fn silverbox_subspace(ss: &SteadyState) -> (GreyBoxModel, Vec<usize>) {
    let basis = virtual_silverbox().output_basis().unwrap();
    let lines = default_lines(ss.input.period_length(), &basis);
    let data = spectra(ss, &basis, lines.clone());
    let est = greybox::subspace::fnsi_identify(&data.ubar, &data.y, 1, &basis, &greybox::subspace::SubspaceConfig::new(2)).unwrap();
    (est, lines)
}

/// First period only; the model response to a periodic input is periodic.
pub fn first_period(rec: &greybox::signals::SignalRecord) -> greybox::signals::SignalRecord {
    let n = rec.period_length();
    let data = (0..rec.n_channels()).map(|c| rec.period(c, 0).to_vec()).collect();
    greybox::signals::SignalRecord::new(data, rec.labels().to_vec(), rec.fs(), n).unwrap()
}

/// ML problem on `lines`: measured spectra and noise weights from all
/// periods, model simulated over one period after two settling periods.
pub fn ml_problem(ss: &SteadyState, lines: &[usize], initial: GreyBoxModel) -> greybox::ml::MLProblem {
    let full = greybox::ml::MLProblem::from_records(ss.input.clone(), &ss.output, lines, initial.clone(), 2).unwrap();
    let per_period = dft_lines(&ss.output, lines, Averaging::PerPeriod).unwrap();
    greybox::ml::MLProblem::new(first_period(&ss.input), &per_period, full.weights().to_vec(), initial, 2).unwrap()
}
