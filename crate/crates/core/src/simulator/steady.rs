//! Steady-state periodic responses: simulate settling periods, keep the rest.

use crate::error::{Error, Result};
use crate::model::GreyBoxModel;
use crate::signals::{generate_multisine, trim_transient, MultisineSpec, SignalRecord};

use super::greybox::simulate_greybox;
use super::mechanical::{simulate_newton, IntegratorConfig, MechanicalSystemSpec};

/// Anything that maps an input record to an output record from rest.
pub trait Simulate {
    fn n_inputs(&self) -> usize;
    fn simulate(&self, input: &SignalRecord) -> Result<SignalRecord>;
}

impl Simulate for GreyBoxModel {
    fn n_inputs(&self) -> usize {
        self.dims().n_inputs
    }
    fn simulate(&self, input: &SignalRecord) -> Result<SignalRecord> {
        simulate_greybox(self, input, &vec![0.0; self.dims().n_states])
    }
}

/// A mechanical system paired with its integrator settings.
#[derive(Debug, Clone)]
pub struct Newton<'a> {
    pub system: &'a MechanicalSystemSpec,
    pub config: IntegratorConfig,
}

impl Simulate for Newton<'_> {
    fn n_inputs(&self) -> usize {
        self.system.n_inputs()
    }
    fn simulate(&self, input: &SignalRecord) -> Result<SignalRecord> {
        simulate_newton(self.system, input, &self.config)
    }
}

pub const DEFAULT_SETTLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Retained input periods.
    pub input: SignalRecord,
    /// Retained output periods.
    pub output: SignalRecord,
    /// Largest relative RMS difference between the compared periods.
    pub settle_mismatch: f64,
    pub settled: bool,
}

/// Repeats the first period of `rec` cyclically to `periods` periods.
pub fn periodic_extension(rec: &SignalRecord, periods: usize) -> Result<SignalRecord> {
    let channels = (0..rec.n_channels())
        .map(|c| rec.period(c, 0).repeat(periods))
        .collect();
    SignalRecord::new(channels, rec.labels().to_vec(), rec.fs(), rec.period_length())
}

/// Relative RMS size of `a - b` against `b`, maximised over channels.
fn period_mismatch(rec: &SignalRecord, pa: usize, pb: usize) -> f64 {
    (0..rec.n_channels())
        .map(|c| {
            let (a, b) = (rec.period(c, pa), rec.period(c, pb));
            let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            let size: f64 = b.iter().map(|y| y * y).sum();
            if size == 0.0 {
                if diff == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                (diff / size).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// Simulates `settle` extra periods in front of the periodic `input` (which is
/// cycled from its first period) and returns only the `input.periods()` kept ones.
///
/// Settling is judged by comparing the last discarded period with the first
/// kept one, or the first two kept periods when nothing is discarded.
pub fn steady_state_from_input(
    sim: &impl Simulate,
    input: &SignalRecord,
    settle: usize,
    tolerance: f64,
) -> Result<SteadyState> {
    if input.n_channels() != sim.n_inputs() {
        return Err(Error::Dimension(format!(
            "simulator has {} inputs, record has {} channels",
            sim.n_inputs(),
            input.n_channels()
        )));
    }
    let keep = input.periods();
    let full_input = periodic_extension(input, settle + keep)?;
    let full = sim.simulate(&full_input)?;
    let settle_mismatch = match (settle, keep) {
        (0, 1) => f64::INFINITY,
        (0, _) => period_mismatch(&full, 1, 0),
        _ => period_mismatch(&full, settle, settle - 1),
    };
    Ok(SteadyState {
        input: trim_transient(&full_input, settle)?,
        output: trim_transient(&full, settle)?,
        settle_mismatch,
        settled: settle_mismatch <= tolerance,
    })
}

/// Generates the multisine of `spec` and returns its steady-state response
/// with `spec.periods` retained periods.
pub fn steady_state_response(sim: &impl Simulate, spec: &MultisineSpec, settle: usize) -> Result<SteadyState> {
    if sim.n_inputs() != 1 {
        return Err(Error::Dimension("multisine drive needs a single-input system".into()));
    }
    let input = generate_multisine(spec)?;
    steady_state_from_input(sim, &input, settle, DEFAULT_SETTLE_TOLERANCE)
}
