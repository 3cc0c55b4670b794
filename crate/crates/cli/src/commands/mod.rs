pub mod convert;
pub mod export;
pub mod identify;
pub mod simulate;

use std::path::Path;

use greybox::ml::MLProblem;
use greybox::model::{read_model, BasisFunctionSet, GreyBoxModel, ModelFile, Monomial};
use greybox::signals::{dft_lines, read_dataset, Averaging, Dataset, SignalRecord};

use crate::failure::Failure;
use crate::provenance::open;

pub fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let ds = read_dataset(open(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if ds.input_channels().is_empty() || ds.output_channels().is_empty() {
        return Err(Failure::Data(format!("{}: needs at least one input and one output channel", path.display())));
    }
    Ok(ds)
}

pub fn load_model(path: &Path) -> Result<ModelFile, Failure> {
    read_model(open(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn parse_basis(specs: &[String], n_outputs: usize) -> Result<BasisFunctionSet, Failure> {
    if specs.len() == 1 && specs[0].trim() == "none" {
        return Ok(BasisFunctionSet::empty(n_outputs));
    }
    if specs.is_empty() {
        return Err(Failure::Usage("empty basis; use --basis none for a linear model".into()));
    }
    let entries = specs.iter().map(|s| s.parse::<Monomial>()).collect::<Result<Vec<_>, _>>()?;
    Ok(BasisFunctionSet::new(entries, n_outputs)?)
}

/// Highest excited frequency listed in the dataset.
pub fn excited_f_max(ds: &Dataset) -> Option<f64> {
    let rec = &ds.record;
    ds.excited_lines.iter().max().map(|&k| k as f64 * rec.fs() / rec.period_length() as f64)
}

pub fn first_period(rec: &SignalRecord) -> Result<SignalRecord, Failure> {
    let data = (0..rec.n_channels()).map(|c| rec.period(c, 0).to_vec()).collect();
    Ok(SignalRecord::new(data, rec.labels().to_vec(), rec.fs(), rec.period_length())?)
}

/// Measured spectra and noise weights come from every period; the model is
/// simulated over a single period after `settle` settling periods, which is
/// exact when the input repeats.
pub fn ml_problem(
    input: &SignalRecord,
    output: &SignalRecord,
    lines: &[usize],
    initial: GreyBoxModel,
    settle: usize,
) -> Result<MLProblem, Failure> {
    let periodic = (1..input.periods()).all(|p| (0..input.n_channels()).all(|c| input.period(c, p) == input.period(c, 0)));
    let full = MLProblem::from_records(input.clone(), output, lines, initial.clone(), settle)?;
    if !periodic {
        return Ok(full);
    }
    let per_period = dft_lines(output, lines, Averaging::PerPeriod)?;
    Ok(MLProblem::new(first_period(input)?, &per_period, full.weights().to_vec(), initial, settle)?)
}

/// Provenance pairs from an input file worth carrying forward.
pub fn inherited_meta(ds: &Dataset) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(seed) = ds.seed {
        out.push(("data.seed".to_string(), seed.to_string()));
    }
    out
}
