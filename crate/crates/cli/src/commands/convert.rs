use greybox::coeff::{convert_coefficients, write_coefficients_csv, ConversionConfig};

use super::{inherited_meta, load_dataset, load_model};
use crate::args::{load_config, parse_range, required, ConvertArgs};
use crate::failure::{Failure, Status};
use crate::provenance::{create, finish, provenance, write_comment_header};

pub fn run(args: ConvertArgs) -> Result<Status, Failure> {
    let file = load_config(args.config.as_deref(), "convert")?;
    let mut a = args.or(file);
    let model = load_model(&required(&a.model, "model")?)?.model;
    let output = required(&a.output, "output")?;
    let ds = a.data.as_deref().map(load_dataset).transpose()?;
    let n = match (&ds, a.period_length) {
        (_, Some(n)) => n,
        (Some(ds), None) => ds.record.period_length(),
        (None, None) => return Err(Failure::Usage("give --data or --period-length".into())),
    };
    let lines = match (&a.lines, &ds) {
        (Some(s), _) => parse_range(s, "--lines")?,
        (None, Some(ds)) => ds.excited_lines.clone(),
        (None, None) => return Err(Failure::Usage("give --lines or a dataset with excited lines".into())),
    };
    if lines.is_empty() {
        return Err(Failure::Usage("empty line set".into()));
    }
    let dataset_gain = ds
        .as_ref()
        .and_then(|d| d.meta.iter().find(|(k, _)| k == "force_per_input_unit"))
        .and_then(|(_, v)| v.parse::<f64>().ok());
    a.force_per_input_unit = Some(a.force_per_input_unit.or(dataset_gain).unwrap_or(1.0));
    a.force_input = Some(a.force_input.unwrap_or(0));
    a.nl_output = Some(a.nl_output.unwrap_or(0));
    let cfg = ConversionConfig::new(a.force_input.unwrap(), a.nl_output.unwrap())
        .with_force_per_input_unit(a.force_per_input_unit.unwrap());
    let est = convert_coefficients(&model, &lines, n, &cfg)?;

    let mut meta = provenance("convert", &a)?;
    if let Some(ds) = &ds {
        meta.extend(inherited_meta(ds));
    }
    let mut w = create(&output)?;
    write_comment_header(&mut w, &meta).map_err(greybox::Error::from)?;
    write_coefficients_csv(&mut w, &est)?;
    finish(w, &output)?;
    for e in &est {
        let s = e.summary()?;
        println!("{}: mean real {:.6}, log10(real/imag) {:.3}", e.label, s.mean_real, s.log10_ratio);
    }
    if let Some(first) = est.first() {
        if !first.excluded_lines.is_empty() {
            println!("excluded {} lines where the force FRF vanishes", first.excluded_lines.len());
        }
    }
    println!("wrote {}", output.display());
    Ok(Status::Done)
}
