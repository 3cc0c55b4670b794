use std::io::Write;

use greybox::ml::residuals;
use greybox::model::{extended_frf, pack_parameters, GreyBoxModel};
use greybox::signals::{dft_lines, estimate_noise_variance, Averaging};
use greybox::simulator::{periodic_extension, simulate_greybox};

use super::{excited_f_max, first_period, inherited_meta, load_dataset, load_model, ml_problem};
use crate::args::{load_config, required, ExportArgs, ExportKind};
use crate::failure::{Failure, Status};
use crate::provenance::{create, finish, provenance, write_comment_header};

fn io(e: std::io::Error) -> Failure {
    Failure::from(greybox::Error::from(e))
}

pub fn run(args: ExportArgs) -> Result<Status, Failure> {
    let file = load_config(args.config.as_deref(), "export")?;
    let mut a = args.or(file);
    a.kind = Some(a.kind.unwrap_or(ExportKind::Spectra));
    a.settle = Some(a.settle.unwrap_or(2));
    let output = required(&a.output, "output")?;
    let ds = load_dataset(&required(&a.data, "data")?)?;
    let mut models: Vec<(&str, GreyBoxModel)> = Vec::new();
    if let Some(p) = &a.initial {
        models.push(("initial", load_model(p)?.model));
    }
    if let Some(p) = &a.r#final {
        models.push(("final", load_model(p)?.model));
    }
    if models.is_empty() {
        return Err(Failure::Usage("give --initial and/or --final".into()));
    }
    let (u, y) = (ds.inputs()?, ds.outputs()?);
    let (n, fs) = (u.period_length(), u.fs());
    let f_max = a
        .f_max
        .or_else(|| excited_f_max(&ds))
        .ok_or_else(|| Failure::Usage("dataset lists no excited lines; give --f-max".into()))?;
    a.f_max = Some(f_max);
    let last = ((f_max * n as f64 / fs).floor() as usize).min((n - 1) / 2);
    let lines: Vec<usize> = (1..=last).collect();
    if lines.is_empty() {
        return Err(Failure::Usage(format!("no DFT lines in 0..{f_max} Hz")));
    }
    for (tag, m) in &models {
        let d = m.dims();
        if d.n_inputs != u.n_channels() || d.n_outputs != y.n_channels() {
            return Err(Failure::Usage(format!(
                "{tag} model is {}-input {}-output, dataset has {} inputs and {} outputs",
                d.n_inputs,
                d.n_outputs,
                u.n_channels(),
                y.n_channels()
            )));
        }
    }

    let mut meta = provenance("export", &a)?;
    meta.extend(inherited_meta(&ds));
    let mut w = create(&output)?;
    write_comment_header(&mut w, &meta).map_err(io)?;
    let settle = a.settle.unwrap();
    let labels = y.labels().to_vec();
    match a.kind.unwrap() {
        ExportKind::Spectra => {
            let measured = dft_lines(&y, &lines, Averaging::CoherentAverage)?;
            let noise = if y.periods() >= 2 {
                Some(estimate_noise_variance(&dft_lines(&y, &lines, Averaging::PerPeriod)?)?)
            } else {
                None
            };
            let errors = models
                .iter()
                .map(|(_, m)| {
                    let p = ml_problem(&u, &y, &lines, m.clone(), settle)?;
                    Ok(residuals(&pack_parameters(m).values, &p)?)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            write!(w, "frequency_hz").map_err(io)?;
            for l in &labels {
                write!(w, ",measured[{l}]").map_err(io)?;
                for (tag, _) in &models {
                    write!(w, ",{tag}_error[{l}]").map_err(io)?;
                }
                write!(w, ",noise[{l}]").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
            for (f, &k) in lines.iter().enumerate() {
                write!(w, "{:.6}", k as f64 * fs / n as f64).map_err(io)?;
                for o in 0..labels.len() {
                    write!(w, ",{:.9e}", measured.channel(0, o)[f].norm()).map_err(io)?;
                    for e in &errors {
                        write!(w, ",{:.9e}", e[(o, f)].norm()).map_err(io)?;
                    }
                    match &noise {
                        Some(nm) => write!(w, ",{:.9e}", nm.averaged[o][f].sqrt()),
                        None => write!(w, ",nan"),
                    }
                    .map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
        }
        ExportKind::Time => {
            let drive = periodic_extension(&first_period(&u)?, settle + 1)?;
            let sims = models
                .iter()
                .map(|(_, m)| Ok(simulate_greybox(m, &drive, &vec![0.0; m.dims().n_states])?))
                .collect::<Result<Vec<_>, Failure>>()?;
            let p_last = y.periods() - 1;
            write!(w, "time_s").map_err(io)?;
            for l in &labels {
                write!(w, ",measured[{l}]").map_err(io)?;
                for (tag, _) in &models {
                    write!(w, ",{tag}_error[{l}]").map_err(io)?;
                }
            }
            writeln!(w).map_err(io)?;
            for t in 0..n {
                write!(w, "{:.9e}", t as f64 / fs).map_err(io)?;
                for o in 0..labels.len() {
                    let meas = y.period(o, p_last)[t];
                    write!(w, ",{meas:.9e}").map_err(io)?;
                    for s in &sims {
                        write!(w, ",{:.9e}", s.period(o, settle)[t] - meas).map_err(io)?;
                    }
                }
                writeln!(w).map_err(io)?;
            }
        }
        ExportKind::Frf => {
            let frfs = models
                .iter()
                .map(|(_, m)| Ok(extended_frf(m, &lines, n)?))
                .collect::<Result<Vec<_>, Failure>>()?;
            write!(w, "frequency_hz").map_err(io)?;
            for ((tag, m), _) in models.iter().zip(&frfs) {
                let d = m.dims();
                for o in 0..d.n_outputs {
                    for j in 0..d.n_extended() {
                        write!(w, ",{tag}_re[{o},{j}],{tag}_im[{o},{j}]").map_err(io)?;
                    }
                }
            }
            writeln!(w).map_err(io)?;
            for (f, &k) in lines.iter().enumerate() {
                write!(w, "{:.6}", k as f64 * fs / n as f64).map_err(io)?;
                for h in &frfs {
                    for o in 0..h[f].nrows() {
                        for j in 0..h[f].ncols() {
                            write!(w, ",{:.9e},{:.9e}", h[f][(o, j)].re, h[f][(o, j)].im).map_err(io)?;
                        }
                    }
                }
                writeln!(w).map_err(io)?;
            }
        }
    }
    finish(w, &output)?;
    println!("wrote {}", output.display());
    Ok(Status::Done)
}
