use greybox::signals::{add_white_noise, write_dataset, ChannelRole, DataFormat, Dataset, MultisineSpec, SignalRecord};
use greybox::simulator::{
    read_system, steady_state_response, virtual_silverbox, InputInterpolation, IntegratorConfig, Newton, OutputKind,
    SILVERBOX_INPUT_GAIN,
};

use crate::args::{load_config, required, Format, Interpolation, SimulateArgs};
use crate::failure::{Failure, Status};
use crate::provenance::{create, finish, open, provenance};

fn resolve(a: SimulateArgs) -> SimulateArgs {
    SimulateArgs {
        rms: Some(a.rms.unwrap_or(0.15)),
        fs: Some(a.fs.unwrap_or(2441.0)),
        period_length: Some(a.period_length.unwrap_or(8192)),
        periods: Some(a.periods.unwrap_or(25)),
        settle: Some(a.settle.unwrap_or(2)),
        f_min: Some(a.f_min.unwrap_or(0.0)),
        f_max: Some(a.f_max.unwrap_or(300.0)),
        seed: Some(a.seed.unwrap_or(42)),
        oversampling: Some(a.oversampling.unwrap_or(8)),
        interpolation: Some(a.interpolation.unwrap_or(Interpolation::Trigonometric)),
        format: Some(a.format.unwrap_or(Format::Text)),
        ..a
    }
}

pub fn run(args: SimulateArgs) -> Result<Status, Failure> {
    let file = load_config(args.config.as_deref(), "simulate")?;
    let a = resolve(args.or(file));
    let output = required(&a.output, "output")?;
    let (system, force_gain) = match &a.system {
        Some(p) => {
            let sys = read_system(open(p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?.system;
            (sys, None)
        }
        None => (virtual_silverbox(), Some(SILVERBOX_INPUT_GAIN)),
    };
    if system.n_inputs() != 1 {
        return Err(Failure::Usage(format!("multisine synthesis drives one input, system has {}", system.n_inputs())));
    }
    let (n, fs, seed) = (a.period_length.unwrap(), a.fs.unwrap(), a.seed.unwrap());
    let spec = MultisineSpec::band(a.f_min.unwrap(), a.f_max.unwrap(), fs, n, a.rms.unwrap(), a.periods.unwrap(), seed);
    let interpolation = match a.interpolation.unwrap() {
        Interpolation::Trigonometric => InputInterpolation::Trigonometric,
        Interpolation::ZeroOrderHold => InputInterpolation::ZeroOrderHold,
    };
    let oversampling = a.oversampling.unwrap();
    if oversampling == 0 {
        return Err(Failure::Usage("--oversampling must be at least 1".into()));
    }
    let newton = Newton { system: &system, config: IntegratorConfig { oversampling, interpolation } };
    let ss = steady_state_response(&newton, &spec, a.settle.unwrap())?;
    if !ss.settled {
        eprintln!("warning: response not settled (period mismatch {:.2e}); increase --settle", ss.settle_mismatch);
    }
    let mut out = ss.output;
    if let Some(snr) = a.snr_db {
        let all: Vec<usize> = (0..out.n_channels()).collect();
        out = add_white_noise(&out, &all, snr, seed.wrapping_add(1))?;
    }

    let mut data = vec![ss.input.channel(0).to_vec()];
    let mut labels = vec!["u".to_string()];
    let mut units = vec!["-".to_string()];
    let mut roles = vec![ChannelRole::Input];
    for (c, o) in system.outputs().iter().enumerate() {
        data.push(out.channel(c).to_vec());
        labels.push(out.labels()[c].clone());
        units.push(match o.kind {
            OutputKind::Displacement => "m".into(),
            OutputKind::Velocity => "m/s".into(),
        });
        roles.push(ChannelRole::Output);
    }
    let record = SignalRecord::new(data, labels, fs, n)?;
    let mut meta = provenance("simulate", &a)?;
    meta.push(("settle_mismatch".into(), format!("{:.3e}", ss.settle_mismatch)));
    if let Some(g) = force_gain {
        meta.push(("force_per_input_unit".into(), format!("{g:e}")));
    }
    let ds = Dataset { record, units, roles, excited_lines: spec.excited_lines(), seed: Some(seed), meta };
    let format = match a.format.unwrap() {
        Format::Text => DataFormat::Text,
        Format::Binary => DataFormat::Binary,
    };
    let mut w = create(&output)?;
    write_dataset(&mut w, &ds, format)?;
    finish(w, &output)?;
    println!(
        "wrote {}: {} periods of {} samples at {} Hz, {} excited lines, seed {seed}",
        output.display(),
        ds.record.periods(),
        n,
        fs,
        ds.excited_lines.len()
    );
    Ok(Status::Done)
}
