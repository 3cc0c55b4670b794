use std::path::{Path, PathBuf};

use greybox::ml::{levenberg_marquardt, write_trace_csv, LMConfig, LMTrace};
use greybox::model::{modal_parameters, write_model, GreyBoxModel};
use greybox::signals::{dft_lines, estimate_noise_variance, Averaging};
use greybox::subspace::{
    build_extended_input_spectra, default_processed_lines, fnsi_identify, stabilization_diagram, write_diagram_csv,
    StabilityTolerances, SubspaceConfig, Weighting,
};

use super::{excited_f_max, inherited_meta, load_dataset, load_model, ml_problem, parse_basis};
use crate::args::{load_config, parse_range, required, IdentifyArgs, Method};
use crate::failure::{Failure, Status};
use crate::provenance::{create, finish, provenance, write_comment_header};

fn resolve(a: IdentifyArgs) -> IdentifyArgs {
    IdentifyArgs {
        method: Some(a.method.unwrap_or(Method::Subspace)),
        order: Some(a.order.unwrap_or(2)),
        noise_weighting: Some(a.noise_weighting.unwrap_or(false)),
        diagram: Some(a.diagram.unwrap_or(false)),
        optimize: Some(a.optimize.unwrap_or(false)),
        max_iterations: Some(a.max_iterations.unwrap_or(LMConfig::default().max_iterations)),
        settle: Some(a.settle.unwrap_or(2)),
        ..a
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn save_model(path: &Path, model: &GreyBoxModel, meta: &[(String, String)]) -> Result<(), Failure> {
    let mut w = create(path)?;
    write_model(&mut w, model, meta)?;
    finish(w, path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_modes(tag: &str, model: &GreyBoxModel) {
    match modal_parameters(model) {
        Ok(m) => {
            for mode in &m.modes {
                println!("{tag}: mode {:.4} Hz, damping {:.4}%", mode.frequency_hz, 100.0 * mode.damping_ratio);
            }
        }
        Err(e) => println!("{tag}: modal analysis failed: {e}"),
    }
}

pub fn run(args: IdentifyArgs) -> Result<Status, Failure> {
    let file = load_config(args.config.as_deref(), "identify")?;
    let a = resolve(args.or(file));
    let data_path = required(&a.data, "data")?;
    let prefix = required(&a.output, "output")?;
    let basis_spec = required(&a.basis, "basis")?;
    let ds = load_dataset(&data_path)?;
    let (u, y) = (ds.inputs()?, ds.outputs()?);
    let basis = parse_basis(&basis_spec, y.n_channels())?;
    let (n, fs) = (u.period_length(), u.fs());
    let lines = match &a.lines {
        Some(s) => parse_range(s, "--lines")?,
        None => {
            let f_max = a.f_max.or_else(|| excited_f_max(&ds)).ok_or_else(|| {
                Failure::Usage("dataset lists no excited lines; give --f-max or --lines".into())
            })?;
            default_processed_lines(f_max, fs, n, &basis)
        }
    };
    if lines.is_empty() {
        return Err(Failure::Usage("no processed lines".into()));
    }
    let mut meta = provenance("identify", &a)?;
    meta.extend(inherited_meta(&ds));

    let initial = match a.method.unwrap() {
        Method::Ml => {
            let init = required(&a.init, "init")?;
            load_model(&init)?.model
        }
        Method::Subspace => {
            let ubar = build_extended_input_spectra(&u, &y, &basis, &lines, Averaging::CoherentAverage)?;
            let ys = dft_lines(&y, &lines, Averaging::CoherentAverage)?;
            let mut cfg = SubspaceConfig::new(a.order.unwrap());
            if let Some(r) = a.block_rows {
                cfg = cfg.with_block_rows(r);
            }
            if a.noise_weighting.unwrap() {
                if y.periods() < 2 {
                    return Err(Failure::Usage("--noise-weighting needs at least two periods".into()));
                }
                let noise = estimate_noise_variance(&dft_lines(&y, &lines, Averaging::PerPeriod)?)?;
                cfg = cfg.with_weighting(Weighting::NoiseVariance(noise.averaged));
            }
            if let Some(orders) = &a.orders {
                let orders = parse_range(orders, "--orders")?;
                let diagram = stabilization_diagram(
                    &ubar,
                    &ys,
                    u.n_channels(),
                    &basis,
                    &orders,
                    &cfg,
                    StabilityTolerances::default(),
                )?;
                let chain = diagram.longest_stable_chain();
                println!("stabilisation diagram: orders {}..{}, longest stable chain {chain}", orders[0], orders[orders.len() - 1]);
                if a.diagram.unwrap() {
                    let path = with_suffix(&prefix, ".diagram.csv");
                    let mut w = create(&path)?;
                    write_comment_header(&mut w, &meta).map_err(greybox::Error::from)?;
                    write_diagram_csv(&mut w, &diagram)?;
                    finish(w, &path)?;
                    println!("wrote {}", path.display());
                }
            } else if a.diagram.unwrap() {
                return Err(Failure::Usage("--diagram needs --orders".into()));
            }
            let model = fnsi_identify(&ubar, &ys, u.n_channels(), &basis, &cfg)?;
            print_modes("subspace", &model);
            save_model(&with_suffix(&prefix, ".initial.model"), &model, &meta)?;
            model
        }
    };
    if initial.basis() != &basis {
        return Err(Failure::Usage("--basis differs from the starting model's basis".into()));
    }

    if a.method == Some(Method::Ml) || a.optimize.unwrap() {
        let problem = ml_problem(&u, &y, &lines, initial, a.settle.unwrap())?;
        let cfg = LMConfig { max_iterations: a.max_iterations.unwrap(), ..LMConfig::default() };
        let (model, trace) = levenberg_marquardt(&problem, &cfg)?;
        report_trace(&trace);
        print_modes("ml", &model);
        let mut final_meta = meta.clone();
        final_meta.push(("ml.initial_cost".into(), format!("{:.9e}", trace.initial_cost)));
        final_meta.push(("ml.final_cost".into(), format!("{:.9e}", trace.final_cost)));
        final_meta.push(("ml.termination".into(), format!("{:?}", trace.termination)));
        save_model(&with_suffix(&prefix, ".final.model"), &model, &final_meta)?;
        let path = with_suffix(&prefix, ".trace.csv");
        let mut w = create(&path)?;
        write_comment_header(&mut w, &meta).map_err(greybox::Error::from)?;
        write_trace_csv(&mut w, &trace)?;
        finish(w, &path)?;
        println!("wrote {}", path.display());
        if !trace.converged {
            eprintln!("warning: optimiser stopped after {} iterations without converging", trace.iterations.len());
            return Ok(Status::NotConverged);
        }
    }
    Ok(Status::Done)
}

fn report_trace(trace: &LMTrace) {
    let accepted = trace.iterations.iter().filter(|i| i.accepted).count();
    println!(
        "ml: cost {:.6e} -> {:.6e} (ratio {:.4}), {} iterations ({accepted} accepted), {:?}",
        trace.initial_cost,
        trace.final_cost,
        trace.final_cost / trace.initial_cost,
        trace.iterations.len(),
        trace.termination
    );
}
