mod common;

use common::*;
use greybox::model::{extended_frf, modal_parameters, BasisFunctionSet};
use greybox::signals::{dft_lines, Averaging, SignalRecord};
use greybox::simulator::{simulate_greybox, steady_state_response, virtual_silverbox, SILVERBOX_DAMPING, SILVERBOX_FREQUENCY_HZ};
use greybox::subspace::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn linear_case(n: usize) -> (Spectra, Vec<usize>) {
    let spec = band(n, 1.0, 2, 5);
    let ss = newton_data(&linear_sdof(), &spec, 1, 16, true);
    let lines = spec.excited_lines();
    (spectra(&ss, &BasisFunctionSet::empty(1), lines.clone()), lines)
}

#[test]
fn linear_sdof_recovered_at_order_two() {
    let (data, lines) = linear_case(4096);
    let est = fnsi_identify(&data.ubar, &data.y, 1, &BasisFunctionSet::empty(1), &SubspaceConfig::new(2)).unwrap();
    let mode = modal_parameters(&est).unwrap().modes[0].clone();
    assert!((mode.frequency_hz / SILVERBOX_FREQUENCY_HZ - 1.0).abs() < 1e-3);
    assert!((mode.damping_ratio / SILVERBOX_DAMPING - 1.0).abs() < 1e-3);
    let truth = linear_sdof().discretize(1.0 / FS).unwrap();
    let (h0, h1) = (extended_frf(&truth, &lines, 4096).unwrap(), extended_frf(&est, &lines, 4096).unwrap());
    let worst = h0.iter().zip(&h1).map(|(a, b)| rel(b[(0, 0)], a[(0, 0)])).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn grey_box_generated_data_recovered_exactly() {
    let truth = silverbox_truth();
    let n = 4096;
    // The sampled-data truth holds g over each sample; at the 0.15 level the
    // one-sample delay in the cubic stiffness path destabilises it.
    let ss = steady_state_response(&truth, &band(n, 0.05, 1, 2), 2).unwrap();
    let basis = truth.basis().clone();
    let data = spectra(&ss, &basis, default_lines(n, &basis));
    let est = fnsi_identify(&data.ubar, &data.y, 1, &basis, &SubspaceConfig::new(2)).unwrap();
    let (h0, h1) = (extended_frf(&truth, &data.lines, n).unwrap(), extended_frf(&est, &data.lines, n).unwrap());
    for j in 0..3 {
        let worst = h0.iter().zip(&h1).map(|(a, b)| rel(b[(0, j)], a[(0, j)])).fold(0.0, f64::max);
        assert!(worst < 1e-6, "column {j}: {worst}");
    }
}

#[test]
#[ignore = "continuous-time data cannot match the zero-order-hold discretisation; see notes"]
fn silverbox_150mn_matches_discretized_truth() {
    let n = 8192;
    let sys = virtual_silverbox();
    let ss = newton_data(&sys, &band(n, 0.15, 1, 2), 1, 8, false);
    let basis = sys.output_basis().unwrap();
    let data = spectra(&ss, &basis, default_lines(n, &basis));
    let est = fnsi_identify(&data.ubar, &data.y, 1, &basis, &SubspaceConfig::new(2)).unwrap();
    let truth = silverbox_truth();
    let (h0, h1) = (extended_frf(&truth, &data.lines, n).unwrap(), extended_frf(&est, &data.lines, n).unwrap());
    for j in 0..3 {
        let worst = h0.iter().zip(&h1).map(|(a, b)| rel(b[(0, j)], a[(0, j)])).fold(0.0, f64::max);
        assert!(worst < 1e-3, "column {j}: {worst}");
    }
}

fn reconstruction_rms(basis: &BasisFunctionSet, ss: &greybox::simulator::SteadyState, n: usize) -> f64 {
    let data = spectra(ss, basis, default_lines(n, &BasisFunctionSet::powers(0, &[2, 3], 1).unwrap()));
    let est = fnsi_identify(&data.ubar, &data.y, 1, basis, &SubspaceConfig::new(2)).unwrap();
    let two = greybox::simulator::periodic_extension(&ss.input, 2).unwrap();
    let y = simulate_greybox(&est, &two, &[0.0, 0.0]).unwrap();
    let sim = y.period(0, 1);
    let meas = ss.output.period(0, 0);
    (sim.iter().zip(meas).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt()
}

#[test]
fn omitting_the_basis_is_much_worse() {
    let n = 4096;
    let sys = virtual_silverbox();
    let ss = newton_data(&sys, &band(n, 0.15, 1, 3), 1, 8, false);
    let with = reconstruction_rms(&sys.output_basis().unwrap(), &ss, n);
    let without = reconstruction_rms(&BasisFunctionSet::empty(1), &ss, n);
    assert!(without > 10.0 * with, "with {with} without {without}");
}

#[test]
fn cubic_basis_shows_third_harmonic_energy() {
    let n = 4096;
    let sys = virtual_silverbox();
    let ss = newton_data(&sys, &band(n, 0.15, 1, 3), 1, 8, false);
    let basis = sys.output_basis().unwrap();
    let all: Vec<usize> = (1..n / 2).collect();
    let ubar = build_extended_input_spectra(&ss.input, &ss.output, &basis, &all, Averaging::CoherentAverage).unwrap();
    let g3 = ubar.channel(0, 1);
    let bin = |f: f64| (f * n as f64 / FS).round() as usize - 1;
    let mean = |lo: f64, hi: f64| g3[bin(lo)..bin(hi)].iter().map(|v| v.norm()).sum::<f64>() / (bin(hi) - bin(lo)) as f64;
    // Beyond the 300 Hz excitation band, energy comes only from the cubic mixing.
    let near_third = mean(3.0 * SILVERBOX_FREQUENCY_HZ - 30.0, 3.0 * SILVERBOX_FREQUENCY_HZ + 30.0);
    assert!(near_third > 1e-3 * mean(40.0, 100.0));
    let out_of_band = mean(350.0, 400.0);
    assert!(out_of_band > 0.0 && out_of_band < near_third);
}

#[test]
fn linear_reduction_matches_plain_linear_estimate() {
    let (data, lines) = linear_case(4096);
    let linear = fnsi_identify(&data.ubar, &data.y, 1, &BasisFunctionSet::empty(1), &SubspaceConfig::new(2)).unwrap();
    // Linear data identified with a cubic basis: the nonlinear columns vanish
    // and the physical FRF is unchanged.
    let spec = band(4096, 1.0, 2, 5);
    let ss = newton_data(&linear_sdof(), &spec, 1, 16, true);
    let cubic = BasisFunctionSet::powers(0, &[3], 1).unwrap();
    let d2 = spectra(&ss, &cubic, lines.clone());
    let nl = fnsi_identify(&d2.ubar, &d2.y, 1, &cubic, &SubspaceConfig::new(2)).unwrap();
    let (h0, h1) = (extended_frf(&linear, &lines, 4096).unwrap(), extended_frf(&nl, &lines, 4096).unwrap());
    for (a, b) in h0.iter().zip(&h1) {
        assert!(rel(b[(0, 0)], a[(0, 0)]) < 1e-6);
        assert!(b[(0, 1)].norm() * d2.ubar.channel(0, 1).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-6 * a[(0, 0)].norm());
    }
}

#[test]
fn stabilization_diagram_linear_sdof() {
    let (data, _) = linear_case(4096);
    let orders: Vec<usize> = (2..=10).collect();
    let cfg = SubspaceConfig::new(2).with_block_rows(20);
    let d = stabilization_diagram(&data.ubar, &data.y, 1, &BasisFunctionSet::empty(1), &orders, &cfg, StabilityTolerances::default()).unwrap();
    assert_eq!(d.rows.len(), 9);
    assert!(d.rows[0].poles.iter().any(|p| (p.frequency_hz / SILVERBOX_FREQUENCY_HZ - 1.0).abs() < 1e-3));
    for row in &d.rows[1..] {
        assert!(
            row.poles.iter().any(|p| p.is_stable() && (p.frequency_hz / SILVERBOX_FREQUENCY_HZ - 1.0).abs() < 5e-3),
            "order {}",
            row.order
        );
    }
    assert_eq!(d.stable_run_near(SILVERBOX_FREQUENCY_HZ, 5e-3), 8);
    let mut csv = Vec::new();
    write_diagram_csv(&mut csv, &d).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("order,frequency_hz,damping_ratio"));
    assert!(text.contains("# sv 1 "));
}

#[test]
fn stabilization_diagram_rejects_noise() {
    let n = 2048;
    let spec = band(n, 1.0, 1, 9);
    let u = greybox::signals::generate_multisine(&spec).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let y = SignalRecord::single((0..n).map(|_| normal.sample(&mut rng)).collect(), "y", FS, n).unwrap();
    let lines = spec.excited_lines();
    let ubar = dft_lines(&u, &lines, Averaging::CoherentAverage).unwrap();
    let ys = dft_lines(&y, &lines, Averaging::CoherentAverage).unwrap();
    let orders: Vec<usize> = (2..=10).collect();
    let cfg = SubspaceConfig::new(2).with_block_rows(20);
    let d = stabilization_diagram(&ubar, &ys, 1, &BasisFunctionSet::empty(1), &orders, &cfg, StabilityTolerances::default()).unwrap();
    assert!(d.longest_stable_chain() < 3, "chain {}", d.longest_stable_chain());
}

#[test]
fn single_order_diagram_has_no_flags() {
    let (data, _) = linear_case(2048);
    let d = stabilization_diagram(
        &data.ubar,
        &data.y,
        1,
        &BasisFunctionSet::empty(1),
        &[2],
        &SubspaceConfig::new(2),
        StabilityTolerances::default(),
    )
    .unwrap();
    assert_eq!(d.rows.len(), 1);
    assert!(d.rows[0].poles.iter().all(|p| p.stability.is_none()));
}

#[test]
fn failing_orders_become_gaps() {
    let (data, _) = linear_case(2048);
    let mut silent = data.y.clone();
    silent.values[0][0].iter_mut().for_each(|v| *v = num_complex::Complex64::new(0.0, 0.0));
    let d = stabilization_diagram(
        &data.ubar,
        &silent,
        1,
        &BasisFunctionSet::empty(1),
        &[2, 3, 4],
        &SubspaceConfig::new(2),
        StabilityTolerances::default(),
    )
    .unwrap();
    assert_eq!(d.rows.len(), 3);
    assert!(d.rows.iter().all(|row| row.error.is_some() && row.poles.is_empty()));
}
