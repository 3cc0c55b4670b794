//! Discrete-time simulation of grey-box models.

use crate::error::{Error, Result};
use crate::model::GreyBoxModel;
use crate::signals::SignalRecord;

pub(crate) const IMPLICIT_MAX_ITER: usize = 50;
pub(crate) const IMPLICIT_TOL: f64 = 1e-12;
const DIVERGENCE_LIMIT: f64 = 1e100;

/// Row-major copies of the model matrices for the inner loops.
pub(crate) struct Flat {
    pub ns: usize,
    pub m: usize,
    pub l: usize,
    pub s: usize,
    pub a: Vec<f64>,
    pub bbar: Vec<f64>,
    pub c: Vec<f64>,
    pub dbar: Vec<f64>,
    pub has_f: bool,
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl Flat {
    pub fn new(model: &GreyBoxModel) -> Self {
        let d = model.dims();
        let f_block = model.f();
        Self {
            ns: d.n_states,
            m: d.n_inputs,
            l: d.n_outputs,
            s: d.n_basis,
            a: row_major(model.a()),
            bbar: row_major(model.bbar()),
            c: row_major(model.c()),
            dbar: row_major(model.dbar()),
            has_f: f_block.iter().any(|&v| v != 0.0),
        }
    }

    pub fn me(&self) -> usize {
        self.m + self.s
    }
}

/// Time histories of a grey-box simulation, row-major per sample.
#[derive(Debug, Clone)]
pub(crate) struct Trajectory {
    pub x: Vec<f64>,
    pub ubar: Vec<f64>,
    pub y: Vec<f64>,
}

/// `y = C x + D u + F g(y)` by fixed-point iteration seeded with the `F = 0` value.
/// `lin` holds `C x + D u` on entry; `y` and `g` receive the solution.
pub(crate) fn solve_output(
    model: &GreyBoxModel,
    flat: &Flat,
    lin: &[f64],
    y: &mut [f64],
    g: &mut [f64],
    index: usize,
) -> Result<()> {
    let (l, m, s) = (flat.l, flat.m, flat.s);
    let me = m + s;
    y.copy_from_slice(lin);
    model.basis().eval_into(y, g);
    if !flat.has_f {
        return Ok(());
    }
    let mut next = vec![0.0; l];
    for _ in 0..IMPLICIT_MAX_ITER {
        for i in 0..l {
            let mut acc = lin[i];
            for a in 0..s {
                acc += flat.dbar[i * me + m + a] * g[a];
            }
            next[i] = acc;
        }
        let mut diff = 0.0_f64;
        let mut size = 0.0_f64;
        for i in 0..l {
            diff = diff.max((next[i] - y[i]).abs());
            size = size.max(next[i].abs());
        }
        y.copy_from_slice(&next);
        model.basis().eval_into(y, g);
        if !diff.is_finite() {
            break;
        }
        if diff <= IMPLICIT_TOL * size {
            return Ok(());
        }
    }
    Err(Error::ImplicitSolve { index })
}

/// Simulates from `x0` on the sample-major input `u` (length `T * m`).
pub(crate) fn simulate_trajectory(model: &GreyBoxModel, u: &[f64], n_samples: usize, x0: &[f64]) -> Result<Trajectory> {
    if model.basis().any_velocity() {
        return Err(Error::InvalidArgument(
            "grey-box simulation needs displacement-only bases; measure velocity as an output channel".into(),
        ));
    }
    let flat = Flat::new(model);
    let (ns, m, l, s) = (flat.ns, flat.m, flat.l, flat.s);
    let me = flat.me();
    if x0.len() != ns {
        return Err(Error::Dimension(format!("initial state needs {ns} entries, got {}", x0.len())));
    }
    debug_assert_eq!(u.len(), n_samples * m);
    let mut x = vec![0.0; n_samples * ns];
    let mut ubar = vec![0.0; n_samples * me];
    let mut y = vec![0.0; n_samples * l];
    let mut state = x0.to_vec();
    let mut next = vec![0.0; ns];
    let mut lin = vec![0.0; l];
    let mut g = vec![0.0; s];
    for t in 0..n_samples {
        let ut = &u[t * m..(t + 1) * m];
        for i in 0..l {
            let mut acc = 0.0;
            for j in 0..ns {
                acc += flat.c[i * ns + j] * state[j];
            }
            for j in 0..m {
                acc += flat.dbar[i * me + j] * ut[j];
            }
            lin[i] = acc;
        }
        let yt = &mut y[t * l..(t + 1) * l];
        solve_output(model, &flat, &lin, yt, &mut g, t)?;
        let ub = &mut ubar[t * me..(t + 1) * me];
        ub[..m].copy_from_slice(ut);
        ub[m..].copy_from_slice(&g);
        x[t * ns..(t + 1) * ns].copy_from_slice(&state);
        for i in 0..ns {
            let mut acc = 0.0;
            for j in 0..ns {
                acc += flat.a[i * ns + j] * state[j];
            }
            for j in 0..me {
                acc += flat.bbar[i * me + j] * ub[j];
            }
            next[i] = acc;
        }
        std::mem::swap(&mut state, &mut next);
        if yt.iter().chain(state.iter()).any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { index: t });
        }
    }
    Ok(Trajectory { x, ubar, y })
}

pub(crate) fn sample_major(input: &SignalRecord) -> Vec<f64> {
    let (m, n) = (input.n_channels(), input.n_samples());
    let mut u = vec![0.0; n * m];
    for c in 0..m {
        for (t, &v) in input.channel(c).iter().enumerate() {
            u[t * m + c] = v;
        }
    }
    u
}

/// Runs the grey-box recursion on `input` from initial state `x0`, returning `y`.
pub fn simulate_greybox(model: &GreyBoxModel, input: &SignalRecord, x0: &[f64]) -> Result<SignalRecord> {
    let d = model.dims();
    if input.n_channels() != d.n_inputs {
        return Err(Error::Dimension(format!(
            "model has {} inputs, record has {} channels",
            d.n_inputs,
            input.n_channels()
        )));
    }
    let n = input.n_samples();
    let traj = simulate_trajectory(model, &sample_major(input), n, x0)?;
    let l = d.n_outputs;
    let channels = (0..l).map(|i| (0..n).map(|t| traj.y[t * l + i]).collect()).collect();
    let labels = (0..l).map(|i| format!("y{i}")).collect();
    SignalRecord::new(channels, labels, input.fs(), input.period_length())
}

/// Final state after running the recursion over `input`; used to start a new
/// segment where the previous one ended.
pub fn final_state(model: &GreyBoxModel, input: &SignalRecord, x0: &[f64]) -> Result<Vec<f64>> {
    let n = input.n_samples();
    let traj = simulate_trajectory(model, &sample_major(input), n, x0)?;
    let ns = model.dims().n_states;
    let (x, ub) = (&traj.x[(n - 1) * ns..], &traj.ubar[(n - 1) * model.dims().n_extended()..]);
    let a = model.a();
    let b = model.bbar();
    Ok((0..ns)
        .map(|i| (0..ns).map(|j| a[(i, j)] * x[j]).sum::<f64>() + (0..ub.len()).map(|j| b[(i, j)] * ub[j]).sum::<f64>())
        .collect())
}
