//! Exact sensitivities `dy(t)/dtheta_p` by forward recursion along the base
//! trajectory, transformed like the simulated output.
//!
//! With `G(t) = [0; dg/dy]` and `M(t) = I - Dbar G(t)`, each parameter obeys
//!
//! ```text
//! y*(t)   = M(t)^-1 (C x*(t) + r_y(t))
//! x*(t+1) = A x*(t) + Bbar G(t) y*(t) + r_x(t)
//! ```
//!
//! where the forcing is `e_i x_j` (A_ij in r_x, C_ij in r_y) or `e_i ubar_j`
//! (Bbar_ij in r_x, Dbar_ij in r_y).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{evaluate, kept_spectrum, MLProblem};
use crate::error::{Error, Result};
use crate::model::{layout, Block, GreyBoxModel};
use crate::simulator::{Flat, Trajectory};

/// Complex `(l F) x n_theta` Jacobian of the residuals, row `f * l + o`.
pub fn jacobian(theta: &[f64], problem: &MLProblem) -> Result<DMatrix<Complex64>> {
    let (model, ev) = evaluate(theta, problem)?;
    jacobian_from(&model, &ev.trajectory, problem)
}

/// Per-sample `dg/dy` (row-major `s x l`) and `M^-1` (row-major `l x l`, or
/// empty when `F = 0`).
struct Linearization {
    dg: Vec<f64>,
    minv: Vec<f64>,
}

fn linearize(model: &GreyBoxModel, flat: &Flat, traj: &Trajectory, n_samples: usize) -> Result<Linearization> {
    let (l, m, s) = (flat.l, flat.m, flat.s);
    let me = flat.me();
    let mut dg = vec![0.0; n_samples * s * l];
    for t in 0..n_samples {
        model.basis().eval_derivative_into(&traj.y[t * l..(t + 1) * l], &mut dg[t * s * l..(t + 1) * s * l]);
    }
    let mut minv = Vec::new();
    if flat.has_f {
        minv.reserve(n_samples * l * l);
        for t in 0..n_samples {
            let g = &dg[t * s * l..(t + 1) * s * l];
            let mat = DMatrix::from_fn(l, l, |i, j| {
                let fg: f64 = (0..s).map(|a| flat.dbar[i * me + m + a] * g[a * l + j]).sum();
                if i == j { 1.0 - fg } else { -fg }
            });
            let inv = mat.try_inverse().ok_or(Error::ImplicitSolve { index: t })?;
            for i in 0..l {
                for j in 0..l {
                    minv.push(inv[(i, j)]);
                }
            }
        }
    }
    Ok(Linearization { dg, minv })
}

pub(crate) fn jacobian_from(model: &GreyBoxModel, traj: &Trajectory, problem: &MLProblem) -> Result<DMatrix<Complex64>> {
    let flat = Flat::new(model);
    let (ns, l, m, s) = (flat.ns, flat.l, flat.m, flat.s);
    let me = flat.me();
    let n_samples = problem.total_samples();
    let lin = linearize(model, &flat, traj, n_samples)?;
    let slots = layout(&model.dims());
    let nf = problem.lines().len();
    let columns: Vec<Vec<Complex64>> = slots
        .par_iter()
        .map_init(FftPlanner::new, |planner, slot| {
            let mut xs = vec![0.0; ns];
            let mut next = vec![0.0; ns];
            let mut v = vec![0.0; l];
            let mut ys = vec![0.0; l];
            let mut us = vec![0.0; s];
            let mut sens = vec![0.0; n_samples * l];
            for t in 0..n_samples {
                let x = &traj.x[t * ns..(t + 1) * ns];
                let ub = &traj.ubar[t * me..(t + 1) * me];
                for i in 0..l {
                    v[i] = (0..ns).map(|j| flat.c[i * ns + j] * xs[j]).sum();
                }
                match slot.block {
                    Block::C => v[slot.row] += x[slot.col],
                    Block::Dbar => v[slot.row] += ub[slot.col],
                    _ => {}
                }
                if flat.has_f {
                    let mi = &lin.minv[t * l * l..(t + 1) * l * l];
                    for i in 0..l {
                        ys[i] = (0..l).map(|j| mi[i * l + j] * v[j]).sum();
                    }
                } else {
                    ys.copy_from_slice(&v);
                }
                sens[t * l..(t + 1) * l].copy_from_slice(&ys);
                let g = &lin.dg[t * s * l..(t + 1) * s * l];
                for a in 0..s {
                    us[a] = (0..l).map(|j| g[a * l + j] * ys[j]).sum();
                }
                for i in 0..ns {
                    let mut acc = 0.0;
                    for j in 0..ns {
                        acc += flat.a[i * ns + j] * xs[j];
                    }
                    for a in 0..s {
                        acc += flat.bbar[i * me + m + a] * us[a];
                    }
                    next[i] = acc;
                }
                match slot.block {
                    Block::A => next[slot.row] += x[slot.col],
                    Block::Bbar => next[slot.row] += ub[slot.col],
                    _ => {}
                }
                std::mem::swap(&mut xs, &mut next);
            }
            kept_spectrum(
                &sens,
                l,
                problem.kept_start(),
                problem.input().period_length(),
                problem.input().periods(),
                problem.lines(),
                planner,
            )
        })
        .collect();
    let mut jac = DMatrix::zeros(nf * l, slots.len());
    for (p, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            jac[(r, p)] = *v;
        }
    }
    if jac.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Divergence { index: n_samples });
    }
    Ok(jac)
}
