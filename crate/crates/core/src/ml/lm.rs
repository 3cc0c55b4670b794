//! Levenberg-Marquardt on the real-stacked weighted residual
//! `r = [Re(W eps); Im(W eps)]`, with Marquardt's diagonal scaling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::jacobian::jacobian_from;
use super::{cost_flat, evaluate, residual_flat, MLProblem};
use crate::error::{Error, Result};
use crate::model::GreyBoxModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMConfig {
    pub max_iterations: usize,
    /// Damping relative to the mean diagonal of the scaled normal matrix.
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Stop once this many consecutive accepted steps each reduce `V` by less
    /// than `cost_tolerance` relative.
    pub cost_tolerance: f64,
    pub cost_window: usize,
    pub step_tolerance: f64,
    pub max_damping: f64,
    /// Stop when `V <= cost_floor * sum |W Y|^2`.
    pub cost_floor: f64,
}

impl Default for LMConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.3,
            cost_tolerance: 1e-9,
            cost_window: 3,
            step_tolerance: 1e-12,
            max_damping: 1e16,
            cost_floor: 1e-20,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_damping,
            self.damping_up,
            self.damping_down,
            self.cost_tolerance,
            self.step_tolerance,
            self.max_damping,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.cost_floor < 0.0 {
            return Err(Error::InvalidArgument("LM tolerances and factors must be positive".into()));
        }
        if !(self.damping_up > 1.0 && self.damping_down < 1.0) {
            return Err(Error::InvalidArgument("need damping_up > 1 > damping_down".into()));
        }
        if self.cost_window == 0 {
            return Err(Error::InvalidArgument("cost_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMIteration {
    pub iteration: usize,
    /// Cost of the trial point (infinite when its simulation failed).
    pub cost: f64,
    pub damping: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostFloor,
    CostTolerance,
    StepTolerance,
    /// No decrease found up to the damping cap.
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LMTrace {
    pub iterations: Vec<LMIteration>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    pub converged: bool,
}

impl LMTrace {
    /// Costs after each accepted step, preceded by the initial cost.
    pub fn accepted_costs(&self) -> Vec<f64> {
        std::iter::once(self.initial_cost)
            .chain(self.iterations.iter().filter(|i| i.accepted).map(|i| i.cost))
            .collect()
    }
}

fn stack_residual(problem: &MLProblem, eps: &[Complex64]) -> DVector<f64> {
    let l = problem.measured().len();
    let n = eps.len();
    let mut r = DVector::zeros(2 * n);
    for (i, e) in eps.iter().enumerate() {
        let w = problem.weights()[i % l][i / l];
        r[i] = e.re * w;
        r[n + i] = e.im * w;
    }
    r
}

fn stack_jacobian(problem: &MLProblem, jac: &DMatrix<Complex64>) -> DMatrix<f64> {
    let l = problem.measured().len();
    let n = jac.nrows();
    let mut out = DMatrix::zeros(2 * n, jac.ncols());
    for p in 0..jac.ncols() {
        for i in 0..n {
            let w = problem.weights()[i % l][i / l];
            out[(i, p)] = jac[(i, p)].re * w;
            out[(n + i, p)] = jac[(i, p)].im * w;
        }
    }
    out
}

/// Column-scaled SVD of the stacked Jacobian, reused for every damping value.
struct ScaledSystem {
    scale: Vec<f64>,
    u_t_r: DVector<f64>,
    sigma: DVector<f64>,
    v_t: DMatrix<f64>,
}

impl ScaledSystem {
    fn new(mut j: DMatrix<f64>, r: &DVector<f64>) -> Result<Self> {
        let scale: Vec<f64> = j
            .column_iter()
            .map(|c| {
                let n = c.norm();
                if n > 0.0 { n } else { 1.0 }
            })
            .collect();
        for (p, s) in scale.iter().enumerate() {
            j.column_mut(p).scale_mut(1.0 / s);
        }
        let svd = j.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Singular("Jacobian SVD".into()))?;
        let v_t = svd.v_t.ok_or_else(|| Error::Singular("Jacobian SVD".into()))?;
        Ok(Self { scale, u_t_r: u.transpose() * r, sigma: svd.singular_values, v_t })
    }

    /// Minimiser of `|J d + r|^2 + lambda |D d|^2` in unscaled coordinates.
    fn step(&self, lambda: f64) -> Vec<f64> {
        let smax = self.sigma.max();
        let mut ds = DVector::zeros(self.v_t.ncols());
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            if s <= 1e-14 * smax {
                continue;
            }
            let coef = -s / (s * s + lambda) * self.u_t_r[i];
            ds += self.v_t.row(i).transpose() * coef;
        }
        ds.iter().zip(&self.scale).map(|(d, s)| d / s).collect()
    }
}

/// `dV/dtheta = 2 Re(J^H W^2 eps)`.
pub fn cost_gradient(theta: &[f64], problem: &MLProblem) -> Result<Vec<f64>> {
    let (model, ev) = evaluate(theta, problem)?;
    let eps = residual_flat(problem, &ev.simulated);
    let jac = stack_jacobian(problem, &jacobian_from(&model, &ev.trajectory, problem)?);
    let r = stack_residual(problem, &eps);
    Ok((jac.transpose() * r * 2.0).iter().copied().collect())
}

/// Undamped Gauss-Newton step at `theta` (pseudo-inverse solution).
pub fn gauss_newton_step(theta: &[f64], problem: &MLProblem) -> Result<Vec<f64>> {
    let (model, ev) = evaluate(theta, problem)?;
    let eps = residual_flat(problem, &ev.simulated);
    let jac = jacobian_from(&model, &ev.trajectory, problem)?;
    let sys = ScaledSystem::new(stack_jacobian(problem, &jac), &stack_residual(problem, &eps))?;
    Ok(sys.step(0.0))
}

/// Minimises the weighted cost from the problem's initial model.
///
/// Returns the best model found and the trace; `trace.converged` is false
/// only when the iteration budget ran out.
pub fn levenberg_marquardt(problem: &MLProblem, cfg: &LMConfig) -> Result<(GreyBoxModel, LMTrace)> {
    cfg.validate()?;
    let mut theta = problem.initial_theta();
    let (mut model, mut ev) = evaluate(&theta, problem)?;
    let mut eps = residual_flat(problem, &ev.simulated);
    let mut cost = cost_flat(problem, &eps);
    let floor = cfg.cost_floor * problem.data_energy();
    let initial_cost = cost;
    let mut iterations = Vec::new();
    let mut lambda = cfg.initial_damping;
    let mut small_decreases = 0;
    let mut system: Option<ScaledSystem> = None;

    let finish = |model, iterations, cost, termination| {
        let trace = LMTrace {
            iterations,
            initial_cost,
            final_cost: cost,
            termination,
            converged: termination != Termination::MaxIterations,
        };
        Ok((model, trace))
    };

    if cost <= floor {
        return finish(model, iterations, cost, Termination::CostFloor);
    }
    for iteration in 0..cfg.max_iterations {
        if system.is_none() {
            let jac = jacobian_from(&model, &ev.trajectory, problem)?;
            system = Some(ScaledSystem::new(stack_jacobian(problem, &jac), &stack_residual(problem, &eps))?);
        }
        let step = system.as_ref().unwrap().step(lambda);
        let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, d)| t + d).collect();
        let outcome = evaluate(&trial, problem).map(|(m, e)| {
            let r = residual_flat(problem, &e.simulated);
            let c = cost_flat(problem, &r);
            (m, e, r, c)
        });
        let trial_cost = outcome.as_ref().map_or(f64::INFINITY, |o| o.3);
        let accepted = trial_cost < cost;
        iterations.push(LMIteration { iteration, cost: trial_cost, damping: lambda, step_norm, accepted });
        if accepted {
            let (m, e, r, c) = outcome.unwrap();
            let rel = (cost - c) / cost;
            let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            theta = trial;
            model = m;
            ev = e;
            eps = r;
            cost = c;
            system = None;
            lambda *= cfg.damping_down;
            if cost <= floor {
                return finish(model, iterations, cost, Termination::CostFloor);
            }
            small_decreases = if rel < cfg.cost_tolerance { small_decreases + 1 } else { 0 };
            if small_decreases >= cfg.cost_window {
                return finish(model, iterations, cost, Termination::CostTolerance);
            }
            if step_norm <= cfg.step_tolerance * (theta_norm + cfg.step_tolerance) {
                return finish(model, iterations, cost, Termination::StepTolerance);
            }
        } else {
            lambda *= cfg.damping_up;
            if lambda > cfg.max_damping {
                return finish(model, iterations, cost, Termination::Stationary);
            }
        }
    }
    finish(model, iterations, cost, Termination::MaxIterations)
}

/// CSV `iteration,cost,damping,step_norm,accepted`.
pub fn write_trace_csv(w: &mut impl Write, trace: &LMTrace) -> Result<()> {
    writeln!(w, "iteration,cost,damping,step_norm,accepted")?;
    for it in &trace.iterations {
        writeln!(
            w,
            "{},{:.12e},{:.6e},{:.6e},{}",
            it.iteration, it.cost, it.damping, it.step_norm, it.accepted as u8
        )?;
    }
    writeln!(w, "# initial_cost {:.12e}", trace.initial_cost)?;
    writeln!(w, "# final_cost {:.12e}", trace.final_cost)?;
    writeln!(w, "# termination {:?}", trace.termination)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::{self_problem, test_model};
    use super::super::cost_value;
    use super::*;

    #[test]
    fn start_at_truth_stops_immediately() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let (m, trace) = levenberg_marquardt(&problem, &LMConfig::default()).unwrap();
        assert!(trace.iterations.len() <= 2);
        assert!((trace.final_cost - trace.initial_cost).abs() <= 1e-12 * trace.initial_cost.max(f64::MIN_POSITIVE));
        assert_eq!(m, model);
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        theta[0] += 0.01;
        let start = problem.model_from(&theta).unwrap();
        let problem = problem.with_initial(start.clone()).unwrap();
        let cfg = LMConfig { max_iterations: 0, ..LMConfig::default() };
        let (m, trace) = levenberg_marquardt(&problem, &cfg).unwrap();
        assert_eq!(m, start);
        assert!(trace.iterations.is_empty());
        assert!(!trace.converged);
    }

    #[test]
    fn recovers_perturbed_model() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        for (i, v) in theta.iter_mut().enumerate() {
            *v *= 1.0 + 0.01 * ((i % 5) as f64 - 2.0);
        }
        let problem = problem.with_initial(self_problem(&model, 256, 2).model_from(&theta).unwrap()).unwrap();
        let (m, trace) = levenberg_marquardt(&problem, &LMConfig::default()).unwrap();
        let costs = trace.accepted_costs();
        assert!(costs.windows(2).all(|w| w[1] < w[0]));
        assert!(trace.final_cost < 1e-12 * trace.initial_cost, "{trace:?}");
        assert!(cost_value(&crate::model::pack_parameters(&m).values, &problem).unwrap() == trace.final_cost);
    }

    #[test]
    fn gauss_newton_direction_invariant_to_weight_scale() {
        let model = test_model(0.05, 0.02);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        theta[2] += 0.003;
        let base = gauss_newton_step(&theta, &problem).unwrap();
        let w3: Vec<Vec<f64>> = problem.weights().iter().map(|w| w.iter().map(|v| 3.0 * v).collect()).collect();
        let scaled = problem.clone().with_weights(w3).unwrap();
        let other = gauss_newton_step(&theta, &scaled).unwrap();
        let norm = base.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = base.iter().zip(&other).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * norm);
        assert!((cost_value(&theta, &scaled).unwrap() / cost_value(&theta, &problem).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_cost_differences() {
        let model = test_model(0.08, 0.05);
        let problem = self_problem(&model, 256, 2);
        let mut theta = problem.initial_theta();
        theta[0] += 0.004;
        theta[7] -= 0.01;
        let grad = cost_gradient(&theta, &problem).unwrap();
        let gmax = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for p in 0..theta.len() {
            let h = 1e-6 * (1.0 + theta[p].abs());
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[p] += h;
            tm[p] -= h;
            let fd = (cost_value(&tp, &problem).unwrap() - cost_value(&tm, &problem).unwrap()) / (2.0 * h);
            assert!((fd - grad[p]).abs() <= 1e-4 * gmax, "param {p}: {fd} vs {}", grad[p]);
        }
    }

    #[test]
    fn trace_csv_lists_every_trial() {
        let trace = LMTrace {
            iterations: vec![
                LMIteration { iteration: 0, cost: 2.0, damping: 1e-3, step_norm: 0.5, accepted: true },
                LMIteration { iteration: 1, cost: 3.0, damping: 3e-4, step_norm: 0.1, accepted: false },
            ],
            initial_cost: 4.0,
            final_cost: 2.0,
            termination: Termination::MaxIterations,
            converged: false,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
        assert!(text.contains("1,3.000000000000e0,3.000000e-4,1.000000e-1,0"));
    }
}
