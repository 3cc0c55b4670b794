//! Monomial basis functions of measured outputs and their first derivatives.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Whether a factor reads a displacement-like output or its time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Derivative {
    Displacement,
    Velocity,
}

impl Derivative {
    pub fn order(self) -> u8 {
        match self {
            Derivative::Displacement => 0,
            Derivative::Velocity => 1,
        }
    }

    pub fn from_order(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Derivative::Displacement),
            1 => Ok(Derivative::Velocity),
            o => Err(Error::InvalidArgument(format!(
                "derivative order must be 0 or 1, got {o}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Factor {
    pub channel: usize,
    pub derivative: Derivative,
    pub exponent: u32,
}

impl Factor {
    pub fn displacement(channel: usize, exponent: u32) -> Self {
        Self { channel, derivative: Derivative::Displacement, exponent }
    }

    pub fn velocity(channel: usize, exponent: u32) -> Self {
        Self { channel, derivative: Derivative::Velocity, exponent }
    }
}

/// Product of powers of output channels, e.g. `y0^2 * ydot0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    factors: Vec<Factor>,
}

impl Monomial {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("monomial without factors".into()));
        }
        if let Some(f) = factors.iter().find(|f| f.exponent == 0) {
            return Err(Error::InvalidArgument(format!(
                "zero exponent on channel {}",
                f.channel
            )));
        }
        Ok(Self { factors })
    }

    /// `y[channel]^exponent`.
    pub fn power(channel: usize, exponent: u32) -> Self {
        Self { factors: vec![Factor::displacement(channel, exponent.max(1))] }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    pub fn uses_velocity(&self) -> bool {
        self.factors.iter().any(|f| f.derivative == Derivative::Velocity)
    }

    fn factor_value(f: &Factor, y: &[f64], y_dot: Option<&[f64]>) -> Result<f64> {
        let src = match f.derivative {
            Derivative::Displacement => y,
            Derivative::Velocity => y_dot.ok_or(Error::MissingVelocity)?,
        };
        src.get(f.channel)
            .copied()
            .ok_or(Error::ChannelOutOfRange { index: f.channel, len: src.len() })
    }

    /// Evaluation without bounds or presence checks; `y_dot` may be empty
    /// when no factor reads it.
    pub(crate) fn eval_unchecked(&self, y: &[f64], y_dot: &[f64]) -> f64 {
        let mut acc = 1.0;
        for f in &self.factors {
            let v = match f.derivative {
                Derivative::Displacement => y[f.channel],
                Derivative::Velocity => y_dot[f.channel],
            };
            acc *= v.powi(f.exponent as i32);
        }
        acc
    }

    pub fn eval(&self, y: &[f64], y_dot: Option<&[f64]>) -> Result<f64> {
        let mut acc = 1.0;
        for f in &self.factors {
            acc *= Self::factor_value(f, y, y_dot)?.powi(f.exponent as i32);
        }
        Ok(acc)
    }

    /// Partial derivative with respect to `y[channel]` (or `y_dot[channel]`).
    pub fn partial(
        &self,
        channel: usize,
        wrt: Derivative,
        y: &[f64],
        y_dot: Option<&[f64]>,
    ) -> Result<f64> {
        let values = self
            .factors
            .iter()
            .map(|f| Self::factor_value(f, y, y_dot))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for (i, f) in self.factors.iter().enumerate() {
            if f.channel != channel || f.derivative != wrt {
                continue;
            }
            let mut term = f.exponent as f64 * values[i].powi(f.exponent as i32 - 1);
            for (j, g) in self.factors.iter().enumerate() {
                if j != i {
                    term *= values[j].powi(g.exponent as i32);
                }
            }
            total += term;
        }
        Ok(total)
    }
}

impl fmt::Display for Monomial {
    /// Space-free `channel:order:exponent` triples joined by commas.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fac) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}:{}", fac.channel, fac.derivative.order(), fac.exponent)?;
        }
        Ok(())
    }
}

impl FromStr for Monomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad monomial descriptor '{s}'"));
        let mut factors = Vec::new();
        for triple in s.split(',') {
            let parts: Vec<&str> = triple.trim().split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let channel = parts[0].parse().map_err(|_| bad())?;
            let order: u8 = parts[1].parse().map_err(|_| bad())?;
            let exponent = parts[2].parse().map_err(|_| bad())?;
            factors.push(Factor { channel, derivative: Derivative::from_order(order)?, exponent });
        }
        Monomial::new(factors)
    }
}

/// The vector `g(y_nl, ydot_nl)` of nonlinear basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunctionSet {
    entries: Vec<Monomial>,
    n_outputs: usize,
}

impl BasisFunctionSet {
    pub fn new(entries: Vec<Monomial>, n_outputs: usize) -> Result<Self> {
        for (a, e) in entries.iter().enumerate() {
            if e.degree() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "basis entry {a} has degree {} (< 2 belongs to the linear part)",
                    e.degree()
                )));
            }
            if let Some(f) = e.factors.iter().find(|f| f.channel >= n_outputs) {
                return Err(Error::ChannelOutOfRange { index: f.channel, len: n_outputs });
            }
        }
        Ok(Self { entries, n_outputs })
    }

    pub fn empty(n_outputs: usize) -> Self {
        Self { entries: Vec::new(), n_outputs }
    }

    /// Pure powers `y[channel]^e` for each listed exponent.
    pub fn powers(channel: usize, exponents: &[u32], n_outputs: usize) -> Result<Self> {
        Self::new(exponents.iter().map(|&e| Monomial::power(channel, e)).collect(), n_outputs)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    /// Sorted output channels that appear in any entry.
    pub fn nl_output_channels(&self) -> Vec<usize> {
        let mut ch: Vec<usize> =
            self.entries.iter().flat_map(|e| e.factors.iter().map(|f| f.channel)).collect();
        ch.sort_unstable();
        ch.dedup();
        ch
    }

    pub fn uses_velocity(&self) -> Vec<bool> {
        self.entries.iter().map(Monomial::uses_velocity).collect()
    }

    pub fn any_velocity(&self) -> bool {
        self.entries.iter().any(Monomial::uses_velocity)
    }

    fn check_args(&self, y: &[f64], y_dot: Option<&[f64]>) -> Result<()> {
        if y.len() != self.n_outputs {
            return Err(Error::Dimension(format!(
                "output sample has {} entries, basis expects {}",
                y.len(),
                self.n_outputs
            )));
        }
        if self.any_velocity() && y_dot.is_none() {
            return Err(Error::MissingVelocity);
        }
        Ok(())
    }

    /// Evaluates `g(t)` for one output sample.
    pub fn eval(&self, y: &[f64], y_dot: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_args(y, y_dot)?;
        self.entries.iter().map(|e| e.eval(y, y_dot)).collect()
    }

    /// Writes `g(t)` into `out` without allocating. Only displacement bases.
    pub(crate) fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            let mut acc = 1.0;
            for f in &e.factors {
                acc *= y[f.channel].powi(f.exponent as i32);
            }
            *o = acc;
        }
    }

    /// `s x l` matrix of partial derivatives `dg_a / dy_j`.
    pub fn eval_derivative(&self, y: &[f64], y_dot: Option<&[f64]>) -> Result<DMatrix<f64>> {
        self.check_args(y, y_dot)?;
        let mut out = DMatrix::zeros(self.len(), self.n_outputs);
        for (a, e) in self.entries.iter().enumerate() {
            for j in 0..self.n_outputs {
                out[(a, j)] = e.partial(j, Derivative::Displacement, y, y_dot)?;
            }
        }
        Ok(out)
    }

    /// Same as [`eval_derivative`](Self::eval_derivative), row-major into `out` (s*l).
    pub(crate) fn eval_derivative_into(&self, y: &[f64], out: &mut [f64]) {
        let l = self.n_outputs;
        for (a, e) in self.entries.iter().enumerate() {
            for j in 0..l {
                let mut total = 0.0;
                for (i, f) in e.factors.iter().enumerate() {
                    if f.channel != j {
                        continue;
                    }
                    let mut term = f.exponent as f64 * y[j].powi(f.exponent as i32 - 1);
                    for (k, g) in e.factors.iter().enumerate() {
                        if k != i {
                            term *= y[g.channel].powi(g.exponent as i32);
                        }
                    }
                    total += term;
                }
                out[a * l + j] = total;
            }
        }
    }
}

/// Evaluates the basis on one sample. Thin wrapper over [`BasisFunctionSet::eval`].
pub fn eval_basis(basis: &BasisFunctionSet, y: &[f64], y_dot: Option<&[f64]>) -> Result<Vec<f64>> {
    basis.eval(y, y_dot)
}

pub fn eval_basis_derivative(
    basis: &BasisFunctionSet,
    y: &[f64],
    y_dot: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    basis.eval_derivative(y, y_dot)
}
