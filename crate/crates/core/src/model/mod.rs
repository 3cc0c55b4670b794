//! Grey-box state-space model and the quantities derived from it.
//!
//! The model is the discrete-time recursion
//!
//! ```text
//! x(t+1) = A x(t) + B u(t) + E g(y(t))
//! y(t)   = C x(t) + D u(t) + F g(y(t))
//! ```
//!
//! stored in concatenated form `Bbar = [B E]`, `Dbar = [D F]` acting on the
//! extended input `ubar = [u; g]`.

mod basis;
mod frf;
pub(crate) mod io;
mod modal;
mod params;

pub use basis::{eval_basis, eval_basis_derivative, BasisFunctionSet, Derivative, Factor, Monomial};
pub use frf::{extended_frf, resolvent, xi};
pub(crate) use frf::complexify;
pub use io::{read_model, write_model, ModelFile};
pub use modal::{modal_parameters, ModalFlag, ModalParameters, Mode};
pub(crate) use modal::modal_from_matrix;
pub use params::{pack_parameters, unpack_parameters, Block, ParamSlot, ParameterVector};
pub(crate) use params::{layout, unpack_slice};

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Sizes `(n_s, m, l, s)` shared by every matrix of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelDims {
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_basis: usize,
}

impl ModelDims {
    pub fn n_extended(&self) -> usize {
        self.n_inputs + self.n_basis
    }

    pub fn n_params(&self) -> usize {
        let (n, l, me) = (self.n_states, self.n_outputs, self.n_extended());
        n * n + n * me + l * n + l * me
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreyBoxModel {
    a: DMatrix<f64>,
    bbar: DMatrix<f64>,
    c: DMatrix<f64>,
    dbar: DMatrix<f64>,
    n_inputs: usize,
    basis: BasisFunctionSet,
    sample_period: f64,
}

impl GreyBoxModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        e: DMatrix<f64>,
        f: DMatrix<f64>,
        basis: BasisFunctionSet,
        sample_period: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if b.nrows() != n || e.nrows() != n {
            return Err(Error::Dimension("B and E need n_s rows".into()));
        }
        if d.nrows() != c.nrows() || f.nrows() != c.nrows() {
            return Err(Error::Dimension("C, D and F need l rows".into()));
        }
        if d.ncols() != b.ncols() {
            return Err(Error::Dimension("B and D need m columns".into()));
        }
        if e.ncols() != f.ncols() {
            return Err(Error::Dimension("E and F need s columns".into()));
        }
        let m = b.ncols();
        let bbar = hcat(&b, &e);
        let dbar = hcat(&d, &f);
        Self::from_extended(a, bbar, c, dbar, m, basis, sample_period)
    }

    pub fn from_extended(
        a: DMatrix<f64>,
        bbar: DMatrix<f64>,
        c: DMatrix<f64>,
        dbar: DMatrix<f64>,
        n_inputs: usize,
        basis: BasisFunctionSet,
        sample_period: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        let l = c.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, not square", n, a.ncols())));
        }
        if c.ncols() != n || bbar.nrows() != n {
            return Err(Error::Dimension("C columns and Bbar rows must equal n_s".into()));
        }
        if dbar.nrows() != l {
            return Err(Error::Dimension("Dbar rows must equal l".into()));
        }
        let me = n_inputs + basis.len();
        if bbar.ncols() != me || dbar.ncols() != me {
            return Err(Error::Dimension(format!(
                "Bbar/Dbar have {}/{} columns, expected m + s = {}",
                bbar.ncols(),
                dbar.ncols(),
                me
            )));
        }
        if basis.n_outputs() != l {
            return Err(Error::Dimension(format!(
                "basis is defined over {} outputs, model has {}",
                basis.n_outputs(),
                l
            )));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::InvalidArgument("sample period must be positive".into()));
        }
        Ok(Self { a, bbar, c, dbar, n_inputs, basis, sample_period })
    }

    /// Purely linear model (`s = 0`).
    pub fn linear(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        sample_period: f64,
    ) -> Result<Self> {
        let l = c.nrows();
        let m = b.ncols();
        Self::from_extended(a, b, c, d, m, BasisFunctionSet::empty(l), sample_period)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            n_states: self.a.nrows(),
            n_inputs: self.n_inputs,
            n_outputs: self.c.nrows(),
            n_basis: self.basis.len(),
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn bbar(&self) -> &DMatrix<f64> {
        &self.bbar
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn dbar(&self) -> &DMatrix<f64> {
        &self.dbar
    }
    pub fn b(&self) -> DMatrixView<'_, f64> {
        self.bbar.columns(0, self.n_inputs)
    }
    pub fn e(&self) -> DMatrixView<'_, f64> {
        self.bbar.columns(self.n_inputs, self.basis.len())
    }
    pub fn d(&self) -> DMatrixView<'_, f64> {
        self.dbar.columns(0, self.n_inputs)
    }
    pub fn f(&self) -> DMatrixView<'_, f64> {
        self.dbar.columns(self.n_inputs, self.basis.len())
    }
    pub fn basis(&self) -> &BasisFunctionSet {
        &self.basis
    }
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Applies the state transformation `x' = T x`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("similarity transform not invertible".into()))?;
        Self::from_extended(
            t * &self.a * &t_inv,
            t * &self.bbar,
            &self.c * &t_inv,
            self.dbar.clone(),
            self.n_inputs,
            self.basis.clone(),
            self.sample_period,
        )
    }

    /// Copy of the model with the nonlinear columns of `Bbar`, `Dbar` scaled by `alpha`.
    pub fn scale_nonlinear(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        let (m, s) = (self.n_inputs, self.basis.len());
        out.bbar.columns_mut(m, s).scale_mut(alpha);
        out.dbar.columns_mut(m, s).scale_mut(alpha);
        out
    }

    pub(crate) fn with_matrices(
        &self,
        a: DMatrix<f64>,
        bbar: DMatrix<f64>,
        c: DMatrix<f64>,
        dbar: DMatrix<f64>,
    ) -> Self {
        Self { a, bbar, c, dbar, ..self.clone() }
    }
}

pub(crate) fn hcat(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}
