use nalgebra::DMatrix;

use super::{GreyBoxModel, ModelDims};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    A,
    Bbar,
    C,
    Dbar,
}

/// Owner of one entry of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamSlot {
    pub block: Block,
    pub row: usize,
    pub col: usize,
}

/// Flat parameter vector: column-stacked `A`, then `Bbar`, `C`, `Dbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    dims: ModelDims,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, dims: ModelDims) -> Result<Self> {
        if values.len() != dims.n_params() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, dims need {}",
                values.len(),
                dims.n_params()
            )));
        }
        Ok(Self { values, dims })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> Vec<ParamSlot> {
        layout(&self.dims)
    }
}

fn block_shapes(d: &ModelDims) -> [(Block, usize, usize); 4] {
    let me = d.n_extended();
    [
        (Block::A, d.n_states, d.n_states),
        (Block::Bbar, d.n_states, me),
        (Block::C, d.n_outputs, d.n_states),
        (Block::Dbar, d.n_outputs, me),
    ]
}

pub(crate) fn layout(d: &ModelDims) -> Vec<ParamSlot> {
    let mut out = Vec::with_capacity(d.n_params());
    for (block, rows, cols) in block_shapes(d) {
        for col in 0..cols {
            for row in 0..rows {
                out.push(ParamSlot { block, row, col });
            }
        }
    }
    out
}

pub fn pack_parameters(model: &GreyBoxModel) -> ParameterVector {
    let mut values = Vec::with_capacity(model.dims().n_params());
    for m in [model.a(), model.bbar(), model.c(), model.dbar()] {
        // nalgebra storage is column-major, so this is exactly vec().
        values.extend_from_slice(m.as_slice());
    }
    ParameterVector { values, dims: model.dims() }
}

/// Rebuilds a model from `theta`, taking basis and sample period from `template`.
pub fn unpack_parameters(theta: &ParameterVector, template: &GreyBoxModel) -> Result<GreyBoxModel> {
    unpack_slice(&theta.values, template)
}

pub(crate) fn unpack_slice(values: &[f64], template: &GreyBoxModel) -> Result<GreyBoxModel> {
    let d = template.dims();
    if values.len() != d.n_params() {
        return Err(Error::Dimension(format!(
            "parameter vector has {} entries, model needs {}",
            values.len(),
            d.n_params()
        )));
    }
    let mut offset = 0;
    let mut mats = Vec::with_capacity(4);
    for (_, rows, cols) in block_shapes(&d) {
        mats.push(DMatrix::from_column_slice(rows, cols, &values[offset..offset + rows * cols]));
        offset += rows * cols;
    }
    let dbar = mats.pop().unwrap();
    let c = mats.pop().unwrap();
    let bbar = mats.pop().unwrap();
    let a = mats.pop().unwrap();
    Ok(template.with_matrices(a, bbar, c, dbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisFunctionSet;
    use proptest::prelude::*;

    fn template(n: usize, m: usize, l: usize, s: usize) -> GreyBoxModel {
        let exps: Vec<u32> = (2..2 + s as u32).collect();
        let basis = BasisFunctionSet::powers(0, &exps, l).unwrap();
        GreyBoxModel::from_extended(
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, m + s),
            DMatrix::zeros(l, n),
            DMatrix::zeros(l, m + s),
            m,
            basis,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn silverbox_parameter_count() {
        let t = template(2, 1, 1, 2);
        assert_eq!(pack_parameters(&t).len(), 15);
    }

    #[test]
    fn identity_a_marks_diagonal_slots() {
        let t = template(2, 1, 1, 2);
        let model = t.with_matrices(
            DMatrix::identity(2, 2),
            t.bbar().clone(),
            t.c().clone(),
            t.dbar().clone(),
        );
        let theta = pack_parameters(&model);
        let ones: Vec<usize> =
            theta.values.iter().enumerate().filter(|(_, v)| **v == 1.0).map(|(i, _)| i).collect();
        assert_eq!(ones, vec![0, 3]);
        let lay = theta.layout();
        assert_eq!(lay[3], ParamSlot { block: Block::A, row: 1, col: 1 });
        assert_eq!(lay[4], ParamSlot { block: Block::Bbar, row: 0, col: 0 });
        assert_eq!(lay[5], ParamSlot { block: Block::Bbar, row: 1, col: 0 });
        assert_eq!(lay[10], ParamSlot { block: Block::C, row: 0, col: 0 });
        assert_eq!(lay[14], ParamSlot { block: Block::Dbar, row: 0, col: 2 });
    }

    #[test]
    fn length_mismatch() {
        let t = template(2, 1, 1, 2);
        assert!(ParameterVector::new(vec![0.0; 14], t.dims()).is_err());
        assert!(unpack_slice(&[0.0; 16], &t).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(
            n in 1usize..5, m in 1usize..3, l in 1usize..3, s in 0usize..3,
            seed in proptest::collection::vec(-10.0f64..10.0, 200),
        ) {
            let t = template(n, m, l, s);
            let np = t.dims().n_params();
            let theta = ParameterVector::new(seed[..np].to_vec(), t.dims()).unwrap();
            let model = unpack_parameters(&theta, &t).unwrap();
            let again = pack_parameters(&model);
            prop_assert_eq!(&again.values, &theta.values);
            prop_assert_eq!(unpack_parameters(&again, &t).unwrap(), model);
        }
    }
}
