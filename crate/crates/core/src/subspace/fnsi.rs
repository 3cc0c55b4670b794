use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{complexify, resolvent, xi, BasisFunctionSet, GreyBoxModel};
use crate::signals::SpectrumRecord;

/// How the projected output matrix is weighted before the SVD.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weighting {
    #[default]
    None,
    /// Variances of the averaged output spectra, indexed `[output][line]`.
    NoiseVariance(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceConfig {
    pub order: usize,
    pub block_rows: usize,
    pub weighting: Weighting,
}

impl SubspaceConfig {
    /// `block_rows` defaults to `max(3 * order, 12)`.
    pub fn new(order: usize) -> Self {
        Self { order, block_rows: (3 * order).max(12), weighting: Weighting::None }
    }

    pub fn with_block_rows(mut self, r: usize) -> Self {
        self.block_rows = r;
        self
    }

    pub fn with_weighting(mut self, w: Weighting) -> Self {
        self.weighting = w;
        self
    }
}

/// Relative singular-value floor below which the requested order is treated
/// as unsupported by the data.
const RANK_FLOOR: f64 = 1e-18;

/// Input-free part of the block data equation, shared by all orders.
pub(crate) struct Projection {
    /// Weighting factor `L_c` (lower triangular) or identity.
    chol: Option<DMatrix<f64>>,
    u_left: DMatrix<f64>,
    sigma: Vec<f64>,
    l: usize,
}

fn averaged(spec: &SpectrumRecord) -> SpectrumRecord {
    if spec.n_periods() == 1 { spec.clone() } else { spec.averaged() }
}

fn check_inputs(ubar: &SpectrumRecord, y: &SpectrumRecord) -> Result<()> {
    if ubar.lines != y.lines || ubar.period_length != y.period_length {
        return Err(Error::Dimension("extended-input and output spectra use different lines".into()));
    }
    if ubar.n_lines() == 0 {
        return Err(Error::InvalidArgument("no processed lines".into()));
    }
    Ok(())
}

/// Per-channel RMS over lines, with 1 for all-zero channels.
fn channel_scales(spec: &SpectrumRecord) -> Vec<f64> {
    (0..spec.n_channels())
        .map(|c| {
            let ch = spec.channel(0, c);
            let ms = ch.iter().map(|v| v.norm_sqr()).sum::<f64>() / ch.len() as f64;
            if ms > 0.0 { ms.sqrt() } else { 1.0 }
        })
        .collect()
}

impl Projection {
    pub(crate) fn new(ubar: &SpectrumRecord, y: &SpectrumRecord, r: usize, weighting: &Weighting) -> Result<Self> {
        check_inputs(ubar, y)?;
        let (ubar, y) = (averaged(ubar), averaged(y));
        let l = y.n_channels();
        let n = ubar.period_length;
        let nf = ubar.n_lines();
        let scales = channel_scales(&ubar);
        let active: Vec<usize> = (0..ubar.n_channels())
            .filter(|&c| ubar.channel(0, c).iter().any(|v| v.norm() > 0.0))
            .collect();
        let me = active.len();
        let (ru, ry) = (r * me, r * l);
        let rows = ru + ry;
        if 2 * nf < rows {
            return Err(Error::RankDeficient(format!(
                "{nf} lines cannot support {r} block rows with {} channels",
                me + l
            )));
        }
        // Rows of the real block matrix [U; Y]; columns are Re then Im over lines.
        let mut mt = DMatrix::<f64>::zeros(2 * nf, rows);
        for (f, &k) in ubar.lines.iter().enumerate() {
            for i in 0..r {
                let zi = Complex64::from_polar(1.0, 2.0 * PI * (k * i % n) as f64 / n as f64);
                for (jj, &c) in active.iter().enumerate() {
                    let v = zi * ubar.values[0][c][f] / scales[c];
                    mt[(f, i * me + jj)] = v.re;
                    mt[(nf + f, i * me + jj)] = v.im;
                }
                for o in 0..l {
                    let v = zi * y.values[0][o][f];
                    mt[(f, ru + i * l + o)] = v.re;
                    mt[(nf + f, ru + i * l + o)] = v.im;
                }
            }
        }
        let rmat = mt.qr().r();
        let l22 = rmat.view((ru, ru), (ry, ry)).transpose();
        let (chol, target) = match weighting {
            Weighting::None => (None, l22),
            Weighting::NoiseVariance(var) => {
                if var.len() != l || var.iter().any(|v| v.len() != nf) {
                    return Err(Error::Dimension("noise variance must be [output][line]".into()));
                }
                let mut cov = DMatrix::<f64>::zeros(ry, ry);
                for (f, &k) in ubar.lines.iter().enumerate() {
                    for i in 0..r {
                        for j in 0..r {
                            let d = (k * i.abs_diff(j)) % n;
                            let c = (2.0 * PI * d as f64 / n as f64).cos();
                            for o in 0..l {
                                cov[(i * l + o, j * l + o)] += c * var[o][f];
                            }
                        }
                    }
                }
                let lc = Cholesky::new(cov)
                    .ok_or_else(|| Error::Singular("noise covariance is not positive definite".into()))?
                    .l();
                let w = lc
                    .solve_lower_triangular(&l22)
                    .ok_or_else(|| Error::Singular("noise covariance factor".into()))?;
                (Some(lc), w)
            }
        };
        let svd = target.svd(true, false);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u_full = svd.u.expect("left vectors requested");
        let u_left = DMatrix::from_fn(ry, order.len(), |i, j| u_full[(i, order[j])]);
        let sigma = order.iter().map(|&j| svd.singular_values[j]).collect();
        Ok(Self { chol, u_left, sigma, l })
    }

    pub(crate) fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    /// `(A, C)` of the requested order from the observability estimate.
    pub(crate) fn realize(&self, order: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let l = self.l;
        let ry = self.u_left.nrows();
        if order == 0 || order + l > ry {
            return Err(Error::InvalidArgument(format!(
                "order {order} needs more than {} block-row outputs",
                order + l
            )));
        }
        let s0 = self.sigma[0];
        if !(self.sigma[order - 1] > RANK_FLOOR * s0) {
            return Err(Error::RankDeficient(format!("data support fewer than {order} states")));
        }
        let un = self.u_left.columns(0, order).clone_owned();
        let obs = match &self.chol {
            Some(lc) => lc * un,
            None => un,
        };
        let up = obs.rows(0, ry - l).clone_owned();
        let down = obs.rows(l, ry - l).clone_owned();
        let svd = up.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= 1e-12 * smax {
            return Err(Error::Singular("shift-invariance equation".into()));
        }
        let a = svd.solve(&down, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
        let c = obs.rows(0, l).clone_owned();
        Ok((a, c))
    }
}

/// Singular values of the projected (and weighted) block output matrix.
pub fn singular_values(ubar: &SpectrumRecord, y: &SpectrumRecord, block_rows: usize, weighting: &Weighting) -> Result<Vec<f64>> {
    Ok(Projection::new(ubar, y, block_rows, weighting)?.singular_values().to_vec())
}

/// Linear least squares for `(Bbar, Dbar)` over all lines, given `(A, C)`.
pub(crate) fn solve_bd(
    ubar: &SpectrumRecord,
    y: &SpectrumRecord,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    weighting: &Weighting,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (ubar, y) = (averaged(ubar), averaged(y));
    let (ns, l, me) = (a.nrows(), c.nrows(), ubar.n_channels());
    let nf = ubar.n_lines();
    let scales = channel_scales(&ubar);
    let np = ns * me + l * me;
    let mut lhs = DMatrix::<f64>::zeros(2 * l * nf, np);
    let mut rhs = DMatrix::<f64>::zeros(2 * l * nf, 1);
    let at = a.transpose();
    let ct = complexify(&c.transpose());
    for (f, &k) in ubar.lines.iter().enumerate() {
        // (C (zI - A)^-1)^T = (zI - A^T)^-1 C^T
        let cr = resolvent(&at, xi(k, ubar.period_length), &ct, k)?;
        for o in 0..l {
            let w = match weighting {
                Weighting::None => 1.0,
                Weighting::NoiseVariance(v) => 1.0 / v[o][f].max(f64::MIN_POSITIVE).sqrt(),
            };
            let (re, im) = (2 * (f * l + o), 2 * (f * l + o) + 1);
            for j in 0..me {
                let uj = ubar.values[0][j][f] / scales[j];
                for i in 0..ns {
                    let v = cr[(i, o)] * uj * w;
                    lhs[(re, j * ns + i)] = v.re;
                    lhs[(im, j * ns + i)] = v.im;
                }
                let v = uj * w;
                lhs[(re, ns * me + j * l + o)] = v.re;
                lhs[(im, ns * me + j * l + o)] = v.im;
            }
            let yv = y.values[0][o][f] * w;
            rhs[(re, 0)] = yv.re;
            rhs[(im, 0)] = yv.im;
        }
    }
    let col_norms: Vec<f64> = (0..np)
        .map(|j| {
            let n = lhs.column(j).norm();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    for (j, s) in col_norms.iter().enumerate() {
        lhs.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = lhs.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let theta = svd.solve(&rhs, eps).map_err(|e| Error::Singular(e.to_string()))?;
    let mut bbar = DMatrix::zeros(ns, me);
    let mut dbar = DMatrix::zeros(l, me);
    for j in 0..me {
        for i in 0..ns {
            let idx = j * ns + i;
            bbar[(i, j)] = theta[idx] / col_norms[idx] / scales[j];
        }
        for o in 0..l {
            let idx = ns * me + j * l + o;
            dbar[(o, j)] = theta[idx] / col_norms[idx] / scales[j];
        }
    }
    Ok((bbar, dbar))
}

/// Frequency-domain subspace estimate of `(A, Bbar, C, Dbar)` from the
/// extended-input spectra (`m + s` channels, inputs first) and output spectra.
pub fn fnsi_identify(
    ubar: &SpectrumRecord,
    y: &SpectrumRecord,
    n_inputs: usize,
    basis: &BasisFunctionSet,
    cfg: &SubspaceConfig,
) -> Result<GreyBoxModel> {
    check_inputs(ubar, y)?;
    if ubar.n_channels() != n_inputs + basis.len() {
        return Err(Error::Dimension(format!(
            "extended input has {} channels, expected m + s = {}",
            ubar.n_channels(),
            n_inputs + basis.len()
        )));
    }
    if cfg.block_rows * y.n_channels() <= cfg.order {
        return Err(Error::InvalidArgument("block_rows * l must exceed the order".into()));
    }
    let proj = Projection::new(ubar, y, cfg.block_rows, &cfg.weighting)?;
    identify_with(&proj, ubar, y, n_inputs, basis, cfg.order, &cfg.weighting)
}

pub(crate) fn identify_with(
    proj: &Projection,
    ubar: &SpectrumRecord,
    y: &SpectrumRecord,
    n_inputs: usize,
    basis: &BasisFunctionSet,
    order: usize,
    weighting: &Weighting,
) -> Result<GreyBoxModel> {
    let (a, c) = proj.realize(order)?;
    let (bbar, dbar) = solve_bd(ubar, y, &a, &c, weighting)?;
    GreyBoxModel::from_extended(a, bbar, c, dbar, n_inputs, basis.clone(), 1.0 / ubar.fs)
}
