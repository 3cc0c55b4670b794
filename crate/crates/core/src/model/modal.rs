use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::GreyBoxModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub frequency_hz: f64,
    pub damping_ratio: f64,
    /// Continuous-time pole with positive imaginary part.
    pub pole: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModalFlag {
    /// Real negative discrete eigenvalue; its logarithm is not a real pole.
    NegativeReal { value: f64 },
    /// Repeated eigenvalue with fewer independent eigenvectors than its multiplicity.
    Defective { eigenvalue: Complex64, multiplicity: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalParameters {
    /// Oscillatory modes sorted by frequency.
    pub modes: Vec<Mode>,
    /// Every continuous-time pole `ln(lambda) / T` that has a consistent
    /// real-system interpretation, conjugates included.
    pub poles: Vec<Complex64>,
    pub flags: Vec<ModalFlag>,
}

impl ModalParameters {
    pub fn natural_frequencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.frequency_hz).collect()
    }

    pub fn damping_ratios(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.damping_ratio).collect()
    }
}

pub fn modal_parameters(model: &GreyBoxModel) -> Result<ModalParameters> {
    modal_from_matrix(model.a(), model.sample_period())
}

pub(crate) fn modal_from_matrix(a: &DMatrix<f64>, sample_period: f64) -> Result<ModalParameters> {
    let n = a.nrows();
    if n == 0 {
        return Ok(ModalParameters { modes: vec![], poles: vec![], flags: vec![] });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Modal("state matrix has non-finite entries".into()));
    }
    let eig: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    let scale = eig.iter().map(|l| l.norm()).fold(0.0_f64, f64::max);
    if eig.iter().any(|l| l.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Modal("zero eigenvalue: logarithmic map undefined".into()));
    }

    let mut modes = Vec::new();
    let mut poles = Vec::new();
    let mut flags = Vec::new();
    for &lam in &eig {
        let oscillatory = lam.im.abs() > 1e-12 * lam.norm();
        if !oscillatory && lam.re < 0.0 {
            flags.push(ModalFlag::NegativeReal { value: lam.re });
            continue;
        }
        let s = if oscillatory {
            lam.ln() / sample_period
        } else {
            Complex64::new(lam.re.ln() / sample_period, 0.0)
        };
        poles.push(s);
        if oscillatory && lam.im > 0.0 {
            let w = s.norm();
            modes.push(Mode { frequency_hz: w / (2.0 * PI), damping_ratio: -s.re / w, pole: s });
        }
    }
    modes.sort_by(|x, y| x.frequency_hz.total_cmp(&y.frequency_hz));
    flags.extend(defective_clusters(a, &eig, scale));
    Ok(ModalParameters { modes, poles, flags })
}

fn defective_clusters(a: &DMatrix<f64>, eig: &[Complex64], scale: f64) -> Vec<ModalFlag> {
    let n = a.nrows();
    let tol = 1e-6 * scale;
    let mut used = vec![false; eig.len()];
    let mut flags = Vec::new();
    for i in 0..eig.len() {
        if used[i] {
            continue;
        }
        let cluster: Vec<usize> =
            (i..eig.len()).filter(|&j| !used[j] && (eig[j] - eig[i]).norm() <= tol).collect();
        for &j in &cluster {
            used[j] = true;
        }
        if cluster.len() < 2 {
            continue;
        }
        let centre = cluster.iter().map(|&j| eig[j]).sum::<Complex64>() / cluster.len() as f64;
        let mut shifted = a.map(|v| Complex64::new(v, 0.0));
        for k in 0..n {
            shifted[(k, k)] -= centre;
        }
        let sv = shifted.singular_values();
        let null_dim = sv.iter().filter(|&&v| v <= 1e-5 * scale.max(1e-300)).count();
        if null_dim < cluster.len() {
            flags.push(ModalFlag::Defective { eigenvalue: centre, multiplicity: cluster.len() });
        }
    }
    flags
}
