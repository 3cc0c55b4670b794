use std::io::Write;

use rayon::prelude::*;

use super::fnsi::{identify_with, Projection, SubspaceConfig};
use crate::error::{Error, Result};
use crate::model::{modal_from_matrix, BasisFunctionSet};
use crate::signals::SpectrumRecord;

/// Relative changes against the previous order below which a pole counts as stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityTolerances {
    pub frequency: f64,
    pub damping: f64,
}

impl Default for StabilityTolerances {
    fn default() -> Self {
        Self { frequency: 0.005, damping: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub frequency: bool,
    pub damping: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramPole {
    pub frequency_hz: f64,
    pub damping_ratio: f64,
    /// `None` when there is no lower order to compare with.
    pub stability: Option<Stability>,
    /// Index of the nearest-frequency pole in the previous row.
    pub matched: Option<usize>,
}

impl DiagramPole {
    pub fn is_stable(&self) -> bool {
        self.stability.is_some_and(|s| s.frequency && s.damping)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramRow {
    pub order: usize,
    pub poles: Vec<DiagramPole>,
    /// Failure message when this order could not be identified.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationDiagram {
    pub rows: Vec<DiagramRow>,
    /// Singular values of the projected block output matrix, descending.
    pub singular_values: Vec<f64>,
    pub tolerances: StabilityTolerances,
}

impl StabilizationDiagram {
    /// Number of consecutive orders spanned by the longest chain of poles in
    /// which every link is flagged stable (a single stable flag spans two orders).
    pub fn longest_stable_chain(&self) -> usize {
        let mut prev: Vec<usize> = Vec::new();
        let mut best = 0;
        for row in &self.rows {
            let cur: Vec<usize> = row
                .poles
                .iter()
                .map(|p| match (p.is_stable(), p.matched) {
                    (true, Some(j)) => prev.get(j).copied().unwrap_or(1) + 1,
                    _ => 1,
                })
                .collect();
            best = best.max(cur.iter().copied().max().unwrap_or(0));
            prev = cur;
        }
        best
    }

    /// Longest run of consecutive orders each holding a stable pole within
    /// `rel` of `frequency_hz`.
    pub fn stable_run_near(&self, frequency_hz: f64, rel: f64) -> usize {
        let mut best = 0;
        let mut run = 0;
        for row in &self.rows {
            let hit = row
                .poles
                .iter()
                .any(|p| p.is_stable() && (p.frequency_hz / frequency_hz - 1.0).abs() < rel);
            run = if hit { run + 1 } else { 0 };
            best = best.max(run);
        }
        best
    }
}

/// Identifies every order in `orders` (ascending) with a shared block-row
/// count and flags poles against the nearest-frequency pole one row down.
pub fn stabilization_diagram(
    ubar: &SpectrumRecord,
    y: &SpectrumRecord,
    n_inputs: usize,
    basis: &BasisFunctionSet,
    orders: &[usize],
    cfg: &SubspaceConfig,
    tol: StabilityTolerances,
) -> Result<StabilizationDiagram> {
    if orders.is_empty() || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("orders must be non-empty and strictly increasing".into()));
    }
    let max_order = *orders.last().unwrap();
    if orders[0] < 1 || cfg.block_rows * y.n_channels() <= max_order {
        return Err(Error::InvalidArgument(format!(
            "orders must lie in [1, block_rows * l) = [1, {})",
            cfg.block_rows * y.n_channels()
        )));
    }
    let proj = Projection::new(ubar, y, cfg.block_rows, &cfg.weighting)?;
    let ts = 1.0 / ubar.fs;
    let mut rows: Vec<DiagramRow> = orders
        .par_iter()
        .map(|&order| {
            let result = identify_with(&proj, ubar, y, n_inputs, basis, order, &cfg.weighting)
                .and_then(|m| modal_from_matrix(m.a(), ts));
            match result {
                Ok(modal) => DiagramRow {
                    order,
                    poles: modal
                        .modes
                        .iter()
                        .map(|m| DiagramPole { frequency_hz: m.frequency_hz, damping_ratio: m.damping_ratio, stability: None, matched: None })
                        .collect(),
                    error: None,
                },
                Err(e) => DiagramRow { order, poles: vec![], error: Some(e.to_string()) },
            }
        })
        .collect();
    for i in 1..rows.len() {
        let (lower, upper) = rows.split_at_mut(i);
        let prev = &lower[i - 1];
        if prev.error.is_some() {
            continue;
        }
        for pole in &mut upper[0].poles {
            let nearest = prev.poles.iter().enumerate().min_by(|(_, a), (_, b)| {
                (a.frequency_hz - pole.frequency_hz).abs().total_cmp(&(b.frequency_hz - pole.frequency_hz).abs())
            });
            pole.matched = nearest.map(|(j, _)| j);
            pole.stability = Some(match nearest.map(|(_, q)| q) {
                Some(q) => Stability {
                    frequency: ((pole.frequency_hz - q.frequency_hz) / q.frequency_hz).abs() < tol.frequency,
                    damping: ((pole.damping_ratio - q.damping_ratio) / q.damping_ratio).abs() < tol.damping,
                },
                None => Stability { frequency: false, damping: false },
            });
        }
    }
    Ok(StabilizationDiagram { rows, singular_values: proj.singular_values().to_vec(), tolerances: tol })
}

/// CSV with one row per pole; failed orders appear as a row with empty fields.
/// Singular values follow as `# sv <index> <value>` comment rows.
pub fn write_diagram_csv(w: &mut impl Write, diagram: &StabilizationDiagram) -> Result<()> {
    writeln!(w, "order,frequency_hz,damping_ratio,frequency_stable,damping_stable,stable")?;
    let flag = |b: Option<bool>| match b {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    };
    for row in &diagram.rows {
        if row.error.is_some() {
            writeln!(w, "{},,,,,", row.order)?;
            continue;
        }
        for p in &row.poles {
            writeln!(
                w,
                "{},{:.10e},{:.10e},{},{},{}",
                row.order,
                p.frequency_hz,
                p.damping_ratio,
                flag(p.stability.map(|s| s.frequency)),
                flag(p.stability.map(|s| s.damping)),
                flag(p.stability.map(|_| p.is_stable())),
            )?;
        }
    }
    for (i, s) in diagram.singular_values.iter().enumerate() {
        writeln!(w, "# sv {} {:.10e}", i + 1, s)?;
    }
    Ok(())
}
