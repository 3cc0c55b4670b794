//! Text file for mechanical systems, laid out like the model file.
//!
//! ```text
//! mechanical-system 1
//! n_dof 1
//! n_inputs 1
//! output 0 displacement
//! nonlinear 3.95 0:0:3 load 1
//! meta source example
//! M
//! 1
//! Cv
//! 40.3
//! K
//! 185600
//! L
//! 2e7
//! ```
//!
//! `output <dof> displacement|velocity` lines give the measured channels in
//! order. Each `nonlinear` line carries a coefficient, a monomial over
//! degrees of freedom in `dof:derivative:exponent` form and the load vector.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::mechanical::{MechanicalSystemSpec, NonlinearElement, OutputChannel, OutputKind};
use crate::error::{Error, Result};
use crate::model::io::{fmt_f64, parse_f64, parse_usize, write_matrix_rows};
use crate::model::Monomial;

pub const SYSTEM_MAGIC: &str = "mechanical-system";

#[derive(Debug, Clone)]
pub struct SystemFile {
    pub system: MechanicalSystemSpec,
    pub meta: Vec<(String, String)>,
}

pub fn write_system(w: &mut impl Write, sys: &MechanicalSystemSpec, meta: &[(String, String)]) -> Result<()> {
    writeln!(w, "{SYSTEM_MAGIC} 1")?;
    writeln!(w, "n_dof {}", sys.n_dof())?;
    writeln!(w, "n_inputs {}", sys.n_inputs())?;
    for o in sys.outputs() {
        let kind = match o.kind {
            OutputKind::Displacement => "displacement",
            OutputKind::Velocity => "velocity",
        };
        writeln!(w, "output {} {kind}", o.dof)?;
    }
    for el in sys.nonlinear() {
        let load: Vec<String> = el.load.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "nonlinear {} {} load {}", fmt_f64(el.coefficient), el.basis, load.join(" "))?;
    }
    for (k, v) in meta {
        writeln!(w, "meta {k} {v}")?;
    }
    for (tag, m) in [("M", sys.mass()), ("Cv", sys.damping()), ("K", sys.stiffness()), ("L", sys.input_locations())] {
        writeln!(w, "{tag}")?;
        write_matrix_rows(w, m)?;
    }
    Ok(())
}

pub fn read_system(r: impl BufRead) -> Result<SystemFile> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, first) = lines.next().ok_or_else(|| Error::format(1, "empty system file"))?;
    let first = first?;
    let mut it = first.split_whitespace();
    if it.next() != Some(SYSTEM_MAGIC) || it.next() != Some("1") {
        return Err(Error::format(ln, "missing 'mechanical-system 1' header"));
    }
    let tags = ["M", "Cv", "K", "L"];
    let mut values: [Vec<f64>; 4] = Default::default();
    let mut current = None;
    let (mut n_dof, mut n_inputs) = (None, None);
    let mut outputs = Vec::new();
    let mut nonlinear = Vec::new();
    let mut meta = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if let Some(i) = tags.iter().position(|g| *g == t) {
            current = Some(i);
            continue;
        }
        if let Some(i) = current {
            for tok in t.split_whitespace() {
                values[i].push(parse_f64(tok, ln)?);
            }
            continue;
        }
        let mut toks = t.split_whitespace();
        match toks.next().unwrap_or_default() {
            "n_dof" => n_dof = Some(parse_usize(toks.next(), ln, "n_dof")?),
            "n_inputs" => n_inputs = Some(parse_usize(toks.next(), ln, "n_inputs")?),
            "output" => {
                let dof = parse_usize(toks.next(), ln, "output dof")?;
                let kind = match toks.next() {
                    Some("displacement") => OutputKind::Displacement,
                    Some("velocity") => OutputKind::Velocity,
                    _ => return Err(Error::format(ln, "output kind must be displacement or velocity")),
                };
                outputs.push(OutputChannel { dof, kind });
            }
            "nonlinear" => {
                let coefficient = parse_f64(toks.next().unwrap_or_default(), ln)?;
                let basis: Monomial = toks
                    .next()
                    .unwrap_or_default()
                    .parse()
                    .map_err(|e: Error| Error::format(ln, e.to_string()))?;
                if toks.next() != Some("load") {
                    return Err(Error::format(ln, "expected 'load' after the monomial"));
                }
                let load = toks.map(|v| parse_f64(v, ln)).collect::<Result<Vec<_>>>()?;
                nonlinear.push(NonlinearElement { coefficient, basis, load });
            }
            "meta" => {
                let k = toks.next().unwrap_or_default().to_string();
                meta.push((k, toks.collect::<Vec<_>>().join(" ")));
            }
            other => return Err(Error::format(ln, format!("unknown key '{other}'"))),
        }
    }
    let n = n_dof.ok_or_else(|| Error::format(0, "missing n_dof"))?;
    let m = n_inputs.ok_or_else(|| Error::format(0, "missing n_inputs"))?;
    let shapes = [(n, n), (n, n), (n, n), (n, m)];
    let mut mats = Vec::new();
    for (i, (r, c)) in shapes.into_iter().enumerate() {
        if values[i].len() != r * c {
            return Err(Error::format(0, format!("matrix {} needs {} values, found {}", tags[i], r * c, values[i].len())));
        }
        mats.push(DMatrix::from_row_slice(r, c, &values[i]));
    }
    let l = mats.pop().unwrap();
    let k = mats.pop().unwrap();
    let cv = mats.pop().unwrap();
    let mass = mats.pop().unwrap();
    let system = MechanicalSystemSpec::new(mass, cv, k, nonlinear, l, outputs)?;
    Ok(SystemFile { system, meta })
}
