//! Text model file.
//!
//! ```text
//! greybox-model 1
//! n_states 2
//! n_inputs 1
//! n_outputs 1
//! n_basis 2
//! sample_period 4.0966816878328554e-4
//! basis 0:0:2
//! basis 0:0:3
//! meta seed 42
//! A
//! <n_states rows, n_states values each>
//! B
//! ...
//! D
//! E
//! F
//! ```
//!
//! Header keys must appear before the first matrix tag. Each basis line is a
//! comma-separated list of `channel:derivative_order:exponent` triples. Matrix
//! sections are row-major; whitespace and line breaks inside a section are
//! not significant. Lines starting with `#` are comments. `meta` lines carry
//! free-form provenance as `key value...`.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use super::{BasisFunctionSet, GreyBoxModel, Monomial};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "greybox-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: GreyBoxModel,
    pub meta: Vec<(String, String)>,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_matrix_rows(w: &mut impl Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_model(w: &mut impl Write, model: &GreyBoxModel, meta: &[(String, String)]) -> Result<()> {
    let d = model.dims();
    writeln!(w, "{MODEL_MAGIC} {MODEL_VERSION}")?;
    writeln!(w, "n_states {}", d.n_states)?;
    writeln!(w, "n_inputs {}", d.n_inputs)?;
    writeln!(w, "n_outputs {}", d.n_outputs)?;
    writeln!(w, "n_basis {}", d.n_basis)?;
    writeln!(w, "sample_period {}", fmt_f64(model.sample_period()))?;
    for e in model.basis().entries() {
        writeln!(w, "basis {e}")?;
    }
    for (k, v) in meta {
        writeln!(w, "meta {k} {v}")?;
    }
    let sections: [(&str, DMatrix<f64>); 6] = [
        ("A", model.a().clone()),
        ("B", model.b().clone_owned()),
        ("C", model.c().clone()),
        ("D", model.d().clone_owned()),
        ("E", model.e().clone_owned()),
        ("F", model.f().clone_owned()),
    ];
    for (tag, m) in &sections {
        writeln!(w, "{tag}")?;
        write_matrix_rows(w, m)?;
    }
    Ok(())
}

pub(crate) fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(line, format!("expected integer for {what}")))
}

pub(crate) fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| Error::format(line, format!("bad number '{tok}'")))
}

pub fn read_model(r: impl BufRead) -> Result<ModelFile> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, first) = lines.next().ok_or_else(|| Error::format(1, "empty model file"))?;
    let first = first?;
    let mut it = first.split_whitespace();
    if it.next() != Some(MODEL_MAGIC) {
        return Err(Error::format(ln, "missing greybox-model header"));
    }
    let version = parse_usize(it.next(), ln, "version")?;
    if version as u32 != MODEL_VERSION {
        return Err(Error::format(ln, format!("unsupported model version {version}")));
    }

    let mut dims = [None::<usize>; 4];
    let mut sample_period = None;
    let mut basis = Vec::new();
    let mut meta = Vec::new();
    let tags = ["A", "B", "C", "D", "E", "F"];
    let mut values: [Vec<f64>; 6] = Default::default();
    let mut current: Option<usize> = None;

    for (ln, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(idx) = tags.iter().position(|t| *t == trimmed) {
            current = Some(idx);
            continue;
        }
        if let Some(idx) = current {
            for tok in trimmed.split_whitespace() {
                values[idx].push(parse_f64(tok, ln)?);
            }
            continue;
        }
        let mut it = trimmed.splitn(2, char::is_whitespace);
        let key = it.next().unwrap_or_default();
        let rest = it.next().unwrap_or_default().trim();
        match key {
            "n_states" => dims[0] = Some(parse_usize(Some(rest), ln, key)?),
            "n_inputs" => dims[1] = Some(parse_usize(Some(rest), ln, key)?),
            "n_outputs" => dims[2] = Some(parse_usize(Some(rest), ln, key)?),
            "n_basis" => dims[3] = Some(parse_usize(Some(rest), ln, key)?),
            "sample_period" => sample_period = Some(parse_f64(rest, ln)?),
            "basis" => basis.push(
                rest.parse::<Monomial>().map_err(|e| Error::format(ln, e.to_string()))?,
            ),
            "meta" => {
                let mut kv = rest.splitn(2, char::is_whitespace);
                let k = kv.next().unwrap_or_default().to_string();
                meta.push((k, kv.next().unwrap_or_default().trim().to_string()));
            }
            other => return Err(Error::format(ln, format!("unknown key '{other}'"))),
        }
    }

    let missing = |what: &str| Error::format(0, format!("missing {what}"));
    let n = dims[0].ok_or_else(|| missing("n_states"))?;
    let m = dims[1].ok_or_else(|| missing("n_inputs"))?;
    let l = dims[2].ok_or_else(|| missing("n_outputs"))?;
    let s = dims[3].ok_or_else(|| missing("n_basis"))?;
    let t = sample_period.ok_or_else(|| missing("sample_period"))?;
    if basis.len() != s {
        return Err(Error::format(0, format!("n_basis is {s} but {} basis lines", basis.len())));
    }
    let shapes = [(n, n), (n, m), (l, n), (l, m), (n, s), (l, s)];
    let mut mats = Vec::with_capacity(6);
    for (i, (rows, cols)) in shapes.iter().enumerate() {
        if values[i].len() != rows * cols {
            return Err(Error::format(
                0,
                format!("matrix {} has {} values, expected {}", tags[i], values[i].len(), rows * cols),
            ));
        }
        mats.push(DMatrix::from_row_slice(*rows, *cols, &values[i]));
    }
    let basis = BasisFunctionSet::new(basis, l)?;
    let mut mats = mats.into_iter();
    let mut next = || mats.next().unwrap();
    let model = GreyBoxModel::new(next(), next(), next(), next(), next(), next(), basis, t)?;
    Ok(ModelFile { model, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> GreyBoxModel {
        let basis = BasisFunctionSet::powers(0, &[2, 3], 1).unwrap();
        GreyBoxModel::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.2, 0.8]),
            DMatrix::from_row_slice(2, 1, &[1.0 / 3.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1e-17]),
            DMatrix::from_row_slice(1, 1, &[0.0]),
            DMatrix::from_row_slice(2, 2, &[3.0e-7, std::f64::consts::PI, 5.0, 6.0]),
            DMatrix::from_row_slice(1, 2, &[8.0, -9.5e300]),
            basis,
            1.0 / 2441.0,
        )
        .unwrap()
    }

    #[test]
    fn write_read_bit_exact() {
        let model = sample_model();
        let meta = vec![("seed".to_string(), "42".to_string()), ("note".into(), "a b c".into())];
        let mut buf = Vec::new();
        write_model(&mut buf, &model, &meta).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("greybox-model 1\n"));
        assert!(text.contains("3.3333333333333331e-1"), "17 significant digits");
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.meta, meta);
    }

    #[test]
    fn rejects_truncated_matrix() {
        let mut buf = Vec::new();
        write_model(&mut buf, &sample_model(), &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = text.trim_end().rsplit_once(' ').unwrap().0.to_string();
        assert!(matches!(read_model(cut.as_bytes()), Err(Error::Format { .. })));
        assert!(read_model("other 1\n".as_bytes()).is_err());
    }
}
