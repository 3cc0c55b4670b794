use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::failure::Failure;

/// `(key, value)` pairs describing the program and the fully resolved
/// configuration; the values form a valid config-file table.
pub fn provenance(command: &str, resolved: &impl Serialize) -> Result<Vec<(String, String)>, Failure> {
    let text = toml::to_string(resolved).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    let mut out = vec![("generator".to_string(), format!("greybox {} {command}", env!("CARGO_PKG_VERSION")))];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        if let Some((k, v)) = line.split_once(" = ") {
            out.push((format!("config.{}", k.trim()), v.trim().to_string()));
        }
    }
    Ok(out)
}

pub fn write_comment_header(w: &mut impl Write, meta: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k} {v}")?;
    }
    Ok(())
}

pub fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))
}

pub fn finish(w: BufWriter<File>, path: &Path) -> Result<(), Failure> {
    w.into_inner()
        .map_err(|e| Failure::Usage(format!("cannot write {}: {}", path.display(), e.error())))?
        .sync_all()
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}
