//! GridFunction serialization.
//!
//! JSON: `{"dim":n,"box_exp":K,"cell_exp":-m,"values":[...]}` row-major.
//! CSV alternative on input: header line `# dim,K,m` then one value per line.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::geometry::{Domain, GridFunction};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct GridFunctionJson {
    dim: u8,
    box_exp: i32,
    cell_exp: i32,
    values: Vec<f64>,
}

pub fn to_json(f: &GridFunction) -> String {
    let d = f.domain();
    let doc = GridFunctionJson {
        dim: d.dim(),
        box_exp: d.box_exp(),
        cell_exp: d.cell_exp(),
        values: f.values().to_vec(),
    };
    serde_json::to_string(&doc).expect("grid function serializes")
}

pub fn from_json(text: &str) -> Result<GridFunction> {
    let doc: GridFunctionJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let domain = Domain::new(doc.dim, doc.box_exp, doc.cell_exp)?;
    GridFunction::new(domain, doc.values)
}

pub fn write_json(f: &GridFunction, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(to_json(f).as_bytes())?;
    w.write_all(b"\n")
}

/// CSV: `# dim,K,m` header, then one finite nonnegative decimal per line.
pub fn from_csv(reader: impl BufRead) -> Result<GridFunction> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let header = header.trim();
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("csv header must start with '#'".into()))?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Parse("csv header must be '# dim,K,m'".into()));
    }
    let dim: u8 = parts[0].parse().map_err(|_| Error::Parse("bad dim".into()))?;
    let box_exp: i32 = parts[1].parse().map_err(|_| Error::Parse("bad K".into()))?;
    let m: i32 = parts[2].parse().map_err(|_| Error::Parse("bad m".into()))?;
    let domain = Domain::new(dim, box_exp, -m)?;
    let mut values = Vec::with_capacity(domain.n_cells());
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse(format!("bad value '{line}'")))?;
        values.push(v);
    }
    GridFunction::new(domain, values)
}

/// Load from a path, dispatching on the `.csv` extension.
pub fn load_grid_function(path: &std::path::Path) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "csv") {
        from_csv(std::io::BufReader::new(text.as_bytes()))
    } else {
        from_json(&text)
    }
}
