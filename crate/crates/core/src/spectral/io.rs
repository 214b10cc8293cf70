//! Coordinate text format for symmetric matrices.
//!
//! Layout: a header line with the dimension `n`, then one `i j value` line
//! per stored entry, 0-based indices, upper triangle only (`i <= j`). Exact
//! zeros are skipped on write; absent entries read back as zero. Values are
//! written with 17 significant digits, enough to reproduce every finite
//! `f64` exactly on parse.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::ops::{DenseSym, SparseSym, SymOp};
use crate::{Error, Result};

/// Write the upper triangle of a dense matrix.
pub fn write_coord(w: &mut dyn Write, a: &DenseSym) -> std::io::Result<()> {
    let n = a.dim();
    writeln!(w, "{n}")?;
    for i in 0..n {
        for j in i..n {
            let v = a.get(i, j);
            if v != 0.0 {
                writeln!(w, "{i} {j} {v:.16e}")?;
            }
        }
    }
    Ok(())
}

/// Write sparse upper-triangle triplets.
pub fn write_coord_sparse(w: &mut dyn Write, a: &SparseSym) -> std::io::Result<()> {
    writeln!(w, "{}", a.dim())?;
    for &(i, j, v) in a.entries() {
        if v != 0.0 {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
    }
    Ok(())
}

pub fn write_coord_file(path: &Path, a: &DenseSym) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_coord(&mut f, a).map_err(|e| Error::io(path, e))
}

pub fn write_coord_sparse_file(path: &Path, a: &SparseSym) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_coord_sparse(&mut f, a).map_err(|e| Error::io(path, e))
}

/// Read a coordinate file back as sparse triplets.
pub fn read_coord(path: &Path) -> Result<SparseSym> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_coord_from(BufReader::new(f), path)
}

fn read_coord_from(r: impl BufRead, path: &Path) -> Result<SparseSym> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = r.lines().enumerate();
    let n: usize = loop {
        match lines.next() {
            Some((ln, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break t
                    .parse()
                    .map_err(|e| parse_err(ln + 1, format!("bad header: {e}")))?;
            }
            None => return Err(parse_err(1, "empty file".into())),
        }
    };
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (ln, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| parse_err(ln + 1, format!("missing {what}")))
        };
        let i: u32 = next("row")?
            .parse()
            .map_err(|e| parse_err(ln + 1, format!("bad row index: {e}")))?;
        let j: u32 = next("col")?
            .parse()
            .map_err(|e| parse_err(ln + 1, format!("bad col index: {e}")))?;
        let v: f64 = next("value")?
            .parse()
            .map_err(|e| parse_err(ln + 1, format!("bad value: {e}")))?;
        if i > j || (j as usize) >= n {
            return Err(parse_err(
                ln + 1,
                format!("entry ({i}, {j}) outside the upper triangle of size {n}"),
            ));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(ln + 1, format!("duplicate entry ({i}, {j})")));
        }
        entries.push((i, j, v));
    }
    SparseSym::from_upper_triplets(n, entries)
}
