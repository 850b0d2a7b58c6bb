//! Dense matrix files: CSV (row-major, 17 significant digits) and the
//! `KSPC` binary cache format (magic, u32 version, u32 p, then p² row-major
//! little-endian f64).

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KSPC";
const VERSION: u32 = 1;

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut w: W) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("row {rows}: {e}")))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format(format!(
                    "row {rows} has {} fields, expected {c}",
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}

pub fn write_matrix_binary<W: Write>(m: &DMatrix<f64>, mut w: W) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Argument(
            "binary format stores square matrices only".into(),
        ));
    }
    let p = u32::try_from(m.nrows()).map_err(|_| Error::Argument("dimension exceeds u32".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<DMatrix<f64>> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let p = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; p * p * 8];
    r.read_exact(&mut buf)?;
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(p, p, &values))
}
