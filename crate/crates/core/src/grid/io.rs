//! Field persistence: a little-endian binary container and CSV slices.
//!
//! Binary layout: magic `CKKF`, `u64` dimension, one `u64` point count per
//! axis, `f64` box length, then the node values as interleaved `f64` pairs
//! `(re, im)` in row-major order.

use super::{Grid, GridField};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"CKKF";

/// Writes `field` in the binary container format.
pub fn write_field<W: Write>(mut w: W, field: &GridField) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    for &n in grid.points() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    w.write_all(&grid.box_length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a field written by [`write_field`].
pub fn read_field<R: Read>(mut r: R) -> Result<GridField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let dim = read_u64(&mut r)? as usize;
    if dim == 0 || dim > 16 {
        return Err(Error::Format(format!("implausible dimension {dim}")));
    }
    let points = (0..dim).map(|_| read_u64(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
    let mut lb = [0u8; 8];
    r.read_exact(&mut lb)?;
    let grid = Grid::new(points, f64::from_le_bytes(lb)).map_err(|e| Error::Format(e.to_string()))?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw).map_err(|_| Error::Format("truncated value block".into()))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    GridField::new(grid, values)
}

/// Writes the line of `field` along `axis` through the node `fixed` (whose
/// `axis` entry is ignored) as CSV rows `x,re,im`.
pub fn write_slice_csv<W: Write>(mut w: W, field: &GridField, axis: usize, fixed: &[usize]) -> Result<()> {
    let grid = field.grid();
    if axis >= grid.dim() || fixed.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: fixed.len() });
    }
    writeln!(w, "x,re,im")?;
    let mut idx = fixed.to_vec();
    for j in 0..grid.points()[axis] {
        idx[axis] = j;
        let v = field.values()[grid.flatten(&idx)];
        writeln!(w, "{},{:e},{:e}", grid.coordinate(axis, j), v.re, v.im)?;
    }
    Ok(())
}
