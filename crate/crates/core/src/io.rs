//! AFLD field records and CSV export.
//!
//! Record layout (all little-endian): magic `b"AFLD"`, `u32` version,
//! `u32` dim, `u32` component count, `dim × u32` grid shape,
//! `dim × f64` box side per axis, `u32` flags (bit 0 mean-zero, bit 1
//! divergence-free), then the samples as `f64`, component-major and
//! row-major within a component. Records may be concatenated.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{FieldFlags, Grid, SpectralField};
use crate::timeseries::TimeSeries;

pub const MAGIC: &[u8; 4] = b"AFLD";
pub const VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_field(w: &mut impl Write, f: &SpectralField) -> Result<()> {
    let grid = f.grid();
    let mut buf = Vec::with_capacity(32 + 8 * f.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.n_components() as u32).to_le_bytes());
    for &n in grid.shape() {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for _ in 0..grid.dim() {
        buf.extend_from_slice(&grid.length().to_le_bytes());
    }
    buf.extend_from_slice(&f.flags().bits().to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(f64::from_le_bytes(b))
}

/// Next record, or `None` at a clean end of input.
pub fn read_field(r: &mut impl Read) -> Result<Option<SpectralField>> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(io_err(e)),
    }
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(r)? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let n_components = read_u32(r)? as usize;
    let shape = (0..dim)
        .map(|_| read_u32(r).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let lengths = (0..dim).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    if lengths.iter().any(|&l| l != lengths[0]) {
        return Err(Error::Format(format!("non-cubic box {lengths:?}")));
    }
    let flags = FieldFlags::from_bits(read_u32(r)?)
        .ok_or_else(|| Error::Format("unknown flag bits".into()))?;
    let grid = Grid::new(&shape, lengths[0])?;
    let count = grid.len() * n_components;
    let mut bytes = vec![0u8; 8 * count];
    r.read_exact(&mut bytes).map_err(io_err)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Some(
        SpectralField::from_values(grid, n_components, values)?.with_flags(flags),
    ))
}

pub fn save_field(path: &Path, f: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_field(&mut w, f)?;
    w.flush().map_err(io_err)
}

pub fn load_field(path: &Path) -> Result<SpectralField> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    read_field(&mut r)?.ok_or_else(|| Error::Format("empty file".into()))
}

/// Slices `0, stride, 2·stride, …` (and always the last) as consecutive
/// records.
pub fn save_series(path: &Path, series: &TimeSeries, stride: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for i in strided(series.len(), stride) {
        write_field(&mut w, series.slice(i))?;
    }
    w.flush().map_err(io_err)
}

/// Every record of a file.
pub fn load_records(path: &Path) -> Result<Vec<SpectralField>> {
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    while let Some(f) = read_field(&mut r)? {
        out.push(f);
    }
    Ok(out)
}

/// Indices `0, stride, …` plus the final index.
pub fn strided(len: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

/// One row per grid point: coordinates, then every component.
pub fn field_csv(f: &SpectralField) -> String {
    let grid = f.grid();
    let (dim, n) = (grid.dim(), grid.len());
    let mut out = String::new();
    let axes = ["x", "y", "z"];
    let header: Vec<String> = axes[..dim]
        .iter()
        .map(|s| s.to_string())
        .chain((0..f.n_components()).map(|c| format!("c{c}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let vals = f.values();
    for i in 0..n {
        let x = grid.coords(i);
        let row: Vec<String> = x[..dim]
            .iter()
            .map(|v| format!("{v:.17e}"))
            .chain((0..f.n_components()).map(|c| format!("{:.17e}", vals[c * n + i])))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_band_field;

    #[test]
    fn round_trip_preserves_bits_and_flags() {
        let g = Grid::cube(6, 2.0).unwrap();
        let f = random_band_field(&g, 3, 2, 1)
            .unwrap()
            .with_flags(FieldFlags::all());
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        write_field(&mut buf, &f.scale(2.0)).unwrap();
        let mut r = buf.as_slice();
        let a = read_field(&mut r).unwrap().unwrap();
        let b = read_field(&mut r).unwrap().unwrap();
        assert!(read_field(&mut r).unwrap().is_none());
        assert_eq!(a.values(), f.values());
        assert_eq!(a.flags(), FieldFlags::all());
        assert_eq!(b.values()[3], 2.0 * f.values()[3]);
        assert_eq!(a.grid(), f.grid());
    }

    #[test]
    fn truncated_or_foreign_input_is_rejected() {
        let g = Grid::square(4, 1.0).unwrap();
        let f = SpectralField::zeros(g, 1).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert!(read_field(&mut &buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let g = Grid::square(4, 1.0).unwrap();
        let f = SpectralField::zeros(g, 2).unwrap();
        let csv = field_csv(&f);
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("x,y,c0,c1\n"));
    }

    #[test]
    fn stride_keeps_the_last_slice() {
        assert_eq!(strided(11, 4), vec![0, 4, 8, 10]);
        assert_eq!(strided(9, 4), vec![0, 4, 8]);
    }
}
