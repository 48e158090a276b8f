//! `BRDF1` binary field snapshots.
//!
//! Layout (all little-endian): the 5-byte magic `BRDF1`, `L` as `f64`,
//! `n_grid` as `u32`, a flag word as `u32` (bit 0 divergence-free, bit 1
//! dealiased), then the x, y and z coefficient blocks. Each block holds the
//! retained lattice `|K_i| <= n/2 - 1` in row-major order with `K_x`
//! outermost and every axis ascending from `-(n/2 - 1)`, one interleaved
//! `(re, im)` pair of `f64` per mode. The dealias fraction is not part of the
//! format; readers supply it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::field::SpectralField;
use super::grid::GridSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"BRDF1";

const FLAG_DIVFREE: u32 = 1;
const FLAG_DEALIASED: u32 = 2;

fn lattice_indices(grid: &GridSpec) -> impl Iterator<Item = usize> + '_ {
    let h = grid.half() - 1;
    (-h..=h).flat_map(move |kx| {
        (-h..=h).flat_map(move |ky| {
            (-h..=h).map(move |kz| grid.index_of([kx, ky, kz]).expect("retained mode"))
        })
    })
}

pub fn write_snapshot_to<W: Write>(field: &SpectralField, mut out: W) -> std::io::Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&grid.length().to_le_bytes())?;
    out.write_all(&(grid.n_grid() as u32).to_le_bytes())?;
    let mut flags = 0;
    if field.is_divergence_free() {
        flags |= FLAG_DIVFREE;
    }
    if field.is_dealiased() {
        flags |= FLAG_DEALIASED;
    }
    out.write_all(&flags.to_le_bytes())?;
    for comp in 0..3 {
        let data = field.component(comp);
        for idx in lattice_indices(grid) {
            out.write_all(&data[idx].re.to_le_bytes())?;
            out.write_all(&data[idx].im.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn write_snapshot(field: &SpectralField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| snapshot_err(path, e))?;
    write_snapshot_to(field, BufWriter::new(file)).map_err(|e| snapshot_err(path, e))
}

/// Reads a snapshot. The stored flags are re-verified against the
/// coefficients rather than trusted.
pub fn read_snapshot_from<R: Read>(mut input: R, dealias_fraction: f64) -> Result<SpectralField> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidGrid(format!(
            "bad snapshot magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    input.read_exact(&mut b4)?;
    let n_grid = u32::from_le_bytes(b4) as usize;
    input.read_exact(&mut b4)?;
    let _flags = u32::from_le_bytes(b4);
    let grid = GridSpec::new(length, n_grid, dealias_fraction)?;

    let mut data = [
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
    ];
    let indices: Vec<usize> = lattice_indices(&grid).collect();
    for comp in data.iter_mut() {
        for &idx in &indices {
            input.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            input.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            comp[idx] = Complex64::new(re, im);
        }
    }
    let mut tail = [0u8; 1];
    if input.read(&mut tail)? != 0 {
        return Err(Error::InvalidGrid(
            "trailing bytes after snapshot body".into(),
        ));
    }
    SpectralField::from_raw(grid, data)
}

pub fn read_snapshot(path: &Path, dealias_fraction: f64) -> Result<SpectralField> {
    let file = File::open(path).map_err(|e| snapshot_err(path, e))?;
    read_snapshot_from(BufReader::new(file), dealias_fraction).map_err(|e| match e {
        Error::Io(io) => snapshot_err(path, io),
        Error::InvalidGrid(reason) => Error::Snapshot {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

fn snapshot_err(path: &Path, e: std::io::Error) -> Error {
    Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}
