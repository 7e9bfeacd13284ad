//! Intensity images (binary PGM) and raw complex field dumps.
//!
//! Field dump layout, all little-endian: 8-byte magic, `n` as u64, extent
//! (m) as f64, wavelength (m) as f64, then `n²` interleaved `(re, im)` f64
//! pairs per component in row-major order. Polarized dumps store H then V.

use num_complex::Complex64;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{PolarizedField, ScalarField, TransverseGrid};

pub const SCALAR_MAGIC: &[u8; 8] = b"SHQKDSF1";
pub const POLARIZED_MAGIC: &[u8; 8] = b"SHQKDPF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

/// Binary PGM of `values` (row-major, `n×n`) scaled so the maximum maps to
/// full white. Row 0 of the image is the top (largest y).
pub fn write_pgm<W: Write>(mut out: W, values: &[f64], n: usize, depth: PgmDepth) -> Result<()> {
    if values.len() != n * n {
        return Err(Error::ShapeMismatch(format!("{} values for a {n}×{n} image", values.len())));
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    write!(out, "P5\n{n} {n}\n{maxval}\n")?;
    let mut bytes = Vec::with_capacity(values.len() * 2);
    for row in (0..n).rev() {
        for v in &values[row * n..(row + 1) * n] {
            let level = if peak > 0.0 {
                ((v.max(0.0) / peak) * maxval as f64).round() as u32
            } else {
                0
            };
            match depth {
                PgmDepth::Eight => bytes.push(level as u8),
                PgmDepth::Sixteen => bytes.extend_from_slice(&(level as u16).to_be_bytes()),
            }
        }
    }
    out.write_all(&bytes)?;
    Ok(())
}

/// Intensity image of a polarized field.
pub fn write_intensity_pgm<W: Write>(out: W, f: &PolarizedField, depth: PgmDepth) -> Result<()> {
    write_pgm(out, &f.intensity(), f.grid().n(), depth)
}

fn header<W: Write>(out: &mut W, magic: &[u8; 8], grid: &TransverseGrid, wavelength: f64) -> Result<()> {
    out.write_all(magic)?;
    out.write_all(&(grid.n() as u64).to_le_bytes())?;
    out.write_all(&grid.extent().to_le_bytes())?;
    out.write_all(&wavelength.to_le_bytes())?;
    Ok(())
}

fn samples<W: Write>(out: &mut W, f: &ScalarField) -> Result<()> {
    let mut bytes = Vec::with_capacity(f.samples().len() * 16);
    for c in f.samples() {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

/// Dumps a scalar field; `wavelength` is stored for reference.
pub fn write_scalar_field<W: Write>(mut out: W, f: &ScalarField, wavelength: f64) -> Result<()> {
    header(&mut out, SCALAR_MAGIC, f.grid(), wavelength)?;
    samples(&mut out, f)
}

pub fn write_polarized_field<W: Write>(mut out: W, f: &PolarizedField) -> Result<()> {
    header(&mut out, POLARIZED_MAGIC, f.grid(), f.wavelength())?;
    samples(&mut out, f.h())?;
    samples(&mut out, f.v())
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header<R: Read>(input: &mut R, magic: &[u8; 8]) -> Result<(TransverseGrid, f64)> {
    let mut m = [0u8; 8];
    input.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Io("unrecognized field dump magic".into()));
    }
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    let n = usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Io("grid size overflows".into()))?;
    let extent = read_f64(input)?;
    let wavelength = read_f64(input)?;
    Ok((TransverseGrid::new(n, extent)?, wavelength))
}

fn read_samples<R: Read>(input: &mut R, grid: TransverseGrid) -> Result<ScalarField> {
    let mut bytes = vec![0u8; grid.len() * 16];
    input.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    ScalarField::from_samples(grid, data)
}

pub fn read_scalar_field<R: Read>(mut input: R) -> Result<(ScalarField, f64)> {
    let (grid, wavelength) = read_header(&mut input, SCALAR_MAGIC)?;
    Ok((read_samples(&mut input, grid)?, wavelength))
}

pub fn read_polarized_field<R: Read>(mut input: R) -> Result<PolarizedField> {
    let (grid, wavelength) = read_header(&mut input, POLARIZED_MAGIC)?;
    let h = read_samples(&mut input, grid)?;
    let v = read_samples(&mut input, grid)?;
    PolarizedField::new(h, v, wavelength)
}
