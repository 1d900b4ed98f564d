//! CSV export and a compact binary dump for space-time fields.
//!
//! Binary layout, little-endian throughout:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `CLSF`                              |
//! | 2     | format version (1)                        |
//! | 1     | bytes per complex value: 8 or 16          |
//! | 1     | reserved, zero                            |
//! | 4 × 3 | `nx`, `ny` (cells), `n_steps` as `u32`    |
//! | 8 × 2 | `dt`, `t0` as `f64`                       |
//! | rest  | `(re, im)` pairs, node-major within steps |

use std::io::{Read, Write};

use num_complex::Complex64;

use super::grid::Grid2D;
use super::stepping::SpaceTimeField;
use super::trace::BoundaryTrace;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CLSF";
pub const FORMAT_VERSION: u16 = 1;

/// Storage precision of the binary dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// `f32` pairs, for export.
    Complex64,
    /// `f64` pairs, lossless.
    Complex128,
}

impl Precision {
    fn bytes(self) -> u8 {
        match self {
            Precision::Complex64 => 8,
            Precision::Complex128 => 16,
        }
    }
}

pub fn write_binary(
    mut w: impl Write,
    field: &SpaceTimeField,
    dims: (usize, usize),
    precision: Precision,
) -> Result<()> {
    if (dims.0 + 1) * (dims.1 + 1) != field.n_nodes() {
        return Err(Error::InvalidInput("grid dimensions do not match the field".into()));
    }
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{v} exceeds u32")));
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[precision.bytes(), 0])?;
    for v in [dims.0, dims.1, field.n_steps()] {
        w.write_all(&to_u32(v)?.to_le_bytes())?;
    }
    w.write_all(&field.dt().to_le_bytes())?;
    w.write_all(&field.t0().to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.values().len() * precision.bytes() as usize);
    for v in field.values() {
        match precision {
            Precision::Complex64 => {
                buf.extend_from_slice(&(v.re as f32).to_le_bytes());
                buf.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
            Precision::Complex128 => {
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a dump written by [`write_binary`]; returns the field and `(nx, ny)`.
pub fn read_binary(mut r: impl Read) -> Result<(SpaceTimeField, (usize, usize), Precision)> {
    let mut head = [0u8; 36];
    r.read_exact(&mut head)?;
    if head[0..4] != MAGIC {
        return Err(Error::Io("not a field dump (bad magic)".into()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Io(format!("unsupported dump version {version}")));
    }
    let precision = match head[6] {
        8 => Precision::Complex64,
        16 => Precision::Complex128,
        b => return Err(Error::Io(format!("unsupported value width {b}"))),
    };
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
    let (nx, ny, n_steps) = (u32_at(8), u32_at(12), u32_at(16));
    let (dt, t0) = (f64_at(20), f64_at(28));
    let count = (nx + 1) * (ny + 1) * (n_steps + 1);
    let mut data = vec![0u8; count * precision.bytes() as usize];
    r.read_exact(&mut data)?;
    let values = match precision {
        Precision::Complex64 => data
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().expect("4 bytes"));
                let im = f32::from_le_bytes(c[4..8].try_into().expect("4 bytes"));
                Complex64::new(re as f64, im as f64)
            })
            .collect(),
        Precision::Complex128 => data
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[0..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..16].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect(),
    };
    let field = SpaceTimeField::from_values((nx + 1) * (ny + 1), n_steps, dt, t0, values)?;
    Ok((field, (nx, ny), precision))
}

/// One row per node and time level: `step,t,i,j,x,y,re,im`.
pub fn write_field_csv(mut w: impl Write, field: &SpaceTimeField, grid: &Grid2D) -> Result<()> {
    writeln!(w, "step,t,i,j,x,y,re,im")?;
    for n in 0..field.n_times() {
        let t = field.time(n);
        for (k, v) in field.snapshot(n).iter().enumerate() {
            let (i, j) = grid.ij(k);
            let p = grid.point(k);
            writeln!(w, "{n},{t},{i},{j},{},{},{},{}", p.x, p.y, v.re, v.im)?;
        }
    }
    Ok(())
}

/// One row per boundary sample and time level:
/// `step,t,sample,x,y,nx,ny,weight,re,im`.
pub fn write_trace_csv(mut w: impl Write, trace: &BoundaryTrace, t0: f64) -> Result<()> {
    writeln!(w, "step,t,sample,x,y,nx,ny,weight,re,im")?;
    for n in 0..trace.n_times() {
        let t = t0 + n as f64 * trace.dt();
        for (s, v) in trace.at_time(n).iter().enumerate() {
            let (p, nv) = (trace.points()[s], trace.normals()[s]);
            writeln!(
                w,
                "{n},{t},{s},{},{},{},{},{},{},{}",
                p.x,
                p.y,
                nv.x,
                nv.y,
                trace.weights()[s],
                v.re,
                v.im
            )?;
        }
    }
    Ok(())
}
