//! Binary snapshot files: `"BFDK"`, `u32` version, `u32` n, `f64` radius,
//! `f64` gamma, `f64` time, then `n³` `f64` values, little-endian, x fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DistributionField, VelocityGrid};

const MAGIC: &[u8; 4] = b"BFDK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: DistributionField,
    pub gamma: f64,
    pub time: f64,
}

pub fn write_snapshot_to<W: Write>(mut out: W, field: &DistributionField, gamma: f64, time: f64) -> Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.n_per_axis() as u32).to_le_bytes())?;
    out.write_all(&grid.radius().to_le_bytes())?;
    out.write_all(&gamma.to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_snapshot(path: &Path, field: &DistributionField, gamma: f64, time: f64) -> Result<()> {
    write_snapshot_to(BufWriter::new(File::create(path)?), field, gamma, time)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Snapshot("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_snapshot_from<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let radius = read_f64(&mut r)?;
    let gamma = read_f64(&mut r)?;
    let time = read_f64(&mut r)?;
    let grid = VelocityGrid::new(n, radius)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(read_f64(&mut r)?);
    }
    let field = DistributionField::from_values(grid, values)?;
    Ok(Snapshot { field, gamma, time })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    read_snapshot_from(BufReader::new(File::open(path)?))
}
