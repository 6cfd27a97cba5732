//! Field snapshot files.
//!
//! Layout: magic `OSEV1`, then `u32` n1, n2, n3, `f64` box length, `f64`
//! time stamp, then the three component arrays row-major with the x index
//! fastest. All numbers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid, VectorField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"OSEV1";

pub fn write_snapshot(path: &Path, field: &VectorField, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for a in 0..3 {
        w.write_all(&(field.grid.n[a] as u32).to_le_bytes())?;
    }
    w.write_all(&field.grid.len.to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for c in 0..3 {
        for v in &field.comp[c] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(VectorField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic in {}", path.display())));
    }
    let mut u32buf = [0u8; 4];
    let mut n = [0usize; 3];
    for a in &mut n {
        r.read_exact(&mut u32buf)?;
        *a = u32::from_le_bytes(u32buf) as usize;
    }
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let len = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)?;
    let time = f64::from_le_bytes(f64buf);
    let grid = Grid::new(n, len)?;
    let mut field = VectorField::zeros(grid);
    for c in 0..3 {
        for v in field.comp[c].iter_mut() {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
    }
    Ok((field, time))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let g = Grid::cubic(8, 3.0).unwrap();
        let u = VectorField::from_fn(g, |p| [p[0] * 1.1, p[1] - 0.3, p[2].sin()]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.osev");
        write_snapshot(&path, &u, 2.5).unwrap();
        let (v, t) = read_snapshot(&path).unwrap();
        assert_eq!(t, 2.5);
        assert_eq!(v.grid, g);
        for c in 0..3 {
            assert_eq!(u.comp[c], v.comp[c]);
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.osev");
        std::fs::write(&path, b"NOPE!junkjunkjunk").unwrap();
        assert!(read_snapshot(&path).is_err());
    }
}
