//! MFKG1 binary snapshots.
//!
//! Layout, little-endian: magic `b"MFKG1"`, version `u32 = 1`, `dim u32`,
//! `N u32`, `L f64`, `m f64`, `t f64`, then `psi` and `pi` as interleaved
//! `re, im` f64 pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::make_grid;

pub const MAGIC: &[u8; 5] = b"MFKG1";
pub const VERSION: u32 = 1;

pub fn write_snapshot_to(mut w: impl Write, state: &FieldState, mass: f64) -> Result<()> {
    let g = state.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    for v in [g.box_length(), mass, state.time] {
        w.write_all(&v.to_le_bytes())?;
    }
    for z in state.psi.iter().chain(&state.pi) {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot(path: &Path, state: &FieldState, mass: f64) -> Result<()> {
    write_snapshot_to(BufWriter::new(File::create(path)?), state, mass)
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Snapshot(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

/// Returns the state and the mass stored with it.
pub fn read_snapshot_from(mut r: impl Read) -> Result<(FieldState, f64)> {
    let magic: [u8; 5] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("bad magic; not an MFKG1 file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let l = f64::from_le_bytes(read_array(&mut r)?);
    let mass = f64::from_le_bytes(read_array(&mut r)?);
    let time = f64::from_le_bytes(read_array(&mut r)?);
    let grid = make_grid(dim, n, l).map_err(|e| Error::Snapshot(format!("invalid grid header: {e}")))?;
    let len = grid.len();
    let mut values = Vec::with_capacity(2 * len);
    for _ in 0..2 * len {
        let re = f64::from_le_bytes(read_array(&mut r)?);
        let im = f64::from_le_bytes(read_array(&mut r)?);
        values.push(Complex64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after field data".into()));
    }
    let pi = values.split_off(len);
    Ok((FieldState::new(grid, values, pi, time)?, mass))
}

pub fn read_snapshot(path: &Path) -> Result<(FieldState, f64)> {
    read_snapshot_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::test_support::random_state;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = make_grid(2, 16, 9.5).unwrap();
        let mut st = random_state(&g, 3);
        st.time = 12.25;
        let mut buf = Vec::new();
        write_snapshot_to(&mut buf, &st, 1.5).unwrap();
        assert_eq!(buf.len(), 5 + 4 * 3 + 8 * 3 + 2 * 16 * g.len());
        let (back, m) = read_snapshot_from(buf.as_slice()).unwrap();
        assert_eq!(m, 1.5);
        assert_eq!(back.time, 12.25);
        assert_eq!(back.psi, st.psi);
        assert_eq!(back.pi, st.pi);
        assert_eq!(**back.grid(), *g);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = make_grid(1, 8, 4.0).unwrap();
        let st = random_state(&g, 1);
        let mut buf = Vec::new();
        write_snapshot_to(&mut buf, &st, 1.0).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot_from(bad.as_slice()), Err(Error::Snapshot(_))));
        assert!(matches!(
            read_snapshot_from(&buf[..buf.len() - 3]),
            Err(Error::Snapshot(_))
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(read_snapshot_from(long.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mfkg");
        let g = make_grid(1, 32, 8.0).unwrap();
        let st = random_state(&g, 2);
        write_snapshot(&path, &st, 1.0).unwrap();
        let (back, _) = read_snapshot(&path).unwrap();
        assert_eq!(back.psi, st.psi);
    }
}
