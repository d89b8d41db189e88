//! CSV export and the compact binary dump for field trajectories.
//!
//! Dump layout: a 32-byte header (`b"PHOM"`, format version, dimension `n`,
//! nodes per axis, record count, record length, 8 reserved bytes) followed by
//! one row per record: the attached time, then the node values, all as
//! little-endian `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::grid::{FastField, TorusGrid};

pub const DUMP_MAGIC: &[u8; 4] = b"PHOM";
pub const DUMP_VERSION: u32 = 1;

/// Header of a binary dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub n: u32,
    pub per_axis: u32,
    pub records: u32,
    pub record_len: u32,
}

pub fn write_dump<W: Write>(mut w: W, n: usize, per_axis: usize, rows: &[(f64, &[f64])]) -> Result<()> {
    let len = rows.first().map_or(0, |r| r.1.len());
    if rows.iter().any(|r| r.1.len() != len) {
        return Err(Error::solver("dump", "records have different lengths"));
    }
    let mut head = [0u8; 32];
    head[..4].copy_from_slice(DUMP_MAGIC);
    head[4..8].copy_from_slice(&DUMP_VERSION.to_le_bytes());
    head[8..12].copy_from_slice(&(n as u32).to_le_bytes());
    head[12..16].copy_from_slice(&(per_axis as u32).to_le_bytes());
    head[16..20].copy_from_slice(&(rows.len() as u32).to_le_bytes());
    head[20..24].copy_from_slice(&(len as u32).to_le_bytes());
    w.write_all(&head)?;
    let mut buf = Vec::with_capacity(8 * (len + 1));
    for (t, vals) in rows {
        buf.clear();
        buf.extend_from_slice(&t.to_le_bytes());
        for v in vals.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a dump back as `(header, [(time, values)])`.
pub fn read_dump<R: Read>(mut r: R) -> Result<(DumpHeader, Vec<(f64, Vec<f64>)>)> {
    let mut head = [0u8; 32];
    r.read_exact(&mut head)?;
    if &head[..4] != DUMP_MAGIC {
        return Err(Error::solver("dump", "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    if word(4) != DUMP_VERSION {
        return Err(Error::solver("dump", format!("unsupported version {}", word(4))));
    }
    let h = DumpHeader { n: word(8), per_axis: word(12), records: word(16), record_len: word(20) };
    let mut rows = Vec::with_capacity(h.records as usize);
    let mut b = [0u8; 8];
    for _ in 0..h.records {
        r.read_exact(&mut b)?;
        let t = f64::from_le_bytes(b);
        let mut vals = Vec::with_capacity(h.record_len as usize);
        for _ in 0..h.record_len {
            r.read_exact(&mut b)?;
            vals.push(f64::from_le_bytes(b));
        }
        rows.push((t, vals));
    }
    Ok((h, rows))
}

/// Dumps a fast trajectory.
pub fn dump_fast<W: Write>(w: W, grid: &TorusGrid, traj: &[FastField]) -> Result<()> {
    let rows: Vec<(f64, &[f64])> = traj.iter().map(|f| (f.s, f.values.as_slice())).collect();
    write_dump(w, grid.n, grid.ny, &rows)
}

/// CSV with columns `s, y1[, y2], value`.
pub fn fast_csv<W: Write>(mut w: W, grid: &TorusGrid, traj: &[FastField]) -> Result<()> {
    if grid.n == 1 {
        writeln!(w, "s,y1,value")?;
    } else {
        writeln!(w, "s,y1,y2,value")?;
    }
    for f in traj {
        for (node, v) in f.values.iter().enumerate() {
            let c = grid.coords(node);
            if grid.n == 1 {
                writeln!(w, "{},{},{}", f.s, c[0], v)?;
            } else {
                writeln!(w, "{},{},{},{}", f.s, c[0], c[1], v)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let grid = TorusGrid::new(1, 4, 8).unwrap();
        let traj = vec![
            FastField { s: 0.0, values: vec![1.0, 2.0, 3.0, 4.0] },
            FastField { s: 0.5, values: vec![-1.0, 0.25, 1e-300, 7.0] },
        ];
        let mut buf = Vec::new();
        dump_fast(&mut buf, &grid, &traj).unwrap();
        assert_eq!(buf.len(), 32 + 2 * 5 * 8);
        let (h, rows) = read_dump(buf.as_slice()).unwrap();
        assert_eq!(h, DumpHeader { n: 1, per_axis: 4, records: 2, record_len: 4 });
        assert_eq!(rows[1].0, 0.5);
        assert_eq!(rows[1].1, traj[1].values);
    }

    #[test]
    fn csv_has_header() {
        let grid = TorusGrid::new(1, 4, 8).unwrap();
        let mut buf = Vec::new();
        fast_csv(&mut buf, &grid, &[FastField { s: 0.0, values: vec![0.0; 4] }]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("s,y1,value\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
