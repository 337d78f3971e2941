//! Trajectory files.
//!
//! CSV: header `t,x`, one row per sample, 17 significant digits.
//!
//! Binary (little endian): the 8-byte magic `MSDTRAJ1`, then `t0: f64`,
//! `tau: f64`, `n: u64`, then `n + 1` samples as `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::Trajectory;

pub const BINARY_MAGIC: &[u8; 8] = b"MSDTRAJ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    Binary,
}

impl TrajectoryFormat {
    /// `.bin` selects binary; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => TrajectoryFormat::Binary,
            _ => TrajectoryFormat::Csv,
        }
    }
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,x")?;
    for (j, x) in traj.values.iter().enumerate() {
        let t = traj.t0 + j as f64 * traj.tau;
        writeln!(out, "{t:.16e},{x:.16e}")?;
    }
    out.flush()
}

pub fn write_binary<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&traj.t0.to_le_bytes())?;
    out.write_all(&traj.tau.to_le_bytes())?;
    out.write_all(&(traj.steps() as u64).to_le_bytes())?;
    for x in &traj.values {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()
}

/// Writes in the format implied by the extension.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let out = BufWriter::new(file);
    match TrajectoryFormat::from_path(path) {
        TrajectoryFormat::Csv => write_csv(traj, out),
        TrajectoryFormat::Binary => write_binary(traj, out),
    }
    .map_err(|e| Error::io(path, e))
}

/// Reads either format, detected from the leading bytes.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(BINARY_MAGIC) {
        read_binary(reader, path)
    } else {
        read_csv(reader, path)
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_binary<R: Read>(mut r: R, path: &Path) -> Result<Trajectory> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
        Ok(word)
    };
    let magic = next(&mut r)?;
    if &magic != BINARY_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let t0 = f64::from_le_bytes(next(&mut r)?);
    let tau = f64::from_le_bytes(next(&mut r)?);
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let mut values = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        values.push(f64::from_le_bytes(next(&mut r)?));
    }
    Trajectory::new(t0, tau, values).map_err(|e| format_err(path, e.to_string()))
}

fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Trajectory> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    if header.trim() != "t,x" {
        return Err(format_err(path, format!("expected header 't,x', got '{header}'")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (t, x) = line
            .split_once(',')
            .ok_or_else(|| format_err(path, format!("line {}: expected two columns", i + 2)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))
        };
        times.push(parse(t)?);
        values.push(parse(x)?);
    }
    if values.len() < 2 {
        return Err(format_err(path, "need at least two samples"));
    }
    let n = values.len() - 1;
    let tau = (times[n] - times[0]) / n as f64;
    let tol = 1e-6 * tau.abs();
    for (j, t) in times.iter().enumerate() {
        if (t - (times[0] + j as f64 * tau)).abs() > tol.max(1e-12 * t.abs()) {
            return Err(format_err(path, format!("non-uniform time grid at row {}", j + 2)));
        }
    }
    Trajectory::new(times[0], tau, values).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let t = Trajectory::new(1.0, 0.5, vec![0.1, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "t,x\n1.0000000000000000e0,1.0000000000000001e-1\n1.5000000000000000e0,-2.0000000000000000e0\n"
        );
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_trajectory(&p), Err(Error::Format { .. })));
        std::fs::write(&p, "t,x\n0,1\n1,2\n5,3\n").unwrap();
        assert!(matches!(read_trajectory(&p), Err(Error::Format { .. })));
        let missing = dir.path().join("missing.csv");
        assert!(matches!(read_trajectory(&missing), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn round_trip(
            values in prop::collection::vec(-1e6f64..1e6, 2..50),
            t0 in -10.0f64..10.0,
            tau in 1e-5f64..1.0,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let t = Trajectory::new(t0, tau, values).unwrap();
            let bin = dir.path().join("x.bin");
            write_trajectory(&t, &bin).unwrap();
            prop_assert_eq!(read_trajectory(&bin).unwrap(), t.clone());
            let csv = dir.path().join("x.csv");
            write_trajectory(&t, &csv).unwrap();
            let back = read_trajectory(&csv).unwrap();
            prop_assert_eq!(&back.values, &t.values);
            prop_assert!((back.t0 - t.t0).abs() <= 1e-15 * t.t0.abs().max(1.0));
            prop_assert!((back.tau - t.tau).abs() <= 1e-9 * t.tau);
        }
    }
}
