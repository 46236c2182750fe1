//! Binary field snapshots ("KSF1") and slab checkpoints.
//!
//! A snapshot file is the magic bytes `KSF1`, a little-endian u64 grid size
//! n, then f64 box side l, time t, relaxation time tau, decay rate gamma,
//! then n x n row-major f64 samples of u followed by the same for v. A slab
//! checkpoint is one snapshot per time node plus a plain-text index, one
//! line per node (`j t_j filename`), headed by a comment line carrying the
//! time-grid shape. Everything is written eagerly and read defensively:
//! any structural problem reports the offending path.

use crate::error::{KsError, Result};
use crate::evolution::EvolutionState;
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::mild::{SlabStart, TimeGrid, TimeSlab};
use crate::params::Params;
use ndarray::Array2;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"KSF1";

/// A decoded snapshot file.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: Grid2D,
    pub t: f64,
    pub tau: f64,
    pub gamma: f64,
    pub u: SpectralField,
    pub v: SpectralField,
}

impl Snapshot {
    /// Reassembles the full evolution state carried by the file.
    pub fn into_state(self) -> Result<EvolutionState> {
        let params = Params::new(self.tau, self.gamma)?;
        EvolutionState::new(self.u, self.v, self.t, params)
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> KsError {
    KsError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn write_array(w: &mut impl Write, a: &Array2<f64>) -> std::io::Result<()> {
    for &x in a.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Writes one snapshot. The parent directory must exist.
pub fn write_snapshot(
    path: &Path,
    u: &SpectralField,
    v: &SpectralField,
    t: f64,
    tau: f64,
    gamma: f64,
) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(KsError::GridMismatch {
            expected: u.grid(),
            found: v.grid(),
        });
    }
    let grid = u.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    for x in [grid.l(), t, tau, gamma] {
        w.write_all(&x.to_le_bytes())?;
    }
    write_array(&mut w, u.values())?;
    write_array(&mut w, v.values())?;
    w.flush()?;
    Ok(())
}

/// Snapshot of a full evolution state.
pub fn write_state(path: &Path, state: &EvolutionState) -> Result<()> {
    write_snapshot(
        path,
        &state.u,
        &state.v,
        state.t,
        state.params.tau,
        state.params.gamma,
    )
}

fn read_f64(r: &mut impl Read, path: &Path, what: &str) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| format_err(path, format!("truncated while reading {what}")))?;
    Ok(f64::from_le_bytes(buf))
}

fn read_array(r: &mut impl Read, n: usize, path: &Path, what: &str) -> Result<Array2<f64>> {
    let mut data = vec![0.0f64; n * n];
    let mut buf = vec![0u8; n * n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| format_err(path, format!("truncated inside the {what} block")))?;
    for (x, chunk) in data.iter_mut().zip(buf.chunks_exact(8)) {
        *x = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Array2::from_shape_vec((n, n), data)
        .map_err(|e| format_err(path, format!("bad {what} block shape: {e}")))
}

/// Reads and validates one snapshot.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| format_err(path, "file too short for the magic bytes"))?;
    if &magic != MAGIC {
        return Err(format_err(path, "bad magic bytes (not a KSF1 snapshot)"));
    }
    let mut nbuf = [0u8; 8];
    r.read_exact(&mut nbuf)
        .map_err(|_| format_err(path, "truncated while reading the grid size"))?;
    let n = u64::from_le_bytes(nbuf);
    if n > 1 << 16 {
        return Err(format_err(path, format!("implausible grid size n = {n}")));
    }
    let n = n as usize;
    let l = read_f64(&mut r, path, "the box side")?;
    let t = read_f64(&mut r, path, "the time stamp")?;
    let tau = read_f64(&mut r, path, "the relaxation time")?;
    let gamma = read_f64(&mut r, path, "the decay rate")?;
    let grid =
        Grid2D::new(n, l).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if !t.is_finite() {
        return Err(format_err(path, format!("non-finite time stamp {t}")));
    }
    let u_vals = read_array(&mut r, n, path, "u")?;
    let v_vals = read_array(&mut r, n, path, "v")?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(format_err(path, "trailing bytes after the v block"));
    }
    let u = SpectralField::from_values(grid, u_vals)
        .map_err(|e| format_err(path, format!("u block: {e}")))?;
    let v = SpectralField::from_values(grid, v_vals)
        .map_err(|e| format_err(path, format!("v block: {e}")))?;
    Ok(Snapshot {
        grid,
        t,
        tau,
        gamma,
        u,
        v,
    })
}

fn node_filename(stem: &str, j: usize) -> String {
    format!("{stem}_{j:04}.ksf")
}

/// Writes a slab as one snapshot per node plus the index file
/// `<stem>.index`, returning the index path. The start value (when it is a
/// field; a measure start stores its realization) goes to node 0; the
/// chemical slot of every snapshot is zero, since a Duhamel trajectory
/// carries only the density.
pub fn write_slab_checkpoint(
    dir: &Path,
    stem: &str,
    slab: &TimeSlab,
    params: &Params,
) -> Result<PathBuf> {
    let grid = slab.spatial();
    let tgrid = slab.tgrid();
    let zero = SpectralField::zero(grid);
    let start_field = match slab.start() {
        SlabStart::Measure { realized, .. } => Some(realized),
        SlabStart::Field(f) => Some(f),
        SlabStart::Singular => None,
    };
    let index_path = dir.join(format!("{stem}.index"));
    let mut index = BufWriter::new(File::create(&index_path)?);
    writeln!(
        index,
        "# slab horizon={} n_t={} kappa={} tau={} gamma={} start={}",
        tgrid.horizon(),
        tgrid.len(),
        tgrid.kappa(),
        params.tau,
        params.gamma,
        if start_field.is_some() { "field" } else { "singular" },
    )?;
    if let Some(f) = start_field {
        let name = node_filename(stem, 0);
        write_snapshot(&dir.join(&name), f, &zero, 0.0, params.tau, params.gamma)?;
        writeln!(index, "0 0 {name}")?;
    }
    for j in 1..=tgrid.len() {
        let name = node_filename(stem, j);
        let t = tgrid.node(j);
        write_snapshot(
            &dir.join(&name),
            slab.field(j)?,
            &zero,
            t,
            params.tau,
            params.gamma,
        )?;
        writeln!(index, "{j} {t} {name}")?;
    }
    index.flush()?;
    Ok(index_path)
}

fn parse_header_kv(line: &str, key: &str, path: &Path) -> Result<f64> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format_err(path, format!("index header lacks a numeric `{key}=`")))
}

/// Reads a slab checkpoint back from its index file. A stored start field
/// comes back as [`SlabStart::Field`]; an absent one as
/// [`SlabStart::Singular`].
pub fn read_slab_checkpoint(index_path: &Path) -> Result<(TimeSlab, Params)> {
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let file = BufReader::new(File::open(index_path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(index_path, "empty index file"))??;
    if !header.starts_with("# slab ") {
        return Err(format_err(index_path, "missing `# slab` header line"));
    }
    let horizon = parse_header_kv(&header, "horizon", index_path)?;
    let n_t = parse_header_kv(&header, "n_t", index_path)? as usize;
    let kappa = parse_header_kv(&header, "kappa", index_path)?;
    let tau = parse_header_kv(&header, "tau", index_path)?;
    let gamma = parse_header_kv(&header, "gamma", index_path)?;
    let tgrid = TimeGrid::new(horizon, n_t, kappa)?;
    let params = Params::new(tau, gamma)?;

    let mut start = SlabStart::Singular;
    let mut fields: Vec<Option<SpectralField>> = vec![None; n_t];
    let mut grid: Option<Grid2D> = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(j), Some(t), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format_err(
                index_path,
                format!("malformed index line: `{line}`"),
            ));
        };
        let j: usize = j
            .parse()
            .map_err(|_| format_err(index_path, format!("bad node number in `{line}`")))?;
        let t: f64 = t
            .parse()
            .map_err(|_| format_err(index_path, format!("bad node time in `{line}`")))?;
        let snap_path = dir.join(name);
        let snap = read_snapshot(&snap_path)?;
        let expected = tgrid.node(j.min(n_t));
        if j > n_t {
            return Err(format_err(
                index_path,
                format!("node {j} outside the {n_t}-node grid"),
            ));
        }
        if (snap.t - expected).abs() > 1e-9 * (1.0 + expected)
            || (t - expected).abs() > 1e-9 * (1.0 + expected)
        {
            return Err(format_err(
                &snap_path,
                format!("time stamp {} disagrees with node {j} at t = {expected}", snap.t),
            ));
        }
        if let Some(g) = grid {
            if snap.grid != g {
                return Err(format_err(&snap_path, "spatial grid differs between nodes"));
            }
        } else {
            grid = Some(snap.grid);
        }
        if j == 0 {
            start = SlabStart::Field(snap.u);
        } else {
            fields[j - 1] = Some(snap.u);
        }
    }
    let grid = grid.ok_or_else(|| format_err(index_path, "index lists no nodes"))?;
    let fields = fields
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            f.ok_or_else(|| format_err(index_path, format!("node {} missing", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((TimeSlab::from_fields(grid, tgrid, start, fields)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{gauss_kernel, lp_norm};
    use crate::measure::MollifiedMeasure;
    use approx::assert_relative_eq;

    fn sample_state() -> EvolutionState {
        let grid = Grid2D::new(32, 12.0).unwrap();
        let u = gauss_kernel(grid, 2.0, (0.5, -1.0), 0.8).unwrap();
        let v = gauss_kernel(grid, 0.3, (0.0, 0.0), 1.5).unwrap();
        EvolutionState::new(u, v, 0.75, Params::new(3.0, 0.25).unwrap()).unwrap()
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ksf");
        let state = sample_state();
        write_state(&path, &state).unwrap();
        let snap = read_snapshot(&path).unwrap();
        assert_eq!(snap.grid, state.grid());
        assert_eq!(snap.t, 0.75);
        assert_eq!(snap.tau, 3.0);
        assert_eq!(snap.gamma, 0.25);
        assert_eq!(snap.u.values(), state.u.values());
        assert_eq!(snap.v.values(), state.v.values());
        let back = snap.into_state().unwrap();
        assert_relative_eq!(back.t, state.t);
    }

    #[test]
    fn corrupt_magic_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.ksf");
        let state = sample_state();
        write_state(&path, &state).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken.ksf"), "{msg}");
        assert!(msg.contains("magic"), "{msg}");
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.ksf");
        write_state(&path, &sample_state()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(read_snapshot(&path)
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(read_snapshot(&path)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn non_finite_samples_are_rejected_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.ksf");
        write_state(&path, &sample_state()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let header = 4 + 8 + 4 * 8;
        bytes[header..header + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let msg = read_snapshot(&path).unwrap_err().to_string();
        assert!(msg.contains("nan.ksf"), "{msg}");
    }

    #[test]
    fn slab_checkpoint_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(32, 15.0).unwrap();
        let tgrid = TimeGrid::new(1.0, 6, 2.0).unwrap();
        let u0 = MollifiedMeasure::atom(1.5, 1.0);
        let slab = TimeSlab::heat_from_measure(&u0, grid, tgrid).unwrap();
        let params = Params::new(2.0, 0.1).unwrap();
        let index = write_slab_checkpoint(dir.path(), "heat", &slab, &params).unwrap();
        let (back, back_params) = read_slab_checkpoint(&index).unwrap();
        assert_eq!(back_params.tau, 2.0);
        assert_eq!(back.tgrid().len(), 6);
        for j in 1..=6 {
            assert_eq!(
                back.field(j).unwrap().values(),
                slab.field(j).unwrap().values()
            );
        }
        // the measure start comes back as its realized field
        match back.start() {
            SlabStart::Field(f) => {
                let d = crate::field::combine(
                    1.0,
                    f,
                    -1.0,
                    match slab.start() {
                        SlabStart::Measure { realized, .. } => realized,
                        _ => unreachable!(),
                    },
                )
                .unwrap();
                assert_eq!(lp_norm(&d, f64::INFINITY).unwrap(), 0.0);
            }
            other => panic!("expected a field start, got {other:?}"),
        }
    }

    #[test]
    fn missing_node_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(32, 15.0).unwrap();
        let tgrid = TimeGrid::new(0.5, 4, 1.5).unwrap();
        let u0 = MollifiedMeasure::atom(1.0, 1.0);
        let slab = TimeSlab::heat_from_measure(&u0, grid, tgrid).unwrap();
        let params = Params::new(1.0, 0.0).unwrap();
        let index = write_slab_checkpoint(dir.path(), "gap", &slab, &params).unwrap();
        std::fs::remove_file(dir.path().join("gap_0002.ksf")).unwrap();
        assert!(read_slab_checkpoint(&index).is_err());
    }
}
