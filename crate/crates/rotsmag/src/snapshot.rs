//! Field snapshots: one file per component, a text header line followed by
//! little-endian `f64` values in storage order (x fastest).

use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};

use rotsmag_core::{Grid, VectorField};

fn header(grid: &Grid, tag: &str, count: usize) -> String {
    let c = grid.cells();
    let h = grid.spacing();
    format!("rotsmag-field dims={} cells={},{},{} spacing={},{},{} component={tag} count={count}\n", grid.dims(), c[0], c[1], c[2], h[0], h[1], h[2])
}

pub fn component_path(prefix: &Path, a: usize) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("_u{a}.bin"));
    PathBuf::from(s)
}

/// Write `u` as `<prefix>_u<a>.bin`, returning the paths written.
pub fn write_field(prefix: &Path, u: &VectorField) -> io::Result<Vec<PathBuf>> {
    let g = u.grid();
    (0..g.dims())
        .map(|a| {
            let path = component_path(prefix, a);
            let data = u.component(a);
            let mut buf = header(g, &format!("u{a}"), data.len()).into_bytes();
            buf.reserve(8 * data.len());
            for v in data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            fs::File::create(&path)?.write_all(&buf)?;
            Ok(path)
        })
        .collect()
}

fn bad(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

/// Read a field written by [`write_field`] onto `grid`; the header must match.
pub fn read_field(prefix: &Path, grid: &Grid) -> io::Result<VectorField> {
    let mut comps = Vec::with_capacity(grid.dims());
    for a in 0..grid.dims() {
        let path = component_path(prefix, a);
        let mut r = io::BufReader::new(fs::File::open(&path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let n = grid.face_shape(a).len();
        let expected = header(grid, &format!("u{a}"), n);
        if !same_header(&line, &expected) {
            return Err(bad(format!("{}: header '{}' does not match the configured grid ('{}')", path.display(), line.trim_end(), expected.trim_end())));
        }
        let mut bytes = Vec::with_capacity(8 * n);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(bad(format!("{}: expected {} values, found {} bytes", path.display(), n, bytes.len())));
        }
        comps.push(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
    }
    VectorField::from_components(grid, comps).map_err(|e| bad(e.to_string()))
}

/// Headers agree field by field, spacings to 1e-12 relative.
fn same_header(a: &str, b: &str) -> bool {
    let fa: Vec<&str> = a.split_whitespace().collect();
    let fb: Vec<&str> = b.split_whitespace().collect();
    fa.len() == fb.len()
        && fa.iter().zip(&fb).all(|(x, y)| match (x.strip_prefix("spacing="), y.strip_prefix("spacing=")) {
            (Some(x), Some(y)) => {
                let px: Vec<f64> = x.split(',').filter_map(|v| v.parse().ok()).collect();
                let py: Vec<f64> = y.split(',').filter_map(|v| v.parse().ok()).collect();
                px.len() == 3 && py.len() == 3 && px.iter().zip(&py).all(|(u, v)| (u - v).abs() <= 1e-12 * v.abs())
            }
            _ => x == y,
        })
}
