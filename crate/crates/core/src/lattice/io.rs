//! Field and region persistence.
//!
//! Binary layout (all little-endian): the magic bytes `PFL1`, `dim` as
//! `u32`, one `u32` point count per axis, the half-width `L` as `f64`, then
//! `N^dim` node values as `f64` in row-major order. The CSV alternative has
//! one node per line: coordinates followed by the value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Grid, GridField, Region};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFL1";

pub fn encode_field(u: &GridField) -> Result<Vec<u8>> {
    if !u.is_real() {
        return Err(Error::Format("only real-flagged fields can be serialized".into()));
    }
    let grid = u.grid();
    let mut out = Vec::with_capacity(16 + 8 * u.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.extent().to_le_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<GridField> {
    let mut cursor = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(Error::Format("truncated field record".into()));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    if take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let dim = read_u32(take(4)?);
    if !(dim == 1 || dim == 2) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let mut counts = Vec::with_capacity(dim);
    for _ in 0..dim {
        counts.push(read_u32(take(4)?));
    }
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::Format("anisotropic point counts are not supported".into()));
    }
    let extent = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let grid = Grid::new(dim, extent, counts[0])?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if !cursor.is_empty() {
        return Err(Error::Format("trailing bytes after field record".into()));
    }
    GridField::from_values(grid, values)
}

pub fn field_to_csv(u: &GridField) -> String {
    let grid = u.grid();
    let mut out = String::new();
    for (i, v) in u.values().iter().enumerate() {
        let [x, y] = grid.node_coords(i);
        if grid.dim() == 1 {
            writeln!(out, "{x},{v}").unwrap();
        } else {
            writeln!(out, "{x},{y},{v}").unwrap();
        }
    }
    out
}

/// Parses the CSV form back onto `grid`; rows must appear in node order.
pub fn field_from_csv(grid: Grid, text: &str) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let last = line
            .rsplit(',')
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: empty row", line_no + 1)))?;
        let v: f64 = last
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("line {}: {e}", line_no + 1)))?;
        values.push(v);
    }
    GridField::from_values(grid, values)
}

/// One masked node per line: flat index, then coordinates.
pub fn region_to_csv(r: &Region) -> String {
    let grid = r.grid();
    let mut out = String::new();
    for i in r.nodes() {
        let [x, y] = grid.node_coords(i);
        if grid.dim() == 1 {
            writeln!(out, "{i},{x}").unwrap();
        } else {
            writeln!(out, "{i},{x},{y}").unwrap();
        }
    }
    out
}

/// Writes `bytes` to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_field_binary(u: &GridField, path: &Path) -> Result<()> {
    write_atomic(path, &encode_field(u)?)
}

pub fn read_field_binary(path: &Path) -> Result<GridField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{define_region, make_grid, Shape};
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let g = make_grid(2, 1.5, 8).unwrap();
        let u = GridField::from_fn(g, |x, y| x - 2.0 * y);
        let bytes = encode_field(&u).unwrap();
        assert_eq!(&bytes[..4], b"PFL1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &8u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 8 * 64);
        assert_eq!(decode_field(&bytes).unwrap(), u);
    }

    #[test]
    fn rejects_corrupt_records() {
        let g = make_grid(1, 1.0, 8).unwrap();
        let bytes = encode_field(&GridField::zeros(g)).unwrap();
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
        let wave = GridField::plane_wave(g, &[1]);
        assert!(encode_field(&wave).is_err());
    }

    #[test]
    fn region_csv_lists_masked_nodes() {
        let g = make_grid(1, 2.0, 8).unwrap();
        let omega = define_region(g, &Shape::interval(-1.0, 1.0)).unwrap();
        let csv = region_to_csv(&omega);
        // nodes at -0.5, 0, 0.5
        assert_eq!(csv, "3,-0.5\n4,0\n5,0.5\n");
    }

    proptest! {
        #[test]
        fn binary_and_csv_round_trip(values in prop::collection::vec(-1e6f64..1e6, 16)) {
            let g = make_grid(1, 0.75, 16).unwrap();
            let u = GridField::from_values(g, values).unwrap();
            prop_assert_eq!(&decode_field(&encode_field(&u).unwrap()).unwrap(), &u);
            prop_assert_eq!(&field_from_csv(g, &field_to_csv(&u)).unwrap(), &u);
        }
    }
}
