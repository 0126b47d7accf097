//! `EAF1` field files: magic `EAF1`, little-endian `u32 N1`, `u32 N2`,
//! `f64 L`, then `N1 * N2` little-endian `f64` nodal values (x1 outer).

use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::{make_grid, Grid, GridError, ScalarField};

const MAGIC: &[u8; 4] = b"EAF1";
const HEADER: usize = 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum Eaf1Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an EAF1 file (bad magic)")]
    BadMagic,
    #[error("truncated EAF1 file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid grid in header: {0}")]
    Grid(#[from] GridError),
}

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n1() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n2() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a field. When `grid` is given and matches the header it is reused,
/// otherwise a fresh grid is built from the header.
pub fn decode(bytes: &[u8], grid: Option<&Arc<Grid>>) -> Result<ScalarField, Eaf1Error> {
    if bytes.len() < HEADER {
        return Err(Eaf1Error::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Eaf1Error::BadMagic);
    }
    let n1 = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n2 = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let length = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = HEADER + 8 * n1 * n2;
    if bytes.len() != expected {
        return Err(Eaf1Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let grid = match grid {
        Some(g) if g.n1() == n1 && g.n2() == n2 && g.length() == length => g.clone(),
        _ => make_grid(length, n1, n2)?,
    };
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarField::from_values(&grid, values)?)
}

pub fn write_eaf1(path: impl AsRef<Path>, field: &ScalarField) -> Result<(), Eaf1Error> {
    fs::write(path, encode(field))?;
    Ok(())
}

pub fn read_eaf1(path: impl AsRef<Path>, grid: Option<&Arc<Grid>>) -> Result<ScalarField, Eaf1Error> {
    let bytes = fs::read(path)?;
    decode(&bytes, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = make_grid(2.5, 4, 8).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        let b = encode(&f);
        assert_eq!(&b[..4], b"EAF1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(b[12..20].try_into().unwrap()), 2.5);
        assert_eq!(b.len(), 20 + 8 * 32);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(matches!(decode(b"EAF", None), Err(Eaf1Error::Truncated { .. })));
        let g = make_grid(1.0, 4, 8).unwrap();
        let mut b = encode(&ScalarField::zeros(&g));
        b[0] = b'X';
        assert!(matches!(decode(&b, None), Err(Eaf1Error::BadMagic)));
        let mut b = encode(&ScalarField::zeros(&g));
        b.pop();
        assert!(matches!(decode(&b, None), Err(Eaf1Error::Truncated { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in proptest::collection::vec(-1e6f64..1e6, 32)) {
            let g = make_grid(1.75, 4, 8).unwrap();
            let f = ScalarField::from_values(&g, vals.clone()).unwrap();
            let back = decode(&encode(&f), Some(&g)).unwrap();
            prop_assert!(Arc::ptr_eq(back.grid(), &g));
            for (a, b) in vals.iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
