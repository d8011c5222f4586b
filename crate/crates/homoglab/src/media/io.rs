//! Flat binary container for lattice fields: a fixed header followed by
//! row-major little-endian f64 payload. Used by the CLI field cache.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{ScalarField, TorusGrid};

const MAGIC: &[u8; 8] = b"HOMOGFLD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar = 0,
    VectorComponent = 1,
    CoefficientEntry = 2,
}

impl FieldKind {
    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(FieldKind::Scalar),
            1 => Ok(FieldKind::VectorComponent),
            2 => Ok(FieldKind::CoefficientEntry),
            other => Err(Error::ParseError(format!("unknown field kind tag {other}"))),
        }
    }
}

pub fn write_scalar_field(w: &mut impl Write, field: &ScalarField, kind: FieldKind) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.side() as u64).to_le_bytes())?;
    w.write_all(&grid.spacing().to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar_field(r: &mut impl Read) -> Result<(ScalarField, FieldKind)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ParseError("bad field container magic".into()));
    }
    let mut buf4 = [0u8; 4];
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(Error::ParseError(format!(
            "unsupported container version {version}"
        )));
    }
    r.read_exact(&mut buf4)?;
    let d = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf8)?;
    let l = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let h = f64::from_le_bytes(buf8);
    r.read_exact(&mut buf4)?;
    let kind = FieldKind::from_tag(u32::from_le_bytes(buf4))?;
    let grid = TorusGrid::new(d, l, h)?;
    let mut data = vec![0.0f64; grid.cells()];
    for v in data.iter_mut() {
        r.read_exact(&mut buf8)?;
        *v = f64::from_le_bytes(buf8);
    }
    Ok((ScalarField::from_vec(grid, data), kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn container_roundtrips(seed in 0u64..1000, l_exp in 2u32..5, d in 1usize..4) {
            let l = 1usize << l_exp;
            let grid = make_grid(d, l, 0.5).unwrap();
            let mut state = seed;
            let field = ScalarField::from_fn(grid, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let mut buf = Vec::new();
            write_scalar_field(&mut buf, &field, FieldKind::Scalar).unwrap();
            let (back, kind) = read_scalar_field(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(kind, FieldKind::Scalar);
            prop_assert_eq!(back.grid(), field.grid());
            prop_assert_eq!(back.values(), field.values());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut buf = vec![0u8; 64];
        buf[..8].copy_from_slice(b"NOTAFLDX");
        assert!(read_scalar_field(&mut buf.as_slice()).is_err());
    }
}
