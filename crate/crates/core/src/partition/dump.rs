//! Byte-per-cell raster dumps: a text header `nx ny r`, a newline, then
//! `nx * ny` bytes in scanline order. Net ids take 0..=250; 251 is GAP,
//! 252 OUTSIDE, 253 KEEPOUT and 254 an empty seed cell.

use thiserror::Error;

use crate::grid::{Grid, NetId, Seed, Zone};

pub const MAX_DUMP_NET: u32 = 250;
const GAP: u8 = 251;
const OUTSIDE: u8 = 252;
const KEEPOUT: u8 = 253;
const EMPTY: u8 = 254;

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("net {0} does not fit in a dump byte (max {MAX_DUMP_NET})")]
    NetTooLarge(NetId),
    #[error("bad dump header: {0}")]
    Header(String),
    #[error("dump body has {got} cells, header says {want}")]
    Length { got: usize, want: usize },
    #[error("byte {value} at cell {index} is not a valid label")]
    Label { index: usize, value: u8 },
}

fn net_byte(n: NetId) -> Result<u8, DumpError> {
    if n.0 <= MAX_DUMP_NET {
        Ok(n.0 as u8)
    } else {
        Err(DumpError::NetTooLarge(n))
    }
}

fn write<T: Copy>(
    grid: &Grid<T>,
    resolution: f64,
    byte: impl Fn(T) -> Result<u8, DumpError>,
) -> Result<Vec<u8>, DumpError> {
    let mut out = format!("{} {} {}\n", grid.nx(), grid.ny(), resolution).into_bytes();
    out.reserve(grid.len());
    for &c in grid.cells() {
        out.push(byte(c)?);
    }
    Ok(out)
}

fn read<T: Copy>(
    bytes: &[u8],
    label: impl Fn(u8) -> Option<T>,
) -> Result<(f64, Grid<T>), DumpError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DumpError::Header("missing newline".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| DumpError::Header(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [nx, ny, r] = fields.as_slice() else {
        return Err(DumpError::Header(format!(
            "expected `nx ny r`, got `{header}`"
        )));
    };
    let nx: usize = nx
        .parse()
        .map_err(|_| DumpError::Header(format!("bad nx `{nx}`")))?;
    let ny: usize = ny
        .parse()
        .map_err(|_| DumpError::Header(format!("bad ny `{ny}`")))?;
    let r: f64 = r
        .parse()
        .map_err(|_| DumpError::Header(format!("bad resolution `{r}`")))?;
    if !(r > 0.0) {
        return Err(DumpError::Header(format!(
            "resolution must be positive, got {r}"
        )));
    }
    let body = &bytes[nl + 1..];
    if body.len() != nx * ny {
        return Err(DumpError::Length {
            got: body.len(),
            want: nx * ny,
        });
    }
    let cells = body
        .iter()
        .enumerate()
        .map(|(index, &value)| label(value).ok_or(DumpError::Label { index, value }))
        .collect::<Result<Vec<T>, _>>()?;
    Ok((r, Grid::from_cells(nx, ny, cells)))
}

pub fn write_zone_dump(cells: &Grid<Zone>, resolution: f64) -> Result<Vec<u8>, DumpError> {
    write(cells, resolution, |z| match z {
        Zone::Net(n) => net_byte(n),
        Zone::Gap => Ok(GAP),
        Zone::Outside => Ok(OUTSIDE),
    })
}

/// Returns the resolution and the labels.
pub fn read_zone_dump(bytes: &[u8]) -> Result<(f64, Grid<Zone>), DumpError> {
    read(bytes, |b| match b {
        GAP => Some(Zone::Gap),
        OUTSIDE => Some(Zone::Outside),
        n if n as u32 <= MAX_DUMP_NET => Some(Zone::Net(NetId(n as u32))),
        _ => None,
    })
}

pub fn write_seed_dump(cells: &Grid<Seed>, resolution: f64) -> Result<Vec<u8>, DumpError> {
    write(cells, resolution, |s| match s {
        Seed::Net(n) => net_byte(n),
        Seed::Keepout => Ok(KEEPOUT),
        Seed::Empty => Ok(EMPTY),
    })
}

pub fn read_seed_dump(bytes: &[u8]) -> Result<(f64, Grid<Seed>), DumpError> {
    read(bytes, |b| match b {
        KEEPOUT => Some(Seed::Keepout),
        EMPTY => Some(Seed::Empty),
        n if n as u32 <= MAX_DUMP_NET => Some(Seed::Net(NetId(n as u32))),
        _ => None,
    })
}
