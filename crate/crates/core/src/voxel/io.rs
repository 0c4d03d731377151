//! NNVX grid files: magic, u32 version, u32 half extent, f32 cube size,
//! then every label component as little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::VolumetricGrid;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NNVX";
const VERSION: u32 = 1;
/// Guards allocation when reading a corrupted header.
const MAX_HALF_EXTENT: u32 = 512;

fn bad(message: impl Into<String>) -> Error {
    Error::Format {
        kind: "grid",
        message: message.into(),
    }
}

pub fn write_grid(grid: &VolumetricGrid, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.half_extent() as u32).to_le_bytes())?;
    w.write_all(&grid.cube_size().to_le_bytes())?;
    let mut bytes = Vec::with_capacity(grid.labels().len() * 4);
    for v in grid.labels() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => bad("unexpected end of grid"),
        _ => e.into(),
    })
}

pub fn read_grid(mut r: impl Read) -> Result<VolumetricGrid> {
    let mut head = [0u8; 16];
    read_exact(&mut r, &mut head)?;
    if &head[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let half = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if half == 0 || half > MAX_HALF_EXTENT {
        return Err(bad(format!("implausible half extent {half}")));
    }
    let cube = f32::from_le_bytes(head[12..16].try_into().unwrap());
    let side = 2 * half as usize + 1;
    let mut bytes = vec![0u8; side * side * side * 3 * 4];
    read_exact(&mut r, &mut bytes)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes"));
    }
    let labels = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    VolumetricGrid::new(half as usize, cube, labels)
}

pub fn save_grid(grid: &VolumetricGrid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<VolumetricGrid> {
    read_grid(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VolumetricGrid {
        let mut labels = vec![0.0f32; 27 * 3];
        labels[13 * 3 + 1] = 1.0;
        labels[0] = -0.6;
        labels[2] = 0.8;
        VolumetricGrid::new(1, 0.125, labels).unwrap()
    }

    #[test]
    fn round_trip() {
        let g = sample();
        let mut bytes = Vec::new();
        write_grid(&g, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 27 * 12);
        assert_eq!(&bytes[..4], b"NNVX");
        let back = read_grid(bytes.as_slice()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.occupied(), 2);
    }

    #[test]
    fn corrupt_files() {
        let mut bytes = Vec::new();
        write_grid(&sample(), &mut bytes).unwrap();
        assert!(read_grid(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_grid(extra.as_slice()).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(read_grid(magic.as_slice()).is_err());
        let mut version = bytes;
        version[4] = 2;
        assert!(read_grid(version.as_slice()).is_err());
    }
}
