//! Flat binary container for latent volumes.
//!
//! Layout: magic `FYCT`, format version (u32 LE), then frames, channels,
//! height, width (each u32 LE), then the payload as f32 LE in the volume's
//! native order. Everything is little-endian; readers reject unknown
//! versions, truncated payloads, and non-finite samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{LatentVolume, VolumeShape};

const MAGIC: [u8; 4] = *b"FYCT";
const VERSION: u32 = 1;

/// Serialize a volume to any writer.
pub fn write_volume_to<W: Write>(mut w: W, volume: &LatentVolume) -> Result<()> {
    let shape = volume.shape();
    let dims = [shape.frames, shape.channels, shape.height, shape.width];
    for d in dims {
        if d > u32::MAX as usize {
            return Err(Error::Length(format!(
                "dimension {d} does not fit the container's 32-bit header"
            )));
        }
    }
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(volume.values().len() * 4);
    for v in volume.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Deserialize a volume from any reader.
pub fn read_volume_from<R: Read>(mut r: R) -> Result<LatentVolume> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("container too short for its magic bytes".into()))?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            magic, MAGIC
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version}, expected {VERSION}"
        )));
    }
    let frames = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    let shape = VolumeShape::new(frames, channels, height, width);
    shape.validate()?;
    let expected = shape.len();
    let mut payload = vec![0u8; expected * 4];
    r.read_exact(&mut payload).map_err(|_| {
        Error::Length(format!(
            "payload shorter than the {expected} samples promised by the header"
        ))
    })?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Length(
            "container has trailing bytes after the payload".into(),
        ));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    LatentVolume::from_values(shape, values)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("container too short for its header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Write a volume to a file path.
pub fn write_volume(path: &Path, volume: &LatentVolume) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_volume_to(&mut w, volume)?;
    w.flush()?;
    Ok(())
}

/// Read a volume from a file path.
pub fn read_volume(path: &Path) -> Result<LatentVolume> {
    let file = File::open(path)?;
    read_volume_from(BufReader::new(file))
}
