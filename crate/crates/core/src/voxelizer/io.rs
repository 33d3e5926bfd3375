//! Raw little-endian volumes with a JSON sidecar (`<name>.json` next to
//! `<name>.raw`).

use std::path::{Path, PathBuf};

use super::{Volume, VolumeHeader};
use crate::{fsio, Error, Result};

pub trait Voxel: Copy + Default + Send + Sync {
    const DTYPE: &'static str;
    const BYTES: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

impl Voxel for u16 {
    const DTYPE: &'static str = "u16";
    const BYTES: usize = 2;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        u16::from_le_bytes([bytes[0], bytes[1]])
    }
}

impl Voxel for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn write_header(path: &Path, header: &VolumeHeader) -> Result<()> {
    let text = serde_json::to_string_pretty(header).map_err(|e| Error::parse(path.display(), e))?;
    fsio::write_atomic(path, format!("{text}\n").as_bytes())
}

pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let text = fsio::read_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display(), e))
}

/// Write `raw` and its sidecar; returns the sidecar path.
pub fn write_volume<T: Voxel>(raw: &Path, volume: &Volume<T>) -> Result<PathBuf> {
    let mut bytes = Vec::with_capacity(volume.data.len() * T::BYTES);
    for &v in &volume.data {
        v.put(&mut bytes);
    }
    fsio::write_atomic(raw, &bytes)?;
    let side = sidecar_path(raw);
    write_header(
        &side,
        &VolumeHeader::new(&volume.grid, T::DTYPE, volume.label_map.clone()),
    )?;
    Ok(side)
}

pub fn read_volume<T: Voxel>(raw: &Path) -> Result<Volume<T>> {
    let side = sidecar_path(raw);
    let header = read_header(&side)?;
    if header.dtype != T::DTYPE {
        return Err(Error::parse(
            side.display(),
            format!("dtype is {:?}, expected {:?}", header.dtype, T::DTYPE),
        ));
    }
    let bytes = fsio::read(raw)?;
    let expected = header.n_voxels() as usize * T::BYTES;
    if bytes.len() != expected {
        return Err(Error::parse(
            raw.display(),
            format!("{} bytes, header dims imply {expected}", bytes.len()),
        ));
    }
    Ok(Volume {
        grid: header.grid(),
        label_map: header.label_map,
        data: bytes.chunks_exact(T::BYTES).map(T::get).collect(),
    })
}
