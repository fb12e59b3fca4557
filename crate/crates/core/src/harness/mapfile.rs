use std::path::Path;

use crate::error::{Error, Result};
use crate::slavc::LocalizationMap;

pub const MAP_MAGIC: &[u8; 4] = b"VSLM";
pub const MAP_VERSION: u8 = 1;
/// Magic, version byte and two u32 extents.
pub const MAP_HEADER_LEN: usize = 13;
pub const MAP_EXTENSION: &str = "vslm";

/// Serializes `map` as little-endian f32 values, row-major, after the
/// header. Values are rounded to f32.
pub fn encode_map(map: &LocalizationMap) -> Result<Vec<u8>> {
    let (h, w) = (map.height(), map.width());
    let (h32, w32) = match (u32::try_from(h), u32::try_from(w)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(Error::Format("map extents do not fit in 32 bits".into())),
    };
    let mut buf = Vec::with_capacity(MAP_HEADER_LEN + h * w * 4);
    buf.extend_from_slice(MAP_MAGIC);
    buf.push(MAP_VERSION);
    buf.extend_from_slice(&h32.to_le_bytes());
    buf.extend_from_slice(&w32.to_le_bytes());
    for &v in map.values().data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::Format(format!("value {v} does not fit in f32")));
        }
        buf.extend_from_slice(&f.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_map(bytes: &[u8]) -> Result<LocalizationMap> {
    if bytes.len() < MAP_HEADER_LEN {
        return Err(Error::Format("truncated map header".into()));
    }
    if &bytes[..4] != MAP_MAGIC {
        return Err(Error::Format("not a map file (bad magic)".into()));
    }
    if bytes[4] != MAP_VERSION {
        return Err(Error::Format(format!(
            "unsupported map version {}",
            bytes[4]
        )));
    }
    let h = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if h == 0 || w == 0 {
        return Err(Error::Format("map extents must be nonzero".into()));
    }
    let payload = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("map extents overflow".into()))?;
    let body = &bytes[MAP_HEADER_LEN..];
    if body.len() < payload {
        return Err(Error::Format(format!(
            "truncated map payload: {} of {payload} bytes",
            body.len()
        )));
    }
    if body.len() > payload {
        return Err(Error::Format("trailing bytes after map payload".into()));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("map holds non-finite values".into()));
    }
    LocalizationMap::from_rows(h, w, data)
}

/// `<dir>/<id>.vslm`; ids that would escape `dir` are rejected.
pub fn map_path(dir: &Path, id: &str) -> Result<std::path::PathBuf> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']) {
        return Err(Error::ContractViolation(format!(
            "sample id `{id}` cannot name a map file"
        )));
    }
    Ok(dir.join(format!("{id}.{MAP_EXTENSION}")))
}

pub fn write_map(path: &Path, map: &LocalizationMap) -> Result<()> {
    std::fs::write(path, encode_map(map)?).map_err(|e| Error::io(path, e))
}

pub fn read_map(path: &Path) -> Result<LocalizationMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_map(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
