use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numerics::Grid;
use crate::slavc::InferenceMode;

use super::{AdamState, EncoderPairState};

const MAGIC: &[u8; 4] = b"VSLC";
const VERSION: u8 = 1;

/// Serializes every grid of `state` (online, momentum, both Adam moments)
/// with its shape, little-endian.
///
/// Layout: magic, version byte, epoch u64, Adam step u64, inference-mode
/// byte, grid count u32, then per grid: rank u32, extents u32 each, values
/// f64.
pub fn write_checkpoint(state: &EncoderPairState, out: &mut impl Write) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&(state.epoch as u64).to_le_bytes());
    buf.extend_from_slice(&state.adam.step.to_le_bytes());
    buf.push(match state.inference {
        InferenceMode::Loc => 0,
        InferenceMode::Avc => 1,
        InferenceMode::Both => 2,
    });
    let grids: Vec<&Grid> = state
        .online
        .iter()
        .chain(&state.momentum)
        .chain(&state.adam.first)
        .chain(&state.adam.second)
        .collect();
    buf.extend_from_slice(&(grids.len() as u32).to_le_bytes());
    for g in grids {
        buf.extend_from_slice(&(g.rank() as u32).to_le_bytes());
        for &e in g.shape() {
            buf.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for v in g.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::Format(format!("cannot write checkpoint: {e}")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<EncoderPairState> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("cannot read checkpoint: {e}")))?;
    let mut c = Cursor {
        bytes: &bytes,
        at: 0,
    };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let epoch = c.u64()? as usize;
    let step = c.u64()?;
    let inference = match c.u8()? {
        0 => InferenceMode::Loc,
        1 => InferenceMode::Avc,
        2 => InferenceMode::Both,
        m => return Err(Error::Format(format!("unknown inference mode {m}"))),
    };
    let count = c.u32()? as usize;
    if count != 16 {
        return Err(Error::Format(format!("expected 16 grids, found {count}")));
    }
    let mut grids = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = c.u32()? as usize;
        if !(1..=3).contains(&rank) {
            return Err(Error::Format(format!("grid rank {rank} out of range")));
        }
        let shape: Vec<usize> = (0..rank)
            .map(|_| c.u32().map(|e| e as usize))
            .collect::<Result<_>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| Error::Format("grid extents overflow".into()))?;
        let data = c
            .take(len * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        grids.push(Grid::new(shape, data).map_err(|e| Error::Format(e.to_string()))?);
    }
    if c.at != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let second = grids.split_off(12);
    let first = grids.split_off(8);
    let momentum = grids.split_off(4);
    let state = EncoderPairState {
        online: grids,
        momentum,
        adam: AdamState {
            first,
            second,
            step,
        },
        epoch,
        inference,
    };
    state.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    #[test]
    fn round_trip_is_exact() {
        let mut s = EncoderPairState::init(5, 3, &mut RandomSource::new(2)).unwrap();
        s.epoch = 4;
        s.adam.step = 17;
        s.adam.first[1].data_mut()[0] = -0.25;
        let mut buf = Vec::new();
        write_checkpoint(&s, &mut buf).unwrap();
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let s = EncoderPairState::init(2, 2, &mut RandomSource::new(2)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&s, &mut buf).unwrap();
        assert!(read_checkpoint(&mut &buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        bad = buf.clone();
        bad.push(0);
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
    }
}
