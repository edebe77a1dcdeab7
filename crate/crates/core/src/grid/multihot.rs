use super::{GridPos, ShapeVocab, SymbolicDesc};
use crate::error::{Error, Result};

/// Concatenated one-hot segments `[shape | x | y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiHot(pub Vec<f64>);

impl MultiHot {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn encode_multihot(desc: SymbolicDesc, vocab: &ShapeVocab) -> Result<MultiHot> {
    let slots = vocab.shape_slots();
    let grid = vocab.grid();
    if vocab.has_shape_segment() && desc.shape >= slots {
        return Err(Error::ShapeOutOfRange { index: desc.shape, len: slots });
    }
    let (x, y) = (desc.pos.x as usize, desc.pos.y as usize);
    if x >= grid || y >= grid {
        return Err(Error::PositionOutOfRange { x, y, grid });
    }
    let mut v = vec![0.0; vocab.multihot_len()];
    if vocab.has_shape_segment() {
        v[desc.shape] = 1.0;
    }
    v[slots + x] = 1.0;
    v[slots + grid + y] = 1.0;
    Ok(MultiHot(v))
}

/// Lowest index wins ties.
fn argmax(seg: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in seg.iter().enumerate() {
        if v > seg[best] {
            best = i;
        }
    }
    best
}

/// Per-segment argmax of an arbitrary real vector, e.g. decoder logits.
pub fn decode_multihot(v: &[f64], vocab: &ShapeVocab) -> Result<SymbolicDesc> {
    if v.len() != vocab.multihot_len() {
        return Err(Error::LengthMismatch { expected: vocab.multihot_len(), actual: v.len() });
    }
    let slots = vocab.shape_slots();
    let grid = vocab.grid();
    let shape = if vocab.has_shape_segment() { argmax(&v[..slots]) } else { 0 };
    let x = argmax(&v[slots..slots + grid]);
    let y = argmax(&v[slots + grid..]);
    Ok(SymbolicDesc { shape, pos: GridPos::new(x, y) })
}
