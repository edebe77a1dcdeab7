//! Checkpoint layout: one line of JSON header, a newline, then every parameter
//! as a little-endian `f64` (per layer: weights input-major, then biases).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DenseNet, LossKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layer_sizes: Vec<usize>,
    pub loss: Option<LossKind>,
    pub seed: u64,
    /// Free-form metadata such as the network's role.
    #[serde(default)]
    pub tag: String,
}

pub fn write_checkpoint<W: Write>(mut w: W, net: &DenseNet, loss: Option<LossKind>, seed: u64, tag: &str) -> Result<()> {
    let header = CheckpointHeader { layer_sizes: net.layer_sizes(), loss, seed, tag: tag.to_string() };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(DenseNet, CheckpointHeader)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    if header.layer_sizes.len() < 2 || header.layer_sizes.contains(&0) {
        return Err(Error::Checkpoint(format!("bad layer sizes {:?}", header.layer_sizes)));
    }
    let mut net = DenseNet::zeros(&header.layer_sizes);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != net.param_count() * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            net.param_count() * 8,
            bytes.len()
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    net.set_params(&flat)?;
    Ok((net, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = DenseNet::new(&[27, 64, 16], 4);
        let mut buf = Vec::new();
        let loss = LossKind::SegmentedNll { segments: vec![21, 3, 3] };
        write_checkpoint(&mut buf, &net, Some(loss.clone()), 4, "encoder").unwrap();
        let (back, header) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert_eq!(header.loss, Some(loss));
        assert_eq!(header.tag, "encoder");
        let newline = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(buf.len() - newline - 1, net.param_count() * 8);
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let net = DenseNet::new(&[3, 2], 0);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net, None, 0, "").unwrap();
        buf.pop();
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
