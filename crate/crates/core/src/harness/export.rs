use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Domain, Piece};
use crate::latent::LatentSpace;
use crate::transforms::piece_latent;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRow {
    pub shape: String,
    pub x: usize,
    pub y: usize,
    pub z: Vec<f64>,
}

/// Latent of every single-piece board, in shape-major order.
pub fn export_embeddings(domain: &Domain, space: &LatentSpace) -> Result<Vec<EmbeddingRow>> {
    domain
        .all_pieces()
        .into_iter()
        .map(|p| {
            Ok(EmbeddingRow {
                shape: domain.name(p.shape).to_string(),
                x: p.pos.x as usize,
                y: p.pos.y as usize,
                z: piece_latent(domain, space, p)?,
            })
        })
        .collect()
}

pub fn write_embeddings_csv<W: Write>(rows: &[EmbeddingRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = rows.first().map_or(0, |r| r.z.len());
    let mut header = vec!["shape".to_string(), "x".into(), "y".into()];
    header.extend((0..dim).map(|i| format!("z{i}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.shape.clone(), r.x.to_string(), r.y.to_string()];
        rec.extend(r.z.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean pairwise latent distance among pieces sharing a cell, sharing a
/// shape, and overall. A space that clusters by position has a small
/// `same_cell` relative to `overall`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub same_cell: f64,
    pub same_shape: f64,
    pub overall: f64,
}

pub fn separation(domain: &Domain, space: &LatentSpace) -> Result<Separation> {
    let pieces: Vec<Piece> = domain.all_pieces();
    let zs = pieces.iter().map(|&p| piece_latent(domain, space, p)).collect::<Result<Vec<_>>>()?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut sums = [(0.0, 0usize); 3];
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let d = dist(&zs[i], &zs[j]);
            let buckets = [pieces[i].pos == pieces[j].pos, pieces[i].shape == pieces[j].shape, true];
            for (s, hit) in sums.iter_mut().zip(buckets) {
                if hit {
                    s.0 += d;
                    s.1 += 1;
                }
            }
        }
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(Separation { same_cell: mean(sums[0]), same_shape: mean(sums[1]), overall: mean(sums[2]) })
}
