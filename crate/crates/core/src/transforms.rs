//! Learned transforms acting on latent vectors.
//!
//! In independent mode every transform owns a small network mapping a latent
//! to a latent. In vector mode a single shared network takes the latent
//! concatenated with a learned conditioning vector per transform.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{encode_multihot, rasterize, BoardState, Domain, GridPos, Piece, ShapeId, Transform};
use crate::latent::{LatentSpace, SymbolicLoss};
use crate::nn::{
    read_checkpoint, train_stages, write_checkpoint, DenseNet, LossKind, Momentum, Stage, TrainConfig,
    VectorMomentum,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformMode {
    Independent,
    Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformArch {
    pub hidden: Vec<usize>,
    /// Length of each conditioning vector in vector mode.
    pub cond_dim: usize,
}

impl Default for TransformArch {
    fn default() -> Self {
        Self { hidden: vec![64], cond_dim: 8 }
    }
}

impl TransformArch {
    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(&self.hidden);
        s.push(output);
        s
    }
}

/// Which singleton boards transforms are trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformData {
    pub shapes: Vec<ShapeId>,
    pub cells: Vec<GridPos>,
    /// Loss on symbolic decoder outputs; pixel decoders always use squared error.
    pub symbolic_loss: SymbolicLoss,
}

impl TransformData {
    pub fn all(domain: &Domain) -> Self {
        Self::shapes(domain, domain.shapes().collect())
    }

    pub fn shapes(domain: &Domain, shapes: Vec<ShapeId>) -> Self {
        Self { shapes, cells: domain.cells().collect(), symbolic_loss: SymbolicLoss::Nll }
    }

    pub fn pieces(&self) -> Vec<Piece> {
        self.shapes.iter().flat_map(|&s| self.cells.iter().map(move |&c| Piece::new(s, c))).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformSet {
    mode: TransformMode,
    ids: Vec<Transform>,
    /// One net per id in independent mode, a single shared net in vector mode.
    nets: Vec<DenseNet>,
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    mode: TransformMode,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl TransformSet {
    pub fn independent(ids: Vec<Transform>, nets: Vec<DenseNet>) -> Result<Self> {
        if ids.len() != nets.len() {
            return Err(Error::LengthMismatch { expected: ids.len(), actual: nets.len() });
        }
        for n in &nets {
            if n.input_len() != n.output_len() {
                return Err(Error::LengthMismatch { expected: n.input_len(), actual: n.output_len() });
            }
        }
        Ok(Self { mode: TransformMode::Independent, ids, nets, vectors: Vec::new() })
    }

    pub fn vector(ids: Vec<Transform>, shared: DenseNet, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::LengthMismatch { expected: ids.len(), actual: vectors.len() });
        }
        let k = vectors.first().map_or(0, Vec::len);
        if shared.input_len() != shared.output_len() + k || vectors.iter().any(|v| v.len() != k) {
            return Err(Error::LengthMismatch { expected: shared.output_len() + k, actual: shared.input_len() });
        }
        Ok(Self { mode: TransformMode::Vector, ids, nets: vec![shared], vectors })
    }

    pub fn mode(&self) -> TransformMode {
        self.mode
    }

    pub fn ids(&self) -> &[Transform] {
        &self.ids
    }

    pub fn nets(&self) -> &[DenseNet] {
        &self.nets
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn latent_dim(&self) -> usize {
        self.nets[0].output_len()
    }

    pub fn index_of(&self, t: Transform) -> Result<usize> {
        self.ids
            .iter()
            .position(|&i| i == t)
            .ok_or_else(|| Error::UnknownTransform(format!("{t:?}")))
    }

    /// Apply the transform at position `idx` of `ids`.
    pub fn apply_index(&self, idx: usize, z: &[f64]) -> Result<Vec<f64>> {
        if idx >= self.ids.len() {
            return Err(Error::UnknownTransform(format!("index {idx}")));
        }
        if z.len() != self.latent_dim() {
            return Err(Error::LengthMismatch { expected: self.latent_dim(), actual: z.len() });
        }
        match self.mode {
            TransformMode::Independent => self.nets[idx].forward(z),
            TransformMode::Vector => {
                let mut x = z.to_vec();
                x.extend_from_slice(&self.vectors[idx]);
                self.nets[0].forward(&x)
            }
        }
    }

    pub fn apply_transform(&self, t: Transform, z: &[f64]) -> Result<Vec<f64>> {
        self.apply_index(self.index_of(t)?, z)
    }

    /// Writes `transforms.json` plus one checkpoint per net into `dir`.
    pub fn save(&self, domain: &Domain, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let names: Vec<String> = self.ids.iter().map(|t| t.name(domain)).collect();
        let manifest = Manifest { mode: self.mode, ids: names.clone(), vectors: self.vectors.clone() };
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("transforms.json"))?), &manifest)?;
        for (i, net) in self.nets.iter().enumerate() {
            let file = match self.mode {
                TransformMode::Independent => format!("{}.ckpt", names[i]),
                TransformMode::Vector => "shared.ckpt".to_string(),
            };
            let tag = if self.mode == TransformMode::Independent { names[i].as_str() } else { "shared" };
            write_checkpoint(BufWriter::new(File::create(dir.join(file))?), net, None, 0, tag)?;
        }
        Ok(())
    }

    pub fn load(domain: &Domain, dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join("transforms.json"))?))?;
        let ids = manifest.ids.iter().map(|n| Transform::parse(n, domain)).collect::<Result<Vec<_>>>()?;
        let read = |file: String| -> Result<DenseNet> {
            Ok(read_checkpoint(BufReader::new(File::open(dir.join(file))?))?.0)
        };
        match manifest.mode {
            TransformMode::Independent => {
                let nets = manifest.ids.iter().map(|n| read(format!("{n}.ckpt"))).collect::<Result<Vec<_>>>()?;
                Self::independent(ids, nets)
            }
            TransformMode::Vector => Self::vector(ids, read("shared.ckpt".into())?, manifest.vectors),
        }
    }
}

/// Latent of a single piece under `space`.
pub fn piece_latent(domain: &Domain, space: &LatentSpace, piece: Piece) -> Result<Vec<f64>> {
    if space.kind().encodes_images() {
        space.encode_vector(&rasterize(domain, [&piece]).to_f64())
    } else {
        space.encode_vector(&space.piece_input(piece)?)
    }
}

/// Decoder target for a piece: its multi-hot for symbolic decoders, its
/// rendering for pixel decoders.
fn decoder_target(domain: &Domain, space: &LatentSpace, piece: Piece) -> Result<Vec<f64>> {
    if space.kind().decodes_symbols() {
        Ok(encode_multihot(space.vocab().describe(piece)?, space.vocab())?.into_vec())
    } else {
        Ok(rasterize(domain, [&piece]).to_f64())
    }
}

fn decoder_loss(space: &LatentSpace, data: &TransformData) -> LossKind {
    match (space.kind().decodes_symbols(), data.symbolic_loss) {
        (true, loss) => loss.kind(space.vocab()),
        _ => LossKind::Mse,
    }
}

/// Latent inputs paired with decoder targets of the oracle-transformed piece.
pub fn training_pairs(
    domain: &Domain,
    space: &LatentSpace,
    t: Transform,
    pieces: &[Piece],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    pieces
        .iter()
        .map(|&p| Ok((piece_latent(domain, space, p)?, decoder_target(domain, space, t.apply_piece(p, domain.grid()))?)))
        .collect()
}

fn check_space(space: &LatentSpace, data: &TransformData) -> Result<()> {
    if !space.is_trained() {
        return Err(Error::Untrained("latent space"));
    }
    if data.shapes.is_empty() || data.cells.is_empty() {
        return Err(Error::Config("transform training needs at least one shape and one cell".into()));
    }
    Ok(())
}

/// One network per transform, each trained through the frozen decoder.
pub fn train_transforms(
    domain: &Domain,
    space: &LatentSpace,
    ids: &[Transform],
    data: &TransformData,
    arch: &TransformArch,
    cfg: &TrainConfig,
) -> Result<TransformSet> {
    check_space(space, data)?;
    let n = space.latent_dim();
    let pieces = data.pieces();
    let cfg = TrainConfig { loss: decoder_loss(space, data), ..cfg.clone() };
    let nets = ids
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let pairs = training_pairs(domain, space, t, &pieces)?;
            let seed = cfg.seed.wrapping_add(i as u64);
            let mut net = DenseNet::new(&arch.sizes(n, n), seed);
            let cfg = TrainConfig { seed, ..cfg.clone() };
            train_stages(&mut [Stage::Train(&mut net), Stage::Frozen(space.decoder())], &pairs, &cfg)?;
            Ok(net)
        })
        .collect::<Result<Vec<_>>>()?;
    TransformSet::independent(ids.to_vec(), nets)
}

/// A shared network and one conditioning vector per transform, optimised jointly.
pub fn train_vector_transforms(
    domain: &Domain,
    space: &LatentSpace,
    ids: &[Transform],
    data: &TransformData,
    arch: &TransformArch,
    cfg: &TrainConfig,
) -> Result<TransformSet> {
    check_space(space, data)?;
    cfg.validate()?;
    let (n, k) = (space.latent_dim(), arch.cond_dim);
    let pieces = data.pieces();
    let loss = decoder_loss(space, data);
    let mut samples = Vec::new();
    for (i, &t) in ids.iter().enumerate() {
        for (z, target) in training_pairs(domain, space, t, &pieces)? {
            samples.push((i, z, target));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shared = DenseNet::new(&arch.sizes(n + k, n), cfg.seed);
    let mut vectors: Vec<Vec<f64>> = ids.iter().map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut opt = Momentum::new(&shared, cfg.learning_rate, cfg.momentum).with_weight_decay(cfg.weight_decay);
    let mut vopts: Vec<VectorMomentum> = ids.iter().map(|_| VectorMomentum::new(k, cfg.learning_rate, cfg.momentum)).collect();
    let mut grads = shared.grads();
    let mut vgrads = vec![vec![0.0; k]; ids.len()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let decoder = space.decoder();

    for epoch in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero();
            vgrads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            for &s in batch {
                let (i, z, target) = &samples[s];
                let mut x = z.clone();
                x.extend_from_slice(&vectors[*i]);
                let t1 = shared.forward_trace(&x)?;
                let t2 = decoder.forward_trace(t1.output())?;
                let (l, delta) = loss.eval(t2.output(), target)?;
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch, loss: l });
                }
                epoch_loss += l;
                let delta = decoder.backward(&t2, &delta, None, true).expect("input gradient");
                let dx = shared.backward(&t1, &delta, Some(&mut grads), true).expect("input gradient");
                for (g, d) in vgrads[*i].iter_mut().zip(&dx[n..]) {
                    *g += d;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            opt.step(&mut shared, &grads, scale);
            for ((v, g), o) in vectors.iter_mut().zip(&vgrads).zip(&mut vopts) {
                o.step(v, g, scale);
            }
        }
        let mean = epoch_loss / samples.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
    }
    TransformSet::vector(ids.to_vec(), shared, vectors)
}

/// Fraction of (transform, piece) cases where decoding the transformed latent
/// gives the oracle's piece.
pub fn single_step_accuracy(domain: &Domain, space: &LatentSpace, set: &TransformSet, pieces: &[Piece]) -> Result<f64> {
    composition_accuracy(domain, space, set, pieces, 1)
}

/// Like [`single_step_accuracy`] over every sequence of `depth` transforms,
/// applied latent to latent without decoding in between.
pub fn composition_accuracy(
    domain: &Domain,
    space: &LatentSpace,
    set: &TransformSet,
    pieces: &[Piece],
    depth: usize,
) -> Result<f64> {
    let k = set.ids().len();
    let sequences = k.checked_pow(depth as u32).ok_or_else(|| Error::Config("composition depth too large".into()))?;
    let cases: Vec<(usize, Piece)> = (0..sequences).flat_map(|s| pieces.iter().map(move |&p| (s, p))).collect();
    let hits = cases
        .par_iter()
        .map(|&(mut s, p)| {
            let mut z = piece_latent(domain, space, p)?;
            let mut expected = p;
            for _ in 0..depth {
                let i = s % k;
                s /= k;
                z = set.apply_index(i, &z)?;
                expected = set.ids()[i].apply_piece(expected, domain.grid());
            }
            Ok(usize::from(decodes_to(domain, space, &z, expected)?))
        })
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / cases.len().max(1) as f64)
}

pub fn decodes_to(domain: &Domain, space: &LatentSpace, z: &[f64], expected: Piece) -> Result<bool> {
    let latent = crate::latent::Latent { z: z.to_vec(), prov: crate::latent::Provenance { glyph: domain.glyph(expected.shape) } };
    let board = space.decode_latents(domain, std::slice::from_ref(&latent))?;
    Ok(crate::grid::board_equal(domain, &board, &BoardState::from_pieces([expected])))
}
