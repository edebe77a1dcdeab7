//! Latent spaces: paired encoder/decoder networks acting element-wise on the
//! shapes of a board.
//!
//! Five flavours are supported. The symbolic autoencoder is trained on
//! multi-hot descriptions. An image encoder can be fitted to its frozen
//! encodings and paired with the symbolic decoder. Pixel decoders for that
//! image encoder can be trained either by reconstruction or through the
//! frozen encoder (a latent cycle). Last, a plain image autoencoder trained on
//! pixels alone.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    connected_components, decode_multihot, encode_multihot, rasterize, Bitmap, BoardState, Domain,
    Glyph, Label, Piece, ShapeVocab, SymbolicDesc, CELL_PX,
};
use crate::nn::{
    read_checkpoint, train_stages, write_checkpoint, DenseNet, LossKind, Stage, TrainConfig, TrainReport,
};

#[derive(Serialize, Deserialize)]
struct SpaceManifest {
    kind: SpaceKind,
    vocab: ShapeVocab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Symbolic autoencoder over multi-hot descriptions.
    Symbolic,
    /// Image encoder fitted to the symbolic encoder, symbolic decoder.
    ImageToSymbolic,
    /// Image encoder with a pixel decoder trained by reconstruction.
    ImageRecon,
    /// Image encoder with a pixel decoder trained through the frozen encoder.
    ImageSandwich,
    /// Image autoencoder trained from pixels alone.
    ImageAuto,
}

impl SpaceKind {
    pub fn encodes_images(self) -> bool {
        !matches!(self, SpaceKind::Symbolic)
    }

    pub fn decodes_symbols(self) -> bool {
        matches!(self, SpaceKind::Symbolic | SpaceKind::ImageToSymbolic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolicLoss {
    /// Softmax cross-entropy per multi-hot segment.
    #[default]
    Nll,
    Mse,
}

impl SymbolicLoss {
    pub fn kind(self, vocab: &ShapeVocab) -> LossKind {
        match self {
            SymbolicLoss::Nll => LossKind::SegmentedNll { segments: vocab.segments() },
            SymbolicLoss::Mse => LossKind::Mse,
        }
    }
}

/// Source glyph of a latent, kept alongside the vector so shapes outside the
/// vocabulary can be redrawn faithfully.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub glyph: Glyph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub z: Vec<f64>,
    pub prov: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub latent_dim: usize,
    pub symbolic_hidden: Vec<usize>,
    pub image_hidden: Vec<usize>,
    pub pixel_decoder_hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            symbolic_hidden: vec![64],
            image_hidden: vec![256, 64],
            pixel_decoder_hidden: vec![128],
        }
    }
}

impl Architecture {
    fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(hidden);
        s.push(output);
        s
    }

    pub fn symbolic_encoder(&self, vocab: &ShapeVocab) -> Vec<usize> {
        Self::sizes(vocab.multihot_len(), &self.symbolic_hidden, self.latent_dim)
    }

    pub fn symbolic_decoder(&self, vocab: &ShapeVocab) -> Vec<usize> {
        let mut hidden = self.symbolic_hidden.clone();
        hidden.reverse();
        Self::sizes(self.latent_dim, &hidden, vocab.multihot_len())
    }

    pub fn image_encoder(&self, domain: &Domain) -> Vec<usize> {
        Self::sizes(domain.side_px() * domain.side_px(), &self.image_hidden, self.latent_dim)
    }

    pub fn pixel_decoder(&self, domain: &Domain) -> Vec<usize> {
        Self::sizes(self.latent_dim, &self.pixel_decoder_hidden, domain.side_px() * domain.side_px())
    }
}

#[derive(Clone, Debug)]
pub struct LatentSpace {
    kind: SpaceKind,
    encoder: DenseNet,
    decoder: DenseNet,
    vocab: ShapeVocab,
    trained: bool,
}

impl LatentSpace {
    /// A freshly initialised space; encode/decode refuse to run until it is trained.
    pub fn untrained(kind: SpaceKind, domain: &Domain, vocab: ShapeVocab, arch: &Architecture, seed: u64) -> Self {
        let enc = if kind.encodes_images() { arch.image_encoder(domain) } else { arch.symbolic_encoder(&vocab) };
        let dec = if kind.decodes_symbols() { arch.symbolic_decoder(&vocab) } else { arch.pixel_decoder(domain) };
        Self {
            kind,
            encoder: DenseNet::new(&enc, seed),
            decoder: DenseNet::new(&dec, seed.wrapping_add(1)),
            vocab,
            trained: false,
        }
    }

    /// Assemble a space from already-trained networks.
    pub fn from_parts(kind: SpaceKind, encoder: DenseNet, decoder: DenseNet, vocab: ShapeVocab) -> Result<Self> {
        if encoder.output_len() != decoder.input_len() {
            return Err(Error::LengthMismatch { expected: decoder.input_len(), actual: encoder.output_len() });
        }
        Ok(Self { kind, encoder, decoder, vocab, trained: true })
    }

    /// Treat the current parameters as usable, e.g. to measure an untrained baseline.
    pub fn assume_trained(mut self) -> Self {
        self.trained = true;
        self
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn encoder(&self) -> &DenseNet {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    pub fn vocab(&self) -> &ShapeVocab {
        &self.vocab
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_len()
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    fn ensure_trained(&self) -> Result<()> {
        if self.trained {
            Ok(())
        } else {
            Err(Error::Untrained("latent space"))
        }
    }

    /// Writes `space.json` plus encoder and decoder checkpoints into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.ensure_trained()?;
        std::fs::create_dir_all(dir)?;
        let manifest = SpaceManifest { kind: self.kind, vocab: self.vocab.clone() };
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("space.json"))?), &manifest)?;
        write_checkpoint(BufWriter::new(File::create(dir.join("encoder.ckpt"))?), &self.encoder, None, 0, "encoder")?;
        write_checkpoint(BufWriter::new(File::create(dir.join("decoder.ckpt"))?), &self.decoder, None, 0, "decoder")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: SpaceManifest = serde_json::from_reader(BufReader::new(File::open(dir.join("space.json"))?))?;
        let (encoder, _) = read_checkpoint(BufReader::new(File::open(dir.join("encoder.ckpt"))?))?;
        let (decoder, _) = read_checkpoint(BufReader::new(File::open(dir.join("decoder.ckpt"))?))?;
        Self::from_parts(m.kind, encoder, decoder, m.vocab)
    }

    /// Encoder input for one piece of a symbolic space.
    pub fn piece_input(&self, piece: Piece) -> Result<Vec<f64>> {
        Ok(encode_multihot(self.vocab.describe(piece)?, &self.vocab)?.into_vec())
    }

    pub fn encode_vector(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(input)
    }

    pub fn decode_vector(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(z)
    }

    /// Decoder output read back as a vocabulary description.
    pub fn decode_desc(&self, z: &[f64]) -> Result<SymbolicDesc> {
        if !self.kind.decodes_symbols() {
            return Err(Error::Config("pixel decoders do not produce descriptions".into()));
        }
        decode_multihot(&self.decoder.forward(z)?, &self.vocab)
    }

    /// One latent per shape: multi-hot descriptions for the symbolic space,
    /// connected components of the raster for image spaces.
    pub fn encode_board(&self, domain: &Domain, board: &BoardState) -> Result<Vec<Latent>> {
        self.ensure_trained()?;
        if self.kind.encodes_images() {
            let raster = board.raster().ok_or(Error::MissingRaster)?;
            connected_components(raster, CELL_PX)
                .into_iter()
                .map(|c| {
                    Ok(Latent { z: self.encoder.forward(&c.bitmap.to_f64())?, prov: Provenance { glyph: c.glyph() } })
                })
                .collect()
        } else {
            let pieces = board
                .pieces()
                .ok_or_else(|| Error::Config("symbolic space needs a board with pieces".into()))?;
            pieces
                .iter()
                .map(|&p| {
                    Ok(Latent {
                        z: self.encoder.forward(&self.piece_input(p)?)?,
                        prov: Provenance { glyph: domain.glyph(p.shape) },
                    })
                })
                .collect()
        }
    }

    /// Decode one latent to a piece. Pixel decoders yield a piece only when the
    /// binarized output is exactly some single-shape rendering.
    pub fn decode_element(&self, domain: &Domain, latent: &Latent) -> Result<Option<Piece>> {
        self.ensure_trained()?;
        if self.kind.decodes_symbols() {
            let desc = self.decode_desc(&latent.z)?;
            let shape = match self.vocab.label(desc.shape) {
                Label::Shape(s) => s,
                Label::Unseen => domain.shape_of_glyph(&latent.prov.glyph).ok_or(Error::UnknownGlyph {
                    x: desc.pos.x as usize,
                    y: desc.pos.y as usize,
                })?,
            };
            Ok(Some(Piece::new(shape, desc.pos)))
        } else {
            Ok(piece_of_raster(domain, &self.decode_pixels(domain, &latent.z)?))
        }
    }

    pub fn decode_pixels(&self, domain: &Domain, z: &[f64]) -> Result<Bitmap> {
        let side = domain.side_px();
        Ok(Bitmap::from_values(side, side, &self.decoder.forward(z)?))
    }

    /// Decode a set of latents into a board. Identical pieces collapse.
    pub fn decode_latents(&self, domain: &Domain, latents: &[Latent]) -> Result<BoardState> {
        self.ensure_trained()?;
        if self.kind.decodes_symbols() {
            let mut pieces = Vec::with_capacity(latents.len());
            for l in latents {
                pieces.extend(self.decode_element(domain, l)?);
            }
            Ok(BoardState::from_pieces(pieces))
        } else {
            let side = domain.side_px();
            let mut img = Bitmap::zeros(side, side);
            for l in latents {
                img.union(&self.decode_pixels(domain, &l.z)?);
            }
            Ok(BoardState::from_raster(img))
        }
    }
}

/// The piece whose single-shape rendering is exactly `img`, if any.
pub fn piece_of_raster(domain: &Domain, img: &Bitmap) -> Option<Piece> {
    let comps = connected_components(img, CELL_PX);
    let [comp] = comps.as_slice() else { return None };
    let shape = domain.shape_of_glyph(&comp.glyph())?;
    let piece = Piece::new(shape, comp.cell);
    (rasterize(domain, [&piece]) == *img).then_some(piece)
}

/// Every description a vocabulary can express, slot-major.
pub fn vocab_descriptions(domain: &Domain, vocab: &ShapeVocab) -> Vec<SymbolicDesc> {
    let slots = vocab.shape_slots().max(1);
    (0..slots).flat_map(|s| domain.cells().map(move |pos| SymbolicDesc { shape: s, pos })).collect()
}

pub fn train_symbolic_autoencoder(
    domain: &Domain,
    vocab: ShapeVocab,
    descs: &[SymbolicDesc],
    arch: &Architecture,
    loss: SymbolicLoss,
    cfg: &TrainConfig,
) -> Result<(LatentSpace, TrainReport)> {
    let mut space = LatentSpace::untrained(SpaceKind::Symbolic, domain, vocab, arch, cfg.seed);
    let data = descs
        .iter()
        .map(|&d| {
            let v = encode_multihot(d, &space.vocab)?.into_vec();
            Ok((v.clone(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = TrainConfig { loss: loss.kind(&space.vocab), ..cfg.clone() };
    let report = {
        let (enc, dec) = (&mut space.encoder, &mut space.decoder);
        train_stages(&mut [Stage::Train(enc), Stage::Train(dec)], &data, &cfg)?
    };
    space.trained = true;
    Ok((space, report))
}

/// Fit an image encoder to the frozen symbolic encoder. Pieces outside the
/// vocabulary are fitted to the `unseen` encoding.
pub fn train_image_encoder(
    domain: &Domain,
    symbolic: &LatentSpace,
    pieces: &[Piece],
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(LatentSpace, TrainReport)> {
    if symbolic.kind != SpaceKind::Symbolic {
        return Err(Error::Config("image encoder targets must come from a symbolic space".into()));
    }
    symbolic.ensure_trained()?;
    let mut encoder = DenseNet::new(&arch.image_encoder(domain), cfg.seed);
    if encoder.output_len() != symbolic.latent_dim() {
        return Err(Error::LengthMismatch { expected: symbolic.latent_dim(), actual: encoder.output_len() });
    }
    let data = pieces
        .iter()
        .map(|&p| Ok((rasterize(domain, [&p]).to_f64(), symbolic.encoder.forward(&symbolic.piece_input(p)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let cfg = TrainConfig { loss: LossKind::Mse, ..cfg.clone() };
    let report = train_stages(&mut [Stage::Train(&mut encoder)], &data, &cfg)?;
    let space = LatentSpace::from_parts(
        SpaceKind::ImageToSymbolic,
        encoder,
        symbolic.decoder.clone(),
        symbolic.vocab.clone(),
    )?;
    Ok((space, report))
}

fn image_encoder_of(space: &LatentSpace) -> Result<&DenseNet> {
    if !space.kind.encodes_images() {
        return Err(Error::Config("a pixel decoder needs an image encoder".into()));
    }
    space.ensure_trained()?;
    Ok(&space.encoder)
}

/// Pixel decoder trained to reconstruct images through the frozen encoder.
pub fn train_image_decoder_recon(
    domain: &Domain,
    space: &LatentSpace,
    images: &[Bitmap],
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(LatentSpace, TrainReport)> {
    let encoder = image_encoder_of(space)?;
    let mut decoder = DenseNet::new(&arch.pixel_decoder(domain), cfg.seed);
    let data: Vec<_> = images
        .iter()
        .map(|img| Ok((encoder.forward(&img.to_f64())?, img.to_f64())))
        .collect::<Result<_>>()?;
    let cfg = TrainConfig { loss: LossKind::Mse, ..cfg.clone() };
    let report = train_stages(&mut [Stage::Train(&mut decoder)], &data, &cfg)?;
    let out = LatentSpace::from_parts(SpaceKind::ImageRecon, encoder.clone(), decoder, space.vocab.clone())?;
    Ok((out, report))
}

/// Pixel decoder trained so that re-encoding its output reproduces the latent.
pub fn train_image_decoder_sandwich(
    domain: &Domain,
    space: &LatentSpace,
    images: &[Bitmap],
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(LatentSpace, TrainReport)> {
    let encoder = image_encoder_of(space)?;
    let mut decoder = DenseNet::new(&arch.pixel_decoder(domain), cfg.seed);
    let data: Vec<_> = images
        .iter()
        .map(|img| {
            let h = encoder.forward(&img.to_f64())?;
            Ok((h.clone(), h))
        })
        .collect::<Result<_>>()?;
    let cfg = TrainConfig { loss: LossKind::Mse, ..cfg.clone() };
    let report = train_stages(&mut [Stage::Train(&mut decoder), Stage::Frozen(encoder)], &data, &cfg)?;
    let out = LatentSpace::from_parts(SpaceKind::ImageSandwich, encoder.clone(), decoder, space.vocab.clone())?;
    Ok((out, report))
}

/// Plain image autoencoder trained on pixels from scratch.
pub fn train_image_autoencoder(
    domain: &Domain,
    images: &[Bitmap],
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(LatentSpace, TrainReport)> {
    let vocab = ShapeVocab::full(domain);
    let mut space = LatentSpace::untrained(SpaceKind::ImageAuto, domain, vocab, arch, cfg.seed);
    let data: Vec<_> = images.iter().map(|img| (img.to_f64(), img.to_f64())).collect();
    let cfg = TrainConfig { loss: LossKind::Mse, ..cfg.clone() };
    let report = {
        let (enc, dec) = (&mut space.encoder, &mut space.decoder);
        train_stages(&mut [Stage::Train(enc), Stage::Train(dec)], &data, &cfg)?
    };
    space.trained = true;
    Ok((space, report))
}

/// Mean per-pixel squared error of decode(encode(x)) over a set of images.
pub fn reconstruction_mse(space: &LatentSpace, images: &[Bitmap]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for img in images {
        let x = img.to_f64();
        let y = space.decoder.forward(&space.encoder.forward(&x)?)?;
        total += x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += x.len();
    }
    Ok(total / count.max(1) as f64)
}
