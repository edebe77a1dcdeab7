use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Schedule};
use crate::error::Result;
use crate::grid::{rasterize, Bitmap, Domain, Piece, ShapeId};
use crate::latent::{
    train_image_autoencoder, train_image_decoder_recon, train_image_decoder_sandwich, train_image_encoder,
    train_symbolic_autoencoder, vocab_descriptions, LatentSpace, SpaceKind,
};
use crate::transforms::{train_transforms, train_vector_transforms, TransformData, TransformMode, TransformSet};

/// A trained latent space and the transforms that act on it.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub space: LatentSpace,
    pub transforms: TransformSet,
}

// Seed offsets keep stages from sharing initialisations.
const AE_SEED: u64 = 0;
const ENCODER_SEED: u64 = 100;
const DECODER_SEED: u64 = 200;
const TRANSFORM_SEED: u64 = 300;

/// Trains artifacts stage by stage. With a cache directory each stage is
/// stored under a hash of everything it depends on, so a sweep retrains only
/// the stages its varied setting reaches.
#[derive(Clone, Debug)]
pub struct Trainer<'a> {
    domain: &'a Domain,
    cache: Option<PathBuf>,
}

fn digest<T: Serialize>(stage: &str, key: &T) -> String {
    let bytes = serde_json::to_vec(key).expect("cache keys serialize");
    let hash = Sha256::new().chain_update(stage.as_bytes()).chain_update(&bytes).finalize();
    let hex: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{stage}-{hex}")
}

#[derive(Serialize)]
struct SymbolicKey<'a> {
    vocab: &'a crate::grid::ShapeVocab,
    arch: &'a crate::latent::Architecture,
    loss: crate::latent::SymbolicLoss,
    schedule: &'a Schedule,
    seed: u64,
}

#[derive(Serialize)]
struct SpaceKey<'a> {
    kind: SpaceKind,
    symbolic: &'a str,
    encoder_shapes: Vec<u8>,
    encoder: &'a Schedule,
    decoder: &'a Schedule,
    seed: u64,
}

#[derive(Serialize)]
struct TransformKey<'a> {
    space: &'a str,
    mode: TransformMode,
    ids: Vec<String>,
    shapes: Vec<u8>,
    cells: Vec<(usize, usize)>,
    arch: &'a crate::transforms::TransformArch,
    loss: crate::latent::SymbolicLoss,
    schedule: &'a Schedule,
    seed: u64,
}

fn singleton_images(domain: &Domain, shapes: &[ShapeId]) -> (Vec<Piece>, Vec<Bitmap>) {
    let pieces: Vec<Piece> =
        shapes.iter().flat_map(|&s| domain.cells().map(move |c| Piece::new(s, c))).collect();
    let images = pieces.iter().map(|p| rasterize(domain, [p])).collect();
    (pieces, images)
}

impl<'a> Trainer<'a> {
    pub fn new(domain: &'a Domain, cache: Option<PathBuf>) -> Self {
        Self { domain, cache }
    }

    /// Uses `out_dir/cache` when the config names an output directory.
    pub fn for_config(domain: &'a Domain, cfg: &ExperimentConfig) -> Self {
        Self::new(domain, cfg.out_dir.as_ref().map(|d| d.join("cache")))
    }

    fn cached<T>(
        &self,
        key: &str,
        load: impl FnOnce(&Path) -> Result<T>,
        train: impl FnOnce() -> Result<T>,
        save: impl FnOnce(&T, &Path) -> Result<()>,
    ) -> Result<T> {
        let Some(root) = &self.cache else { return train() };
        let dir = root.join(key);
        if dir.join("done").exists() {
            return load(&dir);
        }
        let value = train()?;
        save(&value, &dir)?;
        std::fs::write(dir.join("done"), b"")?;
        Ok(value)
    }

    fn symbolic_key(&self, cfg: &ExperimentConfig) -> Result<String> {
        let m = &cfg.model;
        Ok(digest(
            "symbolic",
            &SymbolicKey {
                vocab: &cfg.vocab(self.domain)?,
                arch: &m.arch,
                loss: m.autoencoder_loss,
                schedule: &m.autoencoder,
                seed: cfg.seeds.train,
            },
        ))
    }

    pub fn symbolic_space(&self, cfg: &ExperimentConfig) -> Result<LatentSpace> {
        let vocab = cfg.vocab(self.domain)?;
        let m = &cfg.model;
        self.cached(
            &self.symbolic_key(cfg)?,
            LatentSpace::load,
            || {
                let descs = vocab_descriptions(self.domain, &vocab);
                let tc = m.autoencoder.train_config(cfg.seeds.train.wrapping_add(AE_SEED));
                Ok(train_symbolic_autoencoder(self.domain, vocab.clone(), &descs, &m.arch, m.autoencoder_loss, &tc)?.0)
            },
            |s, dir| s.save(dir),
        )
    }

    fn space_key(&self, cfg: &ExperimentConfig) -> Result<String> {
        let m = &cfg.model;
        let symbolic = self.symbolic_key(cfg)?;
        Ok(digest(
            "space",
            &SpaceKey {
                kind: m.latent,
                symbolic: &symbolic,
                encoder_shapes: cfg.encoder_shapes(self.domain)?.iter().map(|s| s.0).collect(),
                encoder: &m.image_encoder,
                decoder: &m.pixel_decoder,
                seed: cfg.seeds.train,
            },
        ))
    }

    /// The space search runs in, per `model.latent`.
    pub fn space(&self, cfg: &ExperimentConfig) -> Result<LatentSpace> {
        let m = &cfg.model;
        if m.latent == SpaceKind::Symbolic {
            return self.symbolic_space(cfg);
        }
        let seed = cfg.seeds.train;
        let (pieces, images) = singleton_images(self.domain, &cfg.encoder_shapes(self.domain)?);
        self.cached(
            &self.space_key(cfg)?,
            LatentSpace::load,
            || {
                let enc_cfg = m.image_encoder.train_config(seed.wrapping_add(ENCODER_SEED));
                let dec_cfg = m.pixel_decoder.train_config(seed.wrapping_add(DECODER_SEED));
                if m.latent == SpaceKind::ImageAuto {
                    return Ok(train_image_autoencoder(self.domain, &images, &m.arch, &dec_cfg)?.0);
                }
                let symbolic = self.symbolic_space(cfg)?;
                let (img, _) = train_image_encoder(self.domain, &symbolic, &pieces, &m.arch, &enc_cfg)?;
                Ok(match m.latent {
                    SpaceKind::ImageRecon => train_image_decoder_recon(self.domain, &img, &images, &m.arch, &dec_cfg)?.0,
                    SpaceKind::ImageSandwich => {
                        train_image_decoder_sandwich(self.domain, &img, &images, &m.arch, &dec_cfg)?.0
                    }
                    _ => img,
                })
            },
            |s, dir| s.save(dir),
        )
    }

    /// Transforms for spaces with a symbolic decoder are trained in the
    /// symbolic space, which image encoders are fitted to. Pixel spaces train
    /// their own.
    pub fn transforms(&self, cfg: &ExperimentConfig) -> Result<TransformSet> {
        let m = &cfg.model;
        let (space, space_key) = if m.latent.decodes_symbols() {
            (self.symbolic_space(cfg)?, self.symbolic_key(cfg)?)
        } else {
            (self.space(cfg)?, self.space_key(cfg)?)
        };
        let ids = cfg.transform_ids(self.domain)?;
        let mut shapes = cfg.transform_shapes(self.domain)?;
        let vocab = space.vocab();
        if vocab.include_unseen() && shapes.iter().all(|&s| vocab.contains(s)) {
            // The unseen slot is part of the vocabulary, so transforms learn it
            // too; any shape outside the vocabulary stands in for it.
            shapes.extend(self.domain.shapes().find(|&s| !vocab.contains(s)));
        }
        let data = TransformData { shapes, cells: cfg.transform_cells(self.domain)?, symbolic_loss: m.transform_loss };
        let key = digest(
            "transforms",
            &TransformKey {
                space: &space_key,
                mode: m.transform_mode,
                ids: ids.iter().map(|t| t.name(self.domain)).collect(),
                shapes: data.shapes.iter().map(|s| s.0).collect(),
                cells: data.cells.iter().map(|c| (c.x as usize, c.y as usize)).collect(),
                arch: &m.transform_arch,
                loss: m.transform_loss,
                schedule: &m.transform_training,
                seed: cfg.seeds.train,
            },
        );
        let domain = self.domain;
        self.cached(
            &key,
            |dir| TransformSet::load(domain, dir),
            || {
                let tc = m.transform_training.train_config(cfg.seeds.train.wrapping_add(TRANSFORM_SEED));
                match m.transform_mode {
                    TransformMode::Independent => train_transforms(domain, &space, &ids, &data, &m.transform_arch, &tc),
                    TransformMode::Vector => train_vector_transforms(domain, &space, &ids, &data, &m.transform_arch, &tc),
                }
            },
            |t, dir| t.save(domain, dir),
        )
    }

    pub fn train(&self, cfg: &ExperimentConfig) -> Result<Artifacts> {
        cfg.validate(self.domain)?;
        Ok(Artifacts { space: self.space(cfg)?, transforms: self.transforms(cfg)? })
    }
}
