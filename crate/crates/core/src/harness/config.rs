use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::datagen::DatasetSpec;
use crate::error::{Error, Result};
use crate::grid::{Domain, GridPos, ShapeId, ShapeVocab, Transform};
use crate::latent::{Architecture, SpaceKind, SymbolicLoss};
use crate::nn::{LossKind, TrainConfig};
use crate::search::SearchConfig;
use crate::transforms::{TransformArch, TransformMode};

/// Which shapes each stage sees. `None` means every shape of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSpec {
    /// Shapes with their own multi-hot slot. When set, every other shape
    /// shares a single `unseen` slot.
    pub vocab_shapes: Option<Vec<String>>,
    /// Shapes transforms are trained on. An empty list trains on the
    /// `unseen` slot alone.
    pub transform_shapes: Option<Vec<String>>,
    /// Shapes shown to image encoders and pixel decoders.
    pub encoder_shapes: Option<Vec<String>>,
    /// Shapes placed on evaluation boards.
    pub test_shapes: Option<Vec<String>>,
    /// Input cells, as `[x, y]`, left out of transform training.
    pub held_out_cells: Vec<[usize; 2]>,
    pub min_pieces: usize,
    pub max_pieces: usize,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            vocab_shapes: None,
            transform_shapes: None,
            encoder_shapes: None,
            test_shapes: None,
            held_out_cells: Vec::new(),
            min_pieces: 1,
            max_pieces: 3,
        }
    }
}

/// Optimiser settings for one training stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Schedule {
    pub const fn new(learning_rate: f64, batch_size: usize, epochs: usize, weight_decay: f64) -> Self {
        Self { learning_rate, batch_size, epochs, weight_decay }
    }

    /// The loss is chosen by the training routine; MSE here is a placeholder.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            weight_decay: self.weight_decay,
            ..TrainConfig::new(self.learning_rate, self.batch_size, self.epochs, seed, LossKind::Mse)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub latent: SpaceKind,
    pub transform_mode: TransformMode,
    /// Transforms to learn. Defaults to the task dataset's alphabet.
    pub transforms: Option<Vec<String>>,
    pub arch: Architecture,
    pub transform_arch: TransformArch,
    pub autoencoder_loss: SymbolicLoss,
    pub transform_loss: SymbolicLoss,
    pub autoencoder: Schedule,
    pub image_encoder: Schedule,
    pub pixel_decoder: Schedule,
    pub transform_training: Schedule,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            latent: SpaceKind::Symbolic,
            transform_mode: TransformMode::Independent,
            transforms: None,
            arch: Architecture::default(),
            transform_arch: TransformArch::default(),
            autoencoder_loss: SymbolicLoss::Nll,
            transform_loss: SymbolicLoss::Nll,
            autoencoder: Schedule::new(0.02, 8, 300, 0.001),
            image_encoder: Schedule::new(0.002, 8, 100, 0.0),
            pixel_decoder: Schedule::new(0.002, 8, 200, 0.0),
            transform_training: Schedule::new(0.005, 8, 300, 0.02),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSpec {
    /// Programs are drawn from this dataset.
    pub dataset: DatasetSpec,
    pub lengths: Vec<usize>,
    pub per_length: usize,
    pub examples: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self { dataset: DatasetSpec::r20shift(&Domain::default()), lengths: (2..=6).collect(), per_length: 100, examples: 3 }
    }
}

/// Training and task seeds are independent so that compared settings share
/// one task set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub train: u64,
    pub tasks: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { train: 0, tasks: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    pub model: ModelSpec,
    pub search: SearchConfig,
    /// Search each task only up to its generating program's length, ignoring
    /// `search.max_depth`.
    pub depth_from_task: bool,
    pub tasks: TaskSpec,
    pub seeds: Seeds,
    /// Where trained artifacts are cached and reports written. Nothing is
    /// cached when unset.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            model: ModelSpec::default(),
            search: SearchConfig::default(),
            depth_from_task: true,
            tasks: TaskSpec::default(),
            seeds: Seeds::default(),
            out_dir: None,
        }
    }
}

fn shapes_or_all(domain: &Domain, names: &Option<Vec<String>>) -> Result<Vec<ShapeId>> {
    match names {
        None => Ok(domain.shapes().collect()),
        Some(n) => domain.shapes_named(n),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        self.vocab(domain)?;
        self.transform_shapes(domain)?;
        if self.encoder_shapes(domain)?.is_empty() && self.model.latent.encodes_images() {
            return Err(Error::Config("image encoders need at least one training shape".into()));
        }
        if self.test_shapes(domain)?.is_empty() {
            return Err(Error::Config("no test shapes".into()));
        }
        if self.transform_cells(domain)?.is_empty() {
            return Err(Error::Config("every cell is held out of transform training".into()));
        }
        let d = &self.data;
        if d.min_pieces == 0 || d.min_pieces > d.max_pieces || d.max_pieces > domain.cells().count() {
            return Err(Error::Config(format!("bad piece range {}..={}", d.min_pieces, d.max_pieces)));
        }
        let t = &self.tasks;
        if t.lengths.is_empty() || t.lengths.contains(&0) || t.per_length == 0 || t.examples == 0 {
            return Err(Error::Config("task lengths, count and examples must be positive".into()));
        }
        if !self.depth_from_task && self.search.max_depth == 0 {
            return Err(Error::Config("search depth must be at least 1".into()));
        }
        for ts in [&self.model.autoencoder, &self.model.image_encoder, &self.model.pixel_decoder, &self.model.transform_training] {
            ts.train_config(0).validate()?;
        }
        self.transform_ids(domain)?;
        Ok(())
    }

    pub fn vocab(&self, domain: &Domain) -> Result<ShapeVocab> {
        Ok(match &self.data.vocab_shapes {
            None => ShapeVocab::full(domain),
            Some(n) => ShapeVocab::with_unseen(domain, domain.shapes_named(n)?),
        })
    }

    pub fn transform_shapes(&self, domain: &Domain) -> Result<Vec<ShapeId>> {
        shapes_or_all(domain, &self.data.transform_shapes)
    }

    pub fn encoder_shapes(&self, domain: &Domain) -> Result<Vec<ShapeId>> {
        shapes_or_all(domain, &self.data.encoder_shapes)
    }

    pub fn test_shapes(&self, domain: &Domain) -> Result<Vec<ShapeId>> {
        shapes_or_all(domain, &self.data.test_shapes)
    }

    pub fn transform_cells(&self, domain: &Domain) -> Result<Vec<GridPos>> {
        let mut held = Vec::new();
        for &[x, y] in &self.data.held_out_cells {
            held.push(GridPos::checked(x, y, domain.grid())?);
        }
        Ok(domain.cells().filter(|c| !held.contains(c)).collect())
    }

    /// Transforms the model learns and search composes. Conversions must
    /// target a shape with its own vocabulary slot.
    pub fn transform_ids(&self, domain: &Domain) -> Result<Vec<Transform>> {
        let names = self.model.transforms.as_ref().unwrap_or(&self.tasks.dataset.transforms);
        let ids = names.iter().map(|n| Transform::parse(n, domain)).collect::<Result<Vec<_>>>()?;
        if ids.is_empty() {
            return Err(Error::Config("no transforms to learn".into()));
        }
        if self.model.latent.decodes_symbols() {
            let vocab = self.vocab(domain)?;
            for t in &ids {
                if let Transform::Convert(s) = t {
                    if !vocab.contains(*s) {
                        return Err(Error::Config(format!("{} targets a shape outside the vocabulary", t.name(domain))));
                    }
                }
            }
        }
        Ok(ids)
    }
}
