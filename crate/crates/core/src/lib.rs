//! Analogy solving by program search over learned latent transforms.
//!
//! Boards of shapes are encoded into a latent space, elementary transforms are
//! learned as small networks acting on that space, and search assembles them
//! into programs that explain example input/output pairs.

pub mod datagen;
pub mod error;
pub mod grid;
pub mod harness;
pub mod latent;
pub mod nn;
pub mod search;
pub mod transforms;
pub mod vm;

pub use error::{Error, Result};
