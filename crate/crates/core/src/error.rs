use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape index {index} out of range for vocabulary of {len} slots")]
    ShapeOutOfRange { index: usize, len: usize },

    #[error("unknown shape `{0}`")]
    UnknownShape(String),

    #[error("position ({x}, {y}) outside a {grid}x{grid} grid")]
    PositionOutOfRange { x: usize, y: usize, grid: usize },

    #[error("two shapes share cell ({x}, {y})")]
    CellOccupied { x: usize, y: usize },

    #[error("expected vector of length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unknown transform `{0}`")]
    UnknownTransform(String),

    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),

    #[error("glyph at cell ({x}, {y}) does not match any shape in the atlas")]
    UnknownGlyph { x: usize, y: usize },

    #[error("board has no raster; image spaces need one")]
    MissingRaster,

    #[error("latent space is not trained: {0}")]
    Untrained(&'static str),

    #[error("non-finite loss {loss} at epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
