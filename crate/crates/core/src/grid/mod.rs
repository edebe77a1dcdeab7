//! Boards of shapes on a small grid, their symbolic encodings, and the exact
//! symbolic transforms that every learned component is measured against.

mod glyphs;
mod multihot;
mod oracle;
mod raster;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use glyphs::GLYPH_SIZE;
pub use multihot::{decode_multihot, encode_multihot, MultiHot};
pub use oracle::{ground_truth_transform, Direction, Transform};
pub use raster::{connected_components, rasterize, Bitmap, Component, Glyph};

/// Side length of a grid cell in pixels.
pub const CELL_PX: usize = 16;
pub const DEFAULT_GRID: usize = 3;

/// Names of the default shape-conversion targets.
pub const DEFAULT_CONVERSIONS: [&str; 4] = ["square", "triangle", "circle", "delta"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub x: u8,
    pub y: u8,
}

impl GridPos {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x: x as u8, y: y as u8 }
    }

    pub fn checked(x: usize, y: usize, grid: usize) -> Result<Self> {
        if x >= grid || y >= grid {
            return Err(Error::PositionOutOfRange { x, y, grid });
        }
        Ok(Self::new(x, y))
    }

    /// Every cell of a `grid`x`grid` board in row-major order.
    pub fn all(grid: usize) -> impl Iterator<Item = GridPos> {
        (0..grid).flat_map(move |y| (0..grid).map(move |x| GridPos::new(x, y)))
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Index of a shape in the [`Domain`]'s full shape set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapeId(pub u8);

impl ShapeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One shape on a board: the ground-truth element of a board state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Piece {
    pub shape: ShapeId,
    pub pos: GridPos,
}

impl Piece {
    pub fn new(shape: ShapeId, pos: GridPos) -> Self {
        Self { shape, pos }
    }
}

/// The full shape set together with its glyph atlas and the grid size.
#[derive(Clone, Debug)]
pub struct Domain {
    names: Vec<String>,
    glyphs: Vec<Glyph>,
    by_glyph: HashMap<Glyph, ShapeId>,
    grid: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Self::with_grid(DEFAULT_GRID)
    }
}

impl Domain {
    pub fn with_grid(grid: usize) -> Self {
        assert!((1..=8).contains(&grid), "grid side must be in 1..=8");
        let names: Vec<String> = glyphs::GLYPH_NAMES.iter().map(|s| s.to_string()).collect();
        let glyphs: Vec<Glyph> = glyphs::GLYPH_ART.iter().map(Glyph::from_art).collect();
        let by_glyph = glyphs
            .iter()
            .enumerate()
            .map(|(i, g)| (*g, ShapeId(i as u8)))
            .collect();
        Self { names, glyphs, by_glyph, grid }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn num_shapes(&self) -> usize {
        self.names.len()
    }

    pub fn shapes(&self) -> impl Iterator<Item = ShapeId> {
        (0..self.names.len()).map(|i| ShapeId(i as u8))
    }

    pub fn cells(&self) -> impl Iterator<Item = GridPos> {
        GridPos::all(self.grid)
    }

    pub fn side_px(&self) -> usize {
        self.grid * CELL_PX
    }

    pub fn name(&self, shape: ShapeId) -> &str {
        &self.names[shape.index()]
    }

    pub fn shape(&self, name: &str) -> Result<ShapeId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ShapeId(i as u8))
            .ok_or_else(|| Error::UnknownShape(name.to_string()))
    }

    pub fn shapes_named<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<ShapeId>> {
        names.iter().map(|n| self.shape(n.as_ref())).collect()
    }

    pub fn glyph(&self, shape: ShapeId) -> Glyph {
        self.glyphs[shape.index()]
    }

    /// Reverse atlas lookup.
    pub fn shape_of_glyph(&self, glyph: &Glyph) -> Option<ShapeId> {
        self.by_glyph.get(glyph).copied()
    }

    /// Every single-piece board's content, shape-major.
    pub fn all_pieces(&self) -> Vec<Piece> {
        self.shapes()
            .flat_map(|s| self.cells().map(move |p| Piece::new(s, p)))
            .collect()
    }

    /// The default transform set: four shifts then the default conversions.
    pub fn default_transforms(&self) -> Vec<Transform> {
        let mut ts: Vec<Transform> = Direction::ALL.iter().map(|&d| Transform::Shift(d)).collect();
        ts.extend(
            DEFAULT_CONVERSIONS
                .iter()
                .map(|n| Transform::Convert(self.shape(n).expect("default shape"))),
        );
        ts
    }

    pub fn shift_transforms(&self) -> Vec<Transform> {
        Direction::ALL.iter().map(|&d| Transform::Shift(d)).collect()
    }
}

/// Ordered shape vocabulary used for multi-hot encodings.
///
/// Shapes outside the vocabulary map to the `unseen` slot when it is enabled.
/// With `shape_segment` off the encoding carries positions only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeVocab {
    shapes: Vec<ShapeId>,
    include_unseen: bool,
    shape_segment: bool,
    grid: usize,
}

/// A vocabulary-level shape label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Shape(ShapeId),
    Unseen,
}

impl ShapeVocab {
    pub fn new(shapes: Vec<ShapeId>, include_unseen: bool, grid: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &shapes {
            if !seen.insert(*s) {
                return Err(Error::Config(format!("duplicate shape {} in vocabulary", s.0)));
            }
        }
        if shapes.is_empty() && !include_unseen {
            return Err(Error::Config("vocabulary needs at least one slot".into()));
        }
        Ok(Self { shapes, include_unseen, shape_segment: true, grid })
    }

    /// Every shape of the domain, no unseen slot.
    pub fn full(domain: &Domain) -> Self {
        Self::new(domain.shapes().collect(), false, domain.grid()).expect("non-empty domain")
    }

    /// The listed shapes plus an `unseen` slot.
    pub fn with_unseen(domain: &Domain, shapes: Vec<ShapeId>) -> Self {
        Self::new(shapes, true, domain.grid()).expect("unseen slot makes it non-empty")
    }

    /// Position-only encoding; shape identity is carried by provenance alone.
    pub fn positions_only(domain: &Domain) -> Self {
        Self { shapes: Vec::new(), include_unseen: true, shape_segment: false, grid: domain.grid() }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn shapes(&self) -> &[ShapeId] {
        &self.shapes
    }

    pub fn include_unseen(&self) -> bool {
        self.include_unseen
    }

    pub fn has_shape_segment(&self) -> bool {
        self.shape_segment
    }

    /// Number of shape slots, including `unseen`.
    pub fn shape_slots(&self) -> usize {
        if self.shape_segment {
            self.shapes.len() + usize::from(self.include_unseen)
        } else {
            0
        }
    }

    pub fn unseen_slot(&self) -> Option<usize> {
        (self.shape_segment && self.include_unseen).then_some(self.shapes.len())
    }

    pub fn multihot_len(&self) -> usize {
        self.shape_slots() + 2 * self.grid
    }

    /// Segment sizes in order shape, x, y (shape omitted when positions-only).
    pub fn segments(&self) -> Vec<usize> {
        let mut segs = Vec::with_capacity(3);
        if self.shape_segment {
            segs.push(self.shape_slots());
        }
        segs.push(self.grid);
        segs.push(self.grid);
        segs
    }

    pub fn contains(&self, shape: ShapeId) -> bool {
        self.shapes.contains(&shape)
    }

    /// Vocabulary slot a domain shape is encoded with.
    pub fn slot_of(&self, shape: ShapeId) -> Result<usize> {
        if !self.shape_segment {
            return Ok(0);
        }
        match self.shapes.iter().position(|s| *s == shape) {
            Some(i) => Ok(i),
            None if self.include_unseen => Ok(self.shapes.len()),
            None => Err(Error::ShapeOutOfRange { index: shape.index(), len: self.shape_slots() }),
        }
    }

    pub fn label(&self, slot: usize) -> Label {
        if !self.shape_segment {
            return Label::Unseen;
        }
        match self.shapes.get(slot) {
            Some(s) => Label::Shape(*s),
            None => Label::Unseen,
        }
    }

    /// Relabel a ground-truth piece into this vocabulary.
    pub fn describe(&self, piece: Piece) -> Result<SymbolicDesc> {
        Ok(SymbolicDesc { shape: self.slot_of(piece.shape)?, pos: piece.pos })
    }
}

/// A shape's vocabulary slot and grid position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicDesc {
    pub shape: usize,
    pub pos: GridPos,
}

impl SymbolicDesc {
    pub fn new(shape: usize, x: usize, y: usize) -> Self {
        Self { shape, pos: GridPos::new(x, y) }
    }
}

/// A board: a set of pieces, an optional raster, or both.
///
/// Boards produced by pixel decoders carry only a raster.
#[derive(Clone, Debug, Default)]
pub struct BoardState {
    pieces: Option<BTreeSet<Piece>>,
    raster: Option<Bitmap>,
}

impl BoardState {
    /// An input board: at most one piece per cell, every position on the grid.
    pub fn new(domain: &Domain, pieces: impl IntoIterator<Item = Piece>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut cells = BTreeSet::new();
        for p in pieces {
            if p.shape.index() >= domain.num_shapes() {
                return Err(Error::ShapeOutOfRange {
                    index: p.shape.index(),
                    len: domain.num_shapes(),
                });
            }
            GridPos::checked(p.pos.x as usize, p.pos.y as usize, domain.grid())?;
            if !cells.insert(p.pos) {
                return Err(Error::CellOccupied { x: p.pos.x as usize, y: p.pos.y as usize });
            }
            set.insert(p);
        }
        Ok(Self { pieces: Some(set), raster: None })
    }

    /// Program outputs may stack several shapes on one cell; no occupancy check.
    pub fn from_pieces(pieces: impl IntoIterator<Item = Piece>) -> Self {
        Self { pieces: Some(pieces.into_iter().collect()), raster: None }
    }

    pub fn from_raster(raster: Bitmap) -> Self {
        Self { pieces: None, raster: Some(raster) }
    }

    pub fn empty() -> Self {
        Self::from_pieces([])
    }

    /// Attach the deterministic rendering of the pieces.
    pub fn rendered(mut self, domain: &Domain) -> Self {
        if let Some(p) = &self.pieces {
            self.raster = Some(rasterize(domain, p));
        }
        self
    }

    pub fn pieces(&self) -> Option<&BTreeSet<Piece>> {
        self.pieces.as_ref()
    }

    pub fn raster(&self) -> Option<&Bitmap> {
        self.raster.as_ref()
    }

    /// The raster if present, otherwise a fresh rendering of the pieces.
    pub fn to_raster(&self, domain: &Domain) -> Bitmap {
        match (&self.raster, &self.pieces) {
            (Some(r), _) => r.clone(),
            (None, Some(p)) => rasterize(domain, p),
            (None, None) => Bitmap::zeros(domain.side_px(), domain.side_px()),
        }
    }

    pub fn len(&self) -> usize {
        match (&self.pieces, &self.raster) {
            (Some(p), _) => p.len(),
            (None, Some(r)) => connected_components(r, CELL_PX).len(),
            (None, None) => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when no two pieces share a cell.
    pub fn is_valid_input(&self) -> bool {
        match &self.pieces {
            Some(p) => {
                let cells: BTreeSet<_> = p.iter().map(|q| q.pos).collect();
                cells.len() == p.len()
            }
            None => true,
        }
    }

    pub fn to_json(&self, domain: &Domain) -> BoardJson {
        BoardJson {
            shapes: self
                .pieces
                .iter()
                .flatten()
                .map(|p| ShapeJson {
                    shape: domain.name(p.shape).to_string(),
                    x: p.pos.x as usize,
                    y: p.pos.y as usize,
                })
                .collect(),
        }
    }

    pub fn from_json(domain: &Domain, json: &BoardJson) -> Result<Self> {
        let pieces = json
            .shapes
            .iter()
            .map(|s| {
                Ok(Piece::new(domain.shape(&s.shape)?, GridPos::checked(s.x, s.y, domain.grid())?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_pieces(pieces))
    }
}

/// Board equality: piece sets when both sides have them, pixel-exact rasters otherwise.
pub fn board_equal(domain: &Domain, a: &BoardState, b: &BoardState) -> bool {
    match (&a.pieces, &b.pieces) {
        (Some(pa), Some(pb)) => pa == pb,
        _ => a.to_raster(domain) == b.to_raster(domain),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeJson {
    pub shape: String,
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardJson {
    pub shapes: Vec<ShapeJson>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(d: &Domain, name: &str, x: usize, y: usize) -> Piece {
        Piece::new(d.shape(name).unwrap(), GridPos::new(x, y))
    }

    #[test]
    fn default_domain_has_named_shapes() {
        let d = Domain::default();
        assert_eq!(d.num_shapes(), 20);
        for n in DEFAULT_CONVERSIONS {
            assert!(d.shape(n).is_ok(), "{n}");
        }
        assert!(matches!(d.shape("dodecahedron"), Err(Error::UnknownShape(_))));
    }

    #[test]
    fn vocab_lengths() {
        let d = Domain::default();
        assert_eq!(ShapeVocab::full(&d).multihot_len(), 26);
        let v = ShapeVocab::with_unseen(&d, d.shapes().collect());
        assert_eq!(v.multihot_len(), 27);
        let four = d.shapes_named(&DEFAULT_CONVERSIONS).unwrap();
        // |M| + 1 + 6
        assert_eq!(ShapeVocab::with_unseen(&d, four).multihot_len(), 11);
        assert_eq!(ShapeVocab::positions_only(&d).multihot_len(), 6);
        assert!(ShapeVocab::new(vec![ShapeId(0), ShapeId(0)], false, 3).is_err());
        assert!(ShapeVocab::new(vec![], false, 3).is_err());
    }

    #[test]
    fn relabel_maps_outside_shapes_to_unseen() {
        let d = Domain::default();
        let m = d.shapes_named(&["square", "circle"]).unwrap();
        let v = ShapeVocab::with_unseen(&d, m);
        assert_eq!(v.describe(piece(&d, "circle", 1, 2)).unwrap(), SymbolicDesc::new(1, 1, 2));
        assert_eq!(v.describe(piece(&d, "star", 0, 0)).unwrap(), SymbolicDesc::new(2, 0, 0));
        assert_eq!(v.label(2), Label::Unseen);
        let closed = ShapeVocab::new(vec![ShapeId(0)], false, 3).unwrap();
        assert!(closed.describe(piece(&d, "star", 0, 0)).is_err());
    }

    #[test]
    fn board_rejects_shared_cells_and_off_grid() {
        let d = Domain::default();
        let r = BoardState::new(&d, [piece(&d, "square", 1, 1), piece(&d, "circle", 1, 1)]);
        assert!(matches!(r, Err(Error::CellOccupied { x: 1, y: 1 })));
        let r = BoardState::new(&d, [Piece::new(ShapeId(0), GridPos::new(3, 0))]);
        assert!(matches!(r, Err(Error::PositionOutOfRange { .. })));
    }

    #[test]
    fn board_equality() {
        let d = Domain::default();
        let a = BoardState::new(&d, [piece(&d, "square", 0, 0), piece(&d, "delta", 2, 1)]).unwrap();
        assert!(board_equal(&d, &a, &a));
        let b = BoardState::new(&d, [piece(&d, "square", 0, 1), piece(&d, "delta", 2, 1)]).unwrap();
        assert!(!board_equal(&d, &a, &b));
        // raster-only side compares pixels
        let img = BoardState::from_raster(a.to_raster(&d));
        assert!(board_equal(&d, &a, &img));
        assert!(!board_equal(&d, &b, &img));
    }

    #[test]
    fn json_round_trip() {
        let d = Domain::default();
        let a = BoardState::new(&d, [piece(&d, "k", 2, 0), piece(&d, "ring", 1, 1)]).unwrap();
        let text = serde_json::to_string(&a.to_json(&d)).unwrap();
        assert!(text.contains("\"shape\":\"ring\""));
        let back: BoardJson = serde_json::from_str(&text).unwrap();
        let b = BoardState::from_json(&d, &back).unwrap();
        assert!(board_equal(&d, &a, &b));
    }
}
