use std::io::Write;

use super::glyphs::GLYPH_SIZE;
use super::{Domain, GridPos, Piece, CELL_PX};

const GLYPH_INSET: usize = (CELL_PX - GLYPH_SIZE) / 2;

/// Binary ink mask of a single 16x16 cell, one bit per pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Glyph([u64; 4]);

impl Glyph {
    pub(crate) fn from_art(rows: &[&str; GLYPH_SIZE]) -> Self {
        let mut g = Glyph([0; 4]);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), GLYPH_SIZE, "glyph row {r} has wrong width");
            for (c, ch) in row.bytes().enumerate() {
                if ch == b'#' {
                    g.set(c + GLYPH_INSET, r + GLYPH_INSET);
                }
            }
        }
        g
    }

    fn set(&mut self, px: usize, py: usize) {
        let bit = py * CELL_PX + px;
        self.0[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, px: usize, py: usize) -> bool {
        let bit = py * CELL_PX + px;
        self.0[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn ink(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// Row-major grayscale image; rasters use 0 for background and 1 for ink.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitmap {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Bitmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0; width * height] }
    }

    /// Binarize real-valued pixels at 0.5.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height);
        let pixels = values.iter().map(|&v| u8::from(v >= 0.5)).collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn ink(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Pixel-wise maximum; used to compose decoded elements into a board.
    pub fn union(&mut self, other: &Bitmap) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.pixels.iter_mut().zip(&other.pixels) {
            *a = (*a).max(*b);
        }
    }

    pub fn draw_glyph(&mut self, glyph: &Glyph, pos: GridPos) {
        let (ox, oy) = (pos.x as usize * CELL_PX, pos.y as usize * CELL_PX);
        for py in 0..CELL_PX {
            for px in 0..CELL_PX {
                if glyph.get(px, py) {
                    self.set(ox + px, oy + py, 1);
                }
            }
        }
    }

    /// Ink mask of one grid cell.
    pub fn cell_glyph(&self, pos: GridPos) -> Glyph {
        let (ox, oy) = (pos.x as usize * CELL_PX, pos.y as usize * CELL_PX);
        let mut g = Glyph([0; 4]);
        for py in 0..CELL_PX {
            for px in 0..CELL_PX {
                if self.get(ox + px, oy + py) != 0 {
                    g.set(px, py);
                }
            }
        }
        g
    }

    /// Binary PGM (P5), ink rendered white.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| if p != 0 { 255 } else { 0 }).collect();
        w.write_all(&bytes)
    }
}

/// Deterministic rendering: each piece's atlas glyph centred in its cell.
/// Stacked pieces on one cell overlay by pixel-wise maximum.
pub fn rasterize<'a>(domain: &Domain, pieces: impl IntoIterator<Item = &'a Piece>) -> Bitmap {
    let side = domain.side_px();
    let mut img = Bitmap::zeros(side, side);
    for p in pieces {
        img.draw_glyph(&domain.glyph(p.shape), p.pos);
    }
    img
}

/// One 8-connected ink component, padded back to the full image size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub bitmap: Bitmap,
    /// Grid cell containing the component's bounding-box centre.
    pub cell: GridPos,
}

impl Component {
    pub fn glyph(&self) -> Glyph {
        self.bitmap.cell_glyph(self.cell)
    }
}

/// Split an image into its 8-connected ink components, ordered by the first
/// pixel each one reaches in a row-major scan.
pub fn connected_components(img: &Bitmap, cell_px: usize) -> Vec<Component> {
    let (w, h) = (img.width, img.height);
    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if img.pixels[start] == 0 || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            members.push(i);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if img.pixels[j] != 0 && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        let mut bitmap = Bitmap::zeros(w, h);
        for i in members {
            bitmap.pixels[i] = img.pixels[i];
        }
        let grid_w = (w / cell_px).max(1);
        let grid_h = (h / cell_px).max(1);
        let cell = GridPos::new(
            (((x0 + x1) / 2) / cell_px).min(grid_w - 1),
            (((y0 + y1) / 2) / cell_px).min(grid_h - 1),
        );
        out.push(Component { bitmap, cell });
    }
    out
}

/// Cells touched by any ink.
#[cfg(test)]
pub(crate) fn inked_cells(img: &Bitmap, cell_px: usize) -> std::collections::BTreeSet<GridPos> {
    let mut cells = std::collections::BTreeSet::new();
    for y in 0..img.height {
        for x in 0..img.width {
            if img.get(x, y) != 0 {
                cells.insert(GridPos::new(x / cell_px, y / cell_px));
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ShapeId;

    fn board(pieces: &[(u8, usize, usize)]) -> Vec<Piece> {
        pieces.iter().map(|&(s, x, y)| Piece::new(ShapeId(s), GridPos::new(x, y))).collect()
    }

    #[test]
    fn empty_board_is_blank() {
        let d = Domain::default();
        let img = rasterize(&d, &[]);
        assert_eq!((img.width(), img.height()), (48, 48));
        assert_eq!(img.ink(), 0);
        assert!(connected_components(&img, CELL_PX).is_empty());
    }

    #[test]
    fn every_glyph_is_one_component_with_margin() {
        let d = Domain::default();
        for s in d.shapes() {
            let g = d.glyph(s);
            assert!(g.ink() > 20, "{} too faint", d.name(s));
            for i in 0..CELL_PX {
                for edge in [0, 1, CELL_PX - 2, CELL_PX - 1] {
                    assert!(!g.get(i, edge) && !g.get(edge, i), "{} touches the border", d.name(s));
                }
            }
            let img = rasterize(&d, &[Piece::new(s, GridPos::new(1, 1))]);
            assert_eq!(connected_components(&img, CELL_PX).len(), 1, "{}", d.name(s));
        }
    }

    #[test]
    fn single_square_stays_in_its_cell() {
        let d = Domain::default();
        let sq = d.shape("square").unwrap();
        let img = rasterize(&d, &[Piece::new(sq, GridPos::new(0, 0))]);
        let cells = inked_cells(&img, CELL_PX);
        assert_eq!(cells.into_iter().collect::<Vec<_>>(), vec![GridPos::new(0, 0)]);
    }

    #[test]
    fn rasterize_is_injective_on_single_pieces() {
        let d = Domain::default();
        let imgs: Vec<Bitmap> = d.all_pieces().iter().map(|p| rasterize(&d, [p])).collect();
        for i in 0..imgs.len() {
            for j in i + 1..imgs.len() {
                assert_ne!(imgs[i], imgs[j], "pieces {i} and {j} render identically");
            }
        }
    }

    #[test]
    fn components_match_singleton_renders() {
        let d = Domain::default();
        let pieces = board(&[(3, 2, 0), (7, 0, 1)]);
        let img = rasterize(&d, &pieces);
        let comps = connected_components(&img, CELL_PX);
        assert_eq!(comps.len(), 2);
        // row-major: (2,0) is reached before (0,1)
        assert_eq!(comps[0].bitmap, rasterize(&d, [&pieces[0]]));
        assert_eq!(comps[0].cell, GridPos::new(2, 0));
        assert_eq!(comps[1].bitmap, rasterize(&d, [&pieces[1]]));
        assert_eq!(d.shape_of_glyph(&comps[1].glyph()), Some(ShapeId(7)));
    }

    #[test]
    fn full_board_splits_into_nine() {
        let d = Domain::default();
        for s in d.shapes() {
            let pieces: Vec<Piece> = d.cells().map(|p| Piece::new(s, p)).collect();
            let img = rasterize(&d, &pieces);
            assert_eq!(connected_components(&img, CELL_PX).len(), 9, "{}", d.name(s));
        }
    }

    #[test]
    fn pgm_header() {
        let d = Domain::default();
        let img = rasterize(&d, &board(&[(0, 0, 0)]));
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n48 48\n255\n"));
        assert_eq!(buf.len(), 13 + 48 * 48);
    }
}
