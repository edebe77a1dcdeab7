use std::fmt;

use super::{BoardState, Domain, GridPos, Piece, ShapeId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    fn delta(self) -> (i64, i64) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

/// An elementary board transform: a toroidal one-cell shift or a shape conversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transform {
    Shift(Direction),
    Convert(ShapeId),
}

impl Transform {
    pub fn is_conversion(self) -> bool {
        matches!(self, Transform::Convert(_))
    }

    pub fn name(self, domain: &Domain) -> String {
        match self {
            Transform::Shift(d) => format!("shift-{}", d.name()),
            Transform::Convert(s) => format!("to-{}", domain.name(s)),
        }
    }

    pub fn parse(name: &str, domain: &Domain) -> Result<Self> {
        if let Some(dir) = name.strip_prefix("shift-") {
            return Direction::ALL
                .iter()
                .find(|d| d.name() == dir)
                .map(|&d| Transform::Shift(d))
                .ok_or_else(|| Error::UnknownTransform(name.to_string()));
        }
        if let Some(shape) = name.strip_prefix("to-") {
            return domain
                .shape(shape)
                .map(Transform::Convert)
                .map_err(|_| Error::UnknownTransform(name.to_string()));
        }
        Err(Error::UnknownTransform(name.to_string()))
    }

    /// Exact effect on one piece.
    pub fn apply_piece(self, piece: Piece, grid: usize) -> Piece {
        match self {
            Transform::Shift(d) => {
                let (dx, dy) = d.delta();
                let g = grid as i64;
                let x = (piece.pos.x as i64 + dx).rem_euclid(g);
                let y = (piece.pos.y as i64 + dy).rem_euclid(g);
                Piece::new(piece.shape, GridPos::new(x as usize, y as usize))
            }
            Transform::Convert(s) => Piece::new(s, piece.pos),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact symbolic transform of a whole board.
pub fn ground_truth_transform(domain: &Domain, t: Transform, board: &BoardState) -> Result<BoardState> {
    let pieces = board
        .pieces()
        .ok_or_else(|| Error::Config("symbolic transform needs a board with pieces".into()))?;
    let out = BoardState::from_pieces(pieces.iter().map(|p| t.apply_piece(*p, domain.grid())));
    Ok(if board.raster().is_some() { out.rendered(domain) } else { out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::board_equal;

    fn single(d: &Domain, name: &str, x: usize, y: usize) -> BoardState {
        BoardState::new(d, [Piece::new(d.shape(name).unwrap(), GridPos::new(x, y))]).unwrap()
    }

    #[test]
    fn shift_right_table() {
        let d = Domain::default();
        let t = Transform::parse("shift-right", &d).unwrap();
        // hand-enumerated: x -> (x + 1) mod 3, y fixed
        let expected = [(1, 0), (2, 0), (0, 0), (1, 1), (2, 1), (0, 1), (1, 2), (2, 2), (0, 2)];
        for (pos, want) in d.cells().zip(expected) {
            let b = single(&d, "square", pos.x as usize, pos.y as usize);
            let out = ground_truth_transform(&d, t, &b).unwrap();
            assert!(board_equal(&d, &out, &single(&d, "square", want.0, want.1)), "{pos}");
        }
    }

    #[test]
    fn conversion_keeps_positions() {
        let d = Domain::default();
        let sq = d.shape("square").unwrap();
        let delta = d.shape("delta").unwrap();
        let circle = d.shape("circle").unwrap();
        let b = BoardState::new(&d, [Piece::new(sq, GridPos::new(1, 1)), Piece::new(delta, GridPos::new(0, 0))])
            .unwrap();
        let out = ground_truth_transform(&d, Transform::parse("to-circle", &d).unwrap(), &b).unwrap();
        let want = BoardState::new(
            &d,
            [Piece::new(circle, GridPos::new(1, 1)), Piece::new(circle, GridPos::new(0, 0))],
        )
        .unwrap();
        assert!(board_equal(&d, &out, &want));
    }

    #[test]
    fn names_round_trip() {
        let d = Domain::default();
        for t in d.default_transforms() {
            assert_eq!(Transform::parse(&t.name(&d), &d).unwrap(), t);
        }
        assert_eq!(d.default_transforms()[7].name(&d), "to-delta");
        assert!(Transform::parse("shift-sideways", &d).is_err());
        assert!(Transform::parse("to-blob", &d).is_err());
        assert!(Transform::parse("rotate", &d).is_err());
    }

    #[test]
    fn shift_period_equals_grid() {
        let d = Domain::default();
        for dir in Direction::ALL {
            let t = Transform::Shift(dir);
            for p in d.all_pieces() {
                let once = t.apply_piece(p, 3);
                assert_ne!(once, p);
                let thrice = t.apply_piece(t.apply_piece(once, 3), 3);
                assert_eq!(thrice, p);
                assert_ne!(t.apply_piece(thrice, 3), p);
            }
        }
    }

    #[test]
    fn wrap_on_larger_grid() {
        let p = Piece::new(ShapeId(0), GridPos::new(0, 4));
        assert_eq!(Transform::Shift(Direction::Left).apply_piece(p, 5).pos, GridPos::new(4, 4));
        assert_eq!(Transform::Shift(Direction::Down).apply_piece(p, 5).pos, GridPos::new(0, 0));
    }
}
