//! Programs and the machine that runs them.
//!
//! A program state holds three buffers: the encoded input, a working memory and
//! the output. Transforms rewrite every memory element, `out` appends the
//! memory to the output and `reset` restores the memory from the input. The
//! machine is generic over its element type so the same semantics drive both
//! the exact symbolic interpreter and the neural one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoardState, Domain, Piece, Transform};
use crate::latent::{Latent, LatentSpace, Provenance};
use crate::transforms::{TransformMode, TransformSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Transform(Transform),
    Out,
    Reset,
}

impl Primitive {
    pub fn is_conversion(self) -> bool {
        matches!(self, Primitive::Transform(t) if t.is_conversion())
    }

    pub fn name(self, domain: &Domain) -> String {
        match self {
            Primitive::Transform(t) => t.name(domain),
            Primitive::Out => "out".into(),
            Primitive::Reset => "reset".into(),
        }
    }

    pub fn parse(token: &str, domain: &Domain) -> Result<Self> {
        match token {
            "out" => Ok(Primitive::Out),
            "reset" => Ok(Primitive::Reset),
            t => Transform::parse(t, domain)
                .map(Primitive::Transform)
                .map_err(|_| Error::UnknownPrimitive(t.to_string())),
        }
    }

    /// Whether `next` may follow `prev` (`None` at the start of a program).
    pub fn may_follow(prev: Option<Primitive>, next: Primitive) -> bool {
        match (prev, next) {
            (_, Primitive::Reset) => prev == Some(Primitive::Out),
            (Some(Primitive::Out), Primitive::Out) => false,
            (Some(p), n) if p.is_conversion() && n.is_conversion() => false,
            _ => true,
        }
    }
}

/// Primitives available to a search or generator, in expansion order:
/// transforms as given, then `out`, then `reset`.
pub fn primitive_alphabet(transforms: &[Transform]) -> Vec<Primitive> {
    let mut prims: Vec<Primitive> = transforms.iter().map(|&t| Primitive::Transform(t)).collect();
    prims.push(Primitive::Out);
    prims.push(Primitive::Reset);
    prims
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Program(pub Vec<Primitive>);

impl Program {
    pub fn new(prims: Vec<Primitive>) -> Self {
        Self(prims)
    }

    pub fn prims(&self) -> &[Primitive] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<Primitive> {
        self.0.last().copied()
    }

    pub fn extended(&self, p: Primitive) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(p);
        Self(v)
    }

    pub fn parse(text: &str, domain: &Domain) -> Result<Self> {
        text.split_whitespace().map(|t| Primitive::parse(t, domain)).collect::<Result<Vec<_>>>().map(Self)
    }

    pub fn to_text(&self, domain: &Domain) -> String {
        self.0.iter().map(|p| p.name(domain)).collect::<Vec<_>>().join(" ")
    }

    /// Every adjacent pair obeys [`Primitive::may_follow`]; says nothing about the ending.
    pub fn is_valid_prefix(&self) -> bool {
        let mut prev = None;
        for &p in &self.0 {
            if !Primitive::may_follow(prev, p) {
                return false;
            }
            prev = Some(p);
        }
        true
    }

    /// A valid prefix that ends with `out`.
    pub fn is_well_formed(&self) -> bool {
        self.last() == Some(Primitive::Out) && self.is_valid_prefix()
    }

    /// The first constraint this program breaks, if any.
    pub fn violation(&self) -> Option<String> {
        let mut prev = None;
        for (i, &p) in self.0.iter().enumerate() {
            if !Primitive::may_follow(prev, p) {
                let what = match p {
                    Primitive::Reset => "reset must directly follow out",
                    Primitive::Out => "consecutive out",
                    _ => "consecutive shape conversions",
                };
                return Some(format!("{what} at position {i}"));
            }
            prev = Some(p);
        }
        (self.last() != Some(Primitive::Out)).then(|| "program must end with out".to_string())
    }
}

/// How the memory buffer starts out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryInit {
    #[default]
    Input,
    Empty,
}

/// Input, memory and output buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramState<E> {
    input: Arc<Vec<E>>,
    pub memory: Vec<E>,
    pub output: Vec<E>,
}

impl<E: Clone> ProgramState<E> {
    pub fn new(input: Vec<E>, init: MemoryInit) -> Self {
        let memory = match init {
            MemoryInit::Input => input.clone(),
            MemoryInit::Empty => Vec::new(),
        };
        Self { input: Arc::new(input), memory, output: Vec::new() }
    }

    pub fn input(&self) -> &[E] {
        &self.input
    }
}

/// Element-level semantics for the machine.
pub trait Executor {
    type Elem: Clone;

    fn domain(&self) -> &Domain;

    fn encode(&self, board: &BoardState) -> Result<Vec<Self::Elem>>;

    fn transform(&self, t: Transform, elems: &[Self::Elem]) -> Result<Vec<Self::Elem>>;

    fn decode(&self, elems: &[Self::Elem]) -> Result<BoardState>;

    /// The piece one element stands for, or `None` if it decodes to nothing recognisable.
    fn decode_element(&self, elem: &Self::Elem) -> Result<Option<Piece>>;

    fn start(&self, board: &BoardState, init: MemoryInit) -> Result<ProgramState<Self::Elem>> {
        Ok(ProgramState::new(self.encode(board)?, init))
    }

    /// Execute one primitive, returning the elements it appended to the output.
    fn step(&self, state: &mut ProgramState<Self::Elem>, p: Primitive) -> Result<usize> {
        match p {
            Primitive::Transform(t) => {
                state.memory = self.transform(t, &state.memory)?;
                Ok(0)
            }
            Primitive::Out => {
                state.output.extend(state.memory.iter().cloned());
                Ok(state.memory.len())
            }
            Primitive::Reset => {
                state.memory = state.input.as_ref().clone();
                Ok(0)
            }
        }
    }

    fn run(&self, program: &Program, board: &BoardState, init: MemoryInit) -> Result<BoardState> {
        let mut state = self.start(board, init)?;
        for &p in program.prims() {
            self.step(&mut state, p)?;
        }
        self.decode(&state.output)
    }
}

/// Exact interpreter using the oracle transforms.
#[derive(Clone, Debug)]
pub struct SymbolicExecutor<'a> {
    pub domain: &'a Domain,
}

impl Executor for SymbolicExecutor<'_> {
    type Elem = Piece;

    fn domain(&self) -> &Domain {
        self.domain
    }

    fn encode(&self, board: &BoardState) -> Result<Vec<Piece>> {
        let pieces = board
            .pieces()
            .ok_or_else(|| Error::Config("symbolic execution needs a board with pieces".into()))?;
        Ok(pieces.iter().copied().collect())
    }

    fn transform(&self, t: Transform, elems: &[Piece]) -> Result<Vec<Piece>> {
        Ok(elems.iter().map(|&p| t.apply_piece(p, self.domain.grid())).collect())
    }

    fn decode(&self, elems: &[Piece]) -> Result<BoardState> {
        Ok(BoardState::from_pieces(elems.iter().copied()))
    }

    fn decode_element(&self, elem: &Piece) -> Result<Option<Piece>> {
        Ok(Some(*elem))
    }
}

/// Interpreter over a latent space and learned transforms.
#[derive(Clone, Copy, Debug)]
pub struct NeuralExecutor<'a> {
    pub domain: &'a Domain,
    pub space: &'a LatentSpace,
    pub transforms: &'a TransformSet,
}

impl<'a> NeuralExecutor<'a> {
    pub fn new(domain: &'a Domain, space: &'a LatentSpace, transforms: &'a TransformSet) -> Result<Self> {
        if space.latent_dim() != transforms.latent_dim() {
            return Err(Error::LengthMismatch { expected: space.latent_dim(), actual: transforms.latent_dim() });
        }
        Ok(Self { domain, space, transforms })
    }
}

impl Executor for NeuralExecutor<'_> {
    type Elem = Latent;

    fn domain(&self) -> &Domain {
        self.domain
    }

    fn encode(&self, board: &BoardState) -> Result<Vec<Latent>> {
        if self.space.kind().encodes_images() && board.raster().is_none() {
            return self.space.encode_board(self.domain, &board.clone().rendered(self.domain));
        }
        self.space.encode_board(self.domain, board)
    }

    fn transform(&self, t: Transform, elems: &[Latent]) -> Result<Vec<Latent>> {
        let idx = self.transforms.index_of(t)?;
        elems
            .iter()
            .map(|l| {
                let prov = match t {
                    Transform::Convert(s) => Provenance { glyph: self.domain.glyph(s) },
                    Transform::Shift(_) => l.prov,
                };
                Ok(Latent { z: self.transforms.apply_index(idx, &l.z)?, prov })
            })
            .collect()
    }

    fn decode(&self, elems: &[Latent]) -> Result<BoardState> {
        self.space.decode_latents(self.domain, elems)
    }

    fn decode_element(&self, elem: &Latent) -> Result<Option<Piece>> {
        self.space.decode_element(self.domain, elem)
    }
}

/// Run `program` on `board` through a latent space and learned transforms.
pub fn apply_program(
    domain: &Domain,
    program: &Program,
    board: &BoardState,
    space: &LatentSpace,
    transforms: &TransformSet,
) -> Result<BoardState> {
    NeuralExecutor::new(domain, space, transforms)?.run(program, board, MemoryInit::Input)
}

/// Exact reference semantics.
pub fn apply_program_symbolic(domain: &Domain, program: &Program, board: &BoardState) -> Result<BoardState> {
    SymbolicExecutor { domain }.run(program, board, MemoryInit::Input)
}

/// [`apply_program`] for a shared, vector-conditioned transform network.
pub fn apply_program_vectors(
    domain: &Domain,
    program: &Program,
    board: &BoardState,
    space: &LatentSpace,
    transforms: &TransformSet,
) -> Result<BoardState> {
    if transforms.mode() != TransformMode::Vector {
        return Err(Error::Config("expected vector-conditioned transforms".into()));
    }
    apply_program(domain, program, board, space, transforms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{board_equal, GridPos};

    fn prog(d: &Domain, s: &str) -> Program {
        Program::parse(s, d).unwrap()
    }

    fn board(d: &Domain, pieces: &[(&str, usize, usize)]) -> BoardState {
        BoardState::new(d, pieces.iter().map(|&(s, x, y)| Piece::new(d.shape(s).unwrap(), GridPos::new(x, y)))).unwrap()
    }

    #[test]
    fn token_text_round_trips() {
        let d = Domain::default();
        let text = "shift-right out reset to-circle out";
        let p = prog(&d, text);
        assert_eq!(p.len(), 5);
        assert_eq!(p.to_text(&d), text);
        assert!(matches!(Program::parse("shift-right jump", &d), Err(Error::UnknownPrimitive(_))));
        assert!(Program::parse("", &d).unwrap().is_empty());
    }

    #[test]
    fn well_formedness() {
        let d = Domain::default();
        for ok in ["out", "shift-up out", "to-circle shift-up to-square out", "out reset out", "shift-left out reset to-delta out"] {
            assert!(prog(&d, ok).is_well_formed(), "{ok}");
        }
        for bad in ["", "shift-up", "reset out", "out out", "out reset reset out", "to-circle to-square out", "shift-up reset out"] {
            let p = prog(&d, bad);
            assert!(!p.is_well_formed(), "{bad}");
            assert!(p.violation().is_some());
        }
    }

    #[test]
    fn symbolic_semantics() {
        let d = Domain::default();
        let b = board(&d, &[("square", 0, 1)]);
        assert!(board_equal(&d, &apply_program_symbolic(&d, &prog(&d, "out"), &b).unwrap(), &b));
        let r = apply_program_symbolic(&d, &prog(&d, "shift-right out"), &b).unwrap();
        assert!(board_equal(&d, &r, &board(&d, &[("square", 1, 1)])));

        let b = board(&d, &[("square", 0, 0)]);
        let r = apply_program_symbolic(&d, &prog(&d, "shift-right out reset to-circle out"), &b).unwrap();
        assert!(board_equal(&d, &r, &board(&d, &[("square", 1, 0), ("circle", 0, 0)])));

        let r = apply_program_symbolic(&d, &prog(&d, "out reset out"), &b).unwrap();
        assert!(board_equal(&d, &r, &b));
        assert!(apply_program_symbolic(&d, &prog(&d, "shift-up"), &b).unwrap().is_empty());
        assert!(apply_program_symbolic(&d, &prog(&d, "shift-up out"), &BoardState::empty()).unwrap().is_empty());
    }

    #[test]
    fn empty_memory_start() {
        let d = Domain::default();
        let b = board(&d, &[("square", 0, 0)]);
        let ex = SymbolicExecutor { domain: &d };
        assert!(ex.run(&prog(&d, "shift-up out"), &b, MemoryInit::Empty).unwrap().is_empty());
        let r = ex.run(&prog(&d, "out reset shift-up out"), &b, MemoryInit::Empty).unwrap();
        assert!(board_equal(&d, &r, &board(&d, &[("square", 0, 2)])));
    }

    #[test]
    fn buffers_are_touched_only_where_allowed() {
        let d = Domain::default();
        let b = board(&d, &[("square", 0, 0), ("star", 2, 1)]);
        let ex = SymbolicExecutor { domain: &d };
        let mut st = ex.start(&b, MemoryInit::Input).unwrap();
        let input = st.input().to_vec();
        ex.step(&mut st, Primitive::Transform(Transform::parse("shift-up", &d).unwrap())).unwrap();
        assert_eq!(st.input(), input.as_slice());
        assert!(st.output.is_empty());
        let mem = st.memory.clone();
        assert_eq!(ex.step(&mut st, Primitive::Out).unwrap(), 2);
        assert_eq!(st.memory, mem);
        ex.step(&mut st, Primitive::Reset).unwrap();
        assert_eq!(st.memory, input);
        assert_eq!(st.input(), input.as_slice());
    }
}
