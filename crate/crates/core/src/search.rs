//! Program search: exhaustive BFS, pruned BFS over cached partial states, and
//! beam search guided by a match-counting score.

use std::collections::{BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{board_equal, connected_components, BoardState, Domain, Piece, ShapeId, Transform, CELL_PX};
use crate::latent::piece_of_raster;
use crate::vm::{primitive_alphabet, Executor, MemoryInit, Primitive, Program, ProgramState};

/// One input/output pair.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: BoardState,
    pub output: BoardState,
}

#[derive(Clone, Debug)]
pub struct Task {
    pub examples: Vec<Example>,
    pub query: BoardState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Naive,
    Pruned,
    Beam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub max_depth: usize,
    pub beam_width: usize,
    /// Score bonus per conversion whose target shape occurs in some target output.
    pub beta: f64,
    /// Reuse partial execution states; off re-executes every node from scratch.
    pub cache: bool,
    /// Pop the newest node first instead of the oldest.
    pub lifo: bool,
    pub timeout_ms: Option<u64>,
    pub memory_init: MemoryInit,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Pruned,
            max_depth: 6,
            beam_width: 500,
            beta: 0.5,
            cache: true,
            lifo: false,
            timeout_ms: None,
            memory_init: MemoryInit::Input,
        }
    }
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, max_depth: usize) -> Self {
        Self { algorithm, max_depth, ..Self::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub satisfies_checks: u64,
    pub prunes_wrong_element: u64,
    pub prunes_fewer_matches: u64,
    pub primitive_steps: u64,
    pub wall_ms: f64,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub program: Option<Program>,
    pub stats: SearchStats,
}

/// True when every example's output is reproduced. Vacuously true for no examples.
pub fn satisfies<X: Executor>(ex: &X, examples: &[Example], program: &Program, init: MemoryInit) -> Result<bool> {
    for e in examples {
        let got = ex.run(program, &e.input, init)?;
        if !board_equal(ex.domain(), &got, &e.output) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pieces of a target board, recovered from its raster when it has no piece list.
pub fn target_pieces(domain: &Domain, board: &BoardState) -> Result<BTreeSet<Piece>> {
    if let Some(p) = board.pieces() {
        return Ok(p.clone());
    }
    let raster = board.raster().ok_or(Error::MissingRaster)?;
    connected_components(raster, CELL_PX)
        .into_iter()
        .map(|c| {
            piece_of_raster(domain, &c.bitmap)
                .ok_or(Error::UnknownGlyph { x: c.cell.x as usize, y: c.cell.y as usize })
        })
        .collect()
}

/// A partially executed program with its per-example state.
#[derive(Clone, Debug)]
pub struct SearchNode<E> {
    pub program: Program,
    pub states: Vec<ProgramState<E>>,
    /// Decoded output per example.
    pub outputs: Vec<BTreeSet<Piece>>,
    /// Target pieces produced so far, summed over examples.
    pub matches: usize,
}

impl<E> SearchNode<E> {
    fn solves(&self, targets: &[BTreeSet<Piece>]) -> bool {
        self.outputs.iter().zip(targets).all(|(o, t)| o == t)
    }
}

/// `matches` plus `beta` for each conversion in `program` towards a shape
/// present in the targets.
pub fn rule_score(matches: usize, program: &Program, target_shapes: &BTreeSet<ShapeId>, beta: f64) -> f64 {
    let bonus = program
        .prims()
        .iter()
        .filter(|p| matches!(p, Primitive::Transform(Transform::Convert(s)) if target_shapes.contains(s)))
        .count();
    matches as f64 + beta * bonus as f64
}

struct Searcher<'a, X: Executor> {
    ex: &'a X,
    examples: &'a [Example],
    alphabet: Vec<Primitive>,
    targets: Vec<BTreeSet<Piece>>,
    cfg: &'a SearchConfig,
    stats: SearchStats,
    start: Instant,
    deadline: Option<Instant>,
}

impl<'a, X: Executor> Searcher<'a, X> {
    fn new(ex: &'a X, transforms: &[Transform], examples: &'a [Example], cfg: &'a SearchConfig) -> Result<Self> {
        let targets = examples.iter().map(|e| target_pieces(ex.domain(), &e.output)).collect::<Result<_>>()?;
        let start = Instant::now();
        Ok(Self {
            ex,
            examples,
            alphabet: primitive_alphabet(transforms),
            targets,
            cfg,
            stats: SearchStats::default(),
            start,
            deadline: cfg.timeout_ms.map(|ms| start + Duration::from_millis(ms)),
        })
    }

    fn out_of_time(&mut self) -> bool {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.stats.timed_out = true;
        }
        self.stats.timed_out
    }

    fn finish(mut self, program: Option<Program>) -> SearchResult {
        self.stats.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        SearchResult { program, stats: self.stats }
    }

    fn children<'p>(&'p self, program: &'p Program) -> impl Iterator<Item = Primitive> + 'p {
        self.alphabet.iter().copied().filter(move |&p| Primitive::may_follow(program.last(), p))
    }

    fn check(&mut self, program: &Program) -> Result<bool> {
        self.stats.satisfies_checks += 1;
        satisfies(self.ex, self.examples, program, self.cfg.memory_init)
    }

    /// Exhaustive breadth-first search re-running every candidate from scratch.
    fn naive(mut self) -> Result<SearchResult> {
        let mut queue = VecDeque::from([Program::default()]);
        while let Some(program) = self.pop(&mut queue) {
            if program.len() >= self.cfg.max_depth || self.out_of_time() {
                continue;
            }
            let kids: Vec<Primitive> = self.children(&program).collect();
            for p in kids {
                let child = program.extended(p);
                self.stats.nodes_expanded += 1;
                if p == Primitive::Out {
                    self.stats.primitive_steps += (child.len() * self.examples.len()) as u64;
                    if self.check(&child)? {
                        return Ok(self.finish(Some(child)));
                    }
                }
                queue.push_back(child);
            }
        }
        Ok(self.finish(None))
    }

    fn pop<T>(&self, queue: &mut VecDeque<T>) -> Option<T> {
        if self.cfg.lifo {
            queue.pop_back()
        } else {
            queue.pop_front()
        }
    }

    fn root(&mut self) -> Result<SearchNode<X::Elem>> {
        let states = self
            .examples
            .iter()
            .map(|e| self.ex.start(&e.input, self.cfg.memory_init))
            .collect::<Result<Vec<_>>>()?;
        Ok(SearchNode { program: Program::default(), outputs: vec![BTreeSet::new(); states.len()], states, matches: 0 })
    }

    /// Child of `node` by one primitive, or `None` when its output holds an
    /// element that is not in the target.
    fn child(&mut self, node: &SearchNode<X::Elem>, p: Primitive) -> Result<Option<SearchNode<X::Elem>>> {
        self.stats.nodes_expanded += 1;
        let program = node.program.extended(p);
        if !self.cfg.cache {
            return self.execute_fresh(program);
        }
        let mut states = node.states.clone();
        let mut outputs = node.outputs.clone();
        let mut matches = node.matches;
        for (i, st) in states.iter_mut().enumerate() {
            self.stats.primitive_steps += 1;
            let added = self.ex.step(st, p)?;
            let fresh = st.output.len() - added;
            for elem in &st.output[fresh..] {
                match self.ex.decode_element(elem)? {
                    Some(piece) if self.targets[i].contains(&piece) => {
                        if outputs[i].insert(piece) {
                            matches += 1;
                        }
                    }
                    _ => {
                        self.stats.prunes_wrong_element += 1;
                        return Ok(None);
                    }
                }
            }
        }
        Ok(Some(SearchNode { program, states, outputs, matches }))
    }

    fn execute_fresh(&mut self, program: Program) -> Result<Option<SearchNode<X::Elem>>> {
        let mut states = Vec::with_capacity(self.examples.len());
        let mut outputs = Vec::with_capacity(self.examples.len());
        let mut matches = 0;
        for (i, e) in self.examples.iter().enumerate() {
            let mut st = self.ex.start(&e.input, self.cfg.memory_init)?;
            for &p in program.prims() {
                self.stats.primitive_steps += 1;
                self.ex.step(&mut st, p)?;
            }
            let mut out = BTreeSet::new();
            for elem in &st.output {
                match self.ex.decode_element(elem)? {
                    Some(piece) if self.targets[i].contains(&piece) => {
                        out.insert(piece);
                    }
                    _ => {
                        self.stats.prunes_wrong_element += 1;
                        return Ok(None);
                    }
                }
            }
            matches += out.len();
            outputs.push(out);
            states.push(st);
        }
        Ok(Some(SearchNode { program, states, outputs, matches }))
    }

    /// A candidate whose decoded outputs equal the targets, confirmed by a
    /// full re-execution.
    fn accepts(&mut self, node: &SearchNode<X::Elem>) -> Result<bool> {
        Ok(node.program.last() == Some(Primitive::Out) && node.solves(&self.targets) && self.check(&node.program)?)
    }

    fn pruned(mut self) -> Result<SearchResult> {
        let mut queue = VecDeque::from([self.root()?]);
        let mut best = 0usize;
        while let Some(node) = self.pop(&mut queue) {
            if node.program.len() >= self.cfg.max_depth || self.out_of_time() {
                continue;
            }
            if node.matches < best {
                self.stats.prunes_fewer_matches += 1;
                continue;
            }
            let kids: Vec<Primitive> = self.children(&node.program).collect();
            for p in kids {
                let Some(child) = self.child(&node, p)? else { continue };
                if self.accepts(&child)? {
                    return Ok(self.finish(Some(child.program)));
                }
                if child.matches < best {
                    self.stats.prunes_fewer_matches += 1;
                    continue;
                }
                best = best.max(child.matches);
                queue.push_back(child);
            }
        }
        Ok(self.finish(None))
    }

    fn beam(mut self) -> Result<SearchResult> {
        let width = self.cfg.beam_width.max(1);
        let target_shapes: BTreeSet<ShapeId> = self.targets.iter().flatten().map(|p| p.shape).collect();
        let mut beam = vec![self.root()?];
        for _ in 0..self.cfg.max_depth {
            let mut next = Vec::new();
            for node in &beam {
                if self.out_of_time() {
                    return Ok(self.finish(None));
                }
                let kids: Vec<Primitive> = self.children(&node.program).collect();
                for p in kids {
                    let Some(child) = self.child(node, p)? else { continue };
                    if self.accepts(&child)? {
                        return Ok(self.finish(Some(child.program)));
                    }
                    next.push(child);
                }
            }
            let mut scored: Vec<(f64, SearchNode<X::Elem>)> = next
                .into_iter()
                .map(|n| (rule_score(n.matches, &n.program, &target_shapes, self.cfg.beta), n))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.program.cmp(&b.1.program)));
            scored.truncate(width);
            beam = scored.into_iter().map(|(_, n)| n).collect();
            if beam.is_empty() {
                break;
            }
        }
        Ok(self.finish(None))
    }
}

/// Run the configured search over programs built from `transforms`, `out` and `reset`.
pub fn search<X: Executor>(
    ex: &X,
    transforms: &[Transform],
    examples: &[Example],
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if cfg.max_depth == 0 {
        return Err(Error::Config("search depth must be at least 1".into()));
    }
    let s = Searcher::new(ex, transforms, examples, cfg)?;
    match cfg.algorithm {
        Algorithm::Naive => s.naive(),
        Algorithm::Pruned => s.pruned(),
        Algorithm::Beam => s.beam(),
    }
}

pub fn naive_bfs<X: Executor>(ex: &X, transforms: &[Transform], examples: &[Example], max_depth: usize) -> Result<SearchResult> {
    search(ex, transforms, examples, &SearchConfig::new(Algorithm::Naive, max_depth))
}

pub fn pruned_bfs<X: Executor>(ex: &X, transforms: &[Transform], examples: &[Example], max_depth: usize) -> Result<SearchResult> {
    search(ex, transforms, examples, &SearchConfig::new(Algorithm::Pruned, max_depth))
}

pub fn beam_search<X: Executor>(
    ex: &X,
    transforms: &[Transform],
    examples: &[Example],
    max_depth: usize,
    beam_width: usize,
) -> Result<SearchResult> {
    let cfg = SearchConfig { beam_width, ..SearchConfig::new(Algorithm::Beam, max_depth) };
    search(ex, transforms, examples, &cfg)
}

/// Search for a program explaining the examples and apply it to the query.
pub fn solve_task<X: Executor>(
    ex: &X,
    transforms: &[Transform],
    task: &Task,
    cfg: &SearchConfig,
) -> Result<(Option<BoardState>, SearchResult)> {
    let result = search(ex, transforms, &task.examples, cfg)?;
    let prediction = match &result.program {
        Some(p) => Some(ex.run(p, &task.query, cfg.memory_init)?),
        None => None,
    };
    Ok((prediction, result))
}
