//! Constrained program generation, program datasets and task synthesis.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoardJson, BoardState, Domain, Piece, ShapeId, Transform};
use crate::search::{Example, Task};
use crate::vm::{apply_program_symbolic, primitive_alphabet, Primitive, Program};

/// Number of well-formed programs of each length `0..=max_len` over `transforms`.
///
/// Counts completions from every possible last primitive, so it also drives
/// uniform sampling.
struct Completions {
    alphabet: Vec<Primitive>,
    /// `table[r][s]`: ways to append `r` primitives after state `s` and end on `out`.
    /// State 0 is the empty program, state `i + 1` means alphabet entry `i` was last.
    table: Vec<Vec<u128>>,
}

impl Completions {
    fn new(transforms: &[Transform], max_len: usize) -> Self {
        let alphabet = primitive_alphabet(transforms);
        let states = alphabet.len() + 1;
        let last = |s: usize| if s == 0 { None } else { Some(alphabet[s - 1]) };
        let mut table = vec![vec![0u128; states]; max_len + 1];
        for (s, n) in table[0].iter_mut().enumerate() {
            *n = u128::from(last(s) == Some(Primitive::Out));
        }
        for r in 1..=max_len {
            for s in 0..states {
                table[r][s] = alphabet
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| Primitive::may_follow(last(s), p))
                    .map(|(i, _)| table[r - 1][i + 1])
                    .fold(0u128, |a, b| a.saturating_add(b));
            }
        }
        Self { alphabet, table }
    }

    fn total(&self, length: usize) -> u128 {
        self.table[length][0]
    }

    fn sample<R: Rng>(&self, length: usize, rng: &mut R) -> Program {
        let mut prims = Vec::with_capacity(length);
        let mut state = 0usize;
        for r in (0..length).rev() {
            let last = if state == 0 { None } else { Some(self.alphabet[state - 1]) };
            let options: Vec<(usize, u128)> = self
                .alphabet
                .iter()
                .enumerate()
                .filter(|(_, &p)| Primitive::may_follow(last, p))
                .map(|(i, _)| (i, self.table[r][i + 1]))
                .filter(|&(_, c)| c > 0)
                .collect();
            let total: u128 = options.iter().map(|o| o.1).sum();
            let mut pick = rng.gen_range(0..total);
            let mut chosen = options[0].0;
            for (i, c) in options {
                if pick < c {
                    chosen = i;
                    break;
                }
                pick -= c;
            }
            prims.push(self.alphabet[chosen]);
            state = chosen + 1;
        }
        Program::new(prims)
    }
}

/// How many well-formed programs of exactly `length` exist over `transforms`.
pub fn count_programs(length: usize, transforms: &[Transform]) -> u128 {
    Completions::new(transforms, length).total(length)
}

/// A uniformly drawn well-formed program of exactly `length`.
pub fn random_program<R: Rng>(length: usize, transforms: &[Transform], rng: &mut R) -> Result<Program> {
    let c = Completions::new(transforms, length);
    if c.total(length) == 0 {
        return Err(Error::Infeasible(format!("no well-formed program of length {length}")));
    }
    Ok(c.sample(length, rng))
}

/// Every well-formed program of exactly `length`, in lexicographic order.
pub fn enumerate_programs(length: usize, transforms: &[Transform]) -> Vec<Program> {
    let alphabet = primitive_alphabet(transforms);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(length);
    fn walk(alphabet: &[Primitive], length: usize, prefix: &mut Vec<Primitive>, out: &mut Vec<Program>) {
        if prefix.len() == length {
            if prefix.last() == Some(&Primitive::Out) {
                out.push(Program::new(prefix.clone()));
            }
            return;
        }
        for &p in alphabet {
            if Primitive::may_follow(prefix.last().copied(), p) {
                prefix.push(p);
                walk(alphabet, length, prefix, out);
                prefix.pop();
            }
        }
    }
    if length > 0 {
        walk(&alphabet, length, &mut prefix, &mut out);
    }
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub transforms: Vec<String>,
    pub min_length: usize,
    pub max_length: usize,
    /// Programs per length; lengths with fewer possible programs are taken whole.
    pub per_length: usize,
}

impl DatasetSpec {
    pub fn r20all(domain: &Domain) -> Self {
        Self {
            name: "R20ALL".into(),
            transforms: domain.default_transforms().iter().map(|t| t.name(domain)).collect(),
            min_length: 1,
            max_length: 20,
            per_length: 1000,
        }
    }

    pub fn r20shift(domain: &Domain) -> Self {
        Self {
            name: "R20SHIFT".into(),
            transforms: domain.shift_transforms().iter().map(|t| t.name(domain)).collect(),
            ..Self::r20all(domain)
        }
    }

    pub fn parse_transforms(&self, domain: &Domain) -> Result<Vec<Transform>> {
        self.transforms.iter().map(|t| Transform::parse(t, domain)).collect()
    }

    /// Programs this spec yields at each length.
    pub fn planned_counts(&self, domain: &Domain) -> Result<BTreeMap<usize, usize>> {
        let ts = self.parse_transforms(domain)?;
        let c = Completions::new(&ts, self.max_length);
        Ok((self.min_length..=self.max_length)
            .map(|l| (l, c.total(l).min(self.per_length as u128) as usize))
            .filter(|&(_, n)| n > 0)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgramDataset {
    pub name: String,
    pub seed: u64,
    pub programs: Vec<Program>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    seed: u64,
    total: usize,
    histogram: BTreeMap<usize, usize>,
}

impl ProgramDataset {
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for p in &self.programs {
            *h.entry(p.len()).or_insert(0) += 1;
        }
        h
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn of_length(&self, length: usize) -> impl Iterator<Item = &Program> {
        self.programs.iter().filter(move |p| p.len() == length)
    }

    /// Writes `<name>.txt` (one program per line) and `<name>.json`.
    pub fn save(&self, domain: &Domain, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(format!("{}.txt", self.name)))?);
        for p in &self.programs {
            writeln!(w, "{}", p.to_text(domain))?;
        }
        w.flush()?;
        let manifest =
            Manifest { name: self.name.clone(), seed: self.seed, total: self.len(), histogram: self.histogram() };
        serde_json::to_writer_pretty(File::create(dir.join(format!("{}.json", self.name)))?, &manifest)?;
        Ok(())
    }

    pub fn load(domain: &Domain, dir: &Path, name: &str) -> Result<Self> {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(dir.join(format!("{name}.json")))?))?;
        let mut programs = Vec::new();
        for line in BufReader::new(File::open(dir.join(format!("{name}.txt")))?).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                programs.push(Program::parse(&line, domain)?);
            }
        }
        let ds = Self { name: manifest.name, seed: manifest.seed, programs };
        if ds.histogram() != manifest.histogram {
            return Err(Error::Config(format!("{name}: program file disagrees with its manifest")));
        }
        Ok(ds)
    }
}

/// Exhaustive where a length has at most `per_length` programs, otherwise a
/// duplicate-free uniform sample.
pub fn build_dataset<R: Rng>(domain: &Domain, spec: &DatasetSpec, seed: u64, rng: &mut R) -> Result<ProgramDataset> {
    let ts = spec.parse_transforms(domain)?;
    if spec.min_length == 0 || spec.min_length > spec.max_length {
        return Err(Error::Config(format!("bad length range {}..={}", spec.min_length, spec.max_length)));
    }
    let c = Completions::new(&ts, spec.max_length);
    let mut programs = Vec::new();
    for length in spec.min_length..=spec.max_length {
        let total = c.total(length);
        if total <= spec.per_length as u128 {
            programs.extend(enumerate_programs(length, &ts));
            continue;
        }
        let mut seen = HashSet::new();
        let mut picked = Vec::with_capacity(spec.per_length);
        while picked.len() < spec.per_length {
            let p = c.sample(length, rng);
            if seen.insert(p.clone()) {
                picked.push(p);
            }
        }
        programs.extend(picked);
    }
    Ok(ProgramDataset { name: spec.name.clone(), seed, programs })
}

/// Random input boards: one to three pieces on distinct cells.
#[derive(Clone, Debug, PartialEq)]
pub struct BoardSampler {
    pub shapes: Vec<ShapeId>,
    pub min_pieces: usize,
    pub max_pieces: usize,
}

impl BoardSampler {
    pub fn new(shapes: Vec<ShapeId>) -> Self {
        Self { shapes, min_pieces: 1, max_pieces: 3 }
    }

    pub fn sample<R: Rng>(&self, domain: &Domain, rng: &mut R) -> Result<BoardState> {
        if self.shapes.is_empty() {
            return Err(Error::Config("board sampler has no shapes".into()));
        }
        let cells: Vec<_> = domain.cells().collect();
        let max = self.max_pieces.min(cells.len());
        if self.min_pieces > max {
            return Err(Error::Infeasible(format!("{} pieces do not fit on the grid", self.min_pieces)));
        }
        let n = rng.gen_range(self.min_pieces..=max);
        let pieces = cells
            .choose_multiple(rng, n)
            .map(|&c| Piece::new(*self.shapes.choose(rng).expect("non-empty"), c))
            .collect::<Vec<_>>();
        BoardState::new(domain, pieces)
    }
}

/// A task together with the program that generated it and the query's answer.
#[derive(Clone, Debug)]
pub struct GeneratedTask {
    pub task: Task,
    pub program: Program,
    pub expected: BoardState,
}

const MAX_BOARD_ATTEMPTS: usize = 10_000;

/// Pairs distinct random boards with their outputs under `program`, plus a
/// fresh query board.
pub fn make_task<R: Rng>(
    domain: &Domain,
    program: &Program,
    n_examples: usize,
    boards: &BoardSampler,
    rng: &mut R,
) -> Result<GeneratedTask> {
    if n_examples == 0 {
        return Err(Error::Config("a task needs at least one example".into()));
    }
    let mut seen: BTreeSet<BTreeSet<Piece>> = BTreeSet::new();
    let mut inputs = Vec::with_capacity(n_examples + 1);
    let mut attempts = 0;
    while inputs.len() < n_examples + 1 {
        attempts += 1;
        if attempts > MAX_BOARD_ATTEMPTS {
            return Err(Error::Infeasible("ran out of distinct boards".into()));
        }
        let b = boards.sample(domain, rng)?;
        if seen.insert(b.pieces().expect("sampled boards have pieces").clone()) {
            inputs.push(b);
        }
    }
    let query = inputs.pop().expect("query board");
    let examples = inputs
        .into_iter()
        .map(|input| Ok(Example { output: apply_program_symbolic(domain, program, &input)?, input }))
        .collect::<Result<Vec<_>>>()?;
    let expected = apply_program_symbolic(domain, program, &query)?;
    Ok(GeneratedTask { task: Task { examples, query }, program: program.clone(), expected })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleJson {
    pub input: BoardJson,
    pub output: BoardJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskJson {
    pub examples: Vec<ExampleJson>,
    pub query: BoardJson,
    pub expected: BoardJson,
    pub program: String,
}

impl GeneratedTask {
    pub fn to_json(&self, domain: &Domain) -> TaskJson {
        TaskJson {
            examples: self
                .task
                .examples
                .iter()
                .map(|e| ExampleJson { input: e.input.to_json(domain), output: e.output.to_json(domain) })
                .collect(),
            query: self.task.query.to_json(domain),
            expected: self.expected.to_json(domain),
            program: self.program.to_text(domain),
        }
    }

    pub fn from_json(domain: &Domain, json: &TaskJson) -> Result<Self> {
        let examples = json
            .examples
            .iter()
            .map(|e| {
                Ok(Example { input: BoardState::from_json(domain, &e.input)?, output: BoardState::from_json(domain, &e.output)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            task: Task { examples, query: BoardState::from_json(domain, &json.query)? },
            program: Program::parse(&json.program, domain)?,
            expected: BoardState::from_json(domain, &json.expected)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::board_equal;
    use crate::search::satisfies;
    use crate::vm::{MemoryInit, SymbolicExecutor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_agree_with_enumeration() {
        let d = Domain::default();
        for ts in [d.default_transforms(), d.shift_transforms()] {
            for len in 0..=5 {
                assert_eq!(count_programs(len, &ts), enumerate_programs(len, &ts).len() as u128);
            }
        }
        assert_eq!(enumerate_programs(1, &d.default_transforms()), vec![Program::new(vec![Primitive::Out])]);
    }

    #[test]
    fn enumeration_is_sorted_unique_and_well_formed() {
        let d = Domain::default();
        let ps = enumerate_programs(4, &d.default_transforms());
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
        assert!(ps.iter().all(Program::is_well_formed));
    }

    #[test]
    fn sampling_is_uniform_enough() {
        let d = Domain::default();
        let ts = d.shift_transforms();
        let all = enumerate_programs(3, &ts);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hist: BTreeMap<Program, usize> = BTreeMap::new();
        let n = 21_000;
        for _ in 0..n {
            let p = random_program(3, &ts, &mut rng).unwrap();
            assert!(p.is_well_formed());
            *hist.entry(p).or_insert(0) += 1;
        }
        assert_eq!(hist.len(), all.len());
        let expect = n as f64 / all.len() as f64;
        assert!(hist.values().all(|&c| (c as f64 - expect).abs() < 0.15 * expect));
    }

    #[test]
    fn dataset_is_unique_and_reproducible() {
        let d = Domain::default();
        let spec = DatasetSpec { max_length: 7, per_length: 50, ..DatasetSpec::r20all(&d) };
        let a = build_dataset(&d, &spec, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = build_dataset(&d, &spec, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let unique: HashSet<_> = a.programs.iter().collect();
        assert_eq!(unique.len(), a.len());
        assert_eq!(a.histogram(), spec.planned_counts(&d).unwrap());

        let dir = tempfile::tempdir().unwrap();
        a.save(&d, dir.path()).unwrap();
        assert_eq!(ProgramDataset::load(&d, dir.path(), "R20ALL").unwrap(), a);
    }

    #[test]
    fn tasks_are_consistent() {
        let d = Domain::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sampler = BoardSampler::new(d.shapes().collect());
        let ex = SymbolicExecutor { domain: &d };
        for _ in 0..50 {
            let p = random_program(rng.gen_range(1..7), &d.default_transforms(), &mut rng).unwrap();
            let t = make_task(&d, &p, 3, &sampler, &mut rng).unwrap();
            assert_eq!(t.task.examples.len(), 3);
            let inputs: BTreeSet<_> = t.task.examples.iter().map(|e| e.input.pieces().unwrap().clone()).collect();
            assert_eq!(inputs.len(), 3);
            assert!(satisfies(&ex, &t.task.examples, &p, MemoryInit::Input).unwrap());
            let back = GeneratedTask::from_json(&d, &t.to_json(&d)).unwrap();
            assert_eq!(back.program, t.program);
            assert!(board_equal(&d, &back.expected, &t.expected));
        }
    }

    #[test]
    fn shift_programs_preserve_shapes() {
        let d = Domain::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sampler = BoardSampler::new(d.shapes().collect());
        for _ in 0..50 {
            let p = random_program(rng.gen_range(2..8), &d.shift_transforms(), &mut rng).unwrap();
            let t = make_task(&d, &p, 3, &sampler, &mut rng).unwrap();
            for e in &t.task.examples {
                let shapes = |b: &BoardState| b.pieces().unwrap().iter().map(|p| p.shape).collect::<BTreeSet<_>>();
                assert_eq!(shapes(&e.input), shapes(&e.output));
            }
        }
    }

    #[test]
    fn infeasible_requests() {
        let d = Domain::default();
        let sampler = BoardSampler { shapes: vec![d.shape("square").unwrap()], min_pieces: 1, max_pieces: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // only nine one-square boards exist
        let p = Program::parse("out", &d).unwrap();
        assert!(make_task(&d, &p, 9, &sampler, &mut rng).is_err());
        assert!(make_task(&d, &p, 8, &sampler, &mut rng).is_ok());
        assert!(random_program(0, &d.default_transforms(), &mut rng).is_err());
    }
}
