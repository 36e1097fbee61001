//! Society trees over skeleton ranks and evaluation of `phi` and
//! `phi^{-1}` on finite windows.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::ceil_n_log2;
use crate::filler::{AepBounds, ClassPartition, FillerCaps, FillerContext, FillerMode};
use crate::markov::{MarkovProcess, Symbol, SymbolSequence};
use crate::skeleton::{choose_n_for, decompose, extract_skeleton, max_zero_prob, Extraction, RankParameters, Skeleton};
use crate::society::{join, minimal_robust_subsociety, Society};

pub const CONFIG_VERSION: u32 = 1;

/// Everything needed to rebuild the isomorphism deterministically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsoConfig {
    pub version: u32,
    pub a: Value,
    pub c: Value,
    pub zero_a: Symbol,
    pub zero_c: Symbol,
    pub precision: u32,
    pub rank_cap: usize,
    pub max_filler_length: usize,
    pub max_fillers: usize,
    pub initial_window: usize,
    pub window_cap: usize,
    #[serde(with = "crate::exact::serde_rational")]
    pub entropy: BigRational,
}

impl IsoConfig {
    pub fn new(a: &MarkovProcess, c: &MarkovProcess, zero_a: Symbol, zero_c: Symbol, precision: u32, rank_cap: usize) -> Self {
        let caps = FillerCaps::default();
        IsoConfig {
            version: CONFIG_VERSION,
            a: a.to_json_with_stationary(),
            c: c.to_json_with_stationary(),
            zero_a,
            zero_c,
            precision,
            rank_cap,
            max_filler_length: caps.max_length,
            max_fillers: caps.max_fillers,
            initial_window: 64,
            window_cap: 100_000,
            entropy: a.entropy_rate(precision + 16).value,
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let cfg: IsoConfig = serde_json::from_value(v.clone())?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Parse(format!("unsupported config version {}", cfg.version)));
        }
        Ok(cfg)
    }
}

/// `R_{S,n}` with its filler classes and the trees of the decomposition.
#[derive(Debug)]
pub struct SocietyTree {
    pub skeleton: Skeleton,
    pub precision: u32,
    pub a_classes: ClassPartition,
    pub c_classes: ClassPartition,
    /// Left side is the A classes (`F*`) at odd rank, the C classes (`G*`)
    /// at even rank.
    pub society: Society,
    /// For rank >= 2: the minimal robust society from coarse classes of the
    /// left side to fine classes of the right side.
    pub coarse: Option<Society>,
    pub children: Vec<Arc<SocietyTree>>,
}

impl SocietyTree {
    pub fn rank(&self) -> usize {
        self.skeleton.rank
    }

    pub fn left_is_a(&self) -> bool {
        self.rank() % 2 == 1
    }

    pub fn summary(&self) -> Value {
        json!({
            "pattern": self.skeleton.pattern_string(),
            "rank": self.rank(),
            "precision": self.precision,
            "a_classes": self.a_classes.classes.len(),
            "c_classes": self.c_classes.classes.len(),
            "edges": self.society.edge_count(),
            "children": self.children.iter().map(|c| c.summary()).collect::<Vec<_>>(),
        })
    }
}

fn class_id(prefix: char, k: usize) -> String {
    format!("{prefix}{k}")
}

fn side(part: &ClassPartition, prefix: char) -> Vec<(String, BigRational)> {
    part.classes.iter().enumerate().map(|(k, c)| (class_id(prefix, k), c.probability.clone())).collect()
}

fn coarse_id(prefix: char, children: &[usize]) -> String {
    children.iter().map(|&k| class_id(prefix, k)).collect::<Vec<_>>().join("|")
}

fn parse_coarse_id(id: &str) -> Vec<usize> {
    id.split('|').map(|p| p[1..].parse().expect("class id")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedReason {
    WindowTooSmall,
    RankCapReached,
    FillerCapExceeded,
    NotRobust,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiOutcome {
    Symbol(Symbol),
    Undefined(UndefinedReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhiResult {
    pub outcome: PhiOutcome,
    /// Rank that stabilized, 0 for the zero-block case or when undefined.
    pub rank_used: usize,
    /// Offset of the evaluated coordinate inside the skeleton span.
    pub center: Option<usize>,
}

impl PhiResult {
    pub fn symbol(&self) -> Option<Symbol> {
        match self.outcome {
            PhiOutcome::Symbol(s) => Some(s),
            PhiOutcome::Undefined(_) => None,
        }
    }

    fn undefined(reason: UndefinedReason) -> Self {
        PhiResult { outcome: PhiOutcome::Undefined(reason), rank_used: 0, center: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

type TreeKey = (Vec<usize>, usize, u32);
type TreeCell = Arc<OnceLock<std::result::Result<Arc<SocietyTree>, Arc<Error>>>>;

/// The constructed map between `A` (source) and `C` (target).
pub struct Isomorphism {
    pub config: IsoConfig,
    pub a: MarkovProcess,
    pub c: MarkovProcess,
    pub params: RankParameters,
    pub bounds: AepBounds,
    caps: FillerCaps,
    cache: Mutex<HashMap<TreeKey, TreeCell>>,
    disk: Option<PathBuf>,
}

impl Isomorphism {
    pub fn new(config: IsoConfig) -> Result<Self> {
        let a = MarkovProcess::from_json(&config.a)?;
        let c = MarkovProcess::from_json(&config.c)?;
        if a.memory() != 1 || c.memory() != 1 {
            return Err(Error::Unsupported("the isomorphism needs memory-1 processes".into()));
        }
        if config.zero_a >= a.alphabet_size() || config.zero_c >= c.alphabet_size() {
            return Err(Error::AlphabetMismatch("zero symbol outside the alphabet".into()));
        }
        if config.precision == 0 || config.rank_cap < 2 {
            return Err(Error::ConstraintViolation("precision must be >= 1 and rank cap >= 2".into()));
        }
        let q = max_zero_prob(&a, config.zero_a).max(max_zero_prob(&c, config.zero_c));
        let params = choose_n_for(&q, config.rank_cap);
        let bounds = AepBounds::from_processes(&[&a, &c], config.entropy.clone());
        let caps = FillerCaps { max_length: config.max_filler_length, max_fillers: config.max_fillers };
        Ok(Isomorphism { config, a, c, params, bounds, caps, cache: Mutex::new(HashMap::new()), disk: None })
    }

    /// Persists extracted minimal societies under `dir`, keyed by a digest
    /// of the configuration.
    pub fn with_cache_dir(mut self, dir: &Path) -> Result<Self> {
        let text = serde_json::to_string(&self.config)?;
        let digest = text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        let path = dir.join(format!("{digest:016x}"));
        std::fs::create_dir_all(&path)?;
        self.disk = Some(path);
        Ok(self)
    }

    fn minimal(&self, s: &Skeleton, n: u32, input: &Society) -> Result<Society> {
        let file = self.disk.as_ref().map(|d| d.join(format!("{}_r{}_n{n}.json", s.pattern_string(), s.rank)));
        if let Some(f) = file.as_ref().filter(|f| f.exists()) {
            let cached = Society::from_json(&serde_json::from_str(&std::fs::read_to_string(f)?)?)?;
            if cached.left() == input.left() && cached.right() == input.right() && cached.edge_indices().is_subset(input.edge_indices()) {
                return Ok(cached);
            }
            log::warn!("ignoring stale cache entry {}", f.display());
        }
        let out = minimal_robust_subsociety(input, n).map_err(|e| match e {
            Error::NotRobustInput(m) => Error::NotRobust(format!("{}: {m}", s.pattern_string())),
            other => other,
        })?;
        if let Some(f) = file {
            std::fs::write(f, serde_json::to_string(&out.to_json())?)?;
        }
        Ok(out)
    }

    pub fn cached_trees(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn contexts(&self) -> Result<(FillerContext<'_>, FillerContext<'_>)> {
        let fa = FillerContext::new(&self.a, self.config.zero_a, FillerMode::Consistent, &self.bounds, &self.params)?.with_caps(self.caps.clone());
        let fc = FillerContext::new(&self.c, self.config.zero_c, FillerMode::Consistent, &self.bounds, &self.params)?.with_caps(self.caps.clone());
        Ok((fa, fc))
    }

    /// `R_{S,n}`, built once per (pattern, rank, precision).
    pub fn tree(&self, s: &Skeleton, n: u32) -> Result<Arc<SocietyTree>> {
        let key = (s.pattern(), s.rank, n);
        let cell = {
            let mut map = self.cache.lock().expect("cache lock");
            map.entry(key).or_default().clone()
        };
        let anchored = s.relabeled(s.rank, 0);
        match cell.get_or_init(|| self.build(&anchored, n).map(Arc::new).map_err(Arc::new)) {
            Ok(t) => Ok(t.clone()),
            Err(e) => Err(e.duplicate()),
        }
    }

    fn build(&self, s: &Skeleton, n: u32) -> Result<SocietyTree> {
        let (fa, fc) = self.contexts()?;
        let a_classes = fa.classes(s, n)?;
        let c_classes = fc.classes(s, n)?;
        let odd = s.rank % 2 == 1;
        let (x_part, x_prefix, y_part, y_prefix) = if odd { (&a_classes, 'F', &c_classes, 'G') } else { (&c_classes, 'G', &a_classes, 'F') };
        if s.rank == 1 {
            let complete = Society::complete(side(x_part, x_prefix), side(y_part, y_prefix))?;
            let society = self.minimal(s, n, &complete)?;
            return Ok(SocietyTree { skeleton: s.clone(), precision: n, a_classes, c_classes, society, coarse: None, children: Vec::new() });
        }
        let parts = decompose(s, self.params.n[s.rank - 1])?;
        let child_n = ceil_n_log2(n, 3 * parts.len() as u64);
        let children: Vec<Arc<SocietyTree>> = parts.iter().map(|p| self.tree(p, child_n)).collect::<Result<_>>()?;
        // Children have the Y side on the left; their duals go X -> Y.
        let duals: Vec<Society> = children.iter().map(|c| c.society.dual()).collect();
        let joined = join(&duals.iter().collect::<Vec<_>>());
        let mut fine_of: HashMap<String, Vec<String>> = HashMap::new();
        for (k, c) in y_part.classes.iter().enumerate() {
            fine_of.entry(coarse_id(y_prefix, &c.children)).or_default().push(class_id(y_prefix, k));
        }
        let mut edges = Vec::new();
        for (xb, yb) in joined.edges() {
            for yf in fine_of.get(yb).into_iter().flatten() {
                edges.push((xb.to_string(), yf.clone()));
            }
        }
        let split = Society::new(joined.left().to_vec(), side(y_part, y_prefix), edges)?;
        let coarse = self.minimal(s, n, &split)?;
        let mut edges = Vec::new();
        for (k, c) in x_part.classes.iter().enumerate() {
            let xb = coarse.left_index(&coarse_id(x_prefix, &c.children)).expect("coarse class present in the join");
            for r in coarse.knows(xb) {
                edges.push((class_id(x_prefix, k), coarse.right()[r].0.clone()));
            }
        }
        let society = Society::new(side(x_part, x_prefix), side(y_part, y_prefix), edges)?;
        Ok(SocietyTree { skeleton: s.clone(), precision: n, a_classes, c_classes, society, coarse: Some(coarse), children })
    }

    /// `J_0` and the fixed symbols of a coarse class of the given side.
    fn coarse_symbols(tree: &SocietyTree, ids: &[usize], a_side: bool) -> HashMap<usize, Symbol> {
        let mut out = HashMap::new();
        let mut base = 0;
        for (child, &k) in tree.children.iter().zip(ids) {
            let part = if a_side { &child.a_classes } else { &child.c_classes };
            let class = &part.classes[k];
            for (&b, &sym) in class.j.iter().zip(&class.fixed) {
                out.insert(base + b, sym);
            }
            base += child.skeleton.length();
        }
        out
    }

    /// `phi(x)[center]` (forward) or `phi^{-1}(x)[center]` (inverse).
    pub fn phi_at(&self, x: &SymbolSequence, center: i64, dir: Direction) -> Result<PhiResult> {
        let (zero_in, zero_out) = match dir {
            Direction::Forward => (self.config.zero_a, self.config.zero_c),
            Direction::Inverse => (self.config.zero_c, self.config.zero_a),
        };
        let Some(sym) = x.get(center) else {
            return Ok(PhiResult::undefined(UndefinedReason::WindowTooSmall));
        };
        if sym == zero_in {
            let (l, r) = (x.get(center - 1), x.get(center + 1));
            if l == Some(zero_in) || r == Some(zero_in) {
                return Ok(PhiResult { outcome: PhiOutcome::Symbol(zero_out), rank_used: 0, center: None });
            }
            if l.is_none() || r.is_none() {
                return Ok(PhiResult::undefined(UndefinedReason::WindowTooSmall));
            }
        }
        for r in (2..=self.config.rank_cap).step_by(2) {
            let s = match extract_skeleton(x, r, center, self.params.n[r], zero_in) {
                Extraction::Found(s) => s,
                Extraction::NotFound => return Ok(PhiResult::undefined(UndefinedReason::WindowTooSmall)),
                Extraction::InDelimiter => unreachable!("zero blocks of length >= 2 are handled above"),
            };
            let tree = match self.tree(&s, self.config.precision) {
                Ok(t) => t,
                Err(Error::CapExceeded(_)) => return Ok(PhiResult::undefined(UndefinedReason::FillerCapExceeded)),
                Err(Error::NotRobust(_)) => return Ok(PhiResult::undefined(UndefinedReason::NotRobust)),
                Err(e) => return Err(e),
            };
            let offset = (center - s.start) as usize;
            let blank = s.blank_offsets().iter().position(|&o| o == offset).expect("center is a blank");
            let filler: Vec<Symbol> = s.blank_offsets().iter().map(|&o| x.get(s.start + o as i64).expect("skeleton inside window")).collect();
            let coarse = tree.coarse.as_ref().expect("even ranks have a coarse society");
            let found = match dir {
                Direction::Forward => {
                    let fi = tree.a_classes.filler_index(&filler).expect("extracted fillers are consistent");
                    let f = tree.a_classes.class_of[fi];
                    let ri = coarse.right_index(&class_id('F', f)).expect("class vertex");
                    match coarse.known_by(ri).as_slice() {
                        [g] => Self::coarse_symbols(&tree, &parse_coarse_id(&coarse.left()[*g].0), false).get(&blank).copied(),
                        _ => None,
                    }
                }
                Direction::Inverse => {
                    let gi = tree.c_classes.filler_index(&filler).expect("extracted fillers are consistent");
                    let g = &tree.c_classes.classes[tree.c_classes.class_of[gi]];
                    let li = coarse.left_index(&coarse_id('G', &g.children)).expect("coarse vertex");
                    match coarse.knows(li).as_slice() {
                        [f] => {
                            let class = &tree.a_classes.classes[parse_coarse_id(&coarse.right()[*f].0)[0]];
                            class.j.iter().position(|&b| b == blank).map(|i| class.fixed[i])
                        }
                        _ => None,
                    }
                }
            };
            if let Some(out) = found {
                return Ok(PhiResult { outcome: PhiOutcome::Symbol(out), rank_used: r, center: Some(offset) });
            }
        }
        Ok(PhiResult::undefined(UndefinedReason::RankCapReached))
    }

    pub fn phi_symbol(&self, x: &SymbolSequence) -> Result<PhiResult> {
        self.phi_at(x, 0, Direction::Forward)
    }

    pub fn phi_inverse_symbol(&self, y: &SymbolSequence) -> Result<PhiResult> {
        self.phi_at(y, 0, Direction::Inverse)
    }

    /// The smallest even rank at which `phi` stabilizes at the center.
    pub fn stabilization_rank(&self, x: &SymbolSequence) -> Result<Option<usize>> {
        let r = self.phi_symbol(x)?;
        Ok(r.symbol().filter(|_| r.rank_used > 0).map(|_| r.rank_used))
    }

    /// `phi` on coordinates `lo..=hi`; undefined coordinates are `None`.
    pub fn phi_window(&self, x: &SymbolSequence, lo: i64, hi: i64, dir: Direction) -> Result<Vec<PhiResult>> {
        (lo..=hi).map(|i| self.phi_at(x, i, dir)).collect()
    }

    /// Evaluates at coordinate 0 of windows from `sample(width)`, doubling
    /// the width while the window is too small.
    pub fn phi_growing<F>(&self, mut sample: F, dir: Direction) -> Result<PhiResult>
    where
        F: FnMut(usize) -> SymbolSequence,
    {
        let mut width = self.config.initial_window.max(3);
        loop {
            let x = sample(width);
            let r = self.phi_at(&x, 0, dir)?;
            if r.outcome != PhiOutcome::Undefined(UndefinedReason::WindowTooSmall) || width >= self.config.window_cap {
                return Ok(r);
            }
            width = (width * 2).min(self.config.window_cap);
        }
    }
}

/// Partial sequence of outputs, `None` where undefined.
pub fn outputs(results: &[PhiResult]) -> Vec<Option<Symbol>> {
    results.iter().map(PhiResult::symbol).collect()
}

/// A total sequence from fully defined outputs.
pub fn defined_sequence(results: &[PhiResult], origin: i64) -> Option<SymbolSequence> {
    let symbols: Option<Vec<Symbol>> = results.iter().map(PhiResult::symbol).collect();
    symbols.map(|s| SymbolSequence::new(s, origin, crate::markov::Provenance::UserSupplied))
}
