//! Finite-alphabet stationary mixing Markov processes with exact rational
//! transition probabilities.
//!
//! A process of memory `m` is stored as a table indexed by context (a word
//! of length `m`, encoded in base `|alphabet|` with the oldest symbol most
//! significant) and next symbol. Every transition must be strictly positive,
//! which makes the chain on contexts irreducible and aperiodic, so the
//! stationary distribution is unique and is solved for exactly.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, to_f64, ApproxProb, Log2Cache, LogForm};

pub type Symbol = usize;

/// A row of conditional probabilities; rows may be shared between contexts.
pub type Row = Arc<[BigRational]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Sampled,
    UserSupplied,
}

/// A finite window of a two-sided sequence. `symbols[0]` sits at
/// coordinate `origin`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<Symbol>,
    pub origin: i64,
    pub provenance: Provenance,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<Symbol>, origin: i64, provenance: Provenance) -> Self {
        SymbolSequence { symbols, origin, provenance }
    }

    /// A window whose coordinates are centered on 0 (left-leaning for even lengths).
    pub fn centered(symbols: Vec<Symbol>, provenance: Provenance) -> Self {
        let origin = -((symbols.len() / 2) as i64);
        SymbolSequence { symbols, origin, provenance }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn first_coord(&self) -> i64 {
        self.origin
    }

    /// One past the last coordinate.
    pub fn end_coord(&self) -> i64 {
        self.origin + self.symbols.len() as i64
    }

    pub fn contains(&self, coord: i64) -> bool {
        coord >= self.origin && coord < self.end_coord()
    }

    pub fn get(&self, coord: i64) -> Option<Symbol> {
        if self.contains(coord) {
            Some(self.symbols[(coord - self.origin) as usize])
        } else {
            None
        }
    }

    /// The same symbols re-indexed so that coordinate `by` becomes 0.
    pub fn shifted(&self, by: i64) -> SymbolSequence {
        SymbolSequence { symbols: self.symbols.clone(), origin: self.origin - by, provenance: self.provenance }
    }

    /// Symbols at coordinates `lo..hi`, if fully inside the window.
    pub fn slice(&self, lo: i64, hi: i64) -> Option<&[Symbol]> {
        if lo < self.origin || hi > self.end_coord() || lo > hi {
            return None;
        }
        Some(&self.symbols[(lo - self.origin) as usize..(hi - self.origin) as usize])
    }
}

#[derive(Clone, Debug)]
pub struct MarkovProcess {
    alphabet: Vec<String>,
    memory: usize,
    transitions: Vec<Row>,
    stationary: Vec<BigRational>,
}

impl MarkovProcess {
    /// Validates the table and solves for the stationary distribution.
    pub fn new(alphabet: Vec<String>, memory: usize, transitions: Vec<Vec<BigRational>>) -> Result<Self> {
        let transitions = into_rows(transitions);
        validate(&alphabet, memory, &transitions)?;
        let stationary = solve_stationary(alphabet.len(), memory, &transitions)?;
        Ok(MarkovProcess { alphabet, memory, transitions, stationary })
    }

    /// Uses a caller-supplied stationary vector after checking the balance
    /// equations exactly.
    pub fn with_stationary(
        alphabet: Vec<String>,
        memory: usize,
        transitions: Vec<Vec<BigRational>>,
        stationary: Vec<BigRational>,
    ) -> Result<Self> {
        Self::with_shared_rows(alphabet, memory, into_rows(transitions), stationary)
    }

    /// Like [`with_stationary`](Self::with_stationary), but contexts may
    /// share one row allocation. Checks run once per distinct row.
    pub fn with_shared_rows(
        alphabet: Vec<String>,
        memory: usize,
        transitions: Vec<Row>,
        stationary: Vec<BigRational>,
    ) -> Result<Self> {
        validate(&alphabet, memory, &transitions)?;
        let p = MarkovProcess { alphabet, memory, transitions, stationary };
        if p.stationary.len() != p.num_contexts() {
            return Err(Error::InvalidProcess("stationary vector has wrong length".into()));
        }
        if !p.is_balanced() {
            return Err(Error::InvalidProcess("supplied stationary vector does not satisfy balance".into()));
        }
        Ok(p)
    }

    /// Memory-1 chain from a square matrix.
    pub fn from_matrix(alphabet: &[&str], rows: Vec<Vec<BigRational>>) -> Result<Self> {
        Self::new(alphabet.iter().map(|s| s.to_string()).collect(), 1, rows)
    }

    /// I.i.d. process with the given marginal.
    pub fn bernoulli(alphabet: &[&str], probs: &[BigRational]) -> Result<Self> {
        let rows = vec![probs.to_vec(); probs.len()];
        let alpha: Vec<String> = alphabet.iter().map(|s| s.to_string()).collect();
        if alpha.len() != probs.len() {
            return Err(Error::InvalidProcess("alphabet and probabilities differ in length".into()));
        }
        let stationary = probs.to_vec();
        Self::with_stationary(alpha, 1, rows, stationary)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_contexts(&self) -> usize {
        self.alphabet.len().pow(self.memory as u32)
    }

    pub fn transitions(&self) -> &[Row] {
        &self.transitions
    }

    /// Stationary distribution over contexts.
    pub fn stationary(&self) -> &[BigRational] {
        &self.stationary
    }

    pub fn symbol_index(&self, label: &str) -> Option<Symbol> {
        self.alphabet.iter().position(|s| s == label)
    }

    pub fn context_index(&self, context: &[Symbol]) -> usize {
        let k = self.alphabet.len();
        context.iter().fold(0, |acc, &s| acc * k + s)
    }

    pub fn context_symbols(&self, mut ctx: usize) -> Vec<Symbol> {
        let k = self.alphabet.len();
        let mut out = vec![0; self.memory];
        for slot in out.iter_mut().rev() {
            *slot = ctx % k;
            ctx /= k;
        }
        out
    }

    pub fn next_context(&self, ctx: usize, symbol: Symbol) -> usize {
        (ctx * self.alphabet.len() + symbol) % self.num_contexts()
    }

    /// `p(symbol | context)` borrowed from the table.
    pub fn p(&self, ctx: usize, symbol: Symbol) -> &BigRational {
        &self.transitions[ctx][symbol]
    }

    fn check_word(&self, word: &[Symbol]) -> Result<()> {
        if let Some(&s) = word.iter().find(|&&s| s >= self.alphabet.len()) {
            return Err(Error::AlphabetMismatch(format!("symbol index {s} outside alphabet of size {}", self.alphabet.len())));
        }
        Ok(())
    }

    /// Exact cylinder probability of `word` at any fixed position.
    pub fn word_prob(&self, word: &[Symbol]) -> Result<BigRational> {
        self.check_word(word)?;
        let m = self.memory;
        if word.is_empty() {
            return Ok(BigRational::one());
        }
        if word.len() < m {
            // Marginalize over contexts extending the word.
            let k = self.alphabet.len();
            let free = m - word.len();
            let base = self.context_index(word) * k.pow(free as u32);
            return Ok((0..k.pow(free as u32)).map(|j| self.stationary[base + j].clone()).sum());
        }
        let mut ctx = self.context_index(&word[..m]);
        let mut prob = self.stationary[ctx].clone();
        for &s in &word[m..] {
            prob *= &self.transitions[ctx][s];
            ctx = self.next_context(ctx, s);
        }
        Ok(prob)
    }

    pub fn cylinder_prob(&self, word: &[Symbol], n: u32) -> Result<ApproxProb> {
        Ok(ApproxProb::new(self.word_prob(word)?, n))
    }

    pub fn conditional_prob(&self, symbol: Symbol, context: &[Symbol], n: u32) -> Result<ApproxProb> {
        if context.len() != self.memory {
            return Err(Error::AlphabetMismatch(format!("context length {} != memory {}", context.len(), self.memory)));
        }
        self.check_word(context)?;
        self.check_word(&[symbol])?;
        Ok(ApproxProb::new(self.transitions[self.context_index(context)][symbol].clone(), n))
    }

    /// Ratio `P(a w b) / P(w)`: the probability of extending `w` by `a` on
    /// the left and `b` on the right.
    pub fn two_sided_extension(&self, left: Symbol, w: &[Symbol], right: Symbol) -> Result<BigRational> {
        let m = self.memory;
        if w.len() < m + 1 {
            let mut ext = Vec::with_capacity(w.len() + 2);
            ext.push(left);
            ext.extend_from_slice(w);
            ext.push(right);
            return Ok(self.word_prob(&ext)? / self.word_prob(w)?);
        }
        self.check_word(w)?;
        self.check_word(&[left, right])?;
        // Only the first m symbols of w see the left extension.
        let mut head = Vec::with_capacity(m + 1);
        head.push(left);
        head.extend_from_slice(&w[..m]);
        let left_ratio = self.word_prob(&head)? / &self.stationary[self.context_index(&w[..m])];
        let ctx = self.context_index(&w[w.len() - m..]);
        Ok(left_ratio * &self.transitions[ctx][right])
    }

    /// Exact symbol marginal `P(x[0] = symbol)`.
    pub fn marginal(&self, symbol: Symbol) -> BigRational {
        self.word_prob(&[symbol]).expect("symbol in range")
    }

    pub fn is_balanced(&self) -> bool {
        let n = self.num_contexts();
        let mut next = vec![BigRational::zero(); n];
        if self.memory == 1 {
            for (w, row) in self.distinct_rows() {
                for (s, p) in row.iter().enumerate() {
                    next[s] += &w * p;
                }
            }
        } else {
            for ctx in 0..n {
                for (s, p) in self.transitions[ctx].iter().enumerate() {
                    next[self.next_context(ctx, s)] += &self.stationary[ctx] * p;
                }
            }
        }
        let total: BigRational = self.stationary.iter().sum();
        next == self.stationary && total.is_one()
    }

    /// Entropy rate in bits, with relative error at most `2^-n`.
    pub fn entropy_rate(&self, n: u32) -> ApproxProb {
        let rows = self.distinct_rows();
        entropy_of_rows(rows.iter().map(|(w, r)| (w, *r)), n)
    }

    /// Contexts grouped by shared row, with the total stationary weight of each group.
    pub fn distinct_rows(&self) -> Vec<(BigRational, &[BigRational])> {
        let mut index: HashMap<*const BigRational, usize> = HashMap::new();
        let mut out: Vec<(BigRational, &[BigRational])> = Vec::new();
        for (pi, row) in self.stationary.iter().zip(&self.transitions) {
            match index.get(&row.as_ptr()) {
                Some(&i) => out[i].0 += pi,
                None => {
                    index.insert(row.as_ptr(), out.len());
                    out.push((pi.clone(), row));
                }
            }
        }
        out
    }

    /// The entropy rate as an exact combination of logarithms.
    pub fn entropy_form(&self) -> LogForm {
        let mut form = LogForm::new();
        for (pi, row) in self.distinct_rows() {
            for p in row {
                // pi * p * log2(1/p)
                form.push_log_rational(&-(&pi * p), p);
            }
        }
        form
    }

    /// Lifts the process to blocks of `k` consecutive symbols.
    pub fn power_process(&self, k: usize) -> Result<MarkovProcess> {
        if k == 0 {
            return Err(Error::InvalidProcess("power exponent must be at least 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let a = self.alphabet.len();
        let m = self.memory;
        let new_size = a.pow(k as u32);
        let new_memory = m.div_ceil(k);
        let tuple = |mut t: usize| -> Vec<Symbol> {
            let mut out = vec![0; k];
            for slot in out.iter_mut().rev() {
                *slot = t % a;
                t /= a;
            }
            out
        };
        let sep = if self.alphabet.iter().all(|s| s.chars().count() == 1) { "" } else { "." };
        let alphabet: Vec<String> = (0..new_size)
            .map(|t| tuple(t).iter().map(|&s| self.alphabet[s].as_str()).collect::<Vec<_>>().join(sep))
            .collect();
        let num_ctx = new_size.pow(new_memory as u32);
        let mut transitions = Vec::with_capacity(num_ctx);
        let mut stationary = Vec::with_capacity(num_ctx);
        for ctx in 0..num_ctx {
            // Expand the block context into original symbols.
            let mut symbols = Vec::with_capacity(new_memory * k);
            let mut c = ctx;
            let mut blocks = vec![0; new_memory];
            for slot in blocks.iter_mut().rev() {
                *slot = c % new_size;
                c /= new_size;
            }
            for b in blocks {
                symbols.extend(tuple(b));
            }
            stationary.push(self.word_prob(&symbols)?);
            let tail = &symbols[symbols.len() - m..];
            let mut row = Vec::with_capacity(new_size);
            for t in 0..new_size {
                let mut octx = self.context_index(tail);
                let mut p = BigRational::one();
                for s in tuple(t) {
                    p *= &self.transitions[octx][s];
                    octx = self.next_context(octx, s);
                }
                row.push(p);
            }
            transitions.push(row);
        }
        MarkovProcess::with_stationary(alphabet, new_memory, transitions, stationary)
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }

    /// Deterministic sample of `length` symbols, centered on coordinate 0.
    pub fn sample(&self, length: usize, seed: u64) -> SymbolSequence {
        self.sampler().sample(length, seed, 0)
    }

    // ---- serialization ----

    pub fn to_json(&self) -> Value {
        let mut trans = Map::new();
        for ctx in 0..self.num_contexts() {
            let key = self.context_key(ctx);
            let mut row = Map::new();
            for (s, p) in self.transitions[ctx].iter().enumerate() {
                row.insert(self.alphabet[s].clone(), Value::String(format_rational(p)));
            }
            trans.insert(key, Value::Object(row));
        }
        let mut obj = Map::new();
        obj.insert("alphabet".into(), Value::Array(self.alphabet.iter().cloned().map(Value::String).collect()));
        obj.insert("memory".into(), Value::from(self.memory));
        obj.insert("transitions".into(), Value::Object(trans));
        Value::Object(obj)
    }

    /// JSON including the solved stationary vector, so large processes load
    /// without re-solving.
    pub fn to_json_with_stationary(&self) -> Value {
        let mut v = self.to_json();
        let mut st = Map::new();
        for ctx in 0..self.num_contexts() {
            st.insert(self.context_key(ctx), Value::String(format_rational(&self.stationary[ctx])));
        }
        v.as_object_mut().unwrap().insert("stationary".into(), Value::Object(st));
        v
    }

    fn context_key(&self, ctx: usize) -> String {
        self.context_symbols(ctx).iter().map(|&s| self.alphabet[s].as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("process spec: {m}"));
        let alphabet: Vec<String> = v
            .get("alphabet")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing alphabet"))?
            .iter()
            .map(|s| s.as_str().map(str::to_string).ok_or_else(|| bad("alphabet entries must be strings")))
            .collect::<Result<_>>()?;
        let memory = v.get("memory").and_then(Value::as_u64).ok_or_else(|| bad("missing memory"))? as usize;
        if memory == 0 {
            return Err(Error::InvalidProcess("memory must be positive".into()));
        }
        let mut sorted = alphabet.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != alphabet.len() || alphabet.is_empty() {
            return Err(Error::InvalidProcess("alphabet must be non-empty with distinct symbols".into()));
        }
        let index = |tok: &str| -> Result<Symbol> {
            alphabet.iter().position(|s| s == tok).ok_or_else(|| Error::AlphabetMismatch(format!("unknown symbol {tok:?}")))
        };
        let k = alphabet.len();
        let num_ctx = k.pow(memory as u32);
        let mut table: Vec<Option<Vec<BigRational>>> = vec![None; num_ctx];
        let trans = v.get("transitions").and_then(Value::as_object).ok_or_else(|| bad("missing transitions"))?;
        let ctx_of = |key: &str| -> Result<usize> {
            let toks: Vec<&str> = if memory == 1 { vec![key.trim()] } else { key.split_whitespace().collect() };
            if toks.len() != memory {
                return Err(bad(&format!("context {key:?} does not have length {memory}")));
            }
            toks.iter().try_fold(0usize, |acc, t| Ok(acc * k + index(t)?))
        };
        for (key, row) in trans {
            let ctx = ctx_of(key)?;
            let row = row.as_object().ok_or_else(|| bad("transition rows must be objects"))?;
            let mut probs = vec![BigRational::zero(); k];
            let mut seen = vec![false; k];
            for (sym, p) in row {
                let s = index(sym)?;
                let p = p.as_str().ok_or_else(|| bad("probabilities must be \"p/q\" strings"))?;
                probs[s] = parse_rational(p)?;
                seen[s] = true;
            }
            if seen.iter().any(|x| !x) {
                return Err(Error::InvalidProcess(format!("context {key:?} is missing a transition (zero transitions are not allowed)")));
            }
            table[ctx] = Some(probs);
        }
        let transitions: Vec<Vec<BigRational>> = table
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::InvalidProcess(format!("missing context #{i}"))))
            .collect::<Result<_>>()?;
        if let Some(st) = v.get("stationary").and_then(Value::as_object) {
            let mut stationary = vec![BigRational::zero(); num_ctx];
            for (key, p) in st {
                let p = p.as_str().ok_or_else(|| bad("stationary entries must be strings"))?;
                stationary[ctx_of(key)?] = parse_rational(p)?;
            }
            return MarkovProcess::with_stationary(alphabet, memory, transitions, stationary);
        }
        MarkovProcess::new(alphabet, memory, transitions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    /// Parses whitespace-separated symbol tokens into a centered window.
    pub fn parse_sequence(&self, text: &str) -> Result<SymbolSequence> {
        let symbols = text
            .split_whitespace()
            .map(|t| self.symbol_index(t).ok_or_else(|| Error::AlphabetMismatch(format!("unknown symbol {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolSequence::centered(symbols, Provenance::UserSupplied))
    }

    pub fn format_sequence(&self, seq: &SymbolSequence) -> String {
        seq.symbols.iter().map(|&s| self.alphabet[s].as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn into_rows(rows: Vec<Vec<BigRational>>) -> Vec<Row> {
    rows.into_iter().map(Arc::from).collect()
}

fn validate(alphabet: &[String], memory: usize, transitions: &[Row]) -> Result<()> {
    if alphabet.is_empty() {
        return Err(Error::InvalidProcess("empty alphabet".into()));
    }
    if memory == 0 {
        return Err(Error::InvalidProcess("memory must be positive".into()));
    }
    let k = alphabet.len();
    let expected = k.checked_pow(memory as u32).ok_or_else(|| Error::InvalidProcess("too many contexts".into()))?;
    if transitions.len() != expected {
        return Err(Error::InvalidProcess(format!("expected {expected} contexts, got {}", transitions.len())));
    }
    let mut seen = std::collections::HashSet::new();
    for (i, row) in transitions.iter().enumerate() {
        if !seen.insert(row.as_ptr()) {
            continue;
        }
        if row.len() != k {
            return Err(Error::InvalidProcess(format!("context #{i} has {} entries, expected {k}", row.len())));
        }
        if row.iter().any(|p| !p.is_positive()) {
            return Err(Error::InvalidProcess(format!("context #{i} has a non-positive transition; mixing chains need full support")));
        }
        let total: BigRational = row.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidProcess(format!("context #{i} sums to {}", format_rational(&total))));
        }
    }
    Ok(())
}

/// Exact Gaussian elimination for `pi P = pi`, `sum pi = 1` on the context chain.
fn solve_stationary(k: usize, memory: usize, transitions: &[Row]) -> Result<Vec<BigRational>> {
    let n = k.pow(memory as u32);
    // Row j of the system: sum_i pi_i P[i][j] - pi_j = 0; last row replaced by normalization.
    let mut a = vec![vec![BigRational::zero(); n + 1]; n];
    for (i, row) in transitions.iter().enumerate() {
        for (s, p) in row.iter().enumerate() {
            let j = (i * k + s) % n;
            a[j][i] += p;
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[j] -= BigRational::one();
    }
    for x in a[n - 1].iter_mut() {
        *x = BigRational::one();
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularChain)?;
        a.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for x in a[col].iter_mut().skip(col) {
            *x *= &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = row[col].clone();
                for c in col..=n {
                    if !pivot_row[c].is_zero() {
                        row[c] -= &f * &pivot_row[c];
                    }
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n].clone()).collect())
}

/// `sum_i w_i * sum_a p_ia * log2(1/p_ia)` with relative error `2^-n`.
pub fn entropy_of_rows<'a, I>(rows: I, n: u32) -> ApproxProb
where
    I: Iterator<Item = (&'a BigRational, &'a [BigRational])>,
{
    let mut terms = Vec::new();
    for (w, row) in rows {
        if w.is_zero() {
            continue;
        }
        for p in row {
            terms.push((w * p, p.clone()));
        }
    }
    entropy_terms(&terms, n)
}

fn is_dyadic(p: &BigRational) -> bool {
    p.numer().magnitude().count_ones() == 1 && p.denom().magnitude().count_ones() == 1
}

/// `sum_i c_i * log2(1/p_i)` over `(c_i, p_i)` pairs with `c_i >= 0`, to
/// relative error `2^-n`. Terms with `p_i = 0` or `c_i = 0` are skipped.
pub fn entropy_terms(terms: &[(BigRational, BigRational)], n: u32) -> ApproxProb {
    let mass: BigRational = terms.iter().map(|(c, _)| c.clone()).sum();
    let all_exact = terms.iter().all(|(c, p)| c.is_zero() || p.is_zero() || is_dyadic(p));
    let mut bits = n + 16;
    loop {
        let mut cache = Log2Cache::new(bits);
        let mut total = BigRational::zero();
        for (c, p) in terms {
            if c.is_zero() || p.is_zero() {
                continue;
            }
            total -= c * cache.log2(p);
        }
        if all_exact || total.is_zero() {
            return ApproxProb::new(total, n);
        }
        // Each log is within 2^(1-bits), so |total - h| <= mass * 2^(1-bits).
        let err = &mass * crate::exact::eps(bits - 1);
        if total > err && err.clone() * crate::exact::pow2(n as i64) <= &total - &err {
            return ApproxProb::new(total, n);
        }
        bits += 16;
        if bits > n + 4096 {
            return ApproxProb::new(total, n);
        }
    }
}

/// Precomputed floating-point sampling tables for one process.
pub struct Sampler {
    memory: usize,
    k: usize,
    num_ctx: usize,
    initial: Vec<f64>,
    row_of: Vec<usize>,
    tables: Vec<Vec<f64>>,
}

fn cumulative(ps: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = ps
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn draw(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl Sampler {
    pub fn new(p: &MarkovProcess) -> Self {
        let mut index: HashMap<*const BigRational, usize> = HashMap::new();
        let mut tables = Vec::new();
        let row_of = p
            .transitions
            .iter()
            .map(|r| {
                *index.entry(r.as_ptr()).or_insert_with(|| {
                    tables.push(cumulative(r.iter().map(to_f64)));
                    tables.len() - 1
                })
            })
            .collect();
        Sampler {
            memory: p.memory,
            k: p.alphabet.len(),
            num_ctx: p.num_contexts(),
            initial: cumulative(p.stationary.iter().map(to_f64)),
            row_of,
            tables,
        }
    }

    /// Sample for `(seed, stream)`; distinct streams are independent.
    pub fn sample(&self, length: usize, seed: u64, stream: u64) -> SymbolSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let symbols = self.sample_with(&mut rng, length);
        SymbolSequence::centered(symbols, Provenance::Sampled)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R, length: usize) -> Vec<Symbol> {
        let mut ctx = draw(&self.initial, rng.gen::<f64>());
        let mut out = Vec::with_capacity(length.max(self.memory));
        let mut c = ctx;
        let mut head = vec![0; self.memory];
        for slot in head.iter_mut().rev() {
            *slot = c % self.k;
            c /= self.k;
        }
        out.extend(head);
        while out.len() < length {
            let s = draw(&self.tables[self.row_of[ctx]], rng.gen::<f64>());
            out.push(s);
            ctx = (ctx * self.k + s) % self.num_ctx;
        }
        out.truncate(length);
        out
    }
}
