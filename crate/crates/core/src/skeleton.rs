//! Zero/blank skeletons of rank `r`, their block decomposition, the choice
//! of delimiter lengths `N_r`, and the two betting diagnostics that detect
//! sequences without (long enough) central skeletons.

use std::fmt;

use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{int, pow2, to_f64};
use crate::markov::{MarkovProcess, Symbol, SymbolSequence};

/// Pattern `0^{n_0} _^{l_1} 0^{n_1} ... _^{l_k} 0^{n_k}` anchored at `start`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Skeleton {
    pub zeros: Vec<usize>,
    pub blanks: Vec<usize>,
    pub rank: usize,
    pub start: i64,
}

impl Skeleton {
    pub fn new(zeros: Vec<usize>, blanks: Vec<usize>, rank: usize, start: i64) -> Result<Self> {
        if zeros.len() != blanks.len() + 1 || blanks.is_empty() {
            return Err(Error::MalformedSkeleton(format!(
                "need k >= 1 blank runs and k + 1 zero blocks, got {} and {}",
                blanks.len(),
                zeros.len()
            )));
        }
        if blanks.iter().any(|&l| l == 0) {
            return Err(Error::MalformedSkeleton("blank runs must be non-empty".into()));
        }
        let k = blanks.len();
        if zeros[1..k].iter().any(|&n| n < 2) {
            return Err(Error::MalformedSkeleton("interior zero blocks must have length at least 2".into()));
        }
        Ok(Skeleton { zeros, blanks, rank, start })
    }

    /// Parses `"n0,l1,n1,...,lk,nk"`.
    pub fn parse(pattern: &str, rank: usize) -> Result<Self> {
        let nums: Vec<usize> = pattern
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("skeleton pattern {pattern:?}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() % 2 == 0 {
            return Err(Error::MalformedSkeleton("pattern must alternate zeros, blanks, ..., zeros".into()));
        }
        let zeros = nums.iter().step_by(2).copied().collect();
        let blanks = nums.iter().skip(1).step_by(2).copied().collect();
        Skeleton::new(zeros, blanks, rank, 0)
    }

    /// Checks the rank-`r` invariants against delimiter length `n_r`.
    pub fn validate(&self, n_r: usize) -> Result<()> {
        let k = self.blanks.len();
        if self.zeros[0] < n_r || self.zeros[k] < n_r {
            return Err(Error::MalformedSkeleton(format!("extremities must have at least {n_r} zeros")));
        }
        if self.zeros[1..k].iter().any(|&n| n >= n_r) {
            return Err(Error::MalformedSkeleton(format!("interior zero block of length >= {n_r}")));
        }
        Ok(())
    }

    pub fn pattern(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.zeros.len());
        for (i, &z) in self.zeros.iter().enumerate() {
            out.push(z);
            if let Some(&b) = self.blanks.get(i) {
                out.push(b);
            }
        }
        out
    }

    pub fn pattern_string(&self) -> String {
        self.pattern().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
    }

    /// Number of blank positions `l(S)`.
    pub fn length(&self) -> usize {
        self.blanks.iter().sum()
    }

    pub fn zero_count(&self) -> usize {
        self.zeros.iter().sum()
    }

    /// Total number of positions covered, zeros and blanks.
    pub fn span(&self) -> usize {
        self.length() + self.zero_count()
    }

    /// `true` at blank offsets, `false` at zero offsets.
    pub fn mask(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.span());
        for (i, &z) in self.zeros.iter().enumerate() {
            out.extend(std::iter::repeat(false).take(z));
            if let Some(&b) = self.blanks.get(i) {
                out.extend(std::iter::repeat(true).take(b));
            }
        }
        out
    }

    /// Offsets (from `start`) of the zero index set `Z_S`.
    pub fn zero_offsets(&self) -> Vec<usize> {
        self.mask().iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect()
    }

    /// Offsets (from `start`) of the blanks `s_1 < ... < s_l`.
    pub fn blank_offsets(&self) -> Vec<usize> {
        self.mask().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn end(&self) -> i64 {
        self.start + self.span() as i64
    }

    /// Same pattern at a new rank and anchor.
    pub fn relabeled(&self, rank: usize, start: i64) -> Skeleton {
        Skeleton { rank, start, ..self.clone() }
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.pattern_string())
    }
}

pub fn skeleton_length(s: &Skeleton) -> usize {
    s.length()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extraction {
    Found(Skeleton),
    /// No delimiting block of `N_r` zeros on one side inside the window.
    NotFound,
    /// The center lies inside a zero block of length at least `N_r`.
    InDelimiter,
}

impl Extraction {
    pub fn found(self) -> Option<Skeleton> {
        match self {
            Extraction::Found(s) => Some(s),
            _ => None,
        }
    }
}

/// Maximal zero runs of the window as `(start index, length, open)`,
/// where `open` marks runs touching a window edge.
fn zero_runs(symbols: &[Symbol], zero: Symbol) -> Vec<(usize, usize, bool)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < symbols.len() {
        if symbols[i] == zero {
            let s = i;
            while i < symbols.len() && symbols[i] == zero {
                i += 1;
            }
            runs.push((s, i - s, s == 0 || i == symbols.len()));
        } else {
            i += 1;
        }
    }
    runs
}

/// The rank-`r` skeleton around coordinate `center`, delimited by `n_r` zeros.
pub fn extract_skeleton(x: &SymbolSequence, rank: usize, center: i64, n_r: usize, zero: Symbol) -> Extraction {
    if !x.contains(center) || n_r < 2 {
        return Extraction::NotFound;
    }
    let c = (center - x.origin) as usize;
    let runs = zero_runs(&x.symbols, zero);
    // Run containing the center, if any.
    if let Some(&(_, len, open)) = runs.iter().find(|&&(s, len, _)| s <= c && c < s + len) {
        if len >= n_r {
            return Extraction::InDelimiter;
        }
        if open {
            return Extraction::NotFound;
        }
    }
    let left = runs.iter().rev().find(|&&(s, len, _)| s + len <= c && len >= n_r);
    let right = runs.iter().find(|&&(s, len, _)| s > c && len >= n_r);
    let (Some(&(ls, llen, _)), Some(&(rs, _, _))) = (left, right) else {
        return Extraction::NotFound;
    };
    let lo = ls + llen; // first blank
    let hi = rs; // one past last blank
    let mut zeros = vec![n_r];
    let mut blanks = Vec::new();
    let mut cursor = lo;
    for &(s, len, _) in runs.iter().filter(|&&(s, len, _)| s >= lo && s + len <= hi && len >= 2) {
        blanks.push(s - cursor);
        zeros.push(len);
        cursor = s + len;
    }
    blanks.push(hi - cursor);
    zeros.push(n_r);
    let start = x.origin + (lo - n_r) as i64;
    Extraction::Found(Skeleton { zeros, blanks, rank, start })
}

/// Splits a rank-`r` skeleton at interior zero blocks of length at least
/// `n_prev = N_{r-1}`. Shared delimiters appear in full in both neighbors.
pub fn decompose(s: &Skeleton, n_prev: usize) -> Result<Vec<Skeleton>> {
    if s.rank < 2 {
        return Err(Error::MalformedSkeleton(format!("cannot decompose a rank-{} skeleton", s.rank)));
    }
    let k = s.blanks.len();
    if s.zeros[0] < n_prev || s.zeros[k] < n_prev {
        return Err(Error::MalformedSkeleton(format!("extremities shorter than N_(r-1) = {n_prev}")));
    }
    let mut parts = Vec::new();
    let mut begin = 0; // index into zeros of the current part's left delimiter
    let mut offset = 0usize; // position of zeros[begin] relative to s.start
    let mut pos = 0usize;
    for i in 0..=k {
        let boundary = i == k || (i > 0 && s.zeros[i] >= n_prev);
        if i > 0 && boundary {
            let zeros = s.zeros[begin..=i].to_vec();
            let blanks = s.blanks[begin..i].to_vec();
            parts.push(Skeleton::new(zeros, blanks, s.rank - 1, s.start + offset as i64)?);
            begin = i;
            offset = pos;
        }
        pos += s.zeros[i] + s.blanks.get(i).copied().unwrap_or(0);
    }
    Ok(parts)
}

/// Inverse of [`decompose`]: merges shared delimiter blocks.
pub fn recompose(parts: &[Skeleton]) -> Result<Skeleton> {
    let first = parts.first().ok_or_else(|| Error::MalformedSkeleton("nothing to recompose".into()))?;
    let mut zeros = first.zeros.clone();
    let mut blanks = first.blanks.clone();
    let mut end = first.end();
    for p in &parts[1..] {
        let last = *zeros.last().unwrap();
        if p.zeros[0] != last || p.start + last as i64 != end {
            return Err(Error::MalformedSkeleton("neighboring parts do not share their delimiter".into()));
        }
        zeros.extend_from_slice(&p.zeros[1..]);
        blanks.extend_from_slice(&p.blanks);
        end = p.end();
    }
    Skeleton::new(zeros, blanks, first.rank + 1, first.start)
}

/// `L_r`, `N_r` and `eps_r` for ranks `0..=r_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankParameters {
    pub l: Vec<usize>,
    pub n: Vec<usize>,
}

impl RankParameters {
    pub fn max_rank(&self) -> usize {
        self.n.len() - 1
    }

    pub fn eps(&self, r: usize) -> BigRational {
        crate::exact::eps(r as u32)
    }
}

pub fn l_r(r: usize) -> usize {
    3 + r
}

/// Largest conditional probability of `zero` over all contexts.
pub fn max_zero_prob(p: &MarkovProcess, zero: Symbol) -> BigRational {
    p.transitions().iter().map(|row| row[zero].clone()).max().expect("non-empty process")
}

/// `N_r` = smallest `N > N_{r-1}`, `N >= 2`, with `q^N < 1/(2^r L_r (N - 1))`.
pub fn choose_n_for(q: &BigRational, r_max: usize) -> RankParameters {
    assert!(q < &BigRational::one(), "zero probability must be < 1");
    let mut n = vec![1usize];
    let mut l = vec![l_r(0)];
    for r in 1..=r_max {
        let lr = l_r(r);
        let mut cand = (n[r - 1] + 1).max(2);
        loop {
            let lhs = num_traits::pow(q.clone(), cand) * pow2(r as i64) * int(lr as i64) * int(cand as i64 - 1);
            if lhs < BigRational::one() {
                break;
            }
            cand += 1;
        }
        n.push(cand);
        l.push(lr);
    }
    RankParameters { l, n }
}

pub fn choose_n(p: &MarkovProcess, zero: Symbol, r_max: usize) -> RankParameters {
    choose_n_for(&max_zero_prob(p, zero), r_max)
}

// ---- diagnostics ----

/// Zero extremities of a growing central word.
#[derive(Clone, Copy, Debug, Default)]
struct Extremities {
    len: usize,
    left: usize,
    right: usize,
}

impl Extremities {
    fn start(s: Symbol, zero: Symbol) -> Self {
        let z = usize::from(s == zero);
        Extremities { len: 1, left: z, right: z }
    }

    /// Length of the shorter extremity.
    fn ze(&self) -> usize {
        self.left.min(self.right)
    }

    fn extend(&mut self, a1: Symbol, a2: Symbol, zero: Symbol) {
        let (z1, z2) = (a1 == zero, a2 == zero);
        if self.left == self.len {
            // All-zero word: a zero on one side extends the run across it.
            (self.left, self.right) = match (z1, z2) {
                (true, true) => (self.len + 2, self.len + 2),
                (true, false) => (self.len + 1, 0),
                (false, true) => (0, self.len + 1),
                (false, false) => (0, 0),
            };
        } else {
            self.left = if z1 { self.left + 1 } else { 0 };
            self.right = if z2 { self.right + 1 } else { 0 };
        }
        self.len += 2;
    }
}

/// `P(0 w 0 | w)`.
fn zero_zero_extension(p: &MarkovProcess, w: &[Symbol], zero: Symbol) -> f64 {
    to_f64(&p.two_sided_extension(zero, w, zero).expect("symbols within alphabet"))
}

/// One step of the case-I capital, in log2. `None` means the capital is zero.
fn case_i_step(log_f: Option<f64>, ext: &Extremities, w: &[Symbol], a1: Symbol, a2: Symbol, n: usize, p: &MarkovProcess, zero: Symbol) -> Option<f64> {
    let lf = log_f?;
    if ext.ze() != n {
        return Some(lf);
    }
    if a1 == zero && a2 == zero {
        return None;
    }
    Some(lf - (1.0 - zero_zero_extension(p, w, zero)).log2())
}

/// The sequence of log2 capitals `f(x[-j..=j])`, `j = 0..`, for a window
/// centered at coordinate 0. `None` entries are zero capital.
pub fn case_i_path(x: &SymbolSequence, n: usize, p: &MarkovProcess, zero: Symbol) -> Vec<Option<f64>> {
    let Some(first) = x.get(0) else { return vec![] };
    let reach = (-x.first_coord()).min(x.end_coord() - 1).max(0) as usize;
    let mut ext = Extremities::start(first, zero);
    let mut lf = Some(0.0);
    let mut out = vec![lf];
    for j in 1..=reach {
        let (a1, a2) = (x.get(-(j as i64)).unwrap(), x.get(j as i64).unwrap());
        let w = x.slice(-(j as i64) + 1, j as i64).unwrap();
        lf = case_i_step(lf, &ext, w, a1, a2, n, p, zero);
        ext.extend(a1, a2, zero);
        out.push(lf);
    }
    out
}

/// `log2 sup_j f(x[-j..=j])` at delimiter length `n`.
pub fn case_i_sup(x: &SymbolSequence, n: usize, p: &MarkovProcess, zero: Symbol) -> f64 {
    case_i_path(x, n, p, zero).into_iter().flatten().fold(0.0, f64::max)
}

/// Capital of a single centered odd-length word, in log2.
pub fn case_i_word(w: &[Symbol], n: usize, p: &MarkovProcess, zero: Symbol) -> Option<f64> {
    let x = SymbolSequence::centered(w.to_vec(), crate::markov::Provenance::UserSupplied);
    *case_i_path(&x, n, p, zero).last().expect("non-empty word")
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    /// log2 of the aggregate capital (may be +inf).
    pub log2_value: f64,
    /// Per-rank log2 sups, index `r'`.
    pub per_rank: Vec<f64>,
}

impl Diagnostic {
    pub fn value(&self) -> f64 {
        self.log2_value.exp2()
    }

    pub fn exceeds(&self, threshold: f64) -> bool {
        self.log2_value > threshold.log2()
    }
}

fn log2_sum_weighted(terms: &[(f64, f64)]) -> f64 {
    // sum w_i 2^{l_i} computed stably.
    let max = terms.iter().map(|&(w, l)| w.log2() + l).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|&(w, l)| (w.log2() + l - max).exp2()).sum::<f64>().log2()
}

/// Aggregate case-I test `sum_{r'=0}^{R} 2^{-(r'+1)} S_{r'}` with `N_0 = 0`
/// for the rank-0 term, so that sequences without any zero are caught.
pub fn diagnostic_case_i(x: &SymbolSequence, params: &RankParameters, p: &MarkovProcess, zero: Symbol) -> Diagnostic {
    let per_rank: Vec<f64> = (0..=params.max_rank())
        .map(|r| {
            let n = if r == 0 { 0 } else { params.n[r] };
            case_i_sup(x, n, p, zero)
        })
        .collect();
    let terms: Vec<(f64, f64)> = per_rank.iter().enumerate().map(|(r, &l)| (0.5f64.powi(r as i32 + 1), l)).collect();
    Diagnostic { log2_value: log2_sum_weighted(&terms), per_rank }
}

/// `1 / (2^r L_r (N_r - 1))`.
pub fn case_ii_base(r: usize, params: &RankParameters) -> f64 {
    1.0 / (2f64.powi(r as i32) * params.l[r] as f64 * (params.n[r] - 1) as f64)
}

/// log2 path of `g^k_r(x[-j..=j])`, `j = 0..`. `None` entries are zero.
pub fn case_ii_path(x: &SymbolSequence, r: usize, k: usize, params: &RankParameters, p: &MarkovProcess, zero: Symbol) -> Vec<Option<f64>> {
    if x.get(0).is_none() {
        return vec![];
    }
    let horizon = params.l[r] * (params.n[r] - 1);
    let reach = (-x.first_coord()).min(x.end_coord() - 1).max(0) as usize;
    let mut g = Some(case_ii_base(r, params).log2());
    let mut out = vec![g];
    for j in 1..=reach {
        let wlen = 2 * j - 1;
        let (a1, a2) = (x.get(-(j as i64)).unwrap(), x.get(j as i64).unwrap());
        if let Some(lg) = g {
            if k <= wlen && wlen < horizon {
                g = if a1 == zero && a2 == zero {
                    let w = x.slice(-(j as i64) + 1, j as i64).unwrap();
                    Some(lg - zero_zero_extension(p, w, zero).log2())
                } else {
                    None
                };
            }
        }
        out.push(g);
    }
    out
}

/// `g^k_r` of a single centered odd-length word, in log2.
pub fn case_ii_word(w: &[Symbol], r: usize, k: usize, params: &RankParameters, p: &MarkovProcess, zero: Symbol) -> Option<f64> {
    let x = SymbolSequence::centered(w.to_vec(), crate::markov::Provenance::UserSupplied);
    *case_ii_path(&x, r, k, params, p, zero).last().expect("non-empty word")
}

/// `log2 sup_j g^k_r(x[-j..=j])`.
pub fn diagnostic_case_ii_k(x: &SymbolSequence, r: usize, k: usize, params: &RankParameters, p: &MarkovProcess, zero: Symbol) -> f64 {
    case_ii_path(x, r, k, params, p, zero).into_iter().flatten().fold(f64::NEG_INFINITY, f64::max)
}

/// `log2 sup_j g_r(x[-j..=j])` with `g_r = sum_{k=1}^{L_r(N_r-1)} g^k_r`.
pub fn diagnostic_case_ii(x: &SymbolSequence, r: usize, params: &RankParameters, p: &MarkovProcess, zero: Symbol) -> Diagnostic {
    let horizon = params.l[r] * (params.n[r] - 1);
    let paths: Vec<Vec<Option<f64>>> = (1..=horizon).map(|k| case_ii_path(x, r, k, params, p, zero)).collect();
    let len = paths.first().map_or(0, Vec::len);
    let mut best = f64::NEG_INFINITY;
    for j in 0..len {
        let terms: Vec<(f64, f64)> = paths.iter().filter_map(|path| path[j].map(|l| (1.0, l))).collect();
        if !terms.is_empty() {
            best = best.max(log2_sum_weighted(&terms));
        }
    }
    Diagnostic { log2_value: best, per_rank: vec![best] }
}

/// Draws `(a1, a2)` from `P(a1 w a2 | w)`.
pub fn sample_extension<R: Rng>(p: &MarkovProcess, w: &[Symbol], rng: &mut R) -> (Symbol, Symbol) {
    let k = p.alphabet_size();
    let mut cum = Vec::with_capacity(k * k);
    let mut acc = 0.0;
    for a1 in 0..k {
        for a2 in 0..k {
            acc += to_f64(&p.two_sided_extension(a1, w, a2).expect("symbols within alphabet"));
            cum.push(acc);
        }
    }
    let u = rng.gen::<f64>() * acc;
    let idx = cum.partition_point(|&c| c <= u).min(k * k - 1);
    (idx / k, idx % k)
}

/// Monte Carlo check of `sum_{a1 a2} g(a1 w a2) P(a1 w a2 | w) = g(w)`.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleCheck {
    pub expected: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MartingaleCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.mean - self.expected).abs() <= sigmas * self.std_error + 1e-12 * self.expected.abs()
    }
}

/// Runs the one-step martingale check for a capital function `g` at word `w`.
pub fn martingale_check<R, G>(p: &MarkovProcess, w: &[Symbol], samples: usize, rng: &mut R, g: G) -> MartingaleCheck
where
    R: Rng,
    G: Fn(&[Symbol]) -> Option<f64>,
{
    let value = |word: &[Symbol]| g(word).map_or(0.0, f64::exp2);
    let expected = value(w);
    let mut ext = Vec::with_capacity(w.len() + 2);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (a1, a2) = sample_extension(p, w, rng);
        ext.clear();
        ext.push(a1);
        ext.extend_from_slice(w);
        ext.push(a2);
        let v = value(&ext);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    MartingaleCheck { expected, mean, std_error: (var / n).sqrt(), samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::markov::Provenance;
    use proptest::prelude::*;

    fn seq(s: &str) -> SymbolSequence {
        // 'a' -> 1, 'b' -> 2, '0' -> 0
        let v = s.chars().map(|c| match c { '0' => 0, 'a' => 1, 'b' => 2, _ => panic!() }).collect();
        SymbolSequence::centered(v, Provenance::UserSupplied)
    }

    fn bern3() -> MarkovProcess {
        MarkovProcess::bernoulli(&["0", "a", "b"], &[rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap()
    }

    #[test]
    fn extraction_examples() {
        let x = seq("000000a000000");
        let s = extract_skeleton(&x, 1, 0, 6, 0).found().unwrap();
        assert_eq!(s.pattern(), vec![6, 1, 6]);
        assert_eq!(s.length(), 1);
        assert_eq!(s.start, -6);
        let y = SymbolSequence::new(vec![0, 0, 0, 0, 0, 0, 1, 0, 2, 0, 0, 0, 0, 0, 0], -6, Provenance::UserSupplied);
        let s = extract_skeleton(&y, 1, 0, 6, 0).found().unwrap();
        assert_eq!(s.pattern(), vec![6, 3, 6]);
        let periodic = SymbolSequence::centered(vec![1; 101], Provenance::UserSupplied);
        assert_eq!(extract_skeleton(&periodic, 1, 0, 6, 0), Extraction::NotFound);
        assert_eq!(extract_skeleton(&seq("00000000000"), 1, 0, 6, 0), Extraction::InDelimiter);
    }

    #[test]
    fn extraction_trims_and_keeps_interior_blocks() {
        let y = SymbolSequence::new(
            "0000000000a00b0a000000000".chars().map(|c| match c { '0' => 0, 'a' => 1, _ => 2 }).collect(),
            -11,
            Provenance::UserSupplied,
        );
        let s = extract_skeleton(&y, 1, 0, 6, 0).found().unwrap();
        assert_eq!(s.pattern(), vec![6, 1, 2, 3, 6]);
        assert!(s.validate(6).is_ok());
    }

    #[test]
    fn decompose_example() {
        let s = Skeleton::new(vec![9, 7, 9], vec![2, 3], 2, 0).unwrap();
        let parts = decompose(&s, 7).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].pattern(), vec![9, 2, 7]);
        assert_eq!(parts[1].pattern(), vec![7, 3, 9]);
        assert_eq!(parts[1].start, 11);
        assert_eq!(recompose(&parts).unwrap(), s);
        let plain = Skeleton::new(vec![9, 3, 9], vec![2, 3], 2, 0).unwrap();
        assert_eq!(decompose(&plain, 7).unwrap(), vec![plain.relabeled(1, 0)]);
    }

    #[test]
    fn n_sequence_examples() {
        let p = choose_n_for(&rat(1, 2), 8);
        assert_eq!(p.n[1], 6);
        assert!(p.n.windows(2).all(|w| w[0] < w[1]));
        let q = choose_n_for(&rat(1, 4), 8);
        assert!(q.n.iter().zip(&p.n).all(|(a, b)| a <= b));
    }

    #[test]
    fn case_i_trivial_and_divergent() {
        let p = bern3();
        let params = choose_n(&p, 0, 3);
        let plain = SymbolSequence::centered(vec![1, 0, 2, 0, 1], Provenance::UserSupplied);
        assert_eq!(case_i_sup(&plain, params.n[1], &p, 0), 0.0);
        let periodic = SymbolSequence::centered(vec![1; 10_001], Provenance::UserSupplied);
        assert!(diagnostic_case_i(&periodic, &params, &p, 0).exceeds(1e3));
    }

    #[test]
    fn case_i_unrolls_on_delimiter_events() {
        // Two rank-1 events: the window reaches 0^6 extremities twice, extended by non-00.
        let p = bern3();
        let w: Vec<Symbol> = "a000000a000000a".chars().map(|c| if c == '0' { 0 } else { 1 }).collect();
        let x = SymbolSequence::centered(w, Provenance::UserSupplied);
        let path = case_i_path(&x, 6, &p, 0);
        let q2 = 0.25f64;
        assert!(path.last().unwrap().unwrap() >= -(1.0 - q2).log2() - 1e-12);
    }

    #[test]
    fn case_ii_witness_and_base() {
        let p = bern3();
        let params = choose_n(&p, 0, 2);
        let short = SymbolSequence::centered(vec![1], Provenance::UserSupplied);
        assert_eq!(case_ii_path(&short, 1, 3, &params, &p, 0)[0], Some(case_ii_base(1, &params).log2()));
        let reach = params.l[1] * params.n[1];
        let mut w = vec![0; reach];
        w.push(1);
        w.extend(vec![0; reach]);
        let x = SymbolSequence::centered(w, Provenance::UserSupplied);
        assert!(diagnostic_case_ii(&x, 1, &params, &p, 0).log2_value >= 0.0);
    }

    proptest! {
        #[test]
        fn decompose_roundtrip(blocks in proptest::collection::vec((1usize..5, 2usize..12), 1..6), lead in 12usize..15) {
            let n_prev = 7;
            let mut zeros = vec![lead];
            let mut blanks = vec![];
            for (b, z) in &blocks { blanks.push(*b); zeros.push(*z); }
            *zeros.last_mut().unwrap() = lead;
            let s = Skeleton::new(zeros, blanks, 3, -5).unwrap();
            let parts = decompose(&s, n_prev).unwrap();
            prop_assert_eq!(parts.iter().map(Skeleton::length).sum::<usize>(), s.length());
            prop_assert_eq!(recompose(&parts).unwrap(), s);
        }

        #[test]
        fn extraction_window_monotone(v in proptest::collection::vec(prop_oneof![3 => Just(0usize), 1 => Just(1usize), 1 => Just(2usize)], 21..200), pad in 1usize..10) {
            let n_r = 4;
            let mid = v.len() / 2;
            let narrow = SymbolSequence::new(v[pad.min(mid)..v.len() - pad.min(mid)].to_vec(), pad.min(mid) as i64 - mid as i64, Provenance::Sampled);
            let wide = SymbolSequence::new(v.clone(), -(mid as i64), Provenance::Sampled);
            if let Extraction::Found(s) = extract_skeleton(&narrow, 1, 0, n_r, 0) {
                prop_assert!(s.validate(n_r).is_ok());
                prop_assert_eq!(extract_skeleton(&wide, 1, 0, n_r, 0), Extraction::Found(s));
            }
        }
    }
}
