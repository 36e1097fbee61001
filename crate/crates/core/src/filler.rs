//! Fillers of a skeleton, the index sets `J(F, n)`, the equivalence classes
//! they induce, and the Filler Lemma bounds as checkable predicates.
//!
//! Everything here assumes a memory-1 process and is exact; the cost is
//! exponential in the skeleton length, so caps are enforced.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{ceil_n_log2, eps, format_rational, int, log2_f64, to_f64};
use crate::markov::{MarkovProcess, Symbol};
use crate::skeleton::{decompose, RankParameters, Skeleton};

/// Which blank contents count as fillers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillerMode {
    /// Every word of `Sigma^l`.
    Free,
    /// Only words that reproduce the skeleton: no zero next to a zero block
    /// and no two adjacent zeros inside a blank run.
    Consistent,
}

#[derive(Clone, Debug)]
pub struct FillerCaps {
    pub max_length: usize,
    pub max_fillers: usize,
}

impl Default for FillerCaps {
    fn default() -> Self {
        FillerCaps { max_length: 12, max_fillers: 1 << 16 }
    }
}

/// `eta`, `theta` (min and max transition probability over the processes
/// involved) and the entropy `H`.
#[derive(Clone, Debug, Serialize)]
pub struct AepBounds {
    #[serde(with = "crate::exact::serde_rational")]
    pub eta: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub theta: BigRational,
    #[serde(with = "crate::exact::serde_rational")]
    pub h: BigRational,
}

impl AepBounds {
    pub fn from_processes(ps: &[&MarkovProcess], h: BigRational) -> Self {
        let all = || ps.iter().flat_map(|p| p.distinct_rows().into_iter().flat_map(|(_, r)| r.iter().cloned()));
        let eta = all().min().expect("non-empty");
        let theta = all().max().expect("non-empty");
        AepBounds { eta, theta, h }
    }

    /// `log2` of `factor * 2^{-len (H - e)}`.
    fn log_threshold(&self, factor: &BigRational, len: usize, e: &BigRational) -> f64 {
        log2_f64(factor) - len as f64 * (to_f64(&self.h) - to_f64(e))
    }
}

pub fn is_consistent(s: &Skeleton, filler: &[Symbol], zero: Symbol) -> bool {
    let mut idx = 0;
    for &run in &s.blanks {
        let w = &filler[idx..idx + run];
        if w[0] == zero || w[run - 1] == zero || w.windows(2).any(|p| p[0] == zero && p[1] == zero) {
            return false;
        }
        idx += run;
    }
    true
}

/// All fillers in lexicographic order.
pub fn enumerate_fillers(s: &Skeleton, alphabet_size: usize, mode: FillerMode, zero: Symbol, caps: &FillerCaps) -> Result<Vec<Vec<Symbol>>> {
    let l = s.length();
    if l > caps.max_length {
        return Err(Error::CapExceeded(format!("skeleton length {l} exceeds filler cap {}", caps.max_length)));
    }
    let count = alphabet_size.checked_pow(l as u32).unwrap_or(usize::MAX);
    if count > caps.max_fillers {
        return Err(Error::CapExceeded(format!("{alphabet_size}^{l} fillers exceed the cap of {}", caps.max_fillers)));
    }
    let mut out = Vec::new();
    let mut cur = vec![0; l];
    loop {
        if mode == FillerMode::Free || is_consistent(s, &cur, zero) {
            out.push(cur.clone());
        }
        // Odometer increment, last position fastest.
        let mut i = l;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < alphabet_size {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// `x = 0^{l_1} x_1 0^{l_2} ... x_t 0^{l_{t+1}}`.
#[derive(Clone, Debug)]
pub struct BlockWord {
    pub zero_runs: Vec<usize>,
    pub blocks: Vec<Vec<Symbol>>,
}

impl BlockWord {
    pub fn word(&self, zero: Symbol) -> Vec<Symbol> {
        let mut w = Vec::new();
        for (i, &z) in self.zero_runs.iter().enumerate() {
            w.extend(std::iter::repeat(zero).take(z));
            if let Some(b) = self.blocks.get(i) {
                w.extend_from_slice(b);
            }
        }
        w
    }
}

/// `P'(x, n) = prod_i P(0^{l_i} x_i 0^{l_{i+1}}) / prod_{i=2}^{t} P(0^{l_i})`.
pub fn approx_prob_product(x: &BlockWord, n: u32, p: &MarkovProcess, zero: Symbol) -> Result<crate::exact::ApproxProb> {
    let t = x.blocks.len();
    if t == 0 || x.zero_runs.len() != t + 1 {
        return Err(Error::MalformedDecomposition(format!("{} blocks need {} zero runs, got {}", t, t + 1, x.zero_runs.len())));
    }
    if x.zero_runs.iter().any(|&z| z < p.memory()) {
        return Err(Error::MalformedDecomposition(format!("zero runs must be at least the memory {}", p.memory())));
    }
    let child = ceil_n_log2(n, 3 * t as u64);
    let mut num = BigRational::one();
    for i in 0..t {
        let mut w = vec![zero; x.zero_runs[i]];
        w.extend_from_slice(&x.blocks[i]);
        w.extend(std::iter::repeat(zero).take(x.zero_runs[i + 1]));
        num *= p.cylinder_prob(&w, child)?.value;
    }
    let mut den = BigRational::one();
    for i in 1..t {
        den *= p.word_prob(&vec![zero; x.zero_runs[i]])?;
    }
    Ok(crate::exact::ApproxProb::new(num / den, n))
}

/// `P(x) in ((1 - e_p) eta 2^{-k(H + e_p)}, (1 + e_p)/eta 2^{-k(H - e_p)})`.
pub fn aep_layer_membership(word: &[Symbol], layer: u32, p: &MarkovProcess, bounds: &AepBounds) -> Result<bool> {
    let prob = p.word_prob(word)?;
    Ok(aep_band_contains(&prob, word.len(), layer, bounds))
}

fn aep_band_contains(prob: &BigRational, k: usize, layer: u32, bounds: &AepBounds) -> bool {
    let e = eps(layer);
    let lp = log2_f64(prob);
    let h = to_f64(&bounds.h);
    let ef = to_f64(&e);
    let lower = log2_f64(&((BigRational::one() - &e) * &bounds.eta)) - k as f64 * (h + ef);
    let upper = log2_f64(&((BigRational::one() + &e) / &bounds.eta)) - k as f64 * (h - ef);
    lower < lp && lp < upper
}

/// Exact measure of layer members among words of length `k`.
pub fn aep_layer_measure(k: usize, layer: u32, p: &MarkovProcess, bounds: &AepBounds) -> Result<BigRational> {
    if p.memory() != 1 {
        return Err(Error::Unsupported("AEP enumeration needs memory 1".into()));
    }
    let a = p.alphabet_size();
    let mut total = BigRational::zero();
    let mut stack: Vec<(usize, Symbol, BigRational)> = (0..a).map(|s| (1, s, p.stationary()[s].clone())).collect();
    while let Some((len, last, prob)) = stack.pop() {
        if len == k {
            if aep_band_contains(&prob, k, layer, bounds) {
                total += prob;
            }
            continue;
        }
        for s in 0..a {
            stack.push((len + 1, s, &prob * p.p(last, s)));
        }
    }
    Ok(total)
}

/// One equivalence class of `~_n`.
#[derive(Clone, Debug, Serialize)]
pub struct FillerClass {
    /// Blank indices (0-based into `s_1..s_l`) in `J`, sorted.
    pub j: Vec<usize>,
    /// Filler symbols on `j`.
    pub fixed: Vec<Symbol>,
    /// Indices into [`ClassPartition::fillers`].
    pub members: Vec<usize>,
    /// Absolute mass `sum_F P(<B, F, S>)`.
    #[serde(with = "crate::exact::serde_rational")]
    pub mass: BigRational,
    /// `mass / P(<{}, S>)`.
    #[serde(with = "crate::exact::serde_rational")]
    pub probability: BigRational,
    /// `P(<J, F, S>)`.
    #[serde(with = "crate::exact::serde_rational")]
    pub cylinder: BigRational,
    /// Class index of the restriction to each sub-skeleton (rank >= 2).
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassPartition {
    pub pattern: String,
    pub rank: usize,
    pub precision: u32,
    pub mode: FillerMode,
    #[serde(skip)]
    pub fillers: Vec<Vec<Symbol>>,
    #[serde(skip)]
    pub class_of: Vec<usize>,
    #[serde(skip)]
    pub filler_probs: Vec<BigRational>,
    #[serde(with = "crate::exact::serde_rational")]
    pub total: BigRational,
    pub classes: Vec<FillerClass>,
}

impl ClassPartition {
    pub fn filler_index(&self, filler: &[Symbol]) -> Option<usize> {
        // Fillers are sorted lexicographically.
        self.fillers.binary_search_by(|f| f.as_slice().cmp(filler)).ok()
    }

    /// `J(F, n)` as blank indices.
    pub fn j_of(&self, filler_idx: usize) -> &[usize] {
        &self.classes[self.class_of[filler_idx]].j
    }
}

/// Per-position constraint in a cylinder computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Fixed(Symbol),
    Free,
}

/// Everything needed to compute fillers, J sets and classes for one process.
#[derive(Clone, Debug)]
pub struct FillerContext<'a> {
    pub process: &'a MarkovProcess,
    pub zero: Symbol,
    pub mode: FillerMode,
    pub bounds: &'a AepBounds,
    pub params: &'a RankParameters,
    pub caps: FillerCaps,
}

impl<'a> FillerContext<'a> {
    pub fn new(process: &'a MarkovProcess, zero: Symbol, mode: FillerMode, bounds: &'a AepBounds, params: &'a RankParameters) -> Result<Self> {
        if process.memory() != 1 {
            return Err(Error::Unsupported(format!("filler computations need memory 1, got {}", process.memory())));
        }
        Ok(FillerContext { process, zero, mode, bounds, params, caps: FillerCaps::default() })
    }

    pub fn with_caps(mut self, caps: FillerCaps) -> Self {
        self.caps = caps;
        self
    }

    fn slots(&self, s: &Skeleton, filler: &[Symbol], fixed: &[usize]) -> Vec<Slot> {
        let mask = s.mask();
        let mut slots = Vec::with_capacity(mask.len());
        let mut b = 0;
        let mut fi = fixed.iter().peekable();
        for &is_blank in &mask {
            if is_blank {
                if fi.peek() == Some(&&b) {
                    fi.next();
                    slots.push(Slot::Fixed(filler[b]));
                } else {
                    slots.push(Slot::Free);
                }
                b += 1;
            } else {
                slots.push(Slot::Fixed(self.zero));
            }
        }
        slots
    }

    fn allowed(&self, mask: &[bool], pos: usize, sym: Symbol) -> bool {
        if self.mode == FillerMode::Free || sym != self.zero || !mask[pos] {
            return true;
        }
        let left_zero_block = pos == 0 || !mask[pos - 1];
        let right_zero_block = pos + 1 == mask.len() || !mask[pos + 1];
        !(left_zero_block || right_zero_block)
    }

    fn pair_allowed(&self, mask: &[bool], pos: usize, a: Symbol, b: Symbol) -> bool {
        // `pos` is the position of `b`.
        self.mode == FillerMode::Free || !(mask[pos - 1] && mask[pos] && a == self.zero && b == self.zero)
    }

    /// Exact probability of the cylinder with zeros on `Z_S`, `filler` on
    /// the blank indices `fixed` (sorted), and free blanks marginalized.
    pub fn cylinder(&self, s: &Skeleton, filler: &[Symbol], fixed: &[usize]) -> BigRational {
        let p = self.process;
        let k = p.alphabet_size();
        let mask = s.mask();
        let slots = self.slots(s, filler, fixed);
        let cands = |pos: usize| -> Vec<Symbol> {
            match slots[pos] {
                Slot::Fixed(sym) => vec![sym],
                Slot::Free => (0..k).filter(|&sym| self.allowed(&mask, pos, sym)).collect(),
            }
        };
        let mut alpha: Vec<(Symbol, BigRational)> = cands(0).into_iter().map(|sym| (sym, p.stationary()[sym].clone())).collect();
        for pos in 1..slots.len() {
            let next: Vec<(Symbol, BigRational)> = cands(pos)
                .into_iter()
                .map(|b| {
                    let v: BigRational = alpha
                        .iter()
                        .filter(|(a, _)| self.pair_allowed(&mask, pos, *a, b))
                        .map(|(a, w)| w * p.p(*a, b))
                        .sum();
                    (b, v)
                })
                .collect();
            alpha = next;
        }
        alpha.into_iter().map(|(_, v)| v).sum()
    }

    /// Spec-shaped alias: `P(<I, F, S>)` tagged with precision `n`.
    pub fn cylinder_of(&self, i: &[usize], filler: &[Symbol], s: &Skeleton, n: u32) -> Result<crate::exact::ApproxProb> {
        if s.length() > self.caps.max_length {
            return Err(Error::CapExceeded(format!("skeleton length {} exceeds cap", s.length())));
        }
        let mut idx = i.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.last().is_some_and(|&b| b >= s.length()) {
            return Err(Error::MalformedSkeleton("index set outside the blanks".into()));
        }
        Ok(crate::exact::ApproxProb::new(self.cylinder(s, filler, &idx), n))
    }

    /// The full word (zeros and filler) over the skeleton's span.
    pub fn word(&self, s: &Skeleton, filler: &[Symbol]) -> Vec<Symbol> {
        let mut b = 0;
        s.mask()
            .into_iter()
            .map(|blank| {
                if blank {
                    b += 1;
                    filler[b - 1]
                } else {
                    self.zero
                }
            })
            .collect()
    }

    fn l_total(s: &Skeleton) -> usize {
        s.span()
    }

    /// Threshold (log2) for rank 1: `3/(2 eta_1) 2^{-L(H - eps_1)}`.
    fn rank1_threshold(&self, s: &Skeleton) -> f64 {
        self.bounds.log_threshold(&(int(3) / (int(2) * &self.bounds.eta)), Self::l_total(s), &eps(1))
    }

    /// Threshold (log2) for rank `r`: `(1 + eps_r)/eta_r 2^{-L(H - eps_r)}`.
    fn rank_threshold(&self, s: &Skeleton, r: usize) -> f64 {
        let e = eps(r as u32);
        self.bounds.log_threshold(&((BigRational::one() + &e) / &self.bounds.eta), Self::l_total(s), &e)
    }

    /// `J(F, n)` as sorted blank indices (the zero set is implicit).
    pub fn compute_j(&self, s: &Skeleton, filler: &[Symbol], n: u32) -> Result<Vec<usize>> {
        let part = self.classes(s, n)?;
        let idx = part.filler_index(filler).ok_or_else(|| Error::AlphabetMismatch("filler not in the filler set".into()))?;
        Ok(part.j_of(idx).to_vec())
    }

    /// The partition of fillers into `~_n` classes.
    pub fn classes(&self, s: &Skeleton, n: u32) -> Result<ClassPartition> {
        let mut memo = HashMap::new();
        self.classes_memo(s, n, &mut memo)
    }

    fn classes_memo(&self, s: &Skeleton, n: u32, memo: &mut HashMap<(Vec<usize>, usize, u32), ClassPartition>) -> Result<ClassPartition> {
        if (n as usize) < s.rank || s.rank == 0 {
            return Err(Error::ConstraintViolation(format!("J(F, n) needs n >= rank >= 1 (n = {n}, rank = {})", s.rank)));
        }
        let key = (s.pattern(), s.rank, n);
        if let Some(p) = memo.get(&key) {
            return Ok(p.clone());
        }
        let fillers = enumerate_fillers(s, self.process.alphabet_size(), self.mode, self.zero, &self.caps)?;
        let l = s.length();
        let mut js: Vec<Vec<usize>> = Vec::with_capacity(fillers.len());
        let mut probs = Vec::with_capacity(fillers.len());
        let mut cyls = Vec::with_capacity(fillers.len());
        let mut child_ids: Vec<Vec<usize>> = Vec::with_capacity(fillers.len());
        if s.rank == 1 {
            let thr = self.rank1_threshold(s);
            for f in &fillers {
                // P(<B_k>) is non-increasing in k.
                let mut k = 0;
                let mut cyl_k = self.cylinder(s, f, &[]);
                while k < l {
                    let next: Vec<usize> = (0..=k).collect();
                    let c = self.cylinder(s, f, &next);
                    if log2_f64(&c) < thr {
                        break;
                    }
                    k += 1;
                    cyl_k = c;
                }
                js.push((0..k).collect());
                child_ids.push(Vec::new());
                cyls.push(cyl_k);
                probs.push(self.process.word_prob(&self.word(s, f))?);
            }
        } else {
            let n_prev = self.params.n[s.rank - 1];
            let parts = decompose(s, n_prev)?;
            let child_n = ceil_n_log2(n, 3 * parts.len() as u64);
            let children: Vec<ClassPartition> = parts.iter().map(|c| self.classes_memo(c, child_n, memo)).collect::<Result<_>>()?;
            let thr = self.rank_threshold(s, s.rank);
            for f in &fillers {
                let mut j0 = Vec::new();
                let mut ids = Vec::with_capacity(parts.len());
                let mut base = 0;
                for (part, child) in parts.iter().zip(&children) {
                    let sub = &f[base..base + part.length()];
                    let idx = child.filler_index(sub).ok_or_else(|| Error::MalformedDecomposition("child filler missing".into()))?;
                    j0.extend(child.j_of(idx).iter().map(|b| b + base));
                    ids.push(child.class_of[idx]);
                    base += part.length();
                }
                let rest: Vec<usize> = (0..l).filter(|b| !j0.contains(b)).collect();
                let mut chosen = j0.clone();
                chosen.sort_unstable();
                let mut cyl = self.cylinder(s, f, &chosen);
                for &t in &rest {
                    let mut next = chosen.clone();
                    next.push(t);
                    next.sort_unstable();
                    let c = self.cylinder(s, f, &next);
                    if log2_f64(&c) <= thr {
                        break;
                    }
                    chosen = next;
                    cyl = c;
                }
                js.push(chosen);
                child_ids.push(ids);
                cyls.push(cyl);
                probs.push(self.process.word_prob(&self.word(s, f))?);
            }
        }
        let total: BigRational = probs.iter().sum();
        // Keying on the child classes too makes every class refine its
        // coarse class.
        let mut by_key: BTreeMap<(Vec<usize>, Vec<Symbol>, Vec<usize>), usize> = BTreeMap::new();
        let mut classes: Vec<FillerClass> = Vec::new();
        let mut class_of = Vec::with_capacity(fillers.len());
        for (i, f) in fillers.iter().enumerate() {
            let fixed: Vec<Symbol> = js[i].iter().map(|&b| f[b]).collect();
            let id = *by_key.entry((js[i].clone(), fixed.clone(), child_ids[i].clone())).or_insert_with(|| {
                classes.push(FillerClass {
                    j: js[i].clone(),
                    fixed,
                    members: Vec::new(),
                    mass: BigRational::zero(),
                    probability: BigRational::zero(),
                    cylinder: cyls[i].clone(),
                    children: child_ids[i].clone(),
                });
                classes.len() - 1
            });
            classes[id].members.push(i);
            classes[id].mass += &probs[i];
            class_of.push(id);
        }
        for c in &mut classes {
            c.probability = &c.mass / &total;
        }
        let part = ClassPartition {
            pattern: s.pattern_string(),
            rank: s.rank,
            precision: n,
            mode: self.mode,
            fillers,
            class_of,
            filler_probs: probs,
            total,
            classes,
        };
        memo.insert(key, part.clone());
        Ok(part)
    }

    /// Filler Lemma items 1, 2(a), 2(b) for skeleton `s` with `J(F, r)` and
    /// exceptional-set bound `eps_n`.
    pub fn filler_lemma_check(&self, s: &Skeleton, r: u32, n: u32) -> Result<FillerLemmaReport> {
        let part = self.classes(s, r)?;
        Ok(self.lemma_report(s, &part, r, n))
    }

    /// The same report from a precomputed partition.
    pub fn lemma_report(&self, s: &Skeleton, part: &ClassPartition, r: u32, n: u32) -> FillerLemmaReport {
        let l_total = s.span();
        let er = eps(r);
        let en = eps(n);
        // Item 1: P(F~_r) >= (1 + eps_r) 2^{-L(H - eps_r)}.
        let lower = self.bounds.log_threshold(&(BigRational::one() + &er), l_total, &er);
        let upper = self.bounds.log_threshold(&((BigRational::one() + &en) / &self.bounds.eta), l_total, &en);
        let theta_log = log2_f64(&self.bounds.theta).abs();
        let frac_bound = 1.0 - 2.0 * to_f64(&en) / theta_log;
        let mut item1_margin = f64::INFINITY;
        let mut bad_a = BigRational::zero();
        let mut bad_b = BigRational::zero();
        for (i, &cid) in part.class_of.iter().enumerate() {
            let class = &part.classes[cid];
            let lc = log2_f64(&class.cylinder);
            item1_margin = item1_margin.min(lc - lower);
            let w = &part.filler_probs[i] / &part.total;
            if lc >= upper {
                bad_a += &w;
            }
            let j_size = class.j.len() + s.zero_count();
            if (j_size as f64) / (l_total as f64) <= frac_bound {
                bad_b += &w;
            }
        }
        FillerLemmaReport {
            pattern: s.pattern_string(),
            r,
            n,
            l_total,
            classes: part.classes.len(),
            fillers: part.fillers.len(),
            item1_margin_log2: item1_margin,
            item1_holds: item1_margin >= 0.0,
            item2a_measure: format_rational(&bad_a),
            item2a_holds: bad_a <= en,
            item2b_measure: format_rational(&bad_b),
            item2b_holds: bad_b <= en,
            item2a_measure_f64: to_f64(&bad_a),
            item2b_measure_f64: to_f64(&bad_b),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FillerLemmaReport {
    pub pattern: String,
    pub r: u32,
    pub n: u32,
    pub l_total: usize,
    pub classes: usize,
    pub fillers: usize,
    /// `min_F log2 P(F~_r) - log2((1 + eps_r) 2^{-L(H - eps_r)})`.
    pub item1_margin_log2: f64,
    pub item1_holds: bool,
    pub item2a_measure: String,
    pub item2a_holds: bool,
    pub item2b_measure: String,
    pub item2b_holds: bool,
    pub item2a_measure_f64: f64,
    pub item2b_measure_f64: f64,
}

impl FillerLemmaReport {
    pub fn all_hold(&self) -> bool {
        self.item1_holds && self.item2a_holds && self.item2b_holds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use num_traits::Signed;
    use crate::skeleton::choose_n;

    fn bern() -> MarkovProcess {
        MarkovProcess::bernoulli(&["a", "0", "b"], &[rat(1, 2), rat(1, 4), rat(1, 4)]).unwrap()
    }

    fn chain() -> MarkovProcess {
        MarkovProcess::from_matrix(
            &["0", "a", "b"],
            vec![
                vec![rat(1, 4), rat(1, 2), rat(1, 4)],
                vec![rat(1, 3), rat(1, 3), rat(1, 3)],
                vec![rat(1, 6), rat(1, 2), rat(1, 3)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let s = Skeleton::parse("2,1,2", 1).unwrap();
        let caps = FillerCaps::default();
        assert_eq!(enumerate_fillers(&s, 3, FillerMode::Free, 0, &caps).unwrap().len(), 3);
        let s2 = Skeleton::parse("2,2,2", 1).unwrap();
        assert_eq!(enumerate_fillers(&s2, 2, FillerMode::Free, 0, &caps).unwrap(), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let long = Skeleton::parse("2,13,2", 1).unwrap();
        assert!(matches!(enumerate_fillers(&long, 2, FillerMode::Free, 0, &caps), Err(Error::CapExceeded(_))));
        // Consistent: ends of the run are non-zero, no interior 00.
        let s3 = Skeleton::parse("2,3,2", 1).unwrap();
        let cons = enumerate_fillers(&s3, 2, FillerMode::Consistent, 0, &caps).unwrap();
        assert_eq!(cons, vec![vec![1, 0, 1], vec![1, 1, 1]]);
    }

    #[test]
    fn cylinder_examples() {
        let p = chain();
        let params = choose_n(&p, 0, 2);
        let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(20).value);
        let ctx = FillerContext::new(&p, 0, FillerMode::Free, &bounds, &params).unwrap();
        let s = Skeleton::parse("2,2,2,1,2", 1).unwrap();
        let f = vec![1, 2, 1];
        assert_eq!(ctx.cylinder(&s, &f, &[0, 1, 2]), p.word_prob(&ctx.word(&s, &f)).unwrap());
        // Empty restriction equals the brute-force sum over fillers.
        let all = enumerate_fillers(&s, 3, FillerMode::Free, 0, &ctx.caps).unwrap();
        let brute: BigRational = all.iter().map(|g| p.word_prob(&ctx.word(&s, g)).unwrap()).sum();
        assert_eq!(ctx.cylinder(&s, &f, &[]), brute);
        let b = bern();
        let bb = AepBounds::from_processes(&[&b], b.entropy_rate(20).value);
        let bctx = FillerContext::new(&b, 1, FillerMode::Free, &bb, &params).unwrap();
        assert_eq!(bctx.cylinder(&s, &f, &[]), num_traits::pow(rat(1, 4), s.zero_count()));
    }

    #[test]
    fn partition_sums_to_one() {
        let p = chain();
        let params = choose_n(&p, 0, 2);
        let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(20).value);
        for mode in [FillerMode::Free, FillerMode::Consistent] {
            let ctx = FillerContext::new(&p, 0, mode, &bounds, &params).unwrap();
            let s = Skeleton::parse(&format!("{n},4,{n}", n = params.n[1]), 1).unwrap();
            let part = ctx.classes(&s, 1).unwrap();
            let sum: BigRational = part.classes.iter().map(|c| c.probability.clone()).sum();
            assert_eq!(sum, BigRational::one());
        }
    }

    #[test]
    fn vacuous_threshold_gives_zero_set() {
        let p = chain();
        let params = choose_n(&p, 0, 2);
        // Enormous entropy makes every threshold trivially small... and tiny
        // entropy makes it huge: J collapses to Z_S.
        let bounds = AepBounds { h: int(0), ..AepBounds::from_processes(&[&p], int(0)) };
        let ctx = FillerContext::new(&p, 0, FillerMode::Free, &bounds, &params).unwrap();
        let s = Skeleton::parse("2,3,2", 1).unwrap();
        let part = ctx.classes(&s, 1).unwrap();
        assert_eq!(part.classes.len(), 1);
        assert!(part.classes[0].j.is_empty());
    }

    #[test]
    fn probmult_examples() {
        let p = chain();
        let x = BlockWord { zero_runs: vec![1, 2, 1, 3], blocks: vec![vec![1, 2], vec![2], vec![1, 1, 2]] };
        let approx = approx_prob_product(&x, 6, &p, 0).unwrap();
        let exact = p.word_prob(&x.word(0)).unwrap();
        assert!((&exact - &approx.value).abs() <= eps(6) * &approx.value);
        let one = BlockWord { zero_runs: vec![2, 2], blocks: vec![vec![1]] };
        assert_eq!(approx_prob_product(&one, 3, &p, 0).unwrap().value, p.word_prob(&one.word(0)).unwrap());
        let bad = BlockWord { zero_runs: vec![0, 2], blocks: vec![vec![1]] };
        assert!(matches!(approx_prob_product(&bad, 3, &p, 0), Err(Error::MalformedDecomposition(_))));
    }

    #[test]
    fn aep_examples() {
        let coin = MarkovProcess::bernoulli(&["0", "1"], &[rat(1, 2), rat(1, 2)]).unwrap();
        let cb = AepBounds::from_processes(&[&coin], int(1));
        for layer in 1..12 {
            assert!(aep_layer_membership(&[0, 1, 1, 0, 1, 0, 0, 0], layer, &coin, &cb).unwrap());
        }
        let skew = MarkovProcess::bernoulli(&["0", "1"], &[rat(9, 10), rat(1, 10)]).unwrap();
        let sb = AepBounds::from_processes(&[&skew], skew.entropy_rate(20).value);
        assert!(!aep_layer_membership(&[0; 200], 6, &skew, &sb).unwrap());
    }
}
