//! Synthesis of the intermediate chain `C`.
//!
//! Given two memory-1 processes of equal entropy, `C` keeps the zero-block
//! statistics of `A` on symbol 0 and the one-block statistics of `B` on
//! symbol 1, and is tuned to the common entropy by moving inside the convex
//! set of pair distributions `Pi`.
//!
//! Symbol layout of `C` (alphabet size `c`): 0 and 1 are the designated
//! symbols, `2..c-1` are the `c - 3` middle symbols whose conditionals are
//! boxed into `[eta, delta]`, and `c - 1` is the slack symbol that absorbs
//! the residual mass.

use std::ops::Range;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{eps, format_rational, int, log2_f64, rat, to_f64, ApproxProb};
use crate::markov::{entropy_terms, MarkovProcess, Row, Symbol};

/// The constants cutting out `Pi`.
#[derive(Clone, Debug)]
pub struct PiConstraints {
    pub c: usize,
    pub big_m: u64,
    pub alpha: BigRational,
    pub beta: BigRational,
    pub gamma: BigRational,
    pub p0: BigRational,
    pub p1: BigRational,
    pub pa0: BigRational,
    pub pb1: BigRational,
    pub delta: BigRational,
    pub eta: BigRational,
}

impl PiConstraints {
    /// `pa0 = P_A(0)`, `p0 = P_A(0|0)`, likewise for `B` and symbol 1.
    pub fn new(c: usize, big_m: u64, pa0: BigRational, p0: BigRational, pb1: BigRational, p1: BigRational) -> Result<Self> {
        if c < 4 {
            return Err(Error::ConstraintViolation(format!("alphabet size c = {c} must be at least 4")));
        }
        if big_m == 0 {
            return Err(Error::ConstraintViolation("M must be positive".into()));
        }
        let (alpha, beta) = (alpha_from(&pa0, &p0)?, alpha_from(&pb1, &p1)?);
        let gamma = &alpha + &beta;
        let c3 = (c - 3) as i64;
        let delta = BigRational::one() / int(big_m as i64 * c3);
        let eta = BigRational::one() / int(c as i64 * c3);
        let ok_unit = |x: &BigRational| x.is_positive() && x < &BigRational::one();
        if !(ok_unit(&alpha) && ok_unit(&beta) && ok_unit(&gamma)) {
            return Err(Error::ConstraintViolation("alpha, beta and alpha + beta must lie in (0, 1)".into()));
        }
        if eta >= delta || delta >= BigRational::one() {
            return Err(Error::ConstraintViolation(format!("need 0 < eta < delta < 1 (M = {big_m}, c = {c})")));
        }
        Ok(PiConstraints { c, big_m, alpha, beta, gamma, p0, p1, pa0, pb1, delta, eta })
    }

    pub fn pa00(&self) -> BigRational {
        &self.pa0 * &self.p0
    }

    pub fn pb11(&self) -> BigRational {
        &self.pb1 * &self.p1
    }

    pub fn middle(&self) -> Range<usize> {
        2..self.c - 1
    }

    pub fn slack(&self) -> usize {
        self.c - 1
    }

    /// First violated condition of `Pi`, if any.
    pub fn violation(&self, p: &PairDistribution) -> Option<String> {
        self.violation_with(p, false)
    }

    pub fn contains(&self, p: &PairDistribution) -> bool {
        self.violation(p).is_none()
    }

    /// All box inequalities hold strictly.
    pub fn is_interior(&self, p: &PairDistribution) -> bool {
        self.violation_with(p, true).is_none()
    }

    fn violation_with(&self, p: &PairDistribution, strict: bool) -> Option<String> {
        if p.alphabet_size() != self.c {
            return Some(format!("alphabet size {} != c = {}", p.alphabet_size(), self.c));
        }
        if let Some(v) = p.basic_violation() {
            return Some(v);
        }
        let (pa00, pb11) = (self.pa00(), self.pb11());
        for i in 0..p.sizes.len() {
            let px = p.row_mass(i);
            for (xk, x) in self.kinds_in(p.class_range(i)) {
                for j in 0..p.sizes.len() {
                    let v = &p.joint[i][j];
                    for (ak, a) in self.kinds_in(p.class_range(j)) {
                        let bad = match (xk, ak) {
                            (Kind::Zero, Kind::Zero) => v != &pa00,
                            (_, Kind::Zero) => v != &(&self.alpha * &px),
                            (Kind::One, Kind::One) => v != &pb11,
                            (_, Kind::One) => v != &(&self.beta * &px),
                            (_, Kind::Middle) => {
                                let (lo, hi) = (&self.eta * &px, &self.delta * &px);
                                if strict {
                                    v <= &lo || v >= &hi
                                } else {
                                    v < &lo || v > &hi
                                }
                            }
                            (_, Kind::Slack) => false,
                        };
                        if bad {
                            return Some(match ak {
                                Kind::Middle => format!("conditional of {a} after {x} outside [eta, delta]"),
                                _ => format!("P_({x},{a}) breaks the designated-symbol constraint"),
                            });
                        }
                    }
                }
            }
        }
        None
    }

    /// The distinct symbol kinds in a contiguous range, each with one representative.
    fn kinds_in(&self, r: Range<usize>) -> Vec<(Kind, Symbol)> {
        let mut out = Vec::new();
        if r.start == 0 {
            out.push((Kind::Zero, 0));
        }
        if r.start <= 1 && 1 < r.end {
            out.push((Kind::One, 1));
        }
        let lo = r.start.max(2);
        if lo < r.end.min(self.c - 1) {
            out.push((Kind::Middle, lo));
        }
        if r.end == self.c && r.start < self.c {
            out.push((Kind::Slack, self.c - 1));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Zero,
    One,
    Middle,
    Slack,
}

fn alpha_from(marginal: &BigRational, self_prob: &BigRational) -> Result<BigRational> {
    if !marginal.is_positive() || marginal >= &BigRational::one() {
        return Err(Error::DegenerateMarginal(format_rational(marginal)));
    }
    Ok(marginal * (BigRational::one() - self_prob) / (BigRational::one() - marginal))
}

/// A distribution on `Sigma_C^2`.
///
/// Symbols are grouped into contiguous classes whose rows and columns are
/// identical; `joint[i][j]` is the probability of each single pair `xa`
/// with `x` in class `i` and `a` in class `j`. A dense matrix is the case
/// where every class has size one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairDistribution {
    sizes: Vec<usize>,
    starts: Vec<usize>,
    joint: Vec<Vec<BigRational>>,
}

impl PairDistribution {
    pub fn from_blocks(sizes: Vec<usize>, joint: Vec<Vec<BigRational>>) -> Result<Self> {
        let k = sizes.len();
        if sizes.iter().any(|&s| s == 0) || joint.len() != k || joint.iter().any(|r| r.len() != k) {
            return Err(Error::ConstraintViolation("malformed block pair distribution".into()));
        }
        let mut starts = Vec::with_capacity(k);
        let mut acc = 0;
        for &s in &sizes {
            starts.push(acc);
            acc += s;
        }
        Ok(PairDistribution { sizes, starts, joint })
    }

    pub fn from_dense(joint: Vec<Vec<BigRational>>) -> Result<Self> {
        Self::from_blocks(vec![1; joint.len()], joint)
    }

    /// `joint[i][j] = stationary[i] * cond[i][j]`.
    pub fn from_conditionals(sizes: Vec<usize>, stationary: &[BigRational], cond: &[Vec<BigRational>]) -> Result<Self> {
        let joint = stationary.iter().zip(cond).map(|(s, row)| row.iter().map(|c| s * c).collect()).collect();
        Self::from_blocks(sizes, joint)
    }

    pub fn alphabet_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn blocks(&self) -> &[Vec<BigRational>] {
        &self.joint
    }

    fn class_range(&self, i: usize) -> Range<usize> {
        self.starts[i]..self.starts[i] + self.sizes[i]
    }

    fn class_of(&self, s: Symbol) -> usize {
        self.starts.partition_point(|&st| st <= s) - 1
    }

    pub fn entry(&self, x: Symbol, a: Symbol) -> &BigRational {
        &self.joint[self.class_of(x)][self.class_of(a)]
    }

    fn row_mass(&self, i: usize) -> BigRational {
        self.joint[i].iter().zip(&self.sizes).map(|(v, &s)| v * int(s as i64)).sum()
    }

    fn col_mass(&self, j: usize) -> BigRational {
        self.joint.iter().zip(&self.sizes).map(|(r, &s)| &r[j] * int(s as i64)).sum()
    }

    /// `P_x = sum_a P_xa`.
    pub fn marginal(&self, x: Symbol) -> BigRational {
        self.row_mass(self.class_of(x))
    }

    fn basic_violation(&self) -> Option<String> {
        if self.joint.iter().flatten().any(|v| !v.is_positive()) {
            return Some("non-positive pair probability".into());
        }
        let total: BigRational = (0..self.sizes.len()).map(|i| self.row_mass(i) * int(self.sizes[i] as i64)).sum();
        if !total.is_one() {
            return Some(format!("total mass {} != 1", format_rational(&total)));
        }
        if (0..self.sizes.len()).any(|i| self.row_mass(i) != self.col_mass(i)) {
            return Some("row and column marginals differ (not stationary)".into());
        }
        None
    }

    /// Positive, sums to one, and has equal row and column marginals.
    pub fn is_stationary_pair(&self) -> bool {
        self.basic_violation().is_none()
    }

    /// `sum_i w_i P_i` for distributions on the same class layout.
    pub fn combine(parts: &[(BigRational, &PairDistribution)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::ConstraintViolation("empty combination".into()))?.1;
        if parts.iter().any(|(_, p)| p.sizes != first.sizes) {
            return Err(Error::ConstraintViolation("combining distributions with different layouts".into()));
        }
        let k = first.sizes.len();
        let joint = (0..k)
            .map(|i| (0..k).map(|j| parts.iter().map(|(w, p)| w * &p.joint[i][j]).sum()).collect())
            .collect();
        Ok(PairDistribution { sizes: first.sizes.clone(), starts: first.starts.clone(), joint })
    }

    fn entropy_term_list(&self) -> Vec<(BigRational, BigRational)> {
        let mut terms = Vec::new();
        for i in 0..self.sizes.len() {
            let px = self.row_mass(i);
            for j in 0..self.sizes.len() {
                let v = &self.joint[i][j];
                let mult = int((self.sizes[i] * self.sizes[j]) as i64);
                terms.push((v * mult, v / &px));
            }
        }
        terms
    }

    /// `h(P) = sum P_xa log2(P_x / P_xa)` in bits, relative error `2^-n`.
    pub fn entropy(&self, n: u32) -> ApproxProb {
        entropy_terms(&self.entropy_term_list(), n)
    }

    pub fn entropy_f64(&self) -> f64 {
        self.entropy_term_list().iter().map(|(c, p)| -to_f64(c) * log2_f64(p)).sum()
    }

    /// `<grad h(P), other - P>`.
    pub fn directional_derivative(&self, other: &PairDistribution) -> f64 {
        let mut d = 0.0;
        for i in 0..self.sizes.len() {
            let px = self.row_mass(i);
            for j in 0..self.sizes.len() {
                let mult = (self.sizes[i] * self.sizes[j]) as f64;
                let diff = to_f64(&(&other.joint[i][j] - &self.joint[i][j]));
                d += mult * diff * log2_f64(&(&px / &self.joint[i][j]));
            }
        }
        d
    }

    pub fn dense(&self) -> Vec<Vec<BigRational>> {
        let c = self.alphabet_size();
        (0..c).map(|x| (0..c).map(|a| self.entry(x, a).clone()).collect()).collect()
    }

    /// The memory-1 chain with conditionals `P_xa / P_x`. Contexts in the
    /// same class share one row.
    pub fn to_process(&self, labels: Vec<String>) -> Result<MarkovProcess> {
        let c = self.alphabet_size();
        if labels.len() != c {
            return Err(Error::AlphabetMismatch(format!("{} labels for {c} symbols", labels.len())));
        }
        let mut rows: Vec<Row> = Vec::with_capacity(c);
        let mut stationary = Vec::with_capacity(c);
        for i in 0..self.sizes.len() {
            let px = self.row_mass(i);
            let row: Row = (0..c).map(|a| &self.joint[i][self.class_of(a)] / &px).collect::<Vec<_>>().into();
            for _ in 0..self.sizes[i] {
                rows.push(Arc::clone(&row));
                stationary.push(px.clone());
            }
        }
        MarkovProcess::with_shared_rows(labels, 1, rows, stationary)
    }
}

/// `(grad h)_xa = log2(P_x / P_xa)` as a dense matrix.
pub fn entropy_gradient(p: &PairDistribution) -> Vec<Vec<f64>> {
    let c = p.alphabet_size();
    (0..c)
        .map(|x| {
            let px = p.marginal(x);
            (0..c).map(|a| log2_f64(&(&px / p.entry(x, a)))).collect()
        })
        .collect()
}

/// Entropy of a dense matrix of non-negative reals, treating row sums as `P_x`.
pub fn entropy_f64_dense(p: &[Vec<f64>]) -> f64 {
    p.iter()
        .map(|row| {
            let px: f64 = row.iter().sum();
            row.iter().filter(|&&v| v > 0.0).map(|&v| v * (px / v).log2()).sum::<f64>()
        })
        .sum()
}

/// `(argmin_a P_A(a|a), argmin_b P_B(b|b))`, first in alphabet order on ties.
pub fn designate_symbols(a: &MarkovProcess, b: &MarkovProcess) -> Result<(Symbol, Symbol)> {
    Ok((designate(a)?, designate(b)?))
}

fn designate(p: &MarkovProcess) -> Result<Symbol> {
    if p.memory() != 1 {
        return Err(Error::Unsupported(format!("symbol designation needs memory 1, got {}", p.memory())));
    }
    let mut best = 0;
    for s in 1..p.alphabet_size() {
        if p.p(s, s) < p.p(best, best) {
            best = s;
        }
    }
    Ok(best)
}

/// `(alpha, beta, gamma)` for designated symbols `s0` of `A` and `s1` of `B`.
pub fn compute_alpha_beta(
    a: &MarkovProcess,
    b: &MarkovProcess,
    s0: Symbol,
    s1: Symbol,
) -> Result<(BigRational, BigRational, BigRational)> {
    let alpha = alpha_from(&a.marginal(s0), a.p(s0, s0))?;
    let beta = alpha_from(&b.marginal(s1), b.p(s1, s1))?;
    let gamma = &alpha + &beta;
    Ok((alpha, beta, gamma))
}

/// Class layout `[0], [1], middle, [slack]` of every structured distribution.
fn layout(k: &PiConstraints) -> Vec<usize> {
    vec![1, 1, k.c - 3, 1]
}

/// Shared shape of `Q` and `R`: every middle conditional equals `v`.
fn build_boxed(k: &PiConstraints, v: &BigRational, name: &str) -> Result<PairDistribution> {
    let c3 = int((k.c - 3) as i64);
    let mid_mass = v * &c3;
    let one = BigRational::one();
    let slack = |z: BigRational| -> Result<BigRational> {
        if z.is_positive() {
            Ok(z)
        } else {
            Err(Error::ConstraintViolation(format!("{name}: residual conditional for the slack symbol is {}", format_rational(&z))))
        }
    };
    let row0 = vec![k.p0.clone(), k.beta.clone(), v.clone(), slack(&one - &k.p0 - &k.beta - &mid_mass)?];
    let row1 = vec![k.alpha.clone(), k.p1.clone(), v.clone(), slack(&one - &k.alpha - &k.p1 - &mid_mass)?];
    let rest = vec![k.alpha.clone(), k.beta.clone(), v.clone(), slack(&one - &k.gamma - &mid_mass)?];
    let stat = vec![k.pa0.clone(), k.pb1.clone(), v.clone(), slack(&one - &k.pa0 - &k.pb1 - &mid_mass)?];
    let p = PairDistribution::from_conditionals(layout(k), &stat, &[row0, row1, rest.clone(), rest])?;
    if let Some(why) = p.basic_violation() {
        return Err(Error::ConstraintViolation(format!("{name}: {why}")));
    }
    Ok(p)
}

/// The low-entropy corner: middle conditionals at `eta`.
pub fn build_q(k: &PiConstraints) -> Result<PairDistribution> {
    build_boxed(k, &k.eta, "Q")
}

/// The high-entropy corner: middle conditionals at `delta`.
pub fn build_r(k: &PiConstraints) -> Result<PairDistribution> {
    build_boxed(k, &k.delta, "R")
}

/// The spreading direction: residual mass split evenly over the `c - 2`
/// symbols other than 0 and 1. Not in `Pi` in general.
pub fn build_u(k: &PiConstraints) -> Result<PairDistribution> {
    let one = BigRational::one();
    let c2 = int((k.c - 2) as i64);
    let u0 = (&one - &k.p0 - &k.beta) / &c2;
    let u1 = (&one - &k.alpha - &k.p1) / &c2;
    let ur = (&one - &k.gamma) / &c2;
    let s = (&one - &k.pa0 - &k.pb1) / &c2;
    let row0 = vec![k.p0.clone(), k.beta.clone(), u0.clone(), u0];
    let row1 = vec![k.alpha.clone(), k.p1.clone(), u1.clone(), u1];
    let rest = vec![k.alpha.clone(), k.beta.clone(), ur.clone(), ur];
    let stat = vec![k.pa0.clone(), k.pb1.clone(), s.clone(), s];
    let p = PairDistribution::from_conditionals(layout(k), &stat, &[row0, row1, rest.clone(), rest])?;
    if let Some(why) = p.basic_violation() {
        return Err(Error::ConstraintViolation(format!("U: {why}")));
    }
    Ok(p)
}

/// Search limits for [`choose_parameters`].
#[derive(Clone, Debug)]
pub struct SearchCaps {
    pub max_power: usize,
    pub max_power_alphabet: usize,
    pub max_c: usize,
    pub max_big_m: u64,
}

impl Default for SearchCaps {
    fn default() -> Self {
        SearchCaps { max_power: 8, max_power_alphabet: 4096, max_c: 1 << 24, max_big_m: 1 << 12 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Parameters {
    pub m: usize,
    pub c: usize,
    pub big_m: u64,
    pub q_entropy: f64,
    pub r_entropy: f64,
    pub target: f64,
}

/// `h(Q)` as `c -> infinity`, in bits.
fn q_entropy_limit(pa0: f64, p0: f64, pb1: f64, p1: f64) -> f64 {
    let l = |x: f64| if x > 0.0 { -x.log2() } else { 0.0 };
    let alpha = pa0 * (1.0 - p0) / (1.0 - pa0);
    let beta = pb1 * (1.0 - p1) / (1.0 - pb1);
    let gamma = alpha + beta;
    (1.0 - pa0) * alpha * l(alpha)
        + pa0 * p0 * l(p0)
        + (1.0 - pb1) * beta * l(beta)
        + pb1 * p1 * l(p1)
        + (1.0 - pa0 - pb1) * (1.0 - gamma) * l(1.0 - gamma)
        + pa0 * (1.0 - p0 - beta) * l(1.0 - p0 - beta)
        + pb1 * (1.0 - p1 - alpha) * l(1.0 - p1 - alpha)
}

fn all_symbols_below_quarter(p: &MarkovProcess) -> bool {
    let quarter = rat(1, 4);
    (0..p.alphabet_size()).all(|s| p.marginal(s) < quarter)
}

/// Power processes at exponent `m` with their designated-symbol constants.
struct Powered {
    a: MarkovProcess,
    b: MarkovProcess,
    s0: Symbol,
    s1: Symbol,
}

impl Powered {
    fn new(a: &MarkovProcess, b: &MarkovProcess, m: usize) -> Result<Self> {
        let (a, b) = (a.power_process(m)?, b.power_process(m)?);
        let (s0, s1) = designate_symbols(&a, &b)?;
        Ok(Powered { a, b, s0, s1 })
    }

    fn constraints(&self, c: usize, big_m: u64) -> Result<PiConstraints> {
        PiConstraints::new(
            c,
            big_m,
            self.a.marginal(self.s0),
            self.a.p(self.s0, self.s0).clone(),
            self.b.marginal(self.s1),
            self.b.p(self.s1, self.s1).clone(),
        )
    }
}

fn check_equal_entropy(a: &MarkovProcess, b: &MarkovProcess, n: u32) -> Result<BigRational> {
    let ha = a.entropy_rate(n + 4).value;
    let hb = b.entropy_rate(n + 4).value;
    // Slack covers the approximation error of both estimates.
    if (&ha - &hb).abs() > eps(n) * &ha * int(2) {
        return Err(Error::ConstraintViolation(format!(
            "entropies differ: {:.6} vs {:.6} bits",
            to_f64(&ha),
            to_f64(&hb)
        )));
    }
    Ok(ha)
}

/// Smallest power `m`, then the first `(M, c)` on a doubling grid with
/// `h(Q) < mH < h(R)` and a positive ascent bound.
pub fn choose_parameters(a: &MarkovProcess, b: &MarkovProcess, h: &BigRational, caps: &SearchCaps) -> Result<Parameters> {
    choose_powered(a, b, h, caps).map(|(p, _)| p)
}

fn choose_powered(a: &MarkovProcess, b: &MarkovProcess, h: &BigRational, caps: &SearchCaps) -> Result<(Parameters, Powered)> {
    let hf = to_f64(h);
    for m in 1..=caps.max_power {
        let size = a.alphabet_size().max(b.alphabet_size()).checked_pow(m as u32);
        if size.map_or(true, |s| s > caps.max_power_alphabet) {
            break;
        }
        if a.memory() > m || b.memory() > m {
            continue;
        }
        let pw = Powered::new(a, b, m)?;
        if !(all_symbols_below_quarter(&pw.a) && all_symbols_below_quarter(&pw.b)) {
            continue;
        }
        let target = hf * m as f64;
        let lim = q_entropy_limit(
            to_f64(&pw.a.marginal(pw.s0)),
            to_f64(pw.a.p(pw.s0, pw.s0)),
            to_f64(&pw.b.marginal(pw.s1)),
            to_f64(pw.b.p(pw.s1, pw.s1)),
        );
        if lim >= target {
            continue;
        }
        let c0 = 4usize.max(pw.a.alphabet_size()).max(pw.b.alphabet_size());
        let exact_target = h * int(m as i64);
        let mut big_m = 2u64;
        while big_m <= caps.max_big_m {
            let mut c = c0;
            while c <= caps.max_c {
                if (big_m as usize) < c {
                    if let Some(found) = try_grid_point(&pw, c, big_m, &exact_target, target)? {
                        return Ok((Parameters { m, ..found }, pw));
                    }
                }
                c *= 2;
            }
            big_m *= 2;
        }
        return Err(Error::SearchExhausted(format!("no (c, M) below caps for m = {m}")));
    }
    Err(Error::SearchExhausted("no power m makes every symbol probability < 1/4 with h(Q) below mH".into()))
}

fn try_grid_point(pw: &Powered, c: usize, big_m: u64, exact_target: &BigRational, target: f64) -> Result<Option<Parameters>> {
    let k = match pw.constraints(c, big_m) {
        Ok(k) => k,
        Err(Error::ConstraintViolation(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (q, r) = match (build_q(&k), build_r(&k)) {
        (Ok(q), Ok(r)) => (q, r),
        _ => return Ok(None),
    };
    let (hq, hr) = (q.entropy_f64(), r.entropy_f64());
    if !(hq < target && target < hr) {
        return Ok(None);
    }
    // Lower bound on <grad h(P), U - P> over Pi must stay positive.
    let spread = (c - 3) as f64 / (c - 2) as f64 * (1.0 - to_f64(&k.pa0) - to_f64(&k.pb1));
    if spread * ((big_m as f64) * (c - 3) as f64).log2() <= hr {
        return Ok(None);
    }
    // Exact confirmation of the strict ordering.
    let bits = 40;
    let (eq, er) = (q.entropy(bits), r.entropy(bits));
    let slack = eps(bits - 1);
    let q_hi = &eq.value * (BigRational::one() + &slack);
    let r_lo = &er.value * (BigRational::one() - &slack);
    if !(&q_hi < exact_target && exact_target < &r_lo) {
        return Ok(None);
    }
    Ok(Some(Parameters { m: 0, c, big_m, q_entropy: hq, r_entropy: hr, target }))
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub precision: u32,
    pub iteration: usize,
    pub step: &'static str,
    pub eps: String,
    pub accepted: bool,
    pub entropy: f64,
    pub derivative: f64,
}

#[derive(Clone, Debug)]
pub struct MatchOptions {
    pub max_iterations: usize,
    pub caps: SearchCaps,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { max_iterations: 20_000, caps: SearchCaps::default() }
    }
}

/// The synthesized chain together with everything needed to audit it.
#[derive(Clone, Debug)]
pub struct Intermediate {
    pub process: MarkovProcess,
    pub pair: PairDistribution,
    pub constraints: PiConstraints,
    pub params: Parameters,
    /// `A^m` and `B^m`.
    pub a_power: MarkovProcess,
    pub b_power: MarkovProcess,
    pub symbol0: Symbol,
    pub symbol1: Symbol,
    pub target: BigRational,
    pub entropy: ApproxProb,
    pub trace: Vec<TraceStep>,
}

fn exact_h(p: &PairDistribution, n: u32) -> BigRational {
    p.entropy(n + 8).value
}

/// Builds `C` with `|h(C) - mH| <= 2^-n`.
pub fn entropy_match(a: &MarkovProcess, b: &MarkovProcess, n: u32, opts: &MatchOptions) -> Result<Intermediate> {
    if n == 0 {
        return Err(Error::ConstraintViolation("precision must be at least 1".into()));
    }
    let h = check_equal_entropy(a, b, n)?;
    let (params, pw) = choose_powered(a, b, &h, &opts.caps)?;
    let m = params.m;
    let target = pw.a.entropy_rate(n + 8).value;
    let k = pw.constraints(params.c, params.big_m)?;
    let q = build_q(&k)?;
    let r = build_r(&k)?;
    let u = build_u(&k)?;
    let mut trace = Vec::new();

    // Seed: bisect along the segment Q -> R to within eps_1.
    let (mut lo, mut hi) = (BigRational::zero(), BigRational::one());
    let mut p = q.clone();
    for it in 0..64 {
        let t = (&lo + &hi) / int(2);
        p = PairDistribution::combine(&[(BigRational::one() - &t, &q), (t.clone(), &r)])?;
        let hp = exact_h(&p, n);
        trace.push(TraceStep {
            precision: 1,
            iteration: it,
            step: "seed",
            eps: format_rational(&t),
            accepted: true,
            entropy: to_f64(&hp),
            derivative: 0.0,
        });
        let err = &hp - &target;
        if err.abs() <= eps(1) {
            break;
        }
        if err.is_negative() {
            lo = t;
        } else {
            hi = t;
        }
    }
    if let Some(why) = k.violation(&p) {
        return Err(Error::ConstraintViolation(format!("seed left Pi: {why}")));
    }

    let mut iterations = 0usize;
    for prec in 2..=n {
        let tol = eps(prec);
        let mut step = eps(1);
        let mut hp = exact_h(&p, n);
        loop {
            let err = &hp - &target;
            if err.abs() <= tol {
                break;
            }
            iterations += 1;
            if iterations > opts.max_iterations || step < eps(400) {
                return Err(Error::NoConvergence(iterations));
            }
            let up = err.is_negative();
            let toward_u = if up {
                PairDistribution::combine(&[(BigRational::one() - &step, &p), (step.clone(), &u)])?
            } else {
                PairDistribution::combine(&[(BigRational::one() + &step, &p), (-step.clone(), &u)])?
            };
            // Near the delta ceiling the U-steps leave Pi for every usable
            // step size; the corners R and Q keep the iterate in Pi.
            let (cand, kind, dir) = if k.violation(&toward_u).is_none() {
                (toward_u, if up { "toward-u" } else { "away-from-u" }, &u)
            } else {
                let corner = if up { &r } else { &q };
                let cand = PairDistribution::combine(&[(BigRational::one() - &step, &p), (step.clone(), corner)])?;
                (cand, if up { "toward-r" } else { "toward-q" }, corner)
            };
            let mut record = |accepted: bool, entropy: f64, derivative: f64, step: &BigRational| {
                trace.push(TraceStep {
                    precision: prec,
                    iteration: iterations,
                    step: kind,
                    eps: format_rational(step),
                    accepted,
                    entropy,
                    derivative,
                })
            };
            if k.violation(&cand).is_some() {
                record(false, to_f64(&hp), 0.0, &step);
                step /= int(2);
                continue;
            }
            let hc = exact_h(&cand, n);
            let overshoot = if up { &hc - &target > tol } else { &target - &hc > tol };
            let stalled = if up { hc <= hp } else { hc >= hp };
            if overshoot || stalled {
                record(false, to_f64(&hc), 0.0, &step);
                step /= int(2);
                continue;
            }
            let d = p.directional_derivative(dir);
            let expected_sign = kind == "toward-u" || kind == "away-from-u" || up;
            if (d > 0.0) != expected_sign {
                return Err(Error::ConstraintViolation(format!("directional derivative {d} has the wrong sign on a {kind} step")));
            }
            record(true, to_f64(&hc), d, &step);
            p = cand;
            hp = hc;
        }
    }

    let process = p.to_process((0..params.c).map(|s| s.to_string()).collect())?;
    let entropy = ApproxProb::new(exact_h(&p, n), n);
    log::info!("intermediate chain: m = {m}, c = {}, M = {}, h = {:.6}", params.c, params.big_m, entropy.to_f64());
    Ok(Intermediate {
        process,
        pair: p,
        constraints: k,
        params,
        a_power: pw.a,
        b_power: pw.b,
        symbol0: pw.s0,
        symbol1: pw.s1,
        target,
        entropy,
        trace,
    })
}
