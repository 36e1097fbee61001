//! Exact rational helpers: parsing, formatting, dyadic powers and
//! guaranteed-precision base-2 logarithms.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard bits carried through the fixed-point squaring loop of [`log2_approx`].
const LOG_GUARD_BITS: u64 = 48;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `2^-n` as an exact rational.
pub fn eps(n: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << n as usize)
}

/// `2^e` for a signed exponent.
pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Parses `"p/q"`, `"p"` or a short decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let digits = format!("{whole}{frac}");
        let p: BigInt = digits.parse().map_err(|_| bad())?;
        let q = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(BigRational::new(p, q));
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(p))
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter storing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Floating-point shadow of a rational, accurate even when numerator and
/// denominator overflow `f64`.
pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let l = log2_f64(&r.abs());
    let v = l.exp2();
    if r.is_negative() {
        -v
    } else {
        v
    }
}

fn top_bits(n: &BigUint) -> (f64, i64) {
    let bits = n.bits() as i64;
    let shift = (bits - 60).max(0);
    let head = (n >> shift as usize).to_f64().unwrap_or(f64::MAX);
    (head, shift)
}

/// `log2(r)` in floating point for a positive rational of any size.
pub fn log2_f64(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "log2 of a non-positive rational");
    let (n, sn) = top_bits(r.numer().magnitude());
    let (d, sd) = top_bits(r.denom().magnitude());
    n.log2() - d.log2() + (sn - sd) as f64
}

/// `floor(log2(x))` for positive rational `x`.
fn floor_log2(x: &BigRational) -> i64 {
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    let mut k = n.bits() as i64 - d.bits() as i64;
    // x >= 2^k  <=>  n >= d * 2^k
    let ge = |k: i64| -> bool {
        if k >= 0 {
            n >= &(d << k as usize)
        } else {
            (n << (-k) as usize) >= *d
        }
    };
    while !ge(k) {
        k -= 1;
    }
    while ge(k + 1) {
        k += 1;
    }
    k
}

/// Approximates `log2(x)` for `x > 0`.
///
/// Returns a rational within `2^(1-bits)` of the true value. The result is
/// exact whenever `x` is an integer power of two.
pub fn log2_approx(x: &BigRational, bits: u32) -> BigRational {
    assert!(x.is_positive(), "log2 of a non-positive rational");
    let k = floor_log2(x);
    let p = bits as u64 + LOG_GUARD_BITS;
    let n = x.numer().magnitude().clone();
    let d = x.denom().magnitude().clone();
    // y = x / 2^k in [1, 2), in fixed point with p fractional bits.
    let (num, den) = if k >= 0 {
        (n << p as usize, d << k as usize)
    } else {
        (n << (p as i64 - k) as usize, d)
    };
    let (mut y, rem) = num.div_rem(&den);
    let one = BigUint::one() << p as usize;
    let two = BigUint::one() << (p + 1) as usize;
    let mut frac = BigUint::zero();
    if !(rem.is_zero() && y == one) {
        for _ in 0..bits {
            y = (&y * &y) >> p as usize;
            frac <<= 1;
            if y >= two {
                y >>= 1;
                frac += 1u32;
            }
        }
    } else {
        frac <<= bits as usize;
    }
    let frac = BigRational::new(BigInt::from_biguint(Sign::Plus, frac), BigInt::one() << bits as usize);
    int(k) + frac
}

/// Memoizing `log2` evaluator at a fixed number of bits.
pub struct Log2Cache {
    bits: u32,
    // Keyed by (numer, denom): hashing a BigRational recurses on its continued fraction.
    cache: HashMap<(BigInt, BigInt), BigRational>,
}

impl Log2Cache {
    pub fn new(bits: u32) -> Self {
        Log2Cache { bits, cache: HashMap::new() }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn log2(&mut self, x: &BigRational) -> BigRational {
        let key = (x.numer().clone(), x.denom().clone());
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let v = log2_approx(x, self.bits);
        self.cache.insert(key, v.clone());
        v
    }
}

/// A rational value carrying the precision index `n` it was requested at.
///
/// Contract: `|value - true| <= 2^-n * true`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApproxProb {
    #[serde(with = "serde_rational")]
    pub value: BigRational,
    pub precision: u32,
}

impl ApproxProb {
    pub fn new(value: BigRational, precision: u32) -> Self {
        ApproxProb { value, precision }
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.value)
    }

    /// Checks the relative-error contract against a known true value.
    pub fn within_contract(&self, truth: &BigRational) -> bool {
        (&self.value - truth).abs() <= eps(self.precision) * truth.abs()
    }
}

/// A finite rational combination `sum_i c_i * log2(b_i)` of logarithms of
/// positive integers, compared exactly through a coprime base.
#[derive(Clone, Debug, Default)]
pub struct LogForm {
    terms: Vec<(BigRational, BigUint)>,
}

impl LogForm {
    pub fn new() -> Self {
        LogForm::default()
    }

    /// Adds `coeff * log2(base)`.
    pub fn push(&mut self, coeff: BigRational, base: BigUint) {
        if base > BigUint::one() && !coeff.is_zero() {
            self.terms.push((coeff, base));
        }
    }

    /// Adds `coeff * log2(x)` for a positive rational `x`.
    pub fn push_log_rational(&mut self, coeff: &BigRational, x: &BigRational) {
        self.push(coeff.clone(), x.numer().magnitude().clone());
        self.push(-coeff.clone(), x.denom().magnitude().clone());
    }

    pub fn scale(&self, k: &BigRational) -> LogForm {
        LogForm { terms: self.terms.iter().map(|(c, b)| (c * k, b.clone())).collect() }
    }

    pub fn sub(&self, other: &LogForm) -> LogForm {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|(c, b)| (-c.clone(), b.clone())));
        LogForm { terms }
    }

    /// Canonical coefficients over a pairwise coprime base.
    pub fn canonical(&self) -> Vec<(BigUint, BigRational)> {
        let basis = coprime_basis(self.terms.iter().map(|(_, b)| b.clone()).collect());
        let mut coeffs = vec![BigRational::zero(); basis.len()];
        for (c, b) in &self.terms {
            let mut x = b.clone();
            for (i, q) in basis.iter().enumerate() {
                let mut e = 0i64;
                while (&x % q).is_zero() {
                    x /= q;
                    e += 1;
                }
                if e > 0 {
                    coeffs[i] += c * int(e);
                }
            }
            debug_assert!(x.is_one());
        }
        basis.into_iter().zip(coeffs).filter(|(_, c)| !c.is_zero()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.canonical().is_empty()
    }

    pub fn equals(&self, other: &LogForm) -> bool {
        self.sub(other).is_zero()
    }

    /// The exact value when every surviving base is a power of two.
    pub fn exact_value(&self) -> Option<BigRational> {
        let mut total = BigRational::zero();
        for (b, c) in self.canonical() {
            if b.count_ones() != 1 {
                return None;
            }
            total += c * int(b.trailing_zeros().unwrap_or(0) as i64);
        }
        Some(total)
    }

    /// Approximation with absolute error at most `2^(1-bits) * sum |c_i|`.
    pub fn approx(&self, bits: u32) -> BigRational {
        self.canonical()
            .into_iter()
            .map(|(b, c)| c * log2_approx(&BigRational::from_integer(BigInt::from_biguint(Sign::Plus, b)), bits))
            .fold(BigRational::zero(), |a, x| a + x)
    }
}

fn coprime_basis(nums: Vec<BigUint>) -> Vec<BigUint> {
    let mut set: Vec<BigUint> = nums.into_iter().filter(|b| *b > BigUint::one()).collect();
    set.sort();
    set.dedup();
    'outer: loop {
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                let g = set[i].gcd(&set[j]);
                if !g.is_one() {
                    let a = set.swap_remove(j);
                    let b = set.swap_remove(i);
                    for v in [&a / &g, &b / &g, g] {
                        if v > BigUint::one() {
                            set.push(v);
                        }
                    }
                    set.sort();
                    set.dedup();
                    continue 'outer;
                }
            }
        }
        return set;
    }
}

/// Smallest integer `k` with `2^k >= base^n`, i.e. `ceil(n * log2(base))`.
pub fn ceil_n_log2(n: u32, base: u64) -> u32 {
    let target = num_traits::pow(BigUint::from(base), n as usize);
    let mut k = target.bits() as u32;
    while k > 0 && (BigUint::one() << (k - 1) as usize) >= target {
        k -= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(format_rational(&rat(6, 8)), "3/4");
        assert_eq!(format_rational(&int(2)), "2");
    }

    #[test]
    fn log2_exact_on_powers_of_two() {
        assert_eq!(log2_approx(&rat(1, 8), 20), int(-3));
        assert_eq!(log2_approx(&int(64), 5), int(6));
        assert_eq!(log2_approx(&int(1), 5), int(0));
    }

    #[test]
    fn log2_precision_bound() {
        for (n, d) in [(3i64, 1i64), (1, 3), (5, 7), (1000, 3), (2, 1_000_003)] {
            let x = rat(n, d);
            let truth = (n as f64 / d as f64).log2();
            for bits in [8u32, 20, 40] {
                let a = to_f64(&log2_approx(&x, bits));
                assert!((a - truth).abs() <= 2f64.powi(1 - bits as i32) + 1e-12, "{n}/{d} @ {bits}");
            }
        }
    }

    #[test]
    fn log_form_identities() {
        // log2 6 = log2 2 + log2 3
        let mut a = LogForm::new();
        a.push(int(1), BigUint::from(6u32));
        let mut b = LogForm::new();
        b.push(int(1), BigUint::from(2u32));
        b.push(int(1), BigUint::from(3u32));
        assert!(a.equals(&b));
        let mut c = LogForm::new();
        c.push(rat(1, 2), BigUint::from(16u32));
        assert_eq!(c.exact_value(), Some(int(2)));
        assert_eq!(a.exact_value(), None);
    }

    #[test]
    fn ceil_log_rule() {
        // ceil(4 * log2 6) = ceil(10.34) = 11
        assert_eq!(ceil_n_log2(4, 6), 11);
        assert_eq!(ceil_n_log2(3, 2), 3);
        assert_eq!(ceil_n_log2(1, 3), 2);
    }
}
