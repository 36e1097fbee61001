//! Empirical checks of a constructed map: factor property, measure
//! preservation and invertibility.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::assignment::{Direction, Isomorphism};
use crate::error::Result;
use crate::exact::to_f64;
use crate::markov::{MarkovProcess, Provenance, Sampler, Symbol, SymbolSequence};

pub const REPORT_VERSION: u32 = 1;

/// A coordinate-wise map between symbol sequences, possibly partial.
pub trait SymbolMap: Sync {
    /// `phi(x)[center]`.
    fn forward(&self, x: &SymbolSequence, center: i64) -> Result<Option<Symbol>>;
    /// `phi^{-1}(y)[center]`.
    fn inverse(&self, y: &SymbolSequence, center: i64) -> Result<Option<Symbol>>;
    /// Margin (in coordinates) of `y` needed around `center` for `inverse`.
    fn inverse_margin(&self) -> usize {
        0
    }
}

impl SymbolMap for Isomorphism {
    fn forward(&self, x: &SymbolSequence, center: i64) -> Result<Option<Symbol>> {
        Ok(self.phi_at(x, center, Direction::Forward)?.symbol())
    }

    fn inverse(&self, y: &SymbolSequence, center: i64) -> Result<Option<Symbol>> {
        Ok(self.phi_at(y, center, Direction::Inverse)?.symbol())
    }

    fn inverse_margin(&self) -> usize {
        self.config.initial_window
    }
}

/// The identity, as a control between identical processes.
pub struct IdentityMap;

impl SymbolMap for IdentityMap {
    fn forward(&self, x: &SymbolSequence, center: i64) -> Result<Option<Symbol>> {
        Ok(x.get(center))
    }

    fn inverse(&self, y: &SymbolSequence, center: i64) -> Result<Option<Symbol>> {
        Ok(y.get(center))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorSection {
    pub samples: usize,
    pub shifts: usize,
    pub compared: usize,
    pub violations: usize,
    pub undefined_pairs: usize,
}

/// Compares `phi(x)[i]` with `phi(T^i x)[0]` for `i = 1..=shifts`.
pub fn check_factor<M: SymbolMap>(map: &M, source: &MarkovProcess, samples: usize, shifts: usize, window: usize, seed: u64) -> Result<FactorSection> {
    let sampler = Sampler::new(source);
    let per: Vec<(usize, usize, usize)> = (0..samples)
        .into_par_iter()
        .map(|t| -> Result<(usize, usize, usize)> {
            let x = sampler.sample(window, seed, t as u64);
            let (mut cmp, mut bad, mut undef) = (0, 0, 0);
            for i in 1..=shifts as i64 {
                let a = map.forward(&x, i)?;
                let b = map.forward(&x.shifted(i), 0)?;
                match (a, b) {
                    (Some(a), Some(b)) => {
                        cmp += 1;
                        if a != b {
                            bad += 1;
                        }
                    }
                    _ => undef += 1,
                }
            }
            Ok((cmp, bad, undef))
        })
        .collect::<Result<_>>()?;
    let sum = per.iter().fold((0, 0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
    Ok(FactorSection { samples, shifts, compared: sum.0, violations: sum.1, undefined_pairs: sum.2 })
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderRow {
    pub word: String,
    pub empirical: f64,
    pub exact: f64,
    pub deviation: f64,
    pub band: f64,
    pub within_band: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureSection {
    pub z: usize,
    pub trials: usize,
    pub defined: usize,
    pub undefined_rate: f64,
    pub tv_distance: f64,
    /// Exact mass of target words never observed (only when the table is
    /// restricted to observed words).
    pub unlisted_mass: f64,
    pub all_within_band: bool,
    pub table: Vec<CylinderRow>,
}

const FULL_TABLE_LIMIT: usize = 4096;

/// Monte Carlo pushforward of the source measure on central length-`z`
/// words, against exact target cylinder probabilities.
pub fn check_measure_preservation<M: SymbolMap>(
    map: &M,
    source: &MarkovProcess,
    target: &MarkovProcess,
    z: usize,
    trials: usize,
    window: usize,
    seed: u64,
) -> Result<MeasureSection> {
    assert!((1..=4).contains(&z), "word length must be in 1..=4");
    let sampler = Sampler::new(source);
    let lo = -((z / 2) as i64);
    let words: Vec<Option<Vec<Symbol>>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Option<Vec<Symbol>>> {
            let x = sampler.sample(window, seed, t as u64);
            let mut w = Vec::with_capacity(z);
            for i in 0..z as i64 {
                match map.forward(&x, lo + i)? {
                    Some(s) => w.push(s),
                    None => return Ok(None),
                }
            }
            Ok(Some(w))
        })
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<Vec<Symbol>, usize> = BTreeMap::new();
    for w in words.iter().flatten() {
        *counts.entry(w.clone()).or_default() += 1;
    }
    let defined: usize = counts.values().sum();
    let undefined_rate = 1.0 - defined as f64 / trials as f64;
    let k = target.alphabet_size();
    let full = k.checked_pow(z as u32).is_some_and(|n| n <= FULL_TABLE_LIMIT);
    let listed: Vec<Vec<Symbol>> = if full {
        (0..k.pow(z as u32))
            .map(|mut i| {
                let mut w = vec![0; z];
                for j in (0..z).rev() {
                    w[j] = i % k;
                    i /= k;
                }
                w
            })
            .collect()
    } else {
        counts.keys().cloned().collect()
    };
    let mut table = Vec::with_capacity(listed.len());
    let mut tv = 0.0;
    let mut listed_mass = 0.0;
    for w in listed {
        let exact = to_f64(&target.word_prob(&w)?);
        let c = counts.get(&w).copied().unwrap_or(0);
        let empirical = c as f64 / trials as f64;
        let conditional = if defined > 0 { c as f64 / defined as f64 } else { 0.0 };
        tv += (conditional - exact).abs();
        listed_mass += exact;
        let band = 3.0 * (exact * (1.0 - exact) / trials as f64).sqrt() + undefined_rate;
        let deviation = empirical - exact;
        table.push(CylinderRow { word: target_word(target, &w), empirical, exact, deviation, band, within_band: deviation.abs() <= band });
    }
    let unlisted_mass = if full { 0.0 } else { (1.0 - listed_mass).max(0.0) };
    tv = 0.5 * (tv + unlisted_mass);
    Ok(MeasureSection {
        z,
        trials,
        defined,
        undefined_rate,
        tv_distance: tv,
        unlisted_mass,
        all_within_band: table.iter().all(|r| r.within_band) && (full || unlisted_mass <= undefined_rate + 1e-12),
        table,
    })
}

fn target_word(p: &MarkovProcess, w: &[Symbol]) -> String {
    let labels: Vec<&str> = w.iter().map(|&s| p.alphabet()[s].as_str()).collect();
    labels.join(" ")
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripSection {
    pub trials: usize,
    pub defined: usize,
    pub agreements: usize,
    pub agreement: f64,
    pub counterexamples: Vec<Value>,
}

const MAX_COUNTEREXAMPLES: usize = 10;

/// Rate at which `phi^{-1}(phi(x))` recovers the central symbol of `x`.
pub fn check_roundtrip<M: SymbolMap>(map: &M, source: &MarkovProcess, trials: usize, window: usize, seed: u64) -> Result<RoundtripSection> {
    let sampler = Sampler::new(source);
    let half = (window / 2) as i64;
    let per: Vec<Option<(bool, Value)>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Option<(bool, Value)>> {
            let x = sampler.sample(window, seed, t as u64);
            let Some(center) = x.get(0) else { return Ok(None) };
            let mut reach = (map.inverse_margin() as i64).clamp(1, half);
            loop {
                let Some(y) = defined_image(map, &x, reach)? else { return Ok(None) };
                let inv = map.inverse(&y, 0)?;
                match inv {
                    Some(s) => {
                        let ok = s == center;
                        let artifact = json!({
                            "trial": t,
                            "x": window_string(&x, reach),
                            "phi": window_string(&y, reach),
                            "recovered": s,
                            "expected": center,
                        });
                        return Ok(Some((ok, artifact)));
                    }
                    None if reach >= half || y.len() < (2 * reach + 1) as usize => return Ok(None),
                    None => reach = (reach * 2).min(half),
                }
            }
        })
        .collect::<Result<_>>()?;
    let defined = per.iter().flatten().count();
    let agreements = per.iter().flatten().filter(|(ok, _)| *ok).count();
    let counterexamples = per.into_iter().flatten().filter(|(ok, _)| !ok).map(|(_, v)| v).take(MAX_COUNTEREXAMPLES).collect();
    Ok(RoundtripSection { trials, defined, agreements, agreement: if defined > 0 { agreements as f64 / defined as f64 } else { 1.0 }, counterexamples })
}

/// The maximal run of defined `phi(x)` coordinates around 0 within
/// `-reach..=reach`, or `None` if `phi(x)[0]` is undefined.
fn defined_image<M: SymbolMap>(map: &M, x: &SymbolSequence, reach: i64) -> Result<Option<SymbolSequence>> {
    let Some(c) = map.forward(x, 0)? else { return Ok(None) };
    let mut right = vec![c];
    for i in 1..=reach {
        match map.forward(x, i)? {
            Some(s) => right.push(s),
            None => break,
        }
    }
    let mut left = Vec::new();
    for i in 1..=reach {
        match map.forward(x, -i)? {
            Some(s) => left.push(s),
            None => break,
        }
    }
    let origin = -(left.len() as i64);
    left.reverse();
    left.extend(right);
    Ok(Some(SymbolSequence::new(left, origin, Provenance::UserSupplied)))
}

fn window_string(x: &SymbolSequence, reach: i64) -> String {
    (-reach..=reach).filter_map(|i| x.get(i)).map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub version: u32,
    pub seed: u64,
    pub window: usize,
    pub factor: FactorSection,
    pub measure: MeasureSection,
    pub roundtrip: RoundtripSection,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub z: usize,
    pub trials: usize,
    pub factor_samples: usize,
    pub shifts: usize,
    pub roundtrip_trials: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { z: 2, trials: 100_000, factor_samples: 1000, shifts: 20, roundtrip_trials: 10_000, window: 10_000, seed: 7 }
    }
}

pub fn verify<M: SymbolMap>(map: &M, source: &MarkovProcess, target: &MarkovProcess, o: &VerifyOptions) -> Result<VerificationReport> {
    Ok(VerificationReport {
        version: REPORT_VERSION,
        seed: o.seed,
        window: o.window,
        factor: check_factor(map, source, o.factor_samples, o.shifts, o.window, o.seed)?,
        measure: check_measure_preservation(map, source, target, o.z, o.trials, o.window, o.seed)?,
        roundtrip: check_roundtrip(map, source, o.roundtrip_trials, o.window, o.seed)?,
    })
}
