//! Desk-scale acceptance run: prints one PASS/FAIL line per criterion.
//! Honest failures are reported, not turned into test failures; the
//! harness itself only panics on internal errors.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use finiso::assignment::{IsoConfig, Isomorphism};
use finiso::exact::{eps, format_rational, int, rat, to_f64};
use finiso::filler::{approx_prob_product, AepBounds, BlockWord, FillerContext, FillerMode};
use finiso::intermediate::{entropy_f64_dense, entropy_gradient, entropy_match, MatchOptions, PairDistribution};
use finiso::markov::{MarkovProcess, Provenance, SymbolSequence};
use finiso::skeleton::*;
use finiso::society::*;
use finiso::verify::{verify, VerifyOptions};
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets.
const ENTROPY_BUDGET: Duration = Duration::from_secs(1);
const GRADIENT_STEP: f64 = 1e-7;
const GRADIENT_REL_TOL: f64 = 1e-6;
const GRADIENT_CASES: usize = 100;
const GRADIENT_BUDGET: Duration = Duration::from_secs(5);
const MATCH_PRECISION: u32 = 10;
const MATCH_BUDGET: Duration = Duration::from_secs(60);
const SKELETON_CASES: usize = 1000;
const WINDOW_FUZZ: usize = 10_000;
const SKELETON_BUDGET: Duration = Duration::from_secs(30);
const DIAG_THRESHOLD: f64 = 1e3;
const DIAG_WINDOW: usize = 10_000;
const DIAG_SAMPLES: usize = 100;
const MARTINGALE_EXTENSIONS: usize = 100_000;
const MARTINGALE_SIGMAS: f64 = 3.0;
const DIAG_BUDGET: Duration = Duration::from_secs(60);
const FILLER_MAX_LEN: usize = 8;
const FILLER_BUDGET: Duration = Duration::from_secs(600);
const PROBMULT_CASES: usize = 1000;
const PROBMULT_BUDGET: Duration = Duration::from_secs(10);
const SOCIETY_CASES: usize = 1000;
const SOCIETY_MAX: usize = 10;
const SOCIETY_PRECISION: u32 = 4;
const SOCIETY_BUDGET: Duration = Duration::from_secs(300);
const ISO_RANK_CAP: usize = 4;
const ISO_PRECISION: u32 = 6;
const ISO_TV: f64 = 0.02;
const ISO_UNDEFINED: f64 = 0.05;
const ISO_BUDGET: Duration = Duration::from_secs(1800);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(f: impl FnOnce() -> Outcome, budget: Duration) -> Outcome {
    let t = Instant::now();
    let o = f();
    let el = t.elapsed();
    let within = el <= budget;
    outcome(o.pass && within, format!("{}; {:.2}s of {}s budget", o.detail, el.as_secs_f64(), budget.as_secs()))
}

fn criterion_1() -> Outcome {
    let (a, b) = common::meshalkin();
    let two = int(2);
    let ha = a.entropy_form().exact_value();
    let hb = b.entropy_form().exact_value();
    let ra = a.entropy_rate(40).value;
    let rb = b.entropy_rate(40).value;
    let pass = ha.as_ref() == Some(&two) && hb.as_ref() == Some(&two) && ra == two && rb == two;
    let show = |v: &Option<BigRational>| v.as_ref().map_or("not rational".to_string(), format_rational);
    outcome(pass, format!("h(A) = {}, h(B) = {}, rates {ra} / {rb}", show(&ha), show(&hb)))
}

fn random_interior(rng: &mut ChaCha8Rng, k: usize) -> Vec<Vec<BigRational>> {
    let w: Vec<Vec<i64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(1..=1000)).collect()).collect();
    let total: i64 = w.iter().flatten().sum();
    w.into_iter().map(|r| r.into_iter().map(|x| rat(x, total)).collect()).collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..GRADIENT_CASES {
        let k = rng.gen_range(2..=6);
        let joint = random_interior(&mut rng, k);
        let p = PairDistribution::from_dense(joint.clone()).unwrap();
        let g = entropy_gradient(&p);
        let base: Vec<Vec<f64>> = joint.iter().map(|r| r.iter().map(to_f64).collect()).collect();
        for x in 0..k {
            for a in 0..k {
                let mut up = base.clone();
                let mut down = base.clone();
                up[x][a] += GRADIENT_STEP;
                down[x][a] -= GRADIENT_STEP;
                let fd = (entropy_f64_dense(&up) - entropy_f64_dense(&down)) / (2.0 * GRADIENT_STEP);
                let rel = (fd - g[x][a]).abs() / g[x][a].abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst <= GRADIENT_REL_TOL, format!("max relative error {worst:.2e} over {GRADIENT_CASES} distributions"))
}

fn criterion_3() -> Outcome {
    let (a, b) = common::meshalkin();
    let im = match entropy_match(&a, &b, MATCH_PRECISION, &MatchOptions::default()) {
        Ok(im) => im,
        Err(e) => return outcome(false, format!("entropy_match failed: {e}")),
    };
    let c = &im.process;
    let (s0, s1) = (im.symbol0, im.symbol1);
    let (c0, c1) = (c.symbol_index("0").unwrap(), c.symbol_index("1").unwrap());
    let eq = |x: BigRational, y: BigRational| x == y;
    let m0 = eq(c.marginal(c0), im.a_power.marginal(s0));
    let m00 = eq(c.word_prob(&[c0, c0]).unwrap(), im.a_power.word_prob(&[s0, s0]).unwrap());
    let m1 = eq(c.marginal(c1), im.b_power.marginal(s1));
    let m11 = eq(c.word_prob(&[c1, c1]).unwrap(), im.b_power.word_prob(&[s1, s1]).unwrap());
    let mh = int(2 * im.params.m as i64);
    let hc = c.entropy_rate(MATCH_PRECISION + 20).value;
    let gap = (&hc - &mh).abs();
    let h_ok = gap <= eps(MATCH_PRECISION) - eps(MATCH_PRECISION + 19);
    let k = &im.constraints;
    let mut cond_ok = true;
    'rows: for row in c.transitions() {
        for a in k.middle() {
            if row[a] < k.eta || row[a] > k.delta {
                cond_ok = false;
                break 'rows;
            }
        }
    }
    let pass = m0 && m00 && m1 && m11 && h_ok && cond_ok;
    outcome(
        pass,
        format!(
            "m = {}, c = {}, marginals exact {}/{}/{}/{}, |h(C) - mH| = {:.3e}, conditionals in [eta, delta]: {cond_ok}",
            im.params.m,
            im.params.c,
            m0,
            m00,
            m1,
            m11,
            to_f64(&gap)
        ),
    )
}

fn random_skeleton(rng: &mut ChaCha8Rng, rank: usize, params: &RankParameters) -> Skeleton {
    let n = params.n[rank];
    let k = rng.gen_range(1..=6);
    let mut zeros = vec![n + rng.gen_range(0..2)];
    let mut blanks = Vec::new();
    for i in 0..k {
        blanks.push(rng.gen_range(1..=5));
        if i + 1 < k {
            zeros.push(rng.gen_range(2..n));
        }
    }
    zeros.push(n + rng.gen_range(0..2));
    Skeleton::new(zeros, blanks, rank, rng.gen_range(-50..50)).unwrap()
}

fn criterion_4() -> Outcome {
    let params = choose_n_for(&rat(1, 2), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    for i in 0..SKELETON_CASES {
        let rank = 2 + i % 2;
        let s = random_skeleton(&mut rng, rank, &params);
        let ok = decompose(&s, params.n[rank - 1])
            .and_then(|parts| {
                let valid = parts.iter().all(|p| p.rank == rank - 1);
                recompose(&parts).map(|r| valid && r == s)
            })
            .unwrap_or(false);
        failures += usize::from(!ok);
    }
    let mut window_failures = 0;
    for _ in 0..WINDOW_FUZZ {
        let len = rng.gen_range(21..200);
        let symbols: Vec<usize> = (0..len).map(|_| if rng.gen_bool(0.6) { 0 } else { rng.gen_range(1..3) }).collect();
        let origin = -(len as i64 / 2);
        let full = SymbolSequence::new(symbols.clone(), origin, Provenance::UserSupplied);
        let center = rng.gen_range(origin..origin + len as i64);
        let lo = rng.gen_range(origin..=center);
        let hi = rng.gen_range(center + 1..=origin + len as i64);
        let sub = SymbolSequence::new(full.slice(lo, hi).unwrap().to_vec(), lo, Provenance::UserSupplied);
        let rank = rng.gen_range(1..=3);
        let n_r = params.n[rank];
        let small = extract_skeleton(&sub, rank, center, n_r, 0);
        if small != Extraction::NotFound && small != extract_skeleton(&full, rank, center, n_r, 0) {
            window_failures += 1;
        }
    }
    outcome(
        failures == 0 && window_failures == 0,
        format!("{failures} round-trip failures in {SKELETON_CASES}, {window_failures} monotonicity failures in {WINDOW_FUZZ}"),
    )
}

fn criterion_5() -> Outcome {
    let chains = common::test_chains();
    let p = &chains[1].1;
    let zero = 0;
    let params = choose_n(p, zero, 3);
    let a = p.symbol_index("a").unwrap();
    let periodic = SymbolSequence::centered(vec![a; DIAG_WINDOW + 1], Provenance::UserSupplied);
    let top = diagnostic_case_i(&periodic, &params, p, zero).log2_value;
    let periodic_ok = top > DIAG_THRESHOLD.log2();
    let mut max_random = f64::NEG_INFINITY;
    for seed in 0..DIAG_SAMPLES as u64 {
        let x = p.sample(DIAG_WINDOW + 1, seed);
        max_random = max_random.max(diagnostic_case_i(&x, &params, p, zero).log2_value);
    }
    let random_ok = max_random < DIAG_THRESHOLD.log2();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = p.symbol_index("b").unwrap();
    let words: Vec<(usize, usize, Vec<usize>)> = vec![(1, 1, vec![zero]), (1, 1, vec![a]), (1, 2, vec![zero]), (2, 3, vec![zero, zero, zero]), (2, 1, vec![b, zero, a])];
    let mut mart_ok = true;
    let mut worst: f64 = 0.0;
    for (r, k, w) in &words {
        let check = martingale_check(p, w, MARTINGALE_EXTENSIONS, &mut rng, |word| case_ii_word(word, *r, *k, &params, p, zero));
        mart_ok &= check.within(MARTINGALE_SIGMAS);
        if check.std_error > 0.0 {
            worst = worst.max((check.mean - check.expected).abs() / check.std_error);
        }
    }
    outcome(
        periodic_ok && random_ok && mart_ok,
        format!(
            "periodic log2 capital {top:.1}, max over {DIAG_SAMPLES} samples {max_random:.2} (threshold log2 {:.2}), martingale worst {worst:.2} sigma",
            DIAG_THRESHOLD.log2()
        ),
    )
}

fn rank1_skeletons(n1: usize, max_len: usize) -> Vec<Skeleton> {
    // Compositions of the blank count with interior blocks in [2, n1).
    fn rec(left: usize, n1: usize, zeros: &mut Vec<usize>, blanks: &mut Vec<usize>, out: &mut Vec<Skeleton>) {
        for l in 1..=left {
            blanks.push(l);
            zeros.push(n1);
            out.push(Skeleton::new(zeros.clone(), blanks.clone(), 1, 0).unwrap());
            zeros.pop();
            for z in 2..n1 {
                zeros.push(z);
                rec(left - l, n1, zeros, blanks, out);
                zeros.pop();
            }
            blanks.pop();
        }
    }
    let mut out = Vec::new();
    rec(max_len, n1, &mut vec![n1], &mut Vec::new(), &mut out);
    out
}

fn criterion_6() -> Outcome {
    let chains = common::test_chains();
    let (mut checked, mut mono_violations, mut sum_failures) = (0, 0, 0);
    let (mut item1, mut item2a, mut item2b) = (0, 0, 0);
    let mut errors = Vec::new();
    let mut skeletons = 0;
    for (name, p) in &chains {
        let params = choose_n(p, 0, 5);
        let bounds = AepBounds::from_processes(&[p], p.entropy_rate(40).value);
        let ctx = FillerContext::new(p, 0, FillerMode::Consistent, &bounds, &params).unwrap();
        let list = rank1_skeletons(params.n[1], FILLER_MAX_LEN);
        skeletons += list.len();
        for s in &list {
            let parts: Vec<_> = match (1..=5).map(|n| ctx.classes(s, n)).collect::<finiso::Result<Vec<_>>>() {
                Ok(v) => v,
                Err(e) => {
                    errors.push(format!("{name} {s}: {e}"));
                    continue;
                }
            };
            for w in parts.windows(2) {
                for i in 0..w[0].fillers.len() {
                    let (small, big) = (w[0].j_of(i), w[1].j_of(i));
                    if !small.iter().all(|b| big.contains(b)) {
                        mono_violations += 1;
                    }
                }
            }
            for part in &parts {
                let sum: BigRational = part.classes.iter().map(|c| &c.probability).sum();
                sum_failures += usize::from(!sum.is_one());
            }
            for r in 1..=3u32 {
                for n in r..=r + 2 {
                    let rep = ctx.lemma_report(s, &parts[r as usize - 1], r, n);
                    checked += 1;
                    item1 += usize::from(!rep.item1_holds);
                    item2a += usize::from(!rep.item2a_holds);
                    item2b += usize::from(!rep.item2b_holds);
                }
            }
        }
    }
    let pass = errors.is_empty() && mono_violations == 0 && sum_failures == 0 && item1 == 0 && item2a == 0 && item2b == 0;
    outcome(
        pass,
        format!(
            "{skeletons} skeletons, {checked} (r, n) reports; J-monotonicity violations {mono_violations}, class sums != 1: {sum_failures}, item 1 failures {item1}, item 2(a) failures {item2a}, item 2(b) failures {item2b}, errors {}",
            errors.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let chains = common::test_chains();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = 0;
    for i in 0..PROBMULT_CASES {
        let p = &chains[i % chains.len()].1;
        let t = rng.gen_range(1..=4);
        let zero_runs: Vec<usize> = (0..=t).map(|_| rng.gen_range(1..=4)).collect();
        let blocks: Vec<Vec<usize>> = (0..t).map(|_| (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..3)).collect()).collect();
        let x = BlockWord { zero_runs, blocks };
        let n = rng.gen_range(1..=12);
        let exact = p.word_prob(&x.word(0)).unwrap();
        let ok = match approx_prob_product(&x, n, p, 0) {
            Ok(approx) => (&exact - &approx.value).abs() <= eps(n) * &approx.value,
            Err(_) => false,
        };
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("{failures} failures in {PROBMULT_CASES} decompositions"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = eps(SOCIETY_PRECISION);
    let (mut oracle_mismatch, mut robust, mut bad_minimal, mut nondeterministic, mut marriage) = (0, 0, 0, 0, 0);
    for _ in 0..SOCIETY_CASES {
        let density = rng.gen_range(0.3..1.0);
        let s = common::random_society(&mut rng, SOCIETY_MAX, density);
        if is_society(&s) != is_society_exhaustive(&s) {
            oracle_mismatch += 1;
        }
        let r = is_eps_robust(&s, &e);
        if r != is_eps_robust_exhaustive(&s, &e) {
            oracle_mismatch += 1;
        }
        if !r {
            continue;
        }
        robust += 1;
        let m = minimal_robust_subsociety(&s, SOCIETY_PRECISION).unwrap();
        if !is_eps_robust(&m, &e) || !is_edge_minimal(&m, &e) || !m.edge_indices().is_subset(s.edge_indices()) {
            bad_minimal += 1;
        }
        let again = minimal_robust_subsociety(&common::reordered(&s, &mut rng), SOCIETY_PRECISION).unwrap();
        nondeterministic += usize::from(again != m);
        marriage += usize::from(!marriage_count_check(&m));
    }
    let pass = oracle_mismatch == 0 && bad_minimal == 0 && nondeterministic == 0 && marriage == 0;
    outcome(
        pass,
        format!(
            "{SOCIETY_CASES} instances, oracle mismatches {oracle_mismatch}; {robust} robust inputs: non-minimal/non-robust outputs {bad_minimal}, nondeterministic {nondeterministic}, marriage-count failures {marriage}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let (a, b) = common::meshalkin();
    let im = entropy_match(&a, &b, MATCH_PRECISION, &MatchOptions::default()).unwrap();
    let zero_c = im.process.symbol_index("0").unwrap();
    let config = IsoConfig::new(&im.a_power, &im.process, im.symbol0, zero_c, ISO_PRECISION, ISO_RANK_CAP);
    let iso = match Isomorphism::new(config) {
        Ok(i) => i,
        Err(e) => return outcome(false, format!("building the isomorphism failed: {e}")),
    };
    let opts = VerifyOptions::default();
    let rep = match verify(&iso, &im.a_power, &im.process, &opts) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("verification failed: {e}")),
    };
    let m = &rep.measure;
    let pass = rep.factor.violations == 0
        && rep.roundtrip.agreement == 1.0
        && rep.roundtrip.defined > 0
        && m.tv_distance < ISO_TV
        && m.all_within_band
        && m.undefined_rate < ISO_UNDEFINED;
    outcome(
        pass,
        format!(
            "factor violations {} of {} compared; roundtrip {}/{} defined agree; TV {:.4}; bands {}; undefined rate {:.4}",
            rep.factor.violations, rep.factor.compared, rep.roundtrip.agreements, rep.roundtrip.defined, m.tv_distance, m.all_within_band, m.undefined_rate
        ),
    )
}

fn write_json(path: &Path, p: &MarkovProcess) {
    std::fs::write(path, serde_json::to_string_pretty(&p.to_json()).unwrap()).unwrap();
}

fn run_twice(dir: &Path, args: &[&str]) -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_finiso");
    let outs: Vec<(std::process::Output, Option<Vec<u8>>)> = (0..2)
        .map(|_| {
            let out = Command::new(bin).args(args).current_dir(dir).output().unwrap();
            let file = args.iter().position(|a| *a == "--out").map(|i| std::fs::read(dir.join(args[i + 1])).unwrap_or_default());
            (out, file)
        })
        .collect();
    let same = outs[0].0.stdout == outs[1].0.stdout && outs[0].0.status == outs[1].0.status && outs[0].1 == outs[1].1;
    (same && outs[0].0.status.success(), args[0].to_string())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let chains = common::test_chains();
    let p = &chains[1].1;
    write_json(&d.join("p.json"), p);
    let (a, b) = common::meshalkin();
    write_json(&d.join("a.json"), &a);
    write_json(&d.join("b.json"), &b);
    let x = p.sample(401, 3);
    std::fs::write(d.join("x.txt"), p.format_sequence(&x)).unwrap();
    let mut periodic = vec!["a"; 401];
    for i in (0..401).step_by(7) {
        periodic[i] = "0";
        periodic[i + 1] = "0";
    }
    std::fs::write(d.join("y.txt"), periodic.join(" ")).unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["entropy", "--process", "p.json", "--precision", "16"],
        vec!["design-intermediate", "--a", "a.json", "--b", "b.json", "--precision", "6", "--trace"],
        vec!["skeleton", "--process", "p.json", "--seq", "y.txt", "--rank", "1", "--center", "3"],
        vec!["fillers", "--process", "p.json", "--skeleton", "2,3,2", "--mode", "consistent"],
        vec!["build-iso", "--a", "p.json", "--c", "p.json", "--rank-cap", "2", "--precision", "2", "--out", "tree.json"],
        vec!["apply", "--tree", "tree.json", "--seq", "y.txt", "--range", "-10..10"],
        vec!["verify", "--tree", "tree.json", "--trials", "500", "--factor-samples", "20", "--shifts", "3", "--roundtrip-trials", "50", "--window", "101", "--out", "report.json"],
        vec!["diagnose", "--process", "p.json", "--seq", "x.txt", "--rank", "2"],
    ];
    let mut bad = Vec::new();
    for args in &runs {
        let (ok, name) = run_twice(d, args);
        if !ok {
            bad.push(name);
        }
    }
    outcome(bad.is_empty(), format!("{} subcommands double-run; differing or failing: {bad:?}", runs.len()))
}

#[test]
fn acceptance() {
    let selected: Option<Vec<usize>> =
        std::env::var("FINISO_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: Vec<(usize, fn() -> Outcome, Duration)> = vec![
        (1, criterion_1, ENTROPY_BUDGET),
        (2, criterion_2, GRADIENT_BUDGET),
        (3, criterion_3, MATCH_BUDGET),
        (4, criterion_4, SKELETON_BUDGET),
        (5, criterion_5, DIAG_BUDGET),
        (6, criterion_6, FILLER_BUDGET),
        (7, criterion_7, PROBMULT_BUDGET),
        (8, criterion_8, SOCIETY_BUDGET),
        (9, criterion_9, ISO_BUDGET),
        (10, criterion_10, Duration::from_secs(600)),
    ];
    for (id, f, budget) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            println!("criterion {id}: SKIPPED (not selected)");
            continue;
        }
        let o = timed(f, budget);
        println!("criterion {id}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
}
