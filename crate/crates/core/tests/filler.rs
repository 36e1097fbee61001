mod common;

use finiso::exact::eps;
use finiso::filler::*;
use finiso::markov::MarkovProcess;
use finiso::skeleton::{choose_n, Skeleton};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn chain(i: usize) -> MarkovProcess {
    common::test_chains().remove(i).1
}

fn all_words(a: usize, k: usize) -> Vec<Vec<usize>> {
    (0..a.pow(k as u32))
        .map(|mut i| {
            let mut w = vec![0; k];
            for j in (0..k).rev() {
                w[j] = i % a;
                i /= a;
            }
            w
        })
        .collect()
}

#[test]
fn aep_measure_matches_enumeration() {
    for i in 0..2 {
        let p = chain(i);
        let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(30).value);
        for k in 1..=6 {
            for layer in 1..=3 {
                let mut brute = BigRational::zero();
                for w in all_words(3, k) {
                    if aep_layer_membership(&w, layer, &p, &bounds).unwrap() {
                        brute += p.word_prob(&w).unwrap();
                    }
                }
                assert_eq!(aep_layer_measure(k, layer, &p, &bounds).unwrap(), brute);
            }
        }
    }
}

#[test]
fn free_fillers_cover_all_words_and_consistent_ones_are_a_subset() {
    let s = Skeleton::parse("2,2,2,3,2", 1).unwrap();
    let caps = FillerCaps::default();
    let free = enumerate_fillers(&s, 3, FillerMode::Free, 0, &caps).unwrap();
    assert_eq!(free.len(), 3usize.pow(5));
    let consistent = enumerate_fillers(&s, 3, FillerMode::Consistent, 0, &caps).unwrap();
    assert!(consistent.iter().all(|f| free.contains(f) && is_consistent(&s, f, 0)));
    assert_eq!(consistent.len(), free.iter().filter(|f| is_consistent(&s, f, 0)).count());
    let tight = FillerCaps { max_length: 4, ..caps };
    assert!(matches!(enumerate_fillers(&s, 3, FillerMode::Free, 0, &tight), Err(finiso::Error::CapExceeded(_))));
}

#[test]
fn partitions_sum_to_one_and_refine() {
    for i in 0..2 {
        let p = chain(i);
        let params = choose_n(&p, 0, 3);
        let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(30).value);
        for mode in [FillerMode::Free, FillerMode::Consistent] {
            let ctx = FillerContext::new(&p, 0, mode, &bounds, &params).unwrap();
            let (n1, n2) = (params.n[1], params.n[2]);
            let s = Skeleton::parse(&format!("{n2},2,{n1},2,{n2}"), 2).unwrap();
            let part = ctx.classes(&s, 2).unwrap();
            let sum: BigRational = part.classes.iter().map(|c| &c.probability).sum();
            assert!(sum.is_one());
            let members: usize = part.classes.iter().map(|c| c.members.len()).sum();
            assert_eq!(members, part.fillers.len());
            for c in &part.classes {
                for &m in &c.members {
                    let f = &part.fillers[m];
                    assert!(c.j.iter().zip(&c.fixed).all(|(&b, &sym)| f[b] == sym));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn j_grows_with_precision(blanks in proptest::collection::vec(1usize..4, 1..3), which in 0usize..2) {
        let p = chain(which);
        let params = choose_n(&p, 0, 5);
        let n1 = params.n[1];
        let mut zeros = vec![n1];
        for _ in 1..blanks.len() {
            zeros.push(n1.max(2));
        }
        zeros.push(n1);
        // Interior blocks at N_1 are not allowed for rank 1; use rank 2 then.
        let rank = if blanks.len() > 1 { 2 } else { 1 };
        if rank == 2 {
            let n2 = params.n[2];
            zeros[0] = n2;
            *zeros.last_mut().unwrap() = n2;
        }
        let s = Skeleton::new(zeros, blanks, rank, 0).unwrap();
        let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(30).value);
        let ctx = FillerContext::new(&p, 0, FillerMode::Consistent, &bounds, &params).unwrap();
        let lo = ctx.classes(&s, rank as u32).unwrap();
        let hi = ctx.classes(&s, rank as u32 + 2).unwrap();
        for i in 0..lo.fillers.len() {
            prop_assert!(lo.j_of(i).iter().all(|b| hi.j_of(i).contains(b)));
        }
    }

    #[test]
    fn product_formula_within_precision(
        runs in proptest::collection::vec(1usize..4, 2..6),
        symbols in proptest::collection::vec(1usize..3, 16),
        n in 1u32..14,
        which in 0usize..2,
    ) {
        let p = chain(which);
        let t = runs.len() - 1;
        let blocks: Vec<Vec<usize>> = (0..t).map(|i| symbols[i * 3..i * 3 + 1 + i % 3].to_vec()).collect();
        let x = BlockWord { zero_runs: runs, blocks };
        let exact = p.word_prob(&x.word(0)).unwrap();
        let approx = approx_prob_product(&x, n, &p, 0).unwrap().value;
        prop_assert!((&exact - &approx).abs() <= eps(n) * &approx);
    }
}
