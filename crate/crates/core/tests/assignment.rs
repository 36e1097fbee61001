mod common;

use std::sync::Arc;

use finiso::assignment::{Direction, IsoConfig, Isomorphism, PhiOutcome};
use finiso::markov::{Provenance, SymbolSequence};
use finiso::skeleton::Skeleton;

fn iso() -> Isomorphism {
    let p = common::test_chains().remove(1).1;
    Isomorphism::new(IsoConfig::new(&p, &p, 0, 0, 2, 2)).unwrap()
}

fn window(x: &SymbolSequence, lo: i64, hi: i64) -> SymbolSequence {
    SymbolSequence::new(x.slice(lo, hi).unwrap().to_vec(), lo, Provenance::UserSupplied)
}

#[test]
fn zero_blocks_map_to_zero() {
    let m = iso();
    let x = SymbolSequence::new(vec![1, 2, 0, 0, 0, 1, 0, 0, 2], -4, Provenance::UserSupplied);
    for c in [-2, -1, 0, 2, 3] {
        for dir in [Direction::Forward, Direction::Inverse] {
            assert_eq!(m.phi_at(&x, c, dir).unwrap().outcome, PhiOutcome::Symbol(0), "coordinate {c}");
        }
    }
    assert_eq!(m.phi_at(&x, 50, Direction::Forward).unwrap().symbol(), None);
}

#[test]
fn shift_equivariance_and_widening() {
    let m = iso();
    let p = &m.a;
    let mut defined = 0;
    for seed in 0..20u64 {
        let x = p.sample(801, seed);
        for c in -20..20i64 {
            let here = m.phi_at(&x, c, Direction::Forward).unwrap().symbol();
            for k in [-7i64, 3, 11] {
                let shifted = m.phi_at(&x.shifted(k), c - k, Direction::Forward).unwrap().symbol();
                if let (Some(a), Some(b)) = (here, shifted) {
                    assert_eq!(a, b, "seed {seed} coordinate {c} shift {k}");
                }
            }
            let narrow = m.phi_at(&window(&x, c - 60, c + 61), c, Direction::Forward).unwrap().symbol();
            if let Some(s) = narrow {
                assert_eq!(here, Some(s), "widening changed the output at {c}");
                defined += 1;
            }
        }
    }
    assert!(defined > 0);
}

#[test]
fn trees_are_shared_and_balanced() {
    let m = iso();
    let n1 = m.params.n[1];
    let n2 = m.params.n[2];
    let s = Skeleton::parse(&format!("{n2},2,{n1},1,{n2}"), 2).unwrap();
    let before = m.cached_trees();
    match m.tree(&s, 2) {
        Ok(t) => {
            assert!(Arc::ptr_eq(&t, &m.tree(&s.relabeled(2, 40), 2).unwrap()));
            assert_eq!(t.society.total_left(), t.society.total_right());
            assert_eq!(t.children.len(), 2);
            for c in &t.children {
                assert!(Arc::ptr_eq(c, &m.tree(&c.skeleton, c.precision).unwrap()));
            }
            let sum_a: num_rational::BigRational = t.a_classes.classes.iter().map(|c| &c.probability).sum();
            assert_eq!(sum_a, finiso::exact::int(1));
        }
        Err(e) => assert!(matches!(e, finiso::Error::NotRobust(_) | finiso::Error::CapExceeded(_)), "{e}"),
    }
    assert!(m.cached_trees() > before);
}

#[test]
fn config_roundtrips_through_json() {
    let m = iso();
    let v = serde_json::to_value(&m.config).unwrap();
    let back = IsoConfig::from_json(&v).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&m.config).unwrap());
}
