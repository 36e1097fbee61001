#![allow(dead_code)]

use finiso::exact::rat;
use finiso::markov::MarkovProcess;
use finiso::society::Society;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random masses on `n` vertices summing to 1.
pub fn masses<R: Rng>(rng: &mut R, n: usize) -> Vec<BigRational> {
    let w: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| rat(x, total)).collect()
}

/// Random society candidate with up to `max` vertices per side and the
/// given edge density, vertex order shuffled.
pub fn random_society<R: Rng>(rng: &mut R, max: usize, density: f64) -> Society {
    let nl = rng.gen_range(1..=max);
    let nr = rng.gen_range(1..=max);
    let left: Vec<(String, BigRational)> = masses(rng, nl).into_iter().enumerate().map(|(i, m)| (format!("l{i}"), m)).collect();
    let right: Vec<(String, BigRational)> = masses(rng, nr).into_iter().enumerate().map(|(i, m)| (format!("r{i}"), m)).collect();
    let mut edges = Vec::new();
    for i in 0..nl {
        for j in 0..nr {
            if rng.gen_bool(density) {
                edges.push((format!("l{i}"), format!("r{j}")));
            }
        }
    }
    let (mut left, mut right) = (left, right);
    left.shuffle(rng);
    right.shuffle(rng);
    Society::new(left, right, edges).unwrap()
}

/// Same society with the vertex lists given in a different order.
pub fn reordered<R: Rng>(s: &Society, rng: &mut R) -> Society {
    let mut left = s.left().to_vec();
    let mut right = s.right().to_vec();
    left.shuffle(rng);
    right.shuffle(rng);
    let edges: Vec<(String, String)> = s.edges().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    Society::new(left, right, edges).unwrap()
}

/// Three-symbol test chains with the designated zero at index 0.
pub fn test_chains() -> Vec<(&'static str, MarkovProcess)> {
    vec![
        ("bernoulli", MarkovProcess::bernoulli(&["0", "a", "b"], &[rat(1, 4), rat(1, 2), rat(1, 4)]).unwrap()),
        (
            "markov",
            MarkovProcess::from_matrix(
                &["0", "a", "b"],
                vec![vec![rat(1, 5), rat(2, 5), rat(2, 5)], vec![rat(1, 4), rat(1, 4), rat(1, 2)], vec![rat(1, 3), rat(1, 3), rat(1, 3)]],
            )
            .unwrap(),
        ),
    ]
}

pub fn meshalkin() -> (MarkovProcess, MarkovProcess) {
    let q = rat(1, 4);
    let a = MarkovProcess::bernoulli(&["a", "b", "c", "d"], &[q.clone(), q.clone(), q.clone(), q]).unwrap();
    let e = rat(1, 8);
    let b = MarkovProcess::bernoulli(&["v", "w", "x", "y", "z"], &[rat(1, 2), e.clone(), e.clone(), e.clone(), e]).unwrap();
    (a, b)
}
