//! Exact max-flow (Dinic) over rational capacities.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: Option<BigRational>,
    rev: usize,
}

/// A flow network; `None` capacity means unbounded.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork { adj: vec![Vec::new(); nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: Option<BigRational>) {
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Arc { to, cap, rev: rf });
        self.adj[to].push(Arc { to: from, cap: Some(BigRational::zero()), rev: rt });
    }

    fn residual_positive(a: &Arc) -> bool {
        a.cap.as_ref().is_none_or(|c| c.is_positive())
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for a in &self.adj[u] {
                if level[a.to].is_none() && Self::residual_positive(a) {
                    level[a.to] = Some(level[u].unwrap() + 1);
                    q.push_back(a.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, limit: Option<BigRational>, level: &[Option<usize>], it: &mut [usize]) -> BigRational {
        if u == t {
            return limit.expect("source-sink path must be bounded");
        }
        while it[u] < self.adj[u].len() {
            let i = it[u];
            let (to, cap) = {
                let a = &self.adj[u][i];
                (a.to, a.cap.clone())
            };
            let ok = cap.as_ref().is_none_or(|c| c.is_positive()) && level[to].is_some() && level[to] == level[u].map(|l| l + 1);
            if ok {
                let lim = match (&limit, &cap) {
                    (None, c) => c.clone(),
                    (l, None) => l.clone(),
                    (Some(l), Some(c)) => Some(if l < c { l.clone() } else { c.clone() }),
                };
                let f = self.augment(to, t, lim, level, it);
                if f.is_positive() {
                    if let Some(c) = self.adj[u][i].cap.as_mut() {
                        *c -= &f;
                    }
                    let rev = self.adj[u][i].rev;
                    if let Some(c) = self.adj[to][rev].cap.as_mut() {
                        *c += &f;
                    }
                    return f;
                }
            }
            it[u] += 1;
        }
        BigRational::zero()
    }

    /// Value of a maximum `s`-`t` flow; every `s`-`t` path must cross a
    /// bounded arc.
    pub fn max_flow(&mut self, s: usize, t: usize) -> BigRational {
        let mut total = BigRational::zero();
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                return total;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, None, &level, &mut it);
                if f.is_zero() {
                    break;
                }
                total += f;
            }
        }
    }
}
