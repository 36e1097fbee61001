//! Societies between finite measured sets: Hall-type condition,
//! epsilon-robustness, joins, duals and canonical minimal robust
//! subsocieties.

use std::collections::{BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::{One, Signed};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::{eps, format_rational, parse_rational};
use crate::flow::FlowNetwork;

/// A bipartite knowledge relation between two measured vertex sets.
/// Vertices are kept sorted by id, so edge order by index pairs is the
/// canonical lexicographic order on `(left id, right id)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Society {
    left: Vec<(String, BigRational)>,
    right: Vec<(String, BigRational)>,
    edges: BTreeSet<(usize, usize)>,
}

/// Which side of a society.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Society {
    pub fn new<I>(left: Vec<(String, BigRational)>, right: Vec<(String, BigRational)>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut left = left;
        let mut right = right;
        left.sort_by(|a, b| a.0.cmp(&b.0));
        right.sort_by(|a, b| a.0.cmp(&b.0));
        for side in [&left, &right] {
            if side.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Parse("duplicate vertex id".into()));
            }
            if let Some((id, _)) = side.iter().find(|(_, m)| !m.is_positive()) {
                return Err(Error::ConstraintViolation(format!("vertex {id} has non-positive mass")));
            }
        }
        let li: HashMap<&str, usize> = left.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
        let ri: HashMap<&str, usize> = right.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            let l = *li.get(a.as_str()).ok_or_else(|| Error::Parse(format!("unknown left vertex {a}")))?;
            let r = *ri.get(b.as_str()).ok_or_else(|| Error::Parse(format!("unknown right vertex {b}")))?;
            set.insert((l, r));
        }
        Ok(Society { left, right, edges: set })
    }

    /// Every left vertex knows every right vertex.
    pub fn complete(left: Vec<(String, BigRational)>, right: Vec<(String, BigRational)>) -> Result<Self> {
        let mut s = Society::new(left, right, std::iter::empty())?;
        s.edges = (0..s.left.len()).flat_map(|l| (0..s.right.len()).map(move |r| (l, r))).collect();
        Ok(s)
    }

    pub fn left(&self) -> &[(String, BigRational)] {
        &self.left
    }

    pub fn right(&self) -> &[(String, BigRational)] {
        &self.right
    }

    /// Edges as index pairs in canonical order.
    pub fn edge_indices(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|&(l, r)| (self.left[l].0.as_str(), self.right[r].0.as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn left_index(&self, id: &str) -> Option<usize> {
        self.left.binary_search_by(|(x, _)| x.as_str().cmp(id)).ok()
    }

    pub fn right_index(&self, id: &str) -> Option<usize> {
        self.right.binary_search_by(|(x, _)| x.as_str().cmp(id)).ok()
    }

    pub fn has_edge(&self, l: usize, r: usize) -> bool {
        self.edges.contains(&(l, r))
    }

    pub fn without_edge(&self, l: usize, r: usize) -> Society {
        let mut s = self.clone();
        s.edges.remove(&(l, r));
        s
    }

    /// Right neighbours of left vertex `l`.
    pub fn knows(&self, l: usize) -> Vec<usize> {
        self.edges.range((l, 0)..(l + 1, 0)).map(|&(_, r)| r).collect()
    }

    /// Left neighbours of right vertex `r`.
    pub fn known_by(&self, r: usize) -> Vec<usize> {
        self.edges.iter().filter(|&&(_, x)| x == r).map(|&(l, _)| l).collect()
    }

    pub fn total_left(&self) -> BigRational {
        self.left.iter().map(|(_, m)| m.clone()).sum()
    }

    pub fn total_right(&self) -> BigRational {
        self.right.iter().map(|(_, m)| m.clone()).sum()
    }

    pub fn dual(&self) -> Society {
        Society {
            left: self.right.clone(),
            right: self.left.clone(),
            edges: self.edges.iter().map(|&(l, r)| (r, l)).collect(),
        }
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut fwd = vec![Vec::new(); self.left.len()];
        let mut back = vec![Vec::new(); self.right.len()];
        for &(l, r) in &self.edges {
            fwd[l].push(r);
            back[r].push(l);
        }
        (fwd, back)
    }

    /// Connected components of the knowledge graph as (left, right) parts.
    pub fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let (fwd, back) = self.adjacency();
        let mut seen_l = vec![false; self.left.len()];
        let mut seen_r = vec![false; self.right.len()];
        let mut out = Vec::new();
        for start in 0..self.left.len() + self.right.len() {
            let (side, v) = if start < self.left.len() { (Side::Left, start) } else { (Side::Right, start - self.left.len()) };
            let seen = match side {
                Side::Left => seen_l[v],
                Side::Right => seen_r[v],
            };
            if seen {
                continue;
            }
            let (mut ls, mut rs) = (Vec::new(), Vec::new());
            let mut stack = vec![(side, v)];
            while let Some((sd, x)) = stack.pop() {
                match sd {
                    Side::Left if !seen_l[x] => {
                        seen_l[x] = true;
                        ls.push(x);
                        stack.extend(fwd[x].iter().map(|&r| (Side::Right, r)));
                    }
                    Side::Right if !seen_r[x] => {
                        seen_r[x] = true;
                        rs.push(x);
                        stack.extend(back[x].iter().map(|&l| (Side::Left, l)));
                    }
                    _ => {}
                }
            }
            ls.sort_unstable();
            rs.sort_unstable();
            out.push((ls, rs));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let side = |v: &[(String, BigRational)]| -> Value { v.iter().map(|(id, m)| json!([id, format_rational(m)])).collect() };
        json!({
            "left": side(&self.left),
            "right": side(&self.right),
            "edges": self.edges().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let side = |key: &str| -> Result<Vec<(String, BigRational)>> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse(format!("missing {key}")))?
                .iter()
                .map(|e| {
                    let id = e.get(0).and_then(Value::as_str).ok_or_else(|| Error::Parse("vertex id".into()))?;
                    let m = e.get(1).and_then(Value::as_str).ok_or_else(|| Error::Parse("vertex mass".into()))?;
                    Ok((id.to_string(), parse_rational(m)?))
                })
                .collect()
        };
        let edges = v
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing edges".into()))?
            .iter()
            .map(|e| {
                let a = e.get(0).and_then(Value::as_str).ok_or_else(|| Error::Parse("edge".into()))?;
                let b = e.get(1).and_then(Value::as_str).ok_or_else(|| Error::Parse("edge".into()))?;
                Ok((a.to_string(), b.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Society::new(side("left")?, side("right")?, edges)
    }
}

/// `kappa * mu(xs) <= mu(N(xs))` for every subset of `xs`, by max-flow.
fn hall_scaled(xs: &[usize], masses_x: &[(String, BigRational)], masses_y: &[(String, BigRational)], adj: &[Vec<usize>], kappa: &BigRational) -> bool {
    if xs.is_empty() {
        return true;
    }
    let mut ys: Vec<usize> = xs.iter().flat_map(|&x| adj[x].iter().copied()).collect();
    ys.sort_unstable();
    ys.dedup();
    let need: BigRational = xs.iter().map(|&x| &masses_x[x].1 * kappa).sum();
    let avail: BigRational = ys.iter().map(|&y| masses_y[y].1.clone()).sum();
    if need > avail {
        return false;
    }
    let src = 0;
    let sink = 1 + xs.len() + ys.len();
    let mut g = FlowNetwork::new(sink + 1);
    let ypos: HashMap<usize, usize> = ys.iter().enumerate().map(|(i, &y)| (y, 1 + xs.len() + i)).collect();
    for (i, &x) in xs.iter().enumerate() {
        g.add_edge(src, 1 + i, Some(&masses_x[x].1 * kappa));
        for y in &adj[x] {
            g.add_edge(1 + i, ypos[y], None);
        }
    }
    for (i, &y) in ys.iter().enumerate() {
        g.add_edge(1 + xs.len() + i, sink, Some(masses_y[y].1.clone()));
    }
    g.max_flow(src, sink) == need
}

/// Hall-type condition `mu_1(X) <= mu_2(f(X))` for all `X`.
pub fn is_society(s: &Society) -> bool {
    let (fwd, _) = s.adjacency();
    let all: Vec<usize> = (0..s.left.len()).collect();
    hall_scaled(&all, &s.left, &s.right, &fwd, &BigRational::one())
}

fn kappa(e: &BigRational) -> BigRational {
    (BigRational::one() + e) / (BigRational::one() - e)
}

/// Robust conditions on one component: Hall on its full left part, and the
/// scaled inequalities on every proper subset of either side.
fn component_robust(s: &Society, fwd: &[Vec<usize>], back: &[Vec<usize>], ls: &[usize], rs: &[usize], k: &BigRational) -> bool {
    if !hall_scaled(ls, &s.left, &s.right, fwd, &BigRational::one()) {
        return false;
    }
    // Every proper subset misses some vertex v, so it suffices to check
    // the scaled Hall condition on each side minus one vertex.
    for (xs, mx, my, adj) in [(ls, &s.left, &s.right, fwd), (rs, &s.right, &s.left, back)] {
        if xs.len() < 2 {
            continue;
        }
        for skip in 0..xs.len() {
            let sub: Vec<usize> = xs.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect();
            if !hall_scaled(&sub, mx, my, adj, k) {
                return false;
            }
        }
    }
    true
}

/// `mu_1(X)(1 + e) <= mu_2(f(X))(1 - e)` and the dual, for every proper
/// subset of each connected component.
pub fn is_eps_robust(s: &Society, e: &BigRational) -> bool {
    if e >= &BigRational::one() || e.is_negative() {
        return false;
    }
    if !is_society(s) {
        return false;
    }
    let (fwd, back) = s.adjacency();
    let k = kappa(e);
    s.components().iter().all(|(ls, rs)| component_robust(s, &fwd, &back, ls, rs, &k))
}

const ORACLE_LIMIT: usize = 20;

fn mask_mass(m: &[(String, BigRational)], items: &[usize], mask: u32) -> BigRational {
    items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| m[x].1.clone()).sum()
}

/// Exhaustive-subset oracle for [`is_society`].
pub fn is_society_exhaustive(s: &Society) -> bool {
    assert!(s.left.len() <= ORACLE_LIMIT, "oracle limited to {ORACLE_LIMIT} vertices per side");
    let (fwd, _) = s.adjacency();
    let all: Vec<usize> = (0..s.left.len()).collect();
    (0u32..1 << all.len()).all(|mask| {
        let mut n = BTreeSet::new();
        for (i, &x) in all.iter().enumerate() {
            if mask >> i & 1 == 1 {
                n.extend(fwd[x].iter().copied());
            }
        }
        let ny: BigRational = n.iter().map(|&y| s.right[y].1.clone()).sum();
        mask_mass(&s.left, &all, mask) <= ny
    })
}

/// Exhaustive-subset oracle for [`is_eps_robust`].
pub fn is_eps_robust_exhaustive(s: &Society, e: &BigRational) -> bool {
    if e >= &BigRational::one() || e.is_negative() || !is_society_exhaustive(s) {
        return false;
    }
    let (fwd, back) = s.adjacency();
    let one = BigRational::one();
    let (lo, hi) = (&one + e, &one - e);
    for (ls, rs) in s.components() {
        for (xs, mx, my, adj) in [(&ls, &s.left, &s.right, &fwd), (&rs, &s.right, &s.left, &back)] {
            assert!(xs.len() <= ORACLE_LIMIT, "oracle limited to {ORACLE_LIMIT} vertices per side");
            let full = (1u32 << xs.len()) - 1;
            for mask in 1..full {
                let mut n = BTreeSet::new();
                for (i, &x) in xs.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        n.extend(adj[x].iter().copied());
                    }
                }
                let ny: BigRational = n.iter().map(|&y| my[y].1.clone()).sum();
                if mask_mass(mx, xs, mask) * &lo > ny * &hi {
                    return false;
                }
            }
        }
    }
    true
}

/// Product society on tuple vertices; ids are joined with `|`.
pub fn join(parts: &[&Society]) -> Society {
    assert!(!parts.is_empty(), "join of no societies");
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        let left = product_side(&acc.left, &p.left);
        let right = product_side(&acc.right, &p.right);
        let pr = p.right.len();
        let pl = p.left.len();
        let edges = acc
            .edges
            .iter()
            .flat_map(|&(a, b)| p.edges.iter().map(move |&(c, d)| ((a, c), (b, d))))
            .map(|((a, c), (b, d))| (a * pl + c, b * pr + d));
        let ids_l: Vec<String> = left.iter().map(|(id, _)| id.clone()).collect();
        let ids_r: Vec<String> = right.iter().map(|(id, _)| id.clone()).collect();
        let edges: Vec<(String, String)> = edges.map(|(l, r)| (ids_l[l].clone(), ids_r[r].clone())).collect();
        acc = Society::new(left, right, edges).expect("product of valid societies");
    }
    debug_assert!(parts.iter().any(|p| !is_society(p)) || is_society(&acc));
    acc
}

fn product_side(a: &[(String, BigRational)], b: &[(String, BigRational)]) -> Vec<(String, BigRational)> {
    a.iter().flat_map(|(x, mx)| b.iter().map(move |(y, my)| (format!("{x}|{y}"), mx * my))).collect()
}

/// `|Omega_2| > |{w : w has at least two neighbours}|`.
pub fn marriage_count_check(s: &Society) -> bool {
    let (_, back) = s.adjacency();
    s.right.len() > back.iter().filter(|n| n.len() >= 2).count()
}

/// True when removing any single edge breaks `e`-robustness.
pub fn is_edge_minimal(s: &Society, e: &BigRational) -> bool {
    s.edges.iter().all(|&(l, r)| !is_eps_robust(&s.without_edge(l, r), e))
}

/// Robustness of `s` after removing one edge, checking only the
/// component(s) the edge touched; `s` must already be robust at `k`.
fn robust_after_removal(s: &Society, l: usize, r: usize, k: &BigRational) -> bool {
    let t = s.without_edge(l, r);
    let (fwd, back) = t.adjacency();
    for (ls, rs) in t.components() {
        if ls.binary_search(&l).is_ok() || rs.binary_search(&r).is_ok() {
            if !component_robust(&t, &fwd, &back, &ls, &rs, k) {
                return false;
            }
        }
    }
    true
}

/// Canonical minimal `eps_n`-robust subsociety. Stages run over the
/// precisions `i = i0..n`, where `i0` is the first at which the input is
/// `eps_i`-robust; each stage scans edges in canonical order, removing an
/// edge iff the remainder stays `eps_i`-robust, until a full scan removes
/// nothing.
pub fn minimal_robust_subsociety(s: &Society, n: u32) -> Result<Society> {
    if n == 0 {
        return Err(Error::ConstraintViolation("precision must be at least 1".into()));
    }
    let i0 = (1..=n).find(|&i| is_eps_robust(s, &eps(i))).ok_or_else(|| {
        Error::NotRobustInput(format!("society with {}x{} vertices is not eps_{n}-robust", s.left.len(), s.right.len()))
    })?;
    let mut cur = s.clone();
    for i in i0..=n {
        let k = kappa(&eps(i));
        loop {
            let mut removed = false;
            let snapshot: Vec<(usize, usize)> = cur.edges.iter().copied().collect();
            for (l, r) in snapshot {
                if robust_after_removal(&cur, l, r, &k) {
                    cur.edges.remove(&(l, r));
                    removed = true;
                }
            }
            if !removed {
                break;
            }
        }
    }
    debug_assert!(is_eps_robust(&cur, &eps(n)));
    Ok(cur)
}
