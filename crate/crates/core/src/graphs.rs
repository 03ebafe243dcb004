//! Unipartite graphs, permutations and their relaxations.
//!
//! Index convention used throughout the crate: a [`Permutation`] with map `π`
//! is the matrix `P` with `P[i, π(i)] = 1`, so vertex `i` of `A` corresponds to
//! row `π(i)` of the bipartite matrix. Relabeling gives `W = PᵀAP` with
//! `W[π(i), π(j)] = A[i, j]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result};

const DS_ROW_TOL: f64 = 1e-8;
const DS_ENTRY_SLACK: f64 = 1e-10;

/// Symmetric adjacency matrix with zero diagonal and weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnipartiteGraph {
    adj: Matrix,
}

impl UnipartiteGraph {
    pub fn new(adj: Matrix) -> Result<Self> {
        if adj.nrows() != adj.ncols() {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {}x{}",
                adj.nrows(),
                adj.ncols()
            )));
        }
        let n = adj.nrows();
        for i in 0..n {
            if adj[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            for j in 0..n {
                let w = adj[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidGraph(format!("weight {w} at ({i}, {j}) outside [0, 1]")));
                }
                if w != adj[(j, i)] {
                    return Err(Error::InvalidGraph(format!("asymmetric entry at ({i}, {j})")));
                }
            }
        }
        Ok(UnipartiteGraph { adj })
    }

    pub fn empty(n: usize) -> Self {
        UnipartiteGraph { adj: Matrix::zeros(n, n) }
    }

    /// Builds a binary graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = Matrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidGraph(format!("bad edge ({i}, {j}) for n = {n}")));
            }
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
        Ok(UnipartiteGraph { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.nrows()
    }

    pub fn adj(&self) -> &Matrix {
        &self.adj
    }

    pub fn is_binary(&self) -> bool {
        self.adj.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    pub fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::InvalidGraph("operation requires a binary adjacency matrix".into()))
        }
    }

    /// Upper-triangle pairs with non-zero weight, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adj[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn has_edges(&self) -> bool {
        self.adj.iter().any(|&w| w != 0.0)
    }

    /// Number of non-zero neighbours of each vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let n = self.n();
        (0..n).map(|i| (0..n).filter(|&j| self.adj[(i, j)] != 0.0).count()).collect()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.adj[(i, j)] != 0.0).collect()
    }

    /// Induced subgraph on `keep`, in the given order.
    pub fn induced(&self, keep: &[usize]) -> UnipartiteGraph {
        let k = keep.len();
        let adj = Matrix::from_fn(k, k, |a, b| self.adj[(keep[a], keep[b])]);
        UnipartiteGraph { adj }
    }

    /// True when some non-identity permutation maps the graph onto itself.
    pub fn has_nontrivial_automorphism(&self) -> bool {
        let n = self.n();
        let degrees = self.degrees();
        let mut map = vec![usize::MAX; n];
        let mut used = vec![false; n];
        self.search_automorphism(0, &degrees, &mut map, &mut used, false)
    }

    fn search_automorphism(&self, i: usize, degrees: &[usize], map: &mut Vec<usize>, used: &mut Vec<bool>, moved: bool) -> bool {
        let n = self.n();
        if i == n {
            return moved;
        }
        for cand in 0..n {
            if used[cand] || degrees[cand] != degrees[i] {
                continue;
            }
            let consistent = (0..i).all(|k| self.adj[(i, k)] == self.adj[(cand, map[k])]);
            if !consistent {
                continue;
            }
            map[i] = cand;
            used[cand] = true;
            if self.search_automorphism(i + 1, degrees, map, used, moved || cand != i) {
                return true;
            }
            used[cand] = false;
        }
        map[i] = usize::MAX;
        false
    }
}

/// A bijection on `0..n`; see the module docs for the matrix convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::InvalidParameter(format!("{map:?} is not a permutation of 0..{n}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(&mut rng::from_seed(seed));
        Permutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// The permutation whose matrix is `P·Q`: apply `self`, then `other`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Permutation {
            map: self.map.iter().map(|&v| other.map[v]).collect(),
        })
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.len();
        let mut p = Matrix::zeros(n, n);
        for (i, &v) in self.map.iter().enumerate() {
            p[(i, v)] = 1.0;
        }
        p
    }

    /// Iterates all permutations of `0..n` in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let mut next: Option<Vec<usize>> = Some((0..n).collect());
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            if next_permutation(&mut succ) {
                next = Some(succ);
            }
            Some(Permutation { map: current })
        })
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Matrix in the Birkhoff polytope (non-negative, unit row and column sums).
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    d: Matrix,
}

impl DoublyStochastic {
    pub fn new(d: Matrix) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(Error::Dimension {
                expected: d.nrows(),
                got: d.ncols(),
            });
        }
        let n = d.nrows();
        if let Some(v) = d.iter().find(|&&v| !(v >= -DS_ENTRY_SLACK)) {
            return Err(Error::Domain(format!("negative entry {v} in doubly stochastic matrix")));
        }
        for i in 0..n {
            let r = d.row(i).sum();
            let c = d.column(i).sum();
            if (r - 1.0).abs() > DS_ROW_TOL || (c - 1.0).abs() > DS_ROW_TOL {
                return Err(Error::Domain(format!("row/column {i} sums to {r}/{c}")));
            }
        }
        Ok(DoublyStochastic { d })
    }

    pub(crate) fn new_unchecked(d: Matrix) -> Self {
        DoublyStochastic { d }
    }

    pub fn barycenter(n: usize) -> Self {
        DoublyStochastic {
            d: Matrix::from_element(n, n, 1.0 / n as f64),
        }
    }

    pub fn from_permutation(p: &Permutation) -> Self {
        DoublyStochastic { d: p.to_matrix() }
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    pub fn into_matrix(self) -> Matrix {
        self.d
    }

    /// Largest deviation of a row or column sum from one.
    pub fn marginal_error(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| (self.d.row(i).sum() - 1.0).abs().max((self.d.column(i).sum() - 1.0).abs()))
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.d.min()
    }
}

/// Known correspondences `(index in A, index in B)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeedSet {
    pairs: Vec<(usize, usize)>,
}

impl SeedSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        a.sort_unstable();
        b.sort_unstable();
        if a.windows(2).any(|w| w[0] == w[1]) || b.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Seed(format!("duplicate vertex in seed pairs {pairs:?}")));
        }
        Ok(SeedSet { pairs })
    }

    pub fn empty() -> Self {
        SeedSet::default()
    }

    /// Seeds taken from a known permutation on the given A-side vertices.
    pub fn from_truth(truth: &Permutation, vertices: &[usize]) -> Result<Self> {
        SeedSet::new(vertices.iter().map(|&a| (a, truth.get(a))).collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        match self.pairs.iter().find(|&&(a, b)| a >= n || b >= n) {
            Some(p) => Err(Error::Seed(format!("seed pair {p:?} out of range for n = {n}"))),
            None => Ok(()),
        }
    }

    /// True when `p` agrees with every seed pair.
    pub fn is_respected_by(&self, p: &Permutation) -> bool {
        self.pairs.iter().all(|&(a, b)| p.get(a) == b)
    }
}

/// Undirected edge set on `0..n` without self-loops, stored as a symmetric mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    n: usize,
    mask: Vec<bool>,
}

impl EdgeSet {
    pub fn empty(n: usize) -> Self {
        EdgeSet {
            n,
            mask: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut s = EdgeSet::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                s.insert(i, j);
            }
        }
        s
    }

    /// Off-diagonal pairs where `|m[i, j]| > threshold` (either triangle).
    pub fn from_matrix(m: &Matrix, threshold: f64) -> Self {
        let n = m.nrows();
        let mut s = EdgeSet::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)].abs() > threshold || m[(j, i)].abs() > threshold {
                    s.insert(i, j);
                }
            }
        }
        s
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut s = EdgeSet::empty(n);
        for &(i, j) in pairs {
            s.insert(i, j);
        }
        s
    }

    /// Support of `PᵀAP`.
    pub fn support_of(a: &UnipartiteGraph, p: &Permutation) -> Result<Self> {
        Ok(EdgeSet::from_matrix(&permute_matrix(a.adj(), p)?, 0.0))
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.mask[i * self.n + j] = true;
            self.mask[j * self.n + i] = true;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    /// Upper-triangle pairs, row-major.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.contains(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count() / 2
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if self.contains(i, j) { 1.0 } else { 0.0 })
    }
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn chain_graph(n: usize) -> Result<UnipartiteGraph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("chain graph needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    UnipartiteGraph::from_edges(n, &edges)
}

/// Erdős–Rényi graph; upper-triangle pairs are drawn row-major.
pub fn er_graph(n: usize, p: f64, seed: u64) -> Result<UnipartiteGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    use rand::Rng;
    let mut rng = rng::from_seed(seed);
    let mut adj = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                adj[(i, j)] = 1.0;
                adj[(j, i)] = 1.0;
            }
        }
    }
    Ok(UnipartiteGraph { adj })
}

/// `PᵀAP`.
pub fn permute_graph(a: &UnipartiteGraph, p: &Permutation) -> Result<UnipartiteGraph> {
    Ok(UnipartiteGraph {
        adj: permute_matrix(a.adj(), p)?,
    })
}

/// `PᵀMP` for any square matrix, i.e. `out[π(i), π(j)] = m[i, j]`.
pub fn permute_matrix(m: &Matrix, p: &Permutation) -> Result<Matrix> {
    let n = m.nrows();
    if p.len() != n {
        return Err(Error::Dimension { expected: n, got: p.len() });
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(p.get(i), p.get(j))] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Block-diagonal `R ⊕ Q`.
pub fn direct_sum(r: &Permutation, q: &Permutation) -> Permutation {
    let shift = r.len();
    let map = r.map().iter().copied().chain(q.map().iter().map(|&v| v + shift)).collect();
    Permutation { map }
}

pub fn barycenter(n: usize) -> DoublyStochastic {
    DoublyStochastic::barycenter(n)
}
