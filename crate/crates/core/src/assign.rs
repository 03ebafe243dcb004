//! Linear assignment, projection onto permutations and the Frank-Wolfe step
//! for the relaxed alignment problem `max_D Tr(DᵀADM)` over doubly stochastic
//! matrices, with an optional block of fixed seed correspondences.

use serde::{Deserialize, Serialize};

use crate::graphs::{DoublyStochastic, Permutation, SeedSet, UnipartiteGraph};
use crate::{linalg, Error, Matrix, Result};

pub const DEFAULT_FW_MAX: usize = 30;
pub const DEFAULT_FW_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Exact linear assignment: the permutation optimizing `Σ_i cost[i, P(i)]`.
/// Among optimal permutations the lexicographically smallest index map wins.
pub fn lap_solve(cost: &Matrix, sense: Sense) -> Result<Permutation> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: cost.ncols(),
        });
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok(Permutation::identity(0));
    }
    let c = match sense {
        Sense::Min => cost.clone(),
        Sense::Max => -cost,
    };
    let (assignment, u, v) = hungarian(&c);
    let eps = 1e-9 * (1.0 + linalg::max_abs(&c)) * n as f64;
    let tight = Matrix::from_fn(n, n, |i, j| if c[(i, j)] - u[i + 1] - v[j + 1] <= eps { 1.0 } else { 0.0 });
    let map = lexicographic_matching(&tight, assignment);
    Permutation::new(map)
}

/// Σ_i cost[i, P(i)].
pub fn assignment_value(cost: &Matrix, p: &Permutation) -> f64 {
    p.map().iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

/// Shortest augmenting path Hungarian method with row and column potentials.
/// Returns the row assignment and the (1-based) potentials.
fn hungarian(costs: &Matrix) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = costs.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u, v)
}

/// Lexicographically smallest perfect matching inside the tight-edge graph,
/// starting from a known perfect matching `row_to_col`.
fn lexicographic_matching(tight: &Matrix, mut row_to_col: Vec<usize>) -> Vec<usize> {
    let n = row_to_col.len();
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        for j in 0..row_to_col[i] {
            if fixed_col[j] || tight[(i, j)] == 0.0 {
                continue;
            }
            // Row r currently holding column j must move along an alternating
            // path among rows > i that ends by taking row i's column.
            let r = col_to_row[j];
            let target = row_to_col[i];
            let mut seen = vec![false; n];
            seen[j] = true;
            let mut path = Vec::new();
            if alternating_path(tight, r, target, i, &fixed_col, &col_to_row, &mut seen, &mut path) {
                // path holds (row, new column) moves.
                for &(row, col) in &path {
                    row_to_col[row] = col;
                    col_to_row[col] = row;
                }
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
        fixed_col[row_to_col[i]] = true;
    }
    row_to_col
}

#[allow(clippy::too_many_arguments)]
fn alternating_path(
    tight: &Matrix,
    row: usize,
    target: usize,
    current: usize,
    fixed_col: &[bool],
    col_to_row: &[usize],
    seen: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    let n = col_to_row.len();
    for col in 0..n {
        if seen[col] || fixed_col[col] || tight[(row, col)] == 0.0 {
            continue;
        }
        seen[col] = true;
        if col == target {
            path.push((row, col));
            return true;
        }
        let next = col_to_row[col];
        if next > current && alternating_path(tight, next, target, current, fixed_col, col_to_row, seen, path) {
            path.push((row, col));
            return true;
        }
    }
    false
}

/// Nearest permutation in the sense of `argmax_P ⟨D, P⟩`.
pub fn project_to_permutation(d: &DoublyStochastic) -> Permutation {
    lap_solve(d.matrix(), Sense::Max).expect("doubly stochastic entries are finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct QapStepResult {
    pub d: DoublyStochastic,
    pub projected: Permutation,
    /// `Tr(DᵀADM)` at the start and after every Frank-Wolfe iteration.
    pub objective_trace: Vec<f64>,
    pub fw_iterations: usize,
    /// Stopped on the tolerance rather than the iteration cap.
    pub converged: bool,
}

/// `Tr(DᵀADM)`.
pub fn alignment_objective(a: &Matrix, d: &Matrix, m: &Matrix) -> f64 {
    linalg::trace_product(&(d.transpose() * a * d), m)
}

fn check_weight_matrix(m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: m.nrows(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("alignment weights must be finite".into()));
    }
    if linalg::max_asymmetry(m) > 1e-10 * (1.0 + linalg::max_abs(m)) {
        return Err(Error::Domain("alignment weights must be symmetric".into()));
    }
    Ok(())
}

/// Frank-Wolfe on `g(J) = c + 2Tr(JᵀL) + Tr(JᵀA₂₂JM₂₂)`.
struct FwOutcome {
    j: Matrix,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn frank_wolfe(a22: &Matrix, m22: &Matrix, linear: &Matrix, constant: f64, j0: Matrix, max_fw: usize, tol: f64) -> FwOutcome {
    let value = |j: &Matrix| constant + 2.0 * linalg::trace_product(&j.transpose(), linear) + alignment_objective(a22, j, m22);
    let mut j = j0;
    let mut f = value(&j);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_fw {
        iterations += 1;
        let ajm = a22 * &j * m22;
        let grad = (linear + &ajm) * 2.0;
        let vertex = lap_solve(&grad, Sense::Max).expect("finite gradient").to_matrix();
        let dir = vertex - &j;
        let b = linalg::trace_product(&dir.transpose(), &grad);
        if !(b > 0.0) {
            converged = true;
            break;
        }
        let a = alignment_objective(a22, &dir, m22);
        let gamma = if a < 0.0 {
            (-b / (2.0 * a)).clamp(0.0, 1.0)
        } else if a + b > 0.0 {
            1.0
        } else {
            0.0
        };
        if gamma == 0.0 {
            converged = true;
            break;
        }
        j += dir * gamma;
        let next = value(&j);
        trace.push(next);
        let gain = next - f;
        f = next;
        if gain <= tol * f.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    FwOutcome {
        j,
        trace,
        iterations,
        converged,
    }
}

/// One relaxed alignment step: Frank-Wolfe ascent of `Tr(DᵀADM)` from `d0`,
/// then projection of the final iterate onto the permutations.
pub fn faq_step(a: &UnipartiteGraph, m: &Matrix, d0: &DoublyStochastic, max_fw: usize, tol: f64) -> Result<QapStepResult> {
    let n = a.n();
    check_weight_matrix(m, n)?;
    if d0.n() != n {
        return Err(Error::Dimension { expected: n, got: d0.n() });
    }
    let out = frank_wolfe(a.adj(), m, &Matrix::zeros(n, n), 0.0, d0.matrix().clone(), max_fw, tol);
    let d = DoublyStochastic::new_unchecked(out.j);
    let projected = project_to_permutation(&d);
    Ok(QapStepResult {
        d,
        projected,
        objective_trace: out.trace,
        fw_iterations: out.iterations,
        converged: out.converged,
    })
}

/// `Tr(PᵀAP·M)` for a permutation.
pub fn permutation_objective(a: &UnipartiteGraph, m: &Matrix, p: &Permutation) -> f64 {
    let map = p.map();
    let adj = a.adj();
    let n = a.n();
    let mut total = 0.0;
    for u in 0..n {
        for v in 0..n {
            if adj[(u, v)] != 0.0 {
                total += adj[(u, v)] * m[(map[u], map[v])];
            }
        }
    }
    total
}

/// Hill climbing on `Tr(PᵀAP·M)` over transpositions of the images of
/// `movable` vertices. Each sweep applies the best improving swap; stops at a
/// swap-local optimum.
pub fn swap_local_search(a: &UnipartiteGraph, m: &Matrix, p: &Permutation, movable: &[usize]) -> Result<Permutation> {
    let n = a.n();
    check_weight_matrix(m, n)?;
    if p.map().len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: p.map().len(),
        });
    }
    let adj = a.adj();
    let mut map = p.map().to_vec();
    let scale = 1e-12 * (1.0 + linalg::max_abs(m) * adj.iter().map(|v| v.abs()).sum::<f64>());
    // Change in the objective when the images of i and j are exchanged.
    let delta = |map: &[usize], i: usize, j: usize| -> f64 {
        let (pi, pj) = (map[i], map[j]);
        let mut d = 0.0;
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let pk = map[k];
            d += (adj[(i, k)] - adj[(j, k)]) * (m[(pj, pk)] - m[(pi, pk)]);
        }
        2.0 * d + (adj[(i, i)] - adj[(j, j)]) * (m[(pj, pj)] - m[(pi, pi)])
    };
    loop {
        let mut best = (0.0, 0, 0);
        for (x, &i) in movable.iter().enumerate() {
            for &j in &movable[x + 1..] {
                let d = delta(&map, i, j);
                if d > best.0 {
                    best = (d, i, j);
                }
            }
        }
        if best.0 <= scale {
            break;
        }
        map.swap(best.1, best.2);
    }
    Permutation::new(map)
}

/// Free A-side and B-side vertices, ascending, for a seed set.
pub fn free_vertices(seeds: &SeedSet, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut seeded_a = vec![false; n];
    let mut seeded_b = vec![false; n];
    for &(x, y) in seeds.pairs() {
        seeded_a[x] = true;
        seeded_b[y] = true;
    }
    let free_a = (0..n).filter(|&i| !seeded_a[i]).collect();
    let free_b = (0..n).filter(|&i| !seeded_b[i]).collect();
    (free_a, free_b)
}

/// As [`faq_step`], with the seed correspondences held fixed. `j0` is the
/// starting point on the free block: rows are the unseeded A vertices and
/// columns the unseeded B vertices, both ascending.
pub fn seeded_faq_step(
    a: &UnipartiteGraph,
    m: &Matrix,
    seeds: &SeedSet,
    j0: &DoublyStochastic,
    max_fw: usize,
    tol: f64,
) -> Result<QapStepResult> {
    let n = a.n();
    check_weight_matrix(m, n)?;
    seeds.validate_for(n)?;
    let (free_a, free_b) = free_vertices(seeds, n);
    let k = free_a.len();
    if j0.n() != k {
        return Err(Error::Dimension { expected: k, got: j0.n() });
    }
    let seed_a: Vec<usize> = seeds.pairs().iter().map(|p| p.0).collect();
    let seed_b: Vec<usize> = seeds.pairs().iter().map(|p| p.1).collect();
    let adj = a.adj();
    let sub = |mat: &Matrix, rows: &[usize], cols: &[usize]| Matrix::from_fn(rows.len(), cols.len(), |r, c| mat[(rows[r], cols[c])]);

    let a11 = sub(adj, &seed_a, &seed_a);
    let a21 = sub(adj, &free_a, &seed_a);
    let a22 = sub(adj, &free_a, &free_a);
    let m11 = sub(m, &seed_b, &seed_b);
    let m12 = sub(m, &seed_b, &free_b);
    let m22 = sub(m, &free_b, &free_b);
    let constant = linalg::trace_product(&a11, &m11);
    let linear = &a21 * &m12;

    let out = frank_wolfe(&a22, &m22, &linear, constant, j0.matrix().clone(), max_fw, tol);

    let mut d = Matrix::zeros(n, n);
    for &(x, y) in seeds.pairs() {
        d[(x, y)] = 1.0;
    }
    for (r, &x) in free_a.iter().enumerate() {
        for (c, &y) in free_b.iter().enumerate() {
            d[(x, y)] = out.j[(r, c)];
        }
    }
    let block = lap_solve(&out.j, Sense::Max)?;
    let mut map = vec![0usize; n];
    for &(x, y) in seeds.pairs() {
        map[x] = y;
    }
    for (r, &x) in free_a.iter().enumerate() {
        map[x] = free_b[block.get(r)];
    }
    Ok(QapStepResult {
        d: DoublyStochastic::new_unchecked(d),
        projected: Permutation::new(map)?,
        objective_trace: out.trace,
        fw_iterations: out.iterations,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{chain_graph, er_graph, permute_matrix};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_force(cost: &Matrix, sense: Sense) -> (Permutation, f64) {
        let mut best: Option<(Permutation, f64)> = None;
        for p in Permutation::all(cost.nrows()) {
            let v = assignment_value(cost, &p);
            let better = match (&best, sense) {
                (None, _) => true,
                (Some((_, b)), Sense::Min) => v < *b,
                (Some((_, b)), Sense::Max) => v > *b,
            };
            if better {
                best = Some((p, v));
            }
        }
        best.unwrap()
    }

    fn random_weights(n: usize, seed: u64) -> Matrix {
        let mut r = rng::from_seed(seed);
        let mut m = Matrix::from_fn(n, n, |_, _| r.random::<f64>());
        linalg::symmetrize_in_place(&mut m);
        m.fill_diagonal(0.0);
        m
    }

    #[test]
    fn lap_examples() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = lap_solve(&c, Sense::Min).unwrap();
        assert!(p.is_identity());
        assert_eq!(assignment_value(&c, &p), 2.0);

        let p0 = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(lap_solve(&-p0.to_matrix(), Sense::Min).unwrap(), p0);

        let nan = Matrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(lap_solve(&nan, Sense::Min), Err(Error::Domain(_))));
    }

    #[test]
    fn lap_matches_exhaustive_search() {
        let mut r = rng::from_seed(42);
        for _ in 0..100 {
            let c = Matrix::from_fn(7, 7, |_, _| r.random::<f64>() * 10.0 - 5.0);
            let (_, best) = brute_force(&c, Sense::Min);
            let p = lap_solve(&c, Sense::Min).unwrap();
            assert!((assignment_value(&c, &p) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        let mut r = rng::from_seed(7);
        for _ in 0..100 {
            let n = 2 + r.random_range(0..5);
            let c = Matrix::from_fn(n, n, |_, _| r.random_range(0..3) as f64);
            // Permutation::all is lexicographic, so strict improvement keeps the first optimum.
            let (expected, _) = brute_force(&c, Sense::Min);
            assert_eq!(lap_solve(&c, Sense::Min).unwrap(), expected, "{c}");
        }
    }

    #[test]
    fn projection_examples() {
        let p0 = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        assert_eq!(project_to_permutation(&DoublyStochastic::from_permutation(&p0)), p0);
        assert!(project_to_permutation(&DoublyStochastic::barycenter(5)).is_identity());
        let mix = p0.to_matrix() * 0.9 + DoublyStochastic::barycenter(4).matrix() * 0.1;
        assert_eq!(project_to_permutation(&DoublyStochastic::new(mix).unwrap()), p0);
    }

    #[test]
    fn zero_weights_return_start() {
        let a = chain_graph(4).unwrap();
        let d0 = DoublyStochastic::barycenter(4);
        let out = faq_step(&a, &Matrix::zeros(4, 4), &d0, 30, 1e-6).unwrap();
        assert_eq!(out.d, d0);
        assert_eq!(out.fw_iterations, 1);
        assert!(out.projected.is_identity());
    }

    #[test]
    fn chain_alignment_reaches_exhaustive_maximum() {
        let a = chain_graph(4).unwrap();
        let out = faq_step(&a, a.adj(), &DoublyStochastic::barycenter(4), 30, 1e-6).unwrap();
        let best = Permutation::all(4)
            .map(|p| alignment_objective(a.adj(), &p.to_matrix(), a.adj()))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = alignment_objective(a.adj(), &out.projected.to_matrix(), a.adj());
        assert_eq!(got, best);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = chain_graph(3).unwrap();
        let mut m = Matrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        assert!(faq_step(&a, &m, &DoublyStochastic::barycenter(3), 5, 1e-6).is_err());
        m[(1, 0)] = 1.0;
        assert!(faq_step(&a, &m, &DoublyStochastic::barycenter(3), 5, 1e-6).is_ok());
    }

    #[test]
    fn fw_trace_is_monotone_and_feasible() {
        for seed in 0..100u64 {
            let n = 3 + (seed as usize % 8);
            let a = er_graph(n, 0.4, seed).unwrap();
            let m = random_weights(n, 1000 + seed);
            let out = faq_step(&a, &m, &DoublyStochastic::barycenter(n), 30, 1e-9).unwrap();
            for w in out.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed}");
            }
            assert!(out.d.marginal_error() <= 1e-8);
            assert!(out.d.min_entry() >= -1e-10);
        }
    }

    #[test]
    fn all_seeded_returns_seeds() {
        let a = chain_graph(5).unwrap();
        let truth = Permutation::new(vec![4, 2, 0, 1, 3]).unwrap();
        let seeds = SeedSet::from_truth(&truth, &[0, 1, 2, 3, 4]).unwrap();
        let out = seeded_faq_step(&a, &random_weights(5, 1), &seeds, &DoublyStochastic::barycenter(0), 30, 1e-6).unwrap();
        assert_eq!(out.projected, truth);
    }

    #[test]
    fn no_seeds_equals_unseeded_step() {
        for seed in 0..10u64 {
            let a = er_graph(6, 0.5, seed).unwrap();
            let m = random_weights(6, seed);
            let d0 = DoublyStochastic::barycenter(6);
            let plain = faq_step(&a, &m, &d0, 30, 1e-6).unwrap();
            let seeded = seeded_faq_step(&a, &m, &SeedSet::empty(), &d0, 30, 1e-6).unwrap();
            assert_eq!(plain.projected, seeded.projected);
            assert!((plain.d.matrix() - seeded.d.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn seeded_completion_matches_exhaustive_search() {
        let mut hits = 0;
        for seed in 0..20u64 {
            let a = chain_graph(6).unwrap();
            let truth = Permutation::random(6, seed);
            // Noisy aligned weights: the truth-relabeled chain plus small jitter.
            let mut m = permute_matrix(a.adj(), &truth).unwrap() + random_weights(6, 50 + seed) * 0.2;
            linalg::symmetrize_in_place(&mut m);
            let seeds = SeedSet::from_truth(&truth, &[0, 2, 4]).unwrap();
            let out = seeded_faq_step(&a, &m, &seeds, &DoublyStochastic::barycenter(3), 30, 1e-9).unwrap();
            assert!(seeds.is_respected_by(&out.projected));
            let best = Permutation::all(6)
                .filter(|p| seeds.is_respected_by(p))
                .map(|p| alignment_objective(a.adj(), &p.to_matrix(), &m))
                .fold(f64::NEG_INFINITY, f64::max);
            let got = alignment_objective(a.adj(), &out.projected.to_matrix(), &m);
            if (got - best).abs() < 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn seed_duplicates_are_rejected() {
        assert!(matches!(SeedSet::new(vec![(0, 1), (2, 1)]), Err(Error::Seed(_))));
    }

    proptest! {
        #[test]
        fn min_and_negated_max_agree(values in proptest::collection::vec(-3i32..3, 36)) {
            let c = Matrix::from_iterator(6, 6, values.into_iter().map(f64::from));
            prop_assert_eq!(lap_solve(&c, Sense::Min).unwrap(), lap_solve(&-&c, Sense::Max).unwrap());
        }

        #[test]
        fn seeds_survive_the_step(seed in 0u64..1000, k in 0usize..6) {
            let n = 6;
            let a = er_graph(n, 0.5, seed).unwrap();
            let truth = Permutation::random(n, seed + 1);
            let verts: Vec<usize> = (0..k).collect();
            let seeds = SeedSet::from_truth(&truth, &verts).unwrap();
            let out = seeded_faq_step(&a, &random_weights(n, seed), &seeds, &DoublyStochastic::barycenter(n - k), 30, 1e-6).unwrap();
            prop_assert!(seeds.is_respected_by(&out.projected));
            for w in out.objective_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
        }

        #[test]
        fn swap_search_ends_at_a_swap_optimum(seed in 0u64..1000, k in 0usize..4) {
            let n = 7;
            let a = er_graph(n, 0.4, seed).unwrap();
            let m = random_weights(n, seed + 7);
            let start = Permutation::random(n, seed + 2);
            let movable: Vec<usize> = (k..n).collect();
            let p = swap_local_search(&a, &m, &start, &movable).unwrap();
            let f = permutation_objective(&a, &m, &p);
            prop_assert!(f >= permutation_objective(&a, &m, &start) - 1e-12);
            prop_assert!((0..k).all(|i| p.map()[i] == start.map()[i]));
            for (x, &i) in movable.iter().enumerate() {
                for &j in &movable[x + 1..] {
                    let mut map = p.map().to_vec();
                    map.swap(i, j);
                    let g = permutation_objective(&a, &m, &Permutation::new(map).unwrap());
                    prop_assert!(g <= f + 1e-9);
                }
            }
        }
    }

    #[test]
    fn permutation_objective_matches_trace_form() {
        let a = chain_graph(6).unwrap();
        let m = random_weights(6, 3);
        let p = Permutation::random(6, 4);
        let w = permute_matrix(a.adj(), &p).unwrap();
        assert!((permutation_objective(&a, &m, &p) - linalg::trace_product(&w, &m)).abs() < 1e-12);
    }
}
