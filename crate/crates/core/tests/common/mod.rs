//! Test-only oracles and fixtures. Nothing here calls the solvers or the
//! kd-tree under test.

#![allow(dead_code)]

use harmonic_rank_core::{SparseMatrix, WeightGraph};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Solves a dense row-major system by Gaussian elimination with partial pivoting.
pub fn dense_solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        assert!(m[piv * n + col].abs() > 1e-300, "singular oracle system");
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[row * n + k] -= f * m[col * n + k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (x[row] - s) / m[row * n + row];
    }
    x
}

/// Dense weights of a graph, row-major.
pub fn dense_weights(g: &WeightGraph) -> Vec<f64> {
    let m = g.w.rows();
    let mut w = vec![0.0; m * m];
    for (i, j, v) in g.w.triplets() {
        w[i * m + j] = v;
    }
    w
}

/// Bregman-refined soft system solved densely:
/// `(D - W + mu W[:, Λ] P_Λ) f = mu W[:, Λ] (g - d)`, `d += f[Λ] - g`.
/// Returns the final `f` and `max |f[Λ] - g|` after every step.
pub fn dense_bregman(
    g: &WeightGraph,
    labeled: &[usize],
    values: &[f64],
    mu: f64,
    iters: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = g.w.rows();
    let w = dense_weights(g);
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        let deg: f64 = (0..m).map(|j| w[i * m + j]).sum();
        a[i * m + i] += deg;
        for j in 0..m {
            a[i * m + j] -= w[i * m + j];
        }
        for &l in labeled {
            a[i * m + l] += mu * w[i * m + l];
        }
    }
    let mut d = vec![0.0; labeled.len()];
    let mut f = vec![0.0; m];
    let mut history = Vec::new();
    for _ in 0..iters {
        let b: Vec<f64> = (0..m)
            .map(|i| {
                labeled
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| mu * w[i * m + l] * (values[k] - d[k]))
                    .sum()
            })
            .collect();
        f = dense_solve(m, &a, &b);
        let mut worst = 0.0f64;
        for (k, &l) in labeled.iter().enumerate() {
            d[k] += f[l] - values[k];
            worst = worst.max((f[l] - values[k]).abs());
        }
        history.push(worst);
    }
    (f, history)
}

/// Hard-constraint harmonic extension solved densely on the unlabeled block.
pub fn dense_harmonic(g: &WeightGraph, labeled: &[usize], values: &[f64]) -> Vec<f64> {
    let m = g.w.rows();
    let w = dense_weights(g);
    let unl: Vec<usize> = (0..m).filter(|u| !labeled.contains(u)).collect();
    let k = unl.len();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for (p, &u) in unl.iter().enumerate() {
        let deg: f64 = (0..m).map(|j| w[u * m + j]).sum();
        a[p * k + p] += deg;
        for (q, &v) in unl.iter().enumerate() {
            a[p * k + q] -= w[u * m + v];
        }
        for (c, &l) in labeled.iter().enumerate() {
            b[p] += w[u * m + l] * values[c];
        }
    }
    let xu = dense_solve(k, &a, &b);
    let mut f = vec![0.0; m];
    for (c, &l) in labeled.iter().enumerate() {
        f[l] = values[c];
    }
    for (p, &u) in unl.iter().enumerate() {
        f[u] = xu[p];
    }
    f
}

/// Graph from undirected weighted edges.
pub fn graph(m: usize, edges: &[(usize, usize, f64)]) -> WeightGraph {
    let t: Vec<_> = edges
        .iter()
        .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
        .collect();
    WeightGraph::from_matrix(SparseMatrix::from_triplets(m, m, &t).unwrap()).unwrap()
}

/// Unit-weight path `0 - 1 - ... - (m-1)`.
pub fn path(m: usize) -> WeightGraph {
    let edges: Vec<_> = (0..m - 1).map(|i| (i, i + 1, 1.0)).collect();
    graph(m, &edges)
}

/// A connected random graph with labels and boundary values.
pub struct Fixture {
    pub graph: WeightGraph,
    pub labeled: Vec<usize>,
    pub values: Vec<f64>,
}

/// Random connected fixture with `m` in `5..=50`: a random spanning tree plus
/// extra edges, weights in `[0.1, 1]`, 1 to `m/3` labeled nodes rated 1..5.
pub fn random_fixture(seed: u64) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let m = rng.gen_range(5..=50);
    let mut edges = Vec::new();
    for v in 1..m {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.1..=1.0)));
    }
    for _ in 0..m {
        let (u, v) = (rng.gen_range(0..m), rng.gen_range(0..m));
        if u != v && !edges.iter().any(|e| (e.0, e.1) == (u.min(v), u.max(v)) || (e.0, e.1) == (u.max(v), u.min(v))) {
            edges.push((u.min(v), u.max(v), rng.gen_range(0.1..=1.0)));
        }
    }
    let n_lab = rng.gen_range(1..=(m / 3).max(1));
    let mut labeled: Vec<usize> = rand::seq::index::sample(&mut rng, m, n_lab).into_vec();
    labeled.sort_unstable();
    let values = (0..n_lab).map(|_| rng.gen_range(1..=5) as f64).collect();
    Fixture {
        graph: graph(m, &edges),
        labeled,
        values,
    }
}

/// Random sparse points: `rows x dim`, each entry present with `density`,
/// values uniform in `[1, 5]`.
pub fn random_sparse_points(rows: usize, dim: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut t = Vec::new();
    for r in 0..rows {
        for c in 0..dim {
            if rng.gen_bool(density) {
                t.push((r, c, rng.gen_range(1.0..=5.0)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, dim, &t).unwrap()
}

/// Exact kNN by scanning every pair with dense coordinates.
/// Returns `(index, squared distance)` sorted by distance then index.
pub fn brute_force_knn(points: &SparseMatrix, q: usize, k: usize, include_self: bool) -> Vec<(usize, f64)> {
    let dim = points.cols();
    let dense = |r: usize| {
        let mut v = vec![0.0; dim];
        for (c, x) in points.row(r).iter() {
            v[c] = x;
        }
        v
    };
    let qv = dense(q);
    let mut all: Vec<(usize, f64)> = (0..points.rows())
        .filter(|&p| include_self || p != q)
        .map(|p| {
            let pv = dense(p);
            (p, qv.iter().zip(&pv).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// `max_i |a_i - b_i| / max(max_i |b_i|, tiny)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-300);
    num / den
}

/// Ten users; item j rated by users 2 and 7, whose neighbours are {5, 6}
/// and {8, 9}. S_j = {2, 5, 6, 7, 8, 9}.
pub fn ten_user_fixture() -> (WeightGraph, SparseMatrix) {
    let g = graph(
        10,
        &[
            (2, 5, 0.8),
            (2, 6, 0.6),
            (7, 8, 0.9),
            (7, 9, 0.5),
            (5, 6, 0.4),
            (0, 1, 1.0),
            (1, 3, 0.7),
            (3, 4, 0.3),
            (4, 5, 0.2),
            (8, 9, 0.6),
            (0, 4, 0.5),
        ],
    );
    let items = SparseMatrix::from_triplets(1, 10, &[(0, 2, 4.0), (0, 7, 2.0)]).unwrap();
    (g, items)
}
