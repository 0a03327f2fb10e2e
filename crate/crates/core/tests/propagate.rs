mod common;

use common::*;
use harmonic_rank_core::propagate::{local_support, SoftSystem};
use harmonic_rank_core::solver::LinearOperator;
use harmonic_rank_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn tight(mu_bar: f64, bregman_iters: usize) -> ModelParams {
    ModelParams {
        mu_bar,
        bregman_iters,
        solver_tol: 1e-12,
        solver_maxit: 5000,
        ..ModelParams::default()
    }
}

fn solve(g: &WeightGraph, labeled: &[usize], values: &[f64], p: &ModelParams) -> (Vec<f64>, ItemOutcome) {
    let lap = build_laplacian(g).unwrap();
    let sys = ItemSystem::new(0, labeled.to_vec(), values.to_vec()).unwrap();
    let (sys, out) = solve_item(&lap, sys, p).unwrap();
    (sys.f, out)
}

#[test]
fn soft_operator_matches_dense_matrix() {
    let fx = random_fixture(4);
    let m = fx.graph.len();
    let lap = build_laplacian(&fx.graph).unwrap();
    let sys = SoftSystem::new(lap, &fx.labeled, 3.5);
    let w = dense_weights(&fx.graph);
    let mut rng = StdRng::seed_from_u64(1);
    let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; m];
    sys.apply(&x, &mut y);
    for i in 0..m {
        let deg: f64 = (0..m).map(|j| w[i * m + j]).sum();
        let mut want = deg * x[i] - (0..m).map(|j| w[i * m + j] * x[j]).sum::<f64>();
        want += 3.5 * fx.labeled.iter().map(|&l| w[i * m + l] * x[l]).sum::<f64>();
        assert!((y[i] - want).abs() < 1e-12);
    }
}

#[test]
fn solve_item_matches_dense_oracle() {
    for seed in 0..20 {
        let fx = random_fixture(seed);
        for (mu, iters) in [(1.0, 1), (100.0, 3), (1e4, 2)] {
            let (f, _) = solve(&fx.graph, &fx.labeled, &fx.values, &tight(mu, iters));
            let (want, _) = dense_bregman(&fx.graph, &fx.labeled, &fx.values, mu, iters);
            let err = rel_err(&f, &want);
            assert!(err < 1e-6, "seed {seed} mu {mu}: rel err {err}");
        }
    }
}

#[test]
fn path_soft_solution_at_large_mu() {
    // The soft system keeps the Laplacian row of each labeled node, so its
    // large-mu limit is flat next to the boundary: (0, 0, 0.5, 1, 1).
    let g = path(5);
    let (f, _) = solve(&g, &[0, 4], &[0.0, 1.0], &tight(1e6, 3));
    let (oracle, _) = dense_bregman(&g, &[0, 4], &[0.0, 1.0], 1e6, 3);
    for (a, b) in f.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6);
    }
    for (a, b) in f.iter().zip([0.0, 0.0, 0.5, 1.0, 1.0]) {
        assert!((a - b).abs() < 1e-3, "{f:?}");
    }
}

#[test]
fn bregman_residual_decreases_when_strongly_coupled() {
    for seed in 0..20 {
        let fx = random_fixture(seed);
        let (_, out) = solve(&fx.graph, &fx.labeled, &fx.values, &tight(1e6, 5));
        for w in out.labeled_residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {:?}", out.labeled_residuals);
        }
        let (_, hist) = dense_bregman(&fx.graph, &fx.labeled, &fx.values, 1e6, 5);
        for (a, b) in out.labeled_residuals.iter().zip(&hist) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn constant_boundary_is_preserved() {
    for seed in 0..10 {
        let fx = random_fixture(100 + seed);
        let c = vec![3.0; fx.labeled.len()];
        let (f, _) = solve(&fx.graph, &fx.labeled, &c, &ModelParams::default());
        assert!(f.iter().all(|v| (v - 3.0).abs() < 1e-5), "seed {seed}");
    }
}

#[test]
fn discrete_harmonic_on_path() {
    let f = discrete_harmonic(&path(5), &[0, 4], &[0.0, 1.0]).unwrap();
    for (a, b) in f.iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn discrete_harmonic_matches_dense_oracle_and_max_principle() {
    for seed in 0..20 {
        let fx = random_fixture(seed);
        let f = discrete_harmonic(&fx.graph, &fx.labeled, &fx.values).unwrap();
        let want = dense_harmonic(&fx.graph, &fx.labeled, &fx.values);
        assert!(rel_err(&f, &want) < 1e-9);
        let lo = fx.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fx.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(f.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}

#[test]
fn laplacian_is_psd_with_zero_row_sums() {
    let mut rng = StdRng::seed_from_u64(9);
    for seed in 0..10 {
        let fx = random_fixture(seed);
        let lap = build_laplacian(&fx.graph).unwrap();
        let m = lap.len();
        let mut y = vec![0.0; m];
        lap.apply(&vec![1.0; m], &mut y);
        let dmax = fx.graph.degrees.iter().cloned().fold(0.0, f64::max);
        assert!(y.iter().all(|v| v.abs() <= 1e-10 * dmax));
        for _ in 0..100 {
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n2: f64 = x.iter().map(|v| v * v).sum();
            assert!(lap.quadratic_form(&x) >= -1e-10 * n2);
        }
    }
}

#[test]
fn relabeling_users_permutes_the_solution() {
    let fx = random_fixture(21);
    let m = fx.graph.len();
    let mut rng = StdRng::seed_from_u64(2);
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let t: Vec<_> = fx.graph.w.triplets().map(|(i, j, w)| (perm[i], perm[j], w)).collect();
    let pg = WeightGraph::from_matrix(SparseMatrix::from_triplets(m, m, &t).unwrap()).unwrap();
    let mut pl: Vec<(usize, f64)> = fx.labeled.iter().zip(&fx.values).map(|(&l, &v)| (perm[l], v)).collect();
    pl.sort_by_key(|p| p.0);
    let (lab, vals): (Vec<usize>, Vec<f64>) = pl.into_iter().unzip();
    let p = tight(1.0, 1);
    let (f, _) = solve(&fx.graph, &fx.labeled, &fx.values, &p);
    let (pf, _) = solve(&pg, &lab, &vals, &p);
    for i in 0..m {
        assert!((pf[perm[i]] - f[i]).abs() < 1e-8);
    }
}

/// Users 0..4 share profile A, 5..9 profile B; four items.
fn block_ratings() -> SparseMatrix {
    let mut t = Vec::new();
    for u in 0..10 {
        let base = if u < 5 { [5.0, 4.0, 1.0, 2.0] } else { [1.0, 2.0, 5.0, 4.0] };
        for (j, &b) in base.iter().enumerate() {
            // leave out one rating per user, rotating over items
            if (u + j) % 4 != 0 {
                t.push((u, j, b + 0.01 * ((u * 7 + j * 3) % 5) as f64));
            }
        }
    }
    SparseMatrix::from_triplets(10, 4, &t).unwrap()
}

#[test]
fn harmonic_extension_matches_dense_oracle_on_block_matrix() {
    let a = block_ratings();
    let knn = KnnParams {
        k: 3,
        max_comparisons: 10,
        ..KnnParams::default()
    };
    let p = tight(1.0, 1);
    let r = harmonic_extension(&a, &knn, &p, &Sequential).unwrap();
    let g = build_weight_matrix(&a, &knn, &Sequential).unwrap();
    let items = a.transpose();
    for j in 0..4 {
        let row = items.row(j);
        let (want, _) = dense_bregman(&g, row.indices, row.values, 1.0, 1);
        for u in 0..10 {
            let got = r.get(u, j).unwrap();
            let expect = if row.indices.contains(&u) { a.get(u, j) } else { want[u] };
            assert!((got - expect).abs() <= 1e-6 * expect.abs().max(1.0), "({u},{j})");
        }
    }
}

#[test]
fn full_matrix_is_returned_unchanged() {
    let t: Vec<_> = (0..6).flat_map(|u| (0..3).map(move |j| (u, j, 1.0 + ((u + j) % 5) as f64))).collect();
    let a = SparseMatrix::from_triplets(6, 3, &t).unwrap();
    let knn = KnnParams {
        k: 2,
        max_comparisons: 6,
        ..KnnParams::default()
    };
    let r = harmonic_extension(&a, &knn, &ModelParams::default(), &Sequential).unwrap();
    for (u, j, v) in a.triplets() {
        assert_eq!(r.get(u, j), Some(v));
    }
}

#[test]
fn twin_user_inherits_rating() {
    // users 0 and 1 are identical except 1 has not rated item 2
    let a = SparseMatrix::from_triplets(
        4,
        3,
        &[
            (0, 0, 5.0),
            (0, 1, 3.0),
            (0, 2, 4.0),
            (1, 0, 5.0),
            (1, 1, 3.0),
            (2, 0, 1.0),
            (2, 2, 2.0),
            (3, 1, 1.0),
            (3, 2, 1.0),
        ],
    )
    .unwrap();
    let knn = KnnParams {
        k: 1,
        max_comparisons: 4,
        ..KnnParams::default()
    };
    let g = build_weight_matrix(&a, &knn, &Sequential).unwrap();
    // 0's nearest neighbour is 1 and vice versa: the pair forms its own component
    assert_eq!(g.w.row(1).indices, &[0]);
    let r = harmonic_extension(&a, &knn, &tight(1.0, 1), &Sequential).unwrap();
    assert!((r.get(1, 2).unwrap() - 4.0).abs() < 1e-6);
}

#[test]
fn empty_items_are_flagged_not_imputed() {
    let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 4.0), (1, 0, 2.0), (2, 1, 3.0), (0, 1, 1.0)]).unwrap();
    let knn = KnnParams {
        k: 2,
        max_comparisons: 3,
        ..KnnParams::default()
    };
    let r = harmonic_extension(&a, &knn, &ModelParams::default(), &Sequential).unwrap();
    assert!(r.outcomes[2].is_none());
    assert!((0..3).all(|u| r.get(u, 2).is_none()));
}

#[test]
fn second_outer_pass_runs_on_completed_rows() {
    let a = block_ratings();
    let knn = KnnParams {
        k: 3,
        max_comparisons: 10,
        ..KnnParams::default()
    };
    let p = ModelParams {
        outer_iters: 2,
        ..tight(1.0, 1)
    };
    let r = harmonic_extension(&a, &knn, &p, &Sequential).unwrap();
    for (u, j, v) in a.triplets() {
        assert_eq!(r.get(u, j), Some(v));
    }
    assert_eq!(r.predicted_count(), 40);
}

#[test]
fn localized_equals_global_when_support_is_everything() {
    for seed in 0..5 {
        let fx = random_fixture(300 + seed);
        let m = fx.graph.len();
        // complete graph: every node neighbours every labeled node
        let mut rng = StdRng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                edges.push((i, j, rng.gen_range(0.1..1.0)));
            }
        }
        let g = graph(m, &edges);
        let items = SparseMatrix::from_triplets(
            1,
            m,
            &fx.labeled.iter().zip(&fx.values).map(|(&l, &v)| (0, l, v)).collect::<Vec<_>>(),
        )
        .unwrap();
        let p = tight(1.0, 1);
        let global = solve_all_items(&g, &items, &p, &Sequential).unwrap();
        let local = localized_extension(&g, &items, &p, &Sequential).unwrap();
        assert_eq!(local.outcomes[0].as_ref().unwrap().system_dim, m);
        for u in 0..m {
            assert!((global.get(u, 0).unwrap() - local.get(u, 0).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn localized_isolated_label_predicts_only_itself() {
    let g = graph(4, &[(1, 2, 1.0), (2, 3, 1.0)]);
    let items = SparseMatrix::from_triplets(1, 4, &[(0, 0, 4.0)]).unwrap();
    assert_eq!(local_support(&g, &[0]), vec![0]);
    let r = localized_extension(&g, &items, &ModelParams::default(), &Sequential).unwrap();
    assert_eq!(r.get(0, 0), Some(4.0));
    assert!((1..4).all(|u| r.get(u, 0).is_none()));
}

#[test]
fn localized_ten_user_fixture() {
    let (g, items) = ten_user_fixture();
    assert_eq!(local_support(&g, &[2, 7]), vec![2, 5, 6, 7, 8, 9]);
    let r = localized_extension(&g, &items, &ModelParams::default(), &Sequential).unwrap();
    assert_eq!(r.outcomes[0].as_ref().unwrap().system_dim, 6);
    for u in [0, 1, 3, 4] {
        assert!(r.get(u, 0).is_none());
    }
    for u in [2, 5, 6, 7, 8, 9] {
        assert!(r.get(u, 0).is_some());
    }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    struct Reversed;
    impl Executor for Reversed {
        fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
        where
            T: Send,
            F: Fn(usize) -> T + Sync + Send,
        {
            let mut out: Vec<(usize, T)> = (0..n).rev().map(|i| (i, f(i))).collect();
            out.reverse();
            out.into_iter().map(|p| p.1).collect()
        }
    }
    let a = block_ratings();
    let knn = KnnParams {
        k: 3,
        max_comparisons: 10,
        ..KnnParams::default()
    };
    let p = ModelParams::default();
    assert_eq!(
        harmonic_extension(&a, &knn, &p, &Sequential).unwrap(),
        harmonic_extension(&a, &knn, &p, &Reversed).unwrap()
    );
}

