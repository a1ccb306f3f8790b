#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use tuckerscf_core::cross::{cross_approximate, CrossOptions, FnOracle, TuckerMap};
use tuckerscf_core::Grid;

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn low_rank_inputs_are_recovered(n in 10usize..30, ranks in prop::array::uniform3(1usize..6), seed in any::<u64>()) {
        let a = common::random_tucker(n, ranks, &mut common::rng(seed));
        let oracle = TuckerMap::new(vec![&a], |v| v[0]);
        let (t, report) = cross_approximate(&oracle, &CrossOptions::new(1e-10).with_seed(seed)).unwrap();
        prop_assert!(report.converged);
        prop_assert!(t.to_dense().rel_error(&a.to_dense()) < 1e-9);
        for m in 0..3 {
            prop_assert!(t.ranks()[m] <= ranks[m].min(n));
        }
    }

    #[test]
    fn pointwise_products_match_dense(n in 12usize..24, seed in any::<u64>()) {
        let grid = Grid::new(3.0, n);
        let mut rng = common::rng(seed);
        let f = common::smooth_function(grid, 2, &mut rng);
        let g = common::smooth_function(grid, 2, &mut rng);
        let oracle = TuckerMap::new(vec![&f, &g], |v| v[0] * v[1]);
        let (t, _) = cross_approximate(&oracle, &CrossOptions::new(1e-9).with_seed(seed)).unwrap();
        let exact = f.to_dense().hadamard(&g.to_dense());
        prop_assert!(t.to_dense().rel_error(&exact) < 1e-8);
    }
}

#[test]
fn same_seed_gives_the_same_result() {
    let f = |i: usize, j: usize, k: usize| 1.0 / (1.0 + (i * i + 2 * j * j + k * k) as f64 / 50.0);
    let opts = CrossOptions::new(1e-8).with_seed(7);
    let (a, ra) = cross_approximate(&FnOracle::new(30, f), &opts).unwrap();
    let (b, rb) = cross_approximate(&FnOracle::new(30, f), &opts).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.core(), b.core());
}

#[test]
fn evaluation_count_grows_almost_linearly() {
    let sizes = [64usize, 128, 256, 512];
    let mut counts = Vec::new();
    for &n in &sizes {
        let grid = Grid::new(6.0, n);
        let x = grid.centers();
        let f = move |i: usize, j: usize, k: usize| (-(x[i] * x[i] + x[j] * x[j] + x[k] * x[k]).sqrt()).exp();
        let (_, report) = cross_approximate(&FnOracle::new(n, f), &CrossOptions::new(1e-7)).unwrap();
        assert!(report.converged, "n = {n}: {report:?}");
        counts.push(report.evaluations as f64);
    }
    let x: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let p = loglog_slope(&x, &counts);
    assert!(p <= 1.2, "evaluation exponent {p}, counts {counts:?}");
}
