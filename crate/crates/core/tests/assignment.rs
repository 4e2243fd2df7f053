use std::time::Instant;

use mvrank_core::assign::{self, AssignmentProblem, CostMatrix};
use mvrank_core::lds::{self, SequenceKind};
use mvrank_core::matrix::Matrix;
use mvrank_core::rankmap::empirical_ranks;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap()
}

#[test]
fn solver_matches_brute_force_on_random_geometric_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    for _ in 0..200 {
        let n = rng.random_range(1..=7);
        let d = rng.random_range(1..=3);
        let sources = random_matrix(&mut rng, n, d);
        let targets = random_matrix(&mut rng, n, d);
        let problem = AssignmentProblem::new(&sources, &targets).unwrap();
        let fast = assign::solve_lap(&problem).unwrap();
        let slow = assign::brute_force_lap(&problem).unwrap();
        let cost = problem.cost_matrix();
        assert_eq!(
            cost.total(&fast.perm),
            cost.total(&slow.perm),
            "n={n} d={d}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn solver_matches_brute_force_on_tied_integer_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let n = rng.random_range(1..=6);
        let data = (0..n * n)
            .map(|_| f64::from(rng.random_range(0..4u8)))
            .collect();
        let cost = CostMatrix::from_vec(n, data).unwrap();
        let fast = assign::solve_cost_matrix(&cost).unwrap();
        let slow = assign::brute_force_cost_matrix(&cost).unwrap();
        assert_eq!(fast.total_cost, slow.total_cost);
    }
}

#[test]
fn one_dimensional_ranks_follow_sorted_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let m = rng.random_range(1..=25);
        let n = rng.random_range(1..=25);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let kind = SequenceKind::ALL[case % 4];
        let ps = lds::generate(kind, m + n, 1, case as u64).unwrap();
        let ra = empirical_ranks(
            &Matrix::from_vec(m, 1, x.clone()).unwrap(),
            &Matrix::from_vec(n, 1, y.clone()).unwrap(),
            &ps,
        )
        .unwrap();

        let pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
        let mut order: Vec<usize> = (0..m + n).collect();
        order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
        let mut points = ps.points().column(0);
        points.sort_by(f64::total_cmp);
        let mut want = vec![0.0; m + n];
        for (k, &i) in order.iter().enumerate() {
            want[i] = points[k];
        }
        let got: Vec<f64> = ra
            .ranks_x
            .column(0)
            .into_iter()
            .chain(ra.ranks_y.column(0))
            .collect();
        assert_eq!(got, want, "case {case}");
    }
}

proptest! {
    #[test]
    fn solution_is_a_permutation_no_worse_than_any_other(
        n in 1usize..=6,
        seed in any::<u64>(),
        shuffle_seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = CostMatrix::from_vec(n, (0..n * n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let a = assign::solve_cost_matrix(&cost).unwrap();
        let mut seen = vec![false; n];
        for &j in &a.perm {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
        let mut other: Vec<usize> = (0..n).collect();
        let mut srng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        for i in (1..n).rev() {
            other.swap(i, srng.random_range(0..=i));
        }
        prop_assert!(a.total_cost <= cost.total(&other) + 1e-9);
    }

    #[test]
    fn warm_start_reaches_the_same_optimum(
        n in 1usize..=30,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = CostMatrix::from_vec(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let prices: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cold = assign::solve_cost_matrix(&cost).unwrap();
        let (warm, _) = assign::solve_with_prices(&cost, &prices).unwrap();
        prop_assert!((cold.total_cost - warm.total_cost).abs() < 1e-9);
    }
}
