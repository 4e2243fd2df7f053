//! Cold versus price-warm-started assignment solves on Gaussian samples
//! matched to Sobol points.
//!
//! cargo run --release --example lap_bench

use mvrank_core::assign::{cost_matrix, solve_cost_matrix, solve_with_prices};
use mvrank_core::lds::sobol;
use mvrank_core::matrix::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(
        n,
        d,
        (0..n * d).map(|_| StandardNormal.sample(rng)).collect(),
    )
    .unwrap()
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, d) in [(100, 8), (400, 1), (400, 2), (400, 6)] {
        let ps = sobol(n, d, 1).unwrap();
        let pilots = 8;
        let mut prices = vec![0.0; n];
        for _ in 0..pilots {
            let cost = cost_matrix(&gaussian(&mut rng, n, d), ps.points()).unwrap();
            let (_, p) = solve_with_prices(&cost, &vec![0.0; n]).unwrap();
            for (a, b) in prices.iter_mut().zip(&p) {
                *a += (b - p[0]) / pilots as f64;
            }
        }
        let reps = 50;
        let (mut cold, mut warm) = (0.0, 0.0);
        for _ in 0..reps {
            let cost = cost_matrix(&gaussian(&mut rng, n, d), ps.points()).unwrap();
            let t = std::time::Instant::now();
            let a = solve_cost_matrix(&cost).unwrap();
            cold += t.elapsed().as_secs_f64();
            let t = std::time::Instant::now();
            let (b, _) = solve_with_prices(&cost, &prices).unwrap();
            warm += t.elapsed().as_secs_f64();
            assert_eq!(a.perm, b.perm);
        }
        let ms = |s: f64| s * 1000.0 / reps as f64;
        println!(
            "n={n} d={d}: cold {:.3} ms, warm {:.3} ms",
            ms(cold),
            ms(warm)
        );
    }
}
