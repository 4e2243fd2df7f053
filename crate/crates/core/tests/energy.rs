use mvrank_core::censored::test_with_survival;
use mvrank_core::dataset::{EndpointKind, TwoSampleData};
use mvrank_core::energy::{
    calibrate_threshold, decide, rank_energy_statistic, CalibrationParams, RankEnergyConfig,
    ThresholdSource,
};
use mvrank_core::lds::{self, SequenceKind};
use mvrank_core::matrix::Matrix;
use mvrank_core::rankmap::empirical_ranks;
use mvrank_core::rng::{substream, Tag};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

fn matrix(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| f()).collect()).unwrap()
}

#[test]
fn statistic_is_symmetric_in_the_arms() {
    for seed in 0..30u64 {
        let mut rng = substream(seed, &[Tag::Str("sym")]);
        let (m, d) = (rng.random_range(2..12), rng.random_range(1..4));
        let x = matrix(m, d, || rng.sample(StandardNormal));
        let y = matrix(m, d, || rng.sample::<f64, _>(StandardNormal) + 0.5);
        let ps = lds::sobol(2 * m, d, 1).unwrap();
        let a = rank_energy_statistic(&empirical_ranks(&x, &y, &ps).unwrap());
        let b = rank_energy_statistic(&empirical_ranks(&y, &x, &ps).unwrap());
        assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn thresholds_increase_with_dimension_and_decrease_with_alpha() {
    let base = CalibrationParams {
        m: 30,
        n: 30,
        d: 1,
        alpha: 0.05,
        runs: 1000,
        kind: SequenceKind::Sobol,
        seed: 3,
    };
    let mut last = 0.0;
    for d in 1..=4 {
        let t05 = calibrate_threshold(&CalibrationParams { d, ..base })
            .unwrap()
            .threshold;
        let t10 = calibrate_threshold(&CalibrationParams {
            d,
            alpha: 0.10,
            ..base
        })
        .unwrap()
        .threshold;
        assert!(t05 >= t10, "d={d}");
        assert!(t05 > last, "d={d}: {t05} <= {last}");
        last = t05;
    }
}

#[test]
fn survival_scores_match_raw_times_without_censoring() {
    for seed in 0..50u64 {
        let mut rng = substream(seed, &[Tag::Str("surv-d1")]);
        let (m, n) = (rng.random_range(2..15), rng.random_range(2..15));
        let x = matrix(m, 1, || rng.sample(Exp1));
        let y = matrix(n, 1, || rng.sample::<f64, _>(Exp1) * 1.5);
        let surv = TwoSampleData::new(
            x.clone(),
            y.clone(),
            vec![EndpointKind::TimeToEvent],
            Some(vec![true; m]),
            Some(vec![true; n]),
            vec!["t".into()],
        )
        .unwrap();
        let cfg = RankEnergyConfig::new(0.05);
        let a = test_with_survival(&surv, &cfg).unwrap();
        let b = decide(&TwoSampleData::continuous(x, y).unwrap(), &cfg).unwrap();
        assert_eq!(a.reject, b.reject, "seed {seed}");
        assert!((a.statistic - b.statistic).abs() < 1e-12, "seed {seed}");
    }
}

/// Null rejection rate of the calibrated test for arms drawn by `draw`.
fn null_rate(label: &str, draw: impl Fn(&mut mvrank_core::rng::StreamRng) -> f64) -> f64 {
    let (m, n, d, reps) = (20, 20, 2, 1000);
    let entry = calibrate_threshold(&CalibrationParams {
        m,
        n,
        d,
        alpha: 0.05,
        runs: 4000,
        kind: SequenceKind::Sobol,
        seed: 8,
    })
    .unwrap();
    let cfg = RankEnergyConfig {
        threshold: ThresholdSource::Entry(entry),
        ..RankEnergyConfig::new(0.05)
    };
    let rejections = (0..reps)
        .filter(|&r| {
            let mut rng = substream(r as u64, &[Tag::Str(label)]);
            let x = matrix(m, d, || draw(&mut rng));
            let y = matrix(n, d, || draw(&mut rng));
            decide(&TwoSampleData::continuous(x, y).unwrap(), &cfg)
                .unwrap()
                .reject
        })
        .count();
    rejections as f64 / reps as f64
}

#[test]
fn size_does_not_depend_on_the_null_distribution() {
    let normal = null_rate("normal", |rng| rng.sample(StandardNormal));
    let exponential = null_rate("exponential", |rng| rng.sample(Exp1));
    for rate in [normal, exponential] {
        assert!(
            (0.037..=0.065).contains(&rate),
            "normal {normal}, exponential {exponential}"
        );
    }
}
