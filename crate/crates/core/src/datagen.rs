//! Seeded generators for the three simulation scenarios.
//!
//! Each call draws from one substream of `cfg.seed`; arm x rows come first,
//! then arm y, so identical configs give bit-identical data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{EndpointKind, TwoSampleData};
use crate::error::{out_of_range, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, StreamRng, Tag};

pub const SCENARIO1_MEAN: [f64; 8] = [1.0, 0.1, 0.2, 0.3, 0.1, 0.8, 0.1, 0.0];

pub const SCENARIO2_MEAN: [f64; 3] = [150.0, 6.0, 250.0];
pub const SCENARIO2_SHIFT: [f64; 3] = [10.0, 0.1, 10.0];
pub const SCENARIO2_COV: [[f64; 3]; 3] = [[100.0, 7.0, 0.6], [7.0, 1.0, 0.4], [0.6, 0.4, 225.0]];
pub const SCENARIO2_BETA: [f64; 3] = [0.1, 0.4, 0.1];
pub const SCENARIO2_INTERCEPT: f64 = -3.0;

pub const SCENARIO3_MEAN: [f64; 5] = [3.0, 2.0, 2.0, 1.0, 1.0];
pub const SCENARIO3_SHIFT: [f64; 5] = [1.0, 0.1, 0.0, 0.1, 0.2];
pub const SCENARIO3_BETA: [f64; 5] = [0.5, 0.2, 0.3, 0.3, 0.5];
pub const SCENARIO3_HAZARD: f64 = 0.1;
pub const SCENARIO3_CENSOR_MAX: f64 = 3.0;

pub const DEFAULT_ARM_SIZE: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: u8,
    pub m: usize,
    pub n: usize,
    /// Effect multiplier; the null is `r = 1` for scenario 1 and `r = 0` otherwise.
    pub r: f64,
    /// Equicorrelation of scenarios 1 and 3; ignored by scenario 2.
    pub rho: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn null_r(scenario: u8) -> f64 {
        if scenario == 1 {
            1.0
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.scenario) {
            return Err(out_of_range("scenario", self.scenario, "1, 2 or 3"));
        }
        if self.m == 0 || self.n == 0 {
            return Err(out_of_range(
                "m, n",
                format!("{}, {}", self.m, self.n),
                ">= 1",
            ));
        }
        if !self.r.is_finite() {
            return Err(out_of_range("r", self.r, "finite"));
        }
        if self.scenario != 1 && self.r < 0.0 {
            return Err(out_of_range("r", self.r, ">= 0"));
        }
        let dim = match self.scenario {
            1 => 8,
            3 => 5,
            _ => return Ok(()),
        };
        let lo = -1.0 / (dim as f64 - 1.0);
        if !(self.rho > lo && self.rho < 1.0) {
            return Err(out_of_range("rho", self.rho, format!("({lo:.4}, 1)")));
        }
        Ok(())
    }
}

/// Multivariate normal sampler through a Cholesky factor.
struct Gaussian {
    chol: DMatrix<f64>,
}

impl Gaussian {
    fn new(cov: DMatrix<f64>) -> Result<Self> {
        let chol = cov.cholesky().ok_or_else(|| {
            Error::InvalidData("covariance matrix is not positive definite".into())
        })?;
        Ok(Self { chol: chol.l() })
    }

    fn equicorrelated(d: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(
            d,
            d,
            |i, j| if i == j { 1.0 } else { rho },
        ))
    }

    fn sample(&self, rng: &mut StreamRng, mean: &[f64]) -> Vec<f64> {
        let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &self.chol * z;
        mean.iter().zip(v.iter()).map(|(m, v)| m + v).collect()
    }
}

fn stream(cfg: &ScenarioConfig) -> StreamRng {
    rng::substream(
        cfg.seed,
        &[Tag::Str("scenario"), Tag::from(cfg.scenario as u64)],
    )
}

fn names(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|k| format!("{prefix}{k}")).collect()
}

/// Scenario 1: `x ~ N(mu, S)`, `y ~ N(r mu, S)` in eight dimensions with
/// unit variances and equicorrelation `rho`.
pub fn gen_scenario1(cfg: &ScenarioConfig) -> Result<TwoSampleData> {
    cfg.validate()?;
    let g = Gaussian::equicorrelated(8, cfg.rho)?;
    let mut rng = stream(cfg);
    let shifted: Vec<f64> = SCENARIO1_MEAN.iter().map(|v| cfg.r * v).collect();
    let draw = |rng: &mut StreamRng, rows: usize, mean: &[f64]| {
        let data = (0..rows).flat_map(|_| g.sample(rng, mean)).collect();
        Matrix::from_vec(rows, 8, data).expect("sized")
    };
    let x = draw(&mut rng, cfg.m, &SCENARIO1_MEAN);
    let y = draw(&mut rng, cfg.n, &shifted);
    TwoSampleData::new(
        x,
        y,
        vec![EndpointKind::Continuous; 8],
        None,
        None,
        names("e", 1..=8),
    )
}

pub fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scenario 2: three correlated Gaussian endpoints (arm y shifted by
/// `-r nu`) and a binary endpoint with `P(1) = logistic(-3 + beta' x_{1..3})`.
pub fn gen_scenario2(cfg: &ScenarioConfig) -> Result<TwoSampleData> {
    cfg.validate()?;
    let g = Gaussian::new(DMatrix::from_fn(3, 3, |i, j| SCENARIO2_COV[i][j]))?;
    let mut rng = stream(cfg);
    let shifted: Vec<f64> = SCENARIO2_MEAN
        .iter()
        .zip(SCENARIO2_SHIFT)
        .map(|(m, v)| m - cfg.r * v)
        .collect();
    let draw = |rng: &mut StreamRng, rows: usize, mean: &[f64]| {
        let mut data = Vec::with_capacity(rows * 4);
        for _ in 0..rows {
            let c = g.sample(rng, mean);
            let eta = SCENARIO2_INTERCEPT
                + c.iter()
                    .zip(SCENARIO2_BETA)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            let u: f64 = rng.random();
            data.extend(c);
            data.push(if u < logistic(eta) { 1.0 } else { 0.0 });
        }
        Matrix::from_vec(rows, 4, data).expect("sized")
    };
    let x = draw(&mut rng, cfg.m, &SCENARIO2_MEAN);
    let y = draw(&mut rng, cfg.n, &shifted);
    let mut schema = vec![EndpointKind::Continuous; 3];
    schema.push(EndpointKind::Discrete);
    TwoSampleData::new(x, y, schema, None, None, names("e", 1..=4))
}

/// Inverse-CDF survival time under a constant baseline hazard:
/// `T = -log(u) / (lambda exp(eta))`.
pub fn survival_time(u: f64, lambda: f64, eta: f64) -> f64 {
    -u.ln() / (lambda * eta.exp())
}

/// Scenario 3: five equicorrelated Gaussian covariates (arm y shifted by
/// `-r nu`), a proportional-hazards survival time and `U(0, 3)` censoring.
/// The survival endpoint is column 0.
pub fn gen_scenario3(cfg: &ScenarioConfig) -> Result<TwoSampleData> {
    cfg.validate()?;
    let g = Gaussian::equicorrelated(5, cfg.rho)?;
    let mut rng = stream(cfg);
    let shifted: Vec<f64> = SCENARIO3_MEAN
        .iter()
        .zip(SCENARIO3_SHIFT)
        .map(|(m, v)| m - cfg.r * v)
        .collect();
    let draw = |rng: &mut StreamRng, rows: usize, mean: &[f64]| {
        let mut data = Vec::with_capacity(rows * 6);
        let mut events = Vec::with_capacity(rows);
        for _ in 0..rows {
            let cov = g.sample(rng, mean);
            let eta: f64 = cov.iter().zip(SCENARIO3_BETA).map(|(a, b)| a * b).sum();
            // 1 - U lies in (0, 1], keeping the log finite
            let u = 1.0 - rng.random::<f64>();
            let t = survival_time(u, SCENARIO3_HAZARD, eta);
            let c = SCENARIO3_CENSOR_MAX * rng.random::<f64>();
            data.push(t.min(c));
            data.extend(cov);
            events.push(t <= c);
        }
        (Matrix::from_vec(rows, 6, data).expect("sized"), events)
    };
    let (x, ex) = draw(&mut rng, cfg.m, &SCENARIO3_MEAN);
    let (y, ey) = draw(&mut rng, cfg.n, &shifted);
    let mut schema = vec![EndpointKind::TimeToEvent];
    schema.extend([EndpointKind::Continuous; 5]);
    let mut cols = vec!["time".to_string()];
    cols.extend(names("x", 2..=6));
    TwoSampleData::new(x, y, schema, Some(ex), Some(ey), cols)
}

pub fn gen_scenario(cfg: &ScenarioConfig) -> Result<TwoSampleData> {
    match cfg.scenario {
        1 => gen_scenario1(cfg),
        2 => gen_scenario2(cfg),
        3 => gen_scenario3(cfg),
        s => Err(out_of_range("scenario", s, "1, 2 or 3")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(scenario: u8, m: usize, r: f64, rho: f64) -> ScenarioConfig {
        ScenarioConfig {
            scenario,
            m,
            n: m,
            r,
            rho,
            seed: 17,
        }
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn deterministic() {
        for s in 1..=3 {
            let c = cfg(s, 20, 0.5 + f64::from(s == 1), 0.3);
            assert_eq!(gen_scenario(&c).unwrap(), gen_scenario(&c).unwrap());
            let other = ScenarioConfig { seed: 18, ..c };
            assert_ne!(gen_scenario(&c).unwrap(), gen_scenario(&other).unwrap());
        }
    }

    #[test]
    fn validation() {
        assert!(gen_scenario(&cfg(4, 5, 0.0, 0.3)).is_err());
        assert!(gen_scenario(&cfg(1, 5, 1.0, 1.0)).is_err());
        assert!(gen_scenario(&cfg(1, 5, 1.0, -0.2)).is_err());
        assert!(gen_scenario(&cfg(3, 5, 0.0, -0.2)).is_ok());
        assert!(gen_scenario(&cfg(2, 5, -0.5, 0.0)).is_err());
        assert!(gen_scenario(&cfg(2, 0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn scenario1_moments() {
        let d = gen_scenario1(&ScenarioConfig {
            n: 10,
            ..cfg(1, 100_000, 1.0, 0.3)
        })
        .unwrap();
        let x = d.arm_x();
        let means: Vec<f64> = (0..8).map(|k| mean(&x.column(k))).collect();
        for (k, mu) in SCENARIO1_MEAN.iter().enumerate() {
            assert!((means[k] - mu).abs() < 0.02, "endpoint {k}");
        }
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (x.column(i), x.column(j));
                let cov = a
                    .iter()
                    .zip(&b)
                    .map(|(p, q)| (p - means[i]) * (q - means[j]))
                    .sum::<f64>()
                    / (a.len() - 1) as f64;
                let want = if i == j { 1.0 } else { 0.3 };
                assert!((cov - want).abs() < 0.02, "({i}, {j}) = {cov}");
            }
        }
    }

    #[test]
    fn scenario1_last_endpoint_unshifted() {
        let d = gen_scenario1(&cfg(1, 20_000, 3.0, 0.0)).unwrap();
        assert!((mean(&d.arm_y().column(7))).abs() < 0.03);
        assert!((mean(&d.arm_y().column(0)) - 3.0).abs() < 0.03);
    }

    #[test]
    fn scenario2_layout() {
        let d = gen_scenario2(&ScenarioConfig {
            n: 10,
            ..cfg(2, 100_000, 0.0, 0.0)
        })
        .unwrap();
        assert_eq!(d.schema()[3], EndpointKind::Discrete);
        assert!((mean(&d.arm_x().column(0)) - 150.0).abs() < 0.15);
        assert!(d.arm_x().column(3).iter().all(|v| *v == 0.0 || *v == 1.0));
        assert_abs_diff_eq!(logistic(SCENARIO2_INTERCEPT), 0.047_425_873, epsilon = 1e-9);
        let dy = gen_scenario2(&cfg(2, 20_000, 1.0, 0.0)).unwrap();
        assert!((mean(&dy.arm_y().column(0)) - 140.0).abs() < 0.3);
    }

    #[test]
    fn survival_time_example() {
        assert_abs_diff_eq!(
            survival_time((-1.0f64).exp(), 0.1, 0.0),
            10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scenario3_layout() {
        let d = gen_scenario3(&cfg(3, 500, 0.0, 0.6)).unwrap();
        assert_eq!(d.schema()[0], EndpointKind::TimeToEvent);
        assert_eq!(d.d(), 6);
        let ev = d.pooled_events().unwrap();
        let times = d.pooled().column(0);
        for (t, e) in times.iter().zip(&ev) {
            assert!(*t >= 0.0);
            if !e {
                assert!(*t <= SCENARIO3_CENSOR_MAX);
            }
        }
        let frac = d.censoring_fraction().unwrap();
        assert!(frac > 0.0 && frac < 1.0, "{frac}");
    }
}
