//! Rank energy statistic, Monte Carlo threshold calibration and the test
//! decision `reject iff mn/(m+n) * RE^2 >= c_{m,n}`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assign::{self, cost_matrix};
use crate::censored;
use crate::dataset::{Method, TestOutcome, TwoSampleData};
use crate::error::{out_of_range, Error, Result};
use crate::lds::{self, PointSet, SequenceKind};
use crate::matrix::{distance, Matrix};
use crate::rankmap::{self, RankAssignment, Standardization};
use crate::rng::{self, StreamRng, Tag};

/// `RE^2 = 2/(mn) sum ||Rx_i - Ry_j|| - 1/m^2 sum ||Rx_i - Rx_j|| - 1/n^2 sum ||Ry_i - Ry_j||`.
///
/// Both arms are ranked against the same pooled matching. The value is a
/// V-statistic of a negative-definite kernel, hence nonnegative up to rounding.
pub fn rank_energy_statistic(ra: &RankAssignment) -> f64 {
    let (rx, ry) = (&ra.ranks_x, &ra.ranks_y);
    let (m, n) = (rx.rows() as f64, ry.rows() as f64);
    let mut cross = 0.0;
    for a in rx.iter_rows() {
        for b in ry.iter_rows() {
            cross += distance(a, b);
        }
    }
    2.0 * cross / (m * n) - within_sum(rx) / (m * m) - within_sum(ry) / (n * n)
}

/// `sum_{i,j} ||r_i - r_j||` over ordered pairs, computed once per unordered pair.
fn within_sum(r: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..r.rows() {
        for j in i + 1..r.rows() {
            s += distance(r.row(i), r.row(j));
        }
    }
    2.0 * s
}

/// `mn/(m+n) * re2`, the quantity compared against the threshold.
pub fn scaled_statistic(re2: f64, m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    m * n / (m + n) * re2
}

/// Asymptotic thresholds for `alpha = 0.05` (row 0) and `0.10` (row 1), `d = 1..=6`.
const BUILT_IN_THRESHOLDS: [[f64; 6]; 2] = [
    [0.94, 1.12, 1.26, 1.37, 1.45, 1.54],
    [0.70, 0.92, 1.07, 1.17, 1.28, 1.37],
];

/// Built-in threshold for `(d, alpha)`, if tabulated.
pub fn table_threshold(d: usize, alpha: f64) -> Result<f64> {
    let row = if (alpha - 0.05).abs() < 1e-12 {
        0
    } else if (alpha - 0.10).abs() < 1e-12 {
        1
    } else {
        return Err(Error::ThresholdUnavailable { d, alpha });
    };
    match d {
        1..=6 => Ok(BUILT_IN_THRESHOLDS[row][d - 1]),
        _ => Err(Error::ThresholdUnavailable { d, alpha }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub runs: usize,
    pub kind: SequenceKind,
    pub seed: u64,
}

pub const DEFAULT_CALIBRATION_RUNS: usize = 10_000;
pub const MIN_CALIBRATION_RUNS: usize = 100;

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(out_of_range(
                "m, n",
                format!("{}, {}", self.m, self.n),
                ">= 1",
            ));
        }
        if self.d == 0 {
            return Err(out_of_range("d", self.d, ">= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(out_of_range("alpha", self.alpha, "(0, 1)"));
        }
        if self.runs < MIN_CALIBRATION_RUNS {
            return Err(out_of_range(
                "runs",
                self.runs,
                format!(">= {MIN_CALIBRATION_RUNS}"),
            ));
        }
        Ok(())
    }

    /// Cache key covering every field.
    pub fn key(&self) -> String {
        format!(
            "m={},n={},d={},alpha={},runs={},kind={},seed={}",
            self.m, self.n, self.d, self.alpha, self.runs, self.kind, self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub runs: usize,
    pub kind: SequenceKind,
    pub seed: u64,
    pub threshold: f64,
}

impl CalibrationEntry {
    pub fn params(&self) -> CalibrationParams {
        CalibrationParams {
            m: self.m,
            n: self.n,
            d: self.d,
            alpha: self.alpha,
            runs: self.runs,
            kind: self.kind,
            seed: self.seed,
        }
    }
}

/// Index (1-based) of the order statistic used as the `(1 - alpha)` quantile
/// of `runs` values: `ceil((1 - alpha) * runs)`, with a small guard so
/// `0.95 * 10000` is not pushed to 9501 by representation error.
pub fn quantile_rank(alpha: f64, runs: usize) -> usize {
    let k = ((1.0 - alpha) * runs as f64 - 1e-9).ceil() as usize;
    k.clamp(1, runs)
}

/// Empirical `(1 - alpha)` quantile of `null_stats` (inverse-CDF convention).
pub fn threshold_from_null(null_stats: &[f64], alpha: f64) -> f64 {
    let mut sorted = null_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[quantile_rank(alpha, sorted.len()) - 1]
}

const PILOT_SOLVES: usize = 4;

fn standard_normal_matrix(rng: &mut StreamRng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn null_sample(seed: u64, run: usize, m: usize, n: usize, d: usize) -> Matrix {
    let mut rng = rng::substream(seed, &[Tag::Str("null"), Tag::from(run)]);
    // arm x rows first, then arm y: the pooled sample in pooling order
    standard_normal_matrix(&mut rng, m + n, d)
}

/// Scaled null statistics for `params.runs` replicates, in replicate order.
///
/// Each replicate draws both arms from the standard `d`-variate normal in its
/// own substream `(seed, run)`, so the output does not depend on the number
/// of worker threads. For deterministic point sets the assignment solver is
/// warm-started from column prices averaged over a few pilot solves; this
/// changes speed only, not the optimal matching.
pub fn null_statistics(params: &CalibrationParams) -> Result<Vec<f64>> {
    params.validate()?;
    let CalibrationParams {
        m,
        n,
        d,
        runs,
        kind,
        seed,
        ..
    } = *params;
    let total = m + n;

    let fixed = if kind.is_random() {
        None
    } else {
        let ps = lds::generate(kind, total, d, 0)?;
        let mut prices = vec![0.0; total];
        for k in 0..PILOT_SOLVES {
            let mut rng = rng::substream(seed, &[Tag::Str("pilot"), Tag::from(k)]);
            let pilot = standard_normal_matrix(&mut rng, total, d);
            let cost = cost_matrix(&pilot, ps.points())?;
            let (_, p) = assign::solve_with_prices(&cost, &vec![0.0; total])?;
            let shift = p[0];
            for (acc, pj) in prices.iter_mut().zip(&p) {
                *acc += (pj - shift) / PILOT_SOLVES as f64;
            }
        }
        Some((ps, prices))
    };

    (0..runs)
        .into_par_iter()
        .map(|run| {
            let pooled = null_sample(seed, run, m, n, d);
            let (ps, assignment) = match &fixed {
                Some((ps, prices)) => {
                    let cost = cost_matrix(&pooled, ps.points())?;
                    let (a, _) = assign::solve_with_prices(&cost, prices)?;
                    (ps.clone(), a)
                }
                None => {
                    let key = rng::derive_key(seed, &[Tag::Str("points"), Tag::from(run)]);
                    let ps = lds::generate(kind, total, d, key)?;
                    let cost = cost_matrix(&pooled, ps.points())?;
                    (ps, assign::solve_cost_matrix(&cost)?)
                }
            };
            let ra = rankmap::ranks_from_assignment(m, &ps, assignment);
            Ok(scaled_statistic(rank_energy_statistic(&ra), m, n))
        })
        .collect()
}

/// Monte Carlo estimate of `c_{m,n}`: the `(1 - alpha)` quantile of `runs`
/// scaled statistics simulated under the null with standard normal arms.
pub fn calibrate_threshold(params: &CalibrationParams) -> Result<CalibrationEntry> {
    let stats = null_statistics(params)?;
    Ok(entry_from_null(params, &stats))
}

/// Entry for `params` from precomputed [`null_statistics`] of the same
/// `(m, n, d, runs, kind, seed)`; several alphas can share one simulation.
pub fn entry_from_null(params: &CalibrationParams, null_stats: &[f64]) -> CalibrationEntry {
    debug_assert_eq!(null_stats.len(), params.runs);
    CalibrationEntry {
        m: params.m,
        n: params.n,
        d: params.d,
        alpha: params.alpha,
        runs: params.runs,
        kind: params.kind,
        seed: params.seed,
        threshold: threshold_from_null(null_stats, params.alpha),
    }
}

/// Calibration results keyed by every input field, persistable as JSON.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CalibrationCache {
    entries: BTreeMap<String, CalibrationEntry>,
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a cache file; a missing file is an empty cache.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(source) => Err(Error::Io {
                path: path.to_path_buf(),
                source,
            }),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn get(&self, params: &CalibrationParams) -> Option<&CalibrationEntry> {
        self.entries.get(&params.key())
    }

    pub fn insert(&mut self, entry: CalibrationEntry) {
        self.entries.insert(entry.params().key(), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached entry, or a fresh calibration that is then cached.
    pub fn get_or_calibrate(&mut self, params: &CalibrationParams) -> Result<CalibrationEntry> {
        if let Some(e) = self.get(params) {
            return Ok(e.clone());
        }
        let entry = calibrate_threshold(params)?;
        self.insert(entry.clone());
        Ok(entry)
    }
}

/// Where the rejection threshold comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdSource {
    /// Built-in asymptotic table (`d <= 6`, `alpha` in {0.05, 0.10}).
    Table,
    /// Fresh Monte Carlo calibration at the data's `(m, n, d)`.
    Calibrate { runs: usize, seed: u64 },
    /// A precomputed calibration; must match the data's `(m, n, d)`, alpha and kind.
    Entry(CalibrationEntry),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankEnergyConfig {
    pub alpha: f64,
    pub kind: SequenceKind,
    /// Seed for the uniform point-set kind; ignored by the others.
    pub sequence_seed: u64,
    pub threshold: ThresholdSource,
    /// Standardize each endpoint on the pooled sample before ranking.
    pub standardize: bool,
}

impl RankEnergyConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            kind: SequenceKind::Sobol,
            sequence_seed: 0,
            threshold: ThresholdSource::Table,
            standardize: false,
        }
    }
}

fn resolve_threshold(
    m: usize,
    n: usize,
    d: usize,
    config: &RankEnergyConfig,
) -> Result<(f64, serde_json::Value)> {
    match &config.threshold {
        ThresholdSource::Table => {
            let t = table_threshold(d, config.alpha)?;
            Ok((t, json!({ "threshold_source": "table" })))
        }
        ThresholdSource::Calibrate { runs, seed } => {
            let entry = calibrate_threshold(&CalibrationParams {
                m,
                n,
                d,
                alpha: config.alpha,
                runs: *runs,
                kind: config.kind,
                seed: *seed,
            })?;
            Ok((
                entry.threshold,
                json!({ "threshold_source": "calibrated", "calibration": entry }),
            ))
        }
        ThresholdSource::Entry(entry) => {
            let matches = entry.m == m
                && entry.n == n
                && entry.d == d
                && entry.kind == config.kind
                && (entry.alpha - config.alpha).abs() < 1e-12;
            if !matches {
                return Err(Error::InvalidData(format!(
                    "calibration entry ({}) does not match m={m}, n={n}, d={d}, alpha={}, kind={}",
                    entry.params().key(),
                    config.alpha,
                    config.kind
                )));
            }
            Ok((
                entry.threshold,
                json!({ "threshold_source": "supplied", "calibration": entry }),
            ))
        }
    }
}

/// Rank-energy test on fully numeric arms (no censoring information).
pub(crate) fn decide_numeric(
    x: &Matrix,
    y: &Matrix,
    config: &RankEnergyConfig,
    mut meta: serde_json::Value,
) -> Result<TestOutcome> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(out_of_range("alpha", config.alpha, "(0, 1)"));
    }
    let (m, n, d) = (x.rows(), y.rows(), x.cols());
    let (threshold, provenance) = resolve_threshold(m, n, d, config)?;

    let (x, y) = if config.standardize {
        let s = Standardization::fit(x, y);
        (s.apply(x), s.apply(y))
    } else {
        (x.clone(), y.clone())
    };
    let ps: PointSet = lds::generate(config.kind, m + n, d, config.sequence_seed)?;
    let ra = rankmap::empirical_ranks(&x, &y, &ps)?;
    let statistic = rank_energy_statistic(&ra);
    let scaled = scaled_statistic(statistic, m, n);

    let obj = meta.as_object_mut().expect("meta is an object");
    obj.insert("m".into(), json!(m));
    obj.insert("n".into(), json!(n));
    obj.insert("d".into(), json!(d));
    obj.insert("point_set".into(), serde_json::to_value(&ra.point_set)?);
    obj.insert("standardized".into(), json!(config.standardize));
    if let serde_json::Value::Object(p) = provenance {
        obj.extend(p);
    }

    Ok(TestOutcome {
        method: Method::RankEnergy,
        statistic,
        scaled_statistic: Some(scaled),
        threshold,
        reject: scaled >= threshold,
        alpha: config.alpha,
        p_value: None,
        meta,
    })
}

/// Rank-energy test for datasets without a time-to-event endpoint.
pub fn decide(data: &TwoSampleData, config: &RankEnergyConfig) -> Result<TestOutcome> {
    if data.has_survival() {
        return Err(Error::Unsupported(
            "dataset has a time-to-event endpoint; use the survival route".into(),
        ));
    }
    decide_numeric(data.arm_x(), data.arm_y(), config, json!({}))
}

/// Rank-energy test for any dataset: a time-to-event endpoint is first
/// replaced by pooled Gehan scores.
pub fn rank_energy_test(data: &TwoSampleData, config: &RankEnergyConfig) -> Result<TestOutcome> {
    if data.has_survival() {
        censored::test_with_survival(data, config)
    } else {
        decide(data, config)
    }
}
