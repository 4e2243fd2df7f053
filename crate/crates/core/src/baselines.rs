//! Comparator global tests built on pairwise rank scores: O'Brien's summed
//! ranks, Wittkowski's scores and the Finkelstein-Schoenfeld hierarchy.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::censored::{gehan_pair_score, gehan_scores, SurvivalColumn};
use crate::dataset::{Method, TestOutcome, TwoSampleData};
use crate::error::{out_of_range, Error, Result};
use crate::rng::{self, Tag};

/// Per-endpoint scores in {-1, 0, +1} for one pair of subjects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairScoreVector(pub Vec<i8>);

impl PairScoreVector {
    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }
}

/// Scores of subject `a` against subject `b`. When `survival` carries the
/// event indicators `(e_a, e_b)`, endpoint 0 is compared by Gehan's rule.
pub fn pair_scores(a: &[f64], b: &[f64], survival: Option<(bool, bool)>) -> PairScoreVector {
    let mut r: Vec<i8> = a
        .iter()
        .zip(b)
        .map(|(u, v)| i8::from(u > v) - i8::from(u < v))
        .collect();
    if let Some((ea, eb)) = survival {
        r[0] = gehan_pair_score(a[0], ea, b[0], eb);
    }
    PairScoreVector(r)
}

/// The map `phi` collapsing a score vector into one pairwise preference.
#[derive(Clone, Debug, PartialEq)]
pub enum ScoreMap {
    /// `sum_k w_k r_k`; `None` means unit weights.
    ObrienSum { weights: Option<Vec<f64>> },
    /// `1(max r > 0) - 1(min r < 0)`.
    WittkowskiAll,
    /// Sign of `sum_k r_k`: +1 when more endpoints favour the first subject.
    WittkowskiMajority,
    /// First nonzero score in endpoint order.
    FinkelsteinSchoenfeld,
}

impl ScoreMap {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ObrienSum { .. } => "obrien_sum",
            Self::WittkowskiAll => "wittkowski_all",
            Self::WittkowskiMajority => "wittkowski_majority",
            Self::FinkelsteinSchoenfeld => "finkelstein_schoenfeld",
        }
    }

    pub fn apply(&self, r: &[i8]) -> f64 {
        match self {
            Self::ObrienSum { weights: None } => r.iter().map(|&v| f64::from(v)).sum(),
            Self::ObrienSum { weights: Some(w) } => {
                r.iter().zip(w).map(|(&v, w)| f64::from(v) * w).sum()
            }
            Self::WittkowskiAll => {
                let up = r.iter().any(|&v| v > 0);
                let down = r.iter().any(|&v| v < 0);
                f64::from(i8::from(up) - i8::from(down))
            }
            Self::WittkowskiMajority => {
                let s: i32 = r.iter().map(|&v| i32::from(v)).sum();
                f64::from(s.signum())
            }
            Self::FinkelsteinSchoenfeld => {
                r.iter().find(|&&v| v != 0).map_or(0.0, |&v| f64::from(v))
            }
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        if let Self::ObrienSum { weights: Some(w) } = self {
            if w.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(out_of_range("weight", bad, "finite and >= 0"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ScoreMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "obrien_sum" => Ok(Self::ObrienSum { weights: None }),
            "wittkowski_all" => Ok(Self::WittkowskiAll),
            "wittkowski_majority" => Ok(Self::WittkowskiMajority),
            "finkelstein_schoenfeld" | "fs" => Ok(Self::FinkelsteinSchoenfeld),
            _ => Err(Error::Unknown {
                what: "score map",
                value: s.to_string(),
            }),
        }
    }
}

/// `U = 1/(mn) sum_{i in x} sum_{j in y} phi(r(x_i, y_j))`.
pub fn u_statistic(data: &TwoSampleData, phi: &ScoreMap) -> Result<f64> {
    phi.check(data.d())?;
    let (ex, ey) = (data.events_x(), data.events_y());
    let mut total = 0.0;
    for (i, a) in data.arm_x().iter_rows().enumerate() {
        for (j, b) in data.arm_y().iter_rows().enumerate() {
            let surv = ex.zip(ey).map(|(ex, ey)| (ex[i], ey[j]));
            total += phi.apply(pair_scores(a, b, surv).as_slice());
        }
    }
    Ok(total / (data.m() * data.n()) as f64)
}

/// `s_i = sum_j phi(r(z_i, z_j))` over the pooled sample.
///
/// Every implemented `phi` is odd and the scores are antisymmetric, so the
/// pairwise matrix is antisymmetric and for any label split `S` of size m
/// the cross sum equals `sum_{i in S} s_i`. Permutations then cost O(m).
pub fn subject_scores(data: &TwoSampleData, phi: &ScoreMap) -> Result<Vec<f64>> {
    phi.check(data.d())?;
    let (pooled, events) = (data.pooled(), data.pooled_events());
    let n = pooled.rows();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let surv = events.as_ref().map(|e| (e[i], e[j]));
                    phi.apply(pair_scores(pooled.row(i), pooled.row(j), surv).as_slice())
                })
                .sum()
        })
        .collect())
}

/// Midranks (average rank for ties, 1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        start = end;
    }
    ranks
}

fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

/// Per-subject sums of pooled per-endpoint midranks, x subjects first. A
/// survival endpoint is ranked through its pooled Gehan scores.
pub fn obrien_summed_ranks(data: &TwoSampleData) -> Vec<f64> {
    let pooled = data.pooled();
    let mut sums = vec![0.0; pooled.rows()];
    for k in 0..data.d() {
        let column = match (k, data.pooled_events()) {
            (0, Some(events)) => {
                let col = SurvivalColumn::new(pooled.column(0), events).expect("validated dataset");
                gehan_scores(&col).into_iter().map(|u| u as f64).collect()
            }
            _ => pooled.column(k),
        };
        for (s, r) in sums.iter_mut().zip(midranks(&column)) {
            *s += r;
        }
    }
    sums
}

/// O'Brien's rank-sum test: summed per-endpoint midranks compared between
/// arms by a Wilcoxon rank-sum test, normal approximation with tie
/// correction, two-sided, no continuity correction.
pub fn obrien_test(data: &TwoSampleData, alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let (m, n) = (data.m(), data.n());
    let total = (m + n) as f64;
    let sums = obrien_summed_ranks(data);
    let ranks = midranks(&sums);
    let w: f64 = ranks[..m].iter().sum();
    let mean = m as f64 * (total + 1.0) / 2.0;
    let var = if m + n > 1 {
        (m * n) as f64 / 12.0 * (total + 1.0 - tie_term(&sums) / (total * (total - 1.0)))
    } else {
        0.0
    };
    let (z, p) = if var > 1e-12 {
        let z = (w - mean) / var.sqrt();
        let normal = Normal::standard();
        (z, (2.0 * normal.sf(z.abs())).min(1.0))
    } else {
        (0.0, 1.0)
    };
    let u = u_statistic(data, &ScoreMap::ObrienSum { weights: None })?;
    Ok(TestOutcome {
        method: Method::OBrien,
        statistic: u,
        scaled_statistic: None,
        threshold: alpha,
        reject: p < alpha,
        alpha,
        p_value: Some(p),
        meta: json!({
            "score_map": "obrien_sum",
            "rank_sum_x": w,
            "z": z,
            "inference": "wilcoxon-normal",
            "m": m,
            "n": n,
            "d": data.d(),
        }),
    })
}

pub const DEFAULT_PERMUTATIONS: usize = 2000;
pub const MIN_PERMUTATIONS: usize = 99;

/// Permutation test of `H0: U = 0` by relabelling the pooled sample.
///
/// `p = (1 + #{b : |U_b| >= |U_obs|}) / (B + 1)`; permutation `b` draws its
/// label split from substream `(seed, b)`.
pub fn permutation_test(
    data: &TwoSampleData,
    phi: &ScoreMap,
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if permutations < MIN_PERMUTATIONS {
        return Err(out_of_range(
            "permutations",
            permutations,
            format!(">= {MIN_PERMUTATIONS}"),
        ));
    }
    let (m, n) = (data.m(), data.n());
    let scores = subject_scores(data, phi)?;
    let observed: f64 = scores[..m].iter().sum();
    let tol = 1e-9 * (1.0 + observed.abs());
    let exceed = (0..permutations)
        .into_par_iter()
        .filter(|&b| {
            let mut rng = rng::substream(seed, &[Tag::Str("permutation"), Tag::from(b)]);
            let s: f64 = index::sample(&mut rng, m + n, m)
                .iter()
                .map(|i| scores[i])
                .sum();
            s.abs() >= observed.abs() - tol
        })
        .count();
    let p = (1 + exceed) as f64 / (permutations + 1) as f64;
    let method = match phi {
        ScoreMap::FinkelsteinSchoenfeld => Method::FinkelsteinSchoenfeld,
        ScoreMap::ObrienSum { .. } => Method::OBrien,
        _ => Method::Wittkowski,
    };
    Ok(TestOutcome {
        method,
        statistic: observed / (m * n) as f64,
        scaled_statistic: None,
        threshold: alpha,
        reject: p < alpha,
        alpha,
        p_value: Some(p),
        meta: json!({
            "score_map": phi.name(),
            "inference": "permutation",
            "permutations": permutations,
            "seed": seed,
            "m": m,
            "n": n,
            "d": data.d(),
        }),
    })
}

/// Runs a baseline method with its default score map and inference.
pub fn baseline_test(
    data: &TwoSampleData,
    method: Method,
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<TestOutcome> {
    match method {
        Method::OBrien => obrien_test(data, alpha),
        Method::Wittkowski => permutation_test(
            data,
            &ScoreMap::WittkowskiMajority,
            alpha,
            permutations,
            seed,
        ),
        Method::FinkelsteinSchoenfeld => permutation_test(
            data,
            &ScoreMap::FinkelsteinSchoenfeld,
            alpha,
            permutations,
            seed,
        ),
        Method::RankEnergy => Err(Error::Unsupported(
            "rank-energy is not a baseline method".into(),
        )),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(out_of_range("alpha", alpha, "(0, 1)"))
    }
}
