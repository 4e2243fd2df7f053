//! Gehan scoring of a right-censored endpoint and its substitution into the
//! rank-energy pipeline.

use serde_json::json;

use crate::dataset::{TestOutcome, TwoSampleData};
use crate::energy::{self, RankEnergyConfig};
use crate::error::{Error, Result};

/// Observed times `min(T, C)` with event indicators (`true` = event observed).
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalColumn {
    times: Vec<f64>,
    events: Vec<bool>,
}

impl SurvivalColumn {
    pub fn new(times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: events.len(),
            });
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidData(format!(
                "survival time {t} must be finite and >= 0"
            )));
        }
        Ok(Self { times, events })
    }

    /// Pooled survival column (x first) of a dataset with a time-to-event endpoint.
    pub fn from_data(data: &TwoSampleData) -> Result<Self> {
        let events = data
            .pooled_events()
            .ok_or_else(|| Error::InvalidData("dataset has no time-to-event endpoint".into()))?;
        Self::new(data.pooled().column(0), events)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }
}

/// `+1` if subject i definitely outlived j, `-1` if definitely not, else `0`.
///
/// A censored time `t+` only says the true time exceeds `t`, so it beats an
/// event at or before `t` and is indeterminate against anything later. Two
/// censored times, tied events and `i == j` all score `0`.
pub fn gehan_pair_score(t_i: f64, e_i: bool, t_j: f64, e_j: bool) -> i8 {
    match (e_i, e_j) {
        (true, true) if t_i > t_j => 1,
        (true, true) if t_i < t_j => -1,
        (false, true) if t_i >= t_j => 1,
        (true, false) if t_j >= t_i => -1,
        _ => 0,
    }
}

/// `u_i = sum_j gehan_pair_score(i, j)` over the whole column.
pub fn gehan_scores(col: &SurvivalColumn) -> Vec<i64> {
    let (t, e) = (&col.times, &col.events);
    (0..col.len())
        .map(|i| {
            (0..col.len())
                .map(|j| i64::from(gehan_pair_score(t[i], e[i], t[j], e[j])))
                .sum()
        })
        .collect()
}

/// Rank-energy test with the survival endpoint (index 0) replaced by pooled
/// Gehan scores in both arms.
pub fn test_with_survival(data: &TwoSampleData, config: &RankEnergyConfig) -> Result<TestOutcome> {
    if !data.has_survival() {
        return Err(Error::InvalidData(
            "dataset has no time-to-event endpoint".into(),
        ));
    }
    let col = SurvivalColumn::from_data(data)?;
    let scores = gehan_scores(&col);
    let m = data.m();
    let mut x = data.arm_x().clone();
    let mut y = data.arm_y().clone();
    x.set_column(
        0,
        &scores[..m].iter().map(|&u| u as f64).collect::<Vec<_>>(),
    );
    y.set_column(
        0,
        &scores[m..].iter().map(|&u| u as f64).collect::<Vec<_>>(),
    );
    let meta = json!({
        "survival_endpoint": data.names()[0],
        "survival_scoring": "gehan",
        "censoring_fraction": data.censoring_fraction(),
    });
    energy::decide_numeric(&x, &y, config, meta)
}
