//! Simulation driver: empirical rejection rates over a grid of effect sizes,
//! correlations, methods and point-set kinds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, DEFAULT_PERMUTATIONS};
use crate::datagen::{self, ScenarioConfig, DEFAULT_ARM_SIZE};
use crate::dataset::Method;
use crate::energy::{
    self, CalibrationCache, CalibrationEntry, CalibrationParams, RankEnergyConfig, ThresholdSource,
    DEFAULT_CALIBRATION_RUNS,
};
use crate::error::{out_of_range, Error, Result};
use crate::lds::SequenceKind;
use crate::rng::{derive_key, Tag};

/// How the rank-energy threshold is obtained for an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Built-in table (only `d <= 6`, alpha in {0.05, 0.10}).
    Table,
    /// Monte Carlo calibration at the experiment's `(m, n, d, alpha, kind)`.
    Calibrate { runs: usize, seed: u64 },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        Self::Calibrate {
            runs: DEFAULT_CALIBRATION_RUNS,
            seed: 0,
        }
    }
}

fn default_arm() -> usize {
    DEFAULT_ARM_SIZE
}
fn default_rho() -> Vec<f64> {
    vec![0.3]
}
fn default_methods() -> Vec<Method> {
    vec![Method::RankEnergy, Method::OBrien, Method::Wittkowski]
}
fn default_kinds() -> Vec<SequenceKind> {
    vec![SequenceKind::Sobol]
}
fn default_replications() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: u8,
    #[serde(default = "default_arm")]
    pub m: usize,
    #[serde(default = "default_arm")]
    pub n: usize,
    pub r_values: Vec<f64>,
    /// Ignored by scenario 2, which has no correlation parameter.
    #[serde(default = "default_rho")]
    pub rho_values: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Point-set kinds for the rank-energy method.
    #[serde(default = "default_kinds")]
    pub sequence_kinds: Vec<SequenceKind>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub threshold: ThresholdMode,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `k` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![lo],
        _ => (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect(),
    }
}

/// Default effect grid: 11 points over `[1, 3]` for scenario 1, `[0, 1]` otherwise.
pub fn default_r_grid(scenario: u8) -> Vec<f64> {
    if scenario == 1 {
        linspace(1.0, 3.0, 11)
    } else {
        linspace(0.0, 1.0, 11)
    }
}

impl ExperimentSpec {
    /// Spec with the documented defaults for `scenario`.
    pub fn new(scenario: u8) -> Self {
        Self {
            scenario,
            m: DEFAULT_ARM_SIZE,
            n: DEFAULT_ARM_SIZE,
            r_values: default_r_grid(scenario),
            rho_values: default_rho(),
            methods: default_methods(),
            sequence_kinds: default_kinds(),
            replications: default_replications(),
            alpha: default_alpha(),
            master_seed: 0,
            permutations: default_permutations(),
            threshold: ThresholdMode::default(),
            standardize: false,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(out_of_range("replications", 0, ">= 1"));
        }
        if self.r_values.is_empty() {
            return Err(Error::InvalidData("r_values must be non-empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidData("methods must be non-empty".into()));
        }
        if self.methods.contains(&Method::RankEnergy) && self.sequence_kinds.is_empty() {
            return Err(Error::InvalidData(
                "sequence_kinds must be non-empty".into(),
            ));
        }
        if self.scenario != 2 && self.rho_values.is_empty() {
            return Err(Error::InvalidData("rho_values must be non-empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(out_of_range("alpha", self.alpha, "(0, 1)"));
        }
        let baselines = self.methods.iter().any(|m| *m != Method::RankEnergy);
        if baselines && self.permutations < baselines::MIN_PERMUTATIONS {
            return Err(out_of_range("permutations", self.permutations, ">= 99"));
        }
        for &rho in &self.rhos() {
            for &r in &self.r_values {
                self.config(r, rho, 0).validate()?;
            }
        }
        Ok(())
    }

    fn rhos(&self) -> Vec<f64> {
        if self.scenario == 2 {
            vec![0.0]
        } else {
            self.rho_values.clone()
        }
    }

    fn config(&self, r: f64, rho: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            scenario: self.scenario,
            m: self.m,
            n: self.n,
            r,
            rho,
            seed,
        }
    }

    /// Endpoint count of the scenario.
    pub fn dimension(&self) -> usize {
        match self.scenario {
            1 => 8,
            2 => 4,
            _ => 6,
        }
    }

    /// Test slots evaluated on every replicate: one per point-set kind for
    /// rank-energy, one per baseline.
    fn slots(&self) -> Vec<(Method, Option<SequenceKind>)> {
        let mut out = Vec::new();
        for &method in &self.methods {
            if method == Method::RankEnergy {
                out.extend(self.sequence_kinds.iter().map(|&k| (method, Some(k))));
            } else {
                out.push((method, None));
            }
        }
        out.dedup();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub scenario: u8,
    pub method: Method,
    /// Point-set kind for rank-energy; `None` for baselines.
    pub sequence: Option<SequenceKind>,
    pub r: f64,
    pub rho: f64,
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Summed test time over the cell's replicates, in seconds.
    pub wall_time: f64,
}

impl RejectionRecord {
    pub fn sequence_label(&self) -> &'static str {
        self.sequence.map_or("none", SequenceKind::as_str)
    }
}

fn replicate_seed(spec: &ExperimentSpec, r: f64, rho: f64, replicate: usize) -> u64 {
    derive_key(
        spec.master_seed,
        &[
            Tag::Str("data"),
            Tag::from(spec.scenario as u64),
            Tag::from(r),
            Tag::from(rho),
            Tag::from(replicate),
        ],
    )
}

fn thresholds(
    spec: &ExperimentSpec,
    cache: &mut CalibrationCache,
) -> Result<Vec<(SequenceKind, ThresholdSource)>> {
    if !spec.methods.contains(&Method::RankEnergy) {
        return Ok(vec![]);
    }
    let d = spec.dimension();
    spec.sequence_kinds
        .iter()
        .map(|&kind| {
            let source = match spec.threshold {
                ThresholdMode::Table => {
                    energy::table_threshold(d, spec.alpha)?;
                    ThresholdSource::Table
                }
                ThresholdMode::Calibrate { runs, seed } => {
                    let entry: CalibrationEntry = cache.get_or_calibrate(&CalibrationParams {
                        m: spec.m,
                        n: spec.n,
                        d,
                        alpha: spec.alpha,
                        runs,
                        kind,
                        seed,
                    })?;
                    ThresholdSource::Entry(entry)
                }
            };
            Ok((kind, source))
        })
        .collect()
}

/// Runs every `(r, rho)` cell for `spec.replications` replicates.
///
/// Replicate `b` of a cell draws its data from a substream keyed by
/// `(master_seed, scenario, r, rho, b)`, shared by all methods and kinds so
/// comparisons are paired. Baseline permutations and uniform point sets get
/// their own keys, so the output depends on the spec alone and not on
/// scheduling or the number of threads.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RejectionRecord>> {
    run_experiment_with_cache(spec, &mut CalibrationCache::new())
}

pub fn run_experiment_with_cache(
    spec: &ExperimentSpec,
    cache: &mut CalibrationCache,
) -> Result<Vec<RejectionRecord>> {
    spec.validate()?;
    let thresholds = thresholds(spec, cache)?;
    let slots = spec.slots();
    let cells: Vec<(f64, f64)> = spec
        .rhos()
        .into_iter()
        .flat_map(|rho| spec.r_values.iter().map(move |&r| (r, rho)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.replications).map(move |b| (c, b)))
        .collect();

    let outcomes: Vec<Vec<(bool, f64)>> = jobs
        .par_iter()
        .map(|&(c, b)| {
            let (r, rho) = cells[c];
            run_replicate(spec, &slots, &thresholds, r, rho, b).map_err(|e| Error::Replicate {
                r,
                rho,
                replicate: b,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(cells.len() * slots.len());
    for (c, &(r, rho)) in cells.iter().enumerate() {
        let cell = &outcomes[c * spec.replications..(c + 1) * spec.replications];
        for (s, &(method, sequence)) in slots.iter().enumerate() {
            let rejections = cell.iter().filter(|o| o[s].0).count();
            let wall_time = cell.iter().map(|o| o[s].1).sum();
            records.push(RejectionRecord {
                scenario: spec.scenario,
                method,
                sequence,
                r,
                rho,
                m: spec.m,
                n: spec.n,
                replications: spec.replications,
                rejections,
                rate: rejections as f64 / spec.replications as f64,
                wall_time,
            });
        }
    }
    sort_records(&mut records);
    Ok(records)
}

fn run_replicate(
    spec: &ExperimentSpec,
    slots: &[(Method, Option<SequenceKind>)],
    thresholds: &[(SequenceKind, ThresholdSource)],
    r: f64,
    rho: f64,
    b: usize,
) -> Result<Vec<(bool, f64)>> {
    let seed = replicate_seed(spec, r, rho, b);
    let data = datagen::gen_scenario(&spec.config(r, rho, seed))?;
    slots
        .iter()
        .map(|&(method, kind)| {
            let start = Instant::now();
            let outcome = match kind {
                Some(kind) => {
                    let threshold = thresholds
                        .iter()
                        .find(|(k, _)| *k == kind)
                        .map(|(_, t)| t.clone())
                        .expect("threshold per kind");
                    let config = RankEnergyConfig {
                        alpha: spec.alpha,
                        kind,
                        sequence_seed: derive_key(seed, &[Tag::Str("points")]),
                        threshold,
                        standardize: spec.standardize,
                    };
                    energy::rank_energy_test(&data, &config)?
                }
                None => {
                    let perm_seed =
                        derive_key(seed, &[Tag::Str("permutation"), Tag::Str(method.as_str())]);
                    baselines::baseline_test(
                        &data,
                        method,
                        spec.alpha,
                        spec.permutations,
                        perm_seed,
                    )?
                }
            };
            Ok((outcome.reject, start.elapsed().as_secs_f64()))
        })
        .collect()
}

/// Runs `spec` on a dedicated pool of `workers` threads (`None` = rayon default).
pub fn run_with_workers(
    spec: &ExperimentSpec,
    workers: Option<usize>,
    cache: &mut CalibrationCache,
) -> Result<Vec<RejectionRecord>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(out_of_range("workers", 0, ">= 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment_with_cache(spec, cache))
}

/// Sensitivity study: scenario 1, `rho = 0.8`, rank-energy under all four
/// point-set kinds. Other fields of `base` (grid, sizes, seed) are kept.
pub fn sensitivity_spec(base: &ExperimentSpec) -> ExperimentSpec {
    ExperimentSpec {
        scenario: 1,
        rho_values: vec![0.8],
        methods: vec![Method::RankEnergy],
        sequence_kinds: SequenceKind::ALL.to_vec(),
        ..base.clone()
    }
}

pub fn sensitivity_experiment(base: &ExperimentSpec) -> Result<Vec<RejectionRecord>> {
    run_experiment(&sensitivity_spec(base))
}

/// Stable order: method, r, rho, sequence kind.
pub fn sort_records(records: &mut [RejectionRecord]) {
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.r.total_cmp(&b.r))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.sequence_label().cmp(b.sequence_label()))
    });
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: u8,
    method: &'a str,
    sequence: &'a str,
    r: f64,
    rho: f64,
    m: usize,
    n: usize,
    replications: usize,
    rejections: usize,
    rate: f64,
}

/// Results CSV (sorted, without timings so reruns are byte-identical).
pub fn results_csv(records: &[RejectionRecord]) -> Result<String> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::Writer::from_writer(Vec::new());
    for rec in &sorted {
        w.serialize(CsvRow {
            scenario: rec.scenario,
            method: rec.method.as_str(),
            sequence: rec.sequence_label(),
            r: rec.r,
            rho: rec.rho,
            m: rec.m,
            n: rec.n,
            replications: rec.replications,
            rejections: rec.rejections,
            rate: rec.rate,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Unsupported(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Companion JSON path: `results.csv` -> `results.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the CSV to `path` and a JSON sidecar holding the spec and the
/// full records, timings included.
pub fn emit_results(
    records: &[RejectionRecord],
    spec: Option<&ExperimentSpec>,
    path: &Path,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidData("no records to emit".into()));
    }
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(path, results_csv(records)?).map_err(io)?;
    let sidecar = sidecar_path(path);
    let json = serde_json::json!({ "spec": spec, "records": records });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&json)? + "\n").map_err(|source| {
        Error::Io {
            path: sidecar.clone(),
            source,
        }
    })
}
