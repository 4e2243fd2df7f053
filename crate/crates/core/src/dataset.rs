//! Two-arm, multi-endpoint datasets and their CSV form.
//!
//! The CSV layout is one row per subject: an `arm` column holding `x` or `y`,
//! one numeric column per endpoint, and a `<name>_event` column (0/1) for the
//! time-to-event endpoint, if any. After construction the time-to-event
//! endpoint always sits at index 0.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointKind {
    Continuous,
    Discrete,
    TimeToEvent,
}

impl EndpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Continuous => "continuous",
            EndpointKind::Discrete => "discrete",
            EndpointKind::TimeToEvent => "time-to-event",
        }
    }
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EndpointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" | "cont" | "c" => Ok(EndpointKind::Continuous),
            "discrete" | "disc" | "d" => Ok(EndpointKind::Discrete),
            "time-to-event" | "tte" | "survival" => Ok(EndpointKind::TimeToEvent),
            _ => Err(Error::Unknown {
                what: "endpoint kind",
                value: s.to_string(),
            }),
        }
    }
}

/// Named endpoint declarations, in the order the user wrote them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub endpoints: Vec<(String, EndpointKind)>,
}

impl FromStr for Schema {
    type Err = Error;

    /// Parses `name:kind,name:kind,...`; a bare `name` means continuous.
    fn from_str(s: &str) -> Result<Self> {
        let mut endpoints = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, kind) = match part.split_once(':') {
                Some((name, kind)) => (name.trim(), kind.parse()?),
                None => (part, EndpointKind::Continuous),
            };
            if name.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "empty endpoint name in `{part}`"
                )));
            }
            endpoints.push((name.to_string(), kind));
        }
        if endpoints.is_empty() {
            return Err(Error::InvalidSchema("no endpoints declared".into()));
        }
        Ok(Schema { endpoints })
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, kind)) in self.endpoints.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{name}:{kind}")?;
        }
        Ok(())
    }
}

/// Observations of `d` endpoints for arms x (m subjects) and y (n subjects).
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSampleData {
    arm_x: Matrix,
    arm_y: Matrix,
    schema: Vec<EndpointKind>,
    events_x: Option<Vec<bool>>,
    events_y: Option<Vec<bool>>,
    names: Vec<String>,
}

impl TwoSampleData {
    /// Validates and normalizes a dataset. The time-to-event endpoint, if
    /// present, is moved to index 0; the other endpoints keep their order.
    pub fn new(
        arm_x: Matrix,
        arm_y: Matrix,
        schema: Vec<EndpointKind>,
        events_x: Option<Vec<bool>>,
        events_y: Option<Vec<bool>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let d = schema.len();
        if d == 0 {
            return Err(Error::InvalidData(
                "at least one endpoint is required".into(),
            ));
        }
        if arm_x.rows() == 0 || arm_y.rows() == 0 {
            return Err(Error::InvalidData("both arms must be non-empty".into()));
        }
        if arm_x.cols() != d || arm_y.cols() != d {
            return Err(Error::InvalidData(format!(
                "schema has {d} endpoints but arms have {} and {} columns",
                arm_x.cols(),
                arm_y.cols()
            )));
        }
        if names.len() != d {
            return Err(Error::InvalidData(format!(
                "{} endpoint names for {d} endpoints",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidData(format!(
                "duplicate endpoint name `{dup}`"
            )));
        }
        if let Some((i, j)) = first_non_finite(&arm_x).or_else(|| first_non_finite(&arm_y)) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {i} of endpoint `{}`",
                names[j]
            )));
        }

        let survival: Vec<usize> = schema
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == EndpointKind::TimeToEvent)
            .map(|(i, _)| i)
            .collect();
        if survival.len() > 1 {
            return Err(Error::InvalidData(
                "at most one time-to-event endpoint is supported".into(),
            ));
        }
        match (&events_x, &events_y, survival.first()) {
            (Some(ex), Some(ey), Some(&k)) => {
                if ex.len() != arm_x.rows() || ey.len() != arm_y.rows() {
                    return Err(Error::InvalidData(
                        "event indicator length differs from arm size".into(),
                    ));
                }
                let negative = arm_x
                    .column(k)
                    .into_iter()
                    .chain(arm_y.column(k))
                    .any(|t| t < 0.0);
                if negative {
                    return Err(Error::InvalidData(format!(
                        "time-to-event endpoint `{}` has negative times",
                        names[k]
                    )));
                }
            }
            (None, None, None) => {}
            (_, _, Some(_)) => {
                return Err(Error::InvalidData(
                    "time-to-event endpoint requires event indicators for both arms".into(),
                ))
            }
            (_, _, None) => {
                return Err(Error::InvalidData(
                    "event indicators given without a time-to-event endpoint".into(),
                ))
            }
        }

        let data = Self {
            arm_x,
            arm_y,
            schema,
            events_x,
            events_y,
            names,
        };
        Ok(match survival.first() {
            Some(&k) if k != 0 => data.move_endpoint_to_front(k),
            _ => data,
        })
    }

    /// All-continuous dataset with generated names `e1..ed`.
    pub fn continuous(arm_x: Matrix, arm_y: Matrix) -> Result<Self> {
        let d = arm_x.cols();
        Self::new(
            arm_x,
            arm_y,
            vec![EndpointKind::Continuous; d],
            None,
            None,
            (1..=d).map(|k| format!("e{k}")).collect(),
        )
    }

    fn move_endpoint_to_front(self, k: usize) -> Self {
        let d = self.schema.len();
        let order: Vec<usize> = std::iter::once(k)
            .chain((0..d).filter(|&j| j != k))
            .collect();
        let permute = |m: &Matrix| {
            let mut out = Matrix::zeros(m.rows(), d);
            for (new, &old) in order.iter().enumerate() {
                out.set_column(new, &m.column(old));
            }
            out
        };
        Self {
            arm_x: permute(&self.arm_x),
            arm_y: permute(&self.arm_y),
            schema: order.iter().map(|&j| self.schema[j]).collect(),
            names: order.iter().map(|&j| self.names[j].clone()).collect(),
            events_x: self.events_x,
            events_y: self.events_y,
        }
    }

    pub fn m(&self) -> usize {
        self.arm_x.rows()
    }

    pub fn n(&self) -> usize {
        self.arm_y.rows()
    }

    pub fn d(&self) -> usize {
        self.schema.len()
    }

    pub fn arm_x(&self) -> &Matrix {
        &self.arm_x
    }

    pub fn arm_y(&self) -> &Matrix {
        &self.arm_y
    }

    pub fn schema(&self) -> &[EndpointKind] {
        &self.schema
    }

    /// Schema of the normalized dataset (time-to-event endpoint first).
    pub fn declared_schema(&self) -> Schema {
        Schema {
            endpoints: self
                .names
                .iter()
                .cloned()
                .zip(self.schema.iter().copied())
                .collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn events_x(&self) -> Option<&[bool]> {
        self.events_x.as_deref()
    }

    pub fn events_y(&self) -> Option<&[bool]> {
        self.events_y.as_deref()
    }

    pub fn has_survival(&self) -> bool {
        self.schema.first() == Some(&EndpointKind::TimeToEvent)
    }

    /// Arms stacked x-first, the pooling order used by every test.
    pub fn pooled(&self) -> Matrix {
        self.arm_x.vstack(&self.arm_y).expect("arms share d")
    }

    /// Event indicators stacked x-first.
    pub fn pooled_events(&self) -> Option<Vec<bool>> {
        match (&self.events_x, &self.events_y) {
            (Some(ex), Some(ey)) => Some(ex.iter().chain(ey).copied().collect()),
            _ => None,
        }
    }

    /// Fraction of pooled subjects whose time-to-event observation is censored.
    pub fn censoring_fraction(&self) -> Option<f64> {
        let events = self.pooled_events()?;
        let censored = events.iter().filter(|e| !**e).count();
        Some(censored as f64 / events.len() as f64)
    }

    /// Same dataset with the arm labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            arm_x: self.arm_y.clone(),
            arm_y: self.arm_x.clone(),
            schema: self.schema.clone(),
            events_x: self.events_y.clone(),
            events_y: self.events_x.clone(),
            names: self.names.clone(),
        }
    }

    /// Writes the dataset in the ingest CSV layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["arm".to_string()];
        header.extend(self.names.iter().cloned());
        if self.has_survival() {
            header.push(format!("{}_event", self.names[0]));
        }
        w.write_record(&header)?;
        for (label, arm, events) in [
            ("x", &self.arm_x, &self.events_x),
            ("y", &self.arm_y, &self.events_y),
        ] {
            for i in 0..arm.rows() {
                let mut record = vec![label.to_string()];
                record.extend(arm.row(i).iter().map(|v| v.to_string()));
                if let Some(ev) = events {
                    record.push(if ev[i] { "1" } else { "0" }.to_string());
                }
                w.write_record(&record)?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn first_non_finite(m: &Matrix) -> Option<(usize, usize)> {
    (0..m.rows()).find_map(|i| m.row(i).iter().position(|v| !v.is_finite()).map(|j| (i, j)))
}

/// Reads a dataset file; see [`read_dataset`] for the format.
pub fn parse_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<TwoSampleData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, schema)
}

/// Parses the CSV layout described in the module docs. Line numbers in errors
/// are 1-based file lines, the header being line 1.
pub fn read_dataset<R: Read>(reader: R, schema: &Schema) -> Result<TwoSampleData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let index: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();

    let missing = |column: &str| Error::Parse {
        line: 1,
        column: column.to_string(),
        message: "column not found in header".into(),
    };
    let arm_col = *index.get("arm").ok_or_else(|| missing("arm"))?;
    let mut endpoint_cols = Vec::with_capacity(schema.endpoints.len());
    let mut event_col = None;
    for (name, kind) in &schema.endpoints {
        endpoint_cols.push(*index.get(name.as_str()).ok_or_else(|| missing(name))?);
        if *kind == EndpointKind::TimeToEvent {
            let ev = format!("{name}_event");
            if event_col.is_some() {
                return Err(Error::InvalidSchema(
                    "at most one time-to-event endpoint is supported".into(),
                ));
            }
            event_col = Some((*index.get(ev.as_str()).ok_or_else(|| missing(&ev))?, ev));
        }
    }

    let d = endpoint_cols.len();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (mut ex, mut ey) = (Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let arm = cell(arm_col);
        let (values, events) = match arm {
            "x" => (&mut xs, &mut ex),
            "y" => (&mut ys, &mut ey),
            other => {
                return Err(Error::Parse {
                    line,
                    column: "arm".into(),
                    message: format!("arm must be `x` or `y`, found `{other}`"),
                })
            }
        };
        for (k, &col) in endpoint_cols.iter().enumerate() {
            let raw = cell(col);
            let name = &schema.endpoints[k].0;
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                return Err(Error::Parse {
                    line,
                    column: name.clone(),
                    message: "missing value".into(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                column: name.clone(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: name.clone(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            values.push(v);
        }
        if let Some((col, ev_name)) = &event_col {
            let flag = match cell(*col) {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        line,
                        column: ev_name.clone(),
                        message: format!("event indicator must be 0 or 1, found `{other}`"),
                    })
                }
            };
            events.push(flag);
        }
    }

    let m = xs.len() / d;
    let n = ys.len() / d;
    if m == 0 || n == 0 {
        let which = if m == 0 { "x" } else { "y" };
        return Err(Error::Parse {
            line: 1,
            column: "arm".into(),
            message: format!("arm `{which}` has no rows"),
        });
    }
    let has_events = event_col.is_some();
    TwoSampleData::new(
        Matrix::from_vec(m, d, xs)?,
        Matrix::from_vec(n, d, ys)?,
        schema.endpoints.iter().map(|(_, k)| *k).collect(),
        has_events.then_some(ex),
        has_events.then_some(ey),
        schema.endpoints.iter().map(|(n, _)| n.clone()).collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RankEnergy,
    #[serde(rename = "obrien")]
    OBrien,
    Wittkowski,
    #[serde(rename = "fs")]
    FinkelsteinSchoenfeld,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RankEnergy,
        Method::OBrien,
        Method::Wittkowski,
        Method::FinkelsteinSchoenfeld,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RankEnergy => "rank-energy",
            Method::OBrien => "obrien",
            Method::Wittkowski => "wittkowski",
            Method::FinkelsteinSchoenfeld => "fs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Unknown {
                what: "method",
                value: s.to_string(),
            })
    }
}

/// Result of one global test.
///
/// For the rank-energy method `reject` is `scaled_statistic >= threshold`.
/// Baselines are p-value based: `threshold` holds alpha and `reject` is
/// `p_value < alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub scaled_statistic: Option<f64>,
    pub threshold: f64,
    pub reject: bool,
    pub alpha: f64,
    pub p_value: Option<f64>,
    pub meta: serde_json::Value,
}
