//! Empirical multivariate ranks: the pooled sample is matched to a point set
//! by optimal assignment and each observation's rank is its matched point.

use serde::Serialize;

use crate::assign::{self, Assignment, AssignmentProblem};
use crate::error::{Error, Result};
use crate::lds::{PointSet, PointSetInfo};
use crate::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct RankAssignment {
    pub ranks_x: Matrix,
    pub ranks_y: Matrix,
    pub point_set: PointSetInfo,
    pub assignment: Assignment,
}

impl RankAssignment {
    pub fn m(&self) -> usize {
        self.ranks_x.rows()
    }

    pub fn n(&self) -> usize {
        self.ranks_y.rows()
    }

    /// Builds a rank assignment directly from rank rows, bypassing the
    /// solver. Useful for evaluating the statistic on given ranks.
    pub fn from_ranks(ranks_x: Matrix, ranks_y: Matrix, point_set: PointSetInfo) -> Result<Self> {
        if ranks_x.cols() != ranks_y.cols() {
            return Err(Error::DimensionMismatch {
                expected: ranks_x.cols(),
                actual: ranks_y.cols(),
            });
        }
        let total = ranks_x.rows() + ranks_y.rows();
        Ok(Self {
            ranks_x,
            ranks_y,
            point_set,
            assignment: Assignment {
                perm: (0..total).collect(),
                total_cost: 0.0,
            },
        })
    }
}

/// Per-endpoint centering and scaling, fitted on the pooled sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Pooled mean and sample standard deviation of every column. A constant
    /// column gets `sd = 1` so it is only centered.
    pub fn fit(x: &Matrix, y: &Matrix) -> Self {
        let d = x.cols();
        let total = (x.rows() + y.rows()) as f64;
        let rows = || x.iter_rows().chain(y.iter_rows());
        let mut mean = vec![0.0; d];
        for r in rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let mut var = vec![0.0; d];
        for r in rows() {
            for k in 0..d {
                var[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let denom = (total - 1.0).max(1.0);
        let sd = var
            .into_iter()
            .map(|v| {
                let s = (v / denom).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (k, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[k]) / self.sd[k];
            }
        }
        out
    }
}

/// Ranks of arms `x` and `y` against `ps`, pooling x first.
///
/// With ties in the pooled sample the optimal matching may not be unique;
/// the solver's fixed scan order then decides, so results are reproducible
/// but carry no distributional guarantee.
pub fn empirical_ranks(x: &Matrix, y: &Matrix, ps: &PointSet) -> Result<RankAssignment> {
    let pooled = x.vstack(y)?;
    if pooled.rows() != ps.len() {
        return Err(Error::DimensionMismatch {
            expected: pooled.rows(),
            actual: ps.len(),
        });
    }
    let problem = AssignmentProblem::new(&pooled, ps.points())?;
    let assignment = assign::solve_lap(&problem)?;
    Ok(ranks_from_assignment(x.rows(), ps, assignment))
}

pub(crate) fn ranks_from_assignment(
    m: usize,
    ps: &PointSet,
    assignment: Assignment,
) -> RankAssignment {
    let (xs, ys) = assignment.perm.split_at(m);
    RankAssignment {
        ranks_x: ps.points().select_rows(xs),
        ranks_y: ps.points().select_rows(ys),
        point_set: ps.info().clone(),
        assignment,
    }
}
