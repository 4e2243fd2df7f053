//! Exact linear assignment under squared Euclidean cost.
//!
//! The solver is a shortest-augmenting-path method in the Jonker–Volgenant
//! family: rows are inserted one at a time in index order and each insertion
//! runs a Dijkstra search over reduced costs `c(i,j) - u(i) - v(j)`. Among
//! equally short candidates the search prefers a free column and then the
//! column scanned first, which makes the output deterministic when the optimum
//! is not unique.

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Square cost matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                actual: m.cols(),
            });
        }
        Ok(Self {
            n: m.rows(),
            data: m.as_slice().to_vec(),
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sum of `cost(i, perm[i])`, accumulated in row order.
    pub fn total(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|c| !c.is_finite()) {
            Some(p) => Err(Error::NonFiniteCost {
                row: p / self.n,
                col: p % self.n,
            }),
            None => Ok(()),
        }
    }
}

/// Pooled observations (sources) to be matched one-to-one with targets.
#[derive(Clone, Debug)]
pub struct AssignmentProblem<'a> {
    sources: &'a Matrix,
    targets: &'a Matrix,
}

impl<'a> AssignmentProblem<'a> {
    pub fn new(sources: &'a Matrix, targets: &'a Matrix) -> Result<Self> {
        if sources.rows() != targets.rows() {
            return Err(Error::DimensionMismatch {
                expected: sources.rows(),
                actual: targets.rows(),
            });
        }
        if sources.cols() != targets.cols() {
            return Err(Error::DimensionMismatch {
                expected: sources.cols(),
                actual: targets.cols(),
            });
        }
        Ok(Self { sources, targets })
    }

    pub fn size(&self) -> usize {
        self.sources.rows()
    }

    pub fn cost_matrix(&self) -> CostMatrix {
        cost_matrix(self.sources, self.targets).expect("validated in new")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the target matched to source `i`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// Entry `(i, j)` is `||source_i - target_j||^2`.
pub fn cost_matrix(sources: &Matrix, targets: &Matrix) -> Result<CostMatrix> {
    if sources.cols() != targets.cols() {
        return Err(Error::DimensionMismatch {
            expected: sources.cols(),
            actual: targets.cols(),
        });
    }
    if sources.rows() != targets.rows() {
        return Err(Error::DimensionMismatch {
            expected: sources.rows(),
            actual: targets.rows(),
        });
    }
    let n = sources.rows();
    let mut data = Vec::with_capacity(n * n);
    for s in sources.iter_rows() {
        data.extend(targets.iter_rows().map(|t| squared_distance(s, t)));
    }
    Ok(CostMatrix { n, data })
}

/// Minimum-cost perfect matching of sources to targets.
pub fn solve_lap(problem: &AssignmentProblem<'_>) -> Result<Assignment> {
    solve_cost_matrix(&problem.cost_matrix())
}

const NONE: usize = usize::MAX;

/// Minimum-cost assignment for an explicit square cost matrix.
pub fn solve_cost_matrix(cost: &CostMatrix) -> Result<Assignment> {
    solve_impl(cost, None).map(|(a, _)| a)
}

/// Like [`solve_cost_matrix`], but starts from the given column prices and
/// returns the final ones. Good prices (e.g. from a similar instance) make
/// most rows tight at the start and shorten the augmenting searches. The
/// optimal cost does not depend on the starting prices.
pub fn solve_with_prices(cost: &CostMatrix, prices: &[f64]) -> Result<(Assignment, Vec<f64>)> {
    if prices.len() != cost.size() {
        return Err(Error::DimensionMismatch {
            expected: cost.size(),
            actual: prices.len(),
        });
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidData("column prices must be finite".into()));
    }
    solve_impl(cost, Some(prices))
}

fn solve_impl(cost: &CostMatrix, prices: Option<&[f64]>) -> Result<(Assignment, Vec<f64>)> {
    cost.check_finite()?;
    let n = cost.size();
    if n == 0 {
        return Ok((
            Assignment {
                perm: Vec::new(),
                total_cost: 0.0,
            },
            Vec::new(),
        ));
    }

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col_for_row = vec![NONE; n];
    let mut row_for_col = vec![NONE; n];

    if let Some(prices) = prices {
        // u_i = min_j c_ij - v_j keeps every reduced cost nonnegative; a row
        // whose cheapest column is still free takes it (a tight edge)
        for (vj, &p) in v.iter_mut().zip(prices) {
            *vj = -p;
        }
        for i in 0..n {
            let (best, val) = cost
                .row(i)
                .iter()
                .zip(&v)
                .map(|(c, vj)| c - vj)
                .enumerate()
                .fold(
                    (NONE, f64::INFINITY),
                    |acc, (j, r)| if r < acc.1 { (j, r) } else { acc },
                );
            u[i] = val;
            if row_for_col[best] == NONE {
                row_for_col[best] = i;
                col_for_row[i] = best;
            }
        }
    }

    let mut path = vec![NONE; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut visited_rows: Vec<usize> = Vec::with_capacity(n);
    let mut visited_cols: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        if col_for_row[start] != NONE {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        remaining.clear();
        remaining.extend(0..n);
        visited_rows.clear();
        visited_cols.clear();

        let mut min_val = 0.0;
        let mut row = start;
        let sink = loop {
            visited_rows.push(row);
            let cost_row = cost.row(row);
            let base = min_val - u[row];
            let mut lowest = f64::INFINITY;
            let mut pick = NONE;
            for (pos, &j) in remaining.iter().enumerate() {
                let reduced = base + cost_row[j] - v[j];
                if reduced < dist[j] {
                    path[j] = row;
                    dist[j] = reduced;
                }
                let prefer_free = dist[j] == lowest
                    && row_for_col[j] == NONE
                    && (pick == NONE || row_for_col[remaining[pick]] != NONE);
                if dist[j] < lowest || prefer_free {
                    lowest = dist[j];
                    pick = pos;
                }
            }
            // finite costs keep every column reachable
            debug_assert!(pick != NONE);
            min_val = lowest;
            let j = remaining.remove(pick);
            visited_cols.push(j);
            if row_for_col[j] == NONE {
                break j;
            }
            row = row_for_col[j];
        };

        // dual update keeps reduced costs nonnegative and tight on the matching
        u[start] += min_val;
        for &i in &visited_rows[1..] {
            u[i] += min_val - dist[col_for_row[i]];
        }
        for &j in &visited_cols {
            v[j] -= min_val - dist[j];
        }

        let mut j = sink;
        loop {
            let i = path[j];
            row_for_col[j] = i;
            let prev = std::mem::replace(&mut col_for_row[i], j);
            if i == start {
                break;
            }
            j = prev;
        }
    }

    let total_cost = cost.total(&col_for_row);
    let prices = v.iter().map(|vj| -vj).collect();
    Ok((
        Assignment {
            perm: col_for_row,
            total_cost,
        },
        prices,
    ))
}

pub const MAX_BRUTE_FORCE: usize = 9;

/// Exhaustive search over all permutations, visited in lexicographic order.
/// Ties keep the first optimum found, i.e. the lexicographically smallest.
pub fn brute_force_lap(problem: &AssignmentProblem<'_>) -> Result<Assignment> {
    brute_force_cost_matrix(&problem.cost_matrix())
}

pub fn brute_force_cost_matrix(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.size();
    if n > MAX_BRUTE_FORCE {
        return Err(crate::error::out_of_range(
            "N",
            n,
            format!("<= {MAX_BRUTE_FORCE} for brute force"),
        ));
    }
    cost.check_finite()?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.total(&perm);
    while next_permutation(&mut perm) {
        let c = cost.total(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        perm: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n)
        .rev()
        .find(|&j| p[j] > p[i])
        .expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
