//! Rank targets: low-discrepancy and uniform-random point sets on `[0,1]^d`.

mod sobol_directions;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, Tag};

use sobol_directions::{JOE_KUO, TABLE_ID};

/// The first 65 primes; Halton uses the first `d`, Hammersley the first `d - 1`.
const PRIMES: [u64; 65] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313,
];

pub const MAX_HALTON_DIM: usize = 64;
pub const MAX_HAMMERSLEY_DIM: usize = 65;
pub const MAX_SOBOL_DIM: usize = JOE_KUO.len() + 1;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    #[default]
    Sobol,
    Halton,
    Hammersley,
    Uniform,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 4] = [
        SequenceKind::Uniform,
        SequenceKind::Hammersley,
        SequenceKind::Halton,
        SequenceKind::Sobol,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceKind::Sobol => "sobol",
            SequenceKind::Halton => "halton",
            SequenceKind::Hammersley => "hammersley",
            SequenceKind::Uniform => "uniform",
        }
    }

    /// Whether the point set depends on a seed.
    pub fn is_random(self) -> bool {
        self == SequenceKind::Uniform
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SequenceKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                what: "sequence kind",
                value: s.to_string(),
            })
    }
}

/// Where a point set came from; enough to regenerate it bit for bit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSetInfo {
    pub kind: SequenceKind,
    pub n: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction_table: Option<String>,
}

/// `n` pairwise-distinct points in `[0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Matrix,
    info: PointSetInfo,
}

impl PointSet {
    /// Wraps caller-supplied points. They must satisfy the point-set
    /// invariants and match the dimensions recorded in `info`.
    pub fn from_points(points: Matrix, info: PointSetInfo) -> Result<Self> {
        if points.rows() != info.n || points.cols() != info.d {
            return Err(Error::DimensionMismatch {
                expected: info.n * info.d,
                actual: points.rows() * points.cols(),
            });
        }
        let ps = Self { points, info };
        if ps.is_empty() || ps.dim() == 0 || !ps.satisfies_invariants() {
            return Err(Error::InvalidData(
                "points must be non-empty, pairwise distinct and inside [0,1]^d".into(),
            ));
        }
        Ok(ps)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn kind(&self) -> SequenceKind {
        self.info.kind
    }

    pub fn info(&self) -> &PointSetInfo {
        &self.info
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    /// True when every coordinate lies in `[0,1]` and no two rows coincide.
    pub fn satisfies_invariants(&self) -> bool {
        let in_range = self
            .points
            .as_slice()
            .iter()
            .all(|v| (0.0..=1.0).contains(v));
        in_range && rows_distinct(&self.points)
    }
}

fn rows_distinct(points: &Matrix) -> bool {
    let mut seen = HashSet::with_capacity(points.rows());
    points
        .iter_rows()
        .all(|row| seen.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
}

fn check_size(n: usize, d: usize, max_d: usize) -> Result<()> {
    if n == 0 {
        return Err(out_of_range("n", n, ">= 1"));
    }
    if d == 0 || d > max_d {
        return Err(out_of_range("d", d, format!("1..={max_d}")));
    }
    Ok(())
}

/// Radical inverse of `i` in `base`, rounded once from the exact fraction.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut reversed: u64 = 0;
    let mut denom: u64 = 1;
    while i > 0 {
        reversed = reversed * base + i % base;
        denom *= base;
        i /= base;
    }
    reversed as f64 / denom as f64
}

/// Halton points `1..=n`: coordinate `k` of point `i` is the radical inverse
/// of `i` in the `k`-th prime base.
pub fn halton(n: usize, d: usize) -> Result<PointSet> {
    check_size(n, d, MAX_HALTON_DIM)?;
    let mut points = Matrix::zeros(n, d);
    for i in 0..n {
        for (k, &base) in PRIMES[..d].iter().enumerate() {
            points.set(i, k, radical_inverse(i as u64 + 1, base));
        }
    }
    Ok(PointSet {
        points,
        info: PointSetInfo {
            kind: SequenceKind::Halton,
            n,
            d,
            seed: None,
            skip: None,
            direction_table: None,
        },
    })
}

/// Hammersley set of size `n`: first coordinate `(i - 0.5) / n`, the rest
/// radical inverses of `i` in the first `d - 1` prime bases.
pub fn hammersley(n: usize, d: usize) -> Result<PointSet> {
    check_size(n, d, MAX_HAMMERSLEY_DIM)?;
    let mut points = Matrix::zeros(n, d);
    for i in 0..n {
        points.set(i, 0, (i as f64 + 0.5) / n as f64);
        for (k, &base) in PRIMES[..d - 1].iter().enumerate() {
            points.set(i, k + 1, radical_inverse(i as u64 + 1, base));
        }
    }
    Ok(PointSet {
        points,
        info: PointSetInfo {
            kind: SequenceKind::Hammersley,
            n,
            d,
            seed: None,
            skip: None,
            direction_table: None,
        },
    })
}

const SOBOL_BITS: usize = 32;

fn sobol_directions(dim: usize) -> [u32; SOBOL_BITS] {
    let mut v = [0u32; SOBOL_BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s {
        v[k] = m[k] << (31 - k);
    }
    for k in s..SOBOL_BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                x ^= v[k - l];
            }
        }
        v[k] = x;
    }
    v
}

/// Unscrambled Sobol points in Gray-code order, indices `skip..skip + n`.
/// Index 0 is the origin, so `skip >= 1` keeps the set away from it.
pub fn sobol(n: usize, d: usize, skip: u64) -> Result<PointSet> {
    check_size(n, d, MAX_SOBOL_DIM)?;
    let end = skip
        .checked_add(n as u64)
        .filter(|&e| e <= 1u64 << SOBOL_BITS)
        .ok_or_else(|| out_of_range("skip + n", skip as u128 + n as u128, "<= 2^32"))?;
    let dirs: Vec<[u32; SOBOL_BITS]> = (0..d).map(sobol_directions).collect();
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;

    // state at index `skip` from its Gray code, then one XOR per step
    let gray = skip ^ (skip >> 1);
    let mut state: Vec<u32> = dirs
        .iter()
        .map(|v| {
            (0..SOBOL_BITS)
                .filter(|&b| (gray >> b) & 1 == 1)
                .fold(0u32, |acc, b| acc ^ v[b])
        })
        .collect();

    let mut points = Matrix::zeros(n, d);
    for (row, index) in (skip..end).enumerate() {
        for (k, &x) in state.iter().enumerate() {
            points.set(row, k, f64::from(x) * scale);
        }
        if index + 1 < end {
            let bit = index.trailing_ones() as usize;
            for (x, v) in state.iter_mut().zip(&dirs) {
                *x ^= v[bit];
            }
        }
    }
    Ok(PointSet {
        points,
        info: PointSetInfo {
            kind: SequenceKind::Sobol,
            n,
            d,
            seed: None,
            skip: Some(skip),
            direction_table: Some(TABLE_ID.to_string()),
        },
    })
}

/// i.i.d. uniform points, deterministic in `seed`.
pub fn uniform(n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(out_of_range("n", n, ">= 1"));
    }
    if d == 0 {
        return Err(out_of_range("d", d, ">= 1"));
    }
    let mut rng = rng::substream(seed, &[Tag::Str("uniform-points")]);
    let mut points = Matrix::zeros(n, d);
    let mut seen = HashSet::with_capacity(n);
    for i in 0..n {
        // a repeated row would break the rank bijection; redraw it
        loop {
            for v in points.row_mut(i) {
                *v = rng.random::<f64>();
            }
            let key: Vec<u64> = points.row(i).iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                break;
            }
        }
    }
    Ok(PointSet {
        points,
        info: PointSetInfo {
            kind: SequenceKind::Uniform,
            n,
            d,
            seed: Some(seed),
            skip: None,
            direction_table: None,
        },
    })
}

pub const DEFAULT_SOBOL_SKIP: u64 = 1;

/// Generates a point set of the given kind. `seed` is used by the uniform
/// kind only; Sobol uses the default skip of 1.
pub fn generate(kind: SequenceKind, n: usize, d: usize, seed: u64) -> Result<PointSet> {
    match kind {
        SequenceKind::Sobol => sobol(n, d, DEFAULT_SOBOL_SKIP),
        SequenceKind::Halton => halton(n, d),
        SequenceKind::Hammersley => hammersley(n, d),
        SequenceKind::Uniform => uniform(n, d, seed),
    }
}

const MAX_DISCREPANCY_CELLS: usize = 1 << 24;

/// Lower bound on the star discrepancy `sup_t |#{p in [0,t)}/n - vol[0,t)|`.
///
/// Box corners are taken from the point coordinates (plus 1.0) on each axis.
/// In one dimension every coordinate is used and the value is exact. In
/// higher dimensions each axis keeps at most `grid_resolution` evenly spread
/// candidates, further thinned so the corner grid stays below 2^24 cells.
pub fn star_discrepancy_estimate(ps: &PointSet, grid_resolution: usize) -> Result<f64> {
    if grid_resolution < 2 {
        return Err(out_of_range("grid_resolution", grid_resolution, ">= 2"));
    }
    let n = ps.len();
    let d = ps.dim();
    let pts = ps.points();

    if d == 1 {
        let mut xs = pts.column(0);
        xs.sort_by(f64::total_cmp);
        let nf = n as f64;
        return Ok(xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / nf - x).max(x - i as f64 / nf))
            .fold(0.0, f64::max));
    }

    let mut per_axis = grid_resolution;
    while per_axis > 2 && per_axis.saturating_pow(d as u32) > MAX_DISCREPANCY_CELLS {
        per_axis -= 1;
    }

    let candidates: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut c = pts.column(k);
            c.push(1.0);
            c.sort_by(f64::total_cmp);
            c.dedup();
            thin(c, per_axis)
        })
        .collect();
    let shape: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let cells: usize = shape.iter().product();
    let mut strides = vec![1usize; d];
    for k in (0..d - 1).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }

    // closed[c] counts points with p <= corner c on every axis, open[c] with p < c
    let mut closed = vec![0u32; cells];
    let mut open = vec![0u32; cells];
    'points: for p in pts.iter_rows() {
        let mut ci = 0;
        let mut oi = 0;
        let mut open_ok = true;
        for k in 0..d {
            let cand = &candidates[k];
            let c = cand.partition_point(|&t| t < p[k]);
            if c == cand.len() {
                continue 'points;
            }
            ci += c * strides[k];
            let o = cand.partition_point(|&t| t <= p[k]);
            if o == cand.len() {
                open_ok = false;
            } else {
                oi += o * strides[k];
            }
        }
        closed[ci] += 1;
        if open_ok {
            open[oi] += 1;
        }
    }
    for k in 0..d {
        prefix_sum_axis(&mut closed, &shape, &strides, k);
        prefix_sum_axis(&mut open, &shape, &strides, k);
    }

    let nf = n as f64;
    let mut worst: f64 = 0.0;
    let mut idx = vec![0usize; d];
    for cell in 0..cells {
        let mut rem = cell;
        for k in 0..d {
            idx[k] = rem / strides[k];
            rem %= strides[k];
        }
        let vol: f64 = (0..d).map(|k| candidates[k][idx[k]]).product();
        worst = worst
            .max(f64::from(closed[cell]) / nf - vol)
            .max(vol - f64::from(open[cell]) / nf);
    }
    Ok(worst)
}

fn thin(sorted: Vec<f64>, keep: usize) -> Vec<f64> {
    if sorted.len() <= keep {
        return sorted;
    }
    let last = sorted.len() - 1;
    (0..keep)
        .map(|i| sorted[(i * last + keep - 2) / (keep - 1)])
        .collect()
}

fn prefix_sum_axis(counts: &mut [u32], shape: &[usize], strides: &[usize], axis: usize) {
    let stride = strides[axis];
    for cell in 0..counts.len() {
        let pos = (cell / stride) % shape[axis];
        if pos > 0 {
            counts[cell] += counts[cell - stride];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn coords(ps: &PointSet) -> Vec<Vec<f64>> {
        ps.points().iter_rows().map(<[f64]>::to_vec).collect()
    }

    #[test]
    fn radical_inverse_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(6, 2), 0.375);
        assert_eq!(radical_inverse(5, 3), 7.0 / 9.0);
        assert_eq!(radical_inverse(0, 7), 0.0);
    }

    #[test]
    fn halton_examples() {
        assert_eq!(
            coords(&halton(3, 1).unwrap()),
            vec![vec![0.5], vec![0.25], vec![0.75]]
        );
        let h = coords(&halton(2, 2).unwrap());
        assert_abs_diff_eq!(h[0][0], 0.5);
        assert_abs_diff_eq!(h[0][1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[1][0], 0.25);
        assert_abs_diff_eq!(h[1][1], 2.0 / 3.0, epsilon = 1e-15);
        for d in [1, 5, 64] {
            let single = halton(1, d).unwrap();
            assert!(single.point(0).iter().all(|&v| v > 0.0 && v < 1.0));
            assert_eq!(single.point(0)[d - 1], 1.0 / PRIMES[d - 1] as f64);
        }
        assert!(halton(4, 65).is_err());
        assert!(halton(0, 2).is_err());
    }

    #[test]
    fn hammersley_examples() {
        assert_eq!(
            coords(&hammersley(4, 1).unwrap()),
            vec![vec![0.125], vec![0.375], vec![0.625], vec![0.875]]
        );
        assert_eq!(
            coords(&hammersley(2, 2).unwrap()),
            vec![vec![0.25, 0.5], vec![0.75, 0.25]]
        );
        assert!(hammersley(3, 65).is_ok());
        assert!(hammersley(3, 66).is_err());
    }

    #[test]
    fn hammersley_distinct_up_to_1024() {
        for d in 1..=8 {
            for n in 1..=1024 {
                assert!(
                    hammersley(n, d).unwrap().satisfies_invariants(),
                    "n={n} d={d}"
                );
            }
        }
    }

    #[test]
    fn sobol_first_points() {
        assert_eq!(
            coords(&sobol(3, 1, 1).unwrap()),
            vec![vec![0.5], vec![0.75], vec![0.25]]
        );
        let with_origin = sobol(2, 3, 0).unwrap();
        assert_eq!(with_origin.point(0), &[0.0, 0.0, 0.0]);
        for d in [1, 2, 8, 21, MAX_SOBOL_DIM] {
            let ps = sobol(300, d, 1).unwrap();
            assert!(ps.points().iter_rows().all(|p| p.iter().any(|&v| v != 0.0)));
            assert!(ps.satisfies_invariants());
        }
        assert!(sobol(4, MAX_SOBOL_DIM + 1, 1).is_err());
    }

    #[test]
    fn sobol_skip_matches_offset_slice() {
        let long = sobol(40, 5, 1).unwrap();
        let tail = sobol(20, 5, 21).unwrap();
        assert_eq!(tail.points(), &long.points().slice_rows(20, 40));
    }

    #[test]
    fn sobol_elementary_intervals() {
        // each aligned block of 16 indices is a (0,4,2)-net: every dyadic box
        // of area 1/16 holds exactly one point
        for skip in [0, 16, 32] {
            let ps = sobol(16, 2, skip).unwrap();
            for (a, b) in [(0u32, 4u32), (1, 3), (2, 2), (3, 1), (4, 0)] {
                let (nx, ny) = (1usize << a, 1usize << b);
                let mut counts = vec![0; nx * ny];
                for p in ps.points().iter_rows() {
                    counts[(p[0] * nx as f64) as usize * ny + (p[1] * ny as f64) as usize] += 1;
                }
                assert!(
                    counts.iter().all(|&c| c == 1),
                    "skip={skip} {a},{b}: {counts:?}"
                );
            }
        }
        // indices 1..=16 are not aligned: index 16 shares a square with index 4
        let shifted = sobol(16, 2, 1).unwrap();
        assert_eq!(shifted.point(15), &[0.09375, 0.46875]);
    }

    #[test]
    fn uniform_is_seeded() {
        let a = uniform(5, 2, 7).unwrap();
        assert_eq!(a, uniform(5, 2, 7).unwrap());
        assert_ne!(a.points(), uniform(5, 2, 8).unwrap().points());
        let b = uniform(2, 3, 3).unwrap();
        assert!(b.satisfies_invariants());
        let big = uniform(10_000, 1, 1).unwrap();
        let mean = big.points().as_slice().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn discrepancy_hand_values() {
        let single = PointSet {
            points: Matrix::from_rows(&[[0.5]]).unwrap(),
            info: halton(1, 1).unwrap().info,
        };
        assert_eq!(star_discrepancy_estimate(&single, 2).unwrap(), 0.5);
        let two = hammersley(2, 1).unwrap();
        assert_eq!(star_discrepancy_estimate(&two, 2).unwrap(), 0.25);
        assert!(star_discrepancy_estimate(&two, 1).is_err());
    }

    #[test]
    fn discrepancy_2d_against_brute_force() {
        // every corner from the coordinate grid, counted point by point
        let brute = |ps: &PointSet| {
            let n = ps.len() as f64;
            let mut xs = ps.points().column(0);
            let mut ys = ps.points().column(1);
            xs.push(1.0);
            ys.push(1.0);
            let mut worst: f64 = 0.0;
            for &tx in &xs {
                for &ty in &ys {
                    let closed = ps
                        .points()
                        .iter_rows()
                        .filter(|p| p[0] <= tx && p[1] <= ty)
                        .count();
                    let open = ps
                        .points()
                        .iter_rows()
                        .filter(|p| p[0] < tx && p[1] < ty)
                        .count();
                    let vol = tx * ty;
                    worst = worst
                        .max(closed as f64 / n - vol)
                        .max(vol - open as f64 / n);
                }
            }
            worst
        };
        for ps in [
            halton(37, 2).unwrap(),
            uniform(50, 2, 4).unwrap(),
            sobol(33, 2, 1).unwrap(),
        ] {
            let fast = star_discrepancy_estimate(&ps, 1000).unwrap();
            assert_abs_diff_eq!(fast, brute(&ps), epsilon = 1e-12);
        }
    }

    #[test]
    fn discrepancy_thinned_grid_is_lower_bound() {
        let ps = uniform(200, 2, 11).unwrap();
        let exact = star_discrepancy_estimate(&ps, 1000).unwrap();
        let coarse = star_discrepancy_estimate(&ps, 8).unwrap();
        assert!(coarse <= exact + 1e-15);
        let d3 = star_discrepancy_estimate(&halton(64, 3).unwrap(), 65).unwrap();
        assert!(d3 > 0.0 && d3 < 0.2);
    }

    #[test]
    fn kind_names() {
        for k in SequenceKind::ALL {
            assert_eq!(k.as_str().parse::<SequenceKind>().unwrap(), k);
        }
        assert!("lattice".parse::<SequenceKind>().is_err());
        assert_eq!(SequenceKind::default(), SequenceKind::Sobol);
    }
}
