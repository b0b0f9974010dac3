//! Nearest-neighbor solvers on the observed matrix `A` (`d x (n+1)`, query
//! in the last column).
//!
//! The split-SVD solver halves the data, learns a rank-`k` subspace from each
//! half, and measures the other half's query offsets inside it. Because the
//! subspace of one half is independent of the other half's noise, the squared
//! projected offset is an estimate of the latent squared distance biased by
//! exactly `2kσ²`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, DataMatrix, OrthonormalBasis};
use crate::model::{query_distances, LatentInstance};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnsAnswer {
    /// 0-based point index.
    pub index: usize,
    pub estimated_sq_distance: Option<f64>,
}

/// The two column halves of `A`, each with the query appended.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitView {
    pub first_half: DataMatrix,
    pub second_half: DataMatrix,
}

fn point_count(a: &DataMatrix) -> Result<usize> {
    let n = a.cols() - 1;
    if n < 4 || n % 2 != 0 {
        return Err(Error::param("n", format!("point count must be even and at least 4, got {n}")));
    }
    Ok(n)
}

pub fn split(a: &DataMatrix) -> Result<SplitView> {
    let n = point_count(a)?;
    let h = n / 2;
    let first: Vec<usize> = (0..h).chain([n]).collect();
    let second: Vec<usize> = (h..n).chain([n]).collect();
    Ok(SplitView {
        first_half: a.select_columns(&first),
        second_half: a.select_columns(&second),
    })
}

/// Configuration of the split-SVD solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSvd {
    /// Rank of the learned subspaces. Choosing more than the latent
    /// dimension is a heuristic for data that is only approximately low-rank.
    pub k: usize,
    /// Learn each half's subspace with the query column included. Off by
    /// default: excluding it keeps the subspace of one half independent of
    /// the noise it is applied to.
    pub include_query: bool,
}

impl SplitSvd {
    pub fn new(k: usize) -> Self {
        Self { k, include_query: false }
    }

    pub fn including_query(mut self, include: bool) -> Self {
        self.include_query = include;
        self
    }

    fn subspaces(&self, a: &DataMatrix) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
        let n = point_count(a)?;
        let h = n / 2;
        let max_k = a.rows().min(h);
        if self.k == 0 || self.k > max_k {
            return Err(Error::param("k", format!("must be in 1..={max_k}, got {}", self.k)));
        }
        let learn = |range: std::ops::Range<usize>| {
            let cols: Vec<usize> = if self.include_query {
                range.chain([n]).collect()
            } else {
                range.collect()
            };
            linalg::top_k_left_singular_subspace(&a.select_columns(&cols), self.k)
        };
        let (u1, u2) = par::join(|| learn(0..h), || learn(h..n));
        Ok((u1?, u2?))
    }

    /// `‖P_{U⁽²⁾}A⁽¹⁾x_j‖` for the first half and `‖P_{U⁽¹⁾}A⁽²⁾x_j‖` for the
    /// second, each indexed within its half.
    pub fn projected_norms(&self, a: &DataMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let (u1, u2) = self.subspaces(a)?;
        let n = a.cols() - 1;
        let h = n / 2;
        let m = a.as_matrix();
        let q = m.column(n);
        let offsets = |range: std::ops::Range<usize>| {
            let mut diff = m.columns(range.start, range.len()).into_owned();
            for mut c in diff.column_iter_mut() {
                c -= &q;
            }
            diff
        };
        let first = u2.projected_column_norms(&offsets(0..h))?;
        let second = u1.projected_column_norms(&offsets(h..n))?;
        Ok((first, second))
    }

    /// Index returned by the split-SVD rule.
    pub fn solve(&self, a: &DataMatrix) -> Result<NnsAnswer> {
        let (first, second) = self.projected_norms(a)?;
        let h = first.len();
        let j1 = argmin(&first);
        let j2 = argmin(&second);
        // strict `<`: an exact tie goes to the second half
        let index = if first[j1] < second[j2] { j1 } else { j2 + h };
        Ok(NnsAnswer {
            index,
            estimated_sq_distance: None,
        })
    }

    /// `‖P·A·x_j‖² − 2kσ²` for all `n` points, not clamped.
    pub fn raw_estimated_sq_distances(&self, a: &DataMatrix, sigma: f64) -> Result<Vec<f64>> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param("sigma", format!("must be a nonnegative number, got {sigma}")));
        }
        let (first, second) = self.projected_norms(a)?;
        let bias = 2.0 * self.k as f64 * sigma * sigma;
        Ok(first.iter().chain(&second).map(|x| x * x - bias).collect())
    }
}

/// First index of the minimum.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = j;
        }
    }
    best
}

/// Split-SVD nearest neighbor with the query excluded from the learned
/// subspaces.
pub fn svd_split_nns(a: &DataMatrix, k: usize) -> Result<NnsAnswer> {
    SplitSvd::new(k).solve(a)
}

/// Nearest neighbor by raw noisy distance `‖A(e_j − e_{n+1})‖`.
pub fn naive_nns(a: &DataMatrix) -> Result<NnsAnswer> {
    if a.cols() < 2 {
        return Err(Error::param("n", "need at least one data point"));
    }
    let dist = query_distances(a.as_matrix());
    let index = argmin(&dist);
    Ok(NnsAnswer {
        index,
        estimated_sq_distance: Some(dist[index] * dist[index]),
    })
}

/// Nearest neighbor of the latent data; the ground truth.
pub fn oracle_nns(inst: &LatentInstance) -> NnsAnswer {
    let dist = inst.distances();
    let index = argmin(&dist);
    NnsAnswer {
        index,
        estimated_sq_distance: Some(dist[index] * dist[index]),
    }
}

/// Latent squared-distance estimates `d̂_j²` for every point, clamped at 0.
pub fn estimated_sq_distances(a: &DataMatrix, k: usize, sigma: f64) -> Result<Vec<f64>> {
    Ok(SplitSvd::new(k)
        .raw_estimated_sq_distances(a, sigma)?
        .into_iter()
        .map(|x| x.max(0.0))
        .collect())
}

/// Indices of the `count` smallest estimated distances, nearest first. Ranks
/// by the unclamped estimates; ties go to the lower index.
pub fn knn(a: &DataMatrix, k: usize, sigma: f64, count: usize) -> Result<Vec<usize>> {
    let n = a.cols() - 1;
    if count == 0 || count > n {
        return Err(Error::param("knn", format!("must be in 1..={n}, got {count}")));
    }
    let est = SplitSvd::new(k).raw_estimated_sq_distances(a, sigma)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| est[i].total_cmp(&est[j]).then(i.cmp(&j)));
    order.truncate(count);
    Ok(order)
}

/// Noise-level estimate `s_{k+1}(A⁽¹⁾) / (√(n/2) + √d)` from the first data
/// half. A heuristic convenience; the solvers never need σ.
pub fn estimate_sigma(a: &DataMatrix, k: usize) -> Result<f64> {
    let n = point_count(a)?;
    let h = n / 2;
    if k + 1 > a.rows().min(h) {
        return Err(Error::param("k", format!("k + 1 must not exceed {}", a.rows().min(h))));
    }
    let s = linalg::singular_values(&a.column_range(0, h));
    Ok(s[k] / ((h as f64).sqrt() + (a.rows() as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SvdSplit,
    Naive,
}

impl Algorithm {
    pub fn solve(self, a: &DataMatrix, k: usize) -> Result<NnsAnswer> {
        match self {
            Algorithm::SvdSplit => svd_split_nns(a, k),
            Algorithm::Naive => naive_nns(a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SvdSplit => "SVD_SPLIT",
            Algorithm::Naive => "NAIVE",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" | "svd_split" | "svd-split" => Ok(Algorithm::SvdSplit),
            "naive" => Ok(Algorithm::Naive),
            _ => Err(Error::param("algo", format!("unknown algorithm `{s}`"))),
        }
    }
}
