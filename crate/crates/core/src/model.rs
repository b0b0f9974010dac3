//! Latent and noisy instances of the semi-random model.
//!
//! A latent instance is a `d x (n+1)` matrix `B` whose first `n` columns are
//! data points and whose last column is the query, all lying in a common
//! `k`-dimensional subspace. The observed matrix is `A = B + C` with i.i.d.
//! `N(0, σ²)` entries in `C`.
//!
//! Point indices are 0-based throughout the library.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DataMatrix, OrthonormalBasis, Vector};
use crate::rng::{rng_from_seed, sub_seed, Rng};

/// Absolute tolerance used by the distance invariants.
pub const GAP_TOLERANCE: f64 = 1e-8;

/// Redraws allowed when a shuffled instance has a rank-deficient half.
pub const MAX_GENERATION_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentInstance {
    b: DataMatrix,
    k: usize,
    epsilon: f64,
    nn_index: usize,
}

impl LatentInstance {
    /// Checks shape only (even `n ≥ 4`, `k ≤ d`, index in range). The
    /// distance and rank invariants are checked by [`verify_gap`] and
    /// [`check_invariants`].
    pub fn new(b: DataMatrix, k: usize, epsilon: f64, nn_index: usize) -> Result<Self> {
        let n = b.cols() - 1;
        if n < 4 || n % 2 != 0 {
            return Err(Error::param("n", format!("point count must be even and at least 4, got {n}")));
        }
        if k == 0 || k > b.rows() {
            return Err(Error::param("k", format!("must be in 1..={}, got {k}", b.rows())));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::param("eps", format!("must be a nonnegative number, got {epsilon}")));
        }
        if nn_index >= n {
            return Err(Error::param("nn_index", format!("{nn_index} is not below n = {n}")));
        }
        Ok(Self { b, k, epsilon, nn_index })
    }

    pub fn b(&self) -> &DataMatrix {
        &self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nn_index(&self) -> usize {
        self.nn_index
    }

    /// Number of data points (the query is not counted).
    pub fn n(&self) -> usize {
        self.b.cols() - 1
    }

    pub fn d(&self) -> usize {
        self.b.rows()
    }

    pub fn query(&self) -> Vector {
        self.b.column(self.n())
    }

    /// `‖p_j − q‖` for every data point.
    pub fn distances(&self) -> Vec<f64> {
        query_distances(self.b.as_matrix())
    }

    /// Data columns of one half (`0` or `1`), query excluded.
    pub fn half(&self, which: usize) -> DataMatrix {
        let h = self.n() / 2;
        self.b.column_range(which * h, (which + 1) * h)
    }

    /// One half with the query appended as its last column.
    pub fn half_with_query(&self, which: usize) -> DataMatrix {
        let h = self.n() / 2;
        let mut idx: Vec<usize> = (which * h..(which + 1) * h).collect();
        idx.push(self.n());
        self.b.select_columns(&idx)
    }

    /// Reorders the data columns: new column `j` is old column `perm[j]`.
    /// The query stays last and `nn_index` follows its point.
    pub fn permuted(&self, perm: &[usize]) -> Result<LatentInstance> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::param("perm", "not a permutation of the data columns"));
        }
        let mut idx = perm.to_vec();
        idx.push(n);
        let nn = perm.iter().position(|&p| p == self.nn_index).expect("permutation");
        LatentInstance::new(self.b.select_columns(&idx), self.k, self.epsilon, nn)
    }

    /// Whole instance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<LatentInstance> {
        LatentInstance::new(self.b.scaled(factor)?, self.k, self.epsilon, self.nn_index)
    }

    /// True when both data halves reach numerical rank `min(k, n/2)`.
    pub fn halves_have_full_rank(&self) -> bool {
        let target = self.k.min(self.n() / 2);
        (0..2).all(|h| linalg::numerical_rank(&self.half(h)) >= target)
    }
}

/// `‖m_j − m_last‖` for every column but the last.
pub(crate) fn query_distances(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.ncols() - 1;
    let q = m.column(n);
    (0..n).map(|j| (m.column(j) - q).norm()).collect()
}

/// True iff the nearest neighbor sits at distance 1 and every other point is
/// at least `1 + ε` from the query (absolute tolerance [`GAP_TOLERANCE`]).
pub fn verify_gap(inst: &LatentInstance) -> bool {
    let dist = inst.distances();
    let nn = inst.nn_index;
    (dist[nn] - 1.0).abs() <= GAP_TOLERANCE
        && dist
            .iter()
            .enumerate()
            .all(|(j, &dj)| j == nn || dj >= 1.0 + inst.epsilon - GAP_TOLERANCE)
}

/// Checks every latent-instance invariant: distance gap, common `k`-dimensional
/// span, and rank of both halves.
pub fn check_invariants(inst: &LatentInstance) -> Result<()> {
    if !verify_gap(inst) {
        return Err(Error::Precondition("distance gap does not hold".into()));
    }
    if inst.k < inst.d().min(inst.b.cols()) {
        let residual = rank_k_residual(&inst.b, inst.k)?;
        if residual > 1e-8 * inst.b.frobenius_norm() {
            return Err(Error::Precondition(format!(
                "columns are not in a {}-dimensional subspace (residual {residual:e})",
                inst.k
            )));
        }
    }
    if !inst.halves_have_full_rank() {
        return Err(Error::Precondition(format!("a data half has rank below {}", inst.k)));
    }
    Ok(())
}

/// Frobenius norm of what projecting `m` onto its top-`k` left singular
/// subspace removes.
pub fn rank_k_residual(m: &DataMatrix, k: usize) -> Result<f64> {
    let basis = linalg::top_k_left_singular_subspace(m, k)?;
    let u = basis.columns();
    let proj = u * u.tr_mul(m.as_matrix());
    Ok((m.as_matrix() - proj).norm())
}

/// Observed data `A = B + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyInstance {
    a: DataMatrix,
    sigma: f64,
    seed: u64,
}

impl NoisyInstance {
    pub fn new(a: DataMatrix, sigma: f64, seed: u64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { a, sigma, seed })
    }

    pub fn a(&self) -> &DataMatrix {
        &self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be a nonnegative number, got {sigma}")));
    }
    Ok(())
}

/// Adds i.i.d. `N(0, σ²)` noise drawn from the generator seeded with `seed`.
/// Entries are drawn in column-major order as `σ·z` with `z` standard
/// normal, so one seed gives the same noise shape at every σ.
pub fn perturb(inst: &LatentInstance, sigma: f64, seed: u64) -> Result<NoisyInstance> {
    check_sigma(sigma)?;
    let b = inst.b.as_matrix();
    let a = if sigma == 0.0 {
        b.clone()
    } else {
        let mut rng = rng_from_seed(seed);
        let mut a = b.clone();
        for x in a.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sigma * z;
        }
        a
    };
    Ok(NoisyInstance {
        a: DataMatrix::new(a)?,
        sigma,
        seed,
    })
}

/// Parameters of the controlled-spectrum synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Singular values of the first `n − 1` columns, nonincreasing.
    pub spectrum: Vec<f64>,
    pub epsilon: f64,
}

impl SyntheticParams {
    /// All `k` singular values equal to `value`.
    pub fn flat(n: usize, d: usize, k: usize, value: f64, epsilon: f64) -> Self {
        Self {
            n,
            d,
            k,
            spectrum: vec![value; k],
            epsilon,
        }
    }

    /// Same geometry with every singular value multiplied by `factor`.
    pub fn with_spectrum_scaled(&self, factor: f64) -> Self {
        Self {
            spectrum: self.spectrum.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let &Self { n, d, k, epsilon, .. } = self;
        if n < 4 || n % 2 != 0 {
            return Err(Error::param("n", format!("must be even and at least 4, got {n}")));
        }
        if d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        if k == 0 || k > d.min(n - 1) {
            return Err(Error::param("k", format!("must be in 1..={}, got {k}", d.min(n - 1))));
        }
        if self.spectrum.len() != k {
            return Err(Error::param(
                "spectrum",
                format!("needs {k} values, got {}", self.spectrum.len()),
            ));
        }
        if self.spectrum.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::param("spectrum", "values must be positive and finite"));
        }
        if self.spectrum.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("spectrum", "values must be nonincreasing"));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("eps", format!("must be positive, got {epsilon}")));
        }
        Ok(())
    }
}

/// The low-rank factor `X·Σ·Yᵀ` behind a synthetic instance, before the
/// query and its nearest neighbor are embedded.
#[derive(Debug, Clone)]
pub struct LatentFactor {
    /// `d x (n−1)` matrix with the prescribed spectrum.
    pub points: DataMatrix,
    /// Orthonormal basis `X` of the latent subspace.
    pub basis: OrthonormalBasis,
    /// Random direction in the latent subspace along which the query is placed.
    pub direction: Vector,
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_orthonormal(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, rows, cols).qr().q().columns(0, cols).into_owned()
}

fn draw_factor(params: &SyntheticParams, rng: &mut Rng) -> Result<LatentFactor> {
    let &SyntheticParams { n, d, k, .. } = params;
    let x = random_orthonormal(rng, d, k);
    let y = random_orthonormal(rng, n - 1, k);
    let sigma = DMatrix::from_diagonal(&Vector::from_column_slice(&params.spectrum));
    let points = DataMatrix::new(&x * sigma * y.transpose())?;
    let g = Vector::from_fn(k, |_, _| rng.sample(StandardNormal));
    let direction = &x * g;
    Ok(LatentFactor {
        points,
        basis: OrthonormalBasis::new(x)?,
        direction,
    })
}

/// Draws the low-rank factor that [`generate_synthetic`] starts from on its
/// first attempt.
pub fn draw_latent_factor(params: &SyntheticParams, seed: u64) -> Result<LatentFactor> {
    params.validate()?;
    draw_factor(params, &mut rng_from_seed(sub_seed(seed, 0)))
}

/// Builds a latent instance with controlled spectrum: `n − 1` points from
/// `X·Σ·Yᵀ`, then the query and its nearest neighbor placed collinearly
/// along a random latent direction, then the data columns shuffled.
///
/// The draws depend only on `(n, d, k, seed)`, so scaling the spectrum
/// with the same seed keeps `X`, `Y`, the direction and the shuffle.
pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<LatentInstance> {
    params.validate()?;
    let n = params.n;
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = rng_from_seed(sub_seed(seed, attempt));
        let factor = draw_factor(params, &mut rng)?;
        let (q, p_last) = embed_query_collinear(&factor.points, &factor.direction, params.epsilon)?;

        let mut cols: Vec<Vector> = factor.points.as_matrix().column_iter().map(|c| c.into_owned()).collect();
        cols.push(p_last);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let nn = perm.iter().position(|&p| p == n - 1).expect("permutation");
        let mut shuffled: Vec<Vector> = perm.iter().map(|&p| cols[p].clone()).collect();
        shuffled.push(q);

        let inst = LatentInstance::new(DataMatrix::from_columns(&shuffled)?, params.k, params.epsilon, nn)?;
        if inst.halves_have_full_rank() {
            return Ok(inst);
        }
    }
    Err(Error::Generation(format!(
        "no draw with full-rank halves after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Places a query `q = t₁·u` and a point `p = (t₁ + 1/‖u‖)·u` so that the
/// nearest of `points` is exactly `1 + ε` from `q` and `p` is exactly 1 from
/// `q`. `t₁` is the largest `t` at which some point is at distance `1 + ε`
/// from `t·u`, found from each point's quadratic in closed form.
///
/// `u` must lie in the span of `points` for the result to stay in the
/// latent subspace; that is not checked here.
pub fn embed_query_collinear(points: &DataMatrix, u: &Vector, epsilon: f64) -> Result<(Vector, Vector)> {
    if u.len() != points.rows() {
        return Err(Error::param("direction", "length does not match the point dimension"));
    }
    let uu = u.norm_squared();
    if !(uu > 0.0) {
        return Err(Error::param("direction", "must be nonzero"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::param("eps", "must be nonnegative"));
    }
    let radius_sq = (1.0 + epsilon) * (1.0 + epsilon);
    // ‖t·u − p‖² = r²  ⇔  uu·t² − 2(u·p)·t + (p·p − r²) = 0
    let t1 = points
        .as_matrix()
        .column_iter()
        .filter_map(|p| {
            let up = u.dot(&p);
            let disc = up * up - uu * (p.norm_squared() - radius_sq);
            (disc >= 0.0).then(|| (up + disc.sqrt()) / uu)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if !t1.is_finite() {
        return Err(Error::Generation(
            "no point reaches distance 1+ε along the query direction".into(),
        ));
    }
    let t2 = t1 + 1.0 / uu.sqrt();
    Ok((u * t1, u * t2))
}
