//! Dense linear-algebra kernel: truncated SVD, subspace projection and the
//! spectral quantities the solvers and bound calculators need.
//!
//! Storage is nalgebra; SVDs go through faer, whose divide-and-conquer SVD
//! stays accurate on the rank-deficient blocks this crate works with.
//! Matrices are column-major, so column `j` (point `j`) is contiguous.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// Singular values below `RANK_TOLERANCE * s_1` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Tolerance for the orthonormality check on [`OrthonormalBasis`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// Dense `d x m` real matrix whose columns are points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::param(
                "matrix",
                format!("shape {}x{} is empty", matrix.nrows(), matrix.ncols()),
            ));
        }
        if let Some(pos) = matrix.iter().position(|x| !x.is_finite()) {
            let (r, c) = (pos % matrix.nrows(), pos / matrix.nrows());
            return Err(Error::param(
                "matrix",
                format!("entry ({r}, {c}) is not finite"),
            ));
        }
        Ok(Self(matrix))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_len(rows, cols, data.len())?;
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn from_column_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        check_len(rows, cols, data.len())?;
        Self::new(DMatrix::from_column_slice(rows, cols, data))
    }

    /// Builds a matrix from equal-length column vectors.
    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::param("matrix", "no columns"));
        }
        let d = columns[0].len();
        if let Some(bad) = columns.iter().position(|c| c.len() != d) {
            return Err(Error::param(
                "matrix",
                format!("column {bad} has length {}, expected {d}", columns[bad].len()),
            ));
        }
        Self::new(DMatrix::from_columns(columns))
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&Vector::from_column_slice(values)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn column(&self, j: usize) -> Vector {
        self.0.column(j).into_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Copy of columns `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> DataMatrix {
        assert!(start < end && end <= self.cols(), "column range {start}..{end} out of bounds");
        DataMatrix(self.0.columns(start, end - start).into_owned())
    }

    /// Copy of the listed columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> DataMatrix {
        assert!(!indices.is_empty());
        DataMatrix(self.0.select_columns(indices.iter()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, factor: f64) -> Result<DataMatrix> {
        DataMatrix::new(&self.0 * factor)
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows.checked_mul(cols) != Some(len) {
        return Err(Error::param(
            "matrix",
            format!("{len} entries cannot fill a {rows}x{cols} matrix"),
        ));
    }
    Ok(())
}

/// `d x k` matrix with orthonormal columns. Stands in for both a subspace and
/// its orthogonal projector; the `d x d` projector is never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: DMatrix<f64>,
}

impl OrthonormalBasis {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (d, k) = columns.shape();
        if k == 0 || k > d {
            return Err(Error::param("basis", format!("{k} columns in dimension {d}")));
        }
        let gram = columns.transpose() * &columns;
        let err = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if !(err <= ORTHONORMAL_TOLERANCE) {
            return Err(Error::Numeric(format!(
                "basis columns are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(Self { columns })
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Largest deviation of `columnsᵀ·columns` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.dim();
        (self.columns.transpose() * &self.columns - DMatrix::<f64>::identity(k, k)).amax()
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        self.check_dim(v.len())?;
        Ok(&self.columns * (self.columns.transpose() * v))
    }

    /// Coordinates `columnsᵀ·v`. Their norm equals the norm of the projection.
    pub fn coordinates(&self, v: &Vector) -> Result<Vector> {
        self.check_dim(v.len())?;
        Ok(self.columns.tr_mul(v))
    }

    /// Norm of the projection of every column of `m`, i.e. `‖P·m_j‖`.
    pub fn projected_column_norms(&self, m: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_dim(m.nrows())?;
        let coords = self.columns.tr_mul(m);
        Ok(coords.column_iter().map(|c| c.norm()).collect())
    }

    /// Dense `d x d` projector. Intended for small `d` (tests, diagnostics).
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.ambient_dim() {
            return Err(Error::param(
                "vector",
                format!("length {len} does not match ambient dimension {}", self.ambient_dim()),
            ));
        }
        Ok(())
    }
}

fn check_rank_arg(m: &DataMatrix, k: usize) -> Result<()> {
    let max = m.rows().min(m.cols());
    if k == 0 || k > max {
        return Err(Error::param("k", format!("must be in 1..={max}, got {k}")));
    }
    Ok(())
}

struct ThinSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    Ok(ThinSvd {
        u: from_faer(svd.U()),
        s: svd.S().column_vector().iter().copied().collect(),
        v: from_faer(svd.V()),
    })
}

fn svd_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    // faer reports non-convergence only for non-finite input
    to_faer(m).singular_values().expect("finite matrix")
}

/// Orthonormal basis of the span of the `k` leading left singular vectors.
pub fn top_k_left_singular_subspace(m: &DataMatrix, k: usize) -> Result<OrthonormalBasis> {
    check_rank_arg(m, k)?;
    let svd = thin_svd(&m.0)?;
    OrthonormalBasis::new(svd.u.columns(0, k).into_owned())
}

/// All singular values, nonincreasing.
pub fn singular_values(m: &DataMatrix) -> Vec<f64> {
    svd_values(&m.0)
}

/// The `k`-th largest singular value (1-based), or 0 when `k` exceeds the
/// numerical rank.
pub fn singular_value(m: &DataMatrix, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let s = singular_values(m);
    Ok(match s.get(k - 1) {
        Some(&v) if v > RANK_TOLERANCE * s[0] => v,
        _ => 0.0,
    })
}

/// Number of singular values above `RANK_TOLERANCE * s_1`.
pub fn numerical_rank(m: &DataMatrix) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > RANK_TOLERANCE * top).count(),
        _ => 0,
    }
}

/// Best rank-`k` approximation in Frobenius (and spectral) norm.
pub fn rank_k_approximation(m: &DataMatrix, k: usize) -> Result<DataMatrix> {
    check_rank_arg(m, k)?;
    let svd = thin_svd(&m.0)?;
    let mut us = svd.u.columns(0, k).into_owned();
    for (mut c, s) in us.column_iter_mut().zip(&svd.s) {
        c *= *s;
    }
    DataMatrix::new(us * svd.v.columns(0, k).transpose())
}

pub fn spectral_norm(m: &DataMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm of an arbitrary dense matrix.
pub fn matrix_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd_values(m).first().copied().unwrap_or(0.0)
}

/// Cosines of the principal angles between two subspaces, nonincreasing.
pub fn principal_cosines(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::param("basis", "subspaces live in different ambient spaces"));
    }
    let cross = a.columns.tr_mul(&b.columns);
    Ok(svd_values(&cross).into_iter().map(|c| c.min(1.0)).collect())
}

/// Sine of the largest principal angle between equal-dimension subspaces.
/// Equals `‖P_a − P_b‖` in that case.
pub fn max_principal_sine(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::param("basis", "subspace dimensions differ"));
    }
    let cos = principal_cosines(a, b)?;
    let smallest = cos.iter().copied().fold(1.0_f64, f64::min);
    Ok((1.0 - smallest * smallest).max(0.0).sqrt())
}

/// `‖P_a − P_b‖` from the materialized projectors. Only for small `d`.
pub fn projector_distance(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<f64> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::param("basis", "subspaces live in different ambient spaces"));
    }
    Ok(matrix_spectral_norm(&(a.projector() - b.projector())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    use crate::rng::rng_from_seed;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        gaussian(rows, cols, seed).qr().q().columns(0, cols).into_owned()
    }

    fn diag3() -> DataMatrix {
        DataMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(DataMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(DMatrix::zeros(0, 3)).is_err());
        assert!(DataMatrix::from_row_slice(2, 2, &[1.0; 3]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let m = DataMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.column(2).as_slice(), &[3.0, 6.0]);
        assert_eq!(m.to_row_major(), vec![1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn diagonal_top_two_is_first_two_axes() {
        let basis = top_k_left_singular_subspace(&diag3(), 2).unwrap();
        let p = basis.projector();
        let expected = DMatrix::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 0.0]));
        assert_abs_diff_eq!((p - expected).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_rank_full_k_projects_to_identity() {
        let m = DataMatrix::new(gaussian(5, 5, 1)).unwrap();
        let basis = top_k_left_singular_subspace(&m, 5).unwrap();
        let err = (basis.projector() - DMatrix::<f64>::identity(5, 5)).amax();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constructed_factors_recover_leading_columns() {
        let x = orthonormal(6, 4, 2);
        let y = orthonormal(4, 4, 3);
        let s = DMatrix::from_diagonal(&Vector::from_vec(vec![4.0, 3.0, 2.0, 1.0]));
        let m = DataMatrix::new(&x * s * y.transpose()).unwrap();
        let got = top_k_left_singular_subspace(&m, 2).unwrap();
        let want = OrthonormalBasis::new(x.columns(0, 2).into_owned()).unwrap();
        assert!(max_principal_sine(&got, &want).unwrap() < 1e-6);
    }

    #[test]
    fn k_out_of_range_is_parameter_error() {
        assert!(matches!(
            top_k_left_singular_subspace(&diag3(), 4),
            Err(Error::Parameter { name: "k", .. })
        ));
        assert!(top_k_left_singular_subspace(&diag3(), 0).is_err());
        assert!(rank_k_approximation(&diag3(), 0).is_err());
        assert!(singular_value(&diag3(), 0).is_err());
    }

    #[test]
    fn axis_projection() {
        let basis = OrthonormalBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let p = basis.project(&Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(p.as_slice(), &[3.0, 0.0]);
    }

    #[test]
    fn diagonal_rank_one_projection() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let basis = OrthonormalBasis::new(DMatrix::from_column_slice(2, 1, &[h, h])).unwrap();
        let p = basis.project(&Vector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn projection_of_member_is_identity() {
        let basis = OrthonormalBasis::new(orthonormal(7, 3, 4)).unwrap();
        let v = basis.columns() * Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let p = basis.project(&v).unwrap();
        assert!((p - &v).norm() <= 1e-8 * v.norm());
    }

    #[test]
    fn projection_dimension_mismatch() {
        let basis = OrthonormalBasis::new(orthonormal(4, 2, 5)).unwrap();
        assert!(basis.project(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let m = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(OrthonormalBasis::new(m).is_err());
    }

    #[test]
    fn singular_value_cases() {
        assert_eq!(singular_value(&diag3(), 2).unwrap(), 2.0);
        let u = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = Vector::from_vec(vec![-1.0, 0.5, 2.0, 1.0]);
        let rank1 = DataMatrix::new(&u * v.transpose()).unwrap();
        assert_eq!(singular_value(&rank1, 2).unwrap(), 0.0);
        assert_eq!(singular_value(&rank1, 9).unwrap(), 0.0);
        assert_eq!(numerical_rank(&rank1), 1);

        let x = orthonormal(4, 4, 6);
        let y = orthonormal(4, 4, 7);
        let s = DMatrix::from_diagonal(&Vector::from_vec(vec![5.0, 4.0, 0.5, 0.1]));
        let m = DataMatrix::new(&x * s * y.transpose()).unwrap();
        assert_abs_diff_eq!(singular_value(&m, 4).unwrap(), 0.1, epsilon = 1e-8);
    }

    #[test]
    fn rank_k_approximation_cases() {
        let r = rank_k_approximation(&diag3(), 2).unwrap();
        let want = DMatrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 0.0]));
        assert_abs_diff_eq!((r.as_matrix() - want).amax(), 0.0, epsilon = 1e-12);

        let m = DataMatrix::new(gaussian(3, 5, 8)).unwrap();
        let full = rank_k_approximation(&m, 3).unwrap();
        assert!((full.as_matrix() - m.as_matrix()).amax() < 1e-8);

        // spectrum (2, 1, 1): truncating to k=1 leaves √(1² + 1²)
        let x = orthonormal(3, 3, 9);
        let y = orthonormal(3, 3, 10);
        let s = DMatrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0, 1.0]));
        let m = DataMatrix::new(&x * s * y.transpose()).unwrap();
        let r = rank_k_approximation(&m, 1).unwrap();
        let err = (m.as_matrix() - r.as_matrix()).norm();
        assert_abs_diff_eq!(err, 2f64.sqrt(), epsilon = 1e-8);
        assert_eq!(numerical_rank(&r), 1);
    }

    #[test]
    fn spectral_norm_cases() {
        let zero = DataMatrix::new(DMatrix::zeros(3, 4)).unwrap();
        assert_eq!(spectral_norm(&zero), 0.0);
        assert_eq!(singular_value(&zero, 1).unwrap(), 0.0);
        let id = DataMatrix::new(DMatrix::identity(5, 5)).unwrap();
        assert_abs_diff_eq!(spectral_norm(&id), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spectral_norm(&diag3()), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn principal_angle_routes_agree() {
        let a = OrthonormalBasis::new(orthonormal(6, 2, 11)).unwrap();
        let b = OrthonormalBasis::new(orthonormal(6, 2, 12)).unwrap();
        let s = max_principal_sine(&a, &b).unwrap();
        let p = projector_distance(&a, &b).unwrap();
        assert_abs_diff_eq!(s, p, epsilon = 1e-10);
    }
}
