//! Dense linear-algebra kernels.
//!
//! Thin, checked wrappers around nalgebra's symmetric eigensolver and faer's
//! SVD. Matrices are nalgebra types throughout.
//! Everything here is a pure function of its inputs; randomized kernels take
//! an explicit seed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff used for every rank decision in the crate.
pub const RANK_TOL: f64 = 1e-10;

/// Default accuracy for eigen computations.
pub const EIG_TOL: f64 = 1e-10;

pub fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::contract(format!("{what} has non-finite entries")))
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_extremes(m: &DenseMatrix, tol: f64) -> Result<(f64, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::contract(format!(
            "sym_eig_extremes needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::contract("sym_eig_extremes on an empty matrix"));
    }
    check_finite(m, "matrix")?;
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > tol * scale {
        return Err(Error::contract(format!(
            "matrix is not symmetric (max |M - M^T| = {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    Ok((lo, hi))
}

/// Spectral norm of a symmetric matrix, `max |lambda|`.
pub fn sym_spectral_norm(m: &DenseMatrix) -> Result<f64> {
    let (lo, hi) = sym_eig_extremes(m, EIG_TOL)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Thin singular value decomposition `M = U diag(s) V^T`.
pub struct Svd {
    pub u: DenseMatrix,
    /// Singular values, in decreasing order.
    pub s: Vector,
    pub v_t: DenseMatrix,
}

/// Thin SVD of a matrix with at least one row and one column.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::contract("svd of an empty matrix"));
    }
    check_finite(m, "matrix")?;
    let f = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let dec = f
        .thin_svd()
        .map_err(|e| Error::contract(format!("svd did not converge: {e:?}")))?;
    let k = rows.min(cols);
    let (u, sv, v) = (dec.U(), dec.S().column_vector(), dec.V());
    Ok(Svd {
        u: DenseMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        s: Vector::from_fn(k, |i, _| sv[i]),
        v_t: DenseMatrix::from_fn(k, cols, |i, j| v[(j, i)]),
    })
}

/// Orthonormal basis of `range(M)`.
///
/// Left singular vectors with `sigma <= tol * sigma_max` are dropped. The
/// kept columns are ordered by decreasing singular value. An all-zero input
/// yields a matrix with zero columns.
pub fn orthonormal_range_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 || m.amax() == 0.0 {
        return DenseMatrix::zeros(rows, 0);
    }
    let Ok(svd) = svd(m) else {
        return DenseMatrix::zeros(rows, 0);
    };
    let u = &svd.u;
    let sigma_max = svd.s.max();
    let mut keep: Vec<(f64, usize)> = svd
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * sigma_max)
        .map(|(i, &s)| (s, i))
        .collect();
    keep.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let cols: Vec<_> = keep.iter().map(|&(_, i)| u.column(i).into_owned()).collect();
    if cols.is_empty() {
        DenseMatrix::zeros(rows, 0)
    } else {
        DenseMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of `null(M)` (`ncols x k`).
pub fn null_space_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    let n = m.ncols();
    let row_space = orthonormal_range_basis(&m.transpose(), tol);
    let complement = DenseMatrix::identity(n, n) - &row_space * row_space.transpose();
    orthonormal_range_basis(&complement, 1e-8)
}

/// Moore-Penrose pseudo-inverse; singular values `<= tol * sigma_max` are
/// treated as zero.
pub fn pseudo_inverse(m: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    let mut p = DenseMatrix::zeros(cols, rows);
    if rows == 0 || cols == 0 || m.amax() == 0.0 {
        return Ok(p);
    }
    let svd = svd(m)?;
    let sigma_max = svd.s.max();
    for (i, &s) in svd.s.iter().enumerate() {
        if s > tol * sigma_max {
            p += svd.v_t.row(i).transpose() * svd.u.column(i).transpose() / s;
        }
    }
    Ok(p)
}

/// Minimum-norm least-squares solution of `M x ~ b` via a truncated SVD.
///
/// Returns `(x, ||M x - b||_2)`.
pub fn least_squares_min_norm(m: &DenseMatrix, b: &Vector, tol: f64) -> Result<(Vector, f64)> {
    if b.len() != m.nrows() {
        return Err(Error::contract(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.nrows()
        )));
    }
    let mut x = Vector::zeros(m.ncols());
    if m.nrows() > 0 && m.ncols() > 0 && m.amax() > 0.0 {
        let svd = svd(m)?;
        let (u, v_t) = (&svd.u, &svd.v_t);
        let sigma_max = svd.s.max();
        for (i, &s) in svd.s.iter().enumerate() {
            if s > tol * sigma_max {
                let coef = u.column(i).dot(b) / s;
                x.axpy(coef, &v_t.row(i).transpose(), 1.0);
            }
        }
    }
    let residual = (m * &x - b).norm();
    Ok((x, residual))
}

/// Power-iteration estimate of the largest singular value.
///
/// Runs `iters` steps on `M^T M` from a seeded Gaussian start. The result is
/// a Rayleigh-quotient value and therefore never exceeds `sigma_max(M)`
/// beyond round-off.
pub fn operator_norm(m: &DenseMatrix, iters: usize, seed: u64) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut g = rng::stream(seed, 0);
    let mut v = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut g));
    let mut nv = v.norm();
    if nv == 0.0 {
        v = Vector::from_element(n, 1.0);
        nv = v.norm();
    }
    v /= nv;
    for _ in 0..iters.max(1) {
        let w = m.tr_mul(&(m * &v));
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        v = w / nw;
    }
    (m * &v).norm()
}

pub fn l1_norm(x: &Vector) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `sum |x_i|^q`, the `q`-th power of the `lq` quasi-norm.
pub fn lq_pow(x: &Vector, q: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(q)).sum()
}

/// `(sum |x_i|^q)^(1/q)`.
pub fn lq_norm(x: &Vector, q: f64) -> f64 {
    if q == 1.0 {
        l1_norm(x)
    } else {
        lq_pow(x, q).powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut g = rng::stream(seed, 0);
        let a = DenseMatrix::from_fn(n, n, |_, _| g.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn eig_extremes_examples() {
        let (lo, hi) = sym_eig_extremes(&DenseMatrix::identity(2, 2), EIG_TOL).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-14);

        let d = DenseMatrix::from_diagonal(&Vector::from_vec(vec![0.25, 4.0]));
        let (lo, hi) = sym_eig_extremes(&d, EIG_TOL).unwrap();
        assert_abs_diff_eq!(lo, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 4.0, epsilon = 1e-14);

        // (2 - l)^2 - 1 = 0
        let m = DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = sym_eig_extremes(&m, EIG_TOL).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-13);
    }

    #[test]
    fn eig_rejects_bad_shapes() {
        assert!(sym_eig_extremes(&DenseMatrix::zeros(2, 3), EIG_TOL).is_err());
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            sym_eig_extremes(&m, EIG_TOL),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rayleigh_quotients_lie_between_extremes() {
        for seed in 0..5 {
            let m = random_symmetric(7, seed);
            let (lo, hi) = sym_eig_extremes(&m, EIG_TOL).unwrap();
            let mut g = rng::stream(seed, 99);
            for _ in 0..1000 {
                let v = Vector::from_fn(7, |_, _| StandardNormal.sample(&mut g));
                let r = v.dot(&(&m * &v)) / v.dot(&v);
                assert!(r >= lo - 1e-8 && r <= hi + 1e-8);
            }
        }
    }

    #[test]
    fn range_basis_examples() {
        let b = orthonormal_range_basis(&DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]), RANK_TOL);
        assert_eq!(b.ncols(), 1);
        assert_abs_diff_eq!(b[(0, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[(1, 0)], 0.0, epsilon = 1e-14);

        let b = orthonormal_range_basis(&DenseMatrix::identity(3, 3), RANK_TOL);
        assert_eq!(b.ncols(), 3);
        assert!((b.tr_mul(&b) - DenseMatrix::identity(3, 3)).amax() < 1e-14);

        let b = orthonormal_range_basis(&DenseMatrix::from_element(2, 2, 1.0), RANK_TOL);
        assert_eq!(b.ncols(), 1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(b[(0, 0)].abs(), r, epsilon = 1e-14);
        assert_abs_diff_eq!(b[(1, 0)].abs(), r, epsilon = 1e-14);

        let z = orthonormal_range_basis(&DenseMatrix::zeros(3, 2), RANK_TOL);
        assert_eq!((z.nrows(), z.ncols()), (3, 0));
    }

    #[test]
    fn svd_of_rank_one_projector() {
        // I - Q Q^T for an orthonormal Q with 11 columns in R^12.
        let mut g = rng::stream(3509, 0);
        let a = DenseMatrix::from_fn(12, 11, |_, _| StandardNormal.sample(&mut g));
        let q = a.qr().q();
        let p = DenseMatrix::identity(12, 12) - &q * q.transpose();
        let dec = svd(&p).unwrap();
        assert_abs_diff_eq!(dec.s[0], 1.0, epsilon = 1e-12);
        assert!(dec.s.rows(1, 11).amax() < 1e-12);
        let back = &dec.u * DenseMatrix::from_diagonal(&dec.s) * &dec.v_t;
        assert!((back - &p).amax() < 1e-13);
        let null = null_space_basis(&q.transpose(), RANK_TOL);
        assert_eq!(null.ncols(), 1);
        assert!((q.tr_mul(&null)).amax() < 1e-13);
    }

    #[test]
    fn pseudo_inverse_of_rank_deficient() {
        let m = DenseMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let p = pseudo_inverse(&m, RANK_TOL).unwrap();
        assert!((&m * &p * &m - &m).amax() < 1e-14);
        assert_abs_diff_eq!(p[(0, 0)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(p[(0, 1)], 0.4, epsilon = 1e-15);
        assert_eq!(pseudo_inverse(&DenseMatrix::zeros(2, 2), RANK_TOL).unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn range_basis_reconstructs_input() {
        for seed in 0..10 {
            let mut g = rng::stream(seed, 1);
            // rank-3 product of 6x3 and 3x5
            let l = DenseMatrix::from_fn(6, 3, |_, _| StandardNormal.sample(&mut g));
            let r = DenseMatrix::from_fn(3, 5, |_, _| StandardNormal.sample(&mut g));
            let m = l * r;
            let b = orthonormal_range_basis(&m, RANK_TOL);
            assert_eq!(b.ncols(), 3);
            assert!((b.tr_mul(&b) - DenseMatrix::identity(3, 3)).amax() <= 10.0 * RANK_TOL);
            let proj = &b * b.tr_mul(&m);
            assert!((&m - proj).norm() <= 10.0 * RANK_TOL * m.norm());
        }
    }

    #[test]
    fn least_squares_examples() {
        let b = Vector::from_vec(vec![0.3, -2.0, 5.0]);
        let (x, r) = least_squares_min_norm(&DenseMatrix::identity(3, 3), &b, RANK_TOL).unwrap();
        assert!((x - &b).amax() < 1e-14);
        assert!(r < 1e-14);

        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (x, r) = least_squares_min_norm(&m, &Vector::from_vec(vec![1.0, 1.0]), RANK_TOL).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-14);

        // x1 + x2 = 2 with minimal norm
        let m = DenseMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, r) = least_squares_min_norm(&m, &Vector::from_vec(vec![2.0]), RANK_TOL).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        assert!(r < 1e-14);

        assert!(least_squares_min_norm(&m, &Vector::zeros(2), RANK_TOL).is_err());
    }

    #[test]
    fn least_squares_is_locally_optimal() {
        let mut g = rng::stream(3, 0);
        let m = DenseMatrix::from_fn(8, 5, |_, _| StandardNormal.sample(&mut g));
        let b = Vector::from_fn(8, |_, _| StandardNormal.sample(&mut g));
        let (x, r) = least_squares_min_norm(&m, &b, RANK_TOL).unwrap();
        for _ in 0..1000 {
            let d = Vector::from_fn(5, |_, _| 1e-3 * Distribution::<f64>::sample(&StandardNormal, &mut g));
            assert!(r <= (&m * (&x + d) - &b).norm() + 1e-12);
        }
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&DenseMatrix::identity(3, 3), 50, 1), 1.0, epsilon = 1e-6);
        let d = DenseMatrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]));
        assert_abs_diff_eq!(operator_norm(&d, 50, 1), 3.0, epsilon = 1e-6);
        let n = DenseMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_abs_diff_eq!(operator_norm(&n, 50, 1), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn operator_norm_agrees_with_eigen_route() {
        for seed in 0..10 {
            let mut g = rng::stream(seed, 5);
            let m = DenseMatrix::from_fn(9, 6, |_, _| StandardNormal.sample(&mut g));
            let (_, hi) = sym_eig_extremes(&m.tr_mul(&m), EIG_TOL).unwrap();
            let exact = hi.sqrt();
            let est = operator_norm(&m, 2000, seed);
            assert!(est <= exact * (1.0 + 1e-6));
            assert!((est - exact).abs() <= 1e-5 * exact, "{est} vs {exact}");
            assert_eq!(est, operator_norm(&m, 2000, seed));
        }
    }
}
