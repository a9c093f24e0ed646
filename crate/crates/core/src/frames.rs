//! Tight frames and best `s`-term approximation.
//!
//! A [`TightFrame`] stores `D` as an `n x d` matrix whose columns are the
//! frame vectors and whose rows are orthonormal, so `D D^T = I_n`,
//! `f = D D^T f` and `||D^T f||_2 = ||f||_2`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::QR;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io;
use crate::numerics::{self, DenseMatrix, Vector};
use crate::rng;

/// Maximum tolerated `||D D^T - I||` for a frame to count as tight.
pub const TIGHT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TightFrame {
    d: DenseMatrix,
}

/// Result of checking a candidate frame matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCheck {
    pub defect: f64,
    pub zero_columns: Vec<usize>,
}

impl FrameCheck {
    pub fn is_tight_frame(&self) -> bool {
        self.defect <= TIGHT_TOL && self.zero_columns.is_empty()
    }
}

/// `||M M^T - I||` in the spectral norm.
pub fn tightness_defect(m: &DenseMatrix) -> f64 {
    let n = m.nrows();
    let gram = m * m.transpose() - DenseMatrix::identity(n, n);
    numerics::sym_spectral_norm(&gram).unwrap_or(f64::INFINITY)
}

pub fn check_frame(m: &DenseMatrix) -> FrameCheck {
    let zero_columns = (0..m.ncols())
        .filter(|&j| m.column(j).iter().all(|&x| x == 0.0))
        .collect();
    FrameCheck {
        defect: tightness_defect(m),
        zero_columns,
    }
}

/// Largest normalized inner product between two distinct columns.
pub fn coherence_of(m: &DenseMatrix) -> Result<f64> {
    let d = m.ncols();
    if d < 2 {
        return Err(Error::contract("coherence needs at least two columns"));
    }
    let norms: Vec<f64> = (0..d).map(|j| m.column(j).norm()).collect();
    if norms.iter().any(|&x| x == 0.0) {
        return Err(Error::contract("coherence undefined for a zero column"));
    }
    let gram = m.tr_mul(m);
    let mut mu: f64 = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            mu = mu.max(gram[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu.min(1.0))
}

impl TightFrame {
    /// Validates `matrix` (`n x d`, `d >= n`) as a tight frame.
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() < matrix.nrows() {
            return Err(Error::contract(format!(
                "frame must be n x d with 1 <= n <= d, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        numerics::check_finite(&matrix, "frame")?;
        let check = check_frame(&matrix);
        if let Some(j) = check.zero_columns.first() {
            return Err(Error::contract(format!("frame column {j} is zero")));
        }
        if check.defect > TIGHT_TOL {
            return Err(Error::contract(format!(
                "not a tight frame: ||DD* - I|| = {:e}",
                check.defect
            )));
        }
        Ok(TightFrame { d: matrix })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("frame dimension must be positive"));
        }
        Ok(TightFrame {
            d: DenseMatrix::identity(n, n),
        })
    }

    /// Orthonormal DCT-II basis, one basis vector per column.
    pub fn dct(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("frame dimension must be positive"));
        }
        Ok(TightFrame {
            d: dct_matrix(n),
        })
    }

    /// `[B1 B2] / sqrt(2)` for two orthonormal `n x n` bases.
    pub fn union(b1: &DenseMatrix, b2: &DenseMatrix) -> Result<Self> {
        let n = b1.nrows();
        for (name, b) in [("B1", b1), ("B2", b2)] {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::contract(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            let defect = tightness_defect(b);
            if defect > TIGHT_TOL {
                return Err(Error::contract(format!(
                    "{name} is not orthonormal (defect {defect:e})"
                )));
            }
        }
        let mut d = DenseMatrix::zeros(n, 2 * n);
        d.columns_mut(0, n).copy_from(b1);
        d.columns_mut(n, n).copy_from(b2);
        d *= std::f64::consts::FRAC_1_SQRT_2;
        TightFrame::new(d)
    }

    /// Union of the identity and the DCT-II basis.
    pub fn identity_dct(n: usize) -> Result<Self> {
        TightFrame::union(&DenseMatrix::identity(n, n), &dct_matrix(n))
    }

    /// Random `n x d` frame: the first `n` columns of the orthogonal factor
    /// of a seeded Gaussian `d x d` matrix, transposed.
    pub fn random(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d < n {
            return Err(Error::contract(format!(
                "random frame needs 1 <= n <= d, got n={n}, d={d}"
            )));
        }
        let mut g = rng::stream(seed, 0);
        let gauss = DenseMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut g));
        let q = QR::new(gauss).q();
        let frame = q.columns(0, n).transpose();
        TightFrame::new(frame)
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn d(&self) -> usize {
        self.d.ncols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.d
    }

    pub fn redundancy(&self) -> f64 {
        self.d() as f64 / self.n() as f64
    }

    /// True when `d == n`, i.e. the frame is an orthonormal basis.
    pub fn is_basis(&self) -> bool {
        self.d() == self.n()
    }

    pub fn verify_tight(&self) -> f64 {
        tightness_defect(&self.d)
    }

    pub fn coherence(&self) -> Result<f64> {
        coherence_of(&self.d)
    }

    /// Analysis coefficients `D^T f`.
    pub fn analysis(&self, f: &Vector) -> Result<Vector> {
        if f.len() != self.n() {
            return Err(Error::contract(format!(
                "signal has length {}, frame dimension is {}",
                f.len(),
                self.n()
            )));
        }
        Ok(self.d.tr_mul(f))
    }

    /// Synthesis `D v`.
    pub fn synthesize(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.d() {
            return Err(Error::contract(format!(
                "coefficient vector has length {}, frame has {} vectors",
                v.len(),
                self.d()
            )));
        }
        Ok(&self.d * v)
    }

    /// Submatrix `D_T` of the columns in `support`.
    pub fn columns(&self, support: &[usize]) -> DenseMatrix {
        self.d.select_columns(support)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        TightFrame::new(io::read_matrix(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_matrix(path, &self.d)
    }
}

fn dct_matrix(n: usize) -> DenseMatrix {
    let nf = n as f64;
    DenseMatrix::from_fn(n, n, |j, k| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        c * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseApprox {
    pub s: usize,
    pub x_best: Vector,
    /// Kept indices, in decreasing order of magnitude.
    pub support: Vec<usize>,
    pub tail_l1: f64,
    pub q: f64,
    pub tail_lq: f64,
}

/// Indices of the `s` largest-magnitude entries, largest first; ties go to
/// the lower index.
pub fn top_indices(x: &Vector, s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx.truncate(s.min(x.len()));
    idx
}

/// Best `s`-term approximation `x_[s]` with its `l1` and `lq` tails.
pub fn best_s_term(x: &Vector, s: usize, q: f64) -> Result<SparseApprox> {
    if s > x.len() {
        return Err(Error::contract(format!(
            "sparsity {s} exceeds vector length {}",
            x.len()
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain {
            what: "best_s_term",
            requirement: "q in (0, 1]",
            value: q,
        });
    }
    let support = top_indices(x, s);
    let mut x_best = Vector::zeros(x.len());
    for &i in &support {
        x_best[i] = x[i];
    }
    let tail = x - &x_best;
    Ok(SparseApprox {
        s,
        tail_l1: numerics::l1_norm(&tail),
        tail_lq: numerics::lq_norm(&tail, q),
        x_best,
        support,
        q,
    })
}
