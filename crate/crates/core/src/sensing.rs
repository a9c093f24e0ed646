//! Measurement matrices and observations `y = A f + z`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Vector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseMode {
    None,
    /// i.i.d. `N(0, sigma^2)` noise; the budget is set to the realized `||z||`.
    Gaussian { sigma: f64 },
    /// Gaussian direction rescaled to `||z||_2 = eps`.
    Bounded { eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    pub a: DenseMatrix,
    pub y: Vector,
    pub epsilon: f64,
    pub f_true: Option<Vector>,
    pub z: Option<Vector>,
}

impl SensingModel {
    /// Model for externally supplied data, without ground truth.
    pub fn new(a: DenseMatrix, y: Vector, epsilon: f64) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(Error::contract(format!(
                "observation has length {}, A has {} rows",
                y.len(),
                a.nrows()
            )));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::contract(format!("noise budget must be >= 0, got {epsilon}")));
        }
        Ok(SensingModel {
            a,
            y,
            epsilon,
            f_true: None,
            z: None,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// `||A f - y||_2`.
    pub fn residual(&self, f: &Vector) -> f64 {
        (&self.a * f - &self.y).norm()
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::contract(format!("matrix dimensions must be positive, got {m}x{n}")));
    }
    Ok(())
}

fn fill(kind: MatrixKind, m: usize, n: usize, g: &mut impl Rng) -> DenseMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = DenseMatrix::zeros(m, n);
    // row-major draw order
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = match kind {
                MatrixKind::Gaussian => {
                    let x: f64 = StandardNormal.sample(g);
                    x * scale
                }
                MatrixKind::Bernoulli => {
                    if g.random::<bool>() {
                        scale
                    } else {
                        -scale
                    }
                }
            };
        }
    }
    a
}

/// `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    check_dims(m, n)?;
    Ok(fill(MatrixKind::Gaussian, m, n, &mut rng::stream(seed, 0)))
}

/// `m x n` matrix with i.i.d. `+-1/sqrt(m)` entries.
pub fn gen_bernoulli(m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    check_dims(m, n)?;
    Ok(fill(MatrixKind::Bernoulli, m, n, &mut rng::stream(seed, 0)))
}

pub fn gen_matrix(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    match kind {
        MatrixKind::Gaussian => gen_gaussian(m, n, seed),
        MatrixKind::Bernoulli => gen_bernoulli(m, n, seed),
    }
}

/// Observes `f` through `A` with the requested noise model.
pub fn measure(a: &DenseMatrix, f: &Vector, noise: NoiseMode, seed: u64) -> Result<SensingModel> {
    if f.len() != a.ncols() {
        return Err(Error::contract(format!(
            "signal has length {}, A has {} columns",
            f.len(),
            a.ncols()
        )));
    }
    let m = a.nrows();
    let mut g = rng::stream(seed, 0);
    let mut gauss = || Vector::from_fn(m, |_, _| StandardNormal.sample(&mut g));
    let (z, epsilon) = match noise {
        NoiseMode::None => (Vector::zeros(m), 0.0),
        NoiseMode::Gaussian { sigma } => {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::contract(format!("sigma must be >= 0, got {sigma}")));
            }
            let z = gauss() * sigma;
            let eps = z.norm();
            (z, eps)
        }
        NoiseMode::Bounded { eps } => {
            if !(eps >= 0.0) || !eps.is_finite() {
                return Err(Error::contract(format!("eps must be >= 0, got {eps}")));
            }
            let dir = gauss();
            let norm = dir.norm();
            let z = if eps == 0.0 || norm == 0.0 {
                Vector::zeros(m)
            } else {
                dir * (eps / norm)
            };
            (z, eps)
        }
    };
    let y = a * f + &z;
    Ok(SensingModel {
        a: a.clone(),
        y,
        epsilon,
        f_true: Some(f.clone()),
        z: Some(z),
    })
}

/// Fraction of seeded trials with `| ||A nu||^2 - ||nu||^2 | >= delta ||nu||^2`.
///
/// Trial `t` draws its matrix from stream `(seed, t)`; the count is an
/// order-insensitive reduction.
pub fn concentration_probe(
    kind: MatrixKind,
    m: usize,
    nu: &Vector,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = nu.len();
    check_dims(m, n)?;
    if trials == 0 {
        return Err(Error::contract("concentration probe needs at least one trial"));
    }
    let energy = nu.norm_squared();
    if energy == 0.0 {
        return Err(Error::contract("concentration probe needs a nonzero vector"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain {
            what: "concentration_probe",
            requirement: "delta in (0, 1)",
            value: delta,
        });
    }
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = fill(kind, m, n, &mut rng::stream(seed, t as u64));
            ((a * nu).norm_squared() - energy).abs() >= delta * energy
        })
        .filter(|&hit| hit)
        .count();
    Ok(hits as f64 / trials as f64)
}
