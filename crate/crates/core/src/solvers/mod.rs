//! Analysis recovery programs.
//!
//! * `P1`: `min ||D^T g||_1` subject to `||A g - y|| <= eps`, by primal-dual
//!   splitting ([`p1::solve_p1`]).
//! * `Pq`: the same with `||D^T g||_q^q`, `0 < q < 1`, by smoothed IRLS
//!   ([`pq::solve_pq`]); returns a stationary point.
//! * `P0`: `min ||D^T g||_0` subject to `A g = y`, by exhaustive support
//!   search ([`p0::solve_p0_oracle`]).
//!
//! Both iterative solvers start from the minimum-norm feasible point
//! `A^+ y`.

pub mod p0;
pub mod p1;
pub mod pq;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, DenseMatrix, Vector};
use crate::sensing::SensingModel;

pub use p0::solve_p0_oracle;
pub use p1::solve_p1;
pub use pq::{irls_step, solve_pq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Program {
    P1,
    Pq { q: f64 },
    P0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub smoothing_floor: f64,
    pub continuation_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            tol: 1e-9,
            seed: 0,
            smoothing_floor: 1e-10,
            continuation_factor: 0.7,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::contract(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.smoothing_floor > 0.0) {
            return Err(Error::contract(format!(
                "smoothing_floor must be positive, got {}",
                self.smoothing_floor
            )));
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor < 1.0) {
            return Err(Error::contract(format!(
                "continuation_factor must lie in (0, 1), got {}",
                self.continuation_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    #[serde(with = "crate::serde17::vector")]
    pub f_hat: Vector,
    pub iterations: usize,
    pub converged: bool,
    #[serde(with = "crate::serde17")]
    pub residual: f64,
    #[serde(with = "crate::serde17")]
    pub objective: f64,
    pub program: Program,
    #[serde(with = "crate::serde17::map")]
    pub diagnostics: BTreeMap<String, f64>,
    /// Per-iteration objective record (`P1` only).
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Componentwise `sign(v_i) max(|v_i| - t, 0)`.
pub fn soft_threshold(v: &Vector, t: f64) -> Vector {
    v.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

/// Euclidean projection onto the ball of radius `r` around `center`.
pub fn project_l2_ball(v: &Vector, center: &Vector, r: f64) -> Vector {
    let diff = v - center;
    let norm = diff.norm();
    if norm <= r {
        v.clone()
    } else {
        center + diff * (r / norm)
    }
}

/// Entries counted as nonzero by the `l0` objective: `|x_i| > 1e-9 max(1, ||x||_inf)`.
pub const L0_TOL: f64 = 1e-9;

/// Largest relative magnitude a coefficient may have to be tried as a zero
/// when polishing a first-order solution.
pub(crate) const ZERO_CUT: f64 = 1e-3;

/// Small sets are enumerated exhaustively up to this size.
const SUBSET_LIMIT: usize = 8;

/// Candidate zero sets of `x`, smallest first, each with the relative
/// magnitude of its largest member. Entries with `|x_i| <= ZERO_CUT max |x|`
/// are small; every subset of the small entries is a candidate when there
/// are at most `SUBSET_LIMIT` of them, otherwise every prefix in order of
/// magnitude (ties to the lower index).
pub(crate) fn candidate_zero_sets(x: &Vector) -> Vec<(Vec<usize>, f64)> {
    let xmax = x.amax();
    if xmax == 0.0 {
        return Vec::new();
    }
    let mut small: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() <= ZERO_CUT * xmax).collect();
    small.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()).then(a.cmp(&b)));
    let rel = |set: &[usize]| set.iter().map(|&i| x[i].abs() / xmax).fold(0.0, f64::max);
    let mut out: Vec<(Vec<usize>, f64)> = if small.len() <= SUBSET_LIMIT {
        (0u32..1 << small.len())
            .map(|mask| {
                let mut set: Vec<usize> = (0..small.len()).filter(|&b| mask >> b & 1 == 1).map(|b| small[b]).collect();
                set.sort_unstable();
                set
            })
            .map(|set| {
                let r = rel(&set);
                (set, r)
            })
            .collect()
    } else {
        (0..=small.len())
            .map(|k| {
                let mut set = small[..k].to_vec();
                set.sort_unstable();
                let r = rel(&set);
                (set, r)
            })
            .collect()
    };
    out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn l0_objective(x: &Vector) -> f64 {
    let cut = L0_TOL * x.amax().max(1.0);
    x.iter().filter(|v| v.abs() > cut).count() as f64
}

/// Objective of `program` at `f`.
pub fn objective(d_t: &DenseMatrix, f: &Vector, program: Program) -> f64 {
    let x = d_t * f;
    match program {
        Program::P1 => numerics::l1_norm(&x),
        Program::Pq { q } => numerics::lq_pow(&x, q),
        Program::P0 => l0_objective(&x),
    }
}

pub(crate) fn check_model(n: usize, model: &SensingModel) -> Result<()> {
    if model.n() != n {
        return Err(Error::contract(format!(
            "A has {} columns but the frame acts on length-{n} signals",
            model.n()
        )));
    }
    if model.y.len() != model.m() {
        return Err(Error::contract("observation length does not match A"));
    }
    if !(model.epsilon >= 0.0) {
        return Err(Error::contract(format!("epsilon must be >= 0, got {}", model.epsilon)));
    }
    Ok(())
}

/// The constraint set `{g : ||A g - y|| <= eps}` and maps into it.
pub(crate) struct Feasible<'a> {
    a: &'a DenseMatrix,
    y: &'a Vector,
    eps: f64,
    pinv: DenseMatrix,
    /// Minimum-norm least-squares point `A^+ y`.
    pub f0: Vector,
    /// `A f0 - y`.
    r0: Vector,
}

impl<'a> Feasible<'a> {
    pub fn new(model: &'a SensingModel) -> Result<Self> {
        let a = &model.a;
        let pinv = numerics::pseudo_inverse(a, numerics::RANK_TOL)?;
        let f0 = &pinv * &model.y;
        let r0 = a * &f0 - &model.y;
        Ok(Feasible {
            a,
            y: &model.y,
            eps: model.epsilon,
            pinv,
            f0,
            r0,
        })
    }

    /// Smallest attainable residual.
    pub fn min_residual(&self) -> f64 {
        self.r0.norm()
    }

    pub fn is_empty(&self) -> bool {
        self.min_residual() > self.eps + 1e-9 * self.eps.max(self.y.norm()).max(1.0)
    }

    pub fn residual(&self, f: &Vector) -> f64 {
        (self.a * f - self.y).norm()
    }

    /// A feasible point near `f`: the projection onto `{A g = y}` when
    /// `eps = 0`, otherwise the point of the segment `[f0, f]` closest to `f`
    /// that meets the constraint.
    pub fn pull(&self, f: &Vector) -> Vector {
        let r = self.a * f - self.y;
        if self.eps == 0.0 {
            return f - &self.pinv * r;
        }
        if r.norm() <= self.eps {
            return f.clone();
        }
        let u = &r - &self.r0;
        let qa = u.norm_squared();
        if qa == 0.0 {
            return self.f0.clone();
        }
        let qb = self.r0.dot(&u);
        let qc = self.r0.norm_squared() - self.eps * self.eps;
        let disc = (qb * qb - qa * qc).max(0.0);
        let mut t = ((-qb + disc.sqrt()) / qa).clamp(0.0, 1.0);
        let mut g = &self.f0 + (f - &self.f0) * t;
        let mut step = 1e-15;
        while self.residual(&g) > self.eps && t > 0.0 {
            t = (t - step).max(0.0);
            step *= 4.0;
            g = &self.f0 + (f - &self.f0) * t;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&v(&[3.0, -1.0, 0.5]), 1.0), v(&[2.0, 0.0, 0.0]));
        let x = v(&[0.3, -2.0, 7.5]);
        assert_eq!(soft_threshold(&x, 0.0), x);
        assert_eq!(soft_threshold(&x, 7.5), Vector::zeros(3));
        assert_eq!(soft_threshold(&x, 100.0), Vector::zeros(3));
    }

    #[test]
    fn project_ball_examples() {
        let x = v(&[3.0, 4.0]);
        let c = Vector::zeros(2);
        assert_eq!(project_l2_ball(&x, &c, 5.0), x);
        let p = project_l2_ball(&x, &c, 2.5);
        assert!((p - v(&[1.5, 2.0])).norm() < 1e-15);
        assert_eq!(project_l2_ball(&x, &c, 0.0), c);
        let c = v(&[1.0, 1.0]);
        let p = project_l2_ball(&v(&[1.0, 5.0]), &c, 2.0);
        assert!((p - v(&[1.0, 3.0])).norm() < 1e-15);
    }

    #[test]
    fn options_defaults_and_validation() {
        let o = SolverOptions::default();
        assert_eq!(o.max_iters, 20_000);
        assert_eq!(o.tol, 1e-9);
        assert_eq!(o.smoothing_floor, 1e-10);
        assert_eq!(o.continuation_factor, 0.7);
        assert!(o.validate().is_ok());
        let parsed: SolverOptions = serde_json::from_str(r#"{"tol": 1e-6}"#).unwrap();
        assert_eq!(parsed.tol, 1e-6);
        assert_eq!(parsed.max_iters, 20_000);
        assert!(SolverOptions { continuation_factor: 1.0, ..o }.validate().is_err());
        assert!(SolverOptions { tol: 0.0, ..o }.validate().is_err());
    }

    #[test]
    fn pull_lands_in_constraint_set() {
        for seed in 0..20 {
            let a = crate::testutil::gaussian(6, 9, seed);
            let f = crate::testutil::gaussian_vec(9, seed + 1);
            let y = &a * &f;
            for eps in [0.0, 0.05, 0.5] {
                let model = SensingModel::new(a.clone(), y.clone(), eps).unwrap();
                let feas = Feasible::new(&model).unwrap();
                let far = crate::testutil::gaussian_vec(9, seed + 2) * 10.0;
                let g = feas.pull(&far);
                assert!(feas.residual(&g) <= eps + 1e-10, "{}", feas.residual(&g));
            }
        }
    }

    #[test]
    fn l0_counts_above_cutoff() {
        assert_eq!(l0_objective(&v(&[0.0, 1e-12, 2.0, -3.0])), 2.0);
        assert_eq!(l0_objective(&Vector::zeros(3)), 0.0);
    }
}
