//! `min ||D^T g||_q^q` subject to `||A g - y|| <= eps`, `0 < q < 1`, by
//! smoothed iteratively reweighted least squares.
//!
//! At smoothing level `mu` the weights are `w_i = (x_i^2 + mu^2)^(q/2 - 1)`
//! with `x = D^T g`, and the next iterate minimizes `sum w_i (D^T g)_i^2`
//! over the constraint set. For `eps = 0` this is an exact equality-
//! constrained least-squares solve on the null space of `A`; for `eps > 0` a
//! penalty `lambda ||A g - y||^2` is calibrated by 40 bisection steps on
//! `log lambda`, keeping the feasible side, which puts the residual on the
//! boundary `eps` to well within `1e-3` relative. A step that would
//! raise the weighted objective is rejected, so the smoothed objective
//! `sum (x_i^2 + mu^2)^(q/2)` never increases at fixed `mu`.
//!
//! The smoothing leaves coefficients of order `mu` where the minimizer has
//! zeros. A final pass sets the smallest coefficients to zero exactly and
//! keeps the result when it is feasible and lowers the objective.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::frames::TightFrame;
use crate::numerics::{self, DenseMatrix, Vector};
use crate::sensing::SensingModel;

use super::p1::face_equality;
use super::{candidate_zero_sets, check_model, objective, Feasible, Program, RecoveryResult, SolverOptions};

const LS_TOL: f64 = 1e-14;
const BISECTION_STEPS: usize = 40;
const LOG_LAMBDA_RANGE: (f64, f64) = (-46.0, 46.0);

/// `sum (x_i^2 + mu^2)^(q/2)` with `x = D^T g`.
pub fn smoothed_objective(frame: &TightFrame, g: &Vector, q: f64, mu: f64) -> f64 {
    (frame.matrix().tr_mul(g))
        .iter()
        .map(|x| (x * x + mu * mu).powf(q / 2.0))
        .sum()
}

fn weights(x: &Vector, q: f64, mu: f64) -> Vector {
    let w = x.map(|v| (v * v + mu * mu).powf(q / 2.0 - 1.0));
    let wmax = w.max();
    w / wmax
}

/// Shared data of one IRLS run.
struct Workspace<'a> {
    frame: &'a TightFrame,
    model: &'a SensingModel,
    feas: Feasible<'a>,
    /// Orthonormal basis of `null(A)`.
    null: DenseMatrix,
}

impl<'a> Workspace<'a> {
    fn new(frame: &'a TightFrame, model: &'a SensingModel) -> Result<Self> {
        Ok(Workspace {
            frame,
            model,
            feas: Feasible::new(model)?,
            null: numerics::null_space_basis(&model.a, numerics::RANK_TOL),
        })
    }

    /// Weighted rows `diag(sqrt w) D^T`.
    fn weighted_analysis(&self, w: &Vector) -> DenseMatrix {
        let mut m = self.frame.matrix().transpose();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row *= w[i].sqrt();
        }
        m
    }

    fn step_equality(&self, w: &Vector) -> Result<Vector> {
        let f0 = &self.feas.f0;
        if self.null.ncols() == 0 {
            return Ok(f0.clone());
        }
        let wa = self.weighted_analysis(w);
        let (z, _) = numerics::least_squares_min_norm(&(&wa * &self.null), &(-(&wa * f0)), LS_TOL)?;
        Ok(f0 + &self.null * z)
    }

    fn penalized(&self, wa: &DenseMatrix, log_lambda: f64) -> Result<Vector> {
        let n = self.frame.n();
        let d = wa.nrows();
        let m = self.model.m();
        let root = (0.5 * log_lambda).exp();
        let mut stacked = DenseMatrix::zeros(d + m, n);
        stacked.rows_mut(0, d).copy_from(wa);
        stacked.rows_mut(d, m).copy_from(&(&self.model.a * root));
        let mut rhs = Vector::zeros(d + m);
        rhs.rows_mut(d, m).copy_from(&(&self.model.y * root));
        Ok(numerics::least_squares_min_norm(&stacked, &rhs, LS_TOL)?.0)
    }

    /// Returns the new iterate and the `log lambda` used.
    fn step_ball(&self, w: &Vector) -> Result<(Vector, f64)> {
        let eps = self.model.epsilon;
        let wa = self.weighted_analysis(w);
        let (mut lo, mut hi) = LOG_LAMBDA_RANGE;
        let mut best = self.penalized(&wa, hi)?;
        if self.feas.residual(&best) > eps {
            return Ok((self.feas.pull(&best), hi));
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let g = self.penalized(&wa, mid)?;
            let r = self.feas.residual(&g);
            if r > eps {
                lo = mid;
            } else {
                best = g;
                hi = mid;
            }
        }
        Ok((best, hi))
    }

    /// Zeroes small analysis coefficients; returns the best improving point
    /// and the threshold that produced it.
    fn prune(&self, g: &Vector, q: f64) -> Option<(Vector, f64)> {
        let d_t = self.frame.matrix().transpose();
        let x = &d_t * g;
        let program = Program::Pq { q };
        let limit = self
            .feas
            .residual(g)
            .max(self.model.epsilon + 1e-12 * self.model.y.norm().max(1.0));
        let mut best = objective(&d_t, g, program);
        let mut out = None;
        for (zero, rel) in candidate_zero_sets(&x) {
            if zero.is_empty() {
                continue;
            }
            let cand = if self.model.epsilon == 0.0 {
                face_equality(self.frame, self.model, &zero)
            } else {
                let basis = numerics::orthonormal_range_basis(&self.frame.columns(&zero), numerics::RANK_TOL);
                Some(g - &basis * basis.tr_mul(g))
            };
            let Some(cand) = cand else { continue };
            if self.feas.residual(&cand) > limit {
                continue;
            }
            let obj = objective(&d_t, &cand, program);
            if obj < best {
                best = obj;
                out = Some((cand, rel));
            }
        }
        out
    }

    /// Returns the next iterate, the penalty used, and whether the step was
    /// taken (`false` when the safeguard kept `g`).
    fn step(&self, g: &Vector, q: f64, mu: f64) -> Result<(Vector, Option<f64>, bool)> {
        let x = self.frame.matrix().tr_mul(g);
        let w = weights(&x, q, mu);
        let (next, lambda) = if self.model.epsilon == 0.0 {
            (self.step_equality(&w)?, None)
        } else {
            let (next, ll) = self.step_ball(&w)?;
            (next, Some(ll.exp()))
        };
        let weighted = |v: &Vector| -> f64 {
            let xv = self.frame.matrix().tr_mul(v);
            xv.iter().zip(w.iter()).map(|(a, b)| b * a * a).sum()
        };
        let feasible_now = self.feas.residual(g) <= self.model.epsilon + 1e-12 * self.model.epsilon.max(1.0);
        if feasible_now && weighted(&next) > weighted(g) {
            return Ok((g.clone(), lambda, false));
        }
        Ok((next, lambda, true))
    }
}

/// One reweighting step from `g` at smoothing level `mu`.
pub fn irls_step(frame: &TightFrame, model: &SensingModel, g: &Vector, q: f64, mu: f64) -> Result<Vector> {
    check_model(frame.n(), model)?;
    check_q(q)?;
    Ok(Workspace::new(frame, model)?.step(g, q, mu)?.0)
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::contract(format!("q must lie in (0, 1), got {q}")))
    }
}

pub fn solve_pq(frame: &TightFrame, model: &SensingModel, q: f64, opts: &SolverOptions) -> Result<RecoveryResult> {
    check_model(frame.n(), model)?;
    check_q(q)?;
    opts.validate()?;
    let ws = Workspace::new(frame, model)?;
    let d_t = frame.matrix().transpose();
    let program = Program::Pq { q };
    let mut diag = BTreeMap::new();
    let finish = |f: Vector, iterations: usize, converged: bool, diag: BTreeMap<String, f64>| RecoveryResult {
        residual: ws.feas.residual(&f),
        objective: objective(&d_t, &f, program),
        f_hat: f,
        iterations,
        converged,
        program,
        diagnostics: diag,
        trace: Vec::new(),
    };

    if ws.feas.is_empty() {
        diag.insert("min_residual".into(), ws.feas.min_residual());
        return Ok(finish(ws.feas.f0.clone(), 0, false, diag));
    }
    if model.y.norm() <= model.epsilon {
        return Ok(finish(Vector::zeros(frame.n()), 1, true, diag));
    }

    let mut f = ws.feas.f0.clone();
    let mut mu = (&d_t * &f).amax();
    if mu == 0.0 {
        return Ok(finish(f, 1, true, diag));
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut last_lambda = None;
    for k in 1..=opts.max_iters {
        iterations = k;
        let (next, lambda, taken) = ws.step(&f, q, mu)?;
        last_lambda = lambda;
        let change = (&next - &f).norm();
        let scale = 1.0 + f.norm();
        f = next;
        if change <= opts.tol * scale && (taken || mu <= opts.smoothing_floor) {
            converged = true;
            break;
        }
        mu = (opts.continuation_factor * mu).max(opts.smoothing_floor);
    }
    let mut f = ws.feas.pull(&f);
    if let Some((g, rel)) = ws.prune(&f, q) {
        f = g;
        diag.insert("prune_threshold".into(), rel);
    }
    diag.insert("mu".into(), mu);
    diag.insert("smoothed_objective".into(), smoothed_objective(frame, &f, q, mu));
    if let Some(l) = last_lambda {
        diag.insert("lambda".into(), l);
    }
    Ok(finish(f, iterations, converged, diag))
}
