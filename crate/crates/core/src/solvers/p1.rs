//! `min ||D^T g||_1` subject to `||A g - y|| <= eps`.
//!
//! Primal-dual splitting on `K = [D^T; A]` with `G = 0` and
//! `F(u, v) = ||u||_1 + indicator(||v - y|| <= eps)`:
//!
//! ```text
//! p   <- clip(p + sigma D^T g_bar, -1, 1)
//! r   <- shrink(r + sigma A g_bar - sigma y, sigma eps)
//! g'  <- g - tau (D p + A^T r)
//! g_bar <- 2 g' - g
//! ```
//!
//! where `shrink(v, t) = v max(0, 1 - t / ||v||)`. Steps satisfy
//! `tau sigma (1 + ||A||^2) <= 1`.
//!
//! The final iterate is polished: candidate zero patterns of `D^T g` are
//! read off its smallest coefficients, the program restricted to each face
//! is solved in closed form, and a face solution is accepted when it is
//! feasible and either passes a KKT check or lowers the objective.

use std::collections::BTreeMap;

use crate::error::Result;
#[cfg(test)]
use crate::error::Error;
use crate::frames::TightFrame;
use crate::numerics::{self, DenseMatrix, Vector};
use crate::sensing::SensingModel;

use super::{candidate_zero_sets, check_model, objective, Feasible, Program, RecoveryResult, SolverOptions};

const POWER_ITERS: usize = 200;
const STEP_SAFETY: f64 = 1.01;
const KKT_TOL: f64 = 1e-8;

pub fn solve_p1(frame: &TightFrame, model: &SensingModel, opts: &SolverOptions) -> Result<RecoveryResult> {
    check_model(frame.n(), model)?;
    opts.validate()?;
    let a = &model.a;
    let y = &model.y;
    let eps = model.epsilon;
    let d = frame.matrix();
    let d_t = d.transpose();
    let feas = Feasible::new(model)?;
    let mut diag = BTreeMap::new();

    let finish = |f: Vector, iterations: usize, converged: bool, diag: BTreeMap<String, f64>, trace: Vec<f64>| {
        RecoveryResult {
            residual: feas.residual(&f),
            objective: objective(&d_t, &f, Program::P1),
            f_hat: f,
            iterations,
            converged,
            program: Program::P1,
            diagnostics: diag,
            trace,
        }
    };

    if feas.is_empty() {
        diag.insert("min_residual".into(), feas.min_residual());
        return Ok(finish(feas.f0.clone(), 0, false, diag, Vec::new()));
    }
    if y.norm() <= eps {
        return Ok(finish(Vector::zeros(frame.n()), 0, true, diag, Vec::new()));
    }

    let norm_a = numerics::operator_norm(a, POWER_ITERS, opts.seed);
    let step = 1.0 / (STEP_SAFETY * (1.0 + norm_a * norm_a)).sqrt();
    let (tau, sigma) = (step, step);
    diag.insert("tau".into(), tau);
    diag.insert("sigma".into(), sigma);
    diag.insert("norm_a".into(), norm_a);

    let mut f = feas.f0.clone();
    let mut f_bar = f.clone();
    let mut p = Vector::zeros(frame.d());
    let mut r = Vector::zeros(model.m());
    let mut best = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut violation = f64::INFINITY;

    for k in 1..=opts.max_iters {
        iterations = k;
        p += (&d_t * &f_bar) * sigma;
        p.apply(|v| *v = v.clamp(-1.0, 1.0));
        let v = &r + (a * &f_bar - y) * sigma;
        let vn = v.norm();
        r = if vn > 0.0 { v * (1.0 - sigma * eps / vn).max(0.0) } else { v };
        let f_new = &f - (d * &p + a.tr_mul(&r)) * tau;
        f_bar = &f_new * 2.0 - &f;
        change = (&f_new - &f).norm();
        let scale = 1.0 + f.norm();
        f = f_new;
        violation = (feas.residual(&f) - eps).max(0.0);

        let pulled = feas.pull(&f);
        best = best.min(objective(&d_t, &pulled, Program::P1));
        trace.push(best);

        if change <= opts.tol * scale && violation <= opts.tol {
            converged = true;
            break;
        }
    }
    diag.insert("last_change".into(), change);
    diag.insert("last_violation".into(), violation);

    let mut f_hat = feas.pull(&f);
    let mut obj = objective(&d_t, &f_hat, Program::P1);
    let mut certified = false;
    if let Some(pol) = polish(frame, &d_t, model, &feas, &f) {
        let pol_obj = objective(&d_t, &pol.f, Program::P1);
        if pol.certified || pol_obj <= obj {
            diag.insert("polish_threshold".into(), pol.threshold);
            diag.insert("kkt_residual".into(), pol.kkt_residual);
            certified = pol.certified;
            f_hat = pol.f;
            obj = pol_obj;
        }
    }
    diag.insert("kkt_certified".into(), if certified { 1.0 } else { 0.0 });
    diag.insert("iterate_objective".into(), objective(&d_t, &f, Program::P1));
    if let Some(last) = trace.last_mut() {
        *last = last.min(obj);
    }
    Ok(finish(f_hat, iterations, converged || certified, diag, trace))
}

struct Polished {
    f: Vector,
    certified: bool,
    kkt_residual: f64,
    threshold: f64,
}

fn polish(
    frame: &TightFrame,
    d_t: &DenseMatrix,
    model: &SensingModel,
    feas: &Feasible<'_>,
    f: &Vector,
) -> Option<Polished> {
    let x = d_t * f;
    let mut fallback: Option<Polished> = None;
    for (zero, rel) in candidate_zero_sets(&x) {
        let on: Vec<usize> = (0..x.len()).filter(|i| zero.binary_search(i).is_err()).collect();
        let signs: Vec<f64> = on.iter().map(|&i| x[i].signum()).collect();
        let cand = if model.epsilon == 0.0 {
            face_equality(frame, model, &zero)
        } else {
            face_ball(frame, model, &zero, &on, &signs)
        };
        let Some(g) = cand else { continue };
        let g = feas.pull(&g);
        if feas.residual(&g) > model.epsilon + 1e-12 * model.y.norm().max(1.0) {
            continue;
        }
        // The certificate uses the candidate's own sign pattern.
        let xg = d_t * &g;
        let tiny = 1e-14 * xg.amax();
        let (zero_g, on_g): (Vec<usize>, Vec<usize>) = (0..xg.len()).partition(|&i| xg[i].abs() <= tiny);
        let signs_g: Vec<f64> = on_g.iter().map(|&i| xg[i].signum()).collect();
        let kkt_residual = kkt_check(frame, model, &g, &zero_g, &on_g, &signs_g);
        let certified = kkt_residual.is_some();
        let out = Polished {
            f: g,
            certified,
            kkt_residual: kkt_residual.unwrap_or(f64::NAN),
            threshold: rel,
        };
        if certified {
            return Some(out);
        }
        let better = fallback
            .as_ref()
            .is_none_or(|fb| objective(d_t, &out.f, Program::P1) < objective(d_t, &fb.f, Program::P1));
        if better {
            fallback = Some(out);
        }
    }
    fallback
}

/// Solves `A g = y`, `D_Z^T g = 0` in the least-squares sense.
pub(crate) fn face_equality(frame: &TightFrame, model: &SensingModel, zero: &[usize]) -> Option<Vector> {
    let n = frame.n();
    let m = model.m();
    let mut stacked = DenseMatrix::zeros(m + zero.len(), n);
    stacked.rows_mut(0, m).copy_from(&model.a);
    for (k, &i) in zero.iter().enumerate() {
        stacked.row_mut(m + k).copy_from(&frame.matrix().column(i).transpose());
    }
    let mut rhs = Vector::zeros(m + zero.len());
    rhs.rows_mut(0, m).copy_from(&model.y);
    let (g, res) = numerics::least_squares_min_norm(&stacked, &rhs, numerics::RANK_TOL).ok()?;
    (res <= 1e-9 * model.y.norm().max(1.0)).then_some(g)
}

/// Minimizes `sum_{i in S} sign_i (D^T g)_i` over `{D_Z^T g = 0, ||A g - y|| <= eps}`.
fn face_ball(
    frame: &TightFrame,
    model: &SensingModel,
    zero: &[usize],
    on: &[usize],
    signs: &[f64],
) -> Option<Vector> {
    let basis = if zero.is_empty() {
        DenseMatrix::identity(frame.n(), frame.n())
    } else {
        numerics::null_space_basis(&frame.columns(zero).transpose(), numerics::RANK_TOL)
    };
    if basis.ncols() == 0 {
        return None;
    }
    let m_mat = &model.a * &basis;
    let h = m_mat.tr_mul(&m_mat);
    let chol = h.cholesky()?;
    let z0 = chol.solve(&m_mat.tr_mul(&model.y));
    let res0 = (&m_mat * &z0 - &model.y).norm_squared();
    let eps2 = model.epsilon * model.epsilon;
    if res0 >= eps2 {
        return None;
    }
    let mut dir = Vector::zeros(frame.n());
    for (&i, &s) in on.iter().zip(signs) {
        dir += frame.matrix().column(i) * s;
    }
    let g = basis.tr_mul(&dir);
    let hg = chol.solve(&g);
    let curv = g.dot(&hg);
    if !(curv > 0.0) {
        return None;
    }
    let t = ((eps2 - res0) / curv).sqrt();
    Some(&basis * (z0 - hg * t))
}

/// Returns the stationarity residual when a multiplier certificate exists:
/// `D_S sign + D_Z u + lambda A^T (A g - y) = 0` (or `+ A^T nu` when
/// `eps = 0`) with `|u| <= 1` and `lambda >= 0`.
fn kkt_check(
    frame: &TightFrame,
    model: &SensingModel,
    g: &Vector,
    zero: &[usize],
    on: &[usize],
    signs: &[f64],
) -> Option<f64> {
    let n = frame.n();
    let mut target = Vector::zeros(n);
    for (&i, &s) in on.iter().zip(signs) {
        target -= frame.matrix().column(i) * s;
    }
    let extra = if model.epsilon == 0.0 { model.m() } else { 1 };
    let mut sys = DenseMatrix::zeros(n, zero.len() + extra);
    for (k, &i) in zero.iter().enumerate() {
        sys.column_mut(k).copy_from(&frame.matrix().column(i));
    }
    if model.epsilon == 0.0 {
        sys.columns_mut(zero.len(), extra).copy_from(&model.a.transpose());
    } else {
        let r = &model.a * g - &model.y;
        sys.column_mut(zero.len()).copy_from(&model.a.tr_mul(&r));
    }
    let (sol, res) = numerics::least_squares_min_norm(&sys, &target, 1e-12).ok()?;
    let scale = 1.0 + target.norm();
    let u_ok = sol.rows(0, zero.len()).iter().all(|u| u.abs() <= 1.0 + KKT_TOL);
    let lambda_ok = model.epsilon == 0.0 || sol[zero.len()] >= -KKT_TOL;
    (res <= KKT_TOL * scale && u_ok && lambda_ok).then_some(res)
}
