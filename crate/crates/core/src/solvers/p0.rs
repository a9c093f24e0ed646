//! `min ||D^T g||_0` subject to `A g = y` by exhaustive support search.

use std::collections::BTreeMap;

use crate::drip::{binomial, next_combination, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::frames::TightFrame;
use crate::numerics::{self, DenseMatrix, Vector};
use crate::sensing::SensingModel;

use super::{check_model, objective, Program, RecoveryResult};

/// Supports are tried by size, then lexicographically; the first support `T`
/// for which `{A g = y, D_{T^c}^T g = 0}` is solvable with residual
/// `<= tol max(1, ||y||)` wins.
pub fn solve_p0_oracle(frame: &TightFrame, model: &SensingModel, s_max: usize, tol: f64) -> Result<RecoveryResult> {
    check_model(frame.n(), model)?;
    if model.epsilon > 0.0 {
        return Err(Error::contract(format!(
            "the l0 oracle requires epsilon = 0, got {}",
            model.epsilon
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::contract(format!("tol must be positive, got {tol}")));
    }
    let d = frame.d();
    let s_max = s_max.min(d);
    let supports: u128 = (0..=s_max).map(|k| binomial(d, k)).sum();
    if supports > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            supports,
            limit: ENUMERATION_LIMIT,
        });
    }

    let n = frame.n();
    let m = model.m();
    let d_t = frame.matrix().transpose();
    let cut = tol * model.y.norm().max(1.0);
    let mut rhs = Vector::zeros(m + d);
    rhs.rows_mut(0, m).copy_from(&model.y);
    let mut examined = 0u64;

    for k in 0..=s_max {
        let mut support: Vec<usize> = (0..k).collect();
        loop {
            examined += 1;
            let mut in_t = vec![false; d];
            for &i in &support {
                in_t[i] = true;
            }
            let off: Vec<usize> = (0..d).filter(|&i| !in_t[i]).collect();
            let mut stacked = DenseMatrix::zeros(m + off.len(), n);
            stacked.rows_mut(0, m).copy_from(&model.a);
            for (r, &i) in off.iter().enumerate() {
                stacked.row_mut(m + r).copy_from(&d_t.row(i));
            }
            let b = rhs.rows(0, m + off.len()).into_owned();
            let (g, residual) = numerics::least_squares_min_norm(&stacked, &b, numerics::RANK_TOL)?;
            if residual <= cut {
                let mut diagnostics = BTreeMap::new();
                diagnostics.insert("support_size".into(), k as f64);
                diagnostics.insert("supports_examined".into(), examined as f64);
                return Ok(RecoveryResult {
                    residual: model.residual(&g),
                    objective: objective(&d_t, &g, Program::P0),
                    f_hat: g,
                    iterations: examined as usize,
                    converged: true,
                    program: Program::P0,
                    diagnostics,
                    trace: Vec::new(),
                });
            }
            if k == 0 || !next_combination(&mut support, d) {
                break;
            }
        }
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("supports_examined".into(), examined as f64);
    let f_hat = Vector::zeros(n);
    Ok(RecoveryResult {
        residual: model.residual(&f_hat),
        objective: 0.0,
        f_hat,
        iterations: examined as usize,
        converged: false,
        program: Program::P0,
        diagnostics,
        trace: Vec::new(),
    })
}
