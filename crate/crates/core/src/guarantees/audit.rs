//! Numerical audit of every inequality in the recovery argument.
//!
//! Given a frame `D`, a sensing model with ground truth `f`, a candidate
//! `f_hat` and the exact constant `delta_2s`, the audit partitions
//! `D^T h` (`h = f_hat - f`) into blocks and evaluates each inequality of the
//! chain leading to the error bounds. Every record must hold whenever the
//! preconditions hold; a failing record is a bug in the solver, the constant
//! or the audit.
//!
//! Record identifiers:
//!
//! | id | inequality |
//! |----|------------|
//! | `inner_product` | `<ADu, ADv> <= delta ||Du|| ||Dv|| + <Du, Dv>` over block pairs |
//! | `tail_energy` | `||sum_{j>=2} A D D_Tj^T h||^2 <= N^2` |
//! | `tail_minus_head` | `... - ||A D D_T01^T h||^2 <= N^2 - (1-delta) ||D_T01^T h||^2` |
//! | `tail_l2_by_l1` | `sum_{j>=2} ||D_Tj^T h||^2 <= w(1-w)/s S^2` |
//! | `block_shift_l1` | `sqrt(s) ||x||_2 <= ||x||_1 + s (max - min) / 4` per tail block |
//! | `tail_n_by_l1` | `N^2 <= (w(1-w) + delta (1-3w/4)^2) / s S^2` |
//! | `feasibility` | `||A h|| <= 2 eps` |
//! | `head_energy` | `||D_T01^T h||^2 <= (2 eps + N)^2 / (1-delta)` |
//! | `t23_upper` | `||A D D_T23^T h||^2 <= (1+delta) ||D_T23^T h||^2` |
//! | `t23_minus_head` | two-block analogue of `tail_minus_head` (`l <= 3`) |
//! | `tail_l2_by_lq` | `sum_{j>=2} ||D_Tj^T h||^2 <= (1-w) w^p / s^p S_q^(2/q)` |
//! | `block_shift_lq` | `s^(1/q-1/2) ||x||_2 <= ||x||_q + s^(1/q) (max - min)` per tail block |
//! | `tail_n_by_lq` | `N^2 <= ((1-w) w^p + delta) / s^p S_q^(2/q)` |
//! | `cone_l1`, `cone_lq` | `S <= 2 ||D_Tc^T f|| + ||D_T^T h||` (in `l1` or `lq^q`) |
//! | `block_sum_l1`, `block_sum_l1_few`, `block_sum_lq` | tail-block sums against the tail of `D^T f` |
//! | `error_bound_general`, `error_bound_few`, `error_bound_lq` | the final error bounds |
//!
//! Here `S = sum_{j>=1} ||D_Tj^T h||_1`, `S_q = sum_{j>=1} ||D_Tj^T h||_q^q`,
//! `w` is the partition share and `p = 2/q - 1`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::partition::{block_partition, BlockPartition, PartitionNorm};
use super::{
    constants_general, constants_q, constants_special, q_admissible, threshold_general,
    threshold_special,
};
use crate::error::{Error, Result};
use crate::frames::TightFrame;
use crate::numerics::{DenseMatrix, Vector};
use crate::sensing::SensingModel;

/// Relative slack tolerated before a record counts as violated.
pub const SLACK_TOL: f64 = 1e-8;
/// Feasibility tolerance on `||A g - y|| <= eps`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Relative tolerance of the minimizer surrogate `obj(f_hat) <= obj(f)`.
pub const SURROGATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityAuditRecord {
    pub lemma_id: String,
    #[serde(with = "crate::serde17")]
    pub lhs: f64,
    #[serde(with = "crate::serde17")]
    pub rhs: f64,
    #[serde(with = "crate::serde17")]
    pub slack: f64,
    pub holds: bool,
    #[serde(with = "crate::serde17::map")]
    pub intermediates: BTreeMap<String, f64>,
}

impl InequalityAuditRecord {
    pub fn new(lemma_id: &str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        InequalityAuditRecord {
            lemma_id: lemma_id.to_string(),
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL * rhs.abs().max(1.0),
            intermediates: BTreeMap::new(),
        }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        self.intermediates.insert(name.to_string(), value);
        self
    }
}

/// `true` when `residual <= eps` up to [`FEASIBILITY_TOL`].
pub fn is_feasible(residual: f64, eps: f64) -> bool {
    residual <= eps + FEASIBILITY_TOL * eps.max(1.0)
}

/// `sum |x_i|^q` (`q = 1` gives the `l1` norm).
fn objective(x: &Vector, q: f64) -> f64 {
    if q == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(q)).sum()
    }
}

/// Relative size of rounding errors in computed analysis coefficients.
pub const ROUNDOFF: f64 = 1e-14;

/// Checks the minimizer surrogate `sum |D^T f_hat|^q <= sum |D^T f|^q`.
///
/// The allowance is [`SURROGATE_TOL`] relative plus `d (ROUNDOFF ||x||_inf)^q`,
/// the most that rounding-level entries can add to the objective; for
/// `q < 1` that term dominates because `|x|^q` is steep near zero.
pub fn surrogate_holds(frame: &TightFrame, f: &Vector, f_hat: &Vector, q: f64) -> Result<bool> {
    let xf = frame.analysis(f)?;
    let xh = frame.analysis(f_hat)?;
    let of = objective(&xf, q);
    let oh = objective(&xh, q);
    let scale = xf.amax().max(xh.amax());
    let rounding = xf.len() as f64 * (ROUNDOFF * scale).powf(q);
    Ok(oh <= of + SURROGATE_TOL * of.max(1.0) + rounding)
}

/// Per-block quantities of `x = D^T h`.
struct Blocks<'a> {
    x: &'a Vector,
    d: &'a DenseMatrix,
    a: &'a DenseMatrix,
    p: &'a BlockPartition,
}

impl Blocks<'_> {
    fn restrict(&self, idx: &[usize]) -> Vector {
        let mut u = Vector::zeros(self.x.len());
        for &i in idx {
            u[i] = self.x[i];
        }
        u
    }

    /// `D D_T^T h`.
    fn synth(&self, idx: &[usize]) -> Vector {
        self.d * self.restrict(idx)
    }

    /// `A D D_T^T h`.
    fn sensed(&self, idx: &[usize]) -> Vector {
        self.a * self.synth(idx)
    }

    fn l2_sq(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.x[i] * self.x[i]).sum()
    }

    fn l1(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.x[i].abs()).sum()
    }

    fn lqq(&self, idx: &[usize], q: f64) -> f64 {
        idx.iter().map(|&i| self.x[i].abs().powf(q)).sum()
    }

    /// Largest and smallest magnitude of a block, padding short blocks with
    /// zeros up to size `s`.
    fn spread(&self, idx: &[usize]) -> (f64, f64) {
        let mags = idx.iter().map(|&i| self.x[i].abs());
        let max = mags.clone().fold(0.0, f64::max);
        let min = if idx.len() < self.p.s {
            0.0
        } else {
            mags.fold(f64::INFINITY, f64::min)
        };
        (max, min)
    }

    fn tail_blocks(&self) -> &[Vec<usize>] {
        if self.p.l >= 2 {
            &self.p.blocks[2..]
        } else {
            &[]
        }
    }
}

fn reject(msg: String) -> Error {
    Error::Rejected(msg)
}

/// Audits all inequalities that apply to `(frame, model, f_hat)`.
///
/// `model.f_true` must be set. `delta_2s` must be the exact constant of
/// `(A, D)` at order `2s`; the audit cannot check this. `q = 1` selects the
/// `l1` family, `q < 1` the `lq` family.
///
/// Rejected (not audited) when `f` or `f_hat` is infeasible, when `f_hat`
/// fails the minimizer surrogate, or when `delta_2s`, `s` or `q` are out of
/// range.
pub fn audit_lemmas(
    frame: &TightFrame,
    model: &SensingModel,
    f_hat: &Vector,
    s: usize,
    q: f64,
    delta_2s: f64,
) -> Result<Vec<InequalityAuditRecord>> {
    let f = model
        .f_true
        .as_ref()
        .ok_or_else(|| reject("ground-truth signal f is required".into()))?;
    let n = frame.n();
    let dim = frame.d();
    if model.n() != n || f.len() != n || f_hat.len() != n {
        return Err(Error::contract(format!(
            "dimension mismatch: frame n = {n}, A has {} columns, f has {}, f_hat has {}",
            model.n(),
            f.len(),
            f_hat.len()
        )));
    }
    if s == 0 || s > dim {
        return Err(reject(format!("order s must satisfy 1 <= s <= d = {dim}, got {s}")));
    }
    if !(0.0..1.0).contains(&delta_2s) {
        return Err(reject(format!("delta_2s must lie in [0, 1), got {delta_2s}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(reject(format!("q must lie in (0, 1], got {q}")));
    }
    let eps = model.epsilon;
    let r_true = model.residual(f);
    if !is_feasible(r_true, eps) {
        return Err(reject(format!(
            "f is infeasible: ||Af - y|| = {r_true:e} > eps = {eps:e}"
        )));
    }
    let r_hat = model.residual(f_hat);
    if !is_feasible(r_hat, eps) {
        return Err(reject(format!(
            "f_hat is infeasible: ||A f_hat - y|| = {r_hat:e} > eps = {eps:e}"
        )));
    }
    if !surrogate_holds(frame, f, f_hat, q)? {
        let what = if q == 1.0 { "||D^T f_hat||_1 <= ||D^T f||_1" } else { "||D^T f_hat||_q^q <= ||D^T f||_q^q" };
        return Err(reject(format!("minimizer surrogate {what} fails")));
    }

    let delta = delta_2s;
    let h = f_hat - f;
    let x_f = frame.analysis(f)?;
    let x_h = frame.analysis(&h)?;
    let part = block_partition(&x_f, &x_h, s, PartitionNorm::L1)?;
    let part_q = block_partition(&x_f, &x_h, s, PartitionNorm::for_q(q))?;
    let b = Blocks {
        x: &x_h,
        d: frame.matrix(),
        a: &model.a,
        p: &part,
    };
    let sf = s as f64;
    let l = part.l;
    let t0 = &part.blocks[0];
    let t01 = part.t01();
    let t23 = part.union(2, 3);
    let t0c = part.complement();
    let tail = b.tail_blocks();

    let mut out = Vec::new();

    // block pairs
    let synth: Vec<Vector> = part.blocks.iter().map(|blk| b.synth(blk)).collect();
    let sensed: Vec<Vector> = synth.iter().map(|w| &model.a * w).collect();
    let mut worst = InequalityAuditRecord::new("inner_product", 0.0, 0.0).with("pairs", 0.0);
    let mut pairs = 0usize;
    for i in 0..synth.len() {
        for j in i + 1..synth.len() {
            pairs += 1;
            let lhs = sensed[i].dot(&sensed[j]);
            let rhs = delta * synth[i].norm() * synth[j].norm() + synth[i].dot(&synth[j]);
            let rec = InequalityAuditRecord::new("inner_product", lhs, rhs)
                .with("block_i", i as f64)
                .with("block_j", j as f64);
            if pairs == 1 || rec.slack < worst.slack {
                worst = rec;
            }
        }
    }
    out.push(worst.with("pairs", pairs as f64));

    // tail energy
    let tail_l2: Vec<f64> = tail.iter().map(|blk| b.l2_sq(blk).sqrt()).collect();
    let tail_sq: f64 = tail_l2.iter().map(|v| v * v).sum();
    let tail_sum: f64 = tail_l2.iter().sum();
    let n_sq = tail_sq + delta * tail_sum * tail_sum;
    let n_big = n_sq.sqrt();
    let tail_idx: Vec<usize> = tail.iter().flatten().copied().collect();
    let a_tail_sq = b.sensed(&tail_idx).norm_squared();
    let a01_sq = b.sensed(&t01).norm_squared();
    let x01_sq = b.l2_sq(&t01);
    out.push(InequalityAuditRecord::new("tail_energy", a_tail_sq, n_sq).with("N", n_big));
    out.push(
        InequalityAuditRecord::new("tail_minus_head", a_tail_sq - a01_sq, n_sq - (1.0 - delta) * x01_sq)
            .with("N", n_big),
    );

    // l1 tail lemmas
    let s1: f64 = part.blocks[1..].iter().map(|blk| b.l1(blk)).sum();
    let w = part.omega;
    out.push(
        InequalityAuditRecord::new("tail_l2_by_l1", tail_sq, w * (1.0 - w) / sf * s1 * s1)
            .with("omega", w)
            .with("S", s1),
    );
    let mut shift = InequalityAuditRecord::new("block_shift_l1", 0.0, 0.0);
    for (k, blk) in tail.iter().enumerate() {
        let (max, min) = b.spread(blk);
        let rec = InequalityAuditRecord::new("block_shift_l1", sf.sqrt() * tail_l2[k], b.l1(blk) + sf * (max - min) / 4.0)
            .with("block", (k + 2) as f64);
        if k == 0 || rec.slack < shift.slack {
            shift = rec;
        }
    }
    out.push(shift);
    let g = 1.0 - 0.75 * w;
    out.push(
        InequalityAuditRecord::new("tail_n_by_l1", n_sq, (w * (1.0 - w) + delta * g * g) / sf * s1 * s1)
            .with("N", n_big)
            .with("omega", w),
    );

    // measurement consistency
    let ah = (&model.a * &h).norm();
    out.push(
        InequalityAuditRecord::new("feasibility", ah, 2.0 * eps)
            .with("residual_f", r_true)
            .with("residual_f_hat", r_hat),
    );
    out.push(
        InequalityAuditRecord::new("head_energy", x01_sq, (2.0 * eps + n_big).powi(2) / (1.0 - delta))
            .with("N", n_big),
    );

    // two-block variants
    let a23_sq = b.sensed(&t23).norm_squared();
    let x23_sq = b.l2_sq(&t23);
    out.push(
        InequalityAuditRecord::new("t23_upper", a23_sq, (1.0 + delta) * x23_sq)
            .with("synth_bound", (1.0 + delta) * b.synth(&t23).norm_squared()),
    );
    if l <= 3 {
        out.push(InequalityAuditRecord::new(
            "t23_minus_head",
            a23_sq - a01_sq,
            (1.0 + delta) * x23_sq - (1.0 - delta) * x01_sq,
        ));
    }

    // lq tail lemmas
    let p = 2.0 / q - 1.0;
    let bq = Blocks { p: &part_q, ..b };
    let sq: f64 = part_q.blocks[1..].iter().map(|blk| bq.lqq(blk, q)).sum();
    let wq = part_q.omega;
    let sq_pow = sq.powf(2.0 / q);
    out.push(
        InequalityAuditRecord::new("tail_l2_by_lq", tail_sq, (1.0 - wq) * wq.powf(p) / sf.powf(p) * sq_pow)
            .with("omega_q", wq)
            .with("S_q", sq),
    );
    let mut shift_q = InequalityAuditRecord::new("block_shift_lq", 0.0, 0.0);
    for (k, blk) in tail.iter().enumerate() {
        let (max, min) = bq.spread(blk);
        let rec = InequalityAuditRecord::new(
            "block_shift_lq",
            sf.powf(1.0 / q - 0.5) * tail_l2[k],
            bq.lqq(blk, q).powf(1.0 / q) + sf.powf(1.0 / q) * (max - min),
        )
        .with("block", (k + 2) as f64);
        if k == 0 || rec.slack < shift_q.slack {
            shift_q = rec;
        }
    }
    out.push(shift_q);
    out.push(
        InequalityAuditRecord::new("tail_n_by_lq", n_sq, ((1.0 - wq) * wq.powf(p) + delta) / sf.powf(p) * sq_pow)
            .with("N", n_big)
            .with("omega_q", wq),
    );

    let h_norm = h.norm();
    if q == 1.0 {
        let tail_f = t0c.iter().map(|&i| x_f[i].abs()).sum::<f64>();
        let head_h = b.l1(t0);
        out.push(InequalityAuditRecord::new("cone_l1", s1, 2.0 * tail_f + head_h).with("tail", tail_f));

        let sum_bound = |rho: f64| {
            2.0 / (1.0 - rho) * tail_f
                + 2.0 * std::f64::consts::SQRT_2 / ((1.0 - rho) * (1.0 - delta).sqrt()) * sf.sqrt() * eps
        };
        if delta < threshold_general() {
            let c = constants_general(delta)?;
            out.push(
                InequalityAuditRecord::new("block_sum_l1", s1, sum_bound(c.rho))
                    .with("N", n_big)
                    .with("rho", c.rho)
                    .with("omega", w),
            );
            out.push(
                InequalityAuditRecord::new("error_bound_general", h_norm, c.c0 * tail_f / sf.sqrt() + c.c1 * eps)
                    .with("C0", c.c0)
                    .with("C1", c.c1),
            );
        }
        if l <= 3 && delta < threshold_special() {
            let c = constants_special(delta)?;
            let n_few = ((1.0 + delta) * x23_sq).sqrt();
            out.push(
                InequalityAuditRecord::new("block_sum_l1_few", s1, sum_bound(c.rho))
                    .with("N", n_few)
                    .with("rho", c.rho)
                    .with("omega", w),
            );
            out.push(
                InequalityAuditRecord::new("error_bound_few", h_norm, c.c0 * tail_f / sf.sqrt() + c.c1 * eps)
                    .with("C0", c.c0)
                    .with("C1", c.c1),
            );
        }
    } else {
        let tail_fq = t0c.iter().map(|&i| x_f[i].abs().powf(q)).sum::<f64>();
        let head_hq = bq.lqq(t0, q);
        out.push(InequalityAuditRecord::new("cone_lq", sq, 2.0 * tail_fq + head_hq).with("tail_q", tail_fq));
        if q_admissible(delta, q)? {
            let c = constants_q(delta, q)?;
            let shrink = (1.0 - c.rho.powf(q)).powf(1.0 / q);
            let tail_norm = tail_fq.powf(1.0 / q);
            let rhs = 2f64.powf(2.0 / q - 1.0) / shrink * tail_norm
                + 2f64.powf(2.0 / q - 0.5) * sf.powf(1.0 / q - 0.5) * eps / (shrink * (1.0 - delta).sqrt());
            out.push(
                InequalityAuditRecord::new("block_sum_lq", sq.powf(1.0 / q), rhs)
                    .with("N", n_big)
                    .with("rho", c.rho)
                    .with("omega_q", wq),
            );
            out.push(
                InequalityAuditRecord::new(
                    "error_bound_lq",
                    h_norm,
                    c.c0 * tail_norm / sf.powf(1.0 / q - 0.5) + c.c1 * eps,
                )
                .with("C0", c.c0)
                .with("C1", c.c1),
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drip::exact_drip;
    use crate::sensing::{gen_gaussian, measure, NoiseMode};

    fn instance(seed: u64, eps: f64) -> (TightFrame, SensingModel, f64) {
        let frame = TightFrame::random(4, 6, seed).unwrap();
        let a = gen_gaussian(40, 4, seed).unwrap();
        let delta = exact_drip(&a, &frame, 2).unwrap().delta;
        let f = crate::testutil::gaussian_vec(4, seed + 100);
        let model = measure(&a, &f, NoiseMode::Bounded { eps }, seed).unwrap();
        (frame, model, delta)
    }

    #[test]
    fn zero_difference_holds_everywhere() {
        for seed in 0..10 {
            let (frame, model, delta) = instance(seed, 0.05);
            let f = model.f_true.clone().unwrap();
            for q in [1.0, 0.5] {
                let recs = audit_lemmas(&frame, &model, &f, 1, q, delta).unwrap();
                assert!(recs.iter().all(|r| r.holds), "{recs:?}");
                let ids: Vec<&str> = recs.iter().map(|r| r.lemma_id.as_str()).collect();
                for id in ["inner_product", "tail_energy", "tail_l2_by_l1", "feasibility", "head_energy"] {
                    assert!(ids.contains(&id));
                }
                for r in &recs {
                    if r.lemma_id.starts_with("tail") || r.lemma_id == "inner_product" || r.lemma_id == "t23_upper" {
                        assert!(r.lhs.abs() < 1e-12, "{r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_infeasible_candidates() {
        let (frame, model, delta) = instance(3, 0.01);
        let f = model.f_true.clone().unwrap();
        let far = &f + Vector::from_element(4, 1.0);
        let err = audit_lemmas(&frame, &model, &far, 1, 1.0, delta).unwrap_err();
        assert!(matches!(err, Error::Rejected(ref m) if m.contains("f_hat is infeasible")), "{err}");

        let mut no_truth = model.clone();
        no_truth.f_true = None;
        assert!(audit_lemmas(&frame, &no_truth, &f, 1, 1.0, delta).is_err());
        assert!(audit_lemmas(&frame, &model, &f, 1, 1.0, 1.0).is_err());
        assert!(audit_lemmas(&frame, &model, &f, 7, 1.0, delta).is_err());
    }

    #[test]
    fn rejects_surrogate_violation() {
        let frame = TightFrame::identity(3).unwrap();
        let a = DenseMatrix::identity(3, 3);
        let f = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let worse = Vector::from_vec(vec![1.0, 0.3, 0.0]);
        let model = SensingModel { f_true: Some(f.clone()), ..SensingModel::new(a, f.clone(), 0.5).unwrap() };
        let err = audit_lemmas(&frame, &model, &worse, 1, 1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("surrogate"));
    }

    #[test]
    fn record_rule_and_json() {
        let r = InequalityAuditRecord::new("x", 1.0 + 5e-9, 1.0);
        assert!(r.holds);
        let r = InequalityAuditRecord::new("x", 1.0 + 2e-8, 1.0);
        assert!(!r.holds);
        let r = InequalityAuditRecord::new("x", 1e6 * (1.0 + 5e-9), 1e6);
        assert!(r.holds);
        let json = serde_json::to_string(&r.with("N", 0.5)).unwrap();
        assert!(json.contains("\"lemma_id\":\"x\""));
        assert!(json.contains("\"N\":5.0000000000000000e-1"));
    }
}
