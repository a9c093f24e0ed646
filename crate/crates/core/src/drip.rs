//! Restricted isometry constants adapted to a frame.
//!
//! For a support `T` the constraint `(1-delta)||Dv||^2 <= ||ADv||^2 <=
//! (1+delta)||Dv||^2` over `v` supported on `T` is a statement about the
//! quadratic form `A^T A` on the subspace `range(D_T)`. With `B_T` an
//! orthonormal basis of that subspace, the tightest `delta` for `T` is
//! `max(lambda_max - 1, 1 - lambda_min)` of `B_T^T A^T A B_T`. Supports of
//! size exactly `s` dominate smaller ones because their ranges are nested,
//! so only those are enumerated.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::TightFrame;
use crate::numerics::{self, DenseMatrix, EIG_TOL, RANK_TOL};
use crate::rng;

/// Largest number of supports the exact routines will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethod {
    Exact,
    RandomLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RipReport {
    pub s: usize,
    #[serde(with = "crate::serde17")]
    pub delta: f64,
    pub method: RipMethod,
    /// Sorted support attaining `delta` (zero-based indices).
    pub witness_support: Vec<usize>,
    pub supports_examined: u64,
    /// Smallest restricted eigenvalue over the examined supports.
    #[serde(with = "crate::serde17")]
    pub lambda_min: f64,
    /// Largest restricted eigenvalue over the examined supports.
    #[serde(with = "crate::serde17")]
    pub lambda_max: f64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
pub fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut i = start;
        loop {
            let count = binomial(n - i - 1, remaining);
            if rank < count {
                break;
            }
            rank -= count;
            i += 1;
        }
        out.push(i);
        start = i + 1;
    }
    out
}

/// Advances `c` to the next `k`-subset of `0..n`; false when exhausted.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone)]
struct Extreme {
    delta: f64,
    order: u64,
    support: Vec<usize>,
    lambda_min: f64,
    lambda_max: f64,
}

impl Extreme {
    fn empty() -> Self {
        Extreme {
            delta: f64::NEG_INFINITY,
            order: u64::MAX,
            support: Vec::new(),
            lambda_min: f64::INFINITY,
            lambda_max: f64::NEG_INFINITY,
        }
    }

    fn offer(&mut self, order: u64, support: &[usize], extremes: Option<(f64, f64)>) {
        let delta = match extremes {
            Some((lo, hi)) => {
                self.lambda_min = self.lambda_min.min(lo);
                self.lambda_max = self.lambda_max.max(hi);
                (hi - 1.0).max(1.0 - lo).max(0.0)
            }
            None => 0.0,
        };
        if delta > self.delta || (delta == self.delta && order < self.order) {
            self.delta = delta;
            self.order = order;
            self.support = support.to_vec();
        }
    }

    fn merge(mut self, other: Extreme) -> Extreme {
        self.lambda_min = self.lambda_min.min(other.lambda_min);
        self.lambda_max = self.lambda_max.max(other.lambda_max);
        if other.delta > self.delta || (other.delta == self.delta && other.order < self.order) {
            self.delta = other.delta;
            self.order = other.order;
            self.support = other.support;
        }
        self
    }
}

/// Restricted eigenvalue extremes of `gram = A^T A` on `range(D_T)`, or
/// `None` when `D_T` has rank zero.
pub fn restricted_extremes(gram: &DenseMatrix, frame_cols: &DenseMatrix) -> Option<(f64, f64)> {
    let basis = numerics::orthonormal_range_basis(frame_cols, RANK_TOL);
    if basis.ncols() == 0 {
        return None;
    }
    let form = basis.tr_mul(&(gram * &basis));
    numerics::sym_eig_extremes(&form, EIG_TOL).ok()
}

/// Per-support `delta` of the D-RIP inequality.
pub fn support_delta(a: &DenseMatrix, frame: &TightFrame, support: &[usize]) -> f64 {
    let gram = a.tr_mul(a);
    match restricted_extremes(&gram, &frame.columns(support)) {
        Some((lo, hi)) => (hi - 1.0).max(1.0 - lo).max(0.0),
        None => 0.0,
    }
}

fn enumerate<F>(n: usize, k: usize, eval: F) -> Result<(Extreme, u64)>
where
    F: Fn(&[usize]) -> Option<(f64, f64)> + Sync,
{
    let total = binomial(n, k);
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            supports: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    let total = total as u64;
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let first = c * CHUNK;
            let last = (first + CHUNK).min(total);
            let mut comb = unrank_combination(n, k, first as u128);
            let mut local = Extreme::empty();
            for order in first..last {
                local.offer(order, &comb, eval(&comb));
                if order + 1 < last {
                    next_combination(&mut comb, n);
                }
            }
            local
        })
        .reduce(Extreme::empty, Extreme::merge);
    Ok((best, total))
}

fn check_shapes(a: &DenseMatrix, frame: &TightFrame, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::contract("RIP order must be at least 1"));
    }
    if a.ncols() != frame.n() {
        return Err(Error::contract(format!(
            "A has {} columns, frame dimension is {}",
            a.ncols(),
            frame.n()
        )));
    }
    numerics::check_finite(a, "measurement matrix")
}

fn report(s: usize, method: RipMethod, best: Extreme, examined: u64) -> RipReport {
    RipReport {
        s,
        delta: best.delta.max(0.0),
        method,
        witness_support: best.support,
        supports_examined: examined,
        lambda_min: best.lambda_min,
        lambda_max: best.lambda_max,
    }
}

/// Exact D-RIP constant of order `s` by enumerating every support of size
/// `min(s, d)`.
pub fn exact_drip(a: &DenseMatrix, frame: &TightFrame, s: usize) -> Result<RipReport> {
    check_shapes(a, frame, s)?;
    let gram = a.tr_mul(a);
    let k = s.min(frame.d());
    let (best, total) = enumerate(frame.d(), k, |t| {
        restricted_extremes(&gram, &frame.columns(t))
    })?;
    Ok(report(s, RipMethod::Exact, best, total))
}

/// Classical RIP constant `max_T ||A_T^T A_T - I||`.
pub fn exact_rip(a: &DenseMatrix, s: usize) -> Result<RipReport> {
    if s == 0 {
        return Err(Error::contract("RIP order must be at least 1"));
    }
    numerics::check_finite(a, "measurement matrix")?;
    let n = a.ncols();
    let k = s.min(n);
    let (best, total) = enumerate(n, k, |t| {
        let sub = a.select_columns(t);
        numerics::sym_eig_extremes(&sub.tr_mul(&sub), EIG_TOL).ok()
    })?;
    Ok(report(s, RipMethod::Exact, best, total))
}

/// Lower bound on the D-RIP constant from `trials` seeded random supports.
pub fn random_lower_bound(
    a: &DenseMatrix,
    frame: &TightFrame,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<RipReport> {
    check_shapes(a, frame, s)?;
    if trials == 0 {
        return Err(Error::contract("random lower bound needs at least one trial"));
    }
    let gram = a.tr_mul(a);
    let d = frame.d();
    let k = s.min(d);
    let best = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(seed, t);
            let mut support = index::sample(&mut g, d, k).into_vec();
            support.sort_unstable();
            let mut local = Extreme::empty();
            local.offer(t, &support, restricted_extremes(&gram, &frame.columns(&support)));
            local
        })
        .reduce(Extreme::empty, Extreme::merge);
    Ok(report(s, RipMethod::RandomLowerBound, best, trials as u64))
}

/// Scale `c` minimizing the constant of `c A`: `c^2 = 2 / (lambda_min + lambda_max)`,
/// giving `delta = (lambda_max - lambda_min) / (lambda_max + lambda_min)`.
pub fn optimal_scale(report: &RipReport) -> Result<f64> {
    let sum = report.lambda_min + report.lambda_max;
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::contract("restricted spectrum is empty or zero; no scaling applies"));
    }
    Ok((2.0 / sum).sqrt())
}

/// Scale `c` putting the upper side of `c A` at `target`: `c^2 = (1 + target) / lambda_max`.
///
/// Fails when the lower side would then exceed `target`, that is when
/// `target` is below the optimally scaled constant.
pub fn scale_for_delta(report: &RipReport, target: f64) -> Result<f64> {
    if !(target >= 0.0 && target < 1.0) {
        return Err(Error::Domain {
            what: "scale_for_delta",
            requirement: "target in [0, 1)",
            value: target,
        });
    }
    if !(report.lambda_max > 0.0) || !report.lambda_max.is_finite() {
        return Err(Error::contract("restricted spectrum is empty or zero; no scaling applies"));
    }
    let c2 = (1.0 + target) / report.lambda_max;
    if 1.0 - c2 * report.lambda_min > target {
        let best = (report.lambda_max - report.lambda_min) / (report.lambda_max + report.lambda_min);
        return Err(Error::contract(format!(
            "no scaling reaches delta = {target}; the smallest attainable value is {best}"
        )));
    }
    Ok(c2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Vector;
    use crate::testutil::{gaussian, subsets};
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn diag(xs: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(&Vector::from_vec(xs.to_vec()))
    }

    #[test]
    fn scaling_hits_its_targets() {
        let frame = TightFrame::dct(8).unwrap();
        let a = gaussian(6, 8, 3);
        let rip = exact_drip(&a, &frame, 2).unwrap();
        let c = optimal_scale(&rip).unwrap();
        let scaled = exact_drip(&(&a * c), &frame, 2).unwrap();
        let expect = (rip.lambda_max - rip.lambda_min) / (rip.lambda_max + rip.lambda_min);
        assert_abs_diff_eq!(scaled.delta, expect, epsilon = 1e-10);
        let target = 0.5 * (1.0 + expect);
        let c = scale_for_delta(&rip, target).unwrap();
        let scaled = exact_drip(&(&a * c), &frame, 2).unwrap();
        assert_abs_diff_eq!(scaled.delta, target, epsilon = 1e-10);
        assert!(scale_for_delta(&rip, 0.5 * expect).is_err());
    }

    #[test]
    fn combinations_unrank_in_lexicographic_order() {
        for (n, k) in [(5, 2), (6, 3), (4, 4), (7, 1)] {
            let all = subsets(n, k);
            assert_eq!(all.len() as u128, binomial(n, k));
            for (r, s) in all.iter().enumerate() {
                assert_eq!(&unrank_combination(n, k, r as u128), s);
            }
            let mut c = all[0].clone();
            for s in &all[1..] {
                assert!(next_combination(&mut c, n));
                assert_eq!(&c, s);
            }
            assert!(!next_combination(&mut c, n));
        }
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn identity_measurements_have_zero_delta() {
        for frame in [
            TightFrame::identity(4).unwrap(),
            TightFrame::identity_dct(4).unwrap(),
            TightFrame::random(4, 7, 3).unwrap(),
        ] {
            for s in 1..=3 {
                let r = exact_drip(&DenseMatrix::identity(4, 4), &frame, s).unwrap();
                assert!(r.delta <= 1e-12, "s={s} delta={}", r.delta);
            }
        }
    }

    #[test]
    fn scaled_identity() {
        let r = exact_drip(&(DenseMatrix::identity(3, 3) * 2.0), &TightFrame::identity(3).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(r.delta, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_examples() {
        let a = diag(&[1.0, 0.5]);
        let id = TightFrame::identity(2).unwrap();
        let r1 = exact_drip(&a, &id, 1).unwrap();
        assert_abs_diff_eq!(r1.delta, 0.75, epsilon = 1e-12);
        assert_eq!(r1.witness_support, vec![1]);
        assert_eq!(r1.supports_examined, 2);
        let r2 = exact_drip(&a, &id, 2).unwrap();
        assert_abs_diff_eq!(r2.delta, 0.75, epsilon = 1e-12);
        assert_eq!(r2.supports_examined, 1);
        let c = exact_rip(&a, 1).unwrap();
        assert_abs_diff_eq!(c.delta, 0.75, epsilon = 1e-12);
        assert_eq!(c.method, RipMethod::Exact);
    }

    #[test]
    fn orthonormal_columns_have_zero_rip() {
        let q = nalgebra::QR::new(gaussian(6, 4, 1)).q();
        assert!(exact_rip(&q, 3).unwrap().delta <= 1e-12);
    }

    #[test]
    fn classical_and_adapted_constants_agree_for_identity_frames() {
        for seed in 0..50u64 {
            let n = 3 + (seed % 6) as usize;
            let a = gaussian(n + 2, n, seed) / ((n + 2) as f64).sqrt();
            let s = 1 + (seed % 3) as usize;
            let rip = exact_rip(&a, s).unwrap();
            let drip = exact_drip(&a, &TightFrame::identity(n).unwrap(), s).unwrap();
            assert!((rip.delta - drip.delta).abs() <= 1e-10);
        }
    }

    #[test]
    fn monotone_in_order_and_witness_reproduces() {
        for seed in 0..6 {
            let frame = TightFrame::random(5, 8, seed).unwrap();
            let a = gaussian(4, 5, seed) / 2.0;
            let mut prev = 0.0;
            for s in 1..=4 {
                let r = exact_drip(&a, &frame, s).unwrap();
                assert!(r.delta >= prev - 1e-12);
                prev = r.delta;
                assert!(r.witness_support.len() <= s);
                assert!(r.witness_support.windows(2).all(|w| w[0] < w[1]));
                let again = support_delta(&a, &frame, &r.witness_support);
                assert!((again - r.delta).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn definition_holds_for_sampled_sparse_vectors() {
        let frame = TightFrame::random(6, 10, 2).unwrap();
        let a = gaussian(5, 6, 2) / 5f64.sqrt();
        for s in 1..=3 {
            let delta = exact_drip(&a, &frame, s).unwrap().delta;
            let mut g = rng::stream(s as u64, 50);
            for _ in 0..1000 {
                let support = index::sample(&mut g, 10, s).into_vec();
                let mut v = Vector::zeros(10);
                for i in support {
                    v[i] = StandardNormal.sample(&mut g);
                }
                let dv = frame.matrix() * &v;
                let e = dv.norm_squared();
                let ae = (&a * &dv).norm_squared();
                assert!(ae >= (1.0 - delta - 1e-8) * e);
                assert!(ae <= (1.0 + delta + 1e-8) * e);
            }
        }
    }

    #[test]
    fn inner_product_bound_on_sparse_pairs() {
        let frame = TightFrame::identity_dct(4).unwrap();
        let a = gaussian(6, 4, 8) / 6f64.sqrt();
        let s = 2;
        let delta = exact_drip(&a, &frame, 2 * s).unwrap().delta;
        let mut g = rng::stream(8, 1);
        let draw = |g: &mut rand_chacha::ChaCha8Rng| {
            let mut v = Vector::zeros(8);
            for i in index::sample(g, 8, s) {
                v[i] = StandardNormal.sample(g);
            }
            frame.matrix() * v
        };
        for _ in 0..1000 {
            let du = draw(&mut g);
            let dv = draw(&mut g);
            let lhs = (&a * &du).dot(&(&a * &dv));
            let rhs = delta * du.norm() * dv.norm() + du.dot(&dv);
            assert!(lhs <= rhs + 1e-8);
        }
    }

    #[test]
    fn lower_bound_never_exceeds_exact() {
        for seed in 0..10 {
            let frame = TightFrame::random(4, 7, seed).unwrap();
            let a = gaussian(3, 4, seed);
            let exact = exact_drip(&a, &frame, 2).unwrap();
            let lower = random_lower_bound(&a, &frame, 2, 15, seed).unwrap();
            assert!(lower.delta <= exact.delta + 1e-10);
            assert_eq!(lower.method, RipMethod::RandomLowerBound);
            assert_eq!(lower, random_lower_bound(&a, &frame, 2, 15, seed).unwrap());
        }
    }

    #[test]
    fn lower_bound_covering_all_supports_is_exact() {
        let frame = TightFrame::random(3, 5, 1).unwrap();
        let a = gaussian(2, 3, 1);
        let exact = exact_drip(&a, &frame, 2).unwrap();
        let lower = random_lower_bound(&a, &frame, 2, 400, 9).unwrap();
        assert_eq!(lower.delta, exact.delta);
    }

    #[test]
    fn enumeration_guard() {
        let frame = TightFrame::random(3, 60, 0).unwrap();
        let a = gaussian(3, 3, 0);
        let err = exact_drip(&a, &frame, 6).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        assert!(err.to_string().contains("lower bound"));
        assert!(exact_drip(&a, &frame, 0).is_err());
    }

    #[test]
    fn rank_deficient_supports() {
        // duplicated columns: D_T for T = {i, n+i} has rank one
        let i3 = DenseMatrix::identity(3, 3);
        let dup = TightFrame::union(&i3, &i3).unwrap();
        let a = diag(&[1.2, 0.9, 1.0]);
        let r = exact_drip(&a, &dup, 2).unwrap();
        let rip = exact_rip(&a, 2).unwrap();
        assert!((r.delta - rip.delta).abs() <= 1e-12);
    }

    #[test]
    fn schedule_independent() {
        let frame = TightFrame::random(6, 12, 5).unwrap();
        let a = gaussian(4, 6, 5);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| exact_drip(&a, &frame, 4).unwrap())
        };
        assert_eq!(run(1), run(6));
    }
}
