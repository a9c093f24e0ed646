//! Recovery-guarantee constants and certificates.
//!
//! Three regimes are covered, all driven by the order-`2s` constant
//! `delta`:
//!
//! * general `l1`: `rho = sqrt(4(1+5d-4d^2) / ((1-d)(32-25d)))`, valid below
//!   `(77 - sqrt(1337)) / 82`;
//! * `l1` with few blocks (`n <= 4s`): `rho = sqrt((1+d)^2 / (8(1-d)))`,
//!   valid below `4 sqrt(2) - 5`;
//! * `lq`, `0 < q <= 1`: `rho(q)` below one for every `q < q0(delta)` when
//!   `delta < 1/2`.
//!
//! In each regime the error of a minimizer obeys
//! `||f_hat - f|| <= C0 tail / s^(1/q - 1/2) + C1 eps`.

pub mod audit;
pub mod partition;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use partition::{block_partition, BlockPartition, PartitionNorm};

/// `(77 - sqrt(1337)) / 82`, the general `l1` threshold on `delta_2s`.
pub fn threshold_general() -> f64 {
    (77.0 - 1337f64.sqrt()) / 82.0
}

/// `4 sqrt(2) - 5`, the threshold when `n <= 4s`.
pub fn threshold_special() -> f64 {
    4.0 * std::f64::consts::SQRT_2 - 5.0
}

/// Threshold below which an admissible `q0` exists.
pub const THRESHOLD_LQ: f64 = 0.5;

fn check_delta(what: &'static str, requirement: &'static str, delta: f64, upper: f64) -> Result<()> {
    if delta >= 0.0 && delta < upper {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement,
            value: delta,
        })
    }
}

fn check_q(what: &'static str, q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            requirement: "q in (0, 1]",
            value: q,
        })
    }
}

pub fn rho_general(delta: f64) -> Result<f64> {
    check_delta("rho_general", "0 <= delta < 2/3", delta, 2.0 / 3.0)?;
    let num = 4.0 * (1.0 + 5.0 * delta - 4.0 * delta * delta);
    let den = (1.0 - delta) * (32.0 - 25.0 * delta);
    Ok((num / den).sqrt())
}

pub fn rho_special(delta: f64) -> Result<f64> {
    check_delta("rho_special", "0 <= delta < 1", delta, 1.0)?;
    Ok(((1.0 + delta).powi(2) / (8.0 * (1.0 - delta))).sqrt())
}

/// Second term of `rho(q)^2 (1 - delta)`:
/// `q / 2^(2/q) * ((2-q)/(2-delta))^(2/q - 1)`, evaluated in log space so
/// that small `q` underflows to zero instead of producing `0 * inf`.
fn lq_penalty(delta: f64, q: f64) -> f64 {
    let p = 2.0 / q;
    (q.ln() - p * std::f64::consts::LN_2 + (p - 1.0) * ((2.0 - q) / (2.0 - delta)).ln()).exp()
}

pub fn rho_q(delta: f64, q: f64) -> Result<f64> {
    check_delta("rho_q", "0 <= delta < 1", delta, 1.0)?;
    check_q("rho_q", q)?;
    Ok(((delta + lq_penalty(delta, q)) / (1.0 - delta)).sqrt())
}

const Q_BRACKET_LO: f64 = 1e-6;
const Q_BISECTIONS: usize = 60;
const Q_SCAN: usize = 2000;

/// Largest `q0` in `(0, 1]` with `rho_q(delta, q) < 1` for all `q < q0`.
///
/// Returns 1 when `rho_q(delta, 1) < 1`. Otherwise a grid scan over
/// `(1e-6, 1]` finds the first sign change of `rho_q - 1` (the smallest root
/// if there were several) and 60 bisection steps refine it. The returned
/// value is the lower end of the final bracket.
pub fn q_zero(delta: f64) -> Result<f64> {
    check_delta("q_zero", "0 <= delta < 1/2", delta, THRESHOLD_LQ)?;
    let excess = |q: f64| rho_q(delta, q).map(|r| r - 1.0);
    if excess(1.0)? < 0.0 {
        return Ok(1.0);
    }
    let mut lo = Q_BRACKET_LO;
    let mut hi = 1.0;
    let step = (1.0 - Q_BRACKET_LO) / Q_SCAN as f64;
    for i in 1..=Q_SCAN {
        let q = if i == Q_SCAN { 1.0 } else { Q_BRACKET_LO + step * i as f64 };
        if excess(q)? >= 0.0 {
            hi = q;
            break;
        }
        lo = q;
    }
    for _ in 0..Q_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Whether the `lq` guarantee covers `q` at this `delta`: `delta < 1/2` and
/// either `q < q0`, or `q0` was clamped to 1 (then every `q` in `(0, 1]`
/// keeps `rho(q) < 1`).
pub fn q_admissible(delta: f64, q: f64) -> Result<bool> {
    check_q("q_admissible", q)?;
    if !(0.0..THRESHOLD_LQ).contains(&delta) {
        return Ok(false);
    }
    let q0 = q_zero(delta)?;
    Ok(if q0 >= 1.0 { rho_q(delta, q)? < 1.0 } else { q < q0 })
}

/// Recovery constants of one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub rho: f64,
    pub c0: f64,
    pub c1: f64,
}

fn c1_from(delta: f64, c0: f64) -> f64 {
    2.0 / (1.0 - delta).sqrt() * (1.0 + c0 / std::f64::consts::SQRT_2)
}

pub fn constants_general(delta: f64) -> Result<Constants> {
    let threshold = threshold_general();
    if !(delta >= 0.0 && delta < threshold) {
        return Err(Error::Inapplicable {
            theorem: "general l1 guarantee",
            clause: format!("requires 0 <= delta_2s < {threshold:.10}, got {delta}"),
        });
    }
    let rho = rho_general(delta)?;
    let c0 = 4.0 / (1.0 - rho)
        * (2.0 * (2.0 - delta) / ((1.0 - delta) * (32.0 - 25.0 * delta))).sqrt();
    Ok(Constants {
        rho,
        c0,
        c1: c1_from(delta, c0),
    })
}

pub fn constants_special(delta: f64) -> Result<Constants> {
    let threshold = threshold_special();
    if !(delta >= 0.0 && delta < threshold) {
        return Err(Error::Inapplicable {
            theorem: "n <= 4s l1 guarantee",
            clause: format!("requires 0 <= delta_2s < {threshold:.10}, got {delta}"),
        });
    }
    let rho = rho_special(delta)?;
    let c0 = std::f64::consts::SQRT_2 / ((1.0 - rho) * (1.0 - delta).sqrt());
    Ok(Constants {
        rho,
        c0,
        c1: c1_from(delta, c0),
    })
}

pub fn constants_q(delta: f64, q: f64) -> Result<Constants> {
    check_q("constants_q", q)?;
    if !(delta >= 0.0 && delta < THRESHOLD_LQ) {
        return Err(Error::Inapplicable {
            theorem: "lq guarantee",
            clause: format!("requires 0 <= delta_2s < 1/2, got {delta}"),
        });
    }
    if !q_admissible(delta, q)? {
        return Err(Error::Inapplicable {
            theorem: "lq guarantee",
            clause: format!("requires q < q0(delta_2s) = {:.10}, got q = {q}", q_zero(delta)?),
        });
    }
    let rho = rho_q(delta, q)?;
    let inner = ((2.0 - delta) * (2.0 - q).powf((2.0 - q) / q) * q + 2f64.powf(2.0 / q) * delta)
        / (1.0 - delta);
    let c0 = 2f64.powf(1.0 / q - 1.0) / (1.0 - rho.powf(q)).powf(1.0 / q) * inner.sqrt();
    if !c0.is_finite() {
        return Err(Error::Domain {
            what: "constants_q",
            requirement: "q large enough for finite constants",
            value: q,
        });
    }
    Ok(Constants {
        rho,
        c0,
        c1: c1_from(delta, c0),
    })
}

/// `C0 tail / s^(1/q - 1/2) + C1 eps`; for `q = 1` the divisor is `sqrt(s)`.
pub fn error_bound(c0: f64, c1: f64, tail: f64, s: usize, eps: f64, q: f64) -> f64 {
    let s = s as f64;
    let scale = if q == 1.0 { s.sqrt() } else { s.powf(1.0 / q - 0.5) };
    c0 * tail / scale + c1 * eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "general_l1")]
    GeneralL1,
    #[serde(rename = "special_n_le_4s")]
    SpecialNLe4s,
    #[serde(rename = "lq")]
    Lq,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::GeneralL1 => "general_l1",
            Regime::SpecialNLe4s => "special_n_le_4s",
            Regime::Lq => "lq",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeCertificate {
    pub regime: Regime,
    #[serde(with = "crate::serde17")]
    pub delta_2s: f64,
    pub s: usize,
    #[serde(with = "crate::serde17")]
    pub q: f64,
    #[serde(with = "crate::serde17::option")]
    pub rho: Option<f64>,
    #[serde(rename = "C0", with = "crate::serde17::option")]
    pub c0: Option<f64>,
    #[serde(rename = "C1", with = "crate::serde17::option")]
    pub c1: Option<f64>,
    #[serde(with = "crate::serde17::option")]
    pub q0: Option<f64>,
    pub applicable: bool,
    pub precondition_text: String,
}

impl GuaranteeCertificate {
    /// Error bound for an applicable certificate.
    pub fn bound(&self, tail: f64, eps: f64) -> Option<f64> {
        match (self.applicable, self.c0, self.c1) {
            (true, Some(c0), Some(c1)) => Some(error_bound(c0, c1, tail, self.s, eps, self.q)),
            _ => None,
        }
    }
}

fn general_certificate(delta: f64, s: usize) -> GuaranteeCertificate {
    let constants = constants_general(delta).ok();
    GuaranteeCertificate {
        regime: Regime::GeneralL1,
        delta_2s: delta,
        s,
        q: 1.0,
        rho: constants.map(|c| c.rho).or_else(|| rho_general(delta).ok()),
        c0: constants.map(|c| c.c0),
        c1: constants.map(|c| c.c1),
        q0: None,
        applicable: constants.is_some(),
        precondition_text: format!(
            "general l1 recovery: delta_2s < (77 - sqrt(1337))/82 = {:.7}",
            threshold_general()
        ),
    }
}

fn special_certificate(delta: f64, s: usize, few_blocks: bool, text: String) -> GuaranteeCertificate {
    let constants = if few_blocks { constants_special(delta).ok() } else { None };
    GuaranteeCertificate {
        regime: Regime::SpecialNLe4s,
        delta_2s: delta,
        s,
        q: 1.0,
        rho: constants.map(|c| c.rho).or_else(|| rho_special(delta).ok()),
        c0: constants.map(|c| c.c0),
        c1: constants.map(|c| c.c1),
        q0: None,
        applicable: constants.is_some(),
        precondition_text: text,
    }
}

fn lq_certificate(delta: f64, s: usize, q: f64) -> GuaranteeCertificate {
    let constants = constants_q(delta, q).ok();
    GuaranteeCertificate {
        regime: Regime::Lq,
        delta_2s: delta,
        s,
        q,
        rho: rho_q(delta, q).ok(),
        c0: constants.map(|c| c.c0),
        c1: constants.map(|c| c.c1),
        q0: q_zero(delta).ok(),
        applicable: constants.is_some(),
        precondition_text: "lq recovery: delta_2s < 1/2 and q < q0(delta_2s)".to_string(),
    }
}

/// One certificate per regime (the `lq` one only when `q` is given).
///
/// The few-block regime is granted on `n <= 4s`.
pub fn certify(delta_2s: f64, n: usize, s: usize, q: Option<f64>) -> Vec<GuaranteeCertificate> {
    let few = n <= 4 * s;
    certify_with(delta_2s, s, q, few, format!(
        "n <= 4s recovery: n <= 4s ({n} <= {}) and delta_2s < 4 sqrt(2) - 5 = {:.7}",
        4 * s,
        threshold_special()
    ))
}

/// Like [`certify`], but the few-block regime additionally requires
/// `d <= 4s`, which is what bounds the number of coefficient blocks by four
/// when the frame is redundant.
pub fn certify_frame(
    delta_2s: f64,
    n: usize,
    d: usize,
    s: usize,
    q: Option<f64>,
) -> Vec<GuaranteeCertificate> {
    let few = n <= 4 * s && d <= 4 * s;
    certify_with(delta_2s, s, q, few, format!(
        "n <= 4s recovery: n, d <= 4s ({n}, {d} <= {}) and delta_2s < 4 sqrt(2) - 5 = {:.7}",
        4 * s,
        threshold_special()
    ))
}

fn certify_with(
    delta: f64,
    s: usize,
    q: Option<f64>,
    few_blocks: bool,
    special_text: String,
) -> Vec<GuaranteeCertificate> {
    let mut out = vec![
        general_certificate(delta, s),
        special_certificate(delta, s, few_blocks, special_text),
    ];
    if let Some(q) = q {
        out.push(lq_certificate(delta, s, q));
    }
    out
}
