//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guarantees::Regime;
use crate::sensing::MatrixKind;
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameSpec {
    Identity,
    Dct,
    /// `[I, C] / sqrt(2)` with `C` the orthonormal DCT; needs `d = 2n`.
    IdentityDct,
    /// Random tight frame; trial `t` uses a seed derived from `(seed, t)`.
    Random { seed: u64 },
    /// Frame matrix read from a text file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Entries `N(0, 1/m)` or `+-1/sqrt(m)` as drawn.
    Unit,
    /// `A` rescaled to minimize its constant of order `2s`.
    Optimal,
    /// `A` rescaled so the constant of order `2s` equals the target.
    TargetDelta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub seed: u64,
    #[serde(default = "unit")]
    pub scaling: Scaling,
}

fn unit() -> Scaling {
    Scaling::Unit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalModel {
    /// `f = D x` with `x` s-sparse.
    Synthesis,
    /// `D^T f` exactly s-sparse; orthobasis frames only.
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub model: SignalModel,
    pub seed: u64,
    /// Standard deviation of a dense Gaussian perturbation of `x`.
    #[serde(default)]
    pub tail_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseSpec {
    /// `z = 0`; `eps` is still the solver budget.
    None,
    /// `||z||_2 = eps`.
    Bounded { seed: u64 },
    /// `z ~ N(0, sigma^2 I)`; the budget is the realized `||z||_2`.
    Gaussian { sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DeltaMethod {
    Exact,
    /// Randomized lower bound; bound assertions are disabled.
    LowerBound { trials: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    /// `None` or `1` solves the `l1` program, `q < 1` the `lq` program.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub eps: f64,
    pub trials: usize,
    pub frame: FrameSpec,
    pub matrix: MatrixSpec,
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    #[serde(default = "exact")]
    pub delta_method: DeltaMethod,
    /// Regime whose bound is checked; by default the applicable one with
    /// the smallest bound.
    #[serde(default)]
    pub regime: Option<Regime>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Worker threads; the output does not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn exact() -> DeltaMethod {
    DeltaMethod::Exact
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `q` of the `lq` program, or `None` for `l1`.
    pub fn lq(&self) -> Option<f64> {
        self.q.filter(|&q| q < 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n", self.n), ("d", self.d), ("m", self.m), ("s", self.s), ("trials", self.trials)] {
            if v == 0 {
                return Err(Error::contract(format!("{name} must be positive")));
            }
        }
        if self.d < self.n {
            return Err(Error::contract(format!("a tight frame needs d >= n, got n = {}, d = {}", self.n, self.d)));
        }
        if 2 * self.s > self.d {
            return Err(Error::contract(format!("2s must not exceed d, got s = {}, d = {}", self.s, self.d)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::contract(format!("eps must be >= 0, got {}", self.eps)));
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::contract(format!("q must lie in (0, 1], got {q}")));
            }
        }
        match (self.lq(), self.regime) {
            (Some(_), Some(r)) if r != Regime::Lq => {
                return Err(Error::contract("q < 1 requires the lq regime"));
            }
            (None, Some(Regime::Lq)) => return Err(Error::contract("the lq regime requires q < 1")),
            _ => {}
        }
        match self.frame {
            FrameSpec::Identity | FrameSpec::Dct if self.d != self.n => {
                return Err(Error::contract("orthobasis frames need d = n"));
            }
            FrameSpec::IdentityDct if self.d != 2 * self.n => {
                return Err(Error::contract("the identity/DCT frame needs d = 2n"));
            }
            _ => {}
        }
        if self.signal.model == SignalModel::Analysis && self.d != self.n {
            return Err(Error::contract("exact analysis-sparse signals need an orthobasis frame (d = n)"));
        }
        if !(self.signal.tail_scale >= 0.0) {
            return Err(Error::contract("tail_scale must be >= 0"));
        }
        match self.noise {
            NoiseSpec::Bounded { .. } if self.eps == 0.0 => {
                return Err(Error::contract("bounded noise needs eps > 0"));
            }
            NoiseSpec::Gaussian { sigma, .. } if !(sigma >= 0.0) => {
                return Err(Error::contract(format!("sigma must be >= 0, got {sigma}")));
            }
            _ => {}
        }
        if let Scaling::TargetDelta(t) = self.matrix.scaling {
            if !(t >= 0.0 && t < 1.0) {
                return Err(Error::contract(format!("target delta must lie in [0, 1), got {t}")));
            }
        }
        if let DeltaMethod::LowerBound { trials: 0 } = self.delta_method {
            return Err(Error::contract("lower-bound mode needs at least one trial"));
        }
        if self.workers == Some(0) {
            return Err(Error::contract("workers must be positive"));
        }
        self.solver.validate()
    }
}
