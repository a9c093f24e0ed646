//! Fixed benchmark instances.

use framecs_core::sensing::{gen_gaussian, measure, NoiseMode};
use framecs_core::{SensingModel, TightFrame, Vector};

/// Random `n x d` tight frame with an `m x n` Gaussian matrix and a noisy
/// observation of a 2-sparse synthesis signal.
pub fn instance(n: usize, d: usize, m: usize, eps: f64, seed: u64) -> (TightFrame, SensingModel) {
    let frame = TightFrame::random(n, d, seed).expect("valid frame dimensions");
    let a = gen_gaussian(m, n, seed + 1).expect("valid matrix dimensions");
    let mut x = Vector::zeros(d);
    x[0] = 1.0;
    x[d / 2] = -0.5;
    let f = frame.synthesize(&x).expect("coefficient length matches");
    let noise = if eps > 0.0 { NoiseMode::Bounded { eps } } else { NoiseMode::None };
    let model = measure(&a, &f, noise, seed + 2).expect("consistent shapes");
    (frame, model)
}
