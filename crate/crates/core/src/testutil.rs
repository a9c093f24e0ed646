//! Brute-force helpers shared by unit tests.

use rand_distr::{Distribution, StandardNormal};

use crate::numerics::{DenseMatrix, Vector};
use crate::rng;

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut g = rng::stream(seed, 777);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut g))
}

pub fn gaussian_vec(len: usize, seed: u64) -> Vector {
    let mut g = rng::stream(seed, 778);
    Vector::from_fn(len, |_, _| StandardNormal.sample(&mut g))
}
