//! Coefficient blocks `T0, T1, ..., Tl` and the share `omega`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::top_indices;
use crate::numerics::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PartitionNorm {
    L1,
    /// Blocks weighed by `||.||_q^q`.
    Lq { q: f64 },
}

impl PartitionNorm {
    pub fn for_q(q: f64) -> Self {
        if q == 1.0 {
            PartitionNorm::L1
        } else {
            PartitionNorm::Lq { q }
        }
    }

    fn weigh(self, x: &Vector, block: &[usize]) -> f64 {
        match self {
            PartitionNorm::L1 => block.iter().map(|&i| x[i].abs()).sum(),
            PartitionNorm::Lq { q } => block.iter().map(|&i| x[i].abs().powf(q)).sum(),
        }
    }
}

/// `blocks[0]` is `T0`; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockPartition {
    pub s: usize,
    pub blocks: Vec<Vec<usize>>,
    #[serde(with = "crate::serde17")]
    pub omega: f64,
    pub l: usize,
}

impl BlockPartition {
    /// `T0 u T1` (just `T0` when there is no `T1`).
    pub fn t01(&self) -> Vec<usize> {
        let mut t = self.blocks[0].clone();
        if let Some(t1) = self.blocks.get(1) {
            t.extend_from_slice(t1);
        }
        t
    }

    /// Union of blocks `from..=to` (clamped to `l`).
    pub fn union(&self, from: usize, to: usize) -> Vec<usize> {
        self.blocks
            .iter()
            .skip(from)
            .take((to + 1).saturating_sub(from))
            .flatten()
            .copied()
            .collect()
    }

    /// Every index outside `T0`.
    pub fn complement(&self) -> Vec<usize> {
        self.union(1, self.l)
    }
}

/// `T0` holds the `s` largest `|x_f|`; the rest is ordered by `|x_h|`
/// descending (ties to the lower index) and cut into blocks of `s`.
pub fn block_partition(
    x_f: &Vector,
    x_h: &Vector,
    s: usize,
    norm: PartitionNorm,
) -> Result<BlockPartition> {
    let d = x_f.len();
    if x_h.len() != d {
        return Err(Error::contract(format!(
            "partition vectors differ in length: {d} vs {}",
            x_h.len()
        )));
    }
    if s == 0 || s > d {
        return Err(Error::contract(format!("block size must satisfy 1 <= s <= d = {d}, got {s}")));
    }
    if let PartitionNorm::Lq { q } = norm {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Domain {
                what: "block_partition",
                requirement: "q in (0, 1]",
                value: q,
            });
        }
    }
    let mut t0 = top_indices(x_f, s);
    t0.sort_unstable();
    let mut in_t0 = vec![false; d];
    for &i in &t0 {
        in_t0[i] = true;
    }
    let mut rest: Vec<usize> = (0..d).filter(|&i| !in_t0[i]).collect();
    rest.sort_by(|&i, &j| x_h[j].abs().total_cmp(&x_h[i].abs()).then(i.cmp(&j)));

    let mut blocks = vec![t0];
    blocks.extend(rest.chunks(s).map(<[usize]>::to_vec));
    let l = blocks.len() - 1;

    let omega = if l == 0 {
        0.0
    } else {
        let total: f64 = blocks[1..].iter().map(|b| norm.weigh(x_h, b)).sum();
        if total > 0.0 {
            (norm.weigh(x_h, &blocks[1]) / total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    Ok(BlockPartition { s, blocks, omega, l })
}
