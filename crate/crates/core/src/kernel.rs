use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PinError, Result};

/// Symmetric finite-range jump distribution on `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpKernel {
    dim: usize,
    support: Vec<(Vec<i64>, f64)>,
    simple: bool,
}

impl JumpKernel {
    /// Nearest-neighbour walk, `p(±e_i) = 1/(2d)`.
    pub fn simple(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(PinError::InvalidKernel("dimension must be at least 1".into()));
        }
        let p = 1.0 / (2 * dim) as f64;
        let mut support = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            for s in [1i64, -1] {
                let mut e = vec![0i64; dim];
                e[i] = s;
                support.push((e, p));
            }
        }
        Ok(JumpKernel {
            dim,
            support,
            simple: true,
        })
    }

    /// General kernel from `(displacement, probability)` pairs. Entries with the
    /// same displacement are merged. Rejects kernels that are not normalized,
    /// not symmetric, charge the origin, or do not generate the whole lattice.
    pub fn new(dim: usize, entries: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(PinError::InvalidKernel("dimension must be at least 1".into()));
        }
        let mut support: Vec<(Vec<i64>, f64)> = Vec::new();
        for (x, p) in entries {
            if x.len() != dim {
                return Err(PinError::InvalidKernel(format!(
                    "displacement {x:?} does not have dimension {dim}"
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(PinError::InvalidKernel(format!("bad probability {p} at {x:?}")));
            }
            if p == 0.0 {
                continue;
            }
            if x.iter().all(|&c| c == 0) {
                return Err(PinError::InvalidKernel("p(0) must be zero".into()));
            }
            match support.iter_mut().find(|(y, _)| *y == x) {
                Some(entry) => entry.1 += p,
                None => support.push((x, p)),
            }
        }
        if support.is_empty() {
            return Err(PinError::InvalidKernel("empty support".into()));
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(PinError::InvalidKernel(format!("probabilities sum to {total}")));
        }
        for (x, p) in &support {
            let neg: Vec<i64> = x.iter().map(|c| -c).collect();
            let q = support.iter().find(|(y, _)| *y == neg).map(|(_, q)| *q).unwrap_or(0.0);
            if (p - q).abs() > 1e-14 {
                return Err(PinError::InvalidKernel(format!("p({x:?}) != p({neg:?})")));
            }
        }
        if !generates_lattice(dim, support.iter().map(|(x, _)| x.as_slice())) {
            return Err(PinError::InvalidKernel(
                "support does not generate Z^d (reducible)".into(),
            ));
        }
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let simple =
            support.len() == 2 * dim && support.iter().all(|(x, _)| x.iter().map(|c| c.abs()).sum::<i64>() == 1);
        Ok(JumpKernel { dim, support, simple })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_simple(&self) -> bool {
        self.simple
    }

    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    /// Probability of displacement `x`.
    pub fn prob(&self, x: &[i64]) -> f64 {
        self.support
            .iter()
            .find(|(y, _)| y.as_slice() == x)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Largest max-norm among support points.
    pub fn range(&self) -> i64 {
        self.support
            .iter()
            .map(|(x, _)| x.iter().map(|c| c.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// `E|ΔX|^2`.
    pub fn second_moment(&self) -> f64 {
        self.support
            .iter()
            .map(|(x, p)| p * x.iter().map(|&c| (c * c) as f64).sum::<f64>())
            .sum()
    }

    /// Characteristic function `φ(k) = Σ p(x) cos(k·x)`.
    pub fn characteristic(&self, k: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(x, p)| {
                let dot: f64 = x.iter().zip(k).map(|(&c, &k)| c as f64 * k).sum();
                p * dot.cos()
            })
            .sum()
    }

    /// `1 - φ(k)`, evaluated as `Σ 2 p(x) sin²(k·x/2)` to avoid cancellation
    /// near `k = 0`.
    pub fn symbol(&self, k: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(x, p)| {
                let dot: f64 = x.iter().zip(k).map(|(&c, &k)| c as f64 * k).sum();
                2.0 * p * (0.5 * dot).sin().powi(2)
            })
            .sum()
    }

    /// Per-jump entropy cost of following a walk with this kernel,
    /// `-Σ p(x) log(2 p(x))`; equals `log d` for the simple walk.
    pub fn following_entropy(&self) -> f64 {
        -self.support.iter().map(|(_, p)| p * (2.0 * p).ln()).sum::<f64>()
    }
}

/// Draws displacements from a kernel.
#[derive(Debug, Clone)]
pub struct KernelSampler {
    index: WeightedIndex<f64>,
    steps: Vec<Vec<i64>>,
}

impl KernelSampler {
    pub fn new(kernel: &JumpKernel) -> Self {
        let index = WeightedIndex::new(kernel.support.iter().map(|(_, p)| *p))
            .expect("kernel probabilities are validated at construction");
        KernelSampler {
            index,
            steps: kernel.support.iter().map(|(x, _)| x.clone()).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        &self.steps[self.index.sample(rng)]
    }
}

/// Whether the integer vectors generate `Z^d` as a group: reduce to Hermite
/// form by integer row operations and check the pivots are all ±1.
fn generates_lattice<'a>(dim: usize, vecs: impl Iterator<Item = &'a [i64]>) -> bool {
    let mut rows: Vec<Vec<i64>> = vecs.map(|v| v.to_vec()).collect();
    for (pivot_row, col) in (0..dim).enumerate() {
        // Euclid on column `col` among rows pivot_row..
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..rows.len() {
                if rows[r][col] != 0 && best.is_none_or(|b| rows[r][col].abs() < rows[b][col].abs()) {
                    best = Some(r);
                }
            }
            let Some(b) = best else { return false };
            rows.swap(pivot_row, b);
            let pivot = rows[pivot_row].clone();
            let mut done = true;
            for row in rows.iter_mut().skip(pivot_row + 1) {
                let q = row[col] / pivot[col];
                if q != 0 {
                    for (x, p) in row.iter_mut().zip(&pivot) {
                        *x -= q * p;
                    }
                }
                if row[col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows[pivot_row][col].abs() != 1 {
            return false;
        }
    }
    true
}
