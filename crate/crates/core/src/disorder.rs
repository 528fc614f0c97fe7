//! Quenched disorder: one realization of the rate-`ρ` walk `Y`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{JumpKernel, KernelSampler};
use crate::rng::task_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub dx: Vec<i64>,
}

/// Jump times in `(0, t]`, ascending, with their displacements. `Y` is
/// right-continuous: a jump at time `s` is already part of `Y_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderPath {
    pub rho: f64,
    #[serde(rename = "t")]
    pub horizon: f64,
    pub seed: u64,
    pub jumps: Vec<Jump>,
    #[serde(skip, default)]
    dim: usize,
}

impl DisorderPath {
    /// `Y ≡ 0` on `[0, t]`.
    pub fn constant(dim: usize, horizon: f64) -> Self {
        DisorderPath {
            rho: 0.0,
            horizon,
            seed: 0,
            jumps: Vec::new(),
            dim,
        }
    }

    /// Path with prescribed jumps, validated for ordering and range.
    pub fn from_jumps(dim: usize, rho: f64, horizon: f64, seed: u64, jumps: Vec<Jump>) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid("t", "horizon must be finite and >= 0"));
        }
        let mut prev = 0.0;
        for j in &jumps {
            if j.dx.len() != dim {
                return Err(invalid("jumps", "displacement dimension mismatch"));
            }
            if !(j.time > prev) || j.time > horizon {
                return Err(invalid("jumps", "jump times must be ascending in (0, t]"));
            }
            prev = j.time;
        }
        Ok(DisorderPath {
            rho,
            horizon,
            seed,
            jumps,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        if self.dim == 0 {
            self.jumps.first().map_or(0, |j| j.dx.len())
        } else {
            self.dim
        }
    }

    /// Number of jumps in `[0, s]`.
    pub fn jump_count(&self, s: f64) -> usize {
        self.jumps.partition_point(|j| j.time <= s)
    }

    /// `Y_s`.
    pub fn position_at(&self, s: f64) -> Vec<i64> {
        let mut y = vec![0i64; self.dim()];
        for j in &self.jumps[..self.jump_count(s)] {
            for (a, b) in y.iter_mut().zip(&j.dx) {
                *a += b;
            }
        }
        y
    }

    /// `θ_{t1} Y - Y_{t1}` restricted to `[0, t2 - t1]`.
    pub fn shifted(&self, t1: f64, t2: f64) -> Result<Self> {
        if !(0.0 <= t1 && t1 <= t2 && t2 <= self.horizon) {
            return Err(invalid("interval", format!("need 0 <= t1 <= t2 <= {}", self.horizon)));
        }
        let jumps = self
            .jumps
            .iter()
            .filter(|j| j.time > t1 && j.time <= t2)
            .map(|j| Jump {
                time: j.time - t1,
                dx: j.dx.clone(),
            })
            // a jump landing exactly on t1 after subtraction would sit at 0
            .filter(|j| j.time > 0.0)
            .collect();
        Ok(DisorderPath {
            rho: self.rho,
            horizon: t2 - t1,
            seed: self.seed,
            jumps,
            dim: self.dim(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path serializes")
    }

    pub fn from_json(dim: usize, text: &str) -> Result<Self> {
        let p: DisorderPath = serde_json::from_str(text).map_err(|e| invalid("path", e.to_string()))?;
        DisorderPath::from_jumps(dim, p.rho, p.horizon, p.seed, p.jumps)
    }
}

/// Poisson(ρ) jump times on `[0, t]` with i.i.d. kernel displacements,
/// drawn from stream 0 of `seed`.
pub fn sample_disorder(kernel: &JumpKernel, rho: f64, t: f64, seed: u64) -> Result<DisorderPath> {
    sample_disorder_with(kernel, rho, t, seed, &mut task_rng(seed, 0))
}

/// As [`sample_disorder`] but drawing from a caller-owned generator; `seed`
/// is only recorded.
pub fn sample_disorder_with<R: Rng + ?Sized>(
    kernel: &JumpKernel,
    rho: f64,
    t: f64,
    seed: u64,
    rng: &mut R,
) -> Result<DisorderPath> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(invalid("rho", format!("rate must be finite and >= 0, got {rho}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("horizon must be finite and >= 0, got {t}")));
    }
    let mut jumps = Vec::new();
    if rho > 0.0 {
        let gap = Exp::new(rho).expect("positive rate");
        let steps = KernelSampler::new(kernel);
        let mut time = 0.0;
        loop {
            time += gap.sample(rng);
            if time > t {
                break;
            }
            jumps.push(Jump {
                time,
                dx: steps.sample(rng).to_vec(),
            });
        }
    }
    Ok(DisorderPath {
        rho,
        horizon: t,
        seed,
        jumps,
        dim: kernel.dim(),
    })
}

/// `dP^{ρ}/dP^{ρ'}` on `F_L`: `e^{L(ρ'-ρ)} (ρ/ρ')^κ` with `κ` the number of
/// jumps in `[0, L]`.
pub fn disorder_likelihood_ratio(path: &DisorderPath, rho: f64, rho_alt: f64, horizon: f64) -> Result<f64> {
    if !(rho > 0.0 && rho_alt > 0.0) {
        return Err(invalid("rho", "both rates must be positive"));
    }
    if !(horizon >= 0.0) || horizon > path.horizon {
        return Err(invalid("L", format!("need 0 <= L <= {}", path.horizon)));
    }
    let kappa = path.jump_count(horizon) as f64;
    Ok((horizon * (rho_alt - rho) + kappa * (rho / rho_alt).ln()).exp())
}
