//! Monte Carlo on the renewal structure of the contact set `{s : X_s = 0}`.
//!
//! A wet period lasts an Exp(1) holding time at the origin; a dry period is an
//! excursion of the walk away from it, possibly infinite when the walk is
//! transient. Under the tilted law at coupling `β` with `b = F(β) > 0` the wet
//! periods become Exp(λ) with `λ = 1 - β + b` and the dry periods have density
//! `λ⁻¹ e^{-bt} K(t)`; the latter is sampled by proposing an untilted
//! excursion and accepting it with probability `e^{-bD}`, i.e. when it ends
//! before an independent Exp(b) clock.
//!
//! For the simple walk in `d >= 3` whether an excursion ever returns is
//! decided exactly after its first jump, with probability `g(y)/g(0)`; a
//! returning excursion is then run as the walk conditioned to hit the origin
//! (Doob transform by `g`), which needs no step cap to be classified.

use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealed::pure_free_energy;
use crate::error::{invalid, PinError, Result};
use crate::kernel::{JumpKernel, KernelSampler};
use crate::rng::{task_rng, TaskRng};
use crate::walk::{green_table_cap, GreenTable};

/// Jumps simulated before an excursion is abandoned.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

/// Proposals after which a low acceptance rate counts as a stall.
pub const STALL_PROPOSALS: u64 = 10_000;

/// Acceptance rate below which the tilted sampler gives up.
pub const STALL_RATE: f64 = 1e-4;

const INITIAL_TABLE_RADIUS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Excursion {
    /// Returned to the origin after this long.
    Finite(f64),
    /// Still away when the caller's clock ran out.
    Stopped,
    /// Never returns; exact for the simple walk in `d >= 3`, otherwise
    /// assigned at the step cap with [`ExcursionSampler::cap_bias_bound`].
    Infinite,
    /// Returns (certainly, or almost surely in `d <= 2`) but the step cap was
    /// reached first.
    Truncated { elapsed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSample {
    pub outcome: Excursion,
    pub steps: u64,
    pub seed: u64,
}

enum Mode {
    Recurrent,
    Conditioned { g0: f64, table: RwLock<Arc<GreenTable>> },
    Capped,
}

/// Reusable excursion generator for one kernel.
pub struct ExcursionSampler {
    kernel: JumpKernel,
    steps: KernelSampler,
    step_cap: u64,
    mode: Mode,
}

impl ExcursionSampler {
    pub fn new(kernel: &JumpKernel, step_cap: u64) -> Result<Self> {
        if step_cap == 0 {
            return Err(invalid("step_cap", "must be at least 1"));
        }
        let mode = if kernel.dim() <= 2 {
            Mode::Recurrent
        } else if kernel.is_simple() {
            let table = GreenTable::new(kernel, INITIAL_TABLE_RADIUS)?;
            let origin = vec![0i64; kernel.dim()];
            Mode::Conditioned {
                g0: table.get(&origin).expect("origin is in the table"),
                table: RwLock::new(Arc::new(table)),
            }
        } else {
            Mode::Capped
        };
        Ok(ExcursionSampler {
            kernel: kernel.clone(),
            steps: KernelSampler::new(kernel),
            step_cap,
            mode,
        })
    }

    pub fn step_cap(&self) -> u64 {
        self.step_cap
    }

    /// Upper bound on the probability that an excursion classified Infinite
    /// at the step cap would still have returned: the expected number of
    /// visits to the origin after `N` jumps, from the local CLT with a factor
    /// 2 for periodicity. Zero where classification is exact.
    pub fn cap_bias_bound(&self) -> f64 {
        match self.mode {
            Mode::Capped => {
                let d = self.kernel.dim() as f64;
                let s2 = self.kernel.second_moment();
                let n = self.step_cap as f64;
                2.0 * (d / (2.0 * std::f64::consts::PI * s2)).powf(0.5 * d) * n.powf(1.0 - 0.5 * d) / (0.5 * d - 1.0)
            }
            _ => 0.0,
        }
    }

    /// One excursion from the moment the walk leaves the origin. Returns the
    /// outcome and the number of jumps simulated.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R, stop_time: f64) -> (Excursion, u64) {
        let mut x = self.steps.sample(rng).to_vec();
        match &self.mode {
            Mode::Conditioned { g0, table } => {
                let t = table.read().expect("table lock").clone();
                let h = t.get(&x).expect("first step is inside the table") / g0;
                if rng.random::<f64>() >= h {
                    return (Excursion::Infinite, 1);
                }
                self.run_conditioned(rng, x, stop_time, table)
            }
            _ => {
                let mut elapsed = 0.0;
                let mut steps = 1u64;
                loop {
                    let hold: f64 = Exp1.sample(rng);
                    elapsed += hold;
                    if elapsed > stop_time {
                        return (Excursion::Stopped, steps);
                    }
                    for (a, b) in x.iter_mut().zip(self.steps.sample(rng)) {
                        *a += b;
                    }
                    steps += 1;
                    if x.iter().all(|&c| c == 0) {
                        return (Excursion::Finite(elapsed), steps);
                    }
                    if steps >= self.step_cap {
                        let out = match self.mode {
                            Mode::Recurrent => Excursion::Truncated { elapsed },
                            _ => Excursion::Infinite,
                        };
                        return (out, steps);
                    }
                }
            }
        }
    }

    /// Walk conditioned to hit the origin: from `y` jump to `y + e` with
    /// probability `p(e) g(y + e) / Σ_e' p(e') g(y + e')`.
    fn run_conditioned<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut x: Vec<i64>,
        stop_time: f64,
        lock: &RwLock<Arc<GreenTable>>,
    ) -> (Excursion, u64) {
        let support = self.kernel.support();
        let mut table = lock.read().expect("table lock").clone();
        let mut weights = vec![0.0; support.len()];
        let mut z = vec![0i64; x.len()];
        let mut elapsed = 0.0;
        let mut steps = 1u64;
        loop {
            let hold: f64 = Exp1.sample(rng);
            elapsed += hold;
            if elapsed > stop_time {
                return (Excursion::Stopped, steps);
            }
            let reach = x.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0) + 1;
            if reach > table.radius() {
                match grow(&self.kernel, lock, reach) {
                    Some(t) => table = t,
                    None => return (Excursion::Truncated { elapsed }, steps),
                }
            }
            let mut total = 0.0;
            for ((e, p), w) in support.iter().zip(weights.iter_mut()) {
                for ((zi, xi), ei) in z.iter_mut().zip(&x).zip(e) {
                    *zi = xi + ei;
                }
                *w = p * table.get(&z).expect("neighbour inside the table");
                total += *w;
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = support.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            for (xi, ei) in x.iter_mut().zip(&support[pick].0) {
                *xi += ei;
            }
            steps += 1;
            if x.iter().all(|&c| c == 0) {
                return (Excursion::Finite(elapsed), steps);
            }
            if steps >= self.step_cap {
                return (Excursion::Truncated { elapsed }, steps);
            }
        }
    }
}

fn grow(kernel: &JumpKernel, lock: &RwLock<Arc<GreenTable>>, reach: usize) -> Option<Arc<GreenTable>> {
    let cap = green_table_cap(kernel.dim());
    if reach > cap {
        return None;
    }
    let mut guard = lock.write().expect("table lock");
    if guard.radius() < reach {
        let radius = (2 * guard.radius()).max(reach).min(cap);
        *guard = Arc::new(GreenTable::new(kernel, radius).ok()?);
    }
    Some(guard.clone())
}

/// One excursion drawn from stream 0 of `seed`.
pub fn sample_excursion(kernel: &JumpKernel, seed: u64, step_cap: u64) -> Result<ExcursionSample> {
    let sampler = ExcursionSampler::new(kernel, step_cap)?;
    let (outcome, steps) = sampler.run(&mut task_rng(seed, 0), f64::INFINITY);
    Ok(ExcursionSample { outcome, steps, seed })
}

/// Wet intervals `[τ_i, τ'_i)` of one path on `[0, t]`; the dry intervals are
/// the gaps. The last interval may end after the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalPath {
    pub horizon: f64,
    pub wet: Vec<(f64, f64)>,
    pub proposals: u64,
    pub accepted: u64,
    pub truncated: u64,
}

impl RenewalPath {
    /// `|T ∩ [0, t]|`.
    pub fn wet_time(&self) -> f64 {
        self.wet.iter().map(|&(a, b)| (b.min(self.horizon) - a).max(0.0)).sum()
    }

    /// Whether `t ∈ T`.
    pub fn in_contact_at_horizon(&self) -> bool {
        self.wet
            .last()
            .is_some_and(|&(a, b)| a <= self.horizon && self.horizon < b)
    }

    /// Dry interval lengths, completed ones only.
    pub fn dry_lengths(&self) -> Vec<f64> {
        self.wet.windows(2).map(|w| w[1].0 - w[0].1).collect()
    }
}

/// Sampler for the tilted renewal law at one coupling.
pub struct TiltedSampler {
    excursions: ExcursionSampler,
    b: f64,
    lambda: f64,
}

impl TiltedSampler {
    pub fn new(kernel: &JumpKernel, beta: f64, step_cap: u64) -> Result<Self> {
        let sol = pure_free_energy(kernel, beta)?;
        if !(sol.b > 0.0) {
            return Err(PinError::NotSupercritical { beta });
        }
        Ok(TiltedSampler {
            excursions: ExcursionSampler::new(kernel, step_cap)?,
            b: sol.b,
            lambda: sol.lambda,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn excursions(&self) -> &ExcursionSampler {
        &self.excursions
    }

    /// Path on `[0, t]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, t: f64) -> Result<RenewalPath> {
        let wet_law = Exp::new(self.lambda).expect("λ > 0 when b > 0");
        let kill = Exp::new(self.b).expect("b > 0");
        let mut path = RenewalPath {
            horizon: t,
            wet: Vec::new(),
            proposals: 0,
            accepted: 0,
            truncated: 0,
        };
        let mut now = 0.0;
        loop {
            let end = now + wet_law.sample(rng);
            path.wet.push((now, end));
            if end > t {
                return Ok(path);
            }
            loop {
                path.proposals += 1;
                let clock: f64 = kill.sample(rng);
                match self.excursions.run(rng, clock).0 {
                    Excursion::Finite(d) => {
                        path.accepted += 1;
                        now = end + d;
                        break;
                    }
                    Excursion::Truncated { .. } => path.truncated += 1,
                    Excursion::Stopped | Excursion::Infinite => {}
                }
                if path.proposals >= STALL_PROPOSALS {
                    let rate = path.accepted as f64 / path.proposals as f64;
                    if rate < STALL_RATE {
                        return Err(PinError::RejectionStall {
                            rate,
                            proposals: path.proposals,
                        });
                    }
                }
            }
            if now > t {
                return Ok(path);
            }
        }
    }
}

/// One tilted path drawn from stream 0 of `seed`.
pub fn sample_tilted_renewal(kernel: &JumpKernel, beta: f64, t: f64, seed: u64) -> Result<RenewalPath> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", "horizon must be finite and >= 0"));
    }
    TiltedSampler::new(kernel, beta, DEFAULT_STEP_CAP)?.sample(&mut task_rng(seed, 0), t)
}

/// Aggregate of `n` tilted paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedStats {
    pub n: usize,
    /// Paths with `t ∈ T`.
    pub hits: usize,
    pub mean_wet_fraction: f64,
    pub wet_fraction_se: f64,
    pub mean_wet_length: f64,
    pub wet_length_se: f64,
    pub proposals: u64,
    pub accepted: u64,
    pub truncated: u64,
}

/// `n` independent tilted paths, path `i` from stream `i` of `seed`.
pub fn tilted_paths(kernel: &JumpKernel, beta: f64, t: f64, n: usize, seed: u64) -> Result<Vec<RenewalPath>> {
    let sampler = TiltedSampler::new(kernel, beta, DEFAULT_STEP_CAP)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut task_rng(seed, i), t))
        .collect()
}

/// Summary statistics over paths. Wet lengths use completed wet periods only
/// (the one cut by the horizon is length-biased).
pub fn tilted_stats(paths: &[RenewalPath]) -> TiltedStats {
    let fractions: Vec<f64> = paths.iter().map(|p| p.wet_time() / p.horizon).collect();
    let lengths: Vec<f64> = paths
        .iter()
        .flat_map(|p| {
            let k = p.wet.len().saturating_sub(1);
            p.wet[..k].iter().map(|&(a, b)| b - a).collect::<Vec<_>>()
        })
        .collect();
    let (mf, sf) = mean_se(&fractions);
    let (ml, sl) = mean_se(&lengths);
    TiltedStats {
        n: paths.len(),
        hits: paths.iter().filter(|p| p.in_contact_at_horizon()).count(),
        mean_wet_fraction: mf,
        wet_fraction_se: sf,
        mean_wet_length: ml,
        wet_length_se: sl,
        proposals: paths.iter().map(|p| p.proposals).sum(),
        accepted: paths.iter().map(|p| p.accepted).sum(),
        truncated: paths.iter().map(|p| p.truncated).sum(),
    }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Estimate of `log Z^{pin}_{t,β}` for `Y ≡ 0` from `e^{bt} μ̃(t ∈ T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub beta: f64,
    pub t: f64,
    pub n: usize,
    pub hits: usize,
    #[serde(rename = "logZ_est")]
    pub log_z_est: f64,
    /// Delta-method standard error of `log_z_est`.
    #[serde(rename = "logZ_se")]
    pub log_z_se: f64,
    /// Three-sigma Wilson interval mapped to `log Z`; `ci_lo` is `-inf`
    /// (serialized as null) when there are no hits.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub acc_rate: f64,
    /// Fraction of proposals hitting the step cap plus the cap bias bound.
    pub truncated_bias_bound: f64,
}

impl McSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

/// Wilson score interval for a binomial proportion at `z` standard deviations.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `log Z ≈ bt + log(hits / n)` over `n` tilted paths.
pub fn pure_partition_mc(kernel: &JumpKernel, beta: f64, t: f64, n: usize, seed: u64) -> Result<McSummary> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    let paths = tilted_paths(kernel, beta, t, n, seed)?;
    let stats = tilted_stats(&paths);
    let sampler_b = pure_free_energy(kernel, beta)?.b;
    let bias = ExcursionSampler::new(kernel, DEFAULT_STEP_CAP)?.cap_bias_bound();
    let p = stats.hits as f64 / n as f64;
    let (lo, hi) = wilson_interval(stats.hits, n, 3.0);
    let shift = sampler_b * t;
    Ok(McSummary {
        beta,
        t,
        n,
        hits: stats.hits,
        log_z_est: shift + p.ln(),
        log_z_se: ((1.0 - p) / (n as f64 * p)).sqrt(),
        ci_lo: shift + lo.ln(),
        ci_hi: shift + hi.ln(),
        acc_rate: stats.accepted as f64 / stats.proposals.max(1) as f64,
        truncated_bias_bound: stats.truncated as f64 / stats.proposals.max(1) as f64 + bias,
    })
}

/// Untilted estimate of `μ(t ∈ T) = p_t(0)`: `(estimate, standard error,
/// truncated excursions)`.
pub fn untilted_contact_mc(kernel: &JumpKernel, t: f64, n: usize, seed: u64) -> Result<(f64, f64, u64)> {
    let sampler = ExcursionSampler::new(kernel, DEFAULT_STEP_CAP)?;
    let runs: Vec<(bool, bool)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng: TaskRng = task_rng(seed, i);
            let mut now = 0.0;
            loop {
                let hold: f64 = Exp1.sample(&mut rng);
                now += hold;
                if now > t {
                    return (true, false);
                }
                match sampler.run(&mut rng, t - now).0 {
                    Excursion::Finite(d) => now += d,
                    Excursion::Truncated { .. } => return (false, true),
                    Excursion::Stopped | Excursion::Infinite => return (false, false),
                }
            }
        })
        .collect();
    let hits: Vec<f64> = runs.iter().map(|r| if r.0 { 1.0 } else { 0.0 }).collect();
    let (m, se) = mean_se(&hits);
    Ok((m, se, runs.iter().filter(|r| r.1).count() as u64))
}
