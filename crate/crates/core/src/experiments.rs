//! Experiment drivers: quenched free-energy curves, the low-temperature
//! comparison, the smoothing envelope, the sandwich grid and the annealed
//! identity. Drivers return plain rows; formatting them is left to callers.
//!
//! Disorder paths are shared across grid cells. Path `j` of a run seeded with
//! `s` is drawn from `derive_seed(s, j)` over the largest horizon and then
//! restricted, so cells at different `t` or `β` see the same realizations.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealed::{annealed_free_energy, smoothing_envelope};
use crate::disorder::{sample_disorder, DisorderPath};
use crate::error::{invalid, PinError, Result};
use crate::fk::{interval_log_partition, mean_local_time, pinned_log_partition, SolverOptions};
use crate::kernel::JumpKernel;
use crate::renewal::mean_se;
use crate::rng::{derive_seed, task_rng};
use crate::walk::green_function;

/// Slack allowed on inequalities that hold exactly for the true partition
/// function, on the `log Z` scale.
pub const SOLVER_SLACK: f64 = 1e-6;

/// Mean of `(1/t) log Z^{Y,pin}_{t,β}` over the disorder sample at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    /// Paths whose solve succeeded.
    pub n_ok: usize,
    /// False when any solve failed or fewer than two succeeded.
    pub valid: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyCurve {
    pub dim: usize,
    pub rho: f64,
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl FreeEnergyCurve {
    /// `mean_i - k se_i <= mean_j + k se_j + slack` for every `t_i < t_j`.
    pub fn nondecreasing_within(&self, k: f64) -> bool {
        let pts: Vec<&CurvePoint> = self.points.iter().filter(|p| p.valid).collect();
        pts.iter().enumerate().all(|(i, a)| {
            pts[i + 1..]
                .iter()
                .all(|b| a.mean - k * a.se <= b.mean + k * b.se + SOLVER_SLACK)
        })
    }
}

/// `n` disorder paths on `[0, horizon]`, path `j` seeded by `derive_seed(seed, j)`.
pub fn disorder_ensemble(
    kernel: &JumpKernel,
    rho: f64,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<DisorderPath>> {
    (0..n as u64)
        .into_par_iter()
        .map(|j| sample_disorder(kernel, rho, horizon, derive_seed(seed, j)))
        .collect()
}

/// `(1/t) log Z` for every path restricted to `[0, t]`, in path order.
fn scaled_log_z(
    kernel: &JumpKernel,
    paths: &[DisorderPath],
    beta: f64,
    t: f64,
    opts: &SolverOptions,
) -> Vec<Result<f64>> {
    paths
        .par_iter()
        .map(|y| {
            let y = y.shifted(0.0, t)?;
            Ok(pinned_log_partition(kernel, &y, beta, t, opts)?.log_z / t)
        })
        .collect()
}

fn aggregate(t: f64, values: &[Result<f64>]) -> CurvePoint {
    let ok: Vec<f64> = values.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
    let errors: Vec<String> = values
        .iter()
        .filter_map(|v| v.as_ref().err().map(|e| e.to_string()))
        .collect();
    let (mean, se) = mean_se(&ok);
    CurvePoint {
        t,
        mean,
        se,
        n_ok: ok.len(),
        valid: errors.is_empty() && ok.len() >= 2,
        errors,
    }
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(name, "empty grid"));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid(name, "entries must be finite and > 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "must be strictly ascending"));
    }
    Ok(())
}

/// `(1/t) E log Z^{Y,pin}_{t,β}` estimated from `n` disorder paths at each `t`.
/// A failed solve invalidates its cell only.
pub fn quenched_fe_estimate(
    kernel: &JumpKernel,
    beta: f64,
    rho: f64,
    t_grid: &[f64],
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<FreeEnergyCurve> {
    check_grid("t_grid", t_grid)?;
    if n < 2 {
        return Err(invalid("n", "need at least two disorder samples"));
    }
    opts.validate()?;
    let t_max = *t_grid.last().unwrap();
    let paths = disorder_ensemble(kernel, rho, t_max, n, seed)?;
    let points = t_grid
        .iter()
        .map(|&t| aggregate(t, &scaled_log_z(kernel, &paths, beta, t, opts)))
        .collect();
    Ok(FreeEnergyCurve {
        dim: kernel.dim(),
        rho,
        beta,
        n,
        seed,
        points,
    })
}

/// Path-by-path lower bound on `(1/t) log Z^{Y,pin}_{t,β}` for nearest-neighbour
/// walks:
///
/// `(β-1) + (k/t) [-log(dβ) + (1/k) Σ log(1 - (e^{-βε_i⁻} + e^{-βε_i⁺})/2)]`
///
/// where `k` counts the jumps of `Y` in `(0, t]` and `ε_i^±` is `β^{-2/3}`
/// capped at half the gap to the neighbouring jump (the first gap starts at 0,
/// the last one ends at `t`). Between the windows `X` sits still on `Y`; inside
/// window `i` it makes a single jump that follows `Y`.
pub fn lowtemp_lower_bound_formula(path: &DisorderPath, beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be finite and > 0"));
    }
    if !(t > 0.0 && t <= path.horizon) {
        return Err(invalid("t", format!("need 0 < t <= {}", path.horizon)));
    }
    let k = path.jump_count(t);
    if k == 0 {
        return Ok(beta - 1.0);
    }
    let jumps = &path.jumps[..k];
    if jumps.iter().any(|j| j.dx.iter().map(|c| c.abs()).sum::<i64>() != 1) {
        return Err(PinError::Unsupported(
            "lower-bound formula needs nearest-neighbour jumps".into(),
        ));
    }
    let d = path.dim() as f64;
    let cap = beta.powf(-2.0 / 3.0);
    let mut sum = 0.0;
    for i in 0..k {
        let prev = if i == 0 { 0.0 } else { jumps[i - 1].time };
        let next = if i + 1 < k { jumps[i + 1].time } else { t };
        let now = jumps[i].time;
        let em = cap.min(0.5 * (now - prev));
        let ep = cap.min(0.5 * (next - now));
        sum += (-0.5 * ((-beta * em).exp() + (-beta * ep).exp())).ln_1p();
    }
    Ok(beta - 1.0 + (-(k as f64) * (d * beta).ln() + sum) / t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowTempRow {
    pub beta: f64,
    /// Mean of `(1/t) log Z` over the disorder sample.
    pub measured: f64,
    pub se: f64,
    /// `β - ρ (h + log β) - 1` with `h` the kernel's following entropy.
    pub prediction: f64,
    pub deviation: f64,
    /// Mean of the per-path lower bound; `None` for non-nearest-neighbour kernels.
    pub bound_mean: Option<f64>,
    /// Smallest `measured_j - bound_j` over paths.
    pub min_slack: Option<f64>,
    /// Paths where the bound exceeds the solver value by more than [`SOLVER_SLACK`].
    pub bound_violations: usize,
    pub valid: bool,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowTempReport {
    pub dim: usize,
    pub rho: f64,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    /// `-Σ p(x) log(2 p(x))`, `log d` for the simple walk.
    pub entropy: f64,
    pub rows: Vec<LowTempRow>,
}

impl LowTempReport {
    /// `|Δ|` strictly decreasing along the β list.
    pub fn deviation_shrinks(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].deviation.abs() < w[0].deviation.abs())
    }

    pub fn bound_violations(&self) -> usize {
        self.rows.iter().map(|r| r.bound_violations).sum()
    }
}

/// Measured `(1/t) log Z` against `β - ρ (h + log β) - 1` for each `β`, together with the
/// per-path lower bound where it applies.
pub fn lowtemp_report(
    kernel: &JumpKernel,
    rho: f64,
    betas: &[f64],
    t: f64,
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<LowTempReport> {
    check_grid("beta", betas)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and > 0"));
    }
    if n < 2 {
        return Err(invalid("n", "need at least two disorder samples"));
    }
    opts.validate()?;
    let paths = disorder_ensemble(kernel, rho, t, n, seed)?;
    let entropy = kernel.following_entropy();
    let rows = betas
        .iter()
        .map(|&beta| {
            let values = scaled_log_z(kernel, &paths, beta, t, opts);
            let cell = aggregate(t, &values);
            let prediction = beta - rho * (entropy + beta.ln()) - 1.0;
            let (mut bound_mean, mut min_slack, mut violations) = (None, None, 0);
            if kernel.is_simple() {
                let mut bounds = Vec::with_capacity(n);
                let mut slack = f64::INFINITY;
                for (y, v) in paths.iter().zip(&values) {
                    let bound = lowtemp_lower_bound_formula(y, beta, t)?;
                    bounds.push(bound);
                    if let Ok(v) = v {
                        slack = slack.min(v - bound);
                        if bound > v + SOLVER_SLACK {
                            violations += 1;
                        }
                    }
                }
                bound_mean = Some(mean_se(&bounds).0);
                min_slack = Some(slack);
            }
            Ok(LowTempRow {
                beta,
                measured: cell.mean,
                se: cell.se,
                prediction,
                deviation: cell.mean - prediction,
                bound_mean,
                min_slack,
                bound_violations: violations,
                valid: cell.valid,
                errors: cell.errors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LowTempReport {
        dim: kernel.dim(),
        rho,
        t,
        n,
        seed,
        entropy,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub beta: f64,
    pub quenched: f64,
    pub se: f64,
    pub annealed: f64,
    /// `quenched <= annealed + 3 se`.
    pub jensen_ok: bool,
    /// `(3dG²/ρ)(β - β̂_c)²₊`; `None` when no `β̂_c` was found.
    pub envelope: Option<f64>,
    /// For `β > β̂_c`: whether the quenched estimate lies below the envelope.
    pub below_envelope: Option<bool>,
    pub valid: bool,
    pub errors: Vec<String>,
}

/// Mean of `L_t / t` under the pinned polymer measure at `β̂_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub dim: usize,
    pub rho: f64,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub green: f64,
    /// Smallest grid `β` whose estimate is more than three standard errors
    /// above zero. A finite-horizon estimate, not the quenched critical point.
    pub beta_hat: Option<f64>,
    pub rows: Vec<SmoothingRow>,
    /// Contact density at `β̂_c` for each horizon in the diagnostic list.
    pub contact: Vec<ContactPoint>,
}

impl SmoothingReport {
    pub fn jensen_holds(&self) -> bool {
        self.rows.iter().filter(|r| r.valid).all(|r| r.jensen_ok)
    }

    /// Contact density strictly decreasing in `t`; `None` without a diagnostic.
    pub fn contact_decreasing(&self) -> Option<bool> {
        if self.contact.len() < 2 {
            return None;
        }
        Some(self.contact.windows(2).all(|w| w[1].mean < w[0].mean))
    }
}

/// Quenched estimates over a `β` grid, the annealed value, the smoothing
/// envelope anchored at `β̂_c`, and the contact density at `β̂_c` over
/// `contact_ts`.
#[allow(clippy::too_many_arguments)]
pub fn smoothing_report(
    kernel: &JumpKernel,
    rho: f64,
    betas: &[f64],
    t: f64,
    contact_ts: &[f64],
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SmoothingReport> {
    if kernel.dim() < 3 {
        return Err(invalid("d", "smoothing report needs d >= 3"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid("rho", "must be finite and > 0"));
    }
    check_grid("beta", betas)?;
    if !contact_ts.is_empty() {
        check_grid("contact_t", contact_ts)?;
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and > 0"));
    }
    if n < 2 {
        return Err(invalid("n", "need at least two disorder samples"));
    }
    opts.validate()?;
    let green = green_function(kernel)?.value;
    let horizon = contact_ts.last().copied().unwrap_or(t).max(t);
    let paths = disorder_ensemble(kernel, rho, horizon, n, seed)?;
    let cells: Vec<CurvePoint> = betas
        .iter()
        .map(|&beta| aggregate(t, &scaled_log_z(kernel, &paths, beta, t, opts)))
        .collect();
    let beta_hat = betas
        .iter()
        .zip(&cells)
        .find(|(_, c)| c.valid && c.mean > 3.0 * c.se)
        .map(|(&b, _)| b);
    let mut rows = Vec::with_capacity(betas.len());
    for (&beta, cell) in betas.iter().zip(cells) {
        let annealed = annealed_free_energy(kernel, beta, rho)?;
        let envelope = match beta_hat {
            Some(bh) => Some(smoothing_envelope(kernel.dim(), green, rho, beta, bh)?),
            None => None,
        };
        let below_envelope = match (beta_hat, envelope) {
            (Some(bh), Some(env)) if beta > bh => Some(cell.mean <= env),
            _ => None,
        };
        rows.push(SmoothingRow {
            beta,
            quenched: cell.mean,
            se: cell.se,
            annealed,
            jensen_ok: cell.mean <= annealed + 3.0 * cell.se,
            envelope,
            below_envelope,
            valid: cell.valid,
            errors: cell.errors,
        });
    }
    let contact = match beta_hat {
        Some(bh) => contact_ts
            .iter()
            .map(|&s| contact_density(kernel, &paths, bh, s, opts))
            .collect(),
        None => Vec::new(),
    };
    Ok(SmoothingReport {
        dim: kernel.dim(),
        rho,
        t,
        n,
        seed,
        green,
        beta_hat,
        rows,
        contact,
    })
}

fn contact_density(
    kernel: &JumpKernel,
    paths: &[DisorderPath],
    beta: f64,
    t: f64,
    opts: &SolverOptions,
) -> ContactPoint {
    let values: Vec<f64> = paths
        .par_iter()
        .filter_map(|y| {
            let y = y.shifted(0.0, t).ok()?;
            mean_local_time(kernel, &y, beta, t, opts).ok().map(|l| l / t)
        })
        .collect();
    let (mean, se) = mean_se(&values);
    ContactPoint {
        t,
        mean,
        se,
        n_ok: values.len(),
    }
}

/// One cell of the `Y ≡ 0` sandwich
/// `(β-1)t <= log E[e^{βL_t}] <= (β-1+1/β)t + log(1+1/β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub dim: usize,
    pub beta: f64,
    pub t: f64,
    pub log_z: f64,
    pub lower: f64,
    pub upper: f64,
    pub radius: usize,
    pub certificate: f64,
    pub ok: bool,
    pub error: Option<String>,
}

pub fn sandwich_bounds(beta: f64, t: f64) -> (f64, f64) {
    ((beta - 1.0) * t, (beta - 1.0 + 1.0 / beta) * t + (1.0 / beta).ln_1p())
}

/// Free partition function with `Y ≡ 0` on every `(β, t)` cell, checked
/// against both bounds up to [`SOLVER_SLACK`]. Row-major in `β`.
pub fn sandwich_report(
    kernel: &JumpKernel,
    betas: &[f64],
    ts: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SandwichRow>> {
    if betas.is_empty() || ts.is_empty() {
        return Err(invalid("grid", "empty grid"));
    }
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(invalid("beta", "entries must be finite and > 0"));
    }
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("t", "entries must be finite and >= 0"));
    }
    opts.validate()?;
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| ts.iter().map(move |&t| (b, t))).collect();
    let dim = kernel.dim();
    Ok(cells
        .par_iter()
        .map(|&(beta, t)| {
            let (lower, upper) = sandwich_bounds(beta, t);
            let y = DisorderPath::constant(dim, t);
            match crate::fk::free_log_partition(kernel, &y, beta, t, opts) {
                Ok(r) => SandwichRow {
                    dim,
                    beta,
                    t,
                    log_z: r.log_z,
                    lower,
                    upper,
                    radius: r.radius,
                    certificate: r.certificate,
                    ok: lower <= r.log_z + SOLVER_SLACK && r.log_z <= upper + SOLVER_SLACK,
                    error: None,
                },
                Err(e) => SandwichRow {
                    dim,
                    beta,
                    t,
                    log_z: f64::NAN,
                    lower,
                    upper,
                    radius: 0,
                    certificate: f64::NAN,
                    ok: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Disorder average of `Z^{Y,pin}_{t,β}` against the pure model it reduces to:
/// `X - Y` is a walk with the same kernel at rate `1+ρ`, so
/// `E[Z^Y_{t,β}] = Z^{pin}_{(1+ρ)t, β/(1+ρ)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealedIdentity {
    pub beta: f64,
    pub rho: f64,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub mean_z: f64,
    pub se_z: f64,
    pub pure_z: f64,
    pub z_score: f64,
    pub failures: usize,
}

pub fn annealed_identity_mc(
    kernel: &JumpKernel,
    beta: f64,
    rho: f64,
    t: f64,
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<AnnealedIdentity> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", "must be finite and >= 0"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and > 0"));
    }
    if n < 2 {
        return Err(invalid("n", "need at least two disorder samples"));
    }
    opts.validate()?;
    let paths = disorder_ensemble(kernel, rho, t, n, seed)?;
    let values: Vec<Result<f64>> = paths
        .par_iter()
        .map(|y| Ok(pinned_log_partition(kernel, y, beta, t, opts)?.log_z.exp()))
        .collect();
    let z: Vec<f64> = values.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
    let (mean_z, se_z) = mean_se(&z);
    let scale = 1.0 + rho;
    let pure = DisorderPath::constant(kernel.dim(), scale * t);
    let pure_z = pinned_log_partition(kernel, &pure, beta / scale, scale * t, opts)?
        .log_z
        .exp();
    Ok(AnnealedIdentity {
        beta,
        rho,
        t,
        n,
        seed,
        mean_z,
        se_z,
        pure_z,
        z_score: (mean_z - pure_z) / se_z,
        failures: n - z.len(),
    })
}

/// `log Z_{[u,w]} - log Z_{[u,v]} - log Z_{[v,w]}`, nonnegative for the true
/// partition functions.
pub fn superadditivity_gap(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    (u, v, w): (f64, f64, f64),
    opts: &SolverOptions,
) -> Result<f64> {
    if !(u <= v && v <= w) {
        return Err(invalid("split", "need u <= v <= w"));
    }
    let whole = interval_log_partition(kernel, path, beta, u, w, opts)?.log_z;
    let left = interval_log_partition(kernel, path, beta, u, v, opts)?.log_z;
    let right = interval_log_partition(kernel, path, beta, v, w, opts)?.log_z;
    Ok(whole - left - right)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    pub index: u64,
    pub split: (f64, f64, f64),
    pub gap: f64,
}

/// `count` random splits `u < v < w` of `[0, t]`, each on its own disorder path.
pub fn superadditivity_sweep(
    kernel: &JumpKernel,
    rho: f64,
    beta: f64,
    t: f64,
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<SplitCheck>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(seed, i);
            let mut cut = [
                rng.random::<f64>() * t,
                rng.random::<f64>() * t,
                rng.random::<f64>() * t,
            ];
            cut.sort_by(f64::total_cmp);
            let y = sample_disorder(kernel, rho, t, derive_seed(seed, i))?;
            let split = (cut[0], cut[1], cut[2]);
            Ok(SplitCheck {
                index: i,
                split,
                gap: superadditivity_gap(kernel, &y, beta, split, opts)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::Jump;

    fn k1() -> JumpKernel {
        JumpKernel::simple(1).unwrap()
    }

    #[test]
    fn bound_without_jumps_is_beta_minus_one() {
        let y = DisorderPath::constant(1, 5.0);
        assert_eq!(lowtemp_lower_bound_formula(&y, 7.0, 5.0).unwrap(), 6.0);
    }

    #[test]
    fn bound_matches_hand_arithmetic() {
        // one jump at 1 on [0, 3]: ε⁻ = ε⁺ = min(8^{-2/3}, 1/2, 1) = 1/4
        let y = DisorderPath::from_jumps(
            2,
            1.0,
            3.0,
            0,
            vec![Jump {
                time: 1.0,
                dx: vec![0, 1],
            }],
        )
        .unwrap();
        let v = lowtemp_lower_bound_formula(&y, 8.0, 3.0).unwrap();
        let expected = 7.0 + (-(16f64).ln() + (1.0 - (-2f64).exp()).ln()) / 3.0;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn bound_is_below_solver() {
        let opts = SolverOptions::default();
        for seed in 0..4 {
            let y = sample_disorder(&k1(), 1.0, 6.0, seed).unwrap();
            let bound = lowtemp_lower_bound_formula(&y, 6.0, 6.0).unwrap();
            let z = pinned_log_partition(&k1(), &y, 6.0, 6.0, &opts).unwrap().log_z / 6.0;
            assert!(bound <= z + SOLVER_SLACK, "{bound} > {z}");
        }
    }

    #[test]
    fn long_jumps_are_rejected() {
        let y = DisorderPath::from_jumps(1, 1.0, 2.0, 0, vec![Jump { time: 1.0, dx: vec![2] }]).unwrap();
        assert!(lowtemp_lower_bound_formula(&y, 3.0, 2.0).is_err());
    }

    #[test]
    fn pure_curve_approaches_free_energy() {
        let c = quenched_fe_estimate(&k1(), 1.0, 0.0, &[5.0, 20.0], 2, 1, &SolverOptions::default()).unwrap();
        let f = 2f64.sqrt() - 1.0;
        assert!(c.points.iter().all(|p| p.valid && p.se == 0.0));
        assert!((c.points[1].mean - f).abs() < 0.05);
        assert!(c.points[0].mean < c.points[1].mean);
        assert!(c.nondecreasing_within(3.0));
    }

    #[test]
    fn zero_coupling_curve_is_negative() {
        let c = quenched_fe_estimate(&k1(), 0.0, 1.0, &[2.0, 8.0], 8, 3, &SolverOptions::default()).unwrap();
        assert!(c.points.iter().all(|p| p.mean < 0.0));
        assert!(c.points[0].mean < c.points[1].mean);
    }

    #[test]
    fn grids_are_validated() {
        let o = SolverOptions::default();
        assert!(quenched_fe_estimate(&k1(), 1.0, 1.0, &[2.0, 1.0], 4, 0, &o).is_err());
        assert!(quenched_fe_estimate(&k1(), 1.0, 1.0, &[1.0], 1, 0, &o).is_err());
        assert!(sandwich_report(&k1(), &[0.0], &[1.0], &o).is_err());
    }

    #[test]
    fn sandwich_small_grid() {
        let rows = sandwich_report(&k1(), &[2.0], &[0.0, 5.0], &SolverOptions::default()).unwrap();
        assert!(rows.iter().all(|r| r.ok));
        assert_eq!(rows[0].log_z, 0.0);
        let (lo, hi) = sandwich_bounds(2.0, 5.0);
        assert_eq!(lo, 5.0);
        assert!((hi - 7.905_465_108_108_164).abs() < 1e-12);
    }

    #[test]
    fn superadditivity_on_a_few_splits() {
        let checks = superadditivity_sweep(&k1(), 1.0, 1.5, 4.0, 3, 9, &SolverOptions::default()).unwrap();
        assert!(checks.iter().all(|c| c.gap >= -SOLVER_SLACK));
    }

    #[test]
    fn general_kernel_entropy() {
        let k = JumpKernel::new(
            1,
            vec![(vec![1], 0.25), (vec![-1], 0.25), (vec![2], 0.25), (vec![-2], 0.25)],
        )
        .unwrap();
        assert!((k.following_entropy() - 2f64.ln()).abs() < 1e-15);
        assert!(k1().following_entropy().abs() < 1e-15);
    }
}
