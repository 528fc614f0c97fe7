//! Quenched partition functions by Feynman–Kac evolution in the relative
//! frame `W = X - Y`.
//!
//! Between jumps of `Y` the weight vector solves `∂v = (P - I + β δ_0) v` on a
//! box with absorbing boundary; a jump `ΔY` of `Y` moves `W` by `-ΔY`. The
//! pinned partition function is the weight left at the origin at time `t`, the
//! free one the total weight. Absorption only removes mass, so every value
//! computed on a finite box is a lower bound that increases with the radius.
//!
//! The exponential is applied by uniformization. With `c = 1 + max(0, -β)`
//! the matrix `B = P + β δ_0 + (c - 1) I` is entrywise nonnegative and
//! `e^{s(P - I + β δ_0)} = e^{-cs} Σ_k (sB)^k / k!`; all terms are nonnegative,
//! so the truncated series is again a lower bound with an explicit remainder.

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderPath;
use crate::error::{invalid, PinError, Result};
use crate::kernel::JumpKernel;
use crate::lattice::{BoxGrid, Stencil};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Starting box radius; `ceil(4√t) + 4` when unset.
    pub initial_radius: Option<usize>,
    /// Radius cap; see [`default_radius_cap`] when unset.
    pub max_radius: Option<usize>,
    /// Factor applied to the radius between certificate checks.
    pub growth: usize,
    /// Relative remainder allowed per uniformization step.
    pub series_tol: f64,
    /// Longest uniformization step; `1/(1+|β|)` when unset.
    pub max_step: Option<f64>,
    /// Required gap between `log Z` at the final radius and the previous one.
    pub truncation_tol: f64,
    /// `δβ` for the centered difference in [`mean_local_time`].
    pub fd_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            initial_radius: None,
            max_radius: None,
            growth: 2,
            series_tol: 1e-12,
            max_step: None,
            truncation_tol: 1e-6,
            fd_step: 1e-3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.growth < 2 {
            return Err(invalid("growth", "radius growth factor must be at least 2"));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(invalid("series_tol", "must lie in (0, 1)"));
        }
        if !(self.truncation_tol > 0.0) {
            return Err(invalid("truncation_tol", "must be positive"));
        }
        if !(self.fd_step > 0.0) {
            return Err(invalid("fd_step", "must be positive"));
        }
        if let Some(s) = self.max_step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("max_step", "must be positive"));
            }
        }
        if self.initial_radius == Some(0) || self.max_radius == Some(0) {
            return Err(invalid("radius", "must be at least 1"));
        }
        Ok(())
    }
}

/// Largest radius tried per dimension: `2^10` sites per axis in `d = 1`,
/// `129^3` in `d = 3`.
pub fn default_radius_cap(dim: usize) -> usize {
    match dim {
        1 => 511,
        2 => 256,
        3 => 64,
        _ => 16,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub log_z: f64,
    pub beta: f64,
    pub t1: f64,
    pub t2: f64,
    pub radius: usize,
    /// `log Z(R) - log Z(R / growth)`, nonnegative.
    pub certificate: f64,
    pub pinned: bool,
}

/// Weights over the box with the log of the factored-out scale.
#[derive(Debug, Clone)]
pub struct RelativeField {
    grid: BoxGrid,
    weights: Vec<f64>,
    log_scale: f64,
    time: f64,
}

/// One uniformization operator `B` on a fixed box.
struct Propagator {
    stencil: Stencil,
    origin: usize,
    beta: f64,
    diag: f64,
    shift: f64,
    norm: f64,
    step: f64,
    tol: f64,
}

impl Propagator {
    fn new(kernel: &JumpKernel, grid: &BoxGrid, beta: f64, opts: &SolverOptions) -> Self {
        let shift = 1.0 + (-beta).max(0.0);
        Propagator {
            stencil: grid.stencil(kernel.support().iter().map(|(y, p)| (y.as_slice(), *p))),
            origin: grid.origin(),
            beta,
            diag: shift - 1.0,
            shift,
            norm: 1.0 + beta.abs(),
            step: opts.max_step.unwrap_or(1.0 / (1.0 + beta.abs())),
            tol: opts.series_tol,
        }
    }

    /// `dst = B src`.
    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        if self.diag > 0.0 {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = self.diag * s;
            }
        } else {
            dst.iter_mut().for_each(|d| *d = 0.0);
        }
        self.stencil.apply_add(src, dst);
        dst[self.origin] += self.beta * src[self.origin];
    }
}

#[derive(Default)]
struct Scratch {
    term: Vec<f64>,
    next: Vec<f64>,
}

impl RelativeField {
    /// `δ_0` on the box of the given radius.
    pub fn delta(dim: usize, radius: usize) -> Self {
        let grid = BoxGrid::new(dim, radius);
        let mut weights = vec![0.0; grid.len()];
        weights[grid.origin()] = 1.0;
        RelativeField {
            grid,
            weights,
            log_scale: 0.0,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Log of the unnormalized weight at `W = 0`.
    pub fn log_at_origin(&self) -> f64 {
        self.weights[self.grid.origin()].ln() + self.log_scale
    }

    /// Log of the unnormalized total weight.
    pub fn log_total(&self) -> f64 {
        self.weights.iter().sum::<f64>().ln() + self.log_scale
    }

    fn normalize(&mut self) -> Result<()> {
        let m = self.weights.iter().cloned().fold(0.0, f64::max);
        if !(m > 0.0) || !m.is_finite() {
            return Err(PinError::AbsorbedAll {
                radius: self.grid.radius(),
            });
        }
        let inv = 1.0 / m;
        self.weights.iter_mut().for_each(|w| *w *= inv);
        self.log_scale += m.ln();
        Ok(())
    }

    /// Account for a jump `ΔY` of the disorder: `v(w) <- v(w + ΔY)`.
    fn jump(&mut self, dy: &[i64], scratch: &mut Scratch) -> Result<()> {
        let back: Vec<i64> = dy.iter().map(|c| -c).collect();
        scratch.next.resize(self.weights.len(), 0.0);
        self.grid.shift_into(&self.weights, &back, &mut scratch.next);
        std::mem::swap(&mut self.weights, &mut scratch.next);
        self.normalize()
    }

    fn evolve(&mut self, prop: &Propagator, duration: f64, scratch: &mut Scratch) -> Result<()> {
        let mut remaining = duration;
        while remaining > 0.0 {
            let s = remaining.min(prop.step);
            self.step(prop, s, scratch);
            self.log_scale -= prop.shift * s;
            self.normalize()?;
            remaining -= s;
            self.time += s;
        }
        Ok(())
    }

    /// `v <- Σ_k (sB)^k v / k!`, stopped once the tail is provably below
    /// `tol · |out|_1`: since `|B u|_1 <= norm |u|_1`, the terms after `k`
    /// sum to at most `|term_k|_1 · x / (k + 1 - x)` with `x = s · norm`.
    fn step(&mut self, prop: &Propagator, s: f64, scratch: &mut Scratch) {
        let n = self.weights.len();
        scratch.term.clear();
        scratch.term.extend_from_slice(&self.weights);
        scratch.next.resize(n, 0.0);
        let x = s * prop.norm;
        let mut total: f64 = self.weights.iter().sum();
        for k in 1..10_000usize {
            prop.apply(&scratch.term, &mut scratch.next);
            let f = s / k as f64;
            let mut mass = 0.0;
            for (o, t) in self.weights.iter_mut().zip(scratch.next.iter_mut()) {
                *t *= f;
                *o += *t;
                mass += *t;
            }
            total += mass;
            std::mem::swap(&mut scratch.term, &mut scratch.next);
            let kf = k as f64 + 1.0;
            if kf > x && mass * x / (kf - x) <= prop.tol * total {
                break;
            }
        }
    }
}

/// `log Z` on a box of fixed radius (no certificate).
pub fn solve_at_radius(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t: f64,
    radius: usize,
    opts: &SolverOptions,
    pinned: bool,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let grid = BoxGrid::new(kernel.dim(), radius);
    let prop = Propagator::new(kernel, &grid, beta, opts);
    let mut field = RelativeField::delta(kernel.dim(), radius);
    let mut scratch = Scratch::default();
    let mut now = 0.0;
    for j in path.jumps.iter().take_while(|j| j.time <= t) {
        field.evolve(&prop, j.time - now, &mut scratch)?;
        field.jump(&j.dx, &mut scratch)?;
        now = j.time;
    }
    field.evolve(&prop, t - now, &mut scratch)?;
    let v = if pinned {
        field.log_at_origin()
    } else {
        field.log_total()
    };
    if v == f64::NEG_INFINITY {
        return Err(PinError::AbsorbedAll { radius });
    }
    Ok(v)
}

fn check_inputs(kernel: &JumpKernel, path: &DisorderPath, beta: f64, t: f64, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if !beta.is_finite() {
        return Err(invalid("beta", "must be finite"));
    }
    if !(t >= 0.0) || t > path.horizon * (1.0 + 1e-12) {
        return Err(invalid("t", format!("need 0 <= t <= {}", path.horizon)));
    }
    if path.dim() != 0 && path.dim() != kernel.dim() {
        return Err(invalid("path", "disorder dimension differs from kernel dimension"));
    }
    Ok(())
}

fn certified(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t: f64,
    opts: &SolverOptions,
    pinned: bool,
) -> Result<PartitionResult> {
    check_inputs(kernel, path, beta, t, opts)?;
    let cap = opts.max_radius.unwrap_or_else(|| default_radius_cap(kernel.dim()));
    let mut radius = opts
        .initial_radius
        .unwrap_or((4.0 * t.sqrt()).ceil() as usize + 4)
        .min(cap);
    let result = |log_z, radius, certificate| PartitionResult {
        log_z,
        beta,
        t1: 0.0,
        t2: t,
        radius,
        certificate,
        pinned,
    };
    if t == 0.0 {
        return Ok(result(0.0, radius, 0.0));
    }
    let attempt = |r| match solve_at_radius(kernel, path, beta, t, r, opts, pinned) {
        Err(PinError::AbsorbedAll { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    };
    let mut prev = attempt(radius)?;
    let mut cert = f64::INFINITY;
    while radius < cap {
        let next = (radius * opts.growth).min(cap);
        let cur = attempt(next)?;
        cert = cur - prev;
        // different box sizes round differently; only tiny negatives are noise
        if cert < 0.0 && cert > -1e-9 * (1.0 + cur.abs()) {
            cert = 0.0;
        }
        radius = next;
        prev = cur;
        if cert.is_finite() && cert < opts.truncation_tol {
            return Ok(result(cur, radius, cert.max(0.0)));
        }
    }
    if prev == f64::NEG_INFINITY {
        return Err(PinError::AbsorbedAll { radius });
    }
    Err(PinError::ToleranceNotMet {
        radius,
        certificate: cert,
    })
}

/// `log Z^{Y,pin}_{t,β} = log E^X[e^{β L_t(X,Y)} 1{X_t = Y_t}]`.
pub fn pinned_log_partition(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t: f64,
    opts: &SolverOptions,
) -> Result<PartitionResult> {
    certified(kernel, path, beta, t, opts, true)
}

/// `log E^X[e^{β L_t(X,Y)}]`, no endpoint constraint.
pub fn free_log_partition(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t: f64,
    opts: &SolverOptions,
) -> Result<PartitionResult> {
    certified(kernel, path, beta, t, opts, false)
}

/// Pinned partition function of the path restricted to `[t1, t2]` and
/// recentered at `Y_{t1}`.
pub fn interval_log_partition(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t1: f64,
    t2: f64,
    opts: &SolverOptions,
) -> Result<PartitionResult> {
    let shifted = path.shifted(t1, t2)?;
    let mut r = certified(kernel, &shifted, beta, t2 - t1, opts, true)?;
    r.t1 = t1;
    r.t2 = t2;
    Ok(r)
}

/// `μ^{Y,pin}_{t,β}(L_t) = ∂_β log Z^{Y,pin}_{t,β}` by a centered difference at
/// the radius certified for `β`.
pub fn mean_local_time(
    kernel: &JumpKernel,
    path: &DisorderPath,
    beta: f64,
    t: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let base = pinned_log_partition(kernel, path, beta, t, opts)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = opts.fd_step;
    let up = solve_at_radius(kernel, path, beta + h, t, base.radius, opts, true)?;
    let down = solve_at_radius(kernel, path, beta - h, t, base.radius, opts, true)?;
    let v = (up - down) / (2.0 * h);
    let slack = 1e-4 * (1.0 + t);
    if v < -slack || v > t + slack {
        return Err(PinError::Quadrature(format!(
            "finite-difference local time {v} outside [0, {t}]"
        )));
    }
    Ok(v.clamp(0.0, t))
}
