//! The pure model `Y ≡ 0` and, through a time change, the annealed model.
//!
//! The contact set of the pure model is a renewal process: wet periods are
//! Exp(1) (the walk leaves the origin at rate 1) and dry periods are excursion
//! lengths with sub-probability density `K`. Decomposing `p_t(0)` by the number
//! of excursions gives `K̂(b) = 1 + b - 1/p̂(b)`, and the free energy `b = F(β)`
//! solves `β p̂(b) = 1` when that has a root, `b = 0` otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PinError, Result};
use crate::kernel::JumpKernel;
use crate::roots::brent;
use crate::walk::{green_function_tol, laplace_p0, laplace_p0_value};

/// Tolerance on `|β p̂(b) - 1|` at the root.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedSolution {
    pub beta: f64,
    /// `F(β)`.
    pub b: f64,
    /// `1 - β + b`, the exit rate of a wet period under the tilted law.
    pub lambda: f64,
    /// `F'(β)`, the limiting fraction of time in contact.
    pub contact_fraction: f64,
    /// Mass at infinity of the tilted dry-period law.
    pub defect_mass: f64,
    /// `|β p̂(b) - 1|` at a positive root, zero otherwise.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub dim: usize,
    pub window: (f64, f64),
    pub exponent: f64,
    /// Fitted `c₀` in `F ≈ c₀ (β - β_c)^exponent`.
    pub amplitude: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// One point of an onset profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetPoint {
    pub delta: f64,
    pub beta: f64,
    pub free_energy: f64,
}

/// `G` with the tolerance used for critical points.
fn green(kernel: &JumpKernel) -> Result<f64> {
    Ok(green_function_tol(kernel, 1e-13)?.value)
}

/// `F(β)` with the renewal parameters of the tilted measure.
pub fn pure_free_energy(kernel: &JumpKernel, beta: f64) -> Result<AnnealedSolution> {
    if !beta.is_finite() {
        return Err(invalid("beta", "must be finite"));
    }
    let d = kernel.dim();
    let delocalized = |defect_mass| AnnealedSolution {
        beta,
        b: 0.0,
        lambda: 1.0 - beta,
        contact_fraction: 0.0,
        defect_mass,
        residual: 0.0,
    };
    if beta <= 0.0 {
        return Ok(delocalized(defect_below(kernel, beta)?));
    }
    if d >= 3 {
        let g = green(kernel)?;
        if beta * g <= 1.0 {
            return Ok(delocalized(1.0 - (1.0 - 1.0 / g) / (1.0 - beta)));
        }
    }
    let b = solve_rate(kernel, beta)?;
    let lp = laplace_p0(kernel, b)?;
    Ok(AnnealedSolution {
        beta,
        b,
        lambda: 1.0 - beta + b,
        contact_fraction: -lp.value * lp.value / lp.derivative,
        defect_mass: 0.0,
        residual: (beta * lp.value - 1.0).abs(),
    })
}

fn defect_below(kernel: &JumpKernel, beta: f64) -> Result<f64> {
    // β <= 0: the dry law K / (1 - β) loses 1 - K̂(0)/(1 - β)
    if kernel.dim() <= 2 {
        Ok(1.0 - 1.0 / (1.0 - beta))
    } else {
        let g = green(kernel)?;
        Ok(1.0 - (1.0 - 1.0 / g) / (1.0 - beta))
    }
}

/// Root `b > 0` of `β p̂(b) = 1`, searched in `u = log b`.
fn solve_rate(kernel: &JumpKernel, beta: f64) -> Result<f64> {
    let f = |b: f64| -> Result<f64> { Ok(beta * laplace_p0_value(kernel, b)? - 1.0) };
    // F(β) <= β - 1 + 1/β
    let mut hi = (beta - 1.0 + 1.0 / beta).max(1e-3);
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(PinError::RootFinding("no upper bracket".into()));
        }
    }
    let mut lo = hi / 16.0;
    while f(lo)? <= 0.0 {
        hi = lo;
        lo /= 16.0;
        if lo < 1e-250 {
            return Err(PinError::RootFinding(format!(
                "β = {beta} too close to the critical point to bracket F"
            )));
        }
    }
    let u = brent(|u: f64| f(u.exp()), lo.ln(), hi.ln(), 1e-15, RESIDUAL_TOL)?;
    Ok(u.exp())
}

/// `β_c^a(ρ) = (1+ρ)/G`, zero in recurrent dimensions.
pub fn critical_point(kernel: &JumpKernel, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(invalid("rho", "must be >= 0"));
    }
    if kernel.dim() <= 2 {
        return Ok(0.0);
    }
    Ok((1.0 + rho) / green(kernel)?)
}

/// `F^a(β, ρ) = (1+ρ) F(β / (1+ρ))`: under the annealed law `X - Y` is a
/// walk with the same kernel and rate `1 + ρ`.
pub fn annealed_free_energy(kernel: &JumpKernel, beta: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(invalid("rho", "must be finite and >= 0"));
    }
    Ok((1.0 + rho) * pure_free_energy(kernel, beta / (1.0 + rho))?.b)
}

/// Limiting contact fraction `F'(β) = 1 / (1 - K̂'(b))`.
///
/// At `b = 0` it is zero below the critical point; at the critical point it
/// is finite only when the excursion law has a mean (`d >= 5`).
pub fn contact_fraction(kernel: &JumpKernel, beta: f64) -> Result<f64> {
    let sol = pure_free_energy(kernel, beta)?;
    if sol.b > 0.0 {
        return Ok(sol.contact_fraction);
    }
    let d = kernel.dim();
    if d <= 4 {
        return Err(PinError::NotApplicable(format!(
            "b = 0 in dimension {d}: excursion length has infinite mean"
        )));
    }
    let g = green(kernel)?;
    if (beta * g - 1.0).abs() > 1e-9 {
        return Ok(0.0);
    }
    let lp = laplace_p0(kernel, 0.0)?;
    Ok(g * g / lp.derivative.abs())
}

/// `K̂(b) = ∫ e^{-bt} K(t) dt = 1 + b - 1/p̂(b)`.
pub fn excursion_laplace(kernel: &JumpKernel, b: f64) -> Result<f64> {
    if b == 0.0 && kernel.dim() <= 2 {
        return Ok(1.0);
    }
    let p = laplace_p0_value(kernel, b)?;
    Ok(1.0 + b - 1.0 / p)
}

/// `F^a(β_c^a + δ, ρ)` at `points` log-spaced `δ` in `window`.
pub fn onset_profile(kernel: &JumpKernel, rho: f64, window: (f64, f64), points: usize) -> Result<Vec<OnsetPoint>> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("window", "need 0 < lo < hi"));
    }
    if points < 2 {
        return Err(invalid("points", "need at least 2"));
    }
    let bc = critical_point(kernel, rho)?;
    (0..points)
        .map(|i| {
            let delta = lo * (hi / lo).powf(i as f64 / (points - 1) as f64);
            let beta = bc + delta;
            Ok(OnsetPoint {
                delta,
                beta,
                free_energy: annealed_free_energy(kernel, beta, rho)?,
            })
        })
        .collect()
}

/// Least-squares slope of `log F` against `log(β - β_c)` over the window.
pub fn onset_exponent_fit(kernel: &JumpKernel, rho: f64, window: (f64, f64)) -> Result<ExponentFit> {
    const POINTS: usize = 12;
    const NEEDED: usize = 8;
    let profile = onset_profile(kernel, rho, window, POINTS)?;
    let xy: Vec<(f64, f64)> = profile
        .iter()
        .filter(|p| p.free_energy > 0.0 && p.free_energy.is_finite())
        .map(|p| (p.delta.ln(), p.free_energy.ln()))
        .collect();
    if xy.len() < NEEDED {
        return Err(PinError::InsufficientPoints {
            found: xy.len(),
            needed: NEEDED,
        });
    }
    let (slope, intercept, r2) = least_squares(&xy);
    Ok(ExponentFit {
        dim: kernel.dim(),
        window,
        exponent: slope,
        amplitude: intercept.exp(),
        r_squared: r2,
        points: xy.len(),
    })
}

/// `(slope, intercept, R²)` of the ordinary least-squares line.
pub fn least_squares(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Quadratic smoothing envelope `(3 d G² / ρ) (β - β_c)²₊`.
pub fn smoothing_envelope(dim: usize, green: f64, rho: f64, beta: f64, beta_c_ref: f64) -> Result<f64> {
    if dim < 3 {
        return Err(invalid("d", "envelope needs a transient walk (d >= 3)"));
    }
    if !(rho > 0.0) {
        return Err(invalid("rho", "envelope needs rho > 0"));
    }
    let gap = (beta - beta_c_ref).max(0.0);
    Ok(3.0 * dim as f64 * green * green / rho * gap * gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(d: usize) -> JumpKernel {
        JumpKernel::simple(d).unwrap()
    }

    #[test]
    fn one_dimensional_closed_form() {
        for &beta in &[0.1, 0.5, 1.0, 2.0, 7.5, 50.0] {
            let s = pure_free_energy(&k(1), beta).unwrap();
            let exact = (1.0f64 + beta * beta).sqrt() - 1.0;
            assert!((s.b - exact).abs() < 1e-10, "β={beta}: {} vs {exact}", s.b);
            let cf = beta / (1.0f64 + beta * beta).sqrt();
            assert!((s.contact_fraction - cf).abs() < 1e-9);
            assert_eq!(s.defect_mass, 0.0);
            assert!(s.residual < 1e-10);
        }
    }

    #[test]
    fn large_coupling_approaches_beta_minus_one() {
        let s = pure_free_energy(&k(1), 50.0).unwrap();
        assert!((s.b - 49.009_999_000_2).abs() < 1e-9);
        assert!((s.lambda - 0.009_999_000_2).abs() < 1e-9);
    }

    #[test]
    fn subcritical_three_dimensions() {
        let s = pure_free_energy(&k(3), 0.5).unwrap();
        assert_eq!(s.b, 0.0);
        assert!(s.defect_mass > 0.0 && s.defect_mass < 1.0);
        assert!(contact_fraction(&k(3), 0.5).is_err());
        assert_eq!(annealed_free_energy(&k(3), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_coupling() {
        let s = pure_free_energy(&k(1), -1.0).unwrap();
        assert_eq!(s.b, 0.0);
        assert_eq!(s.lambda, 2.0);
        assert!((s.defect_mass - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_points() {
        assert_eq!(critical_point(&k(1), 3.0).unwrap(), 0.0);
        let b0 = critical_point(&k(3), 0.0).unwrap();
        let b1 = critical_point(&k(3), 1.0).unwrap();
        assert!((b0 - 0.659_462_670_1).abs() < 1e-8, "{b0}");
        assert!((b1 - 2.0 * b0).abs() < 1e-15);
    }

    #[test]
    fn excursion_transform_values() {
        assert!((excursion_laplace(&k(1), 1.0).unwrap() - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert_eq!(excursion_laplace(&k(1), 0.0).unwrap(), 1.0);
        let g = green_function_tol(&k(3), 1e-12).unwrap().value;
        assert!((excursion_laplace(&k(3), 0.0).unwrap() - (1.0 - 1.0 / g)).abs() < 1e-11);
    }

    #[test]
    fn envelope_is_quadratic() {
        let e1 = smoothing_envelope(3, 1.516_386_059_151_978, 1.0, 1.1, 1.0).unwrap();
        assert!((e1 - 0.206_948_401_235_142).abs() < 1e-12, "{e1}");
        let e2 = smoothing_envelope(3, 1.5, 1.0, 1.2, 1.0).unwrap();
        let e3 = smoothing_envelope(3, 1.5, 1.0, 1.1, 1.0).unwrap();
        assert!((e2 / e3 - 4.0).abs() < 1e-12);
        assert_eq!(smoothing_envelope(3, 1.5, 1.0, 0.9, 1.0).unwrap(), 0.0);
        assert!(smoothing_envelope(2, 1.5, 1.0, 1.2, 1.0).is_err());
    }
}
