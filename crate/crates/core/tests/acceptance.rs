//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Every stochastic criterion uses the same seed, fixed before the suite was
//! first run. Tolerances and runtime budgets are the published ones.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pinlab_core::annealed::{
    annealed_free_energy, critical_point, onset_exponent_fit, onset_profile, pure_free_energy,
};
use pinlab_core::disorder::DisorderPath;
use pinlab_core::experiments::{
    annealed_identity_mc, lowtemp_report, quenched_fe_estimate, sandwich_report, smoothing_report,
    superadditivity_sweep, SOLVER_SLACK,
};
use pinlab_core::fk::{pinned_log_partition, SolverOptions};
use pinlab_core::kernel::JumpKernel;
use pinlab_core::renewal::{pure_partition_mc, tilted_paths, tilted_stats};
use pinlab_core::walk::{green_function, watson_green_simple3};
use pinlab_core::Result;

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn simple(d: usize) -> JumpKernel {
    JumpKernel::simple(d).expect("simple kernel")
}

fn closed_form() -> Result<Outcome> {
    let k = simple(1);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let beta = 0.1 + 9.9 * i as f64 / 49.0;
        let f = pure_free_energy(&k, beta)?.b;
        worst = worst.max((f - ((1.0 + beta * beta).sqrt() - 1.0)).abs());
    }
    Ok(Outcome {
        pass: worst < 1e-8,
        detail: format!("max |F - (sqrt(1+b^2)-1)| = {worst:.2e} over 50 betas (tol 1e-8)"),
    })
}

fn critical_d3() -> Result<Outcome> {
    let k = simple(3);
    let g = green_function(&k)?.value;
    let w = watson_green_simple3();
    let bc = critical_point(&k, 0.0)?;
    let pass = (g - w).abs() < 1e-6 && (g - 1.51639).abs() < 5e-6 && (bc - 1.0 / w).abs() < 1e-6;
    Ok(Outcome {
        pass,
        detail: format!(
            "G time-quadrature {g:.12}, Watson {w:.12}, diff {:.1e} (tol 1e-6), beta_c = {bc:.10} vs 1/G_Watson {:.10}",
            (g - w).abs(),
            1.0 / w
        ),
    })
}

fn onset() -> Result<Outcome> {
    let window = (1e-3, 1e-2);
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, target, tol) in [(1usize, 2.0, 0.02), (3, 2.0, 0.1), (5, 1.0, 0.1)] {
        let fit = onset_exponent_fit(&simple(d), 0.0, window)?;
        pass &= (fit.exponent - target).abs() <= tol;
        parts.push(format!("d{d} {:.4} ({target}±{tol})", fit.exponent));
    }
    let profile = onset_profile(&simple(4), 0.0, window, 12)?;
    let ratios: Vec<f64> = profile
        .iter()
        .map(|p| p.free_energy * p.delta.ln().abs() / p.delta)
        .collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    pass &= hi / lo - 1.0 < 0.2;
    parts.push(format!(
        "d4 F|log d|/d in [{lo:.3}, {hi:.3}], spread {:.1}% (<20%)",
        100.0 * (hi / lo - 1.0)
    ));
    Ok(Outcome {
        pass,
        detail: parts.join(", "),
    })
}

fn sandwich() -> Result<Outcome> {
    let opts = SolverOptions::default();
    let mut bad = 0;
    let mut cells = 0;
    let mut min_margin = f64::INFINITY;
    for d in [1usize, 3] {
        let rows = sandwich_report(&simple(d), &[1.0, 2.0, 5.0, 10.0, 20.0], &[1.0, 2.0, 5.0], &opts)?;
        for r in rows {
            cells += 1;
            if !r.ok {
                bad += 1;
            } else {
                min_margin = min_margin.min((r.log_z - r.lower).min(r.upper - r.log_z));
            }
        }
    }
    Ok(Outcome {
        pass: bad == 0,
        detail: format!(
            "{}/{cells} cells inside both bounds (slack 1e-6), smallest margin {min_margin:.3e}",
            cells - bad
        ),
    })
}

fn tilted_identity() -> Result<Outcome> {
    let k = simple(1);
    let (beta, t) = (1.0, 10.0);
    let mc = pure_partition_mc(&k, beta, t, 100_000, SEED)?;
    let fk = pinned_log_partition(&k, &DisorderPath::constant(1, t), beta, t, &SolverOptions::default())?.log_z;
    let z = (mc.log_z_est - fk) / mc.log_z_se;
    Ok(Outcome {
        pass: z.abs() < 3.0,
        detail: format!(
            "FK log Z {fk:.8}, renewal MC {:.6} ± {:.6}, z = {z:.2}",
            mc.log_z_est, mc.log_z_se
        ),
    })
}

fn contact() -> Result<Outcome> {
    let s = tilted_stats(&tilted_paths(&simple(1), 1.0, 200.0, 10_000, SEED)?);
    let target = std::f64::consts::FRAC_1_SQRT_2;
    let z = (s.mean_wet_fraction - target) / s.wet_fraction_se;
    Ok(Outcome {
        pass: z.abs() < 3.0,
        detail: format!(
            "wet fraction {:.6} ± {:.6} vs 1/sqrt2 = {target:.6}, z = {z:.2}",
            s.mean_wet_fraction, s.wet_fraction_se
        ),
    })
}

fn annealed_identity() -> Result<Outcome> {
    let a = annealed_identity_mc(&simple(1), 1.0, 1.0, 5.0, 10_000, SEED, &SolverOptions::default())?;
    Ok(Outcome {
        pass: a.z_score.abs() < 3.0 && a.failures == 0,
        detail: format!(
            "E_Y[Z] = {:.6} ± {:.6}, pure Z at rate 2 = {:.6}, z = {:.2}",
            a.mean_z, a.se_z, a.pure_z, a.z_score
        ),
    })
}

struct Shared {
    jensen: Vec<(String, f64, f64, f64)>,
}

fn low_temperature(shared: &mut Shared) -> Result<Outcome> {
    let k = simple(1);
    let r = lowtemp_report(&k, 1.0, &[10.0, 20.0, 40.0], 50.0, 20, SEED, &SolverOptions::default())?;
    for row in &r.rows {
        let fa = annealed_free_energy(&k, row.beta, 1.0)?;
        shared
            .jensen
            .push((format!("lowtemp b={}", row.beta), row.measured, row.se, fa));
    }
    let at20 = r.rows.iter().find(|row| row.beta == 20.0).expect("beta 20 row");
    let devs: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.deviation)).collect();
    let valid = r.rows.iter().all(|row| row.valid);
    let pass = valid && at20.deviation.abs() < 0.5 && r.deviation_shrinks() && r.bound_violations() == 0;
    Ok(Outcome {
        pass,
        detail: format!(
            "deviation at b=10,20,40: [{}] (|dev(20)| < 0.5: {}), shrinking: {}, lower-bound violations {}/{}",
            devs.join(", "),
            at20.deviation.abs() < 0.5,
            r.deviation_shrinks(),
            r.bound_violations(),
            r.rows.len() * r.n
        ),
    })
}

fn superadditivity_and_jensen(shared: &mut Shared) -> Result<Outcome> {
    let opts = SolverOptions::default();
    let k1 = simple(1);
    let splits = superadditivity_sweep(&k1, 1.0, 1.5, 10.0, 100, SEED, &opts)?;
    let worst = splits.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min);
    let split_ok = worst >= -SOLVER_SLACK && splits.len() == 100;

    let curve = quenched_fe_estimate(&k1, 1.0, 1.0, &[5.0, 10.0, 20.0], 20, SEED, &opts)?;
    let fa = annealed_free_energy(&k1, 1.0, 1.0)?;
    for p in &curve.points {
        shared.jensen.push((format!("curve d1 t={}", p.t), p.mean, p.se, fa));
    }
    let curve_ok = curve.points.iter().all(|p| p.valid) && curve.nondecreasing_within(3.0);

    let k3 = simple(3);
    let s = smoothing_report(
        &k3,
        1.0,
        &[1.5, 2.0, 2.5, 3.0, 4.0],
        8.0,
        &[2.0, 4.0, 8.0],
        8,
        SEED,
        &opts,
    )?;
    for r in &s.rows {
        shared
            .jensen
            .push((format!("smoothing d3 b={}", r.beta), r.quenched, r.se, r.annealed));
    }
    let smoothing_ok = s.rows.iter().all(|r| r.valid);
    let decay = s.contact_decreasing();
    let contact: Vec<String> = s.contact.iter().map(|c| format!("t={}: {:.4}", c.t, c.mean)).collect();

    let violations: Vec<&String> = shared
        .jensen
        .iter()
        .filter(|(_, m, se, fa)| !(m <= &(fa + 3.0 * se)))
        .map(|(name, ..)| name)
        .collect();
    let pass = split_ok && curve_ok && smoothing_ok && violations.is_empty() && decay == Some(true);
    Ok(Outcome {
        pass,
        detail: format!(
            "min split gap {worst:.3e} over {} splits; Jensen {}/{} estimates below annealed + 3se{}; \
             d1 curve monotone within 3se: {curve_ok}; d3 beta_hat = {:?}, L_t/t at beta_hat [{}] decreasing: {:?}",
            splits.len(),
            shared.jensen.len() - violations.len(),
            shared.jensen.len(),
            if violations.is_empty() {
                String::new()
            } else {
                format!(" (violations: {violations:?})")
            },
            s.beta_hat,
            contact.join(", "),
            decay
        ),
    })
}

fn main() -> ExitCode {
    let mut shared = Shared { jensen: Vec::new() };
    type Run<'a> = Box<dyn FnMut(&mut Shared) -> Result<Outcome> + 'a>;
    let criteria: Vec<(&str, Duration, Run)> = vec![
        ("d1 closed form", Duration::from_secs(1), Box::new(|_| closed_form())),
        (
            "d3 critical point",
            Duration::from_secs(10),
            Box::new(|_| critical_d3()),
        ),
        ("onset exponents", Duration::from_secs(60), Box::new(|_| onset())),
        ("sandwich", Duration::from_secs(120), Box::new(|_| sandwich())),
        (
            "tilted identity",
            Duration::from_secs(60),
            Box::new(|_| tilted_identity()),
        ),
        ("contact fraction", Duration::from_secs(60), Box::new(|_| contact())),
        (
            "annealed identity",
            Duration::from_secs(300),
            Box::new(|_| annealed_identity()),
        ),
        ("low temperature", Duration::from_secs(600), Box::new(low_temperature)),
        (
            "superadditivity and Jensen",
            Duration::from_secs(600),
            Box::new(superadditivity_and_jensen),
        ),
    ];
    let total = criteria.len();
    let mut passed = 0;
    for (name, budget, mut run) in criteria {
        let start = Instant::now();
        let result = run(&mut shared);
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (ok, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if ok {
            passed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.2} s, budget {} s{}]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
