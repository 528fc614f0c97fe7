//! Runs one subcommand over its grid and collects tables, cell statuses and
//! invariant checks. Nothing here touches the disk.

use std::time::Instant;

use pinlab_core::annealed::{onset_exponent_fit, onset_profile};
use pinlab_core::experiments::{lowtemp_report, quenched_fe_estimate, sandwich_report, smoothing_report, SOLVER_SLACK};
use pinlab_core::renewal::McSummary;
use pinlab_core::rng::derive_seed;
use pinlab_core::walk::watson_green_simple3;
use pinlab_core::{
    annealed_free_energy, critical_point, green_function, pinned_log_partition, pure_free_energy, pure_partition_mc,
    DisorderPath, JumpKernel, SolverOptions,
};

use crate::config::{Command, RunConfig};
use crate::output::{CellStatus, Field, RunOutput, Table};

pub const GREEN_COLUMNS: &[&str] = &["run_id", "d", "G", "G_error", "beta_c", "G_watson"];

pub const PARTITION_COLUMNS: &[&str] = &[
    "run_id",
    "kind",
    "seed",
    "d",
    "rho",
    "beta",
    "t",
    "R",
    "logZ",
    "cert",
    "pinned",
    "F",
    "b",
    "lambda",
    "contact_fraction",
    "defect_mass",
    "residual",
];

pub const ONSET_FIT_COLUMNS: &[&str] = &[
    "run_id",
    "d",
    "rho",
    "beta_c",
    "window_lo",
    "window_hi",
    "exponent",
    "amplitude",
    "r_squared",
    "points",
];

pub const QUENCHED_COLUMNS: &[&str] = &[
    "run_id",
    "seed",
    "d",
    "rho",
    "beta",
    "t",
    "n",
    "n_ok",
    "F_hat",
    "se",
    "F_annealed",
    "jensen_ok",
    "valid",
    "errors",
];

pub const LOWTEMP_COLUMNS: &[&str] = &[
    "run_id",
    "seed",
    "d",
    "rho",
    "beta",
    "t",
    "n",
    "entropy",
    "F_hat",
    "se",
    "prediction",
    "deviation",
    "bound_mean",
    "min_slack",
    "bound_violations",
    "valid",
    "errors",
];

pub const SMOOTHING_COLUMNS: &[&str] = &[
    "run_id",
    "seed",
    "d",
    "rho",
    "beta",
    "t",
    "n",
    "F_hat",
    "se",
    "F_annealed",
    "jensen_ok",
    "G",
    "beta_hat",
    "envelope",
    "below_envelope",
    "valid",
    "errors",
];

pub const CONTACT_COLUMNS: &[&str] = &["run_id", "seed", "d", "rho", "beta", "t", "n_ok", "L_over_t", "se"];

pub const SANDWICH_COLUMNS: &[&str] = &[
    "run_id", "seed", "d", "rho", "beta", "t", "R", "logZ", "cert", "pinned", "lower", "upper", "ok", "error",
];

pub const RENEWAL_COLUMNS: &[&str] = &[
    "run_id",
    "seed",
    "d",
    "beta",
    "t",
    "n",
    "hits",
    "logZ_est",
    "logZ_se",
    "ci_lo",
    "ci_hi",
    "acc_rate",
    "truncated_bias_bound",
    "logZ_fk",
    "z",
];

/// Points in the annealed onset profile.
const ONSET_POINTS: usize = 12;

pub fn run_id(cfg: &RunConfig) -> String {
    let command = cfg.command.map_or("run", Command::name);
    format!("{command}-s{}", cfg.seed)
}

pub fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        max_radius: cfg.max_radius,
        series_tol: cfg.series_tol,
        truncation_tol: cfg.tolerance,
        ..SolverOptions::default()
    }
}

/// Times `f` and records it as one cell.
fn cell<T>(out: &mut RunOutput, name: String, f: impl FnOnce() -> pinlab_core::Result<T>) -> Option<T> {
    let start = Instant::now();
    let r = f();
    let seconds = start.elapsed().as_secs_f64();
    let (status, error, value) = match r {
        Ok(v) => ("ok", None, Some(v)),
        Err(e) => ("failed", Some(e.to_string()), None),
    };
    out.cells.push(CellStatus {
        cell: name,
        status,
        seconds,
        error,
    });
    value
}

/// Marks the last recorded cell failed, for cells whose computation returned
/// but whose result is flagged invalid.
fn fail_last(out: &mut RunOutput, error: String) {
    if let Some(c) = out.cells.last_mut() {
        c.status = "failed";
        c.error = Some(error);
    }
}

/// Runs `cfg.command`. The config must already be validated.
pub fn dispatch(cfg: &RunConfig) -> RunOutput {
    let mut out = RunOutput::default();
    let kernel = match cfg.kernel.build(cfg.dim) {
        Ok(k) => k,
        Err(e) => {
            let _ = cell::<()>(&mut out, "kernel".into(), || Err(e));
            return out;
        }
    };
    match cfg.command.expect("validated config has a command") {
        Command::Green => green(cfg, &kernel, &mut out),
        Command::Annealed => annealed(cfg, &kernel, &mut out),
        Command::Quenched => quenched(cfg, &kernel, &mut out),
        Command::Lowtemp => lowtemp(cfg, &kernel, &mut out),
        Command::Smoothing => smoothing(cfg, &kernel, &mut out),
        Command::Sandwich => sandwich(cfg, &kernel, &mut out),
        Command::RenewalMc => renewal_mc(cfg, &kernel, &mut out),
    }
    out
}

fn green(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let mut table = Table::new("green.csv", GREEN_COLUMNS);
    let r = cell(out, format!("d={}", cfg.dim), || {
        Ok((green_function(kernel)?, critical_point(kernel, 0.0)?))
    });
    if let Some((g, bc)) = r {
        let watson = (kernel.is_simple() && cfg.dim == 3).then(watson_green_simple3);
        table.push(vec![
            id.into(),
            cfg.dim.into(),
            g.value.into(),
            g.error.into(),
            bc.into(),
            watson.into(),
        ]);
        if let Some(w) = watson {
            out.invariant(
                "G agrees with the Watson integral",
                true,
                (g.value - w).abs() < 1e-6,
                format!("|G - G_watson| = {:.3e}", (g.value - w).abs()),
            );
        }
        out.invariant(
            "beta_c G = 1",
            true,
            (bc * g.value - 1.0).abs() < 1e-6,
            format!("beta_c G - 1 = {:.3e}", bc * g.value - 1.0),
        );
    }
    out.tables.push(table);
}

fn annealed(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let rho = cfg.rho;
    let mut table = Table::new("annealed.csv", PARTITION_COLUMNS);
    let mut curve = Vec::new();
    for &beta in &cfg.beta {
        let r = cell(out, format!("beta={beta}"), || {
            let sol = pure_free_energy(kernel, beta / (1.0 + rho))?;
            Ok(((1.0 + rho) * sol.b, sol))
        });
        let Some((f, sol)) = r else { continue };
        curve.push(f);
        table.push(vec![
            id.clone().into(),
            "annealed".into(),
            Field::Null,
            cfg.dim.into(),
            rho.into(),
            beta.into(),
            Field::Null,
            Field::Null,
            Field::Null,
            Field::Null,
            Field::Null,
            f.into(),
            sol.b.into(),
            sol.lambda.into(),
            sol.contact_fraction.into(),
            sol.defect_mass.into(),
            sol.residual.into(),
        ]);
    }
    let monotone = curve.windows(2).all(|w| w[1] >= w[0] - 1e-12) && curve.iter().all(|f| *f >= 0.0);
    out.invariant(
        "F^a nonnegative and nondecreasing in beta",
        true,
        monotone,
        format!("{} points", curve.len()),
    );

    let mut fits = Table::new("annealed_fit.csv", ONSET_FIT_COLUMNS);
    if cfg.dim == 2 {
        // F^a vanishes faster than any power at onset; nothing to fit
        out.cells.push(CellStatus {
            cell: "onset".into(),
            status: "skipped",
            seconds: 0.0,
            error: Some("no power-law onset in d = 2".into()),
        });
    } else if let Some((bc, profile, fit)) = cell(out, "onset".into(), || {
        Ok((
            critical_point(kernel, rho)?,
            onset_profile(kernel, rho, cfg.window, ONSET_POINTS)?,
            onset_exponent_fit(kernel, rho, cfg.window)?,
        ))
    }) {
        for p in profile {
            let mut row = vec![Field::Null; PARTITION_COLUMNS.len()];
            row[0] = id.clone().into();
            row[1] = "onset".into();
            row[3] = cfg.dim.into();
            row[4] = rho.into();
            row[5] = p.beta.into();
            row[11] = p.free_energy.into();
            table.push(row);
        }
        fits.push(vec![
            id.clone().into(),
            cfg.dim.into(),
            rho.into(),
            bc.into(),
            cfg.window.0.into(),
            cfg.window.1.into(),
            fit.exponent.into(),
            fit.amplitude.into(),
            fit.r_squared.into(),
            fit.points.into(),
        ]);
    }
    out.tables.push(table);
    out.tables.push(fits);
}

fn quenched(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let opts = solver_options(cfg);
    let mut table = Table::new("quenched.csv", QUENCHED_COLUMNS);
    let mut jensen = (0, 0);
    for &beta in &cfg.beta {
        let r = cell(out, format!("beta={beta}"), || {
            Ok((
                quenched_fe_estimate(kernel, beta, cfg.rho, &cfg.t, cfg.n, cfg.seed, &opts)?,
                annealed_free_energy(kernel, beta, cfg.rho)?,
            ))
        });
        let Some((curve, fa)) = r else { continue };
        let mut bad = Vec::new();
        for p in &curve.points {
            let ok = p.mean <= fa + 3.0 * p.se;
            if p.valid {
                jensen.0 += ok as usize;
                jensen.1 += 1;
            } else {
                bad.push(format!("t={}: {}", p.t, p.errors.join("; ")));
            }
            table.push(vec![
                id.clone().into(),
                cfg.seed.into(),
                cfg.dim.into(),
                cfg.rho.into(),
                beta.into(),
                p.t.into(),
                cfg.n.into(),
                p.n_ok.into(),
                p.mean.into(),
                p.se.into(),
                fa.into(),
                ok.into(),
                p.valid.into(),
                p.errors.join("; ").into(),
            ]);
        }
        if !bad.is_empty() {
            fail_last(out, bad.join(" | "));
        }
    }
    out.invariant(
        "quenched below annealed (3 se)",
        true,
        jensen.0 == jensen.1,
        format!("{}/{} valid cells", jensen.0, jensen.1),
    );
    out.tables.push(table);
}

fn lowtemp(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let t = cfg.t[0];
    let mut table = Table::new("lowtemp.csv", LOWTEMP_COLUMNS);
    let r = cell(out, format!("t={t}"), || {
        lowtemp_report(kernel, cfg.rho, &cfg.beta, t, cfg.n, cfg.seed, &solver_options(cfg))
    });
    if let Some(rep) = r {
        for row in &rep.rows {
            table.push(vec![
                id.clone().into(),
                cfg.seed.into(),
                cfg.dim.into(),
                cfg.rho.into(),
                row.beta.into(),
                t.into(),
                cfg.n.into(),
                rep.entropy.into(),
                row.measured.into(),
                row.se.into(),
                row.prediction.into(),
                row.deviation.into(),
                row.bound_mean.into(),
                row.min_slack.into(),
                row.bound_violations.into(),
                row.valid.into(),
                row.errors.join("; ").into(),
            ]);
        }
        let invalid: Vec<String> = rep
            .rows
            .iter()
            .filter(|r| !r.valid)
            .map(|r| format!("beta={}: {}", r.beta, r.errors.join("; ")))
            .collect();
        if !invalid.is_empty() {
            fail_last(out, invalid.join(" | "));
        }
        out.invariant(
            "per-path lower bound",
            true,
            rep.bound_violations() == 0,
            format!("{} violations", rep.bound_violations()),
        );
        out.invariant(
            "deviation shrinks with beta",
            false,
            rep.deviation_shrinks(),
            format!("{:?}", rep.rows.iter().map(|r| r.deviation).collect::<Vec<_>>()),
        );
    }
    out.tables.push(table);
}

fn smoothing(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let t = cfg.t[0];
    let mut table = Table::new("smoothing.csv", SMOOTHING_COLUMNS);
    let mut contact = Table::new("smoothing_contact.csv", CONTACT_COLUMNS);
    let r = cell(out, format!("t={t}"), || {
        smoothing_report(
            kernel,
            cfg.rho,
            &cfg.beta,
            t,
            &cfg.contact_t,
            cfg.n,
            cfg.seed,
            &solver_options(cfg),
        )
    });
    if let Some(rep) = r {
        for row in &rep.rows {
            table.push(vec![
                id.clone().into(),
                cfg.seed.into(),
                cfg.dim.into(),
                cfg.rho.into(),
                row.beta.into(),
                t.into(),
                cfg.n.into(),
                row.quenched.into(),
                row.se.into(),
                row.annealed.into(),
                row.jensen_ok.into(),
                rep.green.into(),
                rep.beta_hat.into(),
                row.envelope.into(),
                row.below_envelope.map_or(Field::Null, Field::Bool),
                row.valid.into(),
                row.errors.join("; ").into(),
            ]);
        }
        for c in &rep.contact {
            contact.push(vec![
                id.clone().into(),
                cfg.seed.into(),
                cfg.dim.into(),
                cfg.rho.into(),
                rep.beta_hat.into(),
                c.t.into(),
                c.n_ok.into(),
                c.mean.into(),
                c.se.into(),
            ]);
        }
        let invalid: Vec<String> = rep
            .rows
            .iter()
            .filter(|r| !r.valid)
            .map(|r| format!("beta={}: {}", r.beta, r.errors.join("; ")))
            .collect();
        if !invalid.is_empty() {
            fail_last(out, invalid.join(" | "));
        }
        out.invariant(
            "quenched below annealed (3 se)",
            true,
            rep.jensen_holds(),
            String::new(),
        );
        if let Some(dec) = rep.contact_decreasing() {
            out.invariant(
                "contact density decreasing in t",
                false,
                dec,
                format!("beta_hat = {:?}", rep.beta_hat),
            );
        }
    }
    out.tables.push(table);
    out.tables.push(contact);
}

fn sandwich(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let mut table = Table::new("sandwich.csv", SANDWICH_COLUMNS);
    let opts = solver_options(cfg);
    let mut inside = (0, 0);
    for &beta in &cfg.beta {
        // one cell per β row so timings stay readable
        let Some(rows) = cell(out, format!("beta={beta}"), || {
            sandwich_report(kernel, &[beta], &cfg.t, &opts)
        }) else {
            continue;
        };
        let mut errors = Vec::new();
        for r in &rows {
            inside.1 += 1;
            match &r.error {
                Some(e) => errors.push(format!("t={}: {e}", r.t)),
                None => inside.0 += r.ok as usize,
            }
            let solved = r.error.is_none();
            table.push(vec![
                id.clone().into(),
                Field::Null,
                cfg.dim.into(),
                0.0.into(),
                r.beta.into(),
                r.t.into(),
                if solved { r.radius.into() } else { Field::Null },
                r.log_z.into(),
                if solved { r.certificate.into() } else { Field::Null },
                false.into(),
                r.lower.into(),
                r.upper.into(),
                r.ok.into(),
                r.error.clone().unwrap_or_default().into(),
            ]);
        }
        if !errors.is_empty() {
            fail_last(out, errors.join(" | "));
        }
    }
    out.invariant(
        "(beta-1)t <= log Z <= (beta-1+1/beta)t + log(1+1/beta)",
        true,
        inside.0 == inside.1,
        format!("{}/{} cells inside, slack {SOLVER_SLACK:e}", inside.0, inside.1),
    );
    out.tables.push(table);
}

fn renewal_mc(cfg: &RunConfig, kernel: &JumpKernel, out: &mut RunOutput) {
    let id = run_id(cfg);
    let opts = solver_options(cfg);
    let mut table = Table::new("renewal_mc.csv", RENEWAL_COLUMNS);
    let mut summaries: Vec<McSummary> = Vec::new();
    let mut worst: f64 = 0.0;
    let mut index = 0u64;
    for &beta in &cfg.beta {
        for &t in &cfg.t {
            let seed = derive_seed(cfg.seed, index);
            index += 1;
            let r = cell(out, format!("beta={beta} t={t}"), || {
                let mc = pure_partition_mc(kernel, beta, t, cfg.n, seed)?;
                let y = DisorderPath::constant(cfg.dim, t);
                let fk = pinned_log_partition(kernel, &y, beta, t, &opts)?;
                Ok((mc, fk.log_z))
            });
            let Some((mc, fk)) = r else { continue };
            let z = (mc.log_z_est - fk) / mc.log_z_se;
            if z.is_finite() {
                worst = worst.max(z.abs());
            }
            table.push(vec![
                id.clone().into(),
                seed.into(),
                cfg.dim.into(),
                beta.into(),
                t.into(),
                mc.n.into(),
                mc.hits.into(),
                mc.log_z_est.into(),
                mc.log_z_se.into(),
                mc.ci_lo.into(),
                mc.ci_hi.into(),
                mc.acc_rate.into(),
                mc.truncated_bias_bound.into(),
                fk.into(),
                z.into(),
            ]);
            summaries.push(mc);
        }
    }
    out.invariant(
        "renewal estimate within 3 se of the solver",
        false,
        worst < 3.0,
        format!("max |z| = {worst:.3}"),
    );
    out.tables.push(table);
    out.json.push((
        "renewal_mc.json".into(),
        serde_json::to_value(&summaries).expect("summaries serialize"),
    ));
}
