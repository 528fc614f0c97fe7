use pinlab_core::annealed::{contact_fraction, pure_free_energy};
use pinlab_core::disorder::DisorderPath;
use pinlab_core::fk::{pinned_log_partition, SolverOptions};
use pinlab_core::kernel::JumpKernel;
use pinlab_core::renewal::{pure_partition_mc, tilted_paths, tilted_stats, untilted_contact_mc};
use pinlab_core::walk::transition_probability;

fn simple(d: usize) -> JumpKernel {
    JumpKernel::simple(d).unwrap()
}

#[test]
fn wet_lengths_and_acceptance_follow_lambda() {
    let k = simple(1);
    let paths = tilted_paths(&k, 1.0, 200.0, 2000, 21).unwrap();
    let s = tilted_stats(&paths);
    let lambda = pure_free_energy(&k, 1.0).unwrap().lambda;
    assert!((s.mean_wet_length - 1.0 / lambda).abs() < 3.0 * s.wet_length_se);
    // each proposal is accepted with probability ∫ e^{-bt} K(t) dt = λ
    let n = s.proposals as f64;
    let rate = s.accepted as f64 / n;
    assert!(
        (rate - lambda).abs() < 3.0 * (lambda * (1.0 - lambda) / n).sqrt(),
        "{rate} vs {lambda}"
    );
    assert_eq!(s.truncated, 0);
}

#[test]
fn wet_and_dry_lengths_are_uncorrelated() {
    let paths = tilted_paths(&simple(1), 1.0, 200.0, 2000, 22).unwrap();
    let mut pairs = Vec::new();
    for p in &paths {
        // completed wet period i followed by completed dry period i
        let k = p.wet.len().saturating_sub(1);
        for i in 0..k {
            let wet = p.wet[i].1 - p.wet[i].0;
            let dry = p.wet[i + 1].0 - p.wet[i].1;
            pairs.push((wet, dry));
        }
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    // dry lengths are heavy tailed; rank them to keep the test about dependence
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].1.total_cmp(&pairs[b].1));
    let mut rank = vec![0.0; pairs.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64;
    }
    let my = rank.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, r) in pairs.iter().zip(&rank) {
        sxy += (p.0 - mx) * (r - my);
        sxx += (p.0 - mx).powi(2);
        syy += (r - my).powi(2);
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() < 3.0 / n.sqrt(), "corr {corr} over {n} pairs");
}

#[test]
fn contact_fraction_rises_with_coupling() {
    let k = simple(1);
    let mut prev = 0.0;
    for (i, beta) in [2.0, 4.0, 8.0].into_iter().enumerate() {
        let s = tilted_stats(&tilted_paths(&k, beta, 100.0, 500, 30 + i as u64).unwrap());
        let exact = contact_fraction(&k, beta).unwrap();
        assert!(s.mean_wet_fraction > prev);
        assert!(s.mean_wet_fraction < 1.0);
        assert!(
            (s.mean_wet_fraction - exact).abs() < 0.02,
            "β={beta}: {} vs {exact}",
            s.mean_wet_fraction
        );
        prev = s.mean_wet_fraction;
    }
}

#[test]
fn hit_fraction_settles_at_the_contact_fraction() {
    let k = simple(1);
    let n = 20_000;
    let s = tilted_stats(&tilted_paths(&k, 1.0, 50.0, n, 23).unwrap());
    let p = s.hits as f64 / n as f64;
    let c = contact_fraction(&k, 1.0).unwrap();
    assert!((p - c).abs() < 3.0 * (c * (1.0 - c) / n as f64).sqrt(), "{p} vs {c}");
}

#[test]
fn untilted_contact_is_the_return_probability() {
    let k = simple(1);
    let (est, se, truncated) = untilted_contact_mc(&k, 5.0, 50_000, 24).unwrap();
    let p = transition_probability(&k, 5.0, &[0]).unwrap();
    assert_eq!(truncated, 0);
    assert!((est - p).abs() < 3.0 * se, "{est} ± {se} vs {p}");
}

#[test]
fn renewal_estimate_agrees_with_solver_on_a_grid() {
    let o = SolverOptions::default();
    for (d, betas) in [(1usize, [0.5, 1.0, 2.0]), (3, [1.0, 1.5, 3.0])] {
        let k = simple(d);
        for (i, beta) in betas.into_iter().enumerate() {
            for (j, t) in [2.0, 6.0].into_iter().enumerate() {
                let mc = pure_partition_mc(&k, beta, t, 20_000, (100 * d + 10 * i + j) as u64).unwrap();
                let y = DisorderPath::constant(d, t);
                let fk = pinned_log_partition(&k, &y, beta, t, &o).unwrap().log_z;
                assert!(
                    (mc.log_z_est - fk).abs() < 3.0 * mc.log_z_se,
                    "d={d} β={beta} t={t}: {} ± {} vs {fk}",
                    mc.log_z_est,
                    mc.log_z_se
                );
            }
        }
    }
}
