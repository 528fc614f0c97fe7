//! Gauss–Legendre quadrature: fixed composite rules and a bisecting adaptive
//! driver.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

const ORDER: usize = 20;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let (nodes, weights) = legendre_rule(ORDER);
        let mut r = Rule {
            nodes: [0.0; ORDER],
            weights: [0.0; ORDER],
        };
        r.nodes.copy_from_slice(&nodes);
        r.weights.copy_from_slice(&weights);
        r
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev-like initial guess.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One 20-point panel on `[a, b]`.
pub fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let r = rule();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        s += w * f(c + h * x);
    }
    s * h
}

/// `panels` equal 20-point panels on `[a, b]`.
pub fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            panel(&mut f, lo, hi)
        })
        .sum()
}

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Panel budget of [`adaptive`].
pub const MAX_PANELS: usize = 200_000;

/// Globally adaptive bisection: the panel with the largest error estimate
/// (difference between its two halves and the whole) is split until the total
/// estimate falls under `abs_tol`, the remaining error is at rounding level,
/// or [`MAX_PANELS`] is reached.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut error = 0.0;
    let whole = panel(&mut f, a, b);
    let first = split(&mut f, a, b, whole);
    error += first.error;
    heap.push(first);
    let mut count = 1;
    while error > abs_tol && count < MAX_PANELS {
        let worst = heap.pop().expect("heap holds every live panel");
        if worst.error <= 1e-15 * worst.value.abs() || worst.b - worst.a < 1e-14 * (a.abs() + b.abs()) {
            // rounding noise dominates every remaining panel
            heap.push(worst);
            break;
        }
        error -= worst.error;
        let m = 0.5 * (worst.a + worst.b);
        for part in [
            split(&mut f, worst.a, m, worst.left),
            split(&mut f, m, worst.b, worst.right),
        ] {
            error += part.error;
            heap.push(part);
        }
        count += 1;
    }
    // re-sum to shed the drift of the running error total
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Estimate { value, error }
}

struct Piece {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    value: f64,
    error: f64,
}

fn split<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, whole: f64) -> Piece {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m);
    let right = panel(f, m, b);
    Piece {
        a,
        b,
        left,
        right,
        value: left + right,
        error: (left + right - whole).abs(),
    }
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}
