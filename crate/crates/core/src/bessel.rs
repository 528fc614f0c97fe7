//! Exponentially scaled modified Bessel functions of integer order,
//! `e^{-x} I_n(x)` for `x >= 0`.
//!
//! The scaled form is what the lattice walk needs: the one-dimensional rate-`r`
//! walk has `P(X_t = n) = e^{-rt} I_n(rt)`. Small arguments use the power
//! series; arguments above [`SERIES_LIMIT`] use the Hankel asymptotic series
//! when it converges to full precision and Miller's backward recurrence
//! otherwise.

/// Largest argument evaluated with the power series.
pub const SERIES_LIMIT: f64 = 20.0;

const EPS: f64 = 1e-17;

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `e^{-x} I_0(x)`.
pub fn scaled_i0(x: f64) -> f64 {
    scaled_in(0, x)
}

/// `e^{-x} I_1(x)`.
pub fn scaled_i1(x: f64) -> f64 {
    scaled_in(1, x)
}

/// `e^{-x} I_n(x)` for integer order `n` (negative orders mirror positive ones).
pub fn scaled_in(n: i64, x: f64) -> f64 {
    let n = n.unsigned_abs();
    let x = x.abs();
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        return series(n, x);
    }
    match hankel(n, x) {
        Some(v) => v,
        None => miller(n, x)[n as usize],
    }
}

/// `e^{-x} I_k(x)` for every `k` in `0..=nmax`.
pub fn scaled_in_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let x = x.abs();
    if x == 0.0 {
        let mut out = vec![0.0; nmax + 1];
        out[0] = 1.0;
        return out;
    }
    miller(nmax as u64, x)
}

fn series(n: u64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = if n == 0 {
        (-x).exp()
    } else {
        (n as f64 * half.ln() - ln_factorial(n) - x).exp()
    };
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0u64;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term < EPS * sum {
            break;
        }
    }
    sum
}

/// Hankel expansion; `None` when the terms start growing before reaching full
/// precision (order too large for the argument).
fn hankel(n: u64, x: f64) -> Option<f64> {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200u64 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * x);
        if term == 0.0 {
            break;
        }
        let mag = term.abs();
        if mag > prev {
            return None;
        }
        sum += term;
        if mag < EPS * sum.abs() {
            return Some(sum / (2.0 * std::f64::consts::PI * x).sqrt());
        }
        prev = mag;
    }
    if term == 0.0 {
        return Some(sum / (2.0 * std::f64::consts::PI * x).sqrt());
    }
    None
}

/// Backward recurrence `I_{k-1} = I_{k+1} + (2k/x) I_k` from a start order far
/// enough above `nmax` that the arbitrary starting values have decayed, then
/// normalized against `I_0`.
fn miller(nmax: u64, x: f64) -> Vec<f64> {
    let start = nmax + 30 + (100.0 * (x + nmax as f64)).sqrt().ceil() as u64;
    let mut out = vec![0.0; nmax as usize + 1];
    let mut above = 0.0f64;
    let mut cur = 1e-280f64;
    let mut k = start;
    while k > 0 {
        let below = above + (2.0 * k as f64 / x) * cur;
        above = cur;
        cur = below;
        k -= 1;
        if k <= nmax {
            out[k as usize] = cur;
        }
        if cur > 1e250 {
            above *= 1e-250;
            cur *= 1e-250;
            for v in out.iter_mut().skip(k as usize) {
                *v *= 1e-250;
            }
        }
    }
    let norm = scaled_i0_direct(x) / cur;
    out.iter_mut().for_each(|v| *v *= norm);
    out
}

fn scaled_i0_direct(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        series(0, x)
    } else {
        hankel(0, x).expect("order-zero Hankel series converges for x > 20")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `e^{-x} I_n(x) = (1/pi) \int_0^pi e^{x(cos th - 1)} cos(n th) dth` by the
    /// trapezoidal rule, which converges geometrically for this periodic
    /// analytic integrand.
    fn trapezoid_oracle(n: i64, x: f64) -> f64 {
        let m = 4000usize.max((40.0 * x.sqrt()) as usize * 40);
        let h = std::f64::consts::PI / m as f64;
        let f = |th: f64| (x * (th.cos() - 1.0)).exp() * (n as f64 * th).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for j in 1..m {
            s += f(j as f64 * h);
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn known_values() {
        // e^{-1} I_0(1) and e^{-1} I_1(1)
        assert!((scaled_i0(1.0) - 0.465_759_607_593_640_4).abs() < 1e-15);
        assert!((scaled_i1(1.0) - 0.207_910_415_349_708_4).abs() < 1e-15);
        assert_eq!(scaled_in(3, 0.0), 0.0);
        assert_eq!(scaled_i0(0.0), 1.0);
    }

    #[test]
    fn matches_quadrature_across_switchover() {
        for &x in &[0.3, 1.0, 5.0, 19.5, 20.0, 20.5, 25.0, 60.0, 200.0] {
            for n in [0i64, 1, 2, 5, 12, 30] {
                let v = scaled_in(n, x);
                let o = trapezoid_oracle(n, x);
                assert!((v - o).abs() < 1e-12, "n={n} x={x}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn sequence_agrees_with_single_orders() {
        for &x in &[0.5, 7.0, 20.0, 35.0, 400.0] {
            let seq = scaled_in_sequence(40, x);
            for (n, v) in seq.iter().enumerate() {
                let single = scaled_in(n as i64, x);
                let scale = single.abs().max(1e-300);
                assert!(
                    ((v - single) / scale).abs() < 1e-10 || (v - single).abs() < 1e-300,
                    "n={n} x={x}: {v} vs {single}"
                );
            }
        }
    }

    #[test]
    fn lattice_probabilities_sum_to_one() {
        for &x in &[0.1, 3.0, 20.0, 150.0] {
            let seq = scaled_in_sequence(600, x);
            let total: f64 = seq[0] + 2.0 * seq[1..].iter().sum::<f64>();
            assert!((total - 1.0).abs() < 1e-13, "x={x}: {total}");
        }
    }
}
