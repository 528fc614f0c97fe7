//! Dense storage for functions on the box `{x in Z^d : |x|_inf <= R}` and the
//! shift/convolution primitives the solvers are built from.
//!
//! A shift by `y` is decomposed into runs that are contiguous along the last
//! axis, so applying a stencil is a sequence of slice `axpy`s.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxGrid {
    dim: usize,
    radius: usize,
    side: usize,
    strides: Vec<usize>,
    len: usize,
}

/// `dst[d..d+len] <- src[s..s+len]` for every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    dst: usize,
    src: usize,
    len: usize,
}

/// A weighted shift, precomputed as runs.
#[derive(Debug, Clone)]
pub struct Stencil {
    terms: Vec<(f64, Vec<Run>)>,
}

impl BoxGrid {
    pub fn new(dim: usize, radius: usize) -> Self {
        let side = 2 * radius + 1;
        let mut strides = vec![1usize; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        BoxGrid {
            dim,
            radius,
            side,
            strides,
            len: side.pow(dim as u32),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        let r = self.radius as i64;
        let mut idx = 0;
        for (c, s) in x.iter().zip(&self.strides) {
            if c.abs() > r {
                return None;
            }
            idx += (c + r) as usize * s;
        }
        Some(idx)
    }

    pub fn origin(&self) -> usize {
        self.index(&vec![0; self.dim]).expect("origin is always inside the box")
    }

    pub fn coords(&self, mut idx: usize) -> Vec<i64> {
        let r = self.radius as i64;
        let mut x = vec![0i64; self.dim];
        for (c, s) in x.iter_mut().zip(&self.strides) {
            *c = (idx / s) as i64 - r;
            idx %= s;
        }
        x
    }

    /// Runs realizing `dst(x) = src(x - y)` for all `x` with `x` and `x - y`
    /// both inside the box.
    fn runs(&self, y: &[i64]) -> Vec<Run> {
        let r = self.radius as i64;
        let d = self.dim;
        // per-axis valid destination range
        let mut lo = vec![0i64; d];
        let mut hi = vec![0i64; d];
        for i in 0..d {
            lo[i] = (-r).max(-r + y[i]);
            hi[i] = r.min(r + y[i]);
            if lo[i] > hi[i] {
                return Vec::new();
            }
        }
        let len = (hi[d - 1] - lo[d - 1] + 1) as usize;
        let mut runs = Vec::new();
        let mut x = lo.clone();
        loop {
            let mut dst = 0usize;
            let mut src = 0usize;
            for i in 0..d {
                dst += (x[i] + r) as usize * self.strides[i];
                src += (x[i] - y[i] + r) as usize * self.strides[i];
            }
            runs.push(Run { dst, src, len });
            // odometer over the leading d-1 axes
            let mut axis = d - 1;
            loop {
                if axis == 0 {
                    return runs;
                }
                axis -= 1;
                if x[axis] < hi[axis] {
                    x[axis] += 1;
                    break;
                }
                x[axis] = lo[axis];
            }
        }
    }

    /// Stencil `dst(x) += Σ w_j src(x - y_j)`.
    pub fn stencil<'a>(&self, terms: impl IntoIterator<Item = (&'a [i64], f64)>) -> Stencil {
        Stencil {
            terms: terms.into_iter().map(|(y, w)| (w, self.runs(y))).collect(),
        }
    }

    /// `dst(x) = src(x - y)`, zero where `x - y` leaves the box. Mass that
    /// would land outside is dropped.
    pub fn shift_into(&self, src: &[f64], y: &[i64], dst: &mut [f64]) {
        dst.iter_mut().for_each(|v| *v = 0.0);
        for run in self.runs(y) {
            dst[run.dst..run.dst + run.len].copy_from_slice(&src[run.src..run.src + run.len]);
        }
    }
}

impl Stencil {
    /// `dst += Σ w_j shift_{y_j}(src)`.
    pub fn apply_add(&self, src: &[f64], dst: &mut [f64]) {
        for (w, runs) in &self.terms {
            for run in runs {
                let d = &mut dst[run.dst..run.dst + run.len];
                let s = &src[run.src..run.src + run.len];
                for (a, b) in d.iter_mut().zip(s) {
                    *a += w * b;
                }
            }
        }
    }
}
