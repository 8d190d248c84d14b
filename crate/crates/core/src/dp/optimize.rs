//! One-dimensional maximization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Keeps the larger value; on a tie (relative `1e-12`) keeps the smaller argument.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Best {
    pub z: f64,
    pub v: f64,
}

impl Best {
    pub fn none() -> Self {
        Self {
            z: f64::NAN,
            v: f64::NEG_INFINITY,
        }
    }

    #[inline]
    pub fn offer(&mut self, z: f64, v: f64) {
        let tie = 1e-12 * self.v.abs().max(1.0);
        if v > self.v + tie || (v >= self.v - tie && z < self.z) || self.z.is_nan() {
            self.z = z;
            self.v = v;
        }
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`. Both
/// endpoints and `extra` points inside the interval are also evaluated.
pub(crate) fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, extra: &[f64]) -> Best {
    let mut best = Best::none();
    let fa = f(a);
    best.offer(a, fa);
    if b <= a {
        return best;
    }
    let fb = f(b);
    best.offer(b, fb);
    for &e in extra {
        if e > a && e < b {
            best.offer(e, f(e));
        }
    }
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    best.offer(c, fc);
    best.offer(d, fd);
    best
}
