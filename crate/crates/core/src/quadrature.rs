//! Gauss–Legendre rules on `[-1, 1]`.

/// An `m`-point Gauss–Legendre rule; exact for polynomials of degree `2m-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let m = order.max(1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for k in 0..m.div_ceil(2) {
            // Chebyshev-like starting guess, then Newton on P_m.
            let mut t = (std::f64::consts::PI * (k as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, t);
                dp = d;
                let step = p / d;
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(m, t);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - t * t) * dp * dp);
            nodes[k] = -t;
            weights[k] = w;
            nodes[m - 1 - k] = t;
            weights[m - 1 - k] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(mid + half * t))
            .sum::<f64>()
            * half
    }
}

/// `(P_m(t), P_m'(t))` by the three-term recurrence.
fn legendre(m: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        for m in 1..=16 {
            let gl = GaussLegendre::new(m);
            let s: f64 = gl.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {m}: {s}");
        }
    }

    #[test]
    fn exact_for_degree_2m_minus_1() {
        for m in 1..=10 {
            let gl = GaussLegendre::new(m);
            let deg = 2 * m - 1;
            let got = gl.integrate(0.0, 3.0, |t| t.powi(deg as i32));
            let want = 3f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-10 * want, "order {m}");
        }
    }

    #[test]
    fn two_point_nodes() {
        let gl = GaussLegendre::new(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((gl.nodes()[0] + r).abs() < 1e-15);
        assert!((gl.nodes()[1] - r).abs() < 1e-15);
    }
}
