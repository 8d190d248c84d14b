//! Demand distributions and the functionals the policies need.
//!
//! Continuous demand is uniform; the zero-inflated Poisson and empirical
//! distributions are stored as sorted atoms. ZIP atoms are truncated once the
//! cumulative mass reaches `1 - ZIP_TAIL_MASS` and renormalized.

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Tail mass dropped when tabulating zero-inflated Poisson atoms.
pub const ZIP_TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DemandKind {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Equal mass on each integer in `lo..=hi`.
    IntegerUniform {
        lo: u32,
        hi: u32,
    },
    ZeroInflatedPoisson {
        pi: f64,
        lambda: f64,
    },
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
struct Atoms {
    values: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl Atoms {
    fn new(values: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cum.push(acc);
        }
        // Pin the last cumulative value so that quantile(1) hits the top atom.
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Self { values, probs, cum }
    }

    /// Number of atoms `<= t`.
    #[inline]
    fn count_le(&self, t: f64) -> usize {
        self.values.partition_point(|v| *v <= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    kind: DemandKind,
    atoms: Option<Atoms>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    /// Coefficient of variation `sd / mean`.
    pub fn cv(&self) -> Result<f64> {
        if self.mean > 0.0 {
            Ok(self.sd / self.mean)
        } else {
            Err(Error::InvalidArgument(
                "coefficient of variation undefined for zero mean".into(),
            ))
        }
    }
}

impl Demand {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDemand(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
        }
        if lo < 0.0 {
            return Err(Error::InvalidDemand(format!(
                "uniform support must be nonnegative, got lo = {lo}"
            )));
        }
        Ok(Self {
            kind: DemandKind::Uniform { lo, hi },
            atoms: None,
        })
    }

    pub fn integer_uniform(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidDemand(format!(
                "integer uniform needs lo <= hi, got {lo}..={hi}"
            )));
        }
        let values: Vec<f64> = (lo..=hi).map(f64::from).collect();
        let probs = vec![1.0 / values.len() as f64; values.len()];
        Ok(Self {
            kind: DemandKind::IntegerUniform { lo, hi },
            atoms: Some(Atoms::new(values, probs)),
        })
    }

    pub fn zip(pi: f64, lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&pi) {
            return Err(Error::InvalidDemand(format!("ZIP needs pi in [0, 1), got {pi}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidDemand(format!("ZIP needs lambda >= 0, got {lambda}")));
        }
        let mut values = vec![0.0];
        let mut probs = Vec::new();
        if lambda == 0.0 {
            probs.push(1.0);
        } else {
            let log_base = (1.0 - pi).ln() - lambda;
            probs.push(pi + log_base.exp());
            let mut log_p = log_base;
            let mut acc = probs[0];
            let mut k = 0usize;
            while acc < 1.0 - ZIP_TAIL_MASS || (k as f64) < lambda {
                k += 1;
                log_p += lambda.ln() - (k as f64).ln();
                let p = log_p.exp();
                values.push(k as f64);
                probs.push(p);
                acc += p;
                if k > 100_000 {
                    break;
                }
            }
            for p in &mut probs {
                *p /= acc;
            }
        }
        Ok(Self {
            kind: DemandKind::ZeroInflatedPoisson { pi, lambda },
            atoms: Some(Atoms::new(values, probs)),
        })
    }

    pub fn empirical(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidDemand(
                "empirical demand needs equally long, nonempty value and probability lists".into(),
            ));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidDemand(
                "empirical probabilities must be nonnegative".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDemand(
                "empirical values must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDemand(format!(
                "empirical probabilities sum to {total}, not 1"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vs: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut ps: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if vs.last() == Some(&v) {
                *ps.last_mut().unwrap() += p;
            } else {
                vs.push(v);
                ps.push(p);
            }
        }
        Ok(Self {
            kind: DemandKind::Empirical,
            atoms: Some(Atoms::new(vs, ps)),
        })
    }

    /// A point mass.
    pub fn constant(value: f64) -> Result<Self> {
        Self::empirical(&[value], &[1.0])
    }

    pub fn kind(&self) -> &DemandKind {
        &self.kind
    }

    pub fn is_discrete(&self) -> bool {
        self.atoms.is_some()
    }

    /// `(values, probabilities)` of a discrete distribution.
    pub fn atoms(&self) -> Option<(&[f64], &[f64])> {
        self.atoms.as_ref().map(|a| (a.values.as_slice(), a.probs.as_slice()))
    }

    /// Smallest and largest points of the (truncated) support.
    pub fn support(&self) -> (f64, f64) {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => (*lo, *hi),
            (_, Some(a)) => (a.values[0], *a.values.last().unwrap()),
            _ => unreachable!("discrete demand without atoms"),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            DemandKind::Uniform { lo, hi } => format!("U[{lo},{hi}]"),
            DemandKind::IntegerUniform { lo, hi } => format!("U{{{lo}..{hi}}}"),
            DemandKind::ZeroInflatedPoisson { pi, lambda } => format!("ZIP({pi},{lambda})"),
            DemandKind::Empirical => {
                let a = self.atoms.as_ref().unwrap();
                format!("Empirical({} atoms)", a.values.len())
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            (_, Some(a)) => match a.count_le(t) {
                0 => 0.0,
                k => a.cum[k - 1],
            },
            _ => unreachable!(),
        }
    }

    /// Smallest `t` with `F(t) >= u`; `u = 0` maps to the bottom of the support.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::ProbabilityOutOfRange(u));
        }
        Ok(self.quantile_unchecked(u))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => lo + u * (hi - lo),
            (_, Some(a)) => {
                let k = a.cum.partition_point(|c| *c < u);
                a.values[k.min(a.values.len() - 1)]
            }
            _ => unreachable!(),
        }
    }

    /// Expected leftover `T(x) = E[(x - D)^+]`.
    pub fn loss(&self, x: f64) -> f64 {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => {
                if x <= *lo {
                    0.0
                } else if x >= *hi {
                    x - 0.5 * (lo + hi)
                } else {
                    (x - lo) * (x - lo) / (2.0 * (hi - lo))
                }
            }
            (_, Some(a)) => {
                let k = a.values.partition_point(|v| *v < x);
                a.values[..k].iter().zip(&a.probs[..k]).map(|(v, p)| (x - v) * p).sum()
            }
            _ => unreachable!(),
        }
    }

    /// Partial expectation `E[D 1{D <= t}]`.
    pub fn partial_expectation(&self, t: f64) -> f64 {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => {
                let u = t.clamp(*lo, *hi);
                (u * u - lo * lo) / (2.0 * (hi - lo))
            }
            (_, Some(a)) => {
                let k = a.values.partition_point(|v| *v <= t);
                a.values[..k].iter().zip(&a.probs[..k]).map(|(v, p)| v * p).sum()
            }
            _ => unreachable!(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    /// Mean and standard deviation; ZIP uses the untruncated closed forms.
    pub fn moments(&self) -> Moments {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => Moments {
                mean: 0.5 * (lo + hi),
                sd: (hi - lo) / 12f64.sqrt(),
            },
            (DemandKind::ZeroInflatedPoisson { pi, lambda }, _) => Moments {
                mean: lambda * (1.0 - pi),
                sd: (lambda * (1.0 - pi) * (1.0 + lambda * pi)).sqrt(),
            },
            (_, Some(a)) => {
                let mean: f64 = a.values.iter().zip(&a.probs).map(|(v, p)| v * p).sum();
                let var: f64 = a
                    .values
                    .iter()
                    .zip(&a.probs)
                    .map(|(v, p)| (v - mean) * (v - mean) * p)
                    .sum();
                Moments { mean, sd: var.sqrt() }
            }
            _ => unreachable!(),
        }
    }

    /// Node/weight pairs for `E[g(D)]` with `g` smooth between consecutive kinks.
    /// Discrete distributions return their atoms.
    pub fn quadrature(&self, kinks: &[f64], order: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let rule = GaussLegendre::new(order);
        let mut buf = kinks.to_vec();
        self.for_each_node(&rule, &mut buf, |d, w| out.push((d, w)));
        out
    }

    /// `E[g(D)]` using [`Demand::quadrature`] nodes without allocating; `kinks`
    /// is used as scratch space and may be reordered.
    #[inline]
    pub fn expect<F: FnMut(f64) -> f64>(&self, rule: &GaussLegendre, kinks: &mut Vec<f64>, mut g: F) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(rule, kinks, |d, w| acc += w * g(d));
        acc
    }

    #[inline]
    fn for_each_node<F: FnMut(f64, f64)>(&self, rule: &GaussLegendre, kinks: &mut Vec<f64>, mut visit: F) {
        match (&self.kind, &self.atoms) {
            (DemandKind::Uniform { lo, hi }, _) => {
                let (lo, hi) = (*lo, *hi);
                kinks.retain(|k| *k > lo && *k < hi);
                kinks.sort_unstable_by(f64::total_cmp);
                let density = 1.0 / (hi - lo);
                let mut left = lo;
                for &k in kinks.iter().chain(std::iter::once(&hi)) {
                    if k - left > 1e-14 {
                        let half = 0.5 * (k - left);
                        let mid = 0.5 * (k + left);
                        for (t, w) in rule.nodes().iter().zip(rule.weights()) {
                            visit(mid + half * t, w * half * density);
                        }
                        left = k;
                    }
                }
            }
            (_, Some(a)) => {
                for (v, p) in a.values.iter().zip(&a.probs) {
                    visit(*v, *p);
                }
            }
            _ => unreachable!(),
        }
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_at(rng.random::<f64>())
    }

    /// Inverse transform of a given uniform draw in `[0, 1]`.
    #[inline]
    pub fn sample_at(&self, u: f64) -> f64 {
        self.quantile_unchecked(u.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn u020() -> Demand {
        Demand::uniform(0.0, 20.0).unwrap()
    }

    fn zip() -> Demand {
        Demand::zip(0.18, 10.0).unwrap()
    }

    /// Brute-force ZIP pmf straight from the textbook formula.
    fn zip_pmf(pi: f64, lambda: f64, k: u32) -> f64 {
        let mut fact = 1.0;
        for j in 1..=k {
            fact *= j as f64;
        }
        let poisson = (-lambda).exp() * lambda.powi(k as i32) / fact;
        if k == 0 {
            pi + (1.0 - pi) * poisson
        } else {
            (1.0 - pi) * poisson
        }
    }

    #[test]
    fn uniform_cdf() {
        assert_eq!(u020().cdf(10.0), 0.5);
        let d = Demand::uniform(6.0, 14.0).unwrap();
        assert_eq!(d.cdf(6.0), 0.0);
        assert_eq!(d.cdf(3.0), 0.0);
        assert_eq!(d.cdf(20.0), 1.0);
    }

    #[test]
    fn integer_uniform_moments() {
        let d = Demand::integer_uniform(0, 20).unwrap();
        let m = d.moments();
        assert!((m.mean - 10.0).abs() < 1e-12);
        // (n^2 - 1) / 12 with n = 21
        assert!((m.sd - (440.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!((d.cdf(6.0) - 7.0 / 21.0).abs() < 1e-12);
        assert_eq!(d.quantile(0.34).unwrap(), 7.0);
        assert_eq!(d.label(), "U{0..20}");
        assert!(Demand::integer_uniform(3, 2).is_err());
    }

    #[test]
    fn zip_atom_at_zero() {
        let want = 0.18 + 0.82 * (-10f64).exp();
        assert!((zip().cdf(0.0) - want).abs() < 1e-12);
        assert!((want - 0.1800372).abs() < 1e-7);
        assert_eq!(zip().cdf(-0.5), 0.0);
    }

    #[test]
    fn zip_matches_textbook_pmf() {
        let d = zip();
        let (values, probs) = d.atoms().unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (v, p) in values.iter().zip(probs).take(30) {
            assert!((p - zip_pmf(0.18, 10.0, *v as u32)).abs() < 1e-12);
        }
        // truncation leaves less than the configured mass beyond the last atom
        let last = *values.last().unwrap() as u32;
        let tail: f64 = (last + 1..last + 60).map(|k| zip_pmf(0.18, 10.0, k)).sum();
        assert!(tail < ZIP_TAIL_MASS);
    }

    #[test]
    fn uniform_quantiles() {
        let d = u020();
        assert!((d.quantile(0.607143).unwrap() - 12.14286).abs() < 1e-9);
        assert_eq!(d.quantile(0.0).unwrap(), 0.0);
        assert!(d.quantile(1.2).is_err());
        assert!(d.quantile(-0.1).is_err());
    }

    #[test]
    fn zip_quantile_at_atom() {
        let d = zip();
        assert_eq!(d.quantile(0.1).unwrap(), 0.0);
        // brute force: first k with cdf(k) >= u
        for &u in &[0.18, 0.2, 0.5, 0.9, 0.999] {
            let brute = (0..100).map(|k| k as f64).find(|k| d.cdf(*k) >= u).unwrap();
            assert_eq!(d.quantile(u).unwrap(), brute, "u = {u}");
        }
    }

    #[test]
    fn loss_values() {
        assert!((u020().loss(10.0) - 2.5).abs() < 1e-12);
        assert_eq!(u020().loss(0.0), 0.0);
        assert_eq!(zip().loss(0.0), 0.0);
        assert!((zip().loss(1.0) - zip().cdf(0.0)).abs() < 1e-15);
        assert!((u020().loss(25.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn moments_and_cv() {
        let m = zip().moments();
        assert!((m.mean - 8.2).abs() < 1e-12);
        assert!((m.cv().unwrap() - 0.58).abs() < 0.01);
        assert!((u020().moments().cv().unwrap() - 0.58).abs() < 0.01);
        let poisson = Demand::zip(0.0, 10.0).unwrap().moments();
        assert!((poisson.cv().unwrap() - 0.31).abs() < 0.01);
        let zero = Demand::zip(0.5, 0.0).unwrap().moments();
        assert!(zero.cv().is_err());
    }

    #[test]
    fn quadrature_weights_are_probabilities() {
        let q = u020().quadrature(&[10.0], 8);
        assert_eq!(q.len(), 16);
        let s: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zip_quadrature_is_atoms() {
        let d = zip();
        let q = d.quadrature(&[3.5], 4);
        let (values, _) = d.atoms().unwrap();
        assert_eq!(q.len(), values.len());
        let s: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_reproduces_loss() {
        let d = u020();
        let q = d.quadrature(&[10.0], 8);
        let via_nodes: f64 = q.iter().map(|(t, w)| w * (10.0 - t).max(0.0)).sum();
        assert!((via_nodes - 2.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_inverse_transform() {
        assert_eq!(u020().sample_at(0.5), 10.0);
        let nearly_all_zero = Demand::zip(1.0 - 1e-9, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zeros = (0..10_000).filter(|_| nearly_all_zero.sample(&mut rng) == 0.0).count();
        assert_eq!(zeros, 10_000);
    }

    #[test]
    fn zip_sample_mean() {
        let d = zip();
        let mut rng = ChaCha8Rng::seed_from_u64(20240611);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 8.2).abs() < 0.02, "{mean}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = zip();
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..50).map(|_| d.sample(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..50).map(|_| d.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_validation() {
        assert!(Demand::empirical(&[1.0, 2.0], &[0.5, 0.6]).is_err());
        assert!(Demand::empirical(&[1.0], &[-0.0 - 1.0]).is_err());
        assert!(Demand::uniform(5.0, 5.0).is_err());
        assert!(Demand::zip(1.0, 3.0).is_err());
        let d = Demand::empirical(&[3.0, 1.0, 3.0], &[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.atoms().unwrap().0, &[1.0, 3.0]);
        assert_eq!(d.quantile(0.5).unwrap(), 1.0);
        assert_eq!(d.quantile(0.51).unwrap(), 3.0);
    }

    fn any_demand() -> impl Strategy<Value = Demand> {
        prop_oneof![
            (0.0f64..10.0, 0.5f64..20.0).prop_map(|(lo, w)| Demand::uniform(lo, lo + w).unwrap()),
            (0.0f64..0.9, 0.0f64..25.0).prop_map(|(pi, l)| Demand::zip(pi, l).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn quantile_and_cdf_are_generalized_inverses(d in any_demand(), u in 0.0f64..=1.0, t in -1.0f64..40.0) {
            let q = d.quantile(u).unwrap();
            prop_assert!(d.cdf(q) >= u - 1e-12);
            // q is the smallest such point: anything strictly below falls short
            if u > 0.0 {
                prop_assert!(d.cdf(q - 1e-9) < u + 1e-12);
            }
            let back = d.quantile(d.cdf(t)).unwrap();
            prop_assert!(back <= t.max(d.support().0) + 1e-9);
        }

        #[test]
        fn loss_is_lipschitz_and_convex(d in any_demand(), a in 0.0f64..30.0, w1 in 0.0f64..5.0, w2 in 0.0f64..5.0) {
            let (x1, x2, x3) = (a, a + w1, a + w1 + w2);
            let (l1, l2, l3) = (d.loss(x1), d.loss(x2), d.loss(x3));
            prop_assert!(l2 - l1 <= x2 - x1 + 1e-12);
            prop_assert!(l2 >= l1 - 1e-12);
            // chord above the middle point
            if w1 + w2 > 1e-9 {
                let chord = l1 + (l3 - l1) * w1 / (w1 + w2);
                prop_assert!(l2 <= chord + 1e-9);
            }
        }

        #[test]
        fn quadrature_loss_matches_analytic(d in any_demand(), x in 0.0f64..30.0) {
            let rule = GaussLegendre::new(3);
            let mut kinks = vec![x];
            let q = d.expect(&rule, &mut kinks, |t| (x - t).max(0.0));
            prop_assert!((q - d.loss(x)).abs() < 1e-9);
        }
    }
}
