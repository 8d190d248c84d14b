//! Closed-form solution of the one-period problem.

use crate::demand::Demand;
use crate::error::{Error, Result};
use crate::model::PeriodParams;

/// Critical fractiles for borrowing (`a`) and depositing (`b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractiles {
    pub a: f64,
    pub b: f64,
}

/// Order-up-to thresholds: `alpha` when borrowing, `beta` when depositing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub alpha: f64,
    pub beta: f64,
}

impl ThresholdPair {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }
}

/// `a = (p - c(1+l)) / (p - s)`, `b = (p - c(1+i)) / (p - s)`.
pub fn fractiles(params: &PeriodParams, salvage: f64) -> Result<Fractiles> {
    if salvage >= params.price {
        return Err(Error::SalvageAbovePrice {
            salvage,
            price: params.price,
        });
    }
    let denom = params.price - salvage;
    Ok(Fractiles {
        a: (params.price - params.cost * (1.0 + params.loan_rate)) / denom,
        b: (params.price - params.cost * (1.0 + params.deposit_rate)) / denom,
    })
}

/// Demand quantiles at the fractiles. Fractiles outside `[0, 1]` are clipped.
pub fn thresholds(fr: Fractiles, demand: &Demand) -> ThresholdPair {
    ThresholdPair {
        alpha: demand.quantile_unchecked(fr.a.clamp(0.0, 1.0)),
        beta: demand.quantile_unchecked(fr.b.clamp(0.0, 1.0)),
    }
}

/// The over/full/under-utilization rule. At `x + y = beta` the deposit branch applies.
pub fn optimal_order(x: f64, y: f64, th: ThresholdPair) -> f64 {
    let xi = x + y;
    if xi >= th.beta {
        (th.beta - x).max(0.0)
    } else if xi >= th.alpha {
        y.max(0.0)
    } else {
        (th.alpha - x).max(0.0)
    }
}

/// One period of the base model: price, cost, rates, salvage and demand.
#[derive(Debug, Clone, Copy)]
pub struct SinglePeriod<'a> {
    pub params: PeriodParams,
    pub salvage: f64,
    pub demand: &'a Demand,
}

impl<'a> SinglePeriod<'a> {
    pub fn new(params: PeriodParams, salvage: f64, demand: &'a Demand) -> Self {
        Self {
            params,
            salvage,
            demand,
        }
    }

    pub fn fractiles(&self) -> Result<Fractiles> {
        fractiles(&self.params, self.salvage)
    }

    pub fn thresholds(&self) -> Result<ThresholdPair> {
        Ok(thresholds(self.fractiles()?, self.demand))
    }

    /// Expected end-of-period net worth `G(q, x, y)` in currency.
    pub fn expected_value(&self, q: f64, x: f64, y: f64) -> f64 {
        let PeriodParams { price, cost, .. } = self.params;
        let z = x + q;
        price * z - (price - self.salvage) * self.demand.loss(z) + cost * (y - q) * self.params.interest_factor(y - q)
    }

    pub fn optimal_order(&self, x: f64, y: f64) -> Result<f64> {
        Ok(optimal_order(x, y, self.thresholds()?))
    }

    /// Optimal value by the four-branch closed form.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        let th = self.thresholds()?;
        Ok(self.value_with(x, y, th))
    }

    pub(crate) fn value_with(&self, x: f64, y: f64, th: ThresholdPair) -> f64 {
        let PeriodParams {
            price: p,
            cost: c,
            deposit_rate: i,
            loan_rate: l,
            ..
        } = self.params;
        let s = self.salvage;
        let t = |u: f64| self.demand.loss(u);
        let xi = x + y;
        let bank = |cash: f64| c * cash * if cash >= 0.0 { 1.0 + i } else { 1.0 + l };
        if xi >= th.beta {
            let z = x.max(th.beta);
            p * z - (p - s) * t(z) + bank(xi - z)
        } else if th.alpha <= xi {
            let z = x + y.max(0.0);
            p * z - (p - s) * t(z) + bank(y.min(0.0))
        } else {
            let z = x.max(th.alpha);
            p * z - (p - s) * t(z) + bank(xi - z)
        }
    }

    /// `V(0,0) = (p - s) E[D 1{D <= alpha}]`, plus the atom correction
    /// `alpha (p - c(1+l) - (p - s) F(alpha))` that vanishes for continuous demand.
    pub fn speculation_value(&self) -> Result<f64> {
        let th = self.thresholds()?;
        let PeriodParams {
            price: p,
            cost: c,
            loan_rate: l,
            ..
        } = self.params;
        let s = self.salvage;
        let alpha = th.alpha;
        let atom_term = if self.demand.is_discrete() {
            alpha * (p - c * (1.0 + l) - (p - s) * self.demand.cdf(alpha))
        } else {
            0.0
        };
        Ok((p - s) * self.demand.partial_expectation(alpha) + atom_term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PeriodParams {
        PeriodParams::new(2000.0, 1000.0, 500.0, 0.01, 0.15)
    }

    fn u020() -> Demand {
        Demand::uniform(0.0, 20.0).unwrap()
    }

    const ALPHA: f64 = 20.0 * 850.0 / 1400.0;
    const BETA: f64 = 20.0 * 990.0 / 1400.0;

    #[test]
    fn reference_fractiles() {
        let f = fractiles(&params(), 600.0).unwrap();
        assert!((f.a - 0.607143).abs() < 1e-6);
        assert!((f.b - 0.707143).abs() < 1e-6);
    }

    #[test]
    fn equal_rates_collapse() {
        let mut p = params();
        p.deposit_rate = p.loan_rate;
        let f = fractiles(&p, 600.0).unwrap();
        assert_eq!(f.a, f.b);
        let classical = fractiles(&PeriodParams::new(2000.0, 1000.0, 0.0, 0.0, 0.0), 600.0).unwrap();
        assert!((classical.a - 1000.0 / 1400.0).abs() < 1e-12);
        assert!((classical.a - 0.714286).abs() < 1e-6);
        assert_eq!(classical.a, classical.b);
    }

    #[test]
    fn salvage_at_price_is_rejected() {
        assert!(fractiles(&params(), 2000.0).is_err());
    }

    #[test]
    fn reference_thresholds() {
        let f = fractiles(&params(), 600.0).unwrap();
        let th = thresholds(f, &u020());
        assert!((th.alpha - 12.142857).abs() < 1e-6);
        assert!((th.beta - 14.142857).abs() < 1e-6);
        let th = thresholds(f, &Demand::uniform(6.0, 14.0).unwrap());
        assert!((th.alpha - 10.857143).abs() < 1e-6);
        assert!((th.beta - 11.657143).abs() < 1e-6);
        let th = thresholds(f, &Demand::constant(9.0).unwrap());
        assert_eq!((th.alpha, th.beta), (9.0, 9.0));
    }

    #[test]
    fn order_trichotomy() {
        let th = ThresholdPair::new(ALPHA, BETA);
        assert!((optimal_order(0.0, 0.0, th) - ALPHA).abs() < 1e-12);
        assert_eq!(optimal_order(0.0, 13.0, th), 13.0);
        assert_eq!(optimal_order(20.0, 5.0, th), 0.0);
        // boundary x + y = beta takes the deposit branch
        assert!((optimal_order(1.0, BETA - 1.0, th) - (BETA - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn expected_value_examples() {
        let d = u020();
        let sp = SinglePeriod::new(params(), 600.0, &d);
        assert_eq!(sp.expected_value(0.0, 0.0, 0.0), 0.0);
        // p*beta - 1400*beta^2/40 + 1000*(20-beta)*1.01
        let want = 2000.0 * BETA - 1400.0 * BETA * BETA / 40.0 + 1000.0 * (20.0 - BETA) * 1.01;
        assert!((sp.expected_value(BETA, 0.0, 20.0) - want).abs() < 1e-9);
        assert!((want - 27200.71).abs() < 0.01);
        let spec = 1400.0 * ALPHA * ALPHA / 40.0;
        assert!((sp.expected_value(ALPHA, 0.0, 0.0) - spec).abs() < 1e-9);
        assert!((spec - 5160.71).abs() < 0.01);
    }

    #[test]
    fn closed_form_branches() {
        let d = u020();
        let sp = SinglePeriod::new(params(), 600.0, &d);
        assert!((sp.value(0.0, 0.0).unwrap() - 5160.714).abs() < 1e-3);
        assert!((sp.value(0.0, 20.0).unwrap() - 27200.714).abs() < 1e-3);
        let at_beta = 2000.0 * BETA - 1400.0 * BETA * BETA / 40.0;
        assert!((sp.value(BETA, 0.0).unwrap() - at_beta).abs() < 1e-9);
        assert!((at_beta - 21285.0).abs() < 1e-6);
    }

    #[test]
    fn speculation_values() {
        let d = u020();
        let sp = SinglePeriod::new(params(), 600.0, &d);
        let v = sp.speculation_value().unwrap();
        assert!((v - 1400.0 * ALPHA * ALPHA / 40.0).abs() < 1e-9);
        assert!((v - sp.value(0.0, 0.0).unwrap()).abs() < 1e-9);

        let narrow = Demand::uniform(6.0, 14.0).unwrap();
        let sp = SinglePeriod::new(params(), 600.0, &narrow);
        let alpha = 6.0 + 8.0 * 850.0 / 1400.0;
        let want = 1400.0 * (alpha * alpha - 36.0) / 16.0;
        assert!((sp.speculation_value().unwrap() - want).abs() < 1e-9);
        assert!((want - 7164.29).abs() < 0.01);

        let nothing = Demand::constant(0.0).unwrap();
        let sp = SinglePeriod::new(params(), 600.0, &nothing);
        assert_eq!(sp.thresholds().unwrap().alpha, 0.0);
        assert_eq!(sp.speculation_value().unwrap(), 0.0);

        let zip = Demand::zip(0.18, 10.0).unwrap();
        let sp = SinglePeriod::new(params(), 600.0, &zip);
        let (a, b) = (sp.speculation_value().unwrap(), sp.value(0.0, 0.0).unwrap());
        assert!((a - b).abs() < 1e-9, "{a} {b} {:?}", sp.thresholds());
        assert!(sp.speculation_value().unwrap() > 0.0);
    }

    #[test]
    fn disposal_cost_turns_marginal_inventory_value_negative() {
        let d = u020();
        let sp = SinglePeriod::new(params(), -500.0, &d);
        let q = 0.0;
        // x' = F^{-1}(p/(p-s)) - q
        let x_turn = d.quantile(2000.0 / 2500.0).unwrap() - q;
        let g = |x: f64| sp.expected_value(q, x, 5.0);
        let h = 1e-4;
        assert!(g(x_turn - 1.0 + h) - g(x_turn - 1.0 - h) > 0.0);
        assert!(g(x_turn + 1.0 + h) - g(x_turn + 1.0 - h) < 0.0);
    }

    fn state() -> impl Strategy<Value = (f64, f64)> {
        (0.0f64..30.0, -30.0f64..40.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_form_is_value_of_optimal_order(x in 0.0..40.0f64, y in -40.0..40.0f64) {
            let d = u020();
            let sp = SinglePeriod::new(params(), 600.0, &d);
            let q = sp.optimal_order(x, y).unwrap();
            let want = sp.expected_value(q, x, y);
            prop_assert!((sp.value(x, y).unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0));
        }

        #[test]
        fn optimal_order_beats_grid_search((x, y) in state()) {
            let d = u020();
            let sp = SinglePeriod::new(params(), 600.0, &d);
            let q = sp.optimal_order(x, y).unwrap();
            let best = sp.expected_value(q, x, y);
            let grid_best = (0..=4000)
                .map(|k| sp.expected_value(k as f64 * 0.01, x, y))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(grid_best <= best + 1e-6);
            prop_assert!((sp.value(x, y).unwrap() - best).abs() < 1e-6);
        }

        #[test]
        fn concave_in_order((x, y) in state(), q1 in 0.0f64..30.0, w in 0.01f64..10.0) {
            let d = u020();
            let sp = SinglePeriod::new(params(), 600.0, &d);
            let (q2, q3) = (q1 + w, q1 + 2.0 * w);
            let mid = sp.expected_value(q2, x, y);
            let chord = 0.5 * (sp.expected_value(q1, x, y) + sp.expected_value(q3, x, y));
            prop_assert!(mid >= chord - 1e-7);
        }

        #[test]
        fn value_monotone((x, y) in state(), dx in 0.0f64..5.0, dy in 0.0f64..5.0) {
            let d = u020();
            let sp = SinglePeriod::new(params(), 600.0, &d);
            let v = sp.value(x, y).unwrap();
            prop_assert!(sp.value(x, y + dy).unwrap() >= v - 1e-9);
            prop_assert!(sp.value(x + dx, y).unwrap() >= v - 1e-9);
        }

        #[test]
        fn scaling_currency_scales_value((x, y) in state(), k in 0.1f64..10.0) {
            let d = u020();
            let base = SinglePeriod::new(params(), 600.0, &d);
            let p = params();
            let scaled = SinglePeriod::new(
                PeriodParams::new(p.price * k, p.cost * k, p.holding * k, p.deposit_rate, p.loan_rate),
                600.0 * k,
                &d,
            );
            let (a, b) = (base.thresholds().unwrap(), scaled.thresholds().unwrap());
            prop_assert!((a.alpha - b.alpha).abs() < 1e-9 && (a.beta - b.beta).abs() < 1e-9);
            prop_assert!((base.optimal_order(x, y).unwrap() - scaled.optimal_order(x, y).unwrap()).abs() < 1e-9);
            let (va, vb) = (base.value(x, y).unwrap(), scaled.value(x, y).unwrap());
            prop_assert!((va * k - vb).abs() < 1e-6 * (1.0 + vb.abs()));
        }
    }
}
