//! Tiered loan and deposit rates.
//!
//! Tiers are marginal: a loan of `x` pays `1 + l^(m)` only on the part of `x`
//! that falls in `(x^(m-1), x^(m)]`, and likewise for deposits. This keeps the
//! bank flow continuous in the balance.

use crate::demand::Demand;
use crate::error::{Error, Result};
use crate::model::{BankPiece, PeriodParams};

/// One tier: the rate applies to the balance between the previous tier's limit
/// and `limit` (currency). The last tier must have `limit = f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tier {
    pub limit: f64,
    pub rate: f64,
}

impl Tier {
    pub fn new(limit: f64, rate: f64) -> Self {
        Self { limit, rate }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    loan: Vec<Tier>,
    deposit: Vec<Tier>,
}

impl RateSchedule {
    pub fn new(loan: Vec<Tier>, deposit: Vec<Tier>) -> Result<Self> {
        let s = Self { loan, deposit };
        s.validate()?;
        Ok(s)
    }

    /// One tier on each side.
    pub fn flat(deposit_rate: f64, loan_rate: f64) -> Self {
        Self {
            loan: vec![Tier::new(f64::INFINITY, loan_rate)],
            deposit: vec![Tier::new(f64::INFINITY, deposit_rate)],
        }
    }

    pub fn loan(&self) -> &[Tier] {
        &self.loan
    }

    pub fn deposit(&self) -> &[Tier] {
        &self.deposit
    }

    pub fn validate(&self) -> Result<()> {
        for (side, tiers) in [("loan", &self.loan), ("deposit", &self.deposit)] {
            if tiers.is_empty() {
                return Err(Error::InvalidSchedule(format!("{side} side has no tiers")));
            }
            let mut prev = 0.0;
            for t in tiers {
                if !(t.limit > prev) {
                    return Err(Error::InvalidSchedule(format!(
                        "{side} limits must be positive and strictly increasing"
                    )));
                }
                prev = t.limit;
            }
            if prev != f64::INFINITY {
                return Err(Error::InvalidSchedule(format!("last {side} tier must be unbounded")));
            }
        }
        if self.loan.windows(2).any(|w| !(w[0].rate < w[1].rate)) {
            return Err(Error::InvalidSchedule("loan rates must be strictly increasing".into()));
        }
        if self.deposit.windows(2).any(|w| !(w[0].rate <= w[1].rate)) {
            return Err(Error::InvalidSchedule("deposit rates must be nondecreasing".into()));
        }
        if self.deposit.iter().any(|t| !(t.rate >= 0.0)) {
            return Err(Error::InvalidSchedule("deposit rates must be >= 0".into()));
        }
        let top_deposit = self.deposit.last().map(|t| t.rate).unwrap_or(0.0);
        if !(top_deposit < self.loan[0].rate) {
            return Err(Error::InvalidSchedule(format!(
                "highest deposit rate {top_deposit} must be below the first loan rate {}",
                self.loan[0].rate
            )));
        }
        Ok(())
    }

    /// Currency returned by the bank for a balance (negative = debt repaid).
    pub fn settle(&self, balance: f64) -> f64 {
        let (tiers, amount, sign) = if balance >= 0.0 {
            (&self.deposit, balance, 1.0)
        } else {
            (&self.loan, -balance, -1.0)
        };
        let mut prev = 0.0;
        let mut total = 0.0;
        for t in tiers {
            let part = (amount.min(t.limit) - prev).max(0.0);
            total += part * (1.0 + t.rate);
            if amount <= t.limit {
                break;
            }
            prev = t.limit;
        }
        sign * total
    }

    /// Order-up-to ranges of constant marginal rate, for unit cost `cost` and net worth `xi`.
    pub fn pieces(&self, cost: f64, xi: f64) -> Vec<BankPiece> {
        if cost <= 0.0 {
            return vec![BankPiece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                factor: 1.0,
                loan: false,
            }];
        }
        let mut out = Vec::with_capacity(self.deposit.len() + self.loan.len());
        let mut prev = 0.0;
        for t in self.deposit.iter() {
            out.push(BankPiece {
                lo: xi - t.limit / cost,
                hi: xi - prev / cost,
                factor: 1.0 + t.rate,
                loan: false,
            });
            prev = t.limit;
        }
        out.reverse();
        let mut prev = 0.0;
        for t in &self.loan {
            out.push(BankPiece {
                lo: xi + prev / cost,
                hi: xi + t.limit / cost,
                factor: 1.0 + t.rate,
                loan: true,
            });
            prev = t.limit;
        }
        out
    }
}

/// Thresholds for each tier: `alpha[m]` for loan tier `m+1`, `beta[k]` for deposit tier `k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Threshold at the highest deposit rate.
    pub beta_bar: f64,
}

fn tier_threshold(price: f64, cost: f64, rate: f64, salvage: f64, demand: &Demand) -> f64 {
    let fr = (price - cost * (1.0 + rate)) / (price - salvage);
    if fr <= 0.0 {
        0.0
    } else {
        demand.quantile_unchecked(fr.min(1.0))
    }
}

pub fn piecewise_thresholds(params: &PeriodParams, salvage: f64, schedule: &RateSchedule, demand: &Demand) -> Ladder {
    let th = |rate| tier_threshold(params.price, params.cost, rate, salvage, demand);
    let top = schedule
        .deposit
        .iter()
        .map(|t| t.rate)
        .fold(f64::NEG_INFINITY, f64::max);
    Ladder {
        alpha: schedule.loan.iter().map(|t| th(t.rate)).collect(),
        beta: schedule.deposit.iter().map(|t| th(t.rate)).collect(),
        beta_bar: th(top),
    }
}

/// Single-period problem with a tiered bank.
#[derive(Debug, Clone)]
pub struct PiecewiseProblem<'a> {
    pub params: PeriodParams,
    pub salvage: f64,
    pub schedule: RateSchedule,
    pub demand: &'a Demand,
}

impl<'a> PiecewiseProblem<'a> {
    pub fn new(params: PeriodParams, salvage: f64, schedule: RateSchedule, demand: &'a Demand) -> Self {
        Self {
            params,
            salvage,
            schedule,
            demand,
        }
    }

    pub fn ladder(&self) -> Ladder {
        piecewise_thresholds(&self.params, self.salvage, &self.schedule, self.demand)
    }

    pub fn expected_value(&self, q: f64, x: f64, y: f64) -> f64 {
        let PeriodParams { price, cost, .. } = self.params;
        let z = x + q;
        price * z - (price - self.salvage) * self.demand.loss(z) + self.schedule.settle(cost * (y - q))
    }

    /// Best order among the tier thresholds projected onto their own tiers.
    pub fn optimal_order(&self, x: f64, y: f64) -> f64 {
        piecewise_optimal_order(x, y, self)
    }
}

/// Within a tier the objective is concave with its maximizer at the tier's
/// threshold, so the optimum is the best projected tier threshold. Ties go to
/// the smaller order.
pub fn piecewise_optimal_order(x: f64, y: f64, problem: &PiecewiseProblem<'_>) -> f64 {
    let ladder = problem.ladder();
    let xi = x + y;
    let pieces = problem.schedule.pieces(problem.params.cost, xi);
    let (mut deposit_k, mut loan_m) = (problem.schedule.deposit.len(), 0usize);
    let mut best_q = 0.0;
    let mut best_v = problem.expected_value(0.0, x, y);
    for piece in pieces {
        let target = if piece.loan {
            loan_m += 1;
            ladder.alpha[loan_m - 1]
        } else {
            deposit_k -= 1;
            ladder.beta[deposit_k]
        };
        let lo = piece.lo.max(x);
        if lo > piece.hi {
            continue;
        }
        let q = target.clamp(lo, piece.hi) - x;
        let v = problem.expected_value(q, x, y);
        if v > best_v + 1e-9 * best_v.abs().max(1.0) || (v >= best_v - 1e-9 * best_v.abs().max(1.0) && q < best_q) {
            best_q = q;
            best_v = v;
        }
    }
    best_q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_period::SinglePeriod;
    use proptest::prelude::*;

    fn params() -> PeriodParams {
        PeriodParams::new(2000.0, 1000.0, 500.0, 0.01, 0.15)
    }

    fn two_loan_tiers() -> RateSchedule {
        RateSchedule::new(
            vec![Tier::new(5000.0, 0.15), Tier::new(f64::INFINITY, 0.30)],
            vec![Tier::new(f64::INFINITY, 0.01)],
        )
        .unwrap()
    }

    #[test]
    fn settle_is_marginal() {
        let s = two_loan_tiers();
        assert!((s.settle(-4000.0) + 4600.0).abs() < 1e-9);
        assert!((s.settle(-8000.0) + (5750.0 + 3900.0)).abs() < 1e-9);
        assert!((s.settle(1000.0) - 1010.0).abs() < 1e-9);
        assert_eq!(s.settle(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_schedules() {
        let bad_rates = RateSchedule::new(
            vec![Tier::new(10.0, 0.2), Tier::new(f64::INFINITY, 0.1)],
            vec![Tier::new(f64::INFINITY, 0.01)],
        );
        assert!(bad_rates.is_err());
        let deposit_above_loan = RateSchedule::new(
            vec![Tier::new(f64::INFINITY, 0.05)],
            vec![Tier::new(f64::INFINITY, 0.06)],
        );
        assert!(deposit_above_loan.is_err());
        let bounded = RateSchedule::new(vec![Tier::new(10.0, 0.1)], vec![Tier::new(f64::INFINITY, 0.0)]);
        assert!(bounded.is_err());
    }

    #[test]
    fn two_tier_ladder() {
        let d = Demand::uniform(0.0, 20.0).unwrap();
        let ladder = piecewise_thresholds(&params(), 600.0, &two_loan_tiers(), &d);
        assert!((ladder.alpha[0] - 12.142857).abs() < 1e-6);
        assert!((ladder.alpha[1] - 10.0).abs() < 1e-12);
        assert!((ladder.beta[0] - 14.142857).abs() < 1e-6);
    }

    #[test]
    fn unprofitable_tier_clips_to_zero() {
        let d = Demand::uniform(6.0, 14.0).unwrap();
        let s = RateSchedule::new(
            vec![Tier::new(1000.0, 0.15), Tier::new(f64::INFINITY, 1.5)],
            vec![Tier::new(f64::INFINITY, 0.01)],
        )
        .unwrap();
        let ladder = piecewise_thresholds(&params(), 600.0, &s, &d);
        assert_eq!(ladder.alpha[1], 0.0);
    }

    #[test]
    fn single_segment_matches_base_rule() {
        let d = Demand::uniform(0.0, 20.0).unwrap();
        let pw = PiecewiseProblem::new(params(), 600.0, RateSchedule::flat(0.01, 0.15), &d);
        let sp = SinglePeriod::new(params(), 600.0, &d);
        for x in [0.0, 3.0, 12.0, 15.0, 25.0] {
            for y in [-30.0, -5.0, 0.0, 4.0, 12.5, 40.0] {
                assert_eq!(pw.optimal_order(x, y), sp.optimal_order(x, y).unwrap(), "({x}, {y})");
            }
        }
    }

    #[test]
    fn richest_tier_orders_to_top_beta() {
        let d = Demand::uniform(0.0, 20.0).unwrap();
        let s = RateSchedule::new(
            vec![Tier::new(f64::INFINITY, 0.15)],
            vec![Tier::new(20000.0, 0.01), Tier::new(f64::INFINITY, 0.05)],
        )
        .unwrap();
        let pw = PiecewiseProblem::new(params(), 600.0, s, &d);
        let ladder = pw.ladder();
        // surplus over beta^(1) stays inside the first deposit tier
        let y = ladder.beta[0] + 5.0;
        assert!((pw.optimal_order(0.0, y) - ladder.beta[0]).abs() < 1e-12);
    }

    fn brute_force(pw: &PiecewiseProblem<'_>, x: f64, y: f64) -> f64 {
        (0..=40000)
            .map(|k| k as f64 * 0.001)
            .map(|q| pw.expected_value(q, x, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn between_loan_tiers_matches_brute_force() {
        let d = Demand::uniform(0.0, 20.0).unwrap();
        let pw = PiecewiseProblem::new(params(), 600.0, two_loan_tiers(), &d);
        // xi between alpha^(2) = 10 and alpha^(1)
        let (x, y) = (0.0, 11.0);
        let q = pw.optimal_order(x, y);
        assert!(pw.expected_value(q, x, y) >= brute_force(&pw, x, y) - 1e-6);
    }

    fn schedule() -> impl Strategy<Value = RateSchedule> {
        (
            proptest::collection::vec((1000.0f64..20000.0, 0.0f64..0.3), 1..4),
            proptest::collection::vec((1000.0f64..20000.0, 0.0f64..0.05), 1..4),
        )
            .prop_map(|(loan, dep)| {
                let build = |raw: Vec<(f64, f64)>, base: f64| {
                    let mut lim = 0.0;
                    let mut rate = base;
                    let n = raw.len();
                    raw.into_iter()
                        .enumerate()
                        .map(|(k, (w, r))| {
                            lim += w;
                            rate += r + 1e-3;
                            Tier::new(if k + 1 == n { f64::INFINITY } else { lim }, rate)
                        })
                        .collect::<Vec<_>>()
                };
                let deposit = build(dep, -1e-3);
                let top = deposit.last().unwrap().rate;
                RateSchedule::new(build(loan, top), deposit).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ladder_is_monotone(s in schedule()) {
            let d = Demand::uniform(0.0, 20.0).unwrap();
            let ladder = piecewise_thresholds(&params(), 600.0, &s, &d);
            prop_assert!(ladder.beta.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(ladder.alpha.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(*ladder.beta.last().unwrap() >= ladder.beta_bar);
            prop_assert!(ladder.beta_bar > ladder.alpha[0]);
            prop_assert!(*ladder.alpha.last().unwrap() >= 0.0);
        }

        #[test]
        fn optimal_order_beats_lattice(s in schedule(), x in 0.0f64..20.0, y in -20.0f64..30.0) {
            let d = Demand::uniform(0.0, 20.0).unwrap();
            let pw = PiecewiseProblem::new(params(), 600.0, s, &d);
            let q = pw.optimal_order(x, y);
            let best = pw.expected_value(q, x, y);
            let lattice = (0..=4000)
                .map(|k| pw.expected_value(k as f64 * 0.01, x, y))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(q >= 0.0);
            prop_assert!(lattice <= best + 1e-6);
        }
    }
}
