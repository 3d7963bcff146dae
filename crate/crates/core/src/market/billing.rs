use serde::{Deserialize, Serialize};

use super::{MarketError, PriceTrace};
use crate::HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// The provider reclaimed the instance because the market price exceeded
    /// the maximum price.
    Revoked,
    /// The user shut the instance down.
    SelfShutdown,
    Finished,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::Revoked => "revoked",
            EndReason::SelfShutdown => "self_shutdown",
            EndReason::Finished => "finished",
        }
    }
}

/// One spot acquisition, from request to termination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub instance: String,
    pub start_time: i64,
    /// USD per hour.
    pub max_price: f64,
    pub end_time: i64,
    pub end_reason: EndReason,
}

impl Acquisition {
    pub fn duration(&self) -> i64 {
        self.end_time - self.start_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bill {
    /// USD actually charged.
    pub charge: f64,
    pub refunded: bool,
    /// USD the acquisition would have cost without the refund.
    pub gross: f64,
}

/// Per-second billing at the market price (never the maximum price). An
/// acquisition revoked by the provider within its first hour is refunded in
/// full.
pub fn bill(trace: &PriceTrace, acq: &Acquisition) -> Result<Bill, MarketError> {
    let gross = trace.integral(acq.start_time, acq.end_time)? / HOUR as f64;
    let refunded = acq.end_reason == EndReason::Revoked && acq.duration() < HOUR;
    Ok(Bill {
        charge: if refunded { 0.0 } else { gross },
        refunded,
        gross,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub acquisition: Acquisition,
    pub charge: f64,
    pub refunded: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BillingLedger {
    pub records: Vec<LedgerRecord>,
}

impl BillingLedger {
    pub fn record(&mut self, trace: &PriceTrace, acq: Acquisition) -> Result<Bill, MarketError> {
        let b = bill(trace, &acq)?;
        self.records.push(LedgerRecord {
            acquisition: acq,
            charge: b.charge,
            refunded: b.refunded,
        });
        Ok(b)
    }

    pub fn total(&self) -> f64 {
        self.records.iter().map(|r| r.charge).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat() -> PriceTrace {
        PriceTrace::from_prices("r4.large", 0, 60, &[0.10; 200]).unwrap()
    }

    fn acq(end: i64, reason: EndReason) -> Acquisition {
        Acquisition {
            instance: "r4.large".into(),
            start_time: 0,
            max_price: 0.2,
            end_time: end,
            end_reason: reason,
        }
    }

    #[test]
    fn refund_rule_examples() {
        let tr = flat();
        let b = bill(&tr, &acq(1800, EndReason::Revoked)).unwrap();
        assert_eq!((b.charge, b.refunded), (0.0, true));
        assert!((b.gross - 0.05).abs() < 1e-12);

        let b = bill(&tr, &acq(5400, EndReason::Revoked)).unwrap();
        assert!(!b.refunded);
        assert!((b.charge - 0.15).abs() < 1e-12);

        let b = bill(&tr, &acq(1800, EndReason::SelfShutdown)).unwrap();
        assert!(!b.refunded);
        assert!((b.charge - 0.05).abs() < 1e-12);
    }

    #[test]
    fn exactly_one_hour_is_not_refunded() {
        let b = bill(&flat(), &acq(3600, EndReason::Revoked)).unwrap();
        assert!(!b.refunded);
        assert!((b.charge - 0.10).abs() < 1e-12);
    }

    #[test]
    fn ledger_totals_charges() {
        let tr = flat();
        let mut l = BillingLedger::default();
        l.record(&tr, acq(1800, EndReason::Revoked)).unwrap();
        l.record(&tr, acq(1800, EndReason::SelfShutdown)).unwrap();
        assert!((l.total() - 0.05).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_per_second_sum(prices in prop::collection::vec(0.01f64..3.0, 2..150),
                                  a in 0i64..9000, len in 0i64..9000, revoked: bool) {
            let tr = PriceTrace::from_prices("x", 0, 60, &prices).unwrap();
            let start = a.min(tr.end());
            let end = (start + len).min(tr.end());
            let reason = if revoked { EndReason::Revoked } else { EndReason::SelfShutdown };
            let acq = Acquisition { instance: "x".into(), start_time: start, max_price: 9.0, end_time: end, end_reason: reason };
            let b = bill(&tr, &acq).unwrap();
            let brute: f64 = (start..end).map(|s| prices[(s / 60) as usize] / 3600.0).sum();
            prop_assert!((b.gross - brute).abs() < 1e-9);
            if b.refunded {
                prop_assert_eq!(b.charge, 0.0);
            } else {
                prop_assert!((b.charge - brute).abs() < 1e-9);
            }
            prop_assert!(!(b.refunded && !revoked));
        }
    }
}
