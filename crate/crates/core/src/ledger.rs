//! Request ledger for sanitized-gradient releases.
//!
//! Every sanitized subgradient is one release of one record at a fixed
//! per-request ε, so the request count is the privacy cost tracked here.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    per_request_epsilon: f64,
    budget: Option<u64>,
    request_count: u64,
    per_run: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub per_request_epsilon: f64,
    pub total_requests: u64,
    pub budget: Option<u64>,
    pub utilization: Option<f64>,
    /// Sorted by run label.
    pub runs: Vec<RunCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCount {
    pub label: String,
    pub requests: u64,
}

impl PrivacyLedger {
    pub fn new(per_request_epsilon: f64) -> Self {
        PrivacyLedger {
            per_request_epsilon,
            budget: None,
            request_count: 0,
            per_run: BTreeMap::new(),
        }
    }

    pub fn with_budget(per_request_epsilon: f64, budget: u64) -> Self {
        PrivacyLedger {
            budget: Some(budget),
            ..Self::new(per_request_epsilon)
        }
    }

    /// Records `n` requests under `run_label`, or nothing if the budget
    /// would be exceeded.
    pub fn charge(&mut self, run_label: &str, n: u64) -> Result<()> {
        if n == 0 {
            return Err(invalid("a charge must cover at least one request"));
        }
        let total = self.request_count.checked_add(n).ok_or_else(|| invalid("request count overflow"))?;
        if let Some(budget) = self.budget {
            if total > budget {
                return Err(Error::BudgetExceeded {
                    requested: n,
                    used: self.request_count,
                    budget,
                });
            }
        }
        self.request_count = total;
        match self.per_run.get_mut(run_label) {
            Some(count) => *count += n,
            None => {
                self.per_run.insert(run_label.to_owned(), n);
            }
        }
        Ok(())
    }

    pub fn request_count(&self) -> u64 {
        self.request_count
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn per_request_epsilon(&self) -> f64 {
        self.per_request_epsilon
    }

    pub fn run_count(&self, run_label: &str) -> u64 {
        self.per_run.get(run_label).copied().unwrap_or(0)
    }

    pub fn report(&self) -> LedgerReport {
        LedgerReport {
            per_request_epsilon: self.per_request_epsilon,
            total_requests: self.request_count,
            budget: self.budget,
            utilization: self.budget.map(|b| {
                if b == 0 {
                    if self.request_count == 0 { 0.0 } else { f64::INFINITY }
                } else {
                    self.request_count as f64 / b as f64
                }
            }),
            runs: self
                .per_run
                .iter()
                .map(|(label, &requests)| RunCount {
                    label: label.clone(),
                    requests,
                })
                .collect(),
        }
    }
}

/// A ledger shared by concurrent oracles. Each charge is an atomic
/// check-and-increment; [`SharedLedger::report`] reads a consistent snapshot.
#[derive(Debug, Clone)]
pub struct SharedLedger {
    inner: Arc<Mutex<PrivacyLedger>>,
}

impl SharedLedger {
    pub fn new(ledger: PrivacyLedger) -> Self {
        SharedLedger {
            inner: Arc::new(Mutex::new(ledger)),
        }
    }

    fn lock(&self) -> MutexGuard<'_, PrivacyLedger> {
        // a panicking holder cannot leave the ledger half-updated
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn charge(&self, run_label: &str, n: u64) -> Result<()> {
        self.lock().charge(run_label, n)
    }

    pub fn request_count(&self) -> u64 {
        self.lock().request_count()
    }

    pub fn run_count(&self, run_label: &str) -> u64 {
        self.lock().run_count(run_label)
    }

    pub fn report(&self) -> LedgerReport {
        self.lock().report()
    }

    pub fn snapshot(&self) -> PrivacyLedger {
        self.lock().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_charges() {
        let mut l = PrivacyLedger::new(1.0);
        l.charge("banco", 1000).unwrap();
        assert_eq!(l.request_count(), 1000);
        l.charge("sgd-grid", 8000).unwrap();
        let r = l.report();
        assert_eq!(r.total_requests, 9000);
        assert_eq!(
            r.runs,
            vec![
                RunCount { label: "banco".into(), requests: 1000 },
                RunCount { label: "sgd-grid".into(), requests: 8000 },
            ]
        );
        assert_eq!(r.utilization, None);
    }

    #[test]
    fn over_budget_charge_is_rejected_whole() {
        let mut l = PrivacyLedger::with_budget(1.0, 1000);
        let err = l.charge("banco", 1001).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { requested: 1001, used: 0, budget: 1000 }));
        assert_eq!(l.request_count(), 0);
        assert!(l.report().runs.is_empty());
        l.charge("banco", 400).unwrap();
        assert_eq!(l.report().utilization, Some(0.4));
        assert!(l.charge("x", 0).is_err());
    }

    #[test]
    fn empty_report() {
        let r = PrivacyLedger::new(0.5).report();
        assert_eq!(r.total_requests, 0);
        assert!(r.runs.is_empty());
    }

    #[test]
    fn shared_ledger_serializes_parallel_charges() {
        let shared = SharedLedger::new(PrivacyLedger::with_budget(1.0, 10_000));
        std::thread::scope(|s| {
            for k in 0..8 {
                let l = shared.clone();
                s.spawn(move || {
                    let label = format!("run-{k}");
                    for _ in 0..2000 {
                        let _ = l.charge(&label, 1);
                    }
                });
            }
        });
        let r = shared.report();
        assert_eq!(r.total_requests, 10_000);
        assert_eq!(r.runs.iter().map(|c| c.requests).sum::<u64>(), 10_000);
    }

    proptest! {
        #[test]
        fn breakdown_sums_to_total(
            charges in prop::collection::vec((0usize..5, 1u64..500), 0..60),
            budget in prop::option::of(1u64..10_000),
        ) {
            let mut l = match budget {
                Some(b) => PrivacyLedger::with_budget(1.0, b),
                None => PrivacyLedger::new(1.0),
            };
            for (who, n) in charges {
                let before = l.clone();
                if l.charge(&format!("r{who}"), n).is_err() {
                    prop_assert_eq!(&l, &before);
                }
                let r = l.report();
                prop_assert_eq!(r.runs.iter().map(|c| c.requests).sum::<u64>(), r.total_requests);
                if let Some(b) = budget {
                    prop_assert!(r.total_requests <= b);
                }
            }
        }
    }
}
