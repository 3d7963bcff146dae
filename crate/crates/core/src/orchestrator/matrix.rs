use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PerfInit, SimError};
use crate::market::Catalog;

/// Online estimate of seconds per step for every (instance type, setting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMatrix {
    init: BTreeMap<String, f64>,
    /// Observed cells: value and observation count.
    cells: BTreeMap<(String, String), (f64, u64)>,
    beta: f64,
}

pub fn init_perf_matrix(catalog: &Catalog, c0: f64, mode: PerfInit, beta: f64) -> PerfMatrix {
    let init = catalog
        .iter()
        .map(|i| {
            let cpus = i.cpus as f64;
            let v = match mode {
                PerfInit::PerCpu => c0 / cpus,
                PerfInit::Literal => c0 * cpus,
            };
            (i.name.clone(), v)
        })
        .collect();
    PerfMatrix {
        init,
        cells: BTreeMap::new(),
        beta,
    }
}

impl PerfMatrix {
    pub fn get(&self, instance: &str, hp: &str) -> f64 {
        self.cells
            .get(&(instance.to_string(), hp.to_string()))
            .map(|c| c.0)
            .or_else(|| self.init.get(instance).copied())
            .unwrap_or(f64::INFINITY)
    }

    pub fn observations(&self, instance: &str, hp: &str) -> u64 {
        self.cells.get(&(instance.to_string(), hp.to_string())).map_or(0, |c| c.1)
    }

    /// Folds in one observed step time. The first observation replaces the
    /// initial value; later ones are averaged with weight `beta`.
    pub fn update(&mut self, instance: &str, hp: &str, observed_spb: f64) -> Result<(), SimError> {
        if !(observed_spb > 0.0 && observed_spb.is_finite()) {
            return Err(SimError::InvalidObservation(observed_spb));
        }
        let beta = self.beta;
        self.cells
            .entry((instance.to_string(), hp.to_string()))
            .and_modify(|c| {
                c.0 = beta * observed_spb + (1.0 - beta) * c.0;
                c.1 += 1;
            })
            .or_insert((observed_spb, 1));
        Ok(())
    }
}

/// Expected cost of one step, up to a constant factor: seconds per step
/// times the chance of keeping the instance (a revoked first hour is free)
/// times the average price.
pub fn step_cost(matrix: &PerfMatrix, instance: &str, hp: &str, p: f64, avg_price: f64) -> f64 {
    matrix.get(instance, hp) * (1.0 - p) * avg_price
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::InstanceType;

    fn catalog() -> Catalog {
        Catalog::reference()
    }

    #[test]
    fn initialisation() {
        let m = init_perf_matrix(&catalog(), 3600.0, PerfInit::PerCpu, 0.5);
        assert_eq!(m.get("r4.large", "h"), 1800.0);
        assert_eq!(m.get("m4.4xlarge", "h"), 225.0);
        assert_eq!(m.get("r3.xlarge", "h"), m.get("r4.xlarge", "h"));
        let lit = init_perf_matrix(&catalog(), 3600.0, PerfInit::Literal, 0.5);
        assert_eq!(lit.get("r4.large", "h"), 7200.0);
    }

    #[test]
    fn ema_updates() {
        let mut m = init_perf_matrix(&catalog(), 3600.0, PerfInit::PerCpu, 0.5);
        m.update("r4.large", "h", 10.0).unwrap();
        assert_eq!(m.get("r4.large", "h"), 10.0);
        m.update("r4.large", "h", 20.0).unwrap();
        assert_eq!(m.get("r4.large", "h"), 15.0);
        for _ in 0..60 {
            m.update("r4.large", "h", 7.0).unwrap();
        }
        assert!((m.get("r4.large", "h") - 7.0).abs() < 1e-12);
        assert_eq!(m.get("r4.large", "other"), 1800.0);
        assert!(m.update("r4.large", "h", 0.0).is_err());
    }

    #[test]
    fn step_cost_examples() {
        let c = Catalog::new(vec![InstanceType::new("x", 1, 1.0, 1.0)]).unwrap();
        let m = init_perf_matrix(&c, 3600.0, PerfInit::PerCpu, 0.5);
        assert!((step_cost(&m, "x", "h", 0.5, 0.2) - 360.0).abs() < 1e-12);
        assert_eq!(step_cost(&m, "x", "h", 1.0, 0.2), 0.0);
        assert!((step_cost(&m, "x", "h", 0.0, 0.2) - 720.0).abs() < 1e-12);
    }
}
