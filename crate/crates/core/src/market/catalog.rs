use serde::{Deserialize, Serialize};

use super::MarketError;

/// A purchasable instance type. On-demand prices are reference data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub name: String,
    pub cpus: u32,
    pub memory_gb: f64,
    /// USD per hour.
    pub on_demand_price: f64,
}

impl InstanceType {
    pub fn new(name: impl Into<String>, cpus: u32, memory_gb: f64, on_demand_price: f64) -> Self {
        Self {
            name: name.into(),
            cpus,
            memory_gb,
            on_demand_price,
        }
    }

    fn validate(&self) -> Result<(), MarketError> {
        let reason = if self.cpus == 0 {
            Some("cpus must be at least 1")
        } else if !(self.on_demand_price > 0.0) {
            Some("on-demand price must be positive")
        } else {
            None
        };
        match reason {
            Some(r) => Err(MarketError::InvalidInstance {
                name: self.name.clone(),
                reason: r.to_string(),
            }),
            None => Ok(()),
        }
    }
}

/// An ordered set of instance types with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<InstanceType>", into = "Vec<InstanceType>")]
pub struct Catalog {
    instances: Vec<InstanceType>,
}

impl Catalog {
    pub fn new(instances: Vec<InstanceType>) -> Result<Self, MarketError> {
        for (i, inst) in instances.iter().enumerate() {
            inst.validate()?;
            if instances[..i].iter().any(|o| o.name == inst.name) {
                return Err(MarketError::DuplicateInstance(inst.name.clone()));
            }
        }
        Ok(Self { instances })
    }

    /// The six-instance us-east-1 pool used in the evaluation.
    pub fn reference() -> Self {
        Self::new(vec![
            InstanceType::new("r4.large", 2, 15.25, 0.133),
            InstanceType::new("r3.xlarge", 4, 30.0, 0.33),
            InstanceType::new("r4.xlarge", 4, 30.5, 0.266),
            InstanceType::new("m4.2xlarge", 8, 32.0, 0.4),
            InstanceType::new("r4.2xlarge", 8, 61.0, 0.532),
            InstanceType::new("m4.4xlarge", 16, 64.0, 0.8),
        ])
        .expect("reference catalog is valid")
    }

    pub fn get(&self, name: &str) -> Option<&InstanceType> {
        self.instances.iter().find(|i| i.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &InstanceType> {
        self.instances.iter()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Restricts the catalog to the named instances, keeping catalog order.
    pub fn subset(&self, names: &[&str]) -> Result<Self, MarketError> {
        for n in names {
            if self.get(n).is_none() {
                return Err(MarketError::InvalidInstance {
                    name: n.to_string(),
                    reason: "not in catalog".into(),
                });
            }
        }
        Ok(Self {
            instances: self
                .instances
                .iter()
                .filter(|i| names.contains(&i.name.as_str()))
                .cloned()
                .collect(),
        })
    }
}

impl TryFrom<Vec<InstanceType>> for Catalog {
    type Error = MarketError;

    fn try_from(v: Vec<InstanceType>) -> Result<Self, Self::Error> {
        Catalog::new(v)
    }
}

impl From<Catalog> for Vec<InstanceType> {
    fn from(c: Catalog) -> Self {
        c.instances
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_catalog_matches_table() {
        let c = Catalog::reference();
        assert_eq!(c.len(), 6);
        let r4 = c.get("r4.large").unwrap();
        assert_eq!((r4.cpus, r4.on_demand_price), (2, 0.133));
        assert_eq!(c.get("m4.4xlarge").unwrap().cpus, 16);
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let a = InstanceType::new("a", 1, 1.0, 0.1);
        assert!(matches!(
            Catalog::new(vec![a.clone(), a.clone()]),
            Err(MarketError::DuplicateInstance(_))
        ));
        assert!(Catalog::new(vec![InstanceType::new("z", 0, 1.0, 0.1)]).is_err());
        assert!(Catalog::new(vec![InstanceType::new("z", 1, 1.0, 0.0)]).is_err());
    }
}
