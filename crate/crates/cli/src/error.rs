use std::fmt;

use spottune::earlycurve::CurveError;
use spottune::market::MarketError;
use spottune::orchestrator::SimError;
use spottune::revpred::RevPredError;
use spottune::workload::WorkloadError;

/// Command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Simulation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Simulation(m) => write!(f, "simulation error: {m}"),
        }
    }
}

pub fn data(msg: impl fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(MarketError, RevPredError, CurveError, WorkloadError, std::io::Error, serde_json::Error);

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            SimError::Horizon { .. } | SimError::NoInstance { .. } | SimError::InvalidObservation(_) => {
                CliError::Simulation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}
