use serde::{Deserialize, Serialize};

use super::SimError;
use crate::earlycurve::FitConfig;

/// How unobserved cells of the performance matrix are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfInit {
    /// `c0 / cpus` seconds per step.
    #[default]
    PerCpu,
    /// `c0 × cpus`.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub metric: String,
    pub max_trial_steps: u64,
    /// Fraction of the step budget each setting runs before extrapolation.
    pub theta: f64,
    /// Settings per algorithm that continue to the full budget.
    pub mcnt: usize,
    /// Initial seconds-per-step constant.
    pub c0: f64,
    pub perf_init: PerfInit,
    /// Weight of a new observation in the performance matrix.
    pub ema_beta: f64,
    pub poll_interval: i64,
    pub notice_lead: i64,
    pub rotation_limit: i64,
    pub seed: u64,
    /// Submission time; defaults to two hours after the latest trace start.
    pub start_time: Option<i64>,
    /// Cap on simultaneously running jobs.
    pub max_parallel: Option<usize>,
    pub fit: FitConfig,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            metric: "loss".into(),
            max_trial_steps: 60,
            theta: 0.7,
            mcnt: 3,
            c0: 3600.0,
            perf_init: PerfInit::PerCpu,
            ema_beta: 0.5,
            poll_interval: 10,
            notice_lead: 120,
            rotation_limit: 3600,
            seed: 0,
            start_time: None,
            max_parallel: None,
            fit: FitConfig::default(),
            record_events: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta must be in (0, 1]");
        }
        if self.mcnt == 0 {
            return bad("mcnt must be at least 1");
        }
        if self.max_trial_steps == 0 {
            return bad("max_trial_steps must be positive");
        }
        if !(self.c0 > 0.0) || self.poll_interval <= 0 || self.notice_lead <= 0 || self.rotation_limit <= 0 {
            return bad("c0 and all durations must be positive");
        }
        if !(self.ema_beta > 0.0 && self.ema_beta <= 1.0) {
            return bad("ema_beta must be in (0, 1]");
        }
        if !(0.0 < self.fit.epsilon && self.fit.epsilon < self.fit.xi) {
            return bad("need 0 < epsilon < xi");
        }
        if self.max_parallel == Some(0) {
            return bad("max_parallel must be positive");
        }
        Ok(())
    }

    /// Steps a setting runs before its final metric is extrapolated.
    pub fn theta_steps(&self) -> u64 {
        ((self.theta * self.max_trial_steps as f64 - 1e-9).ceil() as u64).clamp(1, self.max_trial_steps)
    }

    pub(crate) fn fit_config(&self) -> FitConfig {
        FitConfig {
            theta: self.theta,
            ..self.fit
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_steps_rounds_up() {
        let mut c = SimConfig { max_trial_steps: 60, theta: 0.7, ..Default::default() };
        assert_eq!(c.theta_steps(), 42);
        c.theta = 0.1;
        assert_eq!(c.theta_steps(), 6);
        c.theta = 1.0;
        assert_eq!(c.theta_steps(), 60);
        c.max_trial_steps = 1000;
        c.theta = 0.7;
        assert_eq!(c.theta_steps(), 700);
    }

    #[test]
    fn validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { theta: 0.0, ..Default::default() }.validate().is_err());
        assert!(SimConfig { theta: 1.5, ..Default::default() }.validate().is_err());
        assert!(SimConfig { mcnt: 0, ..Default::default() }.validate().is_err());
        assert!(SimConfig { max_parallel: Some(0), ..Default::default() }.validate().is_err());
    }
}
