use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ModeRule;

/// How `(eta_n, N_n)` are chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    /// Search the ladders for a pair passing every condition, or halt.
    Strict,
    /// Use the configured pair and only audit the conditions.
    #[default]
    Practical,
}

impl RecoveryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryMode::Strict => "strict",
            RecoveryMode::Practical => "practical",
        }
    }
}

impl fmt::Display for RecoveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecoveryMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strict" => Ok(RecoveryMode::Strict),
            "practical" => Ok(RecoveryMode::Practical),
            other => Err(format!("expected `strict` or `practical`, got `{other}`")),
        }
    }
}

/// Every setting of the recursion that the recovery side is allowed to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySchedule {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1_sq: f64,
    pub epsilon: f64,
    pub mode: RecoveryMode,
    pub eta: f64,
    pub n_obs: u32,
    pub n_tilde: u32,
    pub c_gn: Option<f64>,
    /// `t_hat_n - t_n`; `None` means `5 / eta_n`.
    pub settle: Option<f64>,
    /// `t_{n+1} - t_hat_n`.
    pub window: f64,
    pub t_final: f64,
    pub max_iters: usize,
    pub rule: ModeRule,
}

impl RecoverySchedule {
    /// Practical-mode schedule with the reference timing.
    pub fn new(alpha0: f64, alpha1: f64, beta1_sq: f64) -> Self {
        Self {
            alpha0,
            alpha1,
            beta1_sq,
            epsilon: 0.5 * alpha0 * alpha0,
            mode: RecoveryMode::Practical,
            eta: 20.0,
            n_obs: 8,
            n_tilde: 8,
            c_gn: Some(1.0),
            settle: None,
            window: 0.5,
            t_final: 6.0,
            max_iters: 1000,
            rule: ModeRule::Strict,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("recovery.alpha0", self.alpha0),
            ("recovery.alpha1", self.alpha1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.alpha0 > self.alpha1 {
            return Err(Error::param(
                "recovery.alpha0",
                "must not exceed recovery.alpha1",
            ));
        }
        let b = self.beta1_sq.sqrt();
        if !(self.beta1_sq.is_finite() && self.beta1_sq > 0.0)
            || b < self.alpha0 * (1.0 - 1e-12)
            || b > self.alpha1 * (1.0 + 1e-12)
        {
            return Err(Error::param(
                "recovery.beta1_sq",
                format!(
                    "beta_1 = {b} must lie in [alpha0, alpha1] = [{}, {}]",
                    self.alpha0, self.alpha1
                ),
            ));
        }
        let a0_sq = self.alpha0 * self.alpha0;
        if !(self.epsilon > 0.0 && self.epsilon < a0_sq) {
            return Err(Error::param(
                "recovery.epsilon",
                format!(
                    "requires 0 < epsilon < alpha0^2 = {a0_sq}, got {}",
                    self.epsilon
                ),
            ));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::param(
                "recovery.eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if self.n_obs == 0 {
            return Err(Error::param("recovery.N_obs", "must be at least 1"));
        }
        if self.n_tilde == 0 || self.n_tilde > self.n_obs {
            return Err(Error::param(
                "recovery.N_tilde",
                format!(
                    "requires 1 <= N_tilde <= N_obs = {}, got {}",
                    self.n_obs, self.n_tilde
                ),
            ));
        }
        if let Some(c) = self.c_gn {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::param(
                    "recovery.c_gn",
                    format!("must be positive, got {c}"),
                ));
            }
        }
        if let Some(s) = self.settle {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::param(
                    "time.settle",
                    format!("must be non-negative, got {s}"),
                ));
            }
        }
        for (name, v) in [("time.window", self.window), ("time.T_final", self.t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::param("time.max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn settle_for(&self, eta: f64) -> f64 {
        self.settle.unwrap_or(5.0 / eta)
    }

    /// `chi_1(n)`: one on the first iteration only.
    pub fn chi(n: usize) -> f64 {
        if n == 1 {
            1.0
        } else {
            0.0
        }
    }
}

/// Why an iteration record was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Updated,
    HaltedDegenerate,
    HaltedFinalTime,
    HaltedMaxIters,
    HaltedInfeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Updated => "Updated",
            Status::HaltedDegenerate => "HaltedDegenerate",
            Status::HaltedFinalTime => "HaltedFinalTime",
            Status::HaltedMaxIters => "HaltedMaxIters",
            Status::HaltedInfeasible => "HaltedInfeasible",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Status::Updated,
            Status::HaltedDegenerate,
            Status::HaltedFinalTime,
            Status::HaltedMaxIters,
            Status::HaltedInfeasible,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
        .ok_or_else(|| format!("unknown status `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_schedule_is_valid() {
        let s = RecoverySchedule::new(0.15, 0.5, 0.04);
        s.validate().unwrap();
        assert!((s.settle_for(20.0) - 0.25).abs() < 1e-15);
        assert_eq!(RecoverySchedule::chi(1), 1.0);
        assert_eq!(RecoverySchedule::chi(2), 0.0);
    }

    #[test]
    fn epsilon_must_sit_below_alpha0_sq() {
        let mut s = RecoverySchedule::new(0.15, 0.5, 0.04);
        s.epsilon = 0.0225;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("recovery.epsilon") && msg.contains("0 < epsilon < alpha0^2"));
    }

    #[test]
    fn beta1_outside_prior_rejected() {
        assert!(RecoverySchedule::new(0.15, 0.5, 0.01).validate().is_err());
        assert!(RecoverySchedule::new(0.15, 0.5, 0.3).validate().is_err());
        let mut s = RecoverySchedule::new(0.15, 0.5, 0.04);
        s.n_tilde = 9;
        assert!(s.validate().is_err());
    }

    #[test]
    fn status_names_round_trip() {
        for st in [
            Status::Updated,
            Status::HaltedDegenerate,
            Status::HaltedInfeasible,
        ] {
            assert_eq!(st.as_str().parse::<Status>().unwrap(), st);
        }
        assert_eq!(
            "strict".parse::<RecoveryMode>().unwrap(),
            RecoveryMode::Strict
        );
    }
}
