//! Runtime checks of the a-priori envelopes.

use serde::{Deserialize, Serialize};

use crate::model::envelope::BoundsEnvelope;
use crate::model::TruthTrajectory;
use crate::spectral::{sobolev_norm_sq, SpectralField};

/// Relative slack for rounding when comparing a norm with its envelope.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub checked: usize,
    pub violations: usize,
    /// Instants where the hypotheses of the estimate did not hold.
    pub skipped: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
}

impl CheckCount {
    pub fn record(&mut self, lhs: f64, rhs: f64) -> bool {
        self.checked += 1;
        let ratio = lhs / rhs;
        if ratio > self.worst_ratio || ratio.is_nan() {
            self.worst_ratio = ratio;
        }
        let ok = lhs <= rhs * (1.0 + ROUNDING);
        if !ok {
            self.violations += 1;
        }
        ok
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn merge(&mut self, other: &CheckCount) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.skipped += other.skipped;
        if other.worst_ratio > self.worst_ratio {
            self.worst_ratio = other.worst_ratio;
        }
    }
}

/// Violation counts per estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeAudit {
    /// `||u||^2 + alpha^2 ||grad u||^2 <= M_1^2`.
    pub energy: CheckCount,
    /// `||grad u||^2 + alpha^2 ||A u||^2 <= M_2^2`.
    pub enstrophy: CheckCount,
    /// `||u_t|| <= M_3` for `t > 0`.
    pub time_derivative: CheckCount,
    /// `||w||^2 + beta^2 ||grad w||^2 <= M_4^2` on each window.
    pub observer: CheckCount,
    /// Synchronization bound for `g = w - u` on each window.
    pub synchronization: CheckCount,
    /// Bound on `|alpha^2 - beta_{n+1}^2|` after each update.
    pub update_error: CheckCount,
}

impl EnvelopeAudit {
    pub fn total_violations(&self) -> usize {
        self.entries().iter().map(|(_, c)| c.violations).sum()
    }

    pub fn entries(&self) -> [(&'static str, CheckCount); 6] {
        [
            ("energy", self.energy),
            ("enstrophy", self.enstrophy),
            ("time_derivative", self.time_derivative),
            ("observer", self.observer),
            ("synchronization", self.synchronization),
            ("update_error", self.update_error),
        ]
    }

    pub fn merge(&mut self, other: &EnvelopeAudit) {
        self.energy.merge(&other.energy);
        self.enstrophy.merge(&other.enstrophy);
        self.time_derivative.merge(&other.time_derivative);
        self.observer.merge(&other.observer);
        self.synchronization.merge(&other.synchronization);
        self.update_error.merge(&other.update_error);
    }

    /// Checks the three truth envelopes at one instant.
    pub fn check_truth(
        &mut self,
        t: f64,
        u: &SpectralField,
        ut: &SpectralField,
        alpha_sq: f64,
        env: &BoundsEnvelope,
    ) {
        let (u2, gu2, au2) = (
            sobolev_norm_sq(u, 0.0),
            sobolev_norm_sq(u, 1.0),
            sobolev_norm_sq(u, 2.0),
        );
        self.energy.record(u2 + alpha_sq * gu2, env.m1_sq(t));
        match env.m2_sq(t) {
            Ok(m2) => {
                self.enstrophy.record(gu2 + alpha_sq * au2, m2);
            }
            Err(_) => self.enstrophy.skip(),
        }
        if t > 0.0 {
            match env.m3(t) {
                Ok(m3) => {
                    self.time_derivative
                        .record(sobolev_norm_sq(ut, 0.0).sqrt(), m3);
                }
                Err(_) => self.time_derivative.skip(),
            }
        }
    }
}

/// Truth envelopes at every stored time of a trajectory.
pub fn verify_envelopes(
    traj: &TruthTrajectory,
    alpha_sq: f64,
    env: &BoundsEnvelope,
) -> EnvelopeAudit {
    let mut audit = EnvelopeAudit::default();
    for ((t, u), ut) in traj.times.iter().zip(&traj.states).zip(&traj.derivatives) {
        audit.check_truth(*t, u, ut, alpha_sq, env);
    }
    audit
}

/// Envelope constants taken from the actual initial state: `M_A = ||u0||`,
/// `M_B = ||grad u0||`, `M_C = ||A u0||`.
pub fn envelope_from_initial(
    u0: &SpectralField,
    nu: f64,
    f_sup: f64,
    alpha0: f64,
    alpha1: f64,
    c_gn: Option<f64>,
) -> BoundsEnvelope {
    BoundsEnvelope {
        m_a: sobolev_norm_sq(u0, 0.0).sqrt(),
        m_b: sobolev_norm_sq(u0, 1.0).sqrt(),
        m_c: sobolev_norm_sq(u0, 2.0).sqrt(),
        alpha0,
        alpha1,
        c_gn,
        nu,
        lambda1: u0.grid().lambda1(),
        f_sup,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    #[test]
    fn zero_solution_without_forcing_never_violates() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let z = SpectralField::zeros(g);
        let env = envelope_from_initial(&z, 0.1, 0.0, 0.1, 0.3, Some(1.0));
        let mut traj = TruthTrajectory::with_capacity(0.1, 3);
        for i in 0..3 {
            traj.push(i as f64 * 0.1, z.clone(), z.clone());
        }
        let a = verify_envelopes(&traj, 0.04, &env);
        assert_eq!(a.total_violations(), 0);
        assert_eq!(a.energy.checked, 3);
        assert_eq!(a.time_derivative.checked, 2);
    }

    #[test]
    fn counts_violations() {
        let mut c = CheckCount::default();
        assert!(c.record(1.0, 1.0));
        assert!(!c.record(2.0, 1.0));
        assert_eq!((c.checked, c.violations), (2, 1));
        assert_eq!(c.worst_ratio, 2.0);
    }
}
