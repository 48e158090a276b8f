//! The eight sufficient conditions for contraction, evaluated as margins
//! `rhs - lhs`.

use serde::{Deserialize, Serialize};

use super::schedule::{RecoveryMode, RecoverySchedule};
use crate::model::envelope::{eval_m4_sq, BoundsEnvelope};

/// One inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub satisfied: bool,
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionOutcome {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            satisfied: margin >= 0.0,
            margin,
            lhs,
            rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `N_tilde <= N`.
    pub c_4_3: ConditionOutcome,
    /// `eta / N^2 <= nu lambda_1 / 2`.
    pub c_4_4: ConditionOutcome,
    /// Lower bound on `eta`.
    pub c_4_5: ConditionOutcome,
    pub c_4_6: ConditionOutcome,
    pub c_4_7: ConditionOutcome,
    pub c_4_8: ConditionOutcome,
    pub c_4_9: ConditionOutcome,
    pub c_4_10: ConditionOutcome,
}

impl ConditionReport {
    pub fn outcomes(&self) -> [ConditionOutcome; 8] {
        [
            self.c_4_3,
            self.c_4_4,
            self.c_4_5,
            self.c_4_6,
            self.c_4_7,
            self.c_4_8,
            self.c_4_9,
            self.c_4_10,
        ]
    }

    pub fn margins(&self) -> [f64; 8] {
        self.outcomes().map(|o| o.margin)
    }

    pub fn all_satisfied(&self) -> bool {
        self.outcomes().iter().all(|o| o.satisfied)
    }

    /// `"10110111"`-style summary in the order 4.3 .. 4.10.
    pub fn passed_string(&self) -> String {
        self.outcomes()
            .iter()
            .map(|o| if o.satisfied { '1' } else { '0' })
            .collect()
    }

    pub const LABELS: [&'static str; 8] = ["4.3", "4.4", "4.5", "4.6", "4.7", "4.8", "4.9", "4.10"];
}

/// Everything about one candidate iteration that the conditions depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub n: usize,
    pub eta: f64,
    pub n_cut: u32,
    pub n_tilde: u32,
    pub zeta: f64,
    pub beta_sq: f64,
    pub t_n: f64,
    pub t_hat: f64,
    pub t_next: f64,
    /// `||w(t_n)||^2` and `||grad w(t_n)||^2` of the observer entering the window.
    pub w_norm_sq: f64,
    pub w_grad_sq: f64,
}

/// Evaluates every condition. Never fails: an unset Gagliardo–Nirenberg
/// constant or a vanishing `zeta` shows up as failed (NaN or infinite) margins.
pub fn check_conditions(
    inp: &ConditionInputs,
    env: &BoundsEnvelope,
    schedule: &RecoverySchedule,
) -> ConditionReport {
    let c = env.c_gn.unwrap_or(f64::NAN);
    let c2 = c * c;
    let (nu, lam1, a0, a1) = (env.nu, env.lambda1, schedule.alpha0, schedule.alpha1);
    let eps = schedule.epsilon;
    let eta = inp.eta;
    let beta = inp.beta_sq.sqrt();
    let n_f = f64::from(inp.n_cut);
    let sqrt_zeta = inp.zeta.max(0.0).sqrt();

    let m1_tn = env.m1(inp.t_n);
    let m1_hat = env.m1(inp.t_hat);
    let m2_tn = env.m2(inp.t_n).unwrap_or(f64::NAN);
    let m3_tn = env.m3(inp.t_n).unwrap_or(f64::NAN);
    let m4 = |t: f64| {
        eval_m4_sq(
            t - inp.t_n,
            eta,
            inp.beta_sq,
            (inp.w_norm_sq, inp.w_grad_sq),
            env.f_sup,
            m1_tn * m1_tn,
            a0,
        )
        .sqrt()
    };
    let m4_hat = m4(inp.t_hat);
    let m4_tn = m4(inp.t_n);

    let kmax = f64::max(1.0, (eps.sqrt() + a1) / beta);
    let s = nu.sqrt() * m2_tn / a0 + m3_tn / nu.sqrt();
    let bracket = m1_hat / a0 + m4_hat / beta;
    let settle_decay = (-eta * (inp.t_hat - inp.t_n) / 4.0).exp();
    let chi = RecoverySchedule::chi(inp.n);

    let c_4_3 = ConditionOutcome::new(f64::from(inp.n_tilde), n_f);
    let c_4_4 = ConditionOutcome::new(eta / (n_f * n_f), nu * lam1 / 2.0);
    let c_4_5 = ConditionOutcome::new(
        27.0 * c2 * c2 * m1_tn.powi(4) / (8.0 * nu.powi(3) * a0.powi(4)),
        eta,
    );
    let c_4_6 = ConditionOutcome::new(16.0 * kmax * s / beta, eta.sqrt() * nu * lam1.powf(0.75));
    let c_4_7 = ConditionOutcome::new(
        8.0 * c2 * lam1.powf(-0.25) / (eta.sqrt() * inp.beta_sq * sqrt_zeta * n_f.sqrt())
            * bracket
            * s,
        eps / (4.0 * (a1 * a1 - a0 * a0).abs() * chi + 4.0 * eps),
    );
    let c_4_8 = ConditionOutcome::new(kmax * (-eta * (inp.t_next - inp.t_n) / 4.0).exp(), 0.125);
    let c_4_9 = ConditionOutcome::new(
        4.0 * c2 / (sqrt_zeta * n_f.sqrt() * beta) * bracket * settle_decay,
        1.0 / (4.0 * nu * lam1.sqrt()),
    );
    let c_4_10 = ConditionOutcome::new(
        8.0 * c2 * lam1.powf(-0.25) / (beta * sqrt_zeta * n_f.sqrt())
            * bracket
            * settle_decay
            * ((1.0 + beta / a0) * m1_tn + m4_tn),
        eps / 2.0,
    );
    ConditionReport {
        c_4_3,
        c_4_4,
        c_4_5,
        c_4_6,
        c_4_7,
        c_4_8,
        c_4_9,
        c_4_10,
    }
}

/// A candidate window: `(t_hat, t_next)` and `zeta` over it, or `None` when it
/// does not fit in the available data.
pub trait CandidateWindow {
    fn window(&self, eta: f64, n_cut: u32) -> Option<(f64, f64, f64)>;
}

impl<F: Fn(f64, u32) -> Option<(f64, f64, f64)>> CandidateWindow for F {
    fn window(&self, eta: f64, n_cut: u32) -> Option<(f64, f64, f64)> {
        self(eta, n_cut)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Selection {
    Chosen {
        eta: f64,
        n_cut: u32,
        t_hat: f64,
        t_next: f64,
        zeta: f64,
        report: ConditionReport,
    },
    Infeasible,
}

/// Geometric ladder `start * 2^j`, `j = -steps ..= steps`, kept below `max`.
pub fn eta_ladder(start: f64, steps: i32, max: f64) -> Vec<f64> {
    (-steps..=steps)
        .map(|j| start * 2f64.powi(j))
        .filter(|&e| e <= max)
        .collect()
}

/// `N_tilde, 2 N_tilde, 4 N_tilde, ...` capped at `N_obs`, which is always included.
pub fn cutoff_ladder(n_tilde: u32, n_obs: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut n = n_tilde.max(1);
    while n < n_obs {
        out.push(n);
        n *= 2;
    }
    out.push(n_obs);
    out
}

/// Picks `(eta_n, N_n)`. In practical mode the configured pair is returned
/// with its audit report. In strict mode the ladders are scanned by
/// increasing `eta`, then increasing `N`, and the first pair passing every
/// condition wins.
#[allow(clippy::too_many_arguments)]
pub fn select_parameters(
    n: usize,
    schedule: &RecoverySchedule,
    env: &BoundsEnvelope,
    beta_sq: f64,
    t_n: f64,
    w_norms_sq: (f64, f64),
    eta_max: f64,
    windows: &dyn CandidateWindow,
) -> Selection {
    let evaluate = |eta: f64, n_cut: u32| {
        let (t_hat, t_next, zeta) = windows.window(eta, n_cut)?;
        let inp = ConditionInputs {
            n,
            eta,
            n_cut,
            n_tilde: schedule.n_tilde,
            zeta,
            beta_sq,
            t_n,
            t_hat,
            t_next,
            w_norm_sq: w_norms_sq.0,
            w_grad_sq: w_norms_sq.1,
        };
        Some((t_hat, t_next, zeta, check_conditions(&inp, env, schedule)))
    };
    match schedule.mode {
        RecoveryMode::Practical => match evaluate(schedule.eta, schedule.n_obs) {
            Some((t_hat, t_next, zeta, report)) => Selection::Chosen {
                eta: schedule.eta,
                n_cut: schedule.n_obs,
                t_hat,
                t_next,
                zeta,
                report,
            },
            None => Selection::Infeasible,
        },
        RecoveryMode::Strict => {
            for eta in eta_ladder(schedule.eta, 12, eta_max) {
                for n_cut in cutoff_ladder(schedule.n_tilde, schedule.n_obs) {
                    if let Some((t_hat, t_next, zeta, report)) = evaluate(eta, n_cut) {
                        if report.all_satisfied() {
                            return Selection::Chosen {
                                eta,
                                n_cut,
                                t_hat,
                                t_next,
                                zeta,
                                report,
                            };
                        }
                    }
                }
            }
            Selection::Infeasible
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> BoundsEnvelope {
        BoundsEnvelope {
            m_a: 0.5,
            m_b: 0.8,
            m_c: 1.1,
            alpha0: 0.15,
            alpha1: 0.5,
            c_gn: Some(1.0),
            nu: 1.0,
            lambda1: 1.0,
            f_sup: 0.3,
        }
    }

    fn inputs() -> ConditionInputs {
        ConditionInputs {
            n: 1,
            eta: 10.0,
            n_cut: 10,
            n_tilde: 4,
            zeta: 2.0,
            beta_sq: 0.04,
            t_n: 0.0,
            t_hat: 0.5,
            t_next: 1.0,
            w_norm_sq: 0.0,
            w_grad_sq: 0.0,
        }
    }

    #[test]
    fn eta_over_n_sq_example() {
        let s = RecoverySchedule::new(0.15, 0.5, 0.04);
        let r = check_conditions(&inputs(), &env(), &s);
        assert!((r.c_4_4.lhs - 0.1).abs() < 1e-15);
        assert!((r.c_4_4.margin - 0.4).abs() < 1e-15);
        assert!(r.c_4_4.satisfied);
        assert_eq!(r.c_4_3.margin, 6.0);
    }

    #[test]
    fn long_windows_pass_the_decay_condition() {
        let s = RecoverySchedule::new(0.15, 0.5, 0.04);
        let mut inp = inputs();
        inp.t_next = 1e4;
        let r = check_conditions(&inp, &env(), &s);
        assert!(r.c_4_8.lhs < 1e-100 && r.c_4_8.satisfied);
    }

    #[test]
    fn unset_constant_fails_dependent_conditions() {
        let s = RecoverySchedule::new(0.15, 0.5, 0.04);
        let mut e = env();
        e.c_gn = None;
        let r = check_conditions(&inputs(), &e, &s);
        assert!(r.c_4_3.satisfied && r.c_4_4.satisfied);
        assert!(!r.c_4_5.satisfied && !r.c_4_7.satisfied && !r.c_4_10.satisfied);
        assert_eq!(r.passed_string().len(), 8);
    }

    #[test]
    fn practical_mode_returns_configured_pair() {
        let mut s = RecoverySchedule::new(0.15, 0.5, 0.04);
        s.eta = 7.0;
        s.n_obs = 5;
        s.n_tilde = 3;
        let win = |eta: f64, _n: u32| Some((5.0 / eta, 5.0 / eta + 0.5, 1.0));
        match select_parameters(1, &s, &env(), 0.04, 0.0, (0.0, 0.0), 25.0, &win) {
            Selection::Chosen { eta, n_cut, .. } => assert_eq!((eta, n_cut), (7.0, 5)),
            Selection::Infeasible => panic!("practical mode never halts"),
        }
    }

    #[test]
    fn ladders() {
        assert_eq!(cutoff_ladder(2, 8), vec![2, 4, 8]);
        assert_eq!(cutoff_ladder(3, 8), vec![3, 6, 8]);
        assert_eq!(cutoff_ladder(8, 8), vec![8]);
        let e = eta_ladder(1.0, 2, 3.0);
        assert_eq!(e, vec![0.25, 0.5, 1.0, 2.0]);
    }
}
