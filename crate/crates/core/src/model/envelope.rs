//! A-priori envelopes `M_1 .. M_4` bounding the truth and observer norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds on the unknown truth plus the constants every envelope needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsEnvelope {
    /// Bounds on `||u(0)||`, `||grad u(0)||`, `||Laplacian u(0)||`.
    pub m_a: f64,
    pub m_b: f64,
    pub m_c: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Gagliardo–Nirenberg constant; `None` means "not configured".
    pub c_gn: Option<f64>,
    pub nu: f64,
    pub lambda1: f64,
    /// `sup_s ||f(s)||`.
    pub f_sup: f64,
}

impl BoundsEnvelope {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("nu", self.nu),
            ("lambda1", self.lambda1),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("M_A", self.m_a),
            ("M_B", self.m_b),
            ("M_C", self.m_c),
            ("f_sup", self.f_sup),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.alpha0 > self.alpha1 {
            return Err(Error::param("alpha0", "must not exceed alpha1"));
        }
        Ok(())
    }

    pub fn c(&self) -> Result<f64> {
        self.c_gn.ok_or_else(|| {
            Error::param(
                "c_gn",
                "the Gagliardo-Nirenberg constant is not set; strict evaluation needs an explicit value",
            )
        })
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.nu * self.lambda1 * t).exp()
    }

    pub fn m1_sq(&self, t: f64) -> f64 {
        let a = self.m_a * self.m_a + self.alpha1 * self.alpha1 * self.m_b * self.m_b;
        self.decay(t) * a + self.f_sup.powi(2) / (self.lambda1.powi(2) * self.nu.powi(2))
    }

    pub fn m1(&self, t: f64) -> f64 {
        self.m1_sq(t).sqrt()
    }

    pub fn m2_sq(&self, t: f64) -> Result<f64> {
        let c = self.c()?;
        let (nu, lam, a0, a1) = (self.nu, self.lambda1, self.alpha0, self.alpha1);
        let e = self.decay(t);
        let ab = self.m_a.powi(2) + a1 * a1 * self.m_b.powi(2);
        let bc = self.m_b.powi(2) + a1 * a1 * self.m_c.powi(2);
        let c4 = c.powi(4);
        Ok(e * bc
            + 2.0 * c4 / (a0.powi(5) * nu * nu * lam) * e * ab * ab
            + self.f_sup.powi(2) / (nu * nu * lam)
            + 2.0 * c4 / (a0.powi(5) * nu.powi(6) * lam.powi(5)) * self.f_sup.powi(4))
    }

    pub fn m2(&self, t: f64) -> Result<f64> {
        Ok(self.m2_sq(t)?.sqrt())
    }

    pub fn m3(&self, t: f64) -> Result<f64> {
        let c = self.c()?;
        Ok(self.nu / self.alpha0 * self.m2(t)?
            + c * c / (self.alpha0.powi(4) * self.lambda1.powf(0.75)) * self.m1_sq(t)
            + self.f_sup)
    }

    /// `M_{(4,n)}^2(t, eta)` for the window starting at `t_n`, given the
    /// observer norms `||w(t_n)||^2` and `||grad w(t_n)||^2`.
    pub fn m4_sq(
        &self,
        t: f64,
        t_n: f64,
        eta: f64,
        beta_sq: f64,
        w_norm_sq: f64,
        w_grad_sq: f64,
    ) -> f64 {
        eval_m4_sq(
            t - t_n,
            eta,
            beta_sq,
            (w_norm_sq, w_grad_sq),
            self.f_sup,
            self.m1_sq(t_n),
            self.alpha0,
        )
    }
}

/// Literal `M_{(4,n)}^2`: `elapsed = t - t_n`, `m1_sq_at_tn = M_1^2(t_n)`.
pub fn eval_m4_sq(
    elapsed: f64,
    eta: f64,
    beta_sq: f64,
    w_prev_norms_sq: (f64, f64),
    f_sup: f64,
    m1_sq_at_tn: f64,
    alpha0: f64,
) -> f64 {
    let (w2, gw2) = w_prev_norms_sq;
    (-0.5 * eta * elapsed).exp() * (w2 + beta_sq * gw2)
        + 4.0 / (eta * eta) * f_sup * f_sup
        + 2.0 * (2.0 + beta_sq / (alpha0 * alpha0)) * m1_sq_at_tn
}

pub fn eval_m1(t: f64, env: &BoundsEnvelope) -> f64 {
    env.m1(t)
}

pub fn eval_m2(t: f64, env: &BoundsEnvelope) -> Result<f64> {
    env.m2(t)
}

pub fn eval_m3(t: f64, env: &BoundsEnvelope) -> Result<f64> {
    env.m3(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(f_sup: f64) -> BoundsEnvelope {
        BoundsEnvelope {
            m_a: 1.5,
            m_b: 2.0,
            m_c: 3.0,
            alpha0: 0.2,
            alpha1: 0.5,
            c_gn: Some(1.0),
            nu: 0.1,
            lambda1: 1.0,
            f_sup,
        }
    }

    #[test]
    fn m1_at_zero_and_infinity() {
        let e = env(0.0);
        assert!((e.m1_sq(0.0) - (1.5f64.powi(2) + 0.25 * 4.0)).abs() < 1e-15);
        assert!(e.m1_sq(1e5) < 1e-300);
        assert!(e.m3(1e5).unwrap() < 1e-100);
    }

    #[test]
    fn envelopes_do_not_increase() {
        let e = env(0.7);
        let mut prev = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for i in 0..50 {
            let t = i as f64 * 0.7;
            let now = (e.m1(t), e.m2(t).unwrap(), e.m3(t).unwrap());
            assert!(now.0 <= prev.0 && now.1 <= prev.1 && now.2 <= prev.2);
            prev = now;
        }
    }

    #[test]
    fn unset_constant_is_an_error() {
        let mut e = env(0.3);
        e.c_gn = None;
        assert!(e.m2(0.0).is_err());
        assert!(e.m3(0.0).is_err());
        assert!(e.m1(0.0) > 0.0);
    }

    #[test]
    fn m4_at_window_start() {
        let e = env(0.4);
        let (w2, gw2, b2, eta) = (0.3, 1.2, 0.05, 8.0);
        let expect =
            w2 + b2 * gw2 + 4.0 / (eta * eta) * 0.16 + 2.0 * (2.0 + b2 / 0.04) * e.m1_sq(2.0);
        assert!((e.m4_sq(2.0, 2.0, eta, b2, w2, gw2) - expect).abs() < 1e-14 * expect);
        let late = eval_m4_sq(1e4, eta, b2, (w2, gw2), 0.0, 0.9, 0.2);
        assert!((late - 2.0 * (2.0 + b2 / 0.04) * 0.9).abs() < 1e-14);
    }
}
