//! Second-order exponential time differencing (Cox–Matthews ETD2RK) for
//! `u_t = -nu A u + N(u, t)`.
//!
//! The viscous term is integrated exactly per mode. For a nonlinear term that
//! is constant in time the scheme is exact, so manufactured steady states are
//! fixed points to rounding error.

use std::sync::Arc;

use num_complex::Complex64;

use crate::spectral::{GridSpec, SpectralField};

#[derive(Debug, Clone)]
pub(crate) struct Etd2 {
    dt: f64,
    shells: Arc<Vec<i64>>,
    decay: Vec<f64>,
    phi1_dt: Vec<f64>,
    phi2_dt: Vec<f64>,
}

/// `phi_1(z) = (e^z - 1) / z`.
pub(crate) fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `phi_2(z) = (e^z - 1 - z) / z^2`, by Taylor series near zero where the
/// closed form cancels badly.
pub(crate) fn phi2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // sum_{k>=0} z^k / (k + 2)!
        let mut term = 0.5;
        let mut acc = 0.0;
        for k in 0..14 {
            acc += term;
            term *= z / (k as f64 + 3.0);
        }
        acc
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

impl Etd2 {
    pub(crate) fn new(grid: &GridSpec, nu: f64, dt: f64) -> Self {
        let h = grid.half() - 1;
        let max_k2 = (3 * h * h) as usize;
        let mut decay = Vec::with_capacity(max_k2 + 1);
        let mut phi1_dt = Vec::with_capacity(max_k2 + 1);
        let mut phi2_dt = Vec::with_capacity(max_k2 + 1);
        for k2 in 0..=max_k2 {
            let z = -nu * grid.eigenvalue(k2 as i64) * dt;
            decay.push(z.exp());
            phi1_dt.push(dt * phi1(z));
            phi2_dt.push(dt * phi2(z));
        }
        Self {
            dt,
            shells: grid.shell_table(),
            decay,
            phi1_dt,
            phi2_dt,
        }
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    /// `a = e^{-nu A dt} u + dt phi_1 N(u)`.
    pub(crate) fn predictor(&self, u: &SpectralField, n_u: &SpectralField) -> SpectralField {
        self.combine(u, n_u, None, |d, p1, _, x, y, _| x * d + y * p1)
    }

    /// `u_next = a + dt phi_2 (N(a) - N(u))`.
    pub(crate) fn corrector(
        &self,
        a: &SpectralField,
        n_a: &SpectralField,
        n_u: &SpectralField,
    ) -> SpectralField {
        self.combine(a, n_a, Some(n_u), |_, _, p2, x, y, z| x + (y - z) * p2)
    }

    fn combine<F>(
        &self,
        x: &SpectralField,
        y: &SpectralField,
        z: Option<&SpectralField>,
        f: F,
    ) -> SpectralField
    where
        F: Fn(f64, f64, f64, Complex64, Complex64, Complex64) -> Complex64,
    {
        let mut out = x.clone();
        let xs = x.components();
        let ys = y.components();
        let zs = z.map(|z| z.components());
        let zero = Complex64::default();
        {
            let dst = out.components_mut();
            for (idx, &k2) in self.shells.iter().enumerate() {
                if k2 < 0 {
                    for c in dst.iter_mut() {
                        c[idx] = zero;
                    }
                    continue;
                }
                let k2 = k2 as usize;
                let (d, p1, p2) = (self.decay[k2], self.phi1_dt[k2], self.phi2_dt[k2]);
                for comp in 0..3 {
                    let zv = zs.map_or(zero, |zs| zs[comp][idx]);
                    dst[comp][idx] = f(d, p1, p2, xs[comp][idx], ys[comp][idx], zv);
                }
            }
        }
        let df = x.is_divergence_free()
            && y.is_divergence_free()
            && z.is_none_or(|z| z.is_divergence_free());
        let dl = x.is_dealiased() && y.is_dealiased() && z.is_none_or(|z| z.is_dealiased());
        out.set_flags(df, dl);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_are_continuous_at_switch() {
        for z in [-0.1, 0.1] {
            let below = phi2(z * (1.0 - 1e-12));
            let closed = (z.exp_m1() - z) / (z * z);
            assert!((below - closed).abs() < 1e-13, "{below} vs {closed}");
        }
        assert_eq!(phi2(0.0), 0.5);
        assert!((phi1(-1e-20) - 1.0).abs() < 1e-15);
    }
}
