//! Diagonal Fourier-space operators: Leray projection, the Stokes operator
//! `A`, the Helmholtz inverse `(I + a^2 A)^{-1}`, low-mode truncation, and the
//! homogeneous Sobolev norms and pairings.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::{norm_sq, GridSpec};
use crate::error::{Error, Result};

/// Which lattice points count as "observed" for a cutoff `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRule {
    /// `0 < |K| < N`.
    #[default]
    Strict,
    /// `0 < |K| <= N`; kept for comparison runs only.
    Inclusive,
}

impl ModeRule {
    #[inline]
    pub fn contains(self, k2: i64, cutoff: u32) -> bool {
        let n2 = i64::from(cutoff) * i64::from(cutoff);
        k2 > 0
            && match self {
                ModeRule::Strict => k2 < n2,
                ModeRule::Inclusive => k2 <= n2,
            }
    }
}

/// `u_K -> u_K - K (u_K . K) / |K|^2`.
pub fn leray_project(field: &SpectralField) -> SpectralField {
    let mut out = field.map_modes(|k, k2, c| {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let dot = c[0] * kf[0] + c[1] * kf[1] + c[2] * kf[2];
        let s = dot / k2 as f64;
        [c[0] - s * kf[0], c[1] - s * kf[1], c[2] - s * kf[2]]
    });
    out.set_flags(true, field.is_dealiased());
    out
}

/// Stokes operator: multiplies mode `K` by `4 pi^2 |K|^2 / L^2`.
pub fn apply_a(field: &SpectralField) -> SpectralField {
    let grid = *field.grid();
    field.scale_by_shell(|k2| grid.eigenvalue(k2))
}

/// `(I + alpha_sq A)^{-1}`: multiplies mode `K` by `L^2 / (L^2 + 4 alpha^2 pi^2 |K|^2)`.
pub fn helmholtz_inverse(field: &SpectralField, alpha_sq: f64) -> Result<SpectralField> {
    if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
        return Err(Error::param(
            "alpha_sq",
            format!("must be finite and non-negative, got {alpha_sq}"),
        ));
    }
    Ok(helmholtz_inverse_unchecked(field, alpha_sq))
}

pub(crate) fn helmholtz_inverse_unchecked(field: &SpectralField, alpha_sq: f64) -> SpectralField {
    let l2 = field.grid().length().powi(2);
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    field.scale_by_shell(|k2| l2 / (l2 + four_pi2 * alpha_sq * k2 as f64))
}

/// `(I + alpha_sq A)`, the forward Helmholtz operator.
pub fn helmholtz_forward(field: &SpectralField, alpha_sq: f64) -> SpectralField {
    let grid = *field.grid();
    field.scale_by_shell(|k2| 1.0 + alpha_sq * grid.eigenvalue(k2))
}

/// `P_N`: keeps exactly the modes with `0 < |K| < N`.
pub fn low_mode_project(field: &SpectralField, cutoff: u32) -> SpectralField {
    low_mode_project_with(field, cutoff, ModeRule::Strict)
}

pub fn low_mode_project_with(field: &SpectralField, cutoff: u32, rule: ModeRule) -> SpectralField {
    let grid = *field.grid();
    let mut out = field.retain_modes(|k| rule.contains(norm_sq(k), cutoff));
    let all_kept_dealiased = grid
        .modes()
        .filter(|(_, k)| rule.contains(norm_sq(*k), cutoff))
        .all(|(_, k)| grid.is_dealiased_mode(k) || !grid.is_retained(k));
    out.set_flags(
        field.is_divergence_free(),
        field.is_dealiased() || all_kept_dealiased,
    );
    out
}

#[inline]
fn sobolev_weight(grid: &GridSpec, k2: i64, s: f64) -> f64 {
    let lam = grid.eigenvalue(k2);
    if s == 0.0 {
        1.0
    } else if s.fract() == 0.0 && s.abs() <= 8.0 {
        lam.powi(s as i32)
    } else {
        lam.powf(s)
    }
}

/// `L^3 sum_K (2 pi |K| / L)^{2s} |u_K|^2`.
pub fn sobolev_norm_sq(field: &SpectralField, s: f64) -> f64 {
    let grid = *field.grid();
    let comps = field.components();
    let mut acc = 0.0;
    grid.for_each_mode(|idx, _, k2| {
        if k2 == 0 {
            return;
        }
        let m = comps[0][idx].norm_sqr() + comps[1][idx].norm_sqr() + comps[2][idx].norm_sqr();
        if m != 0.0 {
            acc += sobolev_weight(&grid, k2, s) * m;
        }
    });
    grid.volume() * acc
}

/// `L^3 sum_K (2 pi |K| / L)^{2s} u_K . conj(v_K)`; the imaginary part
/// cancels between `K` and `-K` and is dropped.
pub fn inner_product(a: &SpectralField, b: &SpectralField, s: f64) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    Ok(inner_product_unchecked(a, b, s))
}

pub(crate) fn inner_product_unchecked(a: &SpectralField, b: &SpectralField, s: f64) -> f64 {
    let grid = *a.grid();
    let ca = a.components();
    let cb = b.components();
    let mut acc = 0.0;
    grid.for_each_mode(|idx, _, k2| {
        if k2 == 0 {
            return;
        }
        let mut re = 0.0;
        for comp in 0..3 {
            let x: Complex64 = ca[comp][idx];
            let y: Complex64 = cb[comp][idx];
            re += x.re * y.re + x.im * y.im;
        }
        if re != 0.0 {
            acc += sobolev_weight(&grid, k2, s) * re;
        }
    });
    grid.volume() * acc
}

/// `||u||`, `||grad u||` and `||A u||` in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub l2: f64,
    pub grad: f64,
    pub stokes: f64,
}

pub fn field_norms(field: &SpectralField) -> FieldNorms {
    FieldNorms {
        l2: sobolev_norm_sq(field, 0.0).sqrt(),
        grad: sobolev_norm_sq(field, 1.0).sqrt(),
        stokes: sobolev_norm_sq(field, 2.0).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::field::ZERO_COEFF;
    use crate::spectral::grid::Wavevector;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit_grid() -> GridSpec {
        GridSpec::new(1.0, 8, 1.0).unwrap()
    }

    #[test]
    fn leray_single_mode_by_hand() {
        let g = unit_grid();
        let u = SpectralField::from_modes(g, [([1, 0, 0], [c(1.0), c(1.0), c(0.0)])]).unwrap();
        let p = leray_project(&u);
        let got = p.coeff([1, 0, 0]).unwrap();
        assert_eq!(got, [c(0.0), c(1.0), c(0.0)]);
        assert!(p.is_divergence_free());
    }

    #[test]
    fn leray_kills_gradients() {
        let g = unit_grid();
        // u_K = i K phi_K
        let modes: Vec<_> = [([1, 2, -1], 0.7), ([2, 0, 3], -1.3), ([0, 1, 1], 0.2)]
            .into_iter()
            .map(|(k, phi): (Wavevector, f64)| {
                let i = Complex64::new(0.0, phi);
                (k, [i * k[0] as f64, i * k[1] as f64, i * k[2] as f64])
            })
            .collect();
        let grad = SpectralField::from_modes(g, modes).unwrap();
        assert!(leray_project(&grad).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn stokes_multiplier_values() {
        let g = unit_grid();
        let u = SpectralField::from_modes(g, [([1, 0, 0], [c(0.0), c(1.0), c(0.0)])]).unwrap();
        let au = apply_a(&u);
        assert!((au.coeff([1, 0, 0]).unwrap()[1].re - 39.47841760435743).abs() < 1e-12);
        assert!(apply_a(&SpectralField::zeros(g)).is_zero());

        let g = GridSpec::new(2.0 * PI, 8, 1.0).unwrap();
        let u = SpectralField::from_modes(g, [([1, 1, 0], [c(1.0), c(-1.0), c(0.0)])]).unwrap();
        let au = apply_a(&u);
        assert!((au.coeff([1, 1, 0]).unwrap()[0].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn helmholtz_inverse_factor_and_identity() {
        let g = unit_grid();
        let u = SpectralField::from_modes(g, [([1, 0, 0], [c(0.0), c(1.0), c(0.0)])]).unwrap();
        let h = helmholtz_inverse(&u, 1.0).unwrap();
        let expected = 1.0 / (1.0 + 4.0 * PI * PI);
        assert!((h.coeff([1, 0, 0]).unwrap()[1].re - expected).abs() < 1e-15);
        // the commonly quoted 0.024707 agrees to four significant digits
        assert!((expected - 0.024707).abs() < 5e-6);
        assert_eq!(helmholtz_inverse(&u, 0.0).unwrap(), u);
        assert!(helmholtz_inverse(&u, -1e-3).is_err());
    }

    #[test]
    fn low_mode_projection_is_strict() {
        let g = unit_grid();
        let u = SpectralField::from_modes(
            g,
            [
                ([1, 0, 0], [c(0.0), c(1.0), c(0.0)]),
                ([0, 2, 0], [c(1.0), c(0.0), c(0.0)]),
            ],
        )
        .unwrap();
        assert!(low_mode_project(&u, 1).is_zero());
        let p = low_mode_project(&u, 2);
        assert_eq!(p.coeff([1, 0, 0]).unwrap()[1], c(1.0));
        assert_eq!(p.coeff([0, 2, 0]).unwrap(), ZERO_COEFF);
        let inclusive = low_mode_project_with(&u, 2, ModeRule::Inclusive);
        assert_eq!(inclusive.coeff([0, 2, 0]).unwrap()[0], c(1.0));
    }

    #[test]
    fn parseval_pair_and_pairings() {
        let g = unit_grid();
        let cval = Complex64::new(0.3, -0.4);
        let u = SpectralField::from_modes(g, [([1, 2, 0], [c(0.0), c(0.0), cval])]).unwrap();
        // u_K = c and u_{-K} = conj(c)
        let expected = 2.0 * g.volume() * cval.norm_sqr();
        assert!((sobolev_norm_sq(&u, 0.0) - expected).abs() < 1e-15);
        assert_eq!(sobolev_norm_sq(&SpectralField::zeros(g), 1.5), 0.0);

        // (u, Au)_{s} = ||u||^2_{s+1}; for this single shell lambda_K = 20 pi^2 * ... by hand
        let lam = 4.0 * PI * PI * 5.0;
        let au = apply_a(&u);
        let s1 = inner_product(&u, &au, 1.0).unwrap();
        assert!((s1 - expected * lam * lam).abs() < 1e-9 * s1);
        assert!((s1 - sobolev_norm_sq(&u, 2.0)).abs() < 1e-12 * s1);
        let s0 = inner_product(&u, &au, 0.0).unwrap();
        assert!((s0 - expected * lam).abs() < 1e-12 * s0);

        let v = SpectralField::from_modes(g, [([2, 1, 0], [c(0.0), c(0.0), cval])]).unwrap();
        assert_eq!(inner_product(&u, &v, 0.0).unwrap(), 0.0);
        let other = SpectralField::zeros(GridSpec::new(2.0, 8, 1.0).unwrap());
        assert!(inner_product(&u, &other, 0.0).is_err());
    }
}
