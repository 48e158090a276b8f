use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::{norm_sq, GridSpec};
use super::ops::sobolev_norm_sq;

/// Radial amplitude law for random coefficients, as a function of `|K|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DecayProfile {
    /// `|K|^{-p}`.
    Power(f64),
    /// `exp(-|K|^2 / k0^2)`.
    Gaussian {
        k0: f64,
    },
    Flat,
}

impl DecayProfile {
    fn amplitude(self, k2: i64) -> f64 {
        let k2 = k2 as f64;
        match self {
            DecayProfile::Power(p) => k2.powf(-0.5 * p),
            DecayProfile::Gaussian { k0 } => (-k2 / (k0 * k0)).exp(),
            DecayProfile::Flat => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub profile: DecayProfile,
    /// Only modes with `|K| <= max_wavenumber` are excited.
    pub max_wavenumber: Option<f64>,
    /// Rescale so that `||u|| = l2_norm`.
    pub l2_norm: Option<f64>,
}

impl RandomFieldSpec {
    pub fn new(profile: DecayProfile) -> Self {
        Self {
            profile,
            max_wavenumber: None,
            l2_norm: None,
        }
    }

    pub fn with_max_wavenumber(mut self, kmax: f64) -> Self {
        self.max_wavenumber = Some(kmax);
        self
    }

    pub fn normalized(mut self, l2_norm: f64) -> Self {
        self.l2_norm = Some(l2_norm);
        self
    }
}

/// Reproducible random real field, divergence-free and supported on the
/// dealiased lattice (so it is a valid input to the bilinear term).
pub fn random_divfree_field(grid: &GridSpec, spec: &RandomFieldSpec, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n3 = grid.len();
    let mut data = [
        vec![Complex64::default(); n3],
        vec![Complex64::default(); n3],
        vec![Complex64::default(); n3],
    ];
    let kcap = spec.max_wavenumber.map(|k| k * k);
    for idx in 0..n3 {
        let k = grid.mode(idx);
        let k2 = norm_sq(k);
        let cidx = grid.conjugate_index(idx);
        if k2 == 0 || cidx < idx || !grid.is_dealiased_mode(k) {
            continue;
        }
        if kcap.is_some_and(|cap| k2 as f64 > cap) {
            continue;
        }
        let amp = spec.profile.amplitude(k2);
        let mut c = [Complex64::default(); 3];
        for z in c.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z = Complex64::new(re, im) * amp;
        }
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let dot = (c[0] * kf[0] + c[1] * kf[1] + c[2] * kf[2]) / k2 as f64;
        for comp in 0..3 {
            let v = c[comp] - dot * kf[comp];
            data[comp][idx] = v;
            data[comp][cidx] = v.conj();
        }
    }
    let mut field = SpectralField::from_parts(*grid, data, true, true);
    if let Some(target) = spec.l2_norm {
        let norm = sobolev_norm_sq(&field, 0.0).sqrt();
        if norm > 0.0 {
            field = field.scaled(target / norm);
        }
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_field() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Power(2.0));
        let a = random_divfree_field(&g, &spec, 42);
        let b = random_divfree_field(&g, &spec, 42);
        assert_eq!(a, b);
        assert_ne!(a, random_divfree_field(&g, &spec, 43));
    }

    #[test]
    fn invariants_hold() {
        let g = GridSpec::periodic_2pi(16).unwrap();
        let f = random_divfree_field(&g, &RandomFieldSpec::new(DecayProfile::Flat), 1);
        assert_eq!(f.hermitian_defect(), 0.0);
        assert!(f.divergence_defect() < 1e-12);
        assert_eq!(f.component(0)[0], Complex64::default());
        let mut check = f.clone();
        check.refresh_flags();
        assert!(check.is_divergence_free() && check.is_dealiased());
    }

    #[test]
    fn normalization_is_honoured() {
        let g = GridSpec::new(3.0, 8, 2.0 / 3.0).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Gaussian { k0: 2.0 }).normalized(1.0);
        let f = random_divfree_field(&g, &spec, 9);
        assert!((sobolev_norm_sq(&f, 0.0).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wavenumber_cap_limits_support() {
        let g = GridSpec::periodic_2pi(16).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Flat).with_max_wavenumber(2.0);
        let f = random_divfree_field(&g, &spec, 5);
        for (idx, k) in g.modes() {
            if norm_sq(k) > 4 {
                assert_eq!(f.coeff_at(idx), crate::spectral::field::ZERO_COEFF);
            }
        }
    }
}
