use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    apply_a, leray_project, norm_sq, sobolev_norm_sq, Coeff, GridSpec, SpectralField, Wavevector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    None,
    /// A fixed Beltrami forcing on the listed modes.
    SteadyLowmode,
    /// `f = nu A (u* + alpha^2 A u*)` for a Beltrami flow `u*` on one shell,
    /// so that `u*` is an exact steady state.
    #[default]
    ManufacturedSteady,
}

impl ForcingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ForcingKind::None => "none",
            ForcingKind::SteadyLowmode => "steady_lowmode",
            ForcingKind::ManufacturedSteady => "manufactured_steady",
        }
    }
}

impl fmt::Display for ForcingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForcingKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(ForcingKind::None),
            "steady_lowmode" => Ok(ForcingKind::SteadyLowmode),
            "manufactured_steady" => Ok(ForcingKind::ManufacturedSteady),
            other => Err(format!(
                "unknown forcing kind `{other}` (expected none, steady_lowmode or manufactured_steady)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub kind: ForcingKind,
    /// Coefficient magnitude of each Beltrami mode: of `u*` for the
    /// manufactured kind, of `f` itself for `steady_lowmode`.
    pub amplitude: f64,
    pub modes: Vec<Wavevector>,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self {
            kind: ForcingKind::ManufacturedSteady,
            amplitude: 0.25,
            modes: vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        }
    }
}

impl ForcingSpec {
    pub fn none() -> Self {
        Self {
            kind: ForcingKind::None,
            amplitude: 0.0,
            modes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub nu: f64,
    pub alpha: f64,
    pub forcing: ForcingSpec,
}

impl PhysicalParams {
    pub fn new(nu: f64, alpha: f64, forcing: ForcingSpec) -> Result<Self> {
        let p = Self { nu, alpha, forcing };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::param(
                "nu",
                format!("must be positive, got {}", self.nu),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if !self.forcing.amplitude.is_finite() {
            return Err(Error::param("forcing.amplitude", "must be finite"));
        }
        Ok(())
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha * self.alpha
    }
}

/// Unit complex vector `h` with `i K x h = |K| h`: the positive-helicity
/// Beltrami polarization for wavevector `K`.
pub fn beltrami_polarization(k: Wavevector) -> Coeff {
    let kn = (norm_sq(k) as f64).sqrt();
    let kh = [k[0] as f64 / kn, k[1] as f64 / kn, k[2] as f64 / kn];
    let a = if kh[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let cross = |x: [f64; 3], y: [f64; 3]| {
        [
            x[1] * y[2] - x[2] * y[1],
            x[2] * y[0] - x[0] * y[2],
            x[0] * y[1] - x[1] * y[0],
        ]
    };
    let mut e1 = cross(a, kh);
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|c| *c /= n1);
    let e2 = cross(kh, e1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(e1[0] * s, e2[0] * s),
        Complex64::new(e1[1] * s, e2[1] * s),
        Complex64::new(e1[2] * s, e2[2] * s),
    ]
}

/// Sum of Beltrami modes, each with coefficient magnitude `amplitude`.
pub fn beltrami_field(
    grid: &GridSpec,
    modes: &[Wavevector],
    amplitude: f64,
) -> Result<SpectralField> {
    let entries = modes.iter().map(|&k| {
        let h = beltrami_polarization(k);
        (k, [h[0] * amplitude, h[1] * amplitude, h[2] * amplitude])
    });
    let mut field = SpectralField::from_modes(*grid, entries.collect::<Vec<_>>())?;
    field.refresh_flags();
    Ok(field)
}

/// A resolved, time-independent forcing.
#[derive(Debug, Clone)]
pub struct Forcing {
    /// Leray-projected forcing field.
    pub field: SpectralField,
    /// The exact steady state for manufactured forcing.
    pub steady_state: Option<SpectralField>,
    /// `sup_s ||f(s)||`.
    pub sup_norm: f64,
}

impl Forcing {
    pub fn build(grid: &GridSpec, params: &PhysicalParams) -> Result<Self> {
        params.validate()?;
        let spec = &params.forcing;
        let (field, steady_state) = match spec.kind {
            ForcingKind::None => (SpectralField::zeros(*grid), None),
            ForcingKind::SteadyLowmode => {
                check_modes(grid, &spec.modes)?;
                (beltrami_field(grid, &spec.modes, spec.amplitude)?, None)
            }
            ForcingKind::ManufacturedSteady => {
                check_modes(grid, &spec.modes)?;
                let shell = norm_sq(spec.modes[0]);
                if spec.modes.iter().any(|&k| norm_sq(k) != shell) {
                    return Err(Error::param(
                        "forcing.modes",
                        "manufactured_steady needs all modes on one shell |K| = const",
                    ));
                }
                let ustar = beltrami_field(grid, &spec.modes, spec.amplitude)?;
                let inner = ustar.axpy(params.alpha_sq(), &apply_a(&ustar));
                let f = apply_a(&inner).scaled(params.nu);
                (f, Some(ustar))
            }
        };
        let field = leray_project(&field);
        let sup_norm = sobolev_norm_sq(&field, 0.0).sqrt();
        Ok(Self {
            field,
            steady_state,
            sup_norm,
        })
    }
}

fn check_modes(grid: &GridSpec, modes: &[Wavevector]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::param(
            "forcing.modes",
            "at least one mode is required",
        ));
    }
    for &k in modes {
        if norm_sq(k) == 0 || !grid.is_dealiased_mode(k) {
            return Err(Error::param(
                "forcing.modes",
                format!("{k:?} is zero or outside the dealiased lattice of the {grid}"),
            ));
        }
    }
    Ok(())
}
