use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::grid::{GridSpec, Wavevector};
use crate::error::{Error, Result};

/// A single complex 3-vector coefficient `u_K`.
pub type Coeff = [Complex64; 3];

pub const ZERO_COEFF: Coeff = [Complex64 { re: 0.0, im: 0.0 }; 3];

/// Real, zero-mean periodic vector field stored as Fourier coefficients.
///
/// The K = 0 mode and the Nyquist planes are always zero. Hermitian symmetry
/// `u_K = conj(u_{-K})` is maintained by every constructor and operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    data: [Vec<Complex64>; 3],
    divergence_free: bool,
    dealiased: bool,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            data: [
                vec![Complex64::default(); n],
                vec![Complex64::default(); n],
                vec![Complex64::default(); n],
            ],
            divergence_free: true,
            dealiased: true,
        }
    }

    /// Builds a field from a list of modes; each `(K, c)` also sets
    /// `u_{-K} = conj(c)`. Later entries overwrite earlier ones.
    pub fn from_modes<I>(grid: GridSpec, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Wavevector, Coeff)>,
    {
        let mut field = Self::zeros(grid);
        for (k, c) in modes {
            if k == [0, 0, 0] {
                return Err(Error::param("mode", "the K = 0 mode is excluded"));
            }
            let idx = grid.index_of(k).ok_or_else(|| {
                Error::param("mode", format!("wavevector {k:?} is outside the lattice"))
            })?;
            let cidx = grid.conjugate_index(idx);
            for (comp, value) in c.iter().enumerate() {
                field.data[comp][idx] = *value;
                field.data[comp][cidx] = value.conj();
            }
        }
        field.refresh_flags();
        Ok(field)
    }

    /// Wraps raw coefficient storage, zeroing excluded modes and restoring
    /// Hermitian symmetry by averaging conjugate pairs.
    pub fn from_raw(grid: GridSpec, data: [Vec<Complex64>; 3]) -> Result<Self> {
        if data.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid(format!(
                "coefficient storage does not match {grid}"
            )));
        }
        let mut field = Self {
            grid,
            data,
            divergence_free: false,
            dealiased: false,
        };
        field.enforce_hermitian();
        field.refresh_flags();
        Ok(field)
    }

    pub(crate) fn from_parts(
        grid: GridSpec,
        data: [Vec<Complex64>; 3],
        divergence_free: bool,
        dealiased: bool,
    ) -> Self {
        debug_assert!(data.iter().all(|c| c.len() == grid.len()));
        Self {
            grid,
            data,
            divergence_free,
            dealiased,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.data[i]
    }

    pub(crate) fn components(&self) -> &[Vec<Complex64>; 3] {
        &self.data
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.data
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub fn is_dealiased(&self) -> bool {
        self.dealiased
    }

    #[inline]
    pub fn coeff_at(&self, idx: usize) -> Coeff {
        [self.data[0][idx], self.data[1][idx], self.data[2][idx]]
    }

    pub fn coeff(&self, k: Wavevector) -> Option<Coeff> {
        self.grid.index_of(k).map(|idx| self.coeff_at(idx))
    }

    /// Rebuilds the field mode by mode. `f` receives `(K, |K|^2, u_K)`; it is
    /// never called on K = 0 or on the Nyquist planes.
    pub fn map_modes<F>(&self, mut f: F) -> Self
    where
        F: FnMut(Wavevector, i64, Coeff) -> Coeff,
    {
        let mut out = Self::zeros(self.grid);
        let h = self.grid.half();
        self.grid.for_each_mode(|idx, k, k2| {
            if k2 == 0 || k.iter().any(|c| c.abs() >= h) {
                return;
            }
            let c = f(k, k2, self.coeff_at(idx));
            for (comp, value) in c.iter().enumerate() {
                out.data[comp][idx] = *value;
            }
        });
        out.divergence_free = false;
        out.dealiased = false;
        out
    }

    /// Multiplies each mode by a real factor depending only on `|K|^2`.
    /// Diagonal multipliers keep both flags.
    pub fn scale_by_shell<F>(&self, mut factor: F) -> Self
    where
        F: FnMut(i64) -> f64,
    {
        let mut out = self.clone();
        let h = self.grid.half();
        // shells repeat heavily; memoize the last factor
        let mut last = (-1_i64, 0.0);
        self.grid.for_each_mode(|idx, k, k2| {
            let s = if k2 == 0 || k.iter().any(|c| c.abs() >= h) {
                0.0
            } else if last.0 == k2 {
                last.1
            } else {
                let v = factor(k2);
                last = (k2, v);
                v
            };
            for comp in out.data.iter_mut() {
                comp[idx] *= s;
            }
        });
        out
    }

    /// Keeps the modes for which `keep` holds and zeroes the rest.
    pub fn retain_modes<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(Wavevector) -> bool,
    {
        let mut out = self.clone();
        self.grid.for_each_mode(|idx, k, _| {
            if !keep(k) {
                for comp in out.data.iter_mut() {
                    comp[idx] = Complex64::default();
                }
            }
        });
        out
    }

    /// Zeroes K = 0 and the Nyquist planes and sets each conjugate pair to
    /// the average `(u_K + conj(u_{-K})) / 2`.
    pub fn enforce_hermitian(&mut self) {
        let grid = self.grid;
        for idx in 0..grid.len() {
            let k = grid.mode(idx);
            if k == [0, 0, 0] || !grid.is_retained(k) {
                for comp in self.data.iter_mut() {
                    comp[idx] = Complex64::default();
                }
                continue;
            }
            let cidx = grid.conjugate_index(idx);
            if cidx < idx {
                continue;
            }
            for comp in self.data.iter_mut() {
                let avg = (comp[idx] + comp[cidx].conj()) * 0.5;
                comp[idx] = avg;
                comp[cidx] = avg.conj();
            }
        }
    }

    /// Largest Hermitian defect `|u_K - conj(u_{-K})|` over the lattice.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for idx in 0..self.grid.len() {
            let cidx = self.grid.conjugate_index(idx);
            for comp in &self.data {
                worst = worst.max((comp[idx] - comp[cidx].conj()).norm());
            }
        }
        worst
    }

    /// Largest `|u_K . K| / (|K| |u_K|)` over nonzero modes. Modes far below
    /// the field's largest coefficient are measured against `1e-4` of that
    /// maximum instead, since projection round-off is relative to the
    /// pre-projection magnitude, not to what survives.
    pub fn divergence_defect(&self) -> f64 {
        let floor = 1e-4 * self.max_abs_coeff();
        let mut worst = 0.0_f64;
        self.grid.for_each_mode(|idx, k, k2| {
            if k2 == 0 {
                return;
            }
            let c = self.coeff_at(idx);
            let mag = (c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr()).sqrt();
            if mag == 0.0 {
                return;
            }
            let dot = c[0] * k[0] as f64 + c[1] * k[1] as f64 + c[2] * k[2] as f64;
            worst = worst.max(dot.norm() / ((k2 as f64).sqrt() * mag.max(floor)));
        });
        worst
    }

    /// Recomputes both flags from the coefficients.
    pub fn refresh_flags(&mut self) {
        self.divergence_free = self.divergence_defect() <= 1e-12;
        let grid = self.grid;
        self.dealiased = grid.modes().all(|(idx, k)| {
            grid.is_dealiased_mode(k) || self.data.iter().all(|c| c[idx] == Complex64::default())
        });
    }

    pub(crate) fn set_flags(&mut self, divergence_free: bool, dealiased: bool) {
        self.divergence_free = divergence_free;
        self.dealiased = dealiased;
    }

    /// Largest coefficient magnitude, `NaN`/`inf` propagating.
    pub fn max_abs_coeff(&self) -> f64 {
        let mut worst = 0.0_f64;
        for comp in &self.data {
            for z in comp {
                let m = z.norm();
                if !m.is_finite() {
                    return f64::INFINITY;
                }
                worst = worst.max(m);
            }
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.iter().all(|z| *z == Complex64::default()))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        self.zip_with(other, |x, y| x + y * a)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for comp in out.data.iter_mut() {
            for z in comp.iter_mut() {
                *z *= a;
            }
        }
        out
    }

    /// Combines two fields elementwise. Panics on grid mismatch, which is a
    /// programming error for arithmetic on fields of one simulation.
    pub fn zip_with<F>(&self, other: &SpectralField, mut f: F) -> Self
    where
        F: FnMut(Complex64, Complex64) -> Complex64,
    {
        assert_eq!(
            self.grid, other.grid,
            "field arithmetic on mismatched grids"
        );
        let mut out = self.clone();
        for (dst, src) in out.data.iter_mut().zip(other.data.iter()) {
            for (a, b) in dst.iter_mut().zip(src.iter()) {
                *a = f(*a, *b);
            }
        }
        out.divergence_free = self.divergence_free && other.divergence_free;
        out.dealiased = self.dealiased && other.dealiased;
        out
    }

    /// Largest absolute coefficient difference, for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.grid, other.grid);
        let mut worst = 0.0_f64;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).norm());
            }
        }
        worst
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn from_modes_sets_conjugate_partner() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let f =
            SpectralField::from_modes(g, [([1, 2, 0], [c(1.0, 2.0), c(0.0, 0.0), c(0.0, -1.0)])])
                .unwrap();
        let minus = f.coeff([-1, -2, 0]).unwrap();
        assert_eq!(minus[0], c(1.0, -2.0));
        assert_eq!(minus[2], c(0.0, 1.0));
        assert_eq!(f.hermitian_defect(), 0.0);
    }

    #[test]
    fn zero_mode_and_outside_modes_rejected() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        assert!(SpectralField::from_modes(g, [([0, 0, 0], ZERO_COEFF)]).is_err());
        assert!(SpectralField::from_modes(g, [([4, 0, 0], ZERO_COEFF)]).is_err());
    }

    #[test]
    fn enforce_hermitian_repairs_one_sided_data() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let mut data = [
            vec![Complex64::default(); g.len()],
            vec![Complex64::default(); g.len()],
            vec![Complex64::default(); g.len()],
        ];
        let idx = g.index_of([1, 0, 0]).unwrap();
        data[1][idx] = c(2.0, 0.0);
        data[0][0] = c(5.0, 0.0); // mean mode, must be dropped
        let f = SpectralField::from_raw(g, data).unwrap();
        assert_eq!(f.coeff([1, 0, 0]).unwrap()[1], c(1.0, 0.0));
        assert_eq!(f.coeff([-1, 0, 0]).unwrap()[1], c(1.0, 0.0));
        assert_eq!(f.component(0)[0], Complex64::default());
        assert!(f.is_divergence_free());
    }
}
