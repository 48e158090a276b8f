use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer wavevector `K` on the Fourier lattice.
pub type Wavevector = [i64; 3];

/// Standard two-thirds truncation for quadratic products.
pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

/// Periodic box `[0, L]^3` resolved with `n_grid` points per axis.
///
/// Coefficients are stored in FFT order: index `i` along an axis carries
/// wavenumber `i` for `i < n/2` and `i - n` otherwise. The Nyquist index
/// `n/2` is never populated, so the retained lattice `|K_i| < n/2` is
/// symmetric under `K -> -K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    length: f64,
    n_grid: usize,
    dealias_fraction: f64,
}

impl GridSpec {
    pub fn new(length: f64, n_grid: usize, dealias_fraction: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        if n_grid < 4 || !n_grid.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_grid must be an even integer >= 4, got {n_grid}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias_fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(Self {
            length,
            n_grid,
            dealias_fraction,
        })
    }

    /// `2*pi` box with the default two-thirds rule.
    pub fn periodic_2pi(n_grid: usize) -> Result<Self> {
        Self::new(2.0 * PI, n_grid, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Number of stored coefficients per component.
    pub fn len(&self) -> usize {
        self.n_grid * self.n_grid * self.n_grid
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half(&self) -> i64 {
        (self.n_grid / 2) as i64
    }

    /// Box volume `L^3`, the prefactor of every Parseval sum.
    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Poincare constant `4 pi^2 / L^2`.
    pub fn lambda1(&self) -> f64 {
        4.0 * PI * PI / (self.length * self.length)
    }

    /// Eigenvalue of the Stokes operator on the shell `|K|^2 = k2`.
    #[inline]
    pub fn eigenvalue(&self, k2: i64) -> f64 {
        self.lambda1() * k2 as f64
    }

    /// `2 pi / L`, converting integer wavevectors to physical wavenumbers.
    #[inline]
    pub fn wavenumber_scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n_grid;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    fn axis_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n_grid as i64) as usize
    }

    /// Flat index of `K`, or `None` when `K` lies outside the retained lattice.
    pub fn index_of(&self, k: Wavevector) -> Option<usize> {
        let h = self.half();
        if k.iter().any(|c| c.abs() >= h) {
            return None;
        }
        Some(self.flat(
            self.axis_index(k[0]),
            self.axis_index(k[1]),
            self.axis_index(k[2]),
        ))
    }

    #[inline]
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n_grid + iy) * self.n_grid + iz
    }

    #[inline]
    pub fn mode(&self, idx: usize) -> Wavevector {
        let n = self.n_grid;
        let iz = idx % n;
        let iy = (idx / n) % n;
        let ix = idx / (n * n);
        [
            self.wavenumber(ix),
            self.wavenumber(iy),
            self.wavenumber(iz),
        ]
    }

    /// Flat index of `-K` for the mode stored at `idx`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n_grid;
        let iz = idx % n;
        let iy = (idx / n) % n;
        let ix = idx / (n * n);
        self.flat((n - ix) % n, (n - iy) % n, (n - iz) % n)
    }

    /// `|K_i| < n/2` on every axis (the Nyquist plane is excluded).
    #[inline]
    pub fn is_retained(&self, k: Wavevector) -> bool {
        let h = self.half();
        k.iter().all(|c| c.abs() < h)
    }

    /// Per-axis cutoff `dealias_fraction * n/2`; modes with `|K_i|` at or
    /// beyond it are zeroed after every quadratic product.
    pub fn dealias_cutoff(&self) -> f64 {
        self.dealias_fraction * (self.n_grid / 2) as f64
    }

    #[inline]
    pub fn is_dealiased_mode(&self, k: Wavevector) -> bool {
        let cut = self.dealias_cutoff();
        self.is_retained(k) && k.iter().all(|c| (c.abs() as f64) < cut)
    }

    /// Largest per-axis wavenumber kept by the dealias rule.
    pub fn max_dealiased_wavenumber(&self) -> Result<i64> {
        let cut = self.dealias_cutoff();
        let kmax = (cut.ceil() as i64 - 1).min(self.half() - 1);
        if kmax < 1 {
            return Err(Error::DealiasTooCoarse {
                n_grid: self.n_grid,
                cutoff: cut,
            });
        }
        Ok(kmax)
    }

    /// Iterates `(flat index, K)` over the whole storage, Nyquist included.
    pub fn modes(&self) -> impl Iterator<Item = (usize, Wavevector)> + '_ {
        (0..self.len()).map(move |idx| (idx, self.mode(idx)))
    }

    /// Visits `(flat index, K, |K|^2)` in storage order; the fast path for
    /// per-mode kernels.
    #[inline]
    pub fn for_each_mode<F: FnMut(usize, Wavevector, i64)>(&self, mut f: F) {
        let n = self.n_grid;
        let mut idx = 0;
        for ix in 0..n {
            let kx = self.wavenumber(ix);
            for iy in 0..n {
                let ky = self.wavenumber(iy);
                let kxy = kx * kx + ky * ky;
                for iz in 0..n {
                    let kz = self.wavenumber(iz);
                    f(idx, [kx, ky, kz], kxy + kz * kz);
                    idx += 1;
                }
            }
        }
    }

    /// `|K|^2` per flat index, with `-1` marking K = 0 and the Nyquist
    /// planes. Shared between all grids of the same resolution.
    pub fn shell_table(&self) -> Arc<Vec<i64>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<i64>>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("shell table cache poisoned");
        guard
            .entry(self.n_grid)
            .or_insert_with(|| {
                let h = self.half();
                let mut table = vec![-1; self.len()];
                self.for_each_mode(|idx, k, k2| {
                    if k2 > 0 && k.iter().all(|c| c.abs() < h) {
                        table[idx] = k2;
                    }
                });
                Arc::new(table)
            })
            .clone()
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{n}^3 grid, L = {l}, dealias {d:.4}",
            n = self.n_grid,
            l = self.length,
            d = self.dealias_fraction
        )
    }
}

#[inline]
pub fn norm_sq(k: Wavevector) -> i64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}
