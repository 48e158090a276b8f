use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::truth::{read_index, TruthTrajectory};
use crate::spectral::{read_snapshot, Coeff, GridSpec, ModeRule, SpectralField, ZERO_COEFF};

/// Where the observed `P_N u_t` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    /// The solver's analytic `u_t`, projected.
    #[default]
    Exact,
    /// Centered differences of the observed `P_N u`.
    Measured,
}

/// The only view of the truth that the observer side ever receives: `P_N u`
/// and `P_N u_t` on a uniform time grid starting at `t = 0`.
///
/// Only one half of each conjugate pair is stored.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    grid: GridSpec,
    n_obs: u32,
    rule: ModeRule,
    dt: f64,
    support: Arc<Vec<(usize, usize, i64)>>,
    u: Vec<Vec<Coeff>>,
    ut: Vec<Vec<Coeff>>,
    source: DerivativeSource,
}

/// `n_obs` must fit below the grid Nyquist index.
pub fn check_cutoff(grid: &GridSpec, n_obs: u32) -> Result<()> {
    let nyquist = (grid.n_grid() / 2) as u32;
    if n_obs == 0 || n_obs > nyquist {
        return Err(Error::ObservationCutoff { n_obs, nyquist });
    }
    Ok(())
}

impl ObservationStream {
    pub fn new(grid: GridSpec, n_obs: u32, rule: ModeRule, dt: f64) -> Result<Self> {
        check_cutoff(&grid, n_obs)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let mut support = Vec::new();
        let shells = grid.shell_table();
        for (idx, &k2) in shells.iter().enumerate() {
            if k2 < 0 || !rule.contains(k2, n_obs) {
                continue;
            }
            let cidx = grid.conjugate_index(idx);
            if idx < cidx {
                support.push((idx, cidx, k2));
            }
        }
        Ok(Self {
            grid,
            n_obs,
            rule,
            dt,
            support: Arc::new(support),
            u: Vec::new(),
            ut: Vec::new(),
            source: DerivativeSource::Exact,
        })
    }

    pub fn from_trajectory(traj: &TruthTrajectory, n_obs: u32, rule: ModeRule) -> Result<Self> {
        let grid = *traj
            .states
            .first()
            .ok_or_else(|| Error::param("trajectory", "is empty"))?
            .grid();
        let mut s = Self::new(grid, n_obs, rule, traj.dt)?;
        for (u, ut) in traj.states.iter().zip(&traj.derivatives) {
            s.push(u, ut)?;
        }
        Ok(s)
    }

    /// Builds a stream from a trajectory dump, projecting each snapshot as it
    /// is read so the full fields are never held at once.
    pub fn from_dump(
        dir: &Path,
        n_obs: u32,
        rule: ModeRule,
        dealias_fraction: f64,
    ) -> Result<Self> {
        let entries = read_index(dir)?;
        if entries.len() < 2 {
            return Err(Error::param("truth dump", "needs at least two snapshots"));
        }
        let dt = entries[1].time - entries[0].time;
        if entries[0].time.abs() > 1e-12 {
            return Err(Error::TimeGridMismatch(format!(
                "dump starts at t = {} instead of 0",
                entries[0].time
            )));
        }
        let mut stream: Option<Self> = None;
        for (k, e) in entries.iter().enumerate() {
            let expected = k as f64 * dt;
            if (e.time - expected).abs() > 1e-9 * expected.max(1.0) {
                return Err(Error::TimeGridMismatch(format!(
                    "snapshot {} at t = {} breaks the uniform step {dt}",
                    e.file, e.time
                )));
            }
            let u = read_snapshot(&dir.join(&e.file), dealias_fraction)?;
            let ut_name = format!("ut_{}", e.file.trim_start_matches("u_"));
            let ut = read_snapshot(&dir.join(ut_name), dealias_fraction)?;
            let s = match stream.as_mut() {
                Some(s) => s,
                None => stream.insert(Self::new(*u.grid(), n_obs, rule, dt)?),
            };
            s.push(&u, &ut)?;
        }
        Ok(stream.expect("at least two entries"))
    }

    pub fn push(&mut self, u: &SpectralField, ut: &SpectralField) -> Result<()> {
        self.grid.ensure_same(u.grid())?;
        self.grid.ensure_same(ut.grid())?;
        self.u.push(self.gather(u));
        self.ut.push(self.gather(ut));
        Ok(())
    }

    fn gather(&self, f: &SpectralField) -> Vec<Coeff> {
        self.support
            .iter()
            .map(|&(idx, _, _)| f.coeff_at(idx))
            .collect()
    }

    fn scatter(&self, coeffs: &[Coeff], cutoff: u32) -> SpectralField {
        let n3 = self.grid.len();
        let mut data = [
            vec![Complex64::default(); n3],
            vec![Complex64::default(); n3],
            vec![Complex64::default(); n3],
        ];
        for (&(idx, cidx, k2), c) in self.support.iter().zip(coeffs) {
            if !self.rule.contains(k2, cutoff) {
                continue;
            }
            for comp in 0..3 {
                data[comp][idx] = c[comp];
                data[comp][cidx] = c[comp].conj();
            }
        }
        let mut f = SpectralField::from_raw(self.grid, data).expect("storage matches grid");
        f.set_flags(true, true);
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_obs(&self) -> u32 {
        self.n_obs
    }

    pub fn rule(&self) -> ModeRule {
        self.rule
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    /// Node index of `t`, which must coincide with a stored node.
    pub fn node_of(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let k = r.round();
        if k < 0.0 || (r - k).abs() > 1e-8 * r.abs().max(1.0) {
            return Err(Error::TimeGridMismatch(format!(
                "t = {t} is not on the observation grid (dt = {})",
                self.dt
            )));
        }
        let k = k as usize;
        if k >= self.len() {
            return Err(Error::WindowOutsideStream {
                start: t,
                end: t,
                last: self.last_time(),
            });
        }
        Ok(k)
    }

    pub fn ensure_covers(&self, start: f64, end: f64) -> Result<()> {
        if start < -1e-12 || end > self.last_time() * (1.0 + 1e-12) + 1e-12 || end < start {
            return Err(Error::WindowOutsideStream {
                start,
                end,
                last: self.last_time(),
            });
        }
        Ok(())
    }

    /// `P_N u` at node `k`, restricted to cutoff `n <= n_obs`.
    pub fn obs_u(&self, k: usize, cutoff: u32) -> SpectralField {
        self.scatter(&self.u[k], cutoff.min(self.n_obs))
    }

    pub fn obs_ut(&self, k: usize, cutoff: u32) -> SpectralField {
        self.scatter(&self.ut[k], cutoff.min(self.n_obs))
    }

    /// `P_N u(t)` by linear interpolation between the bracketing nodes.
    pub fn obs_u_at(&self, t: f64, cutoff: u32) -> Result<SpectralField> {
        self.ensure_covers(t, t)?;
        let r = t / self.dt;
        let k0 = (r.floor() as usize).min(self.len() - 1);
        let theta = r - k0 as f64;
        if theta.abs() < 1e-12 || k0 + 1 >= self.len() {
            return Ok(self.obs_u(k0, cutoff));
        }
        let mixed: Vec<Coeff> = self.u[k0]
            .iter()
            .zip(&self.u[k0 + 1])
            .map(|(a, b)| {
                let mut c = ZERO_COEFF;
                for i in 0..3 {
                    c[i] = a[i] * (1.0 - theta) + b[i] * theta;
                }
                c
            })
            .collect();
        Ok(self.scatter(&mixed, cutoff.min(self.n_obs)))
    }

    /// `sum over observed K with rule(|K|, cutoff) of f(lambda_K, u_K, ut_K)`,
    /// weighted for both halves of each conjugate pair and by `L^3`.
    pub(crate) fn reduce_node<F>(&self, k: usize, cutoff: u32, mut f: F) -> f64
    where
        F: FnMut(f64, &Coeff, &Coeff) -> f64,
    {
        let mut acc = 0.0;
        for ((&(_, _, k2), u), ut) in self.support.iter().zip(&self.u[k]).zip(&self.ut[k]) {
            if self.rule.contains(k2, cutoff) {
                acc += f(self.grid.eigenvalue(k2), u, ut);
            }
        }
        2.0 * self.grid.volume() * acc
    }

    /// Replaces the stored derivatives by second-order differences of `P_N u`.
    pub fn with_measured_derivative(&self) -> Result<Self> {
        let n = self.len();
        if n < 3 {
            return Err(Error::param(
                "observation stream",
                "measured derivatives need at least three nodes",
            ));
        }
        let h = self.dt;
        let mut ut = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b, c, wa, wb, wc) = if k == 0 {
                (0, 1, 2, -3.0, 4.0, -1.0)
            } else if k == n - 1 {
                (n - 3, n - 2, n - 1, 1.0, -4.0, 3.0)
            } else {
                (k - 1, k, k + 1, -1.0, 0.0, 1.0)
            };
            let row: Vec<Coeff> = (0..self.support.len())
                .map(|m| {
                    let mut out = ZERO_COEFF;
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = (self.u[a][m][i] * wa + self.u[b][m][i] * wb + self.u[c][m][i] * wc)
                            / (2.0 * h);
                    }
                    out
                })
                .collect();
            ut.push(row);
        }
        Ok(Self {
            ut,
            source: DerivativeSource::Measured,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{low_mode_project, random_divfree_field, DecayProfile, RandomFieldSpec};

    fn field(seed: u64) -> SpectralField {
        let g = GridSpec::periodic_2pi(8).unwrap();
        random_divfree_field(&g, &RandomFieldSpec::new(DecayProfile::Flat), seed)
    }

    #[test]
    fn stores_exactly_the_low_modes() {
        let u = field(1);
        let ut = field(2);
        let mut s = ObservationStream::new(*u.grid(), 3, ModeRule::Strict, 0.1).unwrap();
        s.push(&u, &ut).unwrap();
        assert_eq!(s.obs_u(0, 3), low_mode_project(&u, 3));
        assert_eq!(s.obs_ut(0, 2), low_mode_project(&ut, 2));
        assert_eq!(s.obs_u(0, 9), low_mode_project(&u, 3));
    }

    #[test]
    fn cutoff_above_nyquist_rejected() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        assert!(matches!(
            ObservationStream::new(g, 5, ModeRule::Strict, 0.1),
            Err(Error::ObservationCutoff { .. })
        ));
        assert!(ObservationStream::new(g, 4, ModeRule::Strict, 0.1).is_ok());
    }

    #[test]
    fn interpolation_and_node_lookup() {
        let (a, b) = (field(3), field(4));
        let mut s = ObservationStream::new(*a.grid(), 3, ModeRule::Strict, 0.5).unwrap();
        s.push(&a, &a).unwrap();
        s.push(&b, &b).unwrap();
        let mid = s.obs_u_at(0.25, 3).unwrap();
        let expect = (&low_mode_project(&a, 3) + &low_mode_project(&b, 3)).scaled(0.5);
        assert!(mid.max_abs_diff(&expect) < 1e-15);
        assert_eq!(s.node_of(0.5).unwrap(), 1);
        assert!(s.node_of(0.3).is_err());
        assert!(s.node_of(1.0).is_err());
        assert!(s.obs_u_at(0.6, 3).is_err());
    }

    #[test]
    fn measured_derivative_is_exact_for_quadratics() {
        // u(t) = (1 + t + t^2) a has u_t = (1 + 2t) a
        let a = field(5);
        let g = *a.grid();
        let dt = 0.1;
        let mut s = ObservationStream::new(g, 3, ModeRule::Strict, dt).unwrap();
        for k in 0..5 {
            let t = k as f64 * dt;
            s.push(&a.scaled(1.0 + t + t * t), &SpectralField::zeros(g))
                .unwrap();
        }
        let m = s.with_measured_derivative().unwrap();
        for k in 0..5 {
            let t = k as f64 * dt;
            let expect = low_mode_project(&a, 3).scaled(1.0 + 2.0 * t);
            assert!(m.obs_ut(k, 3).max_abs_diff(&expect) < 1e-12);
        }
        assert_eq!(m.derivative_source(), DerivativeSource::Measured);
    }
}
