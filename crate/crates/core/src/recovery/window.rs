//! Window integrals and the update of `beta^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nudging::ObservationStream;
use crate::spectral::bilinear::advect;
use crate::spectral::ops::inner_product_unchecked;
use crate::spectral::{ModeRule, SpectralField};

/// Relative size below which a window integral counts as zero.
pub const DEGENERACY_RTOL: f64 = 1e-12;

/// Composite trapezoid rule over samples pushed in time order.
#[derive(Debug, Clone, Default)]
pub struct Trapezoid {
    last: Option<(f64, f64)>,
    sum: f64,
}

impl Trapezoid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some((t0, v0)) = self.last {
            if t <= t0 {
                return Err(Error::TimeGridMismatch(format!(
                    "quadrature nodes must increase, got {t} after {t0}"
                )));
            }
            self.sum += 0.5 * (t - t0) * (v0 + value);
        }
        self.last = Some((t, value));
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn window_nodes(obs: &ObservationStream, t_hat: f64, t_next: f64) -> Result<(usize, usize)> {
    obs.ensure_covers(t_hat, t_next)?;
    let a = obs.node_of(t_hat)?;
    let b = obs.node_of(t_next)?;
    Ok((a, b))
}

fn integrate_nodes<F: FnMut(usize) -> f64>(
    obs: &ObservationStream,
    a: usize,
    b: usize,
    mut f: F,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let interior: f64 = (a + 1..b).map(&mut f).sum();
    obs.dt() * (interior + 0.5 * (f(a) + f(b)))
}

/// `||grad P_N (u_t + nu A u)||^2` at stream node `k`.
pub fn h_grad_sq(obs: &ObservationStream, k: usize, cutoff: u32, nu: f64) -> f64 {
    obs.reduce_node(k, cutoff, |lam, u, ut| {
        let mut s = 0.0;
        for i in 0..3 {
            s += (ut[i] + u[i] * (nu * lam)).norm_sqr();
        }
        lam * s
    })
}

/// `int_{t_hat}^{t_next} ||grad P_N (u_t + nu A u)||^2 ds` by the trapezoid
/// rule on the stream's nodes.
pub fn delta_n(
    obs: &ObservationStream,
    cutoff: u32,
    nu: f64,
    t_hat: f64,
    t_next: f64,
) -> Result<f64> {
    let (a, b) = window_nodes(obs, t_hat, t_next)?;
    Ok(integrate_nodes(obs, a, b, |k| {
        h_grad_sq(obs, k, cutoff, nu)
    }))
}

/// `delta_n` with cutoff `N_tilde`, averaged over the window.
pub fn zeta_n(
    obs: &ObservationStream,
    n_tilde: u32,
    nu: f64,
    t_hat: f64,
    t_next: f64,
) -> Result<f64> {
    let len = t_next - t_hat;
    if len <= 0.0 {
        return Err(Error::param(
            "window",
            format!("must have positive length, got {len}"),
        ));
    }
    Ok(delta_n(obs, n_tilde, nu, t_hat, t_next)? / len)
}

/// Threshold under which `delta_n` is treated as zero: a tiny multiple of the
/// window length times the mean size of the two pieces of the integrand, so
/// exact cancellation of `u_t` against `-nu A u` is detected.
pub fn degeneracy_threshold(
    obs: &ObservationStream,
    cutoff: u32,
    nu: f64,
    t_hat: f64,
    t_next: f64,
) -> Result<f64> {
    let (a, b) = window_nodes(obs, t_hat, t_next)?;
    let len = t_next - t_hat;
    let scale = if len > 0.0 {
        integrate_nodes(obs, a, b, |k| {
            obs.reduce_node(k, cutoff, |lam, u, ut| {
                let mut s = 0.0;
                for i in 0..3 {
                    s += ut[i].norm_sqr() + (u[i] * (nu * lam)).norm_sqr();
                }
                lam * s
            })
        }) / len
    } else {
        0.0
    };
    Ok(DEGENERACY_RTOL * len * scale.max(1.0))
}

/// The seven pieces of the update integrand at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateTerms {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
    pub t6: f64,
    pub t7: f64,
}

impl UpdateTerms {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4 + self.t5 + self.t6 + self.t7
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.t1, self.t2, self.t3, self.t4, self.t5, self.t6, self.t7,
        ]
    }
}

/// Observer and observation data at one quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct NodeData<'a> {
    pub w: &'a SpectralField,
    pub w_t: &'a SpectralField,
    pub obs_u: &'a SpectralField,
    pub obs_ut: &'a SpectralField,
}

/// Parameters of the observer run that enter the integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub beta_sq: f64,
    pub eta: f64,
    pub cutoff: u32,
    pub rule: ModeRule,
    pub nu: f64,
}

/// Evaluates the update integrand with `g = w - u`, `p = P_N g` (observable)
/// and `h = P_N (u_t + nu A u)`. The nonlinear piece uses
/// `B(w, w) - B(w - p, w - p) = B(w, p) + B(p, w - p)`, which vanishes
/// exactly when `p = 0`.
pub fn update_integrand(node: &NodeData<'_>, prm: &UpdateParams) -> Result<UpdateTerms> {
    let grid = *node.w.grid();
    for f in [node.w_t, node.obs_u, node.obs_ut] {
        grid.ensure_same(f.grid())?;
    }
    let shells = grid.shell_table();
    let (ws, wts) = (node.w.components(), node.w_t.components());
    let (us, uts) = (node.obs_u.components(), node.obs_ut.components());
    let n3 = grid.len();
    let mut p = [
        vec![Default::default(); n3],
        vec![Default::default(); n3],
        vec![Default::default(); n3],
    ];
    let mut h = p.clone();
    let (mut s_dg0, mut s_dg1, mut s_p0, mut s_p1, mut s_p2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut any_p = false;
    for (idx, &k2) in shells.iter().enumerate() {
        if !prm.rule.contains(k2, prm.cutoff) {
            continue;
        }
        let lam = grid.eigenvalue(k2);
        let (mut dg_h, mut p_h) = (0.0, 0.0);
        for c in 0..3 {
            let hv = uts[c][idx] + us[c][idx] * (prm.nu * lam);
            let pv = ws[c][idx] - us[c][idx];
            let dg = wts[c][idx] - uts[c][idx];
            dg_h += (dg * hv.conj()).re;
            p_h += (pv * hv.conj()).re;
            any_p |= pv.re != 0.0 || pv.im != 0.0;
            p[c][idx] = pv;
            h[c][idx] = hv;
        }
        s_dg0 += dg_h;
        s_dg1 += lam * dg_h;
        s_p0 += p_h;
        s_p1 += lam * p_h;
        s_p2 += lam * lam * p_h;
    }
    let vol = grid.volume();
    let (b2, nu, eta) = (prm.beta_sq, prm.nu, prm.eta);
    let t5 = if any_p {
        let mut pf = SpectralField::from_raw(grid, p)?;
        pf.set_flags(true, true);
        let mut hf = SpectralField::from_raw(grid, h)?;
        hf.set_flags(true, true);
        let rest = node.w - &pf;
        let (b_wp, _) = advect(node.w, &pf);
        let (b_pr, _) = advect(&pf, &rest);
        inner_product_unchecked(&(&b_wp + &b_pr), &hf, 0.0)
    } else {
        0.0
    };
    Ok(UpdateTerms {
        t1: vol * s_dg0,
        t2: vol * b2 * s_dg1,
        t3: vol * nu * s_p1,
        t4: vol * nu * b2 * s_p2,
        t5,
        t6: vol * eta * s_p0,
        t7: vol * b2 * eta * s_p1,
    })
}

/// One quadrature node for [`update_beta`].
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub t: f64,
    pub w: SpectralField,
    pub w_t: SpectralField,
    pub obs_u: SpectralField,
    pub obs_ut: SpectralField,
}

/// `beta^2 + (1 / delta) int (update integrand) ds` over the samples.
pub fn update_beta(
    beta_sq: f64,
    samples: &[WindowSample],
    eta: f64,
    cutoff: u32,
    nu: f64,
    delta: f64,
) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TimeGridMismatch(
            "need at least two quadrature nodes".into(),
        ));
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Degenerate {
            delta,
            threshold: 0.0,
        });
    }
    let prm = UpdateParams {
        beta_sq,
        eta,
        cutoff,
        rule: ModeRule::Strict,
        nu,
    };
    let mut quad = Trapezoid::new();
    for s in samples {
        let node = NodeData {
            w: &s.w,
            w_t: &s.w_t,
            obs_u: &s.obs_u,
            obs_ut: &s.obs_ut,
        };
        quad.push(s.t, update_integrand(&node, &prm)?.total())?;
    }
    Ok(beta_sq + quad.value() / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{
        apply_a, low_mode_project, random_divfree_field, sobolev_norm_sq, DecayProfile, GridSpec,
        RandomFieldSpec,
    };

    fn steady_stream(u: &SpectralField, dt: f64, nodes: usize) -> ObservationStream {
        let mut s = ObservationStream::new(*u.grid(), 3, ModeRule::Strict, dt).unwrap();
        let zero = SpectralField::zeros(*u.grid());
        for _ in 0..nodes {
            s.push(u, &zero).unwrap();
        }
        s
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let mut q = Trapezoid::new();
        for i in 0..=10 {
            let t = i as f64 * 0.1;
            q.push(t, 3.0 * t + 1.0).unwrap();
        }
        assert!((q.value() - 2.5).abs() < 1e-14);
        assert!(q.push(0.5, 0.0).is_err());
    }

    #[test]
    fn steady_window_integral_is_length_times_constant() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let u = random_divfree_field(&g, &RandomFieldSpec::new(DecayProfile::Flat), 4);
        let nu = 0.2;
        let s = steady_stream(&u, 0.1, 21);
        let expect = sobolev_norm_sq(&low_mode_project(&apply_a(&u).scaled(nu), 3), 1.0);
        let d = delta_n(&s, 3, nu, 0.5, 1.5).unwrap();
        assert!((d - expect).abs() < 1e-12 * expect);
        let d2 = delta_n(&s, 3, nu, 0.0, 2.0).unwrap();
        assert!((d2 - 2.0 * d).abs() < 1e-12 * d);
        let z = zeta_n(&s, 3, nu, 0.5, 1.5).unwrap();
        assert!((z - d).abs() < 1e-12 * d);
        assert!(zeta_n(&s, 2, nu, 0.5, 1.5).unwrap() <= z);
        assert!(delta_n(&s, 3, nu, 0.5, 2.5).is_err());
    }

    #[test]
    fn zero_sync_error_gives_no_update() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Power(1.0));
        let u = random_divfree_field(&g, &spec, 5);
        let ut = random_divfree_field(&g, &spec, 6);
        let samples: Vec<_> = (0..3)
            .map(|i| WindowSample {
                t: i as f64 * 0.1,
                w: u.clone(),
                w_t: ut.clone(),
                obs_u: low_mode_project(&u, 3),
                obs_ut: low_mode_project(&ut, 3),
            })
            .collect();
        let b = update_beta(0.04, &samples, 20.0, 3, 0.1, 0.7).unwrap();
        assert_eq!(b, 0.04);
        assert!(update_beta(0.04, &samples, 20.0, 3, 0.1, 0.0).is_err());
    }
}
