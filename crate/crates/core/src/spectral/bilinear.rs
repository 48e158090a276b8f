//! Pseudo-spectral evaluation of `B(u, v) = P[(u . grad) v]`.
//!
//! Real fields are transformed two at a time: the inverse transform of
//! `a_K + i b_K` is `a(x) + i b(x)` when both are Hermitian, and the forward
//! transform of `p + i q` separates as `p_K = (Z_K + conj Z_{-K}) / 2`,
//! `q_K = (Z_K - conj Z_{-K}) / 2i`. Twelve inverse and three forward real
//! transforms therefore cost eight complex FFTs.

use num_complex::Complex64;

use super::fft::Fft3;
use super::field::SpectralField;
use super::grid::GridSpec;
use super::ops::leray_project;
use crate::error::Result;

/// `B(u, v) = P[(u . grad) v]`, dealiased and Leray-projected.
pub fn bilinear_b(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.grid().ensure_same(v.grid())?;
    u.grid().max_dealiased_wavenumber()?;
    Ok(advect(u, v).0)
}

/// Same as [`bilinear_b`] but also reports `max_x |u(x)|` for CFL checks.
pub(crate) fn advect(u: &SpectralField, v: &SpectralField) -> (SpectralField, f64) {
    let grid = *u.grid();
    let n3 = grid.len();
    let fft = Fft3::cached(grid.n_grid());

    let n = grid.n_grid();
    let kscale = grid.wavenumber_scale();
    let wave: Vec<f64> = (0..n).map(|i| kscale * grid.wavenumber(i) as f64).collect();

    let uc = u.components();
    let vc = v.components();
    // real field r: 0..3 are u_j, 3 + 3i + j is d_j v_i
    let spectral_real = |r: usize, idx: usize, kv: &[f64; 3]| -> Complex64 {
        if r < 3 {
            uc[r][idx]
        } else {
            let comp = (r - 3) / 3;
            let dir = (r - 3) % 3;
            Complex64::new(0.0, kv[dir]) * vc[comp][idx]
        }
    };

    let i = Complex64::new(0.0, 1.0);
    let mut physical: Vec<Vec<Complex64>> = (0..6)
        .map(|pair| {
            let (a, b) = (2 * pair, 2 * pair + 1);
            let mut buf = vec![Complex64::default(); n3];
            let mut idx = 0;
            for &kx in &wave {
                for &ky in &wave {
                    for &kz in &wave {
                        let kv = [kx, ky, kz];
                        buf[idx] = spectral_real(a, idx, &kv) + i * spectral_real(b, idx, &kv);
                        idx += 1;
                    }
                }
            }
            fft.inverse(&mut buf);
            buf
        })
        .collect();

    let mut umax_sq = 0.0_f64;
    let mut packed = vec![Complex64::default(); n3];
    let mut single = vec![Complex64::default(); n3];
    {
        let [p0, p1, p2, p3, p4, p5] = &physical[..] else {
            unreachable!()
        };
        for x in 0..n3 {
            let uu = [p0[x].re, p0[x].im, p1[x].re];
            umax_sq = umax_sq.max(uu[0] * uu[0] + uu[1] * uu[1] + uu[2] * uu[2]);
            // gradient entries d_j v_i in field order 3..12
            let gv = [
                p1[x].im, p2[x].re, p2[x].im, p3[x].re, p3[x].im, p4[x].re, p4[x].im, p5[x].re,
                p5[x].im,
            ];
            let px = uu[0] * gv[0] + uu[1] * gv[1] + uu[2] * gv[2];
            let py = uu[0] * gv[3] + uu[1] * gv[4] + uu[2] * gv[5];
            let pz = uu[0] * gv[6] + uu[1] * gv[7] + uu[2] * gv[8];
            packed[x] = Complex64::new(px, py);
            single[x] = Complex64::new(pz, 0.0);
        }
    }
    physical.clear();

    fft.forward(&mut packed);
    fft.forward(&mut single);

    let scale = 1.0 / n3 as f64;
    let cut = grid.dealias_cutoff();
    let keep: Vec<bool> = (0..n)
        .map(|i| {
            let k = grid.wavenumber(i);
            k.abs() < grid.half() && (k.abs() as f64) < cut
        })
        .collect();
    let mut out = [
        vec![Complex64::default(); n3],
        vec![Complex64::default(); n3],
        vec![Complex64::default(); n3],
    ];
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                if !(keep[ix] && keep[iy] && keep[iz]) || (ix == 0 && iy == 0 && iz == 0) {
                    continue;
                }
                let idx = grid.flat(ix, iy, iz);
                let cidx = grid.flat((n - ix) % n, (n - iy) % n, (n - iz) % n);
                let z = packed[idx] * scale;
                let zc = packed[cidx].conj() * scale;
                out[0][idx] = (z + zc) * 0.5;
                out[1][idx] = (z - zc) * Complex64::new(0.0, -0.5);
                out[2][idx] = (single[idx] + single[cidx].conj()) * (0.5 * scale);
            }
        }
    }

    let raw = SpectralField::from_parts(grid, out, false, true);
    (leray_project(&raw), umax_sq.sqrt())
}

/// Physical-space samples of a field on the `n^3` grid, component-major.
pub fn to_physical(field: &SpectralField) -> [Vec<f64>; 3] {
    let grid = *field.grid();
    let fft = Fft3::cached(grid.n_grid());
    let c = field.components();
    let i = Complex64::new(0.0, 1.0);
    let mut xy: Vec<Complex64> = c[0]
        .iter()
        .zip(c[1].iter())
        .map(|(a, b)| a + i * b)
        .collect();
    let mut z = c[2].clone();
    fft.inverse(&mut xy);
    fft.inverse(&mut z);
    [
        xy.iter().map(|v| v.re).collect(),
        xy.iter().map(|v| v.im).collect(),
        z.iter().map(|v| v.re).collect(),
    ]
}

/// Physical coordinates of grid point `(ix, iy, iz)`.
pub fn grid_point(grid: &GridSpec, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
    let h = grid.length() / grid.n_grid() as f64;
    [ix as f64 * h, iy as f64 * h, iz as f64 * h]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ops::{inner_product, sobolev_norm_sq};
    use crate::spectral::random::{random_divfree_field, DecayProfile, RandomFieldSpec};

    #[test]
    fn shear_mode_self_advection_vanishes() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        // a sin(x) e_y  ->  u_{(1,0,0)} = -i a / 2 e_y
        let a = 0.8;
        let u = SpectralField::from_modes(
            g,
            [(
                [1, 0, 0],
                [
                    Complex64::default(),
                    Complex64::new(0.0, -a / 2.0),
                    Complex64::default(),
                ],
            )],
        )
        .unwrap();
        let b = bilinear_b(&u, &u).unwrap();
        assert_eq!(b.max_abs_coeff(), 0.0);
    }

    #[test]
    fn physical_quadrature_matches_parseval() {
        let g = GridSpec::new(1.7, 8, 2.0 / 3.0).unwrap();
        let u = random_divfree_field(&g, &RandomFieldSpec::new(DecayProfile::Power(1.0)), 3);
        let phys = to_physical(&u);
        let h3 = (g.length() / 8.0).powi(3);
        let quad: f64 = (0..g.len())
            .map(|x| phys[0][x].powi(2) + phys[1][x].powi(2) + phys[2][x].powi(2))
            .sum::<f64>()
            * h3;
        let spec = sobolev_norm_sq(&u, 0.0);
        assert!((quad - spec).abs() <= 1e-10 * spec);
    }

    #[test]
    fn skew_symmetry_on_random_pair() {
        let g = GridSpec::periodic_2pi(8).unwrap();
        let spec = RandomFieldSpec::new(DecayProfile::Power(0.5));
        let u = random_divfree_field(&g, &spec, 11);
        let v = random_divfree_field(&g, &spec, 12);
        let b = bilinear_b(&u, &v).unwrap();
        let pairing = inner_product(&b, &v, 0.0).unwrap();
        let scale = sobolev_norm_sq(&b, 0.0).sqrt() * sobolev_norm_sq(&v, 0.0).sqrt();
        assert!(pairing.abs() <= 1e-12 * scale, "{pairing} vs {scale}");
    }
}
