//! Free-space dyadic Green's function in real space, its in-plane Weyl
//! (plane-wave) decomposition with a Gaussian momentum regulator, and the
//! regulated self term at the origin.
//!
//! Sign convention: `G` solves `k^2 G - curl curl G = delta`, i.e.
//!
//! ```text
//! G_ab(r) = -e^{ikr}/(4 pi r) [ (1 + i/kr - 1/(kr)^2) delta_ab
//!                             + (-1 - 3i/kr + 3/(kr)^2) x_a x_b / r^2 ]
//! ```
//!
//! With this sign `Im G_aa(r -> 0) = -k/(6 pi)`, so the coupling
//! `(3 pi gamma0 / k) G` adds `-i gamma0/2` collective decay between
//! coincident emitters. The contact `delta(r)` term is never evaluated.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{erfc, erfi};

pub type Tensor2 = [[C64; 2]; 2];

/// Symmetric 3x3 complex tensor with units of inverse length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicTensor(pub [[C64; 3]; 3]);

impl DyadicTensor {
    pub fn zero() -> Self {
        DyadicTensor([[C64::new(0.0, 0.0); 3]; 3])
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.0[a][b]
    }

    /// Upper-left 2x2 block (`x`, `y` components).
    pub fn in_plane(&self) -> Tensor2 {
        [[self.0[0][0], self.0[0][1]], [self.0[1][0], self.0[1][1]]]
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|G_ab - G_ba|` relative to [`Self::max_abs`].
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                worst = worst.max((self.0[a][b] - self.0[b][a]).norm());
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for a in 0..3 {
            for b in 0..3 {
                out.0[a][b] += other.0[a][b];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn frobenius(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Free-space Green's tensor at displacement `r` (contact term excluded).
pub fn greens_free_space(r: [f64; 3], k: f64) -> Result<DyadicTensor> {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    if r2 == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be > 0, got {k}")));
    }
    let dist = r2.sqrt();
    let (diag, dyad) = radial_coefficients(dist, k);
    let mut g = DyadicTensor::zero();
    for a in 0..3 {
        for b in 0..3 {
            let mut v = dyad * (r[a] * r[b] / r2);
            if a == b {
                v += diag;
            }
            g.0[a][b] = v;
        }
    }
    Ok(g)
}

/// Coefficients `(A, B)` with `G_ab = A delta_ab + B x_a x_b / r^2`.
#[inline]
fn radial_coefficients(dist: f64, k: f64) -> (C64, C64) {
    let kr = k * dist;
    let inv = 1.0 / kr;
    let inv2 = inv * inv;
    let pre = -C64::new(0.0, kr).exp() / (4.0 * PI * dist);
    let diag = pre * C64::new(1.0 - inv2, inv);
    let dyad = pre * C64::new(-1.0 + 3.0 * inv2, -3.0 * inv);
    (diag, dyad)
}

/// In-plane 2x2 block of the Green's tensor for a coplanar displacement.
/// The caller guarantees a nonzero separation.
#[inline]
pub fn greens_in_plane(dx: f64, dy: f64, k: f64) -> Tensor2 {
    let r2 = dx * dx + dy * dy;
    debug_assert!(r2 > 0.0, "coincident emitters");
    let (diag, dyad) = radial_coefficients(r2.sqrt(), k);
    let xx = dyad * (dx * dx / r2);
    let yy = dyad * (dy * dy / r2);
    let xy = dyad * (dx * dy / r2);
    [[diag + xx, xy], [xy, diag + yy]]
}

/// In-plane 2x2 block of the Green's tensor for a displacement with an
/// out-of-plane component.
#[inline]
pub fn greens_in_plane_block(d: [f64; 3], k: f64) -> Tensor2 {
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    debug_assert!(r2 > 0.0, "coincident emitters");
    let (diag, dyad) = radial_coefficients(r2.sqrt(), k);
    let xx = dyad * (d[0] * d[0] / r2);
    let yy = dyad * (d[1] * d[1] / r2);
    let xy = dyad * (d[0] * d[1] / r2);
    [[diag + xx, xy], [xy, diag + yy]]
}

/// Regularised Green's tensor at the source for a Gaussian cut-off of width
/// `a_ho`:
///
/// ```text
/// G*(0) = k/(6 pi) [ (erfi(k a/sqrt 2) - i) e^{-(k a)^2/2}
///                    - (-1/2 + (k a)^2) / (sqrt(pi/2) (k a)^3) ] delta_ab
/// ```
pub fn greens_regularized_origin(k: f64, a_ho: f64) -> Result<DyadicTensor> {
    if !(a_ho.is_finite() && a_ho > 0.0) {
        return Err(Error::Domain(format!("a_ho must be > 0, got {a_ho}")));
    }
    let v = regularized_origin_scalar(k, a_ho);
    let mut g = DyadicTensor::zero();
    for a in 0..3 {
        g.0[a][a] = v;
    }
    Ok(g)
}

pub(crate) fn regularized_origin_scalar(k: f64, a_ho: f64) -> C64 {
    let ka = k * a_ho;
    let damp = (-0.5 * ka * ka).exp();
    let first = C64::new(erfi(ka / std::f64::consts::SQRT_2), -1.0) * damp;
    let second = (-0.5 + ka * ka) / ((PI / 2.0).sqrt() * ka * ka * ka);
    (first - second) * (k / (6.0 * PI))
}

/// Regularised Weyl decomposition `g*_ab(q; z = 0)` for in-plane `a, b`.
///
/// `Lambda = sqrt(k^2 - q^2)` takes the branch with `Re, Im >= 0`. For
/// `|q| > k` the result is real (evanescent); for `|q| < k` it carries the
/// radiative imaginary part.
pub fn weyl_g_star(q: [f64; 2], k: f64, a_ho: f64) -> Result<Tensor2> {
    let s = weyl_kernel_scaled(q, k, a_ho)?;
    let chi_factor = (-0.5 * a_ho * a_ho * k * k).exp();
    Ok(s.map(|row| row.map(|z| z * chi_factor)))
}

/// `e^{(k a_ho)^2/2} g*(q)`. The factor cancels the `q`-independent
/// exponential of `chi(q)` exactly, so no overflow-prone product appears.
pub(crate) fn weyl_kernel_scaled(q: [f64; 2], k: f64, a_ho: f64) -> Result<Tensor2> {
    let kernel = weyl_scalar_scaled(q[0] * q[0] + q[1] * q[1], k, a_ho)?;
    Ok(weyl_tensor(q, k, kernel))
}

#[inline]
pub(crate) fn weyl_tensor(q: [f64; 2], k: f64, kernel: C64) -> Tensor2 {
    let k2 = k * k;
    let xy = kernel * (-q[0] * q[1]);
    [
        [kernel * (k2 - q[0] * q[0]), xy],
        [xy, kernel * (k2 - q[1] * q[1])],
    ]
}

/// `e^{(k a_ho)^2/2} I(q)` as a function of `|q|^2`, with
/// `I(q) = chi pi / Lambda [-i + erfi(a_ho Lambda / sqrt 2)]` and
/// `chi = e^{-a_ho^2 (q^2 + Lambda^2)/2} / (2 pi k^2) = e^{-a_ho^2 k^2/2} / (2 pi k^2)`.
#[inline]
pub(crate) fn weyl_scalar_scaled(q2: f64, k: f64, a_ho: f64) -> Result<C64> {
    let k2 = k * k;
    let l2 = k2 - q2;
    if l2 == 0.0 || (l2.abs() <= 1e-14 * k2) {
        return Err(Error::PoleOnLightCircle { q: q2.sqrt(), k });
    }
    let pref = 1.0 / (2.0 * k2);
    if l2 > 0.0 {
        let lambda = l2.sqrt();
        let e = erfi(a_ho * lambda / std::f64::consts::SQRT_2);
        Ok(C64::new(e, -1.0) * (pref / lambda))
    } else {
        // Lambda = i kappa: (-i + i erf(x)) / (i kappa) = -erfc(x) / kappa
        let kappa = (-l2).sqrt();
        let e = erfc(a_ho * kappa / std::f64::consts::SQRT_2);
        Ok(C64::new(-e * pref / kappa, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: f64 = 2.0 * PI;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn on_axis_tensor_is_diagonal() {
        let g = greens_free_space([0.05, 0.0, 0.0], K).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(g.get(a, b), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn even_parity() {
        let g1 = greens_free_space([0.3, 0.1, 0.0], K).unwrap();
        let g2 = greens_free_space([-0.3, -0.1, 0.0], K).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn transverse_component_at_one_wavelength() {
        // 40-digit term-by-term evaluation of the closed form.
        let g = greens_free_space([1.0, 0.0, 0.0], K).unwrap();
        let want_yy = C64::new(-0.077_561_750_643_872_70, -0.012_665_147_955_292_221);
        let want_xx = C64::new(-0.004_031_441_804_149_936, 0.025_330_295_910_584_443);
        assert!(close(g.get(1, 1), want_yy, 1e-13));
        assert!(close(g.get(0, 0), want_xx, 1e-13));
        let g = greens_free_space([0.3, 0.1, 0.0], K).unwrap();
        let want_xy = C64::new(-0.111_585_724_356_459_19, -0.029_496_438_344_670_119);
        assert!(close(g.get(0, 1), want_xy, 1e-13));
    }

    #[test]
    fn zero_separation_is_rejected() {
        assert!(matches!(
            greens_free_space([0.0; 3], K),
            Err(Error::ZeroSeparation)
        ));
    }

    #[test]
    fn in_plane_block_matches_full_tensor() {
        let full = greens_free_space([0.13, -0.07, 0.0], K).unwrap().in_plane();
        let fast = greens_in_plane(0.13, -0.07, K);
        for a in 0..2 {
            for b in 0..2 {
                assert!(close(fast[a][b], full[a][b], 1e-14));
            }
        }
    }

    #[test]
    fn origin_term_is_diagonal_and_has_radiative_limit() {
        let g = greens_regularized_origin(K, 1e-4 / K).unwrap();
        assert_eq!(g.get(0, 1), C64::new(0.0, 0.0));
        assert_eq!(g.get(1, 2), C64::new(0.0, 0.0));
        let ratio = g.get(0, 0).im / (-K / (6.0 * PI));
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn origin_term_at_moderate_cutoff() {
        // High-precision evaluation with a series erfi.
        let g = greens_regularized_origin(K, 0.1 / K).unwrap();
        let want = C64::new(130.347_652_606_376_01, -0.331_670_826_397_560_77);
        assert!(close(g.get(2, 2), want, 1e-12));
        assert!(greens_regularized_origin(K, 0.0).is_err());
        assert!(greens_regularized_origin(K, -1.0).is_err());
    }

    #[test]
    fn weyl_tensor_symmetry_and_isotropy() {
        let a_ho = 0.05 / 20.0;
        let g = weyl_g_star([0.7 * K, 0.2 * K], K, a_ho).unwrap();
        assert_eq!(g[0][1], g[1][0]);
        let g0 = weyl_g_star([0.0, 0.0], K, a_ho).unwrap();
        assert!(close(g0[0][0], g0[1][1], 1e-15));
        assert_eq!(g0[0][1], C64::new(0.0, 0.0));
        // I(0) with Lambda = k
        let chi = (-a_ho * a_ho * K * K / 2.0).exp() / (2.0 * PI * K * K);
        let i0 = chi * PI / K * C64::new(erfi(a_ho * K / 2f64.sqrt()), -1.0);
        assert!(close(g0[0][0], i0 * K * K, 1e-14));
    }

    #[test]
    fn evanescent_region_is_real_and_radiative_region_is_not() {
        let a_ho = 0.05 / 20.0;
        let g = weyl_g_star([2.0 * K, 0.0], K, a_ho).unwrap();
        for row in g {
            for z in row {
                assert!(z.im.abs() <= 1e-12 * z.norm().max(1e-300));
            }
        }
        let g = weyl_g_star([0.3 * K, 0.1 * K], K, a_ho).unwrap();
        assert!(g[0][0].im.abs() > 0.0);
    }

    #[test]
    fn radiative_imaginary_part_has_one_sign() {
        let a_ho = 0.05 / 20.0;
        for i in 0..200 {
            let q = K * (i as f64 + 0.5) / 200.0;
            for theta in [0.0, 0.4, 1.1, 2.3] {
                let g = weyl_g_star([q * f64::cos(theta), q * f64::sin(theta)], K, a_ho).unwrap();
                assert!(g[0][0].im < 0.0 && g[1][1].im < 0.0, "q = {q}");
            }
        }
    }

    #[test]
    fn light_circle_is_a_pole() {
        assert!(matches!(
            weyl_g_star([K, 0.0], K, 0.001),
            Err(Error::PoleOnLightCircle { .. })
        ));
    }

    #[test]
    fn chi_cancels_the_scaling_prefactor() {
        // chi(q) = exp(-a^2 (q^2 + Lambda^2)/2) / (2 pi k^2) is q independent.
        let a_ho = 0.003;
        let expected = (-a_ho * a_ho * K * K / 2.0).exp() / (2.0 * PI * K * K);
        for q in [0.0, 0.5 * K, 3.0 * K, 40.0 * K] {
            let lambda2 = C64::new(K * K - q * q, 0.0);
            let chi = (-(a_ho * a_ho) * (q * q + lambda2) / 2.0).exp() / (2.0 * PI * K * K);
            assert!(close(chi, C64::new(expected, 0.0), 1e-13));
            assert!(
                (chi.re * (K * K * a_ho * a_ho / 2.0).exp() * 2.0 * PI * K * K - 1.0).abs() < 1e-13
            );
        }
    }
}
