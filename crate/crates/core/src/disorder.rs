//! Averaging the dipole coupling over uncorrelated, isotropic Gaussian
//! position fluctuations of the emitters, and the resulting band gap.
//!
//! Displacements are three-dimensional. Restricted to the plane, the
//! average of the `1/r^3` near field over close approaches diverges as the
//! collision cut-off shrinks; in three dimensions the angular average of the
//! near-field dyad vanishes and the result is cut-off independent.
//!
//! The averaged Bloch matrix is the clean one plus a short-range correction
//! `sum_{|R| < shell} e^{ik.R} (<G>(R + o) - G(R + o))`, since the average
//! only differs appreciably from the bare coupling between close neighbours.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{gap_from_eigenvalues, onsite_block, BlochGrid, GapReport};
use crate::error::{Error, Result};
use crate::greens::{greens_in_plane, greens_in_plane_block, Tensor2};
use crate::lattice::{add, dot, norm, LatticeGeometry, Vec2};
use crate::linalg::eigvals_sorted;
use crate::params::{PhysicalParams, RegularizationParams};

const ZERO2: Tensor2 = [[C64 { re: 0.0, im: 0.0 }; 2]; 2];

/// Closest approach (in wavelengths) accepted in a sample.
pub const MIN_SEPARATION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationParams {
    /// Rms displacement per axis, in units of the lattice spacing.
    pub delta_a: f64,
    pub samples: usize,
    pub seed: u64,
}

impl FluctuationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_a >= 0.0 && self.delta_a.is_finite()) {
            return Err(Error::Domain(format!(
                "delta_a must be >= 0, got {}",
                self.delta_a
            )));
        }
        if self.samples == 0 {
            return Err(Error::Domain("samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedTensor {
    pub mean: Tensor2,
    /// Standard error of the real and imaginary parts of each element.
    pub stderr: [[C64; 2]; 2],
    pub rejected: usize,
}

impl AveragedTensor {
    pub fn max_stderr(&self) -> f64 {
        self.stderr
            .iter()
            .flatten()
            .map(|z| z.re.max(z.im))
            .fold(0.0, f64::max)
    }
}

/// Standard-normal triples shared by every separation and amplitude, so
/// that results vary smoothly with `r` and `delta_a`.
fn normal_stream(seed: u64) -> impl Iterator<Item = [f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::from_fn(move || {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        Some([x, y, z])
    })
}

/// Monte Carlo average of the in-plane block of the Green's tensor at the
/// in-plane separation `r` (wavelength units) when both atoms fluctuate
/// independently with rms `delta_a * spacing` per axis.
pub fn averaged_greens(
    r: Vec2,
    k: f64,
    spacing: f64,
    fluct: &FluctuationParams,
) -> Result<AveragedTensor> {
    fluct.validate()?;
    let sigma = fluct.delta_a * spacing;
    let d = norm(r);
    if d < 4.0 * sigma * (1.0 - 1e-12) || d == 0.0 {
        return Err(Error::Domain(format!(
            "separation {d} must be at least 4 delta_a = {}",
            4.0 * sigma
        )));
    }
    if sigma == 0.0 {
        return Ok(AveragedTensor {
            mean: greens_in_plane(r[0], r[1], k),
            stderr: ZERO2,
            rejected: 0,
        });
    }
    // relative displacement u_i - u_j has rms sqrt2 sigma per axis
    let s = std::f64::consts::SQRT_2 * sigma;
    let mut sum = [[[0.0f64; 4]; 2]; 2];
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    for z in normal_stream(fluct.seed) {
        if accepted == fluct.samples {
            break;
        }
        let p = [r[0] + s * z[0], r[1] + s * z[1], s * z[2]];
        if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < MIN_SEPARATION {
            rejected += 1;
            if rejected > fluct.samples {
                return Err(Error::Domain(format!(
                    "more than half of the samples collide at separation {d}"
                )));
            }
            continue;
        }
        let g = greens_in_plane_block(p, k);
        for i in 0..2 {
            for j in 0..2 {
                let v = g[i][j];
                let acc = &mut sum[i][j];
                acc[0] += v.re;
                acc[1] += v.im;
                acc[2] += v.re * v.re;
                acc[3] += v.im * v.im;
            }
        }
        accepted += 1;
    }
    let n = accepted as f64;
    let mut mean = ZERO2;
    let mut stderr = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            let a = sum[i][j];
            let (mr, mi) = (a[0] / n, a[1] / n);
            mean[i][j] = C64::new(mr, mi);
            if accepted > 1 {
                let vr = ((a[2] / n - mr * mr) * n / (n - 1.0)).max(0.0);
                let vi = ((a[3] / n - mi * mi) * n / (n - 1.0)).max(0.0);
                stderr[i][j] = C64::new((vr / n).sqrt(), (vi / n).sqrt());
            }
        }
    }
    Ok(AveragedTensor {
        mean,
        stderr,
        rejected,
    })
}

/// Separations `R + offset` inside `shell` for the three coupling types
/// (same sublattice, `+b`, `-b`), with the Bravais vector `R` carrying the
/// Bloch phase.
fn shell_vectors(geom: &LatticeGeometry, shell: f64) -> [Vec<(Vec2, Vec2)>; 3] {
    let nmax = (shell / norm(geom.a1)).ceil() as i64 + 2;
    let offsets = [[0.0, 0.0], geom.b, [-geom.b[0], -geom.b[1]]];
    let mut out: [Vec<(Vec2, Vec2)>; 3] = Default::default();
    for n1 in -nmax..=nmax {
        for n2 in -nmax..=nmax {
            let r = geom.bravais(n1, n2);
            for (o, list) in offsets.iter().zip(out.iter_mut()) {
                let sep = add(r, *o);
                let d = norm(sep);
                if d > 0.0 && d < shell {
                    list.push((r, sep));
                }
            }
        }
    }
    out
}

/// `<G> - G` for every shell separation, in the order of `shell_vectors`.
fn shell_corrections(
    shells: &[Vec<(Vec2, Vec2)>; 3],
    k: f64,
    spacing: f64,
    fluct: &FluctuationParams,
) -> Result<[Vec<Tensor2>; 3]> {
    let mut out: [Vec<Tensor2>; 3] = Default::default();
    for (list, dst) in shells.iter().zip(out.iter_mut()) {
        *dst = list
            .par_iter()
            .map(|&(_, sep)| {
                let avg = averaged_greens(sep, k, spacing, fluct)?;
                let bare = greens_in_plane(sep[0], sep[1], k);
                let mut d = ZERO2;
                for i in 0..2 {
                    for j in 0..2 {
                        d[i][j] = avg.mean[i][j] - bare[i][j];
                    }
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPoint {
    pub delta_over_a: f64,
    pub gap: GapReport,
    /// Batch-means standard error of the gap.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationCurve {
    pub mu_b: f64,
    pub spacing: f64,
    pub samples: usize,
    pub seed: u64,
    pub shell: f64,
    pub points: Vec<FluctuationPoint>,
}

impl FluctuationCurve {
    /// CSV rows `delta_over_a,delta,stderr`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta_over_a,delta,stderr")?;
        for p in &self.points {
            writeln!(
                w,
                "{:.6},{:.10e},{:.4e}",
                p.delta_over_a, p.gap.delta, p.stderr
            )?;
        }
        Ok(())
    }

    pub fn gap_at(&self, delta_over_a: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.delta_over_a - delta_over_a).abs() < 1e-12)
            .map(|p| p.gap.delta)
    }

    /// `Delta(delta_a)` never grows by more than `slack` standard errors.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| {
            let tol = slack * (w[0].stderr.hypot(w[1].stderr));
            w[1].gap.delta <= w[0].gap.delta + tol
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctuationOptions {
    pub samples: usize,
    pub seed: u64,
    /// Radius (units of the spacing) inside which couplings are averaged.
    pub shell: f64,
    pub grid_n: usize,
    /// Batches for the standard error of the gap.
    pub batches: usize,
}

impl Default for FluctuationOptions {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 0,
            shell: 8.0,
            grid_n: 24,
            batches: 10,
        }
    }
}

/// Band gap with fluctuation-averaged couplings for each `delta_a / a` in
/// `deltas`.
pub fn gap_vs_fluctuation(
    deltas: &[f64],
    params: &PhysicalParams,
    reg: RegularizationParams,
    opts: &FluctuationOptions,
) -> Result<FluctuationCurve> {
    params.validate()?;
    if deltas.is_empty() {
        return Err(Error::Domain("empty fluctuation grid".into()));
    }
    if opts.batches < 2 || opts.samples < opts.batches {
        return Err(Error::Domain(
            "need >= 2 batches and samples >= batches".into(),
        ));
    }
    let grid = BlochGrid::new(params, reg, opts.grid_n)?;
    let a = params.spacing;
    let k = params.k();
    let shells = shell_vectors(&grid.geom, opts.shell * a);
    let onsite = onsite_block(params);
    let pref = params.coupling_prefactor();

    let gap_with = |corr: &[Vec<Tensor2>; 3]| -> Result<GapReport> {
        let evs = (0..grid.points.len())
            .into_par_iter()
            .map(|idx| {
                let kb = grid.points[idx];
                let mut m = &onsite + &grid.interactions[idx];
                for (c, (list, d)) in shells.iter().zip(corr.iter()).enumerate() {
                    let mut s = ZERO2;
                    for ((r, _), t) in list.iter().zip(d) {
                        let ph = C64::from_polar(1.0, dot(kb, *r));
                        for i in 0..2 {
                            for j in 0..2 {
                                s[i][j] += ph * t[i][j];
                            }
                        }
                    }
                    let (ro, co) = match c {
                        0 => (0, 0),
                        1 => (0, 2),
                        _ => (2, 0),
                    };
                    for i in 0..2 {
                        for j in 0..2 {
                            m[[ro + i, co + j]] += s[i][j] * pref;
                            if c == 0 {
                                m[[2 + i, 2 + j]] += s[i][j] * pref;
                            }
                        }
                    }
                }
                let v = eigvals_sorted(&m)?;
                Ok([v[0], v[1], v[2], v[3]])
            })
            .collect::<Result<Vec<_>>>()?;
        gap_from_eigenvalues(&grid.points, &evs)
    };

    let mut points = Vec::with_capacity(deltas.len());
    for &da in deltas {
        let full = FluctuationParams {
            delta_a: da,
            samples: opts.samples,
            seed: opts.seed,
        };
        full.validate()?;
        let gap = gap_with(&shell_corrections(&shells, k, a, &full)?)?;
        let stderr = if da == 0.0 {
            0.0
        } else {
            let per = opts.samples / opts.batches;
            let vals = (0..opts.batches)
                .map(|b| {
                    let f = FluctuationParams {
                        delta_a: da,
                        samples: per,
                        seed: opts.seed.wrapping_add(1 + b as u64),
                    };
                    Ok(gap_with(&shell_corrections(&shells, k, a, &f)?)?.delta)
                })
                .collect::<Result<Vec<f64>>>()?;
            let nb = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / nb;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nb - 1.0);
            // the full estimate averages all batches
            (var / nb).sqrt()
        };
        points.push(FluctuationPoint {
            delta_over_a: da,
            gap,
            stderr,
        });
    }
    Ok(FluctuationCurve {
        mu_b: params.mu_b,
        spacing: a,
        samples: opts.samples,
        seed: opts.seed,
        shell: opts.shell,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(delta_a: f64, samples: usize, seed: u64) -> FluctuationParams {
        FluctuationParams {
            delta_a,
            samples,
            seed,
        }
    }

    #[test]
    fn zero_amplitude_is_the_bare_tensor() {
        let k = 2.0 * std::f64::consts::PI;
        let r = [0.05, 0.01];
        let avg = averaged_greens(r, k, 0.05, &fp(0.0, 10, 1)).unwrap();
        let g = greens_in_plane(r[0], r[1], k);
        assert_eq!(avg.mean, g);
    }

    #[test]
    fn seeded_averages_are_reproducible() {
        let k = 2.0 * std::f64::consts::PI;
        let a = averaged_greens([0.05, 0.0], k, 0.05, &fp(0.2, 500, 9)).unwrap();
        let b = averaged_greens([0.05, 0.0], k, 0.05, &fp(0.2, 500, 9)).unwrap();
        assert_eq!(a.mean, b.mean);
        let c = averaged_greens([0.05, 0.0], k, 0.05, &fp(0.2, 500, 10)).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn close_pairs_are_rejected() {
        let k = 2.0 * std::f64::consts::PI;
        assert!(averaged_greens([0.01, 0.0], k, 0.05, &fp(0.06, 10, 1)).is_err());
        assert!(averaged_greens([0.05, 0.0], k, 0.05, &fp(-0.1, 10, 1)).is_err());
        assert!(averaged_greens([0.05, 0.0], k, 0.05, &fp(0.1, 0, 1)).is_err());
    }

    #[test]
    fn shells_are_symmetric() {
        let g = crate::lattice::build_geometry(0.05).unwrap();
        let s = shell_vectors(&g, 0.4);
        // inversion maps +b separations onto -b separations
        assert_eq!(s[1].len(), s[2].len());
        assert_eq!(s[0].len() % 6, 0);
        assert!(s[1]
            .iter()
            .any(|(_, sep)| (norm(*sep) - 0.05).abs() < 1e-12));
    }
}
