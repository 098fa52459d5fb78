//! Chern numbers on the Brillouin-zone torus (plaquette link variables) and
//! gap scans in field and spacing.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bloch::{BandPoint, BlochGrid, GapReport};
use crate::error::{Error, Result};
use crate::greens::greens_in_plane;
use crate::params::{PhysicalParams, RegularizationParams};

/// Links with `|det| / norms` below this are considered broken.
pub const MIN_LINK: f64 = 1e-8;
/// Minimum level spacing (in gamma0) for an individual band to be called
/// non-degenerate across the grid.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernReport {
    pub grid_n: usize,
    /// Individual band Chern numbers; `None` where the band touches a
    /// neighbour somewhere on the grid.
    pub chern: [Option<i64>; 4],
    /// Chern numbers of the two band groups `[below, above]`.
    pub group_chern: [i64; 2],
    pub sum_below: i64,
    pub sum_above: i64,
    /// Largest distance of any summed flux from its integer.
    pub residual: f64,
    pub delta: f64,
    /// Plaquette fluxes, `band_flux[n][i * grid_n + j]`; empty for bands
    /// without an individual Chern number.
    #[serde(skip)]
    pub band_flux: [Vec<f64>; 4],
    /// Plaquette fluxes of the groups `[below, above]`.
    #[serde(skip)]
    pub group_flux: [Vec<f64>; 2],
}

impl ChernReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid_n": self.grid_n,
            "chern": self.chern,
            "group_chern": self.group_chern,
            "sum_above": self.sum_above,
            "sum_below": self.sum_below,
            "residual": self.residual,
            "delta": self.delta,
        })
    }

    /// CSV rows `i,j,flux_band1..4,flux_below,flux_above` (radians per
    /// plaquette, empty fields for undefined individual bands).
    pub fn write_flux_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "i,j,flux_band1,flux_band2,flux_band3,flux_band4,flux_below,flux_above"
        )?;
        let n = self.grid_n;
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let mut row = format!("{i},{j}");
                for f in &self.band_flux {
                    match f.get(idx) {
                        Some(v) => row.push_str(&format!(",{v:.12e}")),
                        None => row.push(','),
                    }
                }
                for f in &self.group_flux {
                    row.push_str(&format!(",{:.12e}", f[idx]));
                }
                writeln!(w, "{row}")?;
            }
        }
        Ok(())
    }
}

/// Orthonormal basis of the span of the given vectors (modified Gram-Schmidt).
fn orthonormalize(vs: &[[C64; 4]]) -> Vec<[C64; 4]> {
    let mut out: Vec<[C64; 4]> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = *v;
        for u in &out {
            let p: C64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for r in 0..4 {
                w[r] -= p * u[r];
            }
        }
        let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in w.iter_mut() {
            *z /= n;
        }
        out.push(w);
    }
    out
}

fn det(m: &[Vec<C64>]) -> C64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => unreachable!("groups have at most two bands"),
    }
}

/// Normalised determinant link `det <u(k)|u(k')>`.
fn link(a: &[[C64; 4]], b: &[[C64; 4]]) -> Result<C64> {
    let m: Vec<Vec<C64>> = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
                .collect()
        })
        .collect();
    let d = det(&m);
    if d.norm() < MIN_LINK {
        return Err(Error::RefineGrid {
            magnitude: d.norm(),
        });
    }
    Ok(d / d.norm())
}

/// Plaquette fluxes on an `n x n` periodic grid; `frames[i * n + j]` is an
/// orthonormal frame of the band (group) at grid point `(i, j)`.
pub fn plaquette_fluxes(n: usize, frames: &[Vec<[C64; 4]>]) -> Result<Vec<f64>> {
    let at = |i: usize, j: usize| &frames[(i % n) * n + (j % n)];
    let mut flux = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u1 = link(at(i, j), at(i + 1, j))?;
            let u2 = link(at(i + 1, j), at(i + 1, j + 1))?;
            let u3 = link(at(i + 1, j + 1), at(i, j + 1))?;
            let u4 = link(at(i, j + 1), at(i, j))?;
            flux.push((u1 * u2 * u3 * u4).arg());
        }
    }
    Ok(flux)
}

/// Chern number and distance from the nearest integer for a flux field.
pub fn integrate_flux(flux: &[f64]) -> (i64, f64) {
    let c = flux.iter().sum::<f64>() / (2.0 * PI);
    let r = c.round();
    (r as i64, (c - r).abs())
}

fn frames(points: &[BandPoint], bands: &[usize]) -> Vec<Vec<[C64; 4]>> {
    points
        .iter()
        .map(|p| {
            let vs: Vec<[C64; 4]> = bands.iter().map(|&b| p.eigenvectors[b]).collect();
            orthonormalize(&vs)
        })
        .collect()
}

fn non_degenerate(points: &[BandPoint], band: usize) -> bool {
    points.iter().all(|p| {
        let e = p.eigenvalues[band];
        (0..4)
            .filter(|&m| m != band)
            .all(|m| (p.eigenvalues[m] - e).norm() > DEGENERACY_TOL)
    })
}

/// Chern numbers from precomputed band points on the `bz_grid(n, 0)` layout.
pub fn chern_from_points(points: &[BandPoint], n: usize, gap: GapReport) -> Result<ChernReport> {
    if gap.delta <= DEGENERACY_TOL {
        return Err(Error::GapClosed { delta: gap.delta });
    }
    let mut residual: f64 = 0.0;
    let mut group_flux: [Vec<f64>; 2] = Default::default();
    let mut group_chern = [0; 2];
    for (g, bands) in [[0usize, 1], [2, 3]].iter().enumerate() {
        let f = plaquette_fluxes(n, &frames(points, bands))?;
        let (c, r) = integrate_flux(&f);
        residual = residual.max(r);
        group_chern[g] = c;
        group_flux[g] = f;
    }
    let mut chern = [None; 4];
    let mut band_flux: [Vec<f64>; 4] = Default::default();
    for b in 0..4 {
        if !non_degenerate(points, b) {
            continue;
        }
        if let Ok(f) = plaquette_fluxes(n, &frames(points, &[b])) {
            let (c, r) = integrate_flux(&f);
            residual = residual.max(r);
            chern[b] = Some(c);
            band_flux[b] = f;
        }
    }
    Ok(ChernReport {
        grid_n: n,
        chern,
        group_chern,
        sum_below: group_chern[0],
        sum_above: group_chern[1],
        residual,
        delta: gap.delta,
        band_flux,
        group_flux,
    })
}

pub fn chern_numbers(
    params: &PhysicalParams,
    reg: RegularizationParams,
    grid_n: usize,
) -> Result<ChernReport> {
    if grid_n < 12 {
        return Err(Error::Domain(format!("grid_n must be >= 12, got {grid_n}")));
    }
    let grid = BlochGrid::new(params, reg, grid_n)?;
    chern_from_grid(&grid, params.mu_b)
}

pub fn chern_from_grid(grid: &BlochGrid, mu_b: f64) -> Result<ChernReport> {
    let points = grid.band_points(mu_b)?;
    let evs: Vec<[C64; 4]> = points.iter().map(|p| p.eigenvalues).collect();
    let gap = crate::bloch::gap_from_eigenvalues(&grid.points, &evs)?;
    chern_from_points(&points, grid.n, gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub mu_b: Vec<f64>,
    pub delta: Vec<f64>,
    pub delta_max: f64,
    pub argmax_mu_b: f64,
}

impl GapCurve {
    fn from_samples(mu_b: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let (i, &dmax) = delta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Domain("empty field grid".into()))?;
        Ok(Self {
            argmax_mu_b: mu_b[i],
            mu_b,
            delta,
            delta_max: dmax,
        })
    }

    /// Least-squares slope of delta against field over `[lo, hi]`.
    pub fn slope(&self, lo: f64, hi: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .mu_b
            .iter()
            .zip(&self.delta)
            .filter(|(m, _)| **m >= lo && **m <= hi)
            .map(|(m, d)| (*m, *d))
            .collect();
        linear_fit(&pts).map(|(s, _)| s)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mu_b,delta")?;
        for (m, d) in self.mu_b.iter().zip(&self.delta) {
            writeln!(w, "{m:.10e},{d:.10e}")?;
        }
        Ok(())
    }
}

/// Ordinary least squares `y = s x + c`, returning `(s, c)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return Err(Error::Fit(format!("need >= 2 points, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let s = sxy / sxx;
    Ok((s, my - s * mx))
}

/// Gap `Delta(mu B)` on a uniform `grid_n x grid_n` grid; the lattice sums are
/// computed once and reused for every field value.
pub fn gap_vs_field(
    base: &PhysicalParams,
    reg: RegularizationParams,
    fields: &[f64],
    grid_n: usize,
) -> Result<GapCurve> {
    if fields.is_empty() {
        return Err(Error::Domain("empty field grid".into()));
    }
    let grid = BlochGrid::new(base, reg, grid_n)?;
    let delta = fields
        .iter()
        .map(|&m| grid.gap(m).map(|g| g.delta))
        .collect::<Result<Vec<_>>>()?;
    GapCurve::from_samples(fields.to_vec(), delta)
}

/// Nearest-neighbour dipolar coupling `|3 pi gamma0 / k * G_xx(a x)|`.
pub fn dipolar_coupling(params: &PhysicalParams) -> f64 {
    let g = greens_in_plane(params.spacing, 0.0, params.k());
    (g[0][0] * params.coupling_prefactor()).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingScan {
    pub spacing: Vec<f64>,
    pub delta_max: Vec<f64>,
    pub argmax_mu_b: Vec<f64>,
    pub coupling: Vec<f64>,
    /// log-log slope of `delta_max` against spacing.
    pub delta_slope: f64,
    /// log-log slope of the dipolar coupling against spacing.
    pub coupling_slope: f64,
}

impl SpacingScan {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "spacing,delta_max,argmax_mu_b,coupling")?;
        for i in 0..self.spacing.len() {
            writeln!(
                w,
                "{:.10e},{:.10e},{:.10e},{:.10e}",
                self.spacing[i], self.delta_max[i], self.argmax_mu_b[i], self.coupling[i]
            )?;
        }
        Ok(())
    }
}

/// Field grid for the spacing scan: `n` equally spaced values on
/// `[0, mu_max (a_ref / a)^3]`.
pub fn scaled_fields(a: f64, a_ref: f64, mu_max: f64, n: usize) -> Vec<f64> {
    let top = mu_max * (a_ref / a).powi(3);
    (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect()
}

/// `Delta_max(a)` and `J(a)` over the given spacings. The field window scales
/// as `1/a^3` from `[0, mu_max]` at `a = 0.05`.
pub fn gap_scaling_vs_spacing(
    base: &PhysicalParams,
    spacings: &[f64],
    mu_max: f64,
    n_fields: usize,
    grid_n: usize,
) -> Result<SpacingScan> {
    if spacings.len() < 2 {
        return Err(Error::Domain("need at least two spacings".into()));
    }
    let mut delta_max = Vec::new();
    let mut argmax = Vec::new();
    let mut coupling = Vec::new();
    for &a in spacings {
        let p = base.with_spacing(a);
        let fields = scaled_fields(a, 0.05 * base.lambda, mu_max, n_fields);
        let curve = gap_vs_field(&p, RegularizationParams::for_spacing(a), &fields, grid_n)?;
        delta_max.push(curve.delta_max);
        argmax.push(curve.argmax_mu_b);
        coupling.push(dipolar_coupling(&p));
    }
    let log = |v: &[f64]| -> Vec<(f64, f64)> {
        spacings
            .iter()
            .zip(v)
            .map(|(a, y)| (a.ln(), y.ln()))
            .collect()
    };
    Ok(SpacingScan {
        delta_slope: linear_fit(&log(&delta_max))?.0,
        coupling_slope: linear_fit(&log(&coupling))?.0,
        spacing: spacings.to_vec(),
        delta_max,
        argmax_mu_b: argmax,
        coupling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormalize_spans_the_same_space() {
        let a = [
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let b = [
            C64::new(0.0, 1.0),
            C64::new(2.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ];
        let q = orthonormalize(&[a, b]);
        let ip: C64 = q[0].iter().zip(&q[1]).map(|(x, y)| x.conj() * y).sum();
        assert!(ip.norm() < 1e-14);
        for v in &q {
            assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn broken_link_requests_refinement() {
        let a = vec![[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]];
        let b = vec![[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]];
        assert!(matches!(link(&a, &b), Err(Error::RefineGrid { .. })));
    }

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let (s, c) = linear_fit(&pts).unwrap();
        assert!((s - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_window_scales_cubically() {
        let f = scaled_fields(0.025, 0.05, 40.0, 5);
        assert_eq!(f.len(), 5);
        assert!((f[4] - 320.0).abs() < 1e-9);
    }
}
