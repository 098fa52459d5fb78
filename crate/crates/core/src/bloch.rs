//! Infinite-lattice Bloch bands.
//!
//! The 4x4 Bloch matrix acts on `(x,1), (y,1), (x,2), (y,2)`
//! (polarisation, sublattice):
//!
//! ```text
//! M(k) = -i gamma0/2 + xi(mu B) + (3 pi gamma0 / k) [[S0, S+], [S-, S0]]
//! ```
//!
//! with `S0 = sum_{R != 0} e^{ik.R} G(R)` and `S+- = sum_R e^{ik.R} G(R +- b)`.
//! The slowly convergent real-space sums are evaluated as Gaussian-regulated
//! reciprocal sums over the in-plane Weyl decomposition.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::greens::{regularized_origin_scalar, weyl_scalar_scaled, weyl_tensor, Tensor2};
use crate::lattice::{build_geometry, dot, norm, sub, LatticeGeometry, Vec2};
use crate::linalg::{eig_sorted, eigvals_sorted};
use crate::params::{PhysicalParams, RegularizationParams};

const ZERO2: Tensor2 = [[C64 { re: 0.0, im: 0.0 }; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Offset {
    /// Same sublattice, `R != 0`.
    Zero,
    /// `G(R + b)`: coupling from sublattice 1 to 2.
    PlusB,
    /// `G(R - b)`.
    MinusB,
}

/// The three lattice sums at one Bloch vector, split into the contributions
/// of evanescent (`|G - k| > k`) and radiative (`|G - k| < k`) plane waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSums {
    pub zero: Tensor2,
    pub plus_b: Tensor2,
    pub minus_b: Tensor2,
    /// Radiative part of each sum (already included above).
    pub radiative: [Tensor2; 3],
    /// `exp((k a_ho)^2/2) G*(0)` (already subtracted from `zero`).
    pub origin: C64,
    /// Number of reciprocal vectors summed.
    pub terms: usize,
}

impl LatticeSums {
    pub fn get(&self, offset: Offset) -> Tensor2 {
        match offset {
            Offset::Zero => self.zero,
            Offset::PlusB => self.plus_b,
            Offset::MinusB => self.minus_b,
        }
    }
}

/// Precomputed reciprocal lattice for repeated sums at fixed geometry and
/// regulator.
#[derive(Debug, Clone)]
pub struct LatticeSummer {
    pub geom: LatticeGeometry,
    pub k: f64,
    pub reg: RegularizationParams,
    /// Reciprocal vectors sorted by length.
    recip: Vec<Vec2>,
    ring_width: f64,
    cap: f64,
}

impl LatticeSummer {
    pub fn new(geom: LatticeGeometry, k: f64, reg: RegularizationParams) -> Result<Self> {
        reg.validate(2.0 * PI / k)?;
        // erfc(x) < 1e-40 beyond x ~ 9.4; beyond that nothing can matter
        let cap = 14.0 / reg.a_ho + 2.0 * norm(geom.sym_points.k) + 2.0 * k;
        let gmin = norm(geom.g1).min(norm(geom.g2));
        let nmax = (cap / (gmin * 0.5)).ceil() as i64 + 1;
        let mut recip = Vec::new();
        for m1 in -nmax..=nmax {
            for m2 in -nmax..=nmax {
                let g = geom.reciprocal(m1, m2);
                if norm(g) <= cap {
                    recip.push(g);
                }
            }
        }
        recip.sort_by(|a, b| norm(*a).total_cmp(&norm(*b)));
        Ok(Self {
            geom,
            k,
            reg,
            recip,
            ring_width: gmin,
            cap,
        })
    }

    pub fn for_params(params: &PhysicalParams, reg: RegularizationParams) -> Result<Self> {
        params.validate()?;
        Self::new(build_geometry(params.spacing)?, params.k(), reg)
    }

    /// All three lattice sums at Bloch vector `kb`.
    pub fn sums(&self, kb: Vec2) -> Result<LatticeSums> {
        let k = self.k;
        let a_ho = self.reg.a_ho;
        let b = self.geom.b;
        let inv_area = 1.0 / self.geom.cell_area;
        let kb_norm = norm(kb);

        let mut zero = ZERO2;
        let mut plus = ZERO2;
        let mut minus = ZERO2;
        let mut rad = [ZERO2; 3];
        let mut terms = 0;

        let mut ring_edge = self.ring_width;
        let mut ring_total = 0.0;
        let mut converged = false;
        for &g in &self.recip {
            let r = norm(g);
            if r > ring_edge {
                let running = frob(&zero);
                if ring_edge > kb_norm + k && ring_total < self.reg.g_cutoff * running {
                    converged = true;
                    break;
                }
                ring_total = 0.0;
                while ring_edge < r {
                    ring_edge += self.ring_width;
                }
            }
            let q = sub(g, kb);
            let q2 = dot(q, q);
            let kernel = weyl_scalar_scaled(q2, k, a_ho)?;
            let t = weyl_tensor(q, k, kernel);
            let phase = C64::from_polar(1.0, dot(b, q));
            let radiative = q2 < k * k;
            for i in 0..2 {
                for j in 0..2 {
                    let v = t[i][j] * inv_area;
                    zero[i][j] += v;
                    plus[i][j] += v * phase;
                    minus[i][j] += v * phase.conj();
                    if radiative {
                        rad[0][i][j] += v;
                        rad[1][i][j] += v * phase;
                        rad[2][i][j] += v * phase.conj();
                    }
                }
            }
            ring_total += frob(&t) * inv_area;
            terms += 1;
        }
        if !converged {
            return Err(Error::NonConvergence {
                a_ho,
                radius: ring_edge,
                cap: self.cap,
            });
        }
        // the kernel already carries exp((k a_ho)^2/2); match it on the self term
        let origin = regularized_origin_scalar(k, a_ho) * (0.5 * k * k * a_ho * a_ho).exp();
        zero[0][0] -= origin;
        zero[1][1] -= origin;
        Ok(LatticeSums {
            zero,
            plus_b: plus,
            minus_b: minus,
            radiative: rad,
            origin,
            terms,
        })
    }
}

fn frob(t: &Tensor2) -> f64 {
    t.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `sum_R e^{i kb.R} G(R + offset)` (excluding `R = 0` for the zero offset)
/// via the regulated reciprocal sum.
pub fn lattice_sum(
    kb: Vec2,
    offset: Offset,
    geom: &LatticeGeometry,
    k: f64,
    reg: RegularizationParams,
) -> Result<Tensor2> {
    let s = LatticeSummer::new(*geom, k, reg)?;
    Ok(s.sums(kb)?.get(offset))
}

/// 4x4 Bloch matrix over `(x,1), (y,1), (x,2), (y,2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMatrix(pub Array2<C64>);

/// Interaction part `(3 pi gamma0 / k) [[S0, S+], [S-, S0]]`.
pub fn interaction_block(sums: &LatticeSums, params: &PhysicalParams) -> Array2<C64> {
    let pref = params.coupling_prefactor();
    let mut m = Array2::<C64>::zeros((4, 4));
    for i in 0..2 {
        for j in 0..2 {
            m[[i, j]] = sums.zero[i][j] * pref;
            m[[i, 2 + j]] = sums.plus_b[i][j] * pref;
            m[[2 + i, j]] = sums.minus_b[i][j] * pref;
            m[[2 + i, 2 + j]] = sums.zero[i][j] * pref;
        }
    }
    m
}

/// Single-atom part: `-i gamma0/2` on the diagonal and the Zeeman block
/// `xi_xy = -i mu B`, `xi_yx = +i mu B` on each sublattice.
pub fn onsite_block(params: &PhysicalParams) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((4, 4));
    let z = params.zeeman();
    for s in 0..2 {
        let o = 2 * s;
        m[[o, o]] = C64::new(0.0, -0.5 * params.gamma0);
        m[[o + 1, o + 1]] = C64::new(0.0, -0.5 * params.gamma0);
        m[[o, o + 1]] = C64::new(0.0, -z);
        m[[o + 1, o]] = C64::new(0.0, z);
    }
    m
}

pub fn assemble_from_sums(sums: &LatticeSums, params: &PhysicalParams) -> BlochMatrix {
    BlochMatrix(onsite_block(params) + interaction_block(sums, params))
}

/// Bloch matrix at `kb` for the given parameters.
pub fn assemble_bloch_matrix(
    kb: Vec2,
    params: &PhysicalParams,
    reg: RegularizationParams,
) -> Result<BlochMatrix> {
    let s = LatticeSummer::for_params(params, reg)?;
    Ok(assemble_from_sums(&s.sums(kb)?, params))
}

/// Hermitian (coherent) part of the Bloch matrix: Zeeman block plus the
/// evanescent part of the lattice sums, with the radiative plane waves, the
/// imaginary part of the self term and the single-atom decay removed.
pub fn coherent_matrix(sums: &LatticeSums, params: &PhysicalParams) -> Array2<C64> {
    let mut s = *sums;
    for (t, r) in [&mut s.zero, &mut s.plus_b, &mut s.minus_b]
        .into_iter()
        .zip(sums.radiative.iter())
    {
        for i in 0..2 {
            for j in 0..2 {
                t[i][j] -= r[i][j];
            }
        }
    }
    // restore the imaginary part of the self term, leaving only its real part
    s.zero[0][0] += C64::new(0.0, sums.origin.im);
    s.zero[1][1] += C64::new(0.0, sums.origin.im);
    let mut m = interaction_block(&s, params);
    let z = params.zeeman();
    for o in [0, 2] {
        m[[o, o + 1]] += C64::new(0.0, -z);
        m[[o + 1, o]] += C64::new(0.0, z);
    }
    m
}

/// Eigen-solution at one Bloch vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub kb: Vec2,
    /// `E = omega - i gamma`, ascending real part.
    pub eigenvalues: [C64; 4],
    /// Right eigenvectors (unit norm), `eigenvectors[n]` belongs to
    /// `eigenvalues[n]`.
    pub eigenvectors: [[C64; 4]; 4],
    pub in_light_cone: bool,
}

impl BandPoint {
    pub fn gamma(&self, n: usize) -> f64 {
        -self.eigenvalues[n].im
    }
}

/// Shortest representative of `kb` modulo reciprocal vectors.
pub fn fold_to_bz(geom: &LatticeGeometry, kb: Vec2) -> Vec2 {
    let f = geom.to_fractional(kb);
    let (c1, c2) = (f[0].round() as i64, f[1].round() as i64);
    let mut best = kb;
    let mut best_n = f64::INFINITY;
    for d1 in -2..=2 {
        for d2 in -2..=2 {
            let q = sub(kb, geom.reciprocal(c1 + d1, c2 + d2));
            let n = norm(q);
            if n < best_n {
                best_n = n;
                best = q;
            }
        }
    }
    best
}

pub fn in_light_cone(geom: &LatticeGeometry, kb: Vec2, k: f64) -> bool {
    norm(fold_to_bz(geom, kb)) < k
}

pub fn band_point(summer: &LatticeSummer, params: &PhysicalParams, kb: Vec2) -> Result<BandPoint> {
    let m = assemble_from_sums(&summer.sums(kb)?, params);
    band_point_from_matrix(&summer.geom, summer.k, kb, &m.0)
}

fn band_point_from_matrix(
    geom: &LatticeGeometry,
    k: f64,
    kb: Vec2,
    m: &Array2<C64>,
) -> Result<BandPoint> {
    let (vals, vecs) = eig_sorted(m)?;
    let mut eigenvalues = [C64::new(0.0, 0.0); 4];
    let mut eigenvectors = [[C64::new(0.0, 0.0); 4]; 4];
    for n in 0..4 {
        eigenvalues[n] = vals[n];
        for r in 0..4 {
            eigenvectors[n][r] = vecs[[r, n]];
        }
    }
    Ok(BandPoint {
        kb,
        eigenvalues,
        eigenvectors,
        in_light_cone: in_light_cone(geom, kb, k),
    })
}

/// Band structure along a path of Bloch vectors (evaluated in parallel, output
/// in input order). Eigenvalues at every point are sorted by real part;
/// [`track_bands`] gives the continuity-based labelling.
pub fn band_structure(
    path: &[Vec2],
    params: &PhysicalParams,
    reg: RegularizationParams,
) -> Result<Vec<BandPoint>> {
    let summer = LatticeSummer::for_params(params, reg)?;
    path.par_iter()
        .map(|&kb| band_point(&summer, params, kb))
        .collect()
}

/// For each point, the permutation mapping tracked band label to Re-sorted
/// index, chosen to maximise eigenvector overlap with the previous point.
pub fn track_bands(points: &[BandPoint]) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(points.len());
    if points.is_empty() {
        return out;
    }
    out.push([0, 1, 2, 3]);
    let perms = permutations4();
    for w in points.windows(2) {
        let prev_order = *out.last().unwrap();
        let (p, q) = (&w[0], &w[1]);
        let mut best = ([0, 1, 2, 3], f64::NEG_INFINITY);
        for perm in &perms {
            let score: f64 = (0..4)
                .map(|label| {
                    let a = &p.eigenvectors[prev_order[label]];
                    let b = &q.eigenvectors[perm[label]];
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.conj() * y)
                        .sum::<C64>()
                        .norm()
                })
                .sum();
            if score > best.1 + 1e-12 {
                best = (*perm, score);
            }
        }
        out.push(best.0);
    }
    out
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&i| seen[i] = true);
                    if seen.iter().all(|&s| s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Lattice sums on a uniform grid, reusable for any Zeeman shift.
#[derive(Debug, Clone)]
pub struct BlochGrid {
    pub n: usize,
    pub points: Vec<Vec2>,
    pub interactions: Vec<Array2<C64>>,
    pub params: PhysicalParams,
    pub geom: LatticeGeometry,
}

impl BlochGrid {
    /// `n x n` grid over the Brillouin-zone torus (includes Gamma).
    pub fn new(params: &PhysicalParams, reg: RegularizationParams, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("grid size must be >= 2, got {n}")));
        }
        let summer = LatticeSummer::for_params(params, reg)?;
        let points = summer.geom.bz_grid(n, 0.0);
        let interactions = points
            .par_iter()
            .map(|&kb| summer.sums(kb).map(|s| interaction_block(&s, params)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            points,
            interactions,
            params: *params,
            geom: summer.geom,
        })
    }

    /// Bloch matrix at grid index `idx` for Zeeman shift `mu_b`.
    pub fn matrix(&self, idx: usize, mu_b: f64) -> Array2<C64> {
        onsite_block(&self.params.with_mu_b(mu_b)) + &self.interactions[idx]
    }

    pub fn eigenvalues(&self, mu_b: f64) -> Result<Vec<[C64; 4]>> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| {
                let v = eigvals_sorted(&self.matrix(i, mu_b))?;
                Ok([v[0], v[1], v[2], v[3]])
            })
            .collect()
    }

    pub fn band_points(&self, mu_b: f64) -> Result<Vec<BandPoint>> {
        let k = self.params.k();
        (0..self.points.len())
            .into_par_iter()
            .map(|i| band_point_from_matrix(&self.geom, k, self.points[i], &self.matrix(i, mu_b)))
            .collect()
    }

    pub fn gap(&self, mu_b: f64) -> Result<GapReport> {
        gap_from_eigenvalues(&self.points, &self.eigenvalues(mu_b)?)
    }
}

/// Global indirect gap between the second and third bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `min Re E3 - max Re E2`; non-positive means closed.
    pub delta: f64,
    /// Top of the lower band pair.
    pub lower_max: f64,
    /// Bottom of the upper band pair.
    pub upper_min: f64,
    pub argmax_lower: Vec2,
    pub argmin_upper: Vec2,
}

impl GapReport {
    pub fn is_open(&self) -> bool {
        self.delta > 0.0
    }
}

pub fn gap_from_eigenvalues(points: &[Vec2], evs: &[[C64; 4]]) -> Result<GapReport> {
    if points.is_empty() {
        return Err(Error::Domain("empty k grid".into()));
    }
    let mut lower = (f64::NEG_INFINITY, points[0]);
    let mut upper = (f64::INFINITY, points[0]);
    for (p, e) in points.iter().zip(evs) {
        if e[1].re > lower.0 {
            lower = (e[1].re, *p);
        }
        if e[2].re < upper.0 {
            upper = (e[2].re, *p);
        }
    }
    Ok(GapReport {
        delta: upper.0 - lower.0,
        lower_max: lower.0,
        upper_min: upper.0,
        argmax_lower: lower.1,
        argmin_upper: upper.1,
    })
}

/// Gap over a uniform `grid_n x grid_n` Brillouin-zone grid.
pub fn band_gap(
    params: &PhysicalParams,
    reg: RegularizationParams,
    grid_n: usize,
) -> Result<GapReport> {
    if grid_n < 12 {
        return Err(Error::Domain(format!("grid_n must be >= 12, got {grid_n}")));
    }
    BlochGrid::new(params, reg, grid_n)?.gap(params.mu_b)
}

/// CSV rows `k_index,kx,ky,arc_len,band,re_e,gamma,in_light_cone` (energies in
/// units of gamma0, wavevectors in units of 1/lambda).
pub fn write_bands_csv<W: std::io::Write>(
    points: &[BandPoint],
    arc: &[f64],
    params: &PhysicalParams,
    mut w: W,
) -> Result<()> {
    writeln!(w, "k_index,kx,ky,arc_len,band,re_e,gamma,in_light_cone")?;
    for (i, p) in points.iter().enumerate() {
        for n in 0..4 {
            writeln!(
                w,
                "{},{:.10e},{:.10e},{:.10e},{},{:.10e},{:.10e},{}",
                i,
                p.kb[0] * params.lambda,
                p.kb[1] * params.lambda,
                arc.get(i).copied().unwrap_or(0.0) * params.lambda,
                n + 1,
                p.eigenvalues[n].re / params.gamma0,
                -p.eigenvalues[n].im / params.gamma0,
                p.in_light_cone as u8
            )?;
        }
    }
    Ok(())
}
