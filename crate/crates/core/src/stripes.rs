//! Spectra of stripes that are periodic along one axis and open along the
//! other, with edge-state classification and chiral group velocities.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::greens::greens_in_plane;
use crate::lattice::{add, scale, sub, BoundaryType, FiniteLattice, PeriodicAxis};
use crate::linalg::eig_sorted;
use crate::params::PhysicalParams;

/// Number of extremal atom lines summed on each side when classifying.
pub const EDGE_LINES: usize = 4;
/// Top/bottom weight ratio above which a state counts as an edge state.
pub const EDGE_RATIO: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClass {
    TopEdge,
    BottomEdge,
    Bulk,
}

impl EdgeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeClass::TopEdge => "top-edge",
            EdgeClass::BottomEdge => "bottom-edge",
            EdgeClass::Bulk => "bulk",
        }
    }
}

/// Which open edge of a stripe. "Top" is the side with the larger coordinate
/// along `n = (-d_y, d_x)`, `d` being the periodic direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn class(&self) -> EdgeClass {
        match self {
            Side::Top => EdgeClass::TopEdge,
            Side::Bottom => EdgeClass::BottomEdge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeState {
    /// Block index, `k = 2 pi p / (W T)`.
    pub p: i64,
    /// Quasi-momentum along the periodic axis, in `(-pi/T, pi/T]`.
    pub k: f64,
    pub energy: C64,
    pub class: EdgeClass,
    /// Weight on the top (bottom) extremal lines.
    pub top_weight: f64,
    pub bottom_weight: f64,
}

impl StripeState {
    pub fn gamma(&self) -> f64 {
        -self.energy.im
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeSpectrum {
    pub boundary_type: BoundaryType,
    pub image_sum: ImageSum,
    pub period: f64,
    pub cells: usize,
    pub per_cell: usize,
    pub images: usize,
    pub states: Vec<StripeState>,
}

impl StripeSpectrum {
    /// States with `lo < Re E < hi`.
    pub fn in_window(&self, lo: f64, hi: f64) -> impl Iterator<Item = &StripeState> {
        self.states
            .iter()
            .filter(move |s| s.energy.re > lo && s.energy.re < hi)
    }

    /// CSV rows `k_period_over_pi,re_e,gamma,classification`.
    pub fn write_csv<W: std::io::Write>(&self, params: &PhysicalParams, mut w: W) -> Result<()> {
        writeln!(w, "k_period_over_pi,re_e,gamma,classification")?;
        for s in &self.states {
            writeln!(
                w,
                "{:.10e},{:.10e},{:.10e},{}",
                s.k * self.period / PI,
                s.energy.re / params.gamma0,
                s.gamma() / params.gamma0,
                s.class.as_str()
            )?;
        }
        Ok(())
    }
}

fn axis_of(lat: &FiniteLattice) -> Result<PeriodicAxis> {
    lat.periodic
        .ok_or_else(|| Error::Lattice("stripe spectrum needs a periodic axis".into()))
}

/// Cell shifts `s` (with `|s| <= images`) that couple cell `c` to cell
/// `c - d (mod W)`, grouped by `d`.
fn shifts_for(d: usize, cells: usize, images: usize) -> Vec<i64> {
    let w = cells as i64;
    (-(images as i64)..=images as i64)
        .filter(|s| s.rem_euclid(w) as usize == d)
        .collect()
}

/// How the periodic images of the coupling are summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ImageSum {
    /// Cell shifts `|s| <= images` with unit weight (a finite ring).
    Truncated,
    /// Infinite stripe: sums damped by `exp(-eps (s T)^2)` for
    /// `eps = eps0 / 2^j`, `j < levels`, extrapolated to `eps -> 0`.
    Extrapolated { eps0: f64, levels: usize },
}

impl Default for ImageSum {
    fn default() -> Self {
        ImageSum::Truncated
    }
}

impl ImageSum {
    /// Default converged summation: `eps0 = 0.25 / lambda^2`, five levels.
    pub fn extrapolated(lambda: f64) -> Self {
        ImageSum::Extrapolated {
            eps0: 0.25 / (lambda * lambda),
            levels: 5,
        }
    }

    fn max_shift(&self, axis: &PeriodicAxis) -> i64 {
        match *self {
            ImageSum::Truncated => axis.images as i64,
            ImageSum::Extrapolated { eps0, levels } => {
                let eps_min = eps0 / 2f64.powi(levels as i32 - 1);
                ((40.0 / eps_min).sqrt() / axis.period).ceil() as i64
            }
        }
    }

    /// Per-level damping weights of shift `s`, and the extrapolation
    /// coefficients combining the levels.
    fn levels(&self, period: f64) -> (Vec<f64>, Vec<f64>) {
        match *self {
            ImageSum::Truncated => (vec![0.0], vec![1.0]),
            ImageSum::Extrapolated { eps0, levels } => {
                let eps: Vec<f64> = (0..levels).map(|j| eps0 / 2f64.powi(j as i32)).collect();
                // Lagrange weights at eps = 0
                let coef = (0..levels)
                    .map(|j| {
                        (0..levels)
                            .filter(|&m| m != j)
                            .map(|m| eps[m] / (eps[m] - eps[j]))
                            .product()
                    })
                    .collect();
                (eps.iter().map(|e| e * period * period).collect(), coef)
            }
        }
    }
}

/// Coupling blocks `G_s[(m, a), (m', b)] = (3 pi / k) G_ab(r_m - r_m' + s T)`
/// for `|s| <= smax` (self term dropped).
fn shift_blocks(
    lat: &FiniteLattice,
    axis: &PeriodicAxis,
    params: &PhysicalParams,
    smax: i64,
) -> Vec<(i64, Array2<C64>)> {
    let k = params.k();
    let pref = params.coupling_prefactor();
    let t = axis.translation();
    let sites = &lat.positions[..axis.per_cell];
    let n = 2 * axis.per_cell;
    (-smax..=smax)
        .into_par_iter()
        .map(|s| {
            let mut b = Array2::<C64>::zeros((n, n));
            let shift = scale(t, s as f64);
            for (m, &rm) in sites.iter().enumerate() {
                for (mp, &rmp) in sites.iter().enumerate() {
                    if s == 0 && m == mp {
                        continue;
                    }
                    let r = add(sub(rm, rmp), shift);
                    let g = greens_in_plane(r[0], r[1], k);
                    for a in 0..2 {
                        for c in 0..2 {
                            b[[2 * m + a, 2 * mp + c]] = g[a][c] * pref;
                        }
                    }
                }
            }
            (s, b)
        })
        .collect()
}

fn onsite(n_atoms: usize, params: &PhysicalParams) -> Array2<C64> {
    let mut h = Array2::<C64>::zeros((2 * n_atoms, 2 * n_atoms));
    let z = params.zeeman();
    for i in 0..n_atoms {
        let o = 2 * i;
        h[[o, o]] = C64::new(0.0, -0.5 * params.gamma0);
        h[[o + 1, o + 1]] = C64::new(0.0, -0.5 * params.gamma0);
        h[[o, o + 1]] = C64::new(0.0, -z);
        h[[o + 1, o]] = C64::new(0.0, z);
    }
    h
}

/// Block index in `(-W/2, W/2]` and its quasi-momentum.
fn block_momentum(p: usize, axis: &PeriodicAxis) -> (i64, f64) {
    let w = axis.cells as i64;
    let mut q = p as i64;
    if q > w / 2 {
        q -= w;
    }
    (q, 2.0 * PI * q as f64 / (w as f64 * axis.period))
}

/// Line index of each site within one cell and the number of lines.
fn cell_lines(lat: &FiniteLattice, axis: &PeriodicAxis) -> (Vec<usize>, usize) {
    let (levels, idx) = lat.lines();
    (idx[..axis.per_cell].to_vec(), levels.len())
}

/// Classify from per-atom weights and line indices (`0` = bottom line).
pub fn classify_weights(weights: &[f64], line: &[usize], n_lines: usize) -> (EdgeClass, f64, f64) {
    let mut top = 0.0;
    let mut bottom = 0.0;
    for (w, &l) in weights.iter().zip(line) {
        if l < EDGE_LINES {
            bottom += w;
        }
        if l + EDGE_LINES >= n_lines {
            top += w;
        }
    }
    let class = if top > EDGE_RATIO * bottom {
        EdgeClass::TopEdge
    } else if bottom > EDGE_RATIO * top {
        EdgeClass::BottomEdge
    } else {
        EdgeClass::Bulk
    };
    (class, top, bottom)
}

/// Edge classification of an eigenvector on the full lattice (amplitudes in
/// the per-atom `(x, y)` basis) from the excitation on the four extremal atom
/// lines on either side.
pub fn classify_edge_state(eigvec: &[C64], lat: &FiniteLattice) -> Result<EdgeClass> {
    if eigvec.len() != 2 * lat.len() {
        return Err(Error::Domain(format!(
            "eigenvector has {} entries for {} atoms",
            eigvec.len(),
            lat.len()
        )));
    }
    let (levels, line) = lat.lines();
    if levels.len() < 2 * EDGE_LINES {
        return Err(Error::Lattice(format!(
            "classification needs >= {} atom lines, got {}",
            2 * EDGE_LINES,
            levels.len()
        )));
    }
    let w: Vec<f64> = eigvec
        .chunks(2)
        .map(|c| c[0].norm_sqr() + c[1].norm_sqr())
        .collect();
    Ok(classify_weights(&w, &line, levels.len()).0)
}

/// Spectrum via the block-circulant decomposition: one `2 n_cell` block per
/// quasi-momentum `k = 2 pi p / (W T)`, images truncated at `|s| <= images`.
pub fn stripe_spectrum(lat: &FiniteLattice, params: &PhysicalParams) -> Result<StripeSpectrum> {
    stripe_spectrum_with(lat, params, ImageSum::Truncated)
}

pub fn stripe_spectrum_with(
    lat: &FiniteLattice,
    params: &PhysicalParams,
    sum: ImageSum,
) -> Result<StripeSpectrum> {
    params.validate()?;
    let axis = axis_of(lat)?;
    let (line, n_lines) = cell_lines(lat, &axis);
    if n_lines < 2 * EDGE_LINES {
        return Err(Error::Lattice(format!(
            "stripe needs >= {} atom lines, got {n_lines}",
            2 * EDGE_LINES
        )));
    }
    if let ImageSum::Extrapolated { eps0, levels } = sum {
        if !(eps0 > 0.0 && eps0.is_finite()) || levels == 0 {
            return Err(Error::Domain(format!(
                "extrapolated image sum needs eps0 > 0 and levels >= 1 (got {eps0}, {levels})"
            )));
        }
    }
    let blocks = shift_blocks(lat, &axis, params, sum.max_shift(&axis));
    let (damp, coef) = sum.levels(axis.period);
    let base = onsite(axis.per_cell, params);
    let per_block: Vec<Vec<StripeState>> = (0..axis.cells)
        .into_par_iter()
        .map(|p| {
            let (q, k) = block_momentum(p, &axis);
            let mut h = base.clone();
            for (s, b) in &blocks {
                let s2 = (*s * *s) as f64;
                let w: f64 = damp
                    .iter()
                    .zip(&coef)
                    .map(|(d, c)| c * (-d * s2).exp())
                    .sum();
                let phase = C64::from_polar(w, -k * *s as f64 * axis.period);
                h.scaled_add(phase, b);
            }
            let (vals, vecs) = eig_sorted(&h)?;
            Ok(vals
                .iter()
                .enumerate()
                .map(|(n, &e)| {
                    let w: Vec<f64> = (0..axis.per_cell)
                        .map(|m| vecs[[2 * m, n]].norm_sqr() + vecs[[2 * m + 1, n]].norm_sqr())
                        .collect();
                    let (class, top, bottom) = classify_weights(&w, &line, n_lines);
                    StripeState {
                        p: q,
                        k,
                        energy: e,
                        class,
                        top_weight: top,
                        bottom_weight: bottom,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(StripeSpectrum {
        boundary_type: lat.boundary_type,
        image_sum: sum,
        period: axis.period,
        cells: axis.cells,
        per_cell: axis.per_cell,
        images: axis.images,
        states: per_block.into_iter().flatten().collect(),
    })
}

/// Dense `2N x 2N` stripe Hamiltonian with image sums along the periodic axis.
pub fn stripe_hamiltonian(lat: &FiniteLattice, params: &PhysicalParams) -> Result<Array2<C64>> {
    let axis = axis_of(lat)?;
    let blocks = shift_blocks(lat, &axis, params, axis.images as i64);
    let pc = axis.per_cell;
    let nb = 2 * pc;
    let mut h = onsite(lat.len(), params);
    for c in 0..axis.cells {
        for cp in 0..axis.cells {
            let d = (c + axis.cells - cp) % axis.cells;
            for s in shifts_for(d, axis.cells, axis.images) {
                let b = &blocks[(s + axis.images as i64) as usize].1;
                let mut view =
                    h.slice_mut(ndarray::s![c * nb..(c + 1) * nb, cp * nb..(cp + 1) * nb]);
                view += b;
            }
        }
    }
    Ok(h)
}

/// Spectrum by full diagonalisation; the quasi-momentum of each eigenvector
/// is the block index carrying most of its weight after a discrete Fourier
/// transform over cells.
pub fn stripe_spectrum_dense(
    lat: &FiniteLattice,
    params: &PhysicalParams,
) -> Result<StripeSpectrum> {
    let axis = axis_of(lat)?;
    let (line, n_lines) = cell_lines(lat, &axis);
    let h = stripe_hamiltonian(lat, params)?;
    let (vals, vecs) = eig_sorted(&h)?;
    let w = axis.cells;
    let nb = 2 * axis.per_cell;
    let mut states = Vec::with_capacity(vals.len());
    for (n, &e) in vals.iter().enumerate() {
        let mut best = (0usize, -1.0);
        for p in 0..w {
            let (_, k) = block_momentum(p, &axis);
            let mut weight = 0.0;
            for r in 0..nb {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..w {
                    acc +=
                        vecs[[c * nb + r, n]] * C64::from_polar(1.0, -k * c as f64 * axis.period);
                }
                weight += acc.norm_sqr();
            }
            if weight > best.1 {
                best = (p, weight);
            }
        }
        let (q, k) = block_momentum(best.0, &axis);
        let atom_w: Vec<f64> = (0..axis.per_cell)
            .map(|m| {
                (0..w)
                    .map(|c| {
                        let o = c * nb + 2 * m;
                        vecs[[o, n]].norm_sqr() + vecs[[o + 1, n]].norm_sqr()
                    })
                    .sum()
            })
            .collect();
        let (class, top, bottom) = classify_weights(&atom_w, &line, n_lines);
        states.push(StripeState {
            p: q,
            k,
            energy: e,
            class,
            top_weight: top,
            bottom_weight: bottom,
        });
    }
    Ok(StripeSpectrum {
        boundary_type: lat.boundary_type,
        image_sum: ImageSum::Truncated,
        period: axis.period,
        cells: axis.cells,
        per_cell: axis.per_cell,
        images: axis.images,
        states,
    })
}

/// Edge states of one side inside an energy window, linked into branches:
/// states at neighbouring block indices are paired greedily by closest
/// energy (jumps larger than half the window are not linked).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeBranches {
    pub side: Side,
    /// Each branch lists its states in order of increasing block index
    /// (cyclically).
    pub branches: Vec<Vec<StripeState>>,
}

impl EdgeBranches {
    /// Branches whose energy passes through `e_ref`.
    pub fn crossing(&self, e_ref: f64) -> Vec<&Vec<StripeState>> {
        self.branches
            .iter()
            .filter(|b| {
                b.windows(2)
                    .any(|w| (w[0].energy.re - e_ref) * (w[1].energy.re - e_ref) < 0.0)
            })
            .collect()
    }
}

pub fn edge_branches(spec: &StripeSpectrum, side: Side, lo: f64, hi: f64) -> EdgeBranches {
    let w = spec.cells;
    let class = side.class();
    let mut by_p: Vec<Vec<StripeState>> = vec![Vec::new(); w];
    for s in spec.in_window(lo, hi).filter(|s| s.class == class) {
        by_p[s.p.rem_euclid(w as i64) as usize].push(s.clone());
    }
    let max_jump = 0.5 * (hi - lo);
    // next[p][i] = index of the partner at p + 1
    let mut next: Vec<Vec<Option<usize>>> = by_p.iter().map(|v| vec![None; v.len()]).collect();
    let mut has_prev: Vec<Vec<bool>> = by_p.iter().map(|v| vec![false; v.len()]).collect();
    for p in 0..w {
        let q = (p + 1) % w;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, a) in by_p[p].iter().enumerate() {
            for (j, b) in by_p[q].iter().enumerate() {
                let d = (a.energy.re - b.energy.re).abs();
                if d < max_jump {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, i, j) in pairs {
            if next[p][i].is_none() && !has_prev[q][j] {
                next[p][i] = Some(j);
                has_prev[q][j] = true;
            }
        }
    }
    let mut seen: Vec<Vec<bool>> = by_p.iter().map(|v| vec![false; v.len()]).collect();
    let mut branches = Vec::new();
    let walk = |p0: usize, i0: usize, seen: &mut Vec<Vec<bool>>| {
        let mut out = Vec::new();
        let (mut p, mut i) = (p0, i0);
        while !seen[p][i] {
            seen[p][i] = true;
            out.push(by_p[p][i].clone());
            match next[p][i] {
                Some(j) => {
                    p = (p + 1) % w;
                    i = j;
                }
                None => break,
            }
        }
        out
    };
    for p in 0..w {
        for i in 0..by_p[p].len() {
            if !has_prev[p][i] {
                branches.push(walk(p, i, &mut seen));
            }
        }
    }
    // closed loops around the zone
    for p in 0..w {
        for i in 0..by_p[p].len() {
            if !seen[p][i] {
                branches.push(walk(p, i, &mut seen));
            }
        }
    }
    EdgeBranches { side, branches }
}

/// Finite-difference group velocities `d Re E / dk` along the branches of
/// one edge that traverse `e_ref` inside `(lo, hi)`, in units of gamma0 times
/// the lattice spacing.
pub fn edge_group_velocity(
    spec: &StripeSpectrum,
    side: Side,
    lo: f64,
    hi: f64,
    e_ref: f64,
    spacing: f64,
) -> Result<Vec<f64>> {
    let br = edge_branches(spec, side, lo, hi);
    let dk = 2.0 * PI / (spec.cells as f64 * spec.period);
    let v: Vec<f64> = br
        .crossing(e_ref)
        .iter()
        .flat_map(|b| {
            b.windows(2)
                .map(|w| (w[1].energy.re - w[0].energy.re) / dk / spacing)
                .collect::<Vec<_>>()
        })
        .collect();
    if v.is_empty() {
        return Err(Error::Domain(format!(
            "too few in-gap {side:?} states for a group velocity"
        )));
    }
    Ok(v)
}
