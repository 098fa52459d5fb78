//! Honeycomb geometry: Bravais and reciprocal vectors, Brillouin-zone paths,
//! and finite patches (periodic stripes, bearded hexagons, carved defects).
//!
//! Orientation: the zig-zag direction runs along `x`, the intracell bond
//! `b = (0, a)` is vertical, `a1 = sqrt3 a (1, 0)` and
//! `a2 = sqrt3 a (1/2, sqrt3/2)`.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

/// Rotation by `theta` about the origin.
pub fn rotate(a: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPoints {
    pub gamma: Vec2,
    pub k: Vec2,
    pub m: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub spacing: f64,
    pub a1: Vec2,
    pub a2: Vec2,
    /// Intracell vector from sublattice 1 to sublattice 2.
    pub b: Vec2,
    pub g1: Vec2,
    pub g2: Vec2,
    pub cell_area: f64,
    pub sym_points: SymmetryPoints,
}

/// Honeycomb geometry for nearest-neighbour distance `a`.
pub fn build_geometry(a: f64) -> Result<LatticeGeometry> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("spacing must be > 0, got {a}")));
    }
    let s3 = 3f64.sqrt();
    let a1 = [s3 * a, 0.0];
    let a2 = [s3 * a / 2.0, 1.5 * a];
    let cell_area = (a1[0] * a2[1] - a1[1] * a2[0]).abs();
    // g_i . a_j = 2 pi delta_ij
    let pref = 2.0 * PI / cell_area;
    let g1 = [pref * a2[1], -pref * a2[0]];
    let g2 = [-pref * a1[1], pref * a1[0]];
    let k = scale(add(scale(g1, 2.0), g2), 1.0 / 3.0);
    let m = scale(g2, 0.5);
    Ok(LatticeGeometry {
        spacing: a,
        a1,
        a2,
        b: [0.0, a],
        g1,
        g2,
        cell_area,
        sym_points: SymmetryPoints {
            gamma: [0.0, 0.0],
            k,
            m,
        },
    })
}

impl LatticeGeometry {
    pub fn bravais(&self, n1: i64, n2: i64) -> Vec2 {
        add(scale(self.a1, n1 as f64), scale(self.a2, n2 as f64))
    }

    pub fn reciprocal(&self, m1: i64, m2: i64) -> Vec2 {
        add(scale(self.g1, m1 as f64), scale(self.g2, m2 as f64))
    }

    /// Fractional reciprocal coordinates of `k`.
    pub fn to_fractional(&self, k: Vec2) -> Vec2 {
        [dot(k, self.a1) / (2.0 * PI), dot(k, self.a2) / (2.0 * PI)]
    }

    /// Uniform `n x n` grid over the Brillouin-zone torus,
    /// `k = (i + s) g1 / n + (j + s) g2 / n` for `i, j in 0..n`, row-major in `i`.
    pub fn bz_grid(&self, n: usize, shift: f64) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let f1 = (i as f64 + shift) / n as f64;
                let f2 = (j as f64 + shift) / n as f64;
                out.push(add(scale(self.g1, f1), scale(self.g2, f2)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub k: Vec2,
    /// Cumulative arc length from the first point.
    pub arc: f64,
    /// Index of the segment this point belongs to.
    pub segment: usize,
}

/// Piecewise-linear path through `points` with `n_per_segment` steps per
/// segment: every segment contributes its start and `n_per_segment - 1`
/// interior points, and the final endpoint is appended once.
pub fn bz_path(points: &[Vec2], n_per_segment: usize) -> Result<Vec<PathPoint>> {
    if points.is_empty() {
        return Err(Error::Domain("bz_path needs at least one point".into()));
    }
    if n_per_segment < 2 {
        return Err(Error::Domain(format!(
            "n_per_segment must be >= 2, got {n_per_segment}"
        )));
    }
    let mut out = Vec::with_capacity((points.len() - 1) * n_per_segment + 1);
    let mut arc = 0.0;
    for (s, w) in points.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let len = norm(sub(q, p));
        for i in 0..n_per_segment {
            let t = i as f64 / n_per_segment as f64;
            out.push(PathPoint {
                k: add(p, scale(sub(q, p), t)),
                arc: arc + t * len,
                segment: s,
            });
        }
        arc += len;
    }
    out.push(PathPoint {
        k: *points.last().unwrap(),
        arc,
        segment: points.len().saturating_sub(2),
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryType {
    Bearded,
    Armchair,
    Zigzag,
    HexagonBearded,
}

impl std::str::FromStr for BoundaryType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bearded" => Ok(Self::Bearded),
            "armchair" => Ok(Self::Armchair),
            "zigzag" | "zig-zag" => Ok(Self::Zigzag),
            "hexagon-bearded" => Ok(Self::HexagonBearded),
            other => Err(Error::Lattice(format!(
                "unknown edge type '{other}' (expected bearded, armchair, zigzag)"
            ))),
        }
    }
}

/// Periodic axis of a stripe. Atoms are stored cell-major:
/// index `cell * per_cell + site`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicAxis {
    /// Unit vector along the periodic direction.
    pub direction: Vec2,
    /// Translation length of one cell.
    pub period: f64,
    /// Number of cells in the ring.
    pub cells: usize,
    /// Atoms per cell.
    pub per_cell: usize,
    /// Coupling images: cell shifts `s` with `|s| <= images` are summed.
    pub images: usize,
}

impl PeriodicAxis {
    pub fn translation(&self) -> Vec2 {
        scale(self.direction, self.period)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLattice {
    pub spacing: f64,
    pub positions: Vec<Vec2>,
    /// 1 or 2.
    pub sublattice: Vec<u8>,
    pub boundary_type: BoundaryType,
    pub periodic: Option<PeriodicAxis>,
    /// Positions removed by [`carve_defect`].
    pub defect_mask: Vec<Vec2>,
}

impl FiniteLattice {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Nearest-neighbour lists (distance `a`), including wrap-around bonds for
    /// stripes.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let a = self.spacing;
        let tol = 1e-6 * a;
        let cell = 1.01 * a;
        let key = |p: Vec2| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in self.positions.iter().enumerate() {
            grid.entry(key(p)).or_default().push(i);
        }
        let shifts: Vec<Vec2> = match &self.periodic {
            Some(ax) => {
                let t = scale(ax.translation(), ax.cells as f64);
                vec![[0.0, 0.0], t, scale(t, -1.0)]
            }
            None => vec![[0.0, 0.0]],
        };
        let mut out = vec![Vec::new(); self.len()];
        for (i, &p) in self.positions.iter().enumerate() {
            for &sft in &shifts {
                let q = add(p, sft);
                let (cx, cy) = key(q);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                            for &j in list {
                                if j == i {
                                    continue;
                                }
                                let d = norm(sub(q, self.positions[j]));
                                if (d - a).abs() < tol && !out[i].contains(&j) {
                                    out[i].push(j);
                                }
                            }
                        }
                    }
                }
            }
        }
        for l in &mut out {
            l.sort_unstable();
        }
        out
    }

    /// Atoms with fewer than three neighbours.
    pub fn boundary_mask(&self) -> Vec<bool> {
        self.neighbors().iter().map(|n| n.len() < 3).collect()
    }

    /// Smallest pairwise distance (brute force; for validation).
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min(norm(sub(self.positions[i], self.positions[j])));
            }
        }
        best
    }

    /// Coordinate perpendicular to the periodic axis (or `y` when none).
    pub fn transverse(&self, i: usize) -> f64 {
        match &self.periodic {
            Some(ax) => {
                let n = [-ax.direction[1], ax.direction[0]];
                dot(self.positions[i], n)
            }
            None => self.positions[i][1],
        }
    }

    /// Distinct transverse coordinates (atom lines parallel to the edges),
    /// ascending, and the line index of every atom.
    pub fn lines(&self) -> (Vec<f64>, Vec<usize>) {
        let tol = 1e-6 * self.spacing;
        let mut levels: Vec<f64> = (0..self.len()).map(|i| self.transverse(i)).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup_by(|a, b| (*a - *b).abs() < tol);
        let idx = (0..self.len())
            .map(|i| {
                let t = self.transverse(i);
                levels
                    .iter()
                    .position(|&l| (l - t).abs() < tol)
                    .expect("level exists")
            })
            .collect();
        (levels, idx)
    }

    /// Geometric centre of the atom positions.
    pub fn centroid(&self) -> Vec2 {
        let n = self.len() as f64;
        let s = self
            .positions
            .iter()
            .fold([0.0, 0.0], |acc, &p| add(acc, p));
        scale(s, 1.0 / n)
    }

    /// Index of the atom closest to `p`.
    pub fn nearest(&self, p: Vec2) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, &q) in self.positions.iter().enumerate() {
            let d = norm(sub(p, q));
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// CSV with columns `index,x,y,sublattice,is_boundary`; coordinates in
    /// units of `lambda`.
    pub fn write_csv<W: Write>(&self, lambda: f64, mut w: W) -> Result<()> {
        writeln!(w, "index,x,y,sublattice,is_boundary")?;
        let boundary = self.boundary_mask();
        for (i, p) in self.positions.iter().enumerate() {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{},{}",
                i,
                p[0] / lambda,
                p[1] / lambda,
                self.sublattice[i],
                boundary[i] as u8
            )?;
        }
        Ok(())
    }
}

/// Periodic stripe with the requested edges.
///
/// `rows` is the number of atoms on every line parallel to the edges (the
/// periodic direction) and `cols` the number of such lines. Bearded and
/// zig-zag stripes run along the zig-zag direction (one atom per line per
/// period `sqrt3 a`); armchair stripes run along the armchair direction
/// (two atoms per line per period `3a`, so `rows` must be even). A zig-zag
/// stripe with an odd number of lines has a zig-zag bottom edge and a bearded
/// top edge; an even number gives zig-zag on both.
pub fn build_stripe(
    edge: BoundaryType,
    rows: usize,
    cols: usize,
    images: usize,
    a: f64,
) -> Result<FiniteLattice> {
    if rows < 4 || cols < 4 {
        return Err(Error::Lattice(format!(
            "stripe needs rows, cols >= 4 (got {rows} x {cols})"
        )));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("spacing must be > 0, got {a}")));
    }
    let s3 = 3f64.sqrt();
    let (slice, sub, axis): (Vec<Vec2>, Vec<u8>, PeriodicAxis) = match edge {
        BoundaryType::Bearded | BoundaryType::Zigzag => {
            let mut pts = Vec::with_capacity(cols);
            let mut sub = Vec::with_capacity(cols);
            // lines alternate A(m), B(m), A(m+1), ... ; zig-zag drops the first A
            let start = usize::from(edge == BoundaryType::Zigzag);
            for j in start..(start + cols) {
                let m = (j / 2) as f64;
                let base = [m * s3 * a / 2.0, 1.5 * m * a];
                if j % 2 == 0 {
                    pts.push(base);
                    sub.push(1);
                } else {
                    pts.push([base[0], base[1] + a]);
                    sub.push(2);
                }
            }
            (
                pts,
                sub,
                PeriodicAxis {
                    direction: [1.0, 0.0],
                    period: s3 * a,
                    cells: rows,
                    per_cell: cols,
                    images,
                },
            )
        }
        BoundaryType::Armchair => {
            if rows % 2 != 0 {
                return Err(Error::Lattice(format!(
                    "armchair stripes hold two atoms per line per period; rows must be even (got {rows})"
                )));
            }
            let mut pts = Vec::with_capacity(2 * cols);
            let mut sub = Vec::with_capacity(2 * cols);
            for j in 0..cols {
                let x = j as f64 * s3 * a / 2.0;
                let y0 = 1.5 * a * (j % 2) as f64;
                pts.push([x, y0]);
                sub.push(1);
                pts.push([x, y0 + a]);
                sub.push(2);
            }
            (
                pts,
                sub,
                PeriodicAxis {
                    direction: [0.0, 1.0],
                    period: 3.0 * a,
                    cells: rows / 2,
                    per_cell: 2 * cols,
                    images,
                },
            )
        }
        BoundaryType::HexagonBearded => {
            return Err(Error::Lattice(
                "hexagon-bearded is not a stripe termination".into(),
            ))
        }
    };
    let t = axis.translation();
    let mut positions = Vec::with_capacity(axis.cells * axis.per_cell);
    let mut sublattice = Vec::with_capacity(axis.cells * axis.per_cell);
    for c in 0..axis.cells {
        for (p, &s) in slice.iter().zip(&sub) {
            positions.push(add(*p, scale(t, c as f64)));
            sublattice.push(s);
        }
    }
    Ok(FiniteLattice {
        spacing: a,
        positions,
        sublattice,
        boundary_type: edge,
        periodic: Some(axis),
        defect_mask: Vec::new(),
    })
}

/// Integer site label `(n1, n2, sublattice)` on the infinite honeycomb.
type Site = (i64, i64, u8);

fn site_neighbors(s: Site) -> [Site; 3] {
    let (n1, n2, sub) = s;
    if sub == 1 {
        [(n1, n2, 2), (n1, n2 - 1, 2), (n1 + 1, n2 - 1, 2)]
    } else {
        [(n1, n2, 1), (n1, n2 + 1, 1), (n1 - 1, n2 + 1, 1)]
    }
}

/// Hexagonal honeycomb patch whose six sides all end in bearded (dangling,
/// one-neighbour) sites: a zig-zag-edged flake of hexagonal plaquettes within
/// hex distance `rings - 1` of the central plaquette, plus every lattice site
/// adjacent to it. The patch is centred on the central plaquette and holds
/// `6 rings (rings + 1)` atoms.
pub fn build_hexagon_bearded(rings: usize, a: f64) -> Result<FiniteLattice> {
    if rings < 1 {
        return Err(Error::Lattice("rings must be >= 1".into()));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("spacing must be > 0, got {a}")));
    }
    let geom = build_geometry(a)?;
    let r = rings as i64 - 1;
    // plaquette centres sit at c0 + n1 a1 + n2 a2, vertices at distance a
    let c0 = [3f64.sqrt() * a / 2.0, a / 2.0];
    let mut core: HashSet<Site> = HashSet::new();
    for n1 in -r..=r {
        for n2 in -r..=r {
            if (n1 + n2).abs() > r {
                continue;
            }
            let c = add(c0, geom.bravais(n1, n2));
            for j in 0..6 {
                let th = PI / 6.0 + j as f64 * PI / 3.0;
                let v = add(c, [a * th.cos(), a * th.sin()]);
                core.insert(site_of(&geom, v));
            }
        }
    }
    let mut all: HashSet<Site> = core.clone();
    for &s in &core {
        for n in site_neighbors(s) {
            all.insert(n);
        }
    }
    let mut sites: Vec<Site> = all.into_iter().collect();
    sites.sort_unstable();
    let mut positions = Vec::with_capacity(sites.len());
    let mut sublattice = Vec::with_capacity(sites.len());
    for s in &sites {
        positions.push(sub(site_position(&geom, *s), c0));
        sublattice.push(s.2);
    }
    // order by angle then radius so indices read like a spiral of shells
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&i, &j| {
        let (pi, pj) = (positions[i], positions[j]);
        let ri = (norm(pi) / a * 1e6).round() as i64;
        let rj = (norm(pj) / a * 1e6).round() as i64;
        ri.cmp(&rj)
            .then(pi[1].atan2(pi[0]).partial_cmp(&pj[1].atan2(pj[0])).unwrap())
    });
    Ok(FiniteLattice {
        spacing: a,
        positions: order.iter().map(|&i| positions[i]).collect(),
        sublattice: order.iter().map(|&i| sublattice[i]).collect(),
        boundary_type: BoundaryType::HexagonBearded,
        periodic: None,
        defect_mask: Vec::new(),
    })
}

fn site_position(geom: &LatticeGeometry, s: Site) -> Vec2 {
    let r = geom.bravais(s.0, s.1);
    if s.2 == 1 {
        r
    } else {
        add(r, geom.b)
    }
}

fn site_of(geom: &LatticeGeometry, p: Vec2) -> Site {
    // try both sublattices; the fractional coordinates must be integers
    for (sub_id, off) in [(1u8, [0.0, 0.0]), (2u8, geom.b)] {
        let q = sub(p, off);
        let f1 = dot(q, geom.g1) / (2.0 * PI);
        let f2 = dot(q, geom.g2) / (2.0 * PI);
        let (r1, r2) = (f1.round(), f2.round());
        if (f1 - r1).abs() < 1e-6 && (f2 - r2).abs() < 1e-6 {
            return (r1 as i64, r2 as i64, sub_id);
        }
    }
    panic!("point {p:?} is not a honeycomb site");
}

/// Remove every atom for which `region` returns true.
pub fn carve_defect<F>(lat: &FiniteLattice, region: F) -> Result<FiniteLattice>
where
    F: Fn(Vec2) -> bool,
{
    let mut out = lat.clone();
    out.positions.clear();
    out.sublattice.clear();
    for (i, &p) in lat.positions.iter().enumerate() {
        if region(p) {
            out.defect_mask.push(p);
        } else {
            out.positions.push(p);
            out.sublattice.push(lat.sublattice[i]);
        }
    }
    if out.positions.is_empty() {
        return Err(Error::Lattice("defect region removes every atom".into()));
    }
    if lat.periodic.is_some() && out.len() != lat.len() {
        // block structure no longer holds
        out.periodic = None;
    }
    Ok(out)
}

/// Number of connected components of the nearest-neighbour graph.
pub fn connected_components(lat: &FiniteLattice) -> usize {
    let nb = lat.neighbors();
    let mut seen = vec![false; lat.len()];
    let mut count = 0;
    for start in 0..lat.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for &j in &nb[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_duality_and_cell_area() {
        for a in [0.02, 0.05, 0.1, 1.0] {
            let g = build_geometry(a).unwrap();
            for (gi, ai, want) in [
                (g.g1, g.a1, 2.0 * PI),
                (g.g1, g.a2, 0.0),
                (g.g2, g.a1, 0.0),
                (g.g2, g.a2, 2.0 * PI),
            ] {
                assert!((dot(gi, ai) - want).abs() < 1e-12);
            }
            assert!((g.cell_area - 1.5 * 3f64.sqrt() * a * a).abs() < 1e-14);
            assert!((norm(g.b) - a).abs() < 1e-15);
            let kk = 4.0 * PI / (3.0 * 3f64.sqrt() * a);
            assert!((norm(g.sym_points.k) - kk).abs() < 1e-12 * kk);
            assert!((norm(g.sym_points.m) - 2.0 * PI / (3.0 * a)).abs() < 1e-12 / a);
        }
        assert!(build_geometry(0.0).is_err());
    }

    #[test]
    fn path_bookkeeping() {
        let g = build_geometry(0.05).unwrap();
        let sp = g.sym_points;
        let p = bz_path(&[sp.m, sp.gamma, sp.k], 100).unwrap();
        assert_eq!(p.len(), 201);
        assert_eq!(p[0].k, sp.m);
        assert_eq!(p[200].k, sp.k);
        let gk = p[200].arc - p[100].arc;
        assert!((gk - norm(sp.k)).abs() < 1e-12);
        let same = bz_path(&[sp.gamma, sp.gamma], 5).unwrap();
        assert!(same.iter().all(|q| q.k == sp.gamma && q.arc == 0.0));
        assert!(bz_path(&[], 5).is_err());
        assert!(bz_path(&[sp.m, sp.k], 1).is_err());
    }

    #[test]
    fn stripe_atom_counts() {
        let a = 0.05;
        let b = build_stripe(BoundaryType::Bearded, 40, 42, 20, a).unwrap();
        assert_eq!(b.len(), 1680);
        let ar = build_stripe(BoundaryType::Armchair, 40, 41, 20, a).unwrap();
        assert_eq!(ar.len(), 1640);
        let z = build_stripe(BoundaryType::Zigzag, 40, 41, 20, a).unwrap();
        assert_eq!(z.len(), 1640);
        assert!(build_stripe(BoundaryType::Bearded, 3, 10, 1, a).is_err());
        assert!(build_stripe(BoundaryType::Armchair, 41, 10, 1, a).is_err());
        assert!("diagonal".parse::<BoundaryType>().is_err());
    }

    fn edge_degrees(lat: &FiniteLattice) -> (Vec<usize>, Vec<usize>) {
        let nb = lat.neighbors();
        let (levels, line) = lat.lines();
        let last = levels.len() - 1;
        let bottom = (0..lat.len())
            .filter(|&i| line[i] == 0)
            .map(|i| nb[i].len())
            .collect();
        let top = (0..lat.len())
            .filter(|&i| line[i] == last)
            .map(|i| nb[i].len())
            .collect();
        (bottom, top)
    }

    #[test]
    fn stripe_terminations() {
        let a = 1.0;
        let b = build_stripe(BoundaryType::Bearded, 8, 10, 4, a).unwrap();
        let (bot, top) = edge_degrees(&b);
        assert!(bot.iter().chain(&top).all(|&d| d == 1));
        let z = build_stripe(BoundaryType::Zigzag, 8, 10, 4, a).unwrap();
        let (bot, top) = edge_degrees(&z);
        assert!(bot.iter().chain(&top).all(|&d| d == 2));
        let z = build_stripe(BoundaryType::Zigzag, 8, 11, 4, a).unwrap();
        let (bot, top) = edge_degrees(&z);
        assert!(bot.iter().all(|&d| d == 2) && top.iter().all(|&d| d == 1));
        let ar = build_stripe(BoundaryType::Armchair, 8, 9, 4, a).unwrap();
        let (bot, top) = edge_degrees(&ar);
        assert!(bot.iter().chain(&top).all(|&d| d == 2));
        // interior is fully coordinated
        for lat in [&b, &ar] {
            let nb = lat.neighbors();
            let (levels, line) = lat.lines();
            for i in 0..lat.len() {
                if line[i] > 0 && line[i] < levels.len() - 1 {
                    assert_eq!(nb[i].len(), 3);
                }
            }
            assert!((lat.min_distance() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn stripe_is_translation_invariant() {
        for edge in [
            BoundaryType::Bearded,
            BoundaryType::Armchair,
            BoundaryType::Zigzag,
        ] {
            let lat = build_stripe(edge, 8, 9, 4, 1.0).unwrap();
            let ax = lat.periodic.unwrap();
            let t = ax.translation();
            let ring = ax.period * ax.cells as f64;
            let key = |p: Vec2| {
                let along = dot(p, ax.direction).rem_euclid(ring);
                let across = dot(p, [-ax.direction[1], ax.direction[0]]);
                (
                    (along * 1e6).round() as i64 % (ring * 1e6).round() as i64,
                    (across * 1e6).round() as i64,
                )
            };
            let orig: HashSet<_> = lat.positions.iter().map(|&p| key(p)).collect();
            let moved: HashSet<_> = lat.positions.iter().map(|&p| key(add(p, t))).collect();
            assert_eq!(orig, moved);
        }
    }

    #[test]
    fn sublattice_two_is_offset_by_b() {
        let g = build_geometry(1.0).unwrap();
        let lat = build_stripe(BoundaryType::Bearded, 6, 8, 2, 1.0).unwrap();
        for pair in lat.positions.chunks(2).zip(lat.sublattice.chunks(2)) {
            let (p, s) = pair;
            assert_eq!(s, &[1, 2]);
            assert!(norm(sub(sub(p[1], p[0]), g.b)) < 1e-12);
        }
    }

    #[test]
    fn hexagon_sizes_and_bearded_boundary() {
        let mut prev = 0;
        for rings in 1..=6 {
            let lat = build_hexagon_bearded(rings, 1.0).unwrap();
            assert_eq!(lat.len(), 6 * rings * (rings + 1));
            assert!(lat.len() > prev);
            prev = lat.len();
            let nb = lat.neighbors();
            let deg1 = nb.iter().filter(|n| n.len() == 1).count();
            let deg2 = nb.iter().filter(|n| n.len() == 2).count();
            assert_eq!(deg2, 0, "rings = {rings}");
            assert_eq!(deg1, 6 * rings);
            assert!((lat.min_distance() - 1.0).abs() < 1e-12);
            assert_eq!(connected_components(&lat), 1);
            let c = lat.centroid();
            assert!(norm(c) < 1e-9);
        }
        // exhaustive enumeration of the single-plaquette case
        assert_eq!(build_hexagon_bearded(1, 1.0).unwrap().len(), 12);
        assert_eq!(build_hexagon_bearded(3, 1.0).unwrap().len(), 72);
        assert_eq!(build_hexagon_bearded(4, 1.0).unwrap().len(), 120);
        assert_eq!(build_hexagon_bearded(14, 1.0).unwrap().len(), 1260);
    }

    #[test]
    fn hexagon_sublattices_follow_adjacency() {
        let lat = build_hexagon_bearded(3, 1.0).unwrap();
        for (i, n) in lat.neighbors().iter().enumerate() {
            for &j in n {
                assert_ne!(lat.sublattice[i], lat.sublattice[j]);
            }
        }
    }

    #[test]
    fn carving() {
        let lat = build_hexagon_bearded(4, 1.0).unwrap();
        let same = carve_defect(&lat, |_| false).unwrap();
        assert_eq!(same.positions, lat.positions);
        let target = lat.positions[7];
        let one = carve_defect(&lat, |p| norm(sub(p, target)) < 1e-9).unwrap();
        assert_eq!(one.len(), lat.len() - 1);
        assert_eq!(one.defect_mask, vec![target]);
        assert!(carve_defect(&lat, |_| true).is_err());
    }

    #[test]
    fn edge_disk_leaves_a_connected_patch() {
        let lat = build_hexagon_bearded(8, 1.0).unwrap();
        // a boundary atom in the middle of the lowest side
        let edge = lat
            .positions
            .iter()
            .copied()
            .min_by(|p, q| (p[1], p[0].abs()).partial_cmp(&(q[1], q[0].abs())).unwrap())
            .unwrap();
        let carved = carve_defect(&lat, |p| norm(sub(p, edge)) < 3.0).unwrap();
        assert!(carved.len() < lat.len());
        assert_eq!(connected_components(&carved), 1);
        let mut seen = HashSet::new();
        for p in &carved.positions {
            assert!(seen.insert(((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64)));
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let lat = build_hexagon_bearded(1, 0.05).unwrap();
        let mut buf = Vec::new();
        lat.write_csv(1.0, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "index,x,y,sublattice,is_boundary");
        assert_eq!(lines.len(), 13);
        assert!(!s.contains('\r'));
    }
}
