//! Edge-transport diagnostics for driven hexagonal flakes: forward fraction,
//! corner transmission and defect survival.
//!
//! Atoms are located by a perimeter coordinate `s` in units of hexagon sides,
//! measured from the driven atom along the circulation of the chiral edge
//! modes. Transmission through a corner or past a defect is the ratio of the
//! edge flux downstream to the flux upstream, where the flux through `s` is
//! the growth rate of the population that has passed `s` (excitation now
//! beyond `s` plus everything radiated beyond `s`).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::lattice::{norm, sub, FiniteLattice, Vec2};

/// Sense in which edge excitations circulate around a flake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Circulation {
    Clockwise,
    Counterclockwise,
}

impl Circulation {
    pub fn sign(&self) -> f64 {
        match self {
            Circulation::Clockwise => -1.0,
            Circulation::Counterclockwise => 1.0,
        }
    }
}

/// On a stripe periodic along +x the bottom-edge chiral branch moves towards
/// -x for `muB > 0`, which on a flake is clockwise.
pub fn edge_circulation(mu_b: f64) -> Circulation {
    if mu_b >= 0.0 {
        Circulation::Clockwise
    } else {
        Circulation::Counterclockwise
    }
}

/// Regular-hexagon perimeter coordinate: the ray from `center` through an
/// atom meets the outline at `s` in `[0, 6)` sides, counted counterclockwise
/// from the corner at `corner_angle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerimeterFrame {
    pub center: Vec2,
    pub corner_angle: f64,
}

impl PerimeterFrame {
    /// Frame of an undamaged hexagonal flake: centroid, with a corner along
    /// the outermost atom.
    pub fn hexagon(lat: &FiniteLattice) -> Result<Self> {
        if lat.is_empty() {
            return Err(Error::Lattice("empty lattice".into()));
        }
        let center = lat.centroid();
        let far = lat
            .positions
            .iter()
            .max_by(|a, b| norm(sub(**a, center)).total_cmp(&norm(sub(**b, center))))
            .unwrap();
        let d = sub(*far, center);
        let sector = PI / 3.0;
        // corners of a hexagonal flake sit on a 60 degree comb
        let corner_angle = (d[1].atan2(d[0]) / sector).round() * sector;
        Ok(Self {
            center,
            corner_angle,
        })
    }

    pub fn arc(&self, p: Vec2) -> f64 {
        let d = sub(p, self.center);
        let sector = PI / 3.0;
        let th = (d[1].atan2(d[0]) - self.corner_angle).rem_euclid(2.0 * PI);
        let j = (th / sector).floor();
        let al = th - j * sector;
        // law of sines in the triangle (center, corner, hit point)
        let u = al.sin() / (2.0 * sector - al).sin();
        (j + u).rem_euclid(6.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportOptions {
    /// Atoms within this many bonds of an undercoordinated atom form the
    /// edge region.
    pub edge_depth: usize,
    /// Perimeter length (sides) behind the source counted as backward.
    pub backward_span: f64,
    /// Half-width (sides) of the corner and defect flux windows.
    pub window: f64,
    /// Fraction of the run, counted back from the end, over which fluxes are
    /// measured.
    pub flux_interval: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            edge_depth: 4,
            backward_span: 1.5,
            window: 0.25,
            flux_interval: 1.0 / 3.0,
        }
    }
}

/// Per-atom data for the estimators on one lattice.
#[derive(Debug, Clone)]
pub struct TransportFrame {
    pub source: usize,
    pub circulation: Circulation,
    /// Forward perimeter coordinate of every atom, in `[0, 6)` sides.
    pub forward: Vec<f64>,
    pub edge: Vec<bool>,
    /// Source and its two nearest boundary atoms.
    pub excluded: Vec<usize>,
    pub options: TransportOptions,
}

impl TransportFrame {
    pub fn new(
        lat: &FiniteLattice,
        frame: &PerimeterFrame,
        source: usize,
        circulation: Circulation,
        options: TransportOptions,
    ) -> Result<Self> {
        if source >= lat.len() {
            return Err(Error::Domain(format!("source {source} outside lattice")));
        }
        let boundary = lat.boundary_mask();
        if !boundary[source] {
            return Err(Error::Domain(format!(
                "source atom {source} is not on the boundary"
            )));
        }
        let s0 = frame.arc(lat.positions[source]);
        let forward = lat
            .positions
            .iter()
            .map(|&p| (circulation.sign() * (frame.arc(p) - s0)).rem_euclid(6.0))
            .collect();
        Ok(Self {
            source,
            circulation,
            forward,
            edge: edge_region(lat, options.edge_depth),
            excluded: source_exclusion(lat, source),
            options,
        })
    }

    /// Edge atoms with forward coordinate in `(lo, hi]`.
    fn edge_between(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.forward.len()).filter(move |&i| {
            self.edge[i]
                && !self.excluded.contains(&i)
                && self.forward[i] > lo
                && self.forward[i] <= hi
        })
    }

    fn forward_limit(&self) -> f64 {
        6.0 - self.options.backward_span
    }

    /// Forward fraction of a population snapshot: edge atoms ahead of the
    /// source (outside the backward span) over every atom except the source
    /// and its two nearest boundary atoms.
    pub fn forward_fraction(&self, pops: &[f64]) -> Result<f64> {
        if pops.len() != self.forward.len() {
            return Err(Error::Domain(
                "population vector does not match lattice".into(),
            ));
        }
        let den: f64 = (0..pops.len())
            .filter(|i| !self.excluded.contains(i))
            .map(|i| pops[i])
            .sum();
        if !(den > 0.0) {
            return Err(Error::Domain("no excitation outside the source".into()));
        }
        let num: f64 = self
            .edge_between(0.0, self.forward_limit())
            .map(|i| pops[i])
            .sum();
        Ok(num / den)
    }

    /// Population that has passed `s`: edge excitation in `(s, limit]` plus
    /// what those atoms have radiated.
    pub fn passed(&self, pops: &[f64], losses: &[f64], s: f64) -> f64 {
        self.edge_between(s, self.forward_limit())
            .map(|i| pops[i] + losses[i])
            .sum()
    }

    /// Mean flux through `s` over snapshots `k1..k2` (per unit time).
    pub fn flux(&self, traj: &Trajectory, k1: usize, k2: usize, s: f64) -> Result<f64> {
        if traj.losses.len() != traj.states.len() {
            return Err(Error::Domain("trajectory has no loss record".into()));
        }
        if k2 <= k1 || k2 >= traj.times.len() {
            return Err(Error::Domain(format!("bad snapshot interval {k1}..{k2}")));
        }
        let at = |k: usize| self.passed(&traj.populations(k), &traj.losses[k], s);
        Ok((at(k2) - at(k1)) / (traj.times[k2] - traj.times[k1]))
    }

    /// Snapshot interval covering the last `flux_interval` of the run.
    pub fn flux_snapshots(&self, traj: &Trajectory) -> Result<(usize, usize)> {
        let t_end = *traj
            .times
            .last()
            .ok_or_else(|| Error::Domain("empty trajectory".into()))?;
        let k2 = traj.times.len() - 1;
        let k1 = traj.snapshot_at(t_end * (1.0 - self.options.flux_interval))?;
        if k1 >= k2 {
            return Err(Error::Domain(
                "too few snapshots for a flux estimate".into(),
            ));
        }
        Ok((k1, k2))
    }

    /// Flux downstream of `s` over flux upstream of `s`.
    pub fn transmission_at(&self, traj: &Trajectory, s: f64) -> Result<f64> {
        let (k1, k2) = self.flux_snapshots(traj)?;
        let w = self.options.window;
        let upstream = self.flux(traj, k1, k2, s - w)?;
        if !(upstream > 0.0) {
            return Err(Error::Domain(format!("no flux reaches s = {s:.3}")));
        }
        Ok(self.flux(traj, k1, k2, s + w)? / upstream)
    }

    /// Forward coordinates of the corners ahead of the source, nearest first.
    pub fn corners_ahead(&self, frame: &PerimeterFrame, lat: &FiniteLattice) -> Vec<f64> {
        let s_src = frame.arc(lat.positions[self.source]);
        let mut out: Vec<f64> = (0..6)
            .map(|c| (self.circulation.sign() * (c as f64 - s_src)).rem_euclid(6.0))
            .filter(|&s| s > self.options.window)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Corner transmission: mean flux ratio across the first `n` corners ahead
/// of the source.
pub fn corner_efficiency(
    traj: &Trajectory,
    tf: &TransportFrame,
    corners: &[f64],
    n: usize,
) -> Result<f64> {
    if corners.len() < n || n == 0 {
        return Err(Error::Domain(format!(
            "need {n} corners, have {}",
            corners.len()
        )));
    }
    let mut acc = 0.0;
    for &c in &corners[..n] {
        acc += tf.transmission_at(traj, c)?;
    }
    Ok(acc / n as f64)
}

/// Defect survival: flux ratio across the defect on the damaged flake,
/// divided by the same ratio on the clean flake (removing propagation loss
/// and transit effects of the undamaged edge).
pub fn defect_survival(
    damaged: (&Trajectory, &TransportFrame),
    clean: (&Trajectory, &TransportFrame),
    s_defect: f64,
    half_width: f64,
) -> Result<f64> {
    let ratio = |(traj, tf): (&Trajectory, &TransportFrame)| -> Result<f64> {
        let (k1, k2) = tf.flux_snapshots(traj)?;
        let up = tf.flux(traj, k1, k2, s_defect - half_width)?;
        let down = tf.flux(traj, k1, k2, s_defect + half_width)?;
        if !(up > 0.0) {
            return Err(Error::Domain("no flux reaches the defect".into()));
        }
        Ok(down / up)
    };
    Ok(ratio(damaged)? / ratio(clean)?)
}

/// Atoms within `depth` bonds of an undercoordinated atom.
pub fn edge_region(lat: &FiniteLattice, depth: usize) -> Vec<bool> {
    let nb = lat.neighbors();
    let mut dist = vec![usize::MAX; lat.len()];
    let mut frontier: Vec<usize> = lat
        .boundary_mask()
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(i, _)| i)
        .collect();
    for &i in &frontier {
        dist[i] = 0;
    }
    for d in 1..=depth {
        let mut next = Vec::new();
        for &i in &frontier {
            for &j in &nb[i] {
                if dist[j] == usize::MAX {
                    dist[j] = d;
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    dist.iter().map(|&d| d <= depth).collect()
}

/// Source atom and its two nearest boundary atoms.
pub fn source_exclusion(lat: &FiniteLattice, source: usize) -> Vec<usize> {
    let boundary = lat.boundary_mask();
    let mut others: Vec<(f64, usize)> = (0..lat.len())
        .filter(|&i| i != source && boundary[i])
        .map(|i| (norm(sub(lat.positions[i], lat.positions[source])), i))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![source];
    out.extend(others.iter().take(2).map(|x| x.1));
    out
}

/// Boundary atom of a flake closest to the middle of the side whose outward
/// normal points along `angle`.
pub fn side_midpoint_atom(lat: &FiniteLattice, angle: f64) -> usize {
    let n = [angle.cos(), angle.sin()];
    let c = lat.centroid();
    let boundary = lat.boundary_mask();
    let h = lat
        .positions
        .iter()
        .map(|p| crate::lattice::dot(sub(*p, c), n))
        .fold(f64::MIN, f64::max);
    let target = [c[0] + h * n[0], c[1] + h * n[1]];
    (0..lat.len())
        .filter(|&i| boundary[i])
        .min_by(|&i, &j| {
            norm(sub(lat.positions[i], target)).total_cmp(&norm(sub(lat.positions[j], target)))
        })
        .unwrap()
}

/// Disk of `radius` centred on the outer line of the side with outward normal
/// `angle`, shifted by `offset` along the side (counterclockwise).
pub fn edge_notch(
    lat: &FiniteLattice,
    angle: f64,
    radius: f64,
    offset: f64,
) -> impl Fn(Vec2) -> bool {
    let n = [angle.cos(), angle.sin()];
    let t = [-n[1], n[0]];
    let c = lat.centroid();
    let h = lat
        .positions
        .iter()
        .map(|p| crate::lattice::dot(sub(*p, c), n))
        .fold(f64::MIN, f64::max);
    let center = [
        c[0] + h * n[0] + offset * t[0],
        c[1] + h * n[1] + offset * t[1],
    ];
    move |p: Vec2| norm(sub(p, center)) < radius
}


/// Edge notch carved into one side of the flake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSpec {
    /// Outward normal of the damaged side, degrees.
    pub side_angle_deg: f64,
    /// Disk radius in units of the lattice spacing.
    pub radius: f64,
    /// Shift of the disk centre along the side, in lattice spacings.
    pub offset: f64,
}

impl Default for NotchSpec {
    fn default() -> Self {
        // 17 atoms on the r = 14 flake
        Self {
            side_angle_deg: -150.0,
            radius: 3.4,
            offset: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    pub rings: usize,
    pub spacing: f64,
    pub mu_b: f64,
    pub omega: f64,
    pub detuning: f64,
    pub envelope: crate::dynamics::Envelope,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    /// Outward normal of the driven side, degrees.
    pub source_side_deg: f64,
    pub notch: Option<NotchSpec>,
    pub options: TransportOptions,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            rings: 14,
            spacing: 0.05,
            mu_b: 12.0,
            omega: 0.2,
            detuning: 15.0,
            envelope: crate::dynamics::Envelope::Gaussian {
                t0: 1.5,
                tau2: 0.15,
            },
            t_end: 5.7,
            dt: 5e-3,
            stride: 19,
            source_side_deg: -90.0,
            notch: Some(NotchSpec::default()),
            options: TransportOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMetrics {
    pub n_clean: usize,
    pub n_damaged: Option<usize>,
    pub source: usize,
    pub circulation: Circulation,
    /// Forward fraction at `t_end` for equal, sigma+ and sigma- drives.
    pub forward_fraction: f64,
    pub forward_fraction_sigma_plus: f64,
    pub forward_fraction_sigma_minus: f64,
    pub corner_eff: f64,
    pub corner_transmissions: Vec<f64>,
    pub defect_survival: Option<f64>,
    pub defect_position: Option<f64>,
    pub t_end: f64,
}

/// Outputs of a transport run.
pub struct TransportRun {
    pub metrics: TransportMetrics,
    pub clean: FiniteLattice,
    pub damaged: Option<FiniteLattice>,
    /// Equal-weight drive on the clean flake, then sigma+, sigma-.
    pub clean_runs: Vec<Trajectory>,
    pub damaged_run: Option<Trajectory>,
}

/// Drive one boundary atom of a bearded hexagon and measure forward
/// fraction, corner transmission and (with a notch) defect survival.
pub fn run_transport(cfg: &TransportConfig) -> Result<TransportRun> {
    use crate::dynamics::{
        assemble_finite_hamiltonian, evolve_batch, DriveProtocol, EvolveOptions, Polarization,
    };
    use crate::lattice::{build_hexagon_bearded, carve_defect, connected_components};
    use crate::params::PhysicalParams;

    let params = PhysicalParams::natural(cfg.mu_b, cfg.spacing);
    params.validate()?;
    let clean = build_hexagon_bearded(cfg.rings, cfg.spacing)?;
    let frame = PerimeterFrame::hexagon(&clean)?;
    let circ = edge_circulation(cfg.mu_b);
    let source = side_midpoint_atom(&clean, cfg.source_side_deg.to_radians());
    let opts = EvolveOptions {
        dt: cfg.dt,
        t_end: cfg.t_end,
        stride: cfg.stride,
        norm_tol: 1e-10,
        track_losses: true,
    };
    let proto = |target: usize, pol: Polarization| {
        Some(DriveProtocol {
            target,
            omega: cfg.omega,
            detuning: cfg.detuning,
            polarization: pol,
            envelope: cfg.envelope,
            t_off: None,
        })
    };

    let h = assemble_finite_hamiltonian(&clean, &params, cfg.detuning)?;
    let protos = [
        proto(source, Polarization::equal()),
        proto(source, Polarization::sigma_plus()),
        proto(source, Polarization::sigma_minus()),
    ];
    let clean_runs = evolve_batch(&h, &protos, None, &opts)?;
    drop(h);
    let tf = TransportFrame::new(&clean, &frame, source, circ, cfg.options)?;
    let last = |t: &Trajectory| t.populations(t.times.len() - 1);
    let ff: Vec<f64> = clean_runs
        .iter()
        .map(|t| tf.forward_fraction(&last(t)))
        .collect::<Result<_>>()?;
    let corners = tf.corners_ahead(&frame, &clean);
    let corner_transmissions = corners[..2.min(corners.len())]
        .iter()
        .map(|&c| tf.transmission_at(&clean_runs[0], c))
        .collect::<Result<Vec<_>>>()?;
    let corner_eff = corner_efficiency(&clean_runs[0], &tf, &corners, 2)?;

    let (mut damaged, mut damaged_run, mut survival, mut s_def) = (None, None, None, None);
    if let Some(n) = cfg.notch {
        let angle = n.side_angle_deg.to_radians();
        let region = edge_notch(
            &clean,
            angle,
            n.radius * cfg.spacing,
            n.offset * cfg.spacing,
        );
        let lat = carve_defect(&clean, region)?;
        if connected_components(&lat) != 1 {
            return Err(Error::Lattice("notch splits the flake".into()));
        }
        let src_d = lat.nearest(clean.positions[source]);
        let tf_d = TransportFrame::new(&lat, &frame, src_d, circ, cfg.options)?;
        let removed = &lat.defect_mask;
        let centre = removed
            .iter()
            .fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        let centre = [
            centre[0] / removed.len() as f64,
            centre[1] / removed.len() as f64,
        ];
        let s = (circ.sign() * (frame.arc(centre) - frame.arc(clean.positions[source])))
            .rem_euclid(6.0);
        let h = assemble_finite_hamiltonian(&lat, &params, cfg.detuning)?;
        let mut run = evolve_batch(&h, &[proto(src_d, Polarization::equal())], None, &opts)?;
        let run = run.remove(0);
        survival = Some(defect_survival(
            (&run, &tf_d),
            (&clean_runs[0], &tf),
            s,
            0.4,
        )?);
        s_def = Some(s);
        damaged = Some(lat);
        damaged_run = Some(run);
    }

    let metrics = TransportMetrics {
        n_clean: clean.len(),
        n_damaged: damaged.as_ref().map(FiniteLattice::len),
        source,
        circulation: circ,
        forward_fraction: ff[0],
        forward_fraction_sigma_plus: ff[1],
        forward_fraction_sigma_minus: ff[2],
        corner_eff,
        corner_transmissions,
        defect_survival: survival,
        defect_position: s_def,
        t_end: cfg.t_end,
    };
    Ok(TransportRun {
        metrics,
        clean,
        damaged,
        clean_runs,
        damaged_run,
    })
}
