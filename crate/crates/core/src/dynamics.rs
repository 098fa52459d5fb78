//! Driven, no-jump dynamics of finite arrays: Hamiltonian assembly, drive
//! envelopes, batched fourth-order Runge-Kutta evolution and transport and
//! decay diagnostics.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView1};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::greens::greens_in_plane;
use crate::lattice::{norm, sub, FiniteLattice};
use crate::params::PhysicalParams;

const CZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Dense `2N x 2N` Hamiltonian in the per-atom `(x, y)` basis, in the frame
/// rotating at the laser frequency.
#[derive(Debug, Clone)]
pub struct FiniteHamiltonian {
    pub h: Array2<C64>,
    /// Laser detuning `omega_L - omega_A` (subtracted on the diagonal).
    pub detuning: f64,
    pub params: PhysicalParams,
}

impl FiniteHamiltonian {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.h.nrows() / 2
    }
}

/// `H = (-Delta_L - i gamma0/2) + xi(muB)` per atom plus
/// `(3 pi gamma0 / k) G(r_i - r_j)` between atoms.
pub fn assemble_finite_hamiltonian(
    lat: &FiniteLattice,
    params: &PhysicalParams,
    detuning: f64,
) -> Result<FiniteHamiltonian> {
    params.validate()?;
    let n = lat.len();
    if n == 0 {
        return Err(Error::Lattice("empty lattice".into()));
    }
    let tol = 1e-9 * lat.spacing;
    for (i, p) in lat.positions.iter().enumerate() {
        for q in &lat.positions[..i] {
            if norm(sub(*p, *q)) < tol {
                return Err(Error::ZeroSeparation);
            }
        }
    }
    let dim = 2 * n;
    let k = params.k();
    let pref = params.coupling_prefactor();
    let z = params.zeeman();
    let diag = C64::new(-detuning, -0.5 * params.gamma0);
    let mut h = Array2::<C64>::zeros((dim, dim));
    let pos = &lat.positions;
    h.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(2 * dim)
        .enumerate()
        .for_each(|(i, rows)| {
            let (r0, r1) = rows.split_at_mut(dim);
            for (j, q) in pos.iter().enumerate() {
                if i == j {
                    r0[2 * i] = diag;
                    r0[2 * i + 1] = C64::new(0.0, -z);
                    r1[2 * i] = C64::new(0.0, z);
                    r1[2 * i + 1] = diag;
                    continue;
                }
                let d = sub(pos[i], *q);
                let g = greens_in_plane(d[0], d[1], k);
                r0[2 * j] = g[0][0] * pref;
                r0[2 * j + 1] = g[0][1] * pref;
                r1[2 * j] = g[1][0] * pref;
                r1[2 * j + 1] = g[1][1] * pref;
            }
        });
    Ok(FiniteHamiltonian {
        h,
        detuning,
        params: *params,
    })
}

/// `(x, y)` components of the circular unit vectors: `sigma+ = -(x + iy)/sqrt2`
/// and `sigma- = (x - iy)/sqrt2`, the eigenvectors of the Zeeman block with
/// energies `+muB` and `-muB`.
pub fn circular_basis() -> [[C64; 2]; 2] {
    let r = FRAC_1_SQRT_2;
    [
        [C64::new(-r, 0.0), C64::new(0.0, -r)],
        [C64::new(r, 0.0), C64::new(0.0, -r)],
    ]
}

/// Drive polarisation as amplitudes on the `(sigma+, sigma-)` transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarization {
    pub sigma_plus: C64,
    pub sigma_minus: C64,
}

impl Polarization {
    pub fn sigma_plus() -> Self {
        Self {
            sigma_plus: C64::new(1.0, 0.0),
            sigma_minus: CZERO,
        }
    }

    pub fn sigma_minus() -> Self {
        Self {
            sigma_plus: CZERO,
            sigma_minus: C64::new(1.0, 0.0),
        }
    }

    /// Both transitions with equal strength.
    pub fn equal() -> Self {
        Self {
            sigma_plus: C64::new(FRAC_1_SQRT_2, 0.0),
            sigma_minus: C64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    /// Linear polarisation along x: `x = (sigma- - sigma+)/sqrt2`.
    pub fn x() -> Self {
        Self {
            sigma_plus: C64::new(-FRAC_1_SQRT_2, 0.0),
            sigma_minus: C64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.sigma_plus.norm_sqr() + self.sigma_minus.norm_sqr()).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain("polarisation must be nonzero".into()));
        }
        Ok(Self {
            sigma_plus: self.sigma_plus / n,
            sigma_minus: self.sigma_minus / n,
        })
    }

    /// `(x, y)` components.
    pub fn cartesian(&self) -> [C64; 2] {
        let [p, m] = circular_basis();
        [
            self.sigma_plus * p[0] + self.sigma_minus * m[0],
            self.sigma_plus * p[1] + self.sigma_minus * m[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Envelope {
    /// `exp(-(t - t0)^2 / tau2)` for `t < t0`, then 1.
    Gaussian {
        t0: f64,
        tau2: f64,
    },
    /// `1 / (1 + exp(-(t - t0) / tau))`.
    Sigmoid {
        t0: f64,
        tau: f64,
    },
    Constant,
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Envelope::Gaussian { t0, tau2 } => t0 >= 0.0 && tau2 > 0.0,
            Envelope::Sigmoid { t0, tau } => t0 >= 0.0 && tau > 0.0,
            Envelope::Constant => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid envelope {self:?}")))
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Envelope::Gaussian { t0, tau2 } => {
                if t < t0 {
                    (-(t - t0) * (t - t0) / tau2).exp()
                } else {
                    1.0
                }
            }
            Envelope::Sigmoid { t0, tau } => 1.0 / (1.0 + (-(t - t0) / tau).exp()),
            Envelope::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    pub target: usize,
    /// Rabi amplitude in units of gamma0.
    pub omega: f64,
    /// `omega_L - omega_A`.
    pub detuning: f64,
    pub polarization: Polarization,
    pub envelope: Envelope,
    /// Drive switched off abruptly at this time.
    pub t_off: Option<f64>,
}

impl DriveProtocol {
    pub fn validate(&self, n_atoms: usize) -> Result<()> {
        if self.target >= n_atoms {
            return Err(Error::Domain(format!(
                "drive target {} outside lattice of {n_atoms} atoms",
                self.target
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::Domain("omega must be finite".into()));
        }
        self.envelope.validate()?;
        self.polarization.normalized().map(|_| ())
    }

    pub fn is_on(&self, t: f64) -> bool {
        self.omega != 0.0 && self.t_off.is_none_or(|off| t < off)
    }
}

/// Complex drive amplitude `Omega(t)` (zero after `t_off`).
pub fn drive_envelope(proto: &DriveProtocol, t: f64) -> C64 {
    if !proto.is_on(t) {
        return CZERO;
    }
    C64::new(proto.omega * proto.envelope.at(t), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `stride`-th state (the initial and final states are always
    /// kept).
    pub stride: usize,
    /// Allowed growth rate of the norm while all drives are off.
    pub norm_tol: f64,
    /// Accumulate the per-atom radiated population (needed by the transport
    /// estimators; costs one extra matrix product per step).
    pub track_losses: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 5e-3,
            t_end: 5.7,
            stride: 20,
            norm_tol: 1e-10,
            track_losses: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// Snapshot times.
    pub times: Vec<f64>,
    /// States at the snapshot times.
    pub states: Vec<Vec<C64>>,
    /// Cumulative radiated population per atom at the snapshot times, when
    /// tracked: `int Re(c_i^dag (Gamma c)_i) dt` with `Gamma = i(H - H^dag)`.
    #[serde(default)]
    pub losses: Vec<Vec<f64>>,
    /// Times of every step (including 0).
    pub step_times: Vec<f64>,
    /// `||c||^2` at every step.
    pub norms: Vec<f64>,
    pub protocol: Option<DriveProtocol>,
}

impl Trajectory {
    pub fn n_atoms(&self) -> usize {
        self.states.first().map_or(0, |s| s.len() / 2)
    }

    /// Snapshot closest to `t`.
    pub fn snapshot_at(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Domain("trajectory has no snapshots".into()))
    }

    /// Per-atom excitation probabilities `|c_x|^2 + |c_y|^2` of snapshot `i`.
    pub fn populations(&self, i: usize) -> Vec<f64> {
        populations(&self.states[i])
    }

    pub fn final_state(&self) -> &[C64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Snapshot CSV rows `index,x,y,p` with positions in units of lambda.
    pub fn write_snapshot_csv<W: std::io::Write>(
        &self,
        i: usize,
        lat: &FiniteLattice,
        lambda: f64,
        mut w: W,
    ) -> Result<()> {
        writeln!(w, "index,x,y,p")?;
        for (j, p) in self.populations(i).iter().enumerate() {
            let r = lat.positions[j];
            writeln!(
                w,
                "{j},{:.10e},{:.10e},{:.10e}",
                r[0] / lambda,
                r[1] / lambda,
                p
            )?;
        }
        Ok(())
    }
}

pub fn populations(state: &[C64]) -> Vec<f64> {
    state
        .chunks(2)
        .map(|c| c[0].norm_sqr() + c[1].norm_sqr())
        .collect()
}

/// Instantaneous amplitude decay rate `-Im <c|H|c> / <c|c>`.
pub fn instantaneous_decay(h: &FiniteHamiltonian, state: &[C64]) -> f64 {
    let v = ArrayView1::from(state);
    let hv = h.h.dot(&v);
    let num: C64 = v.iter().zip(hv.iter()).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    -num.im / den
}

/// Source columns `s_j(t) = Omega_j(t)/2 * e_pol` on each drive's target.
fn sources(protos: &[Option<DriveProtocol>], pols: &[[C64; 2]], dim: usize, t: f64) -> Array2<C64> {
    let mut s = Array2::<C64>::zeros((dim, protos.len()));
    for (j, p) in protos.iter().enumerate() {
        if let Some(p) = p {
            let a = drive_envelope(p, t) * 0.5;
            if a != CZERO {
                s[[2 * p.target, j]] = a * pols[j][0];
                s[[2 * p.target + 1, j]] = a * pols[j][1];
            }
        }
    }
    s
}

/// Dissipator `Gamma = i (H - H^dag)` (Hermitian, positive semidefinite for
/// a passive system).
pub fn dissipator(h: &FiniteHamiltonian) -> Array2<C64> {
    let i = C64::new(0.0, 1.0);
    let mut g = h.h.clone();
    ndarray::Zip::from(&mut g)
        .and(&h.h.t())
        .for_each(|g, ht| *g = i * (*g - ht.conj()));
    g
}

/// Per-atom loss rates `Re(c_i^dag (Gamma c)_i)` for every column of `c`.
fn loss_rates(gamma: &Array2<C64>, c: &Array2<C64>) -> Array2<f64> {
    let gc = gamma.dot(c);
    let (dim, m) = c.dim();
    Array2::from_shape_fn((dim / 2, m), |(i, j)| {
        (c[[2 * i, j]].conj() * gc[[2 * i, j]] + c[[2 * i + 1, j]].conj() * gc[[2 * i + 1, j]]).re
    })
}

/// Evolve several independent runs sharing one Hamiltonian. Column `j`
/// starts from `initial[j]` (or the ground state) under drive `protos[j]`.
/// Integrates `i dc/dt = H c + s(t)` with classical RK4.
pub fn evolve_batch(
    h: &FiniteHamiltonian,
    protos: &[Option<DriveProtocol>],
    initial: Option<&[Vec<C64>]>,
    opts: &EvolveOptions,
) -> Result<Vec<Trajectory>> {
    let dim = h.dim();
    let m = protos.len();
    if m == 0 {
        return Err(Error::Domain("no runs requested".into()));
    }
    if !(opts.dt > 0.0 && opts.t_end > 0.0 && opts.stride >= 1) {
        return Err(Error::Domain(format!(
            "need dt > 0, t_end > 0, stride >= 1 (got {}, {}, {})",
            opts.dt, opts.t_end, opts.stride
        )));
    }
    let mut pols = Vec::with_capacity(m);
    for p in protos {
        match p {
            Some(p) => {
                p.validate(h.n_atoms())?;
                if (p.detuning - h.detuning).abs() > 1e-12 * (1.0 + h.detuning.abs()) {
                    return Err(Error::Domain(format!(
                        "drive detuning {} differs from the Hamiltonian frame {}",
                        p.detuning, h.detuning
                    )));
                }
                pols.push(p.polarization.normalized()?.cartesian());
            }
            None => pols.push([CZERO; 2]),
        }
    }
    let mut c = Array2::<C64>::zeros((dim, m));
    if let Some(init) = initial {
        if init.len() != m || init.iter().any(|v| v.len() != dim) {
            return Err(Error::Domain("initial states do not match the runs".into()));
        }
        for (j, v) in init.iter().enumerate() {
            c.column_mut(j).assign(&ArrayView1::from(v.as_slice()));
        }
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let dt = opts.dt;
    let minus_i = C64::new(0.0, -1.0);

    let col_norms = |c: &Array2<C64>| -> Vec<f64> {
        (0..m)
            .map(|j| c.column(j).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    };
    let snapshot = |c: &Array2<C64>, j: usize| -> Vec<C64> { c.column(j).to_vec() };

    let mut trajs: Vec<Trajectory> = (0..m)
        .map(|j| Trajectory {
            times: vec![0.0],
            states: vec![snapshot(&c, j)],
            step_times: vec![0.0],
            norms: vec![c.column(j).iter().map(|z| z.norm_sqr()).sum()],
            losses: if opts.track_losses {
                vec![vec![0.0; dim / 2]]
            } else {
                Vec::new()
            },
            protocol: protos[j],
        })
        .collect();

    let rhs = |t: f64, c: &Array2<C64>, out: &mut Array2<C64>| {
        out.assign(&sources(protos, &pols, dim, t));
        general_mat_mul(C64::new(1.0, 0.0), &h.h, c, C64::new(1.0, 0.0), out);
        out.mapv_inplace(|z| z * minus_i);
    };

    let mut k1 = Array2::<C64>::zeros((dim, m));
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let gamma = opts.track_losses.then(|| dissipator(h));
    let mut rates = gamma.as_ref().map(|g| loss_rates(g, &c));
    let mut cum = Array2::<f64>::zeros((dim / 2, m));
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs(t, &c, &mut k1);
        tmp.assign(&c);
        tmp.scaled_add(half, &k1);
        rhs(t + 0.5 * dt, &tmp, &mut k2);
        tmp.assign(&c);
        tmp.scaled_add(half, &k2);
        rhs(t + 0.5 * dt, &tmp, &mut k3);
        tmp.assign(&c);
        tmp.scaled_add(full, &k3);
        rhs(t + dt, &tmp, &mut k4);
        let w = C64::new(dt / 6.0, 0.0);
        ndarray::Zip::from(&mut c)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|c, a, b, d, e| *c += w * (a + 2.0 * b + 2.0 * d + e));

        if let (Some(g), Some(r0)) = (&gamma, &mut rates) {
            let r1 = loss_rates(g, &c);
            cum.scaled_add(0.5 * dt, r0);
            cum.scaled_add(0.5 * dt, &r1);
            *r0 = r1;
        }
        let t1 = (step + 1) as f64 * dt;
        let norms = col_norms(&c);
        for j in 0..m {
            let before = *trajs[j].norms.last().unwrap();
            let off =
                protos[j].is_none_or(|p| !p.is_on(t) && !p.is_on(t1) && !p.is_on(t + 0.5 * dt));
            if off && norms[j] - before > opts.norm_tol * dt * before.max(f64::MIN_POSITIVE) {
                return Err(Error::Unstable {
                    t: t1,
                    before,
                    after: norms[j],
                });
            }
            if !norms[j].is_finite() {
                return Err(Error::Unstable {
                    t: t1,
                    before,
                    after: norms[j],
                });
            }
            trajs[j].step_times.push(t1);
            trajs[j].norms.push(norms[j]);
            if (step + 1) % opts.stride == 0 || step + 1 == steps {
                trajs[j].times.push(t1);
                trajs[j].states.push(snapshot(&c, j));
                if opts.track_losses {
                    trajs[j].losses.push(cum.column(j).to_vec());
                }
            }
        }
    }
    Ok(trajs)
}

/// Single-run convenience wrapper around [`evolve_batch`].
pub fn evolve(
    h: &FiniteHamiltonian,
    proto: Option<DriveProtocol>,
    initial: Option<Vec<C64>>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let init = initial.map(|v| vec![v]);
    let mut t = evolve_batch(h, &[proto], init.as_deref(), opts)?;
    Ok(t.remove(0))
}

/// Amplitude decay rate from a least-squares fit of `ln ||c||^2` against
/// time over `[t_off + settle, end]`: `P ~ exp(-2 gamma t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma: f64,
    /// Root-mean-square residual of `ln P`.
    pub rms_residual: f64,
    pub points: usize,
}

pub fn fit_decay_rate(traj: &Trajectory, t_off: f64, settle: f64) -> Result<DecayFit> {
    let t_last = *traj.step_times.last().unwrap_or(&0.0);
    if t_last < t_off + 5.0 {
        return Err(Error::Fit(format!(
            "trajectory ends at {t_last}, needs >= 5 past t_off = {t_off}"
        )));
    }
    let pts: Vec<(f64, f64)> = traj
        .step_times
        .iter()
        .zip(&traj.norms)
        .filter(|(t, _)| **t >= t_off + settle)
        .map(|(t, p)| (*t, *p))
        .collect();
    if pts.windows(2).any(|w| w[1].1 > w[0].1 * (1.0 + 1e-12)) {
        return Err(Error::Fit(
            "population is not monotone after switch-off".into(),
        ));
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::Fit("population vanished".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(t, p)| (*t, p.ln())).collect();
    let (slope, icpt) = crate::topology::linear_fit(&logs)?;
    let rms = (logs
        .iter()
        .map(|(t, l)| (l - (slope * t + icpt)).powi(2))
        .sum::<f64>()
        / logs.len() as f64)
        .sqrt();
    Ok(DecayFit {
        gamma: -0.5 * slope,
        rms_residual: rms,
        points: logs.len(),
    })
}

/// Eigenvalues of the finite Hamiltonian (ascending real part).
pub fn finite_spectrum(h: &FiniteHamiltonian) -> Result<Vec<C64>> {
    crate::linalg::eigvals_sorted(&h.h)
}

/// Lifetime data of one flake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimePoint {
    pub rings: usize,
    pub n_atoms: usize,
    pub in_gap: usize,
    pub mean_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeScaling {
    pub points: Vec<LifetimePoint>,
    /// Fitted slope of `ln gamma` against `ln N`.
    pub exponent: f64,
    pub window: (f64, f64),
}

impl LifetimeScaling {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rings,n_atoms,in_gap,mean_gamma")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{:.10e}",
                p.rings, p.n_atoms, p.in_gap, p.mean_gamma
            )?;
        }
        Ok(())
    }
}

/// Mean decay rate of all finite-flake eigenmodes with `lo < Re E < hi`
/// (the infinite-lattice gap) for bearded hexagons of the given ring
/// counts, and the fitted power law in `N`.
pub fn edge_lifetime_scaling(
    rings: &[usize],
    params: &PhysicalParams,
    window: (f64, f64),
) -> Result<LifetimeScaling> {
    if rings.len() < 4 {
        return Err(Error::Domain(format!(
            "need >= 4 sizes, got {}",
            rings.len()
        )));
    }
    let mut points = Vec::new();
    for &r in rings {
        let lat = crate::lattice::build_hexagon_bearded(r, params.spacing)?;
        let h = assemble_finite_hamiltonian(&lat, params, 0.0)?;
        let ev = finite_spectrum(&h)?;
        let sel: Vec<f64> = ev
            .iter()
            .filter(|e| e.re > window.0 && e.re < window.1)
            .map(|e| -e.im)
            .collect();
        if sel.is_empty() {
            return Err(Error::Domain(format!("no in-gap states for rings = {r}")));
        }
        points.push(LifetimePoint {
            rings: r,
            n_atoms: lat.len(),
            in_gap: sel.len(),
            mean_gamma: sel.iter().sum::<f64>() / sel.len() as f64,
        });
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.n_atoms as f64).ln(), p.mean_gamma.ln()))
        .collect();
    let (slope, _) = crate::topology::linear_fit(&logs)?;
    Ok(LifetimeScaling {
        points,
        exponent: slope,
        window,
    })
}

/// Flake sizes of the lifetime study, starting at the 120-atom flake.
pub const LIFETIME_RINGS: [usize; 5] = [4, 5, 7, 9, 11];

/// Share of `|v|^2` on the undercoordinated (outermost) atoms.
pub fn perimeter_weight(lat: &FiniteLattice, boundary: &[bool], v: ArrayView1<C64>) -> f64 {
    let tot: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let w: f64 = (0..lat.len())
        .filter(|&i| boundary[i])
        .map(|i| v[2 * i].norm_sqr() + v[2 * i + 1].norm_sqr())
        .sum();
    w / tot
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCheck {
    pub n_atoms: usize,
    /// Share of atoms on the perimeter.
    pub uniform_share: f64,
    /// Perimeter weights of the in-gap eigenmodes.
    pub in_gap: Vec<f64>,
    /// Fraction of out-of-gap modes that pass the same test.
    pub out_of_gap_pass: f64,
    pub threshold: f64,
}

impl SupportCheck {
    pub fn all_in_gap_supported(&self) -> bool {
        !self.in_gap.is_empty() && self.in_gap.iter().all(|&w| w >= self.threshold)
    }
}

/// Compare the in-gap selection with a perimeter-support test: a mode is
/// perimeter-supported when its weight on the outermost atoms is at least
/// twice their share of the flake.
pub fn edge_support_check(
    rings: usize,
    params: &PhysicalParams,
    window: (f64, f64),
) -> Result<SupportCheck> {
    let lat = crate::lattice::build_hexagon_bearded(rings, params.spacing)?;
    let h = assemble_finite_hamiltonian(&lat, params, 0.0)?;
    let (ev, vecs) = crate::linalg::eig_sorted(&h.h)?;
    let boundary = lat.boundary_mask();
    let share = boundary.iter().filter(|b| **b).count() as f64 / lat.len() as f64;
    let threshold = 2.0 * share;
    let mut in_gap = Vec::new();
    let (mut out_n, mut out_pass) = (0usize, 0usize);
    for (n, e) in ev.iter().enumerate() {
        let w = perimeter_weight(&lat, &boundary, vecs.column(n));
        if e.re > window.0 && e.re < window.1 {
            in_gap.push(w);
        } else {
            out_n += 1;
            if w >= threshold {
                out_pass += 1;
            }
        }
    }
    Ok(SupportCheck {
        n_atoms: lat.len(),
        uniform_share: share,
        in_gap,
        out_of_gap_pass: out_pass as f64 / out_n.max(1) as f64,
        threshold,
    })
}

/// Slice of `state` belonging to atom `i`.
pub fn atom_amplitudes(state: &[C64], i: usize) -> [C64; 2] {
    [state[2 * i], state[2 * i + 1]]
}

/// Initial state with one atom excited in the given polarisation.
pub fn single_excitation(n_atoms: usize, atom: usize, pol: Polarization) -> Result<Vec<C64>> {
    if atom >= n_atoms {
        return Err(Error::Domain(format!("atom {atom} outside lattice")));
    }
    let mut v = vec![CZERO; 2 * n_atoms];
    let c = pol.normalized()?.cartesian();
    v[2 * atom] = c[0];
    v[2 * atom + 1] = c[1];
    Ok(v)
}

/// Hermitian-part check: largest eigenvalue of `(H - H^dag)/(2i)`; must be
/// `<= 0` for a passive system.
pub fn max_gain(h: &FiniteHamiltonian) -> Result<f64> {
    let im = crate::linalg::imaginary_part(&h.h);
    crate::linalg::max_hermitian_eigenvalue(&im)
}

pub fn state_difference(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{BoundaryType, FiniteLattice};

    fn single_atom() -> FiniteLattice {
        FiniteLattice {
            spacing: 0.05,
            positions: vec![[0.0, 0.0]],
            sublattice: vec![1],
            boundary_type: BoundaryType::HexagonBearded,
            periodic: None,
            defect_mask: vec![],
        }
    }

    #[test]
    fn single_atom_levels() {
        let p = PhysicalParams::natural(12.0, 0.05);
        let h = assemble_finite_hamiltonian(&single_atom(), &p, 3.0).unwrap();
        let ev = finite_spectrum(&h).unwrap();
        assert!((ev[0] - C64::new(-3.0 - 12.0, -0.5)).norm() < 1e-12);
        assert!((ev[1] - C64::new(-3.0 + 12.0, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn circular_vectors_diagonalise_the_zeeman_block() {
        let p = PhysicalParams::natural(2.0, 0.05);
        let h = assemble_finite_hamiltonian(&single_atom(), &p, 0.0).unwrap();
        for (pol, e) in [
            (Polarization::sigma_plus(), 2.0),
            (Polarization::sigma_minus(), -2.0),
        ] {
            let v = pol.cartesian();
            for r in 0..2 {
                let hv = h.h[[r, 0]] * v[0] + h.h[[r, 1]] * v[1];
                assert!((hv - C64::new(e, -0.5) * v[r]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn envelopes() {
        let g = Envelope::Gaussian {
            t0: 1.5,
            tau2: 0.15,
        };
        assert!((g.at(1.5) - 1.0).abs() < 1e-15);
        assert!((g.at(0.0) - (-15.0f64).exp()).abs() < 1e-20);
        assert_eq!(g.at(4.0), 1.0);
        let s = Envelope::Sigmoid { t0: 3.0, tau: 0.3 };
        assert!((s.at(3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn switch_off_is_abrupt() {
        let proto = DriveProtocol {
            target: 0,
            omega: 2.0,
            detuning: 0.0,
            polarization: Polarization::x(),
            envelope: Envelope::Constant,
            t_off: Some(1.0),
        };
        assert_eq!(drive_envelope(&proto, 0.999), C64::new(2.0, 0.0));
        assert_eq!(drive_envelope(&proto, 1.0), CZERO);
    }

    #[test]
    fn x_polarisation_is_cartesian_x() {
        let c = Polarization::x().cartesian();
        assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(c[1].norm() < 1e-15);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundStateConfig {
    pub rings: usize,
    pub spacing: f64,
    pub mu_b: f64,
    pub omega: f64,
    pub detuning: f64,
    pub envelope: Envelope,
    pub t_off: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Time after switch-off excluded from the exponential fit.
    pub settle: f64,
}

impl Default for BoundStateConfig {
    fn default() -> Self {
        Self {
            rings: 14,
            spacing: 0.05,
            mu_b: 12.0,
            omega: 1.0,
            detuning: 10.0,
            envelope: Envelope::Sigmoid { t0: 3.0, tau: 0.3 },
            t_off: 10.0,
            t_end: 16.0,
            dt: 5e-3,
            settle: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateRate {
    pub polarization: String,
    /// Fit of the free decay after switch-off (amplitude rate).
    pub fit: DecayFit,
    /// `-Im <c|H|c> / <c|c>` of the driven state at switch-off (amplitude
    /// rate).
    pub gamma_inst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateReport {
    pub n_atoms: usize,
    pub source: usize,
    pub rates: Vec<BoundStateRate>,
}

impl BoundStateReport {
    pub fn rate(&self, label: &str) -> Option<&BoundStateRate> {
        self.rates.iter().find(|r| r.polarization == label)
    }
}

/// Drive the atom nearest the centre of a bearded hexagon inside the gap
/// with sigma+, x and sigma- light, switch the drive off and measure the
/// decay of the bound state.
pub fn run_bound_states(
    cfg: &BoundStateConfig,
) -> Result<(BoundStateReport, FiniteLattice, Vec<Trajectory>)> {
    if cfg.t_end < cfg.t_off + cfg.settle + 5.0 {
        return Err(Error::Domain(format!(
            "t_end = {} leaves less than 5 time units of free decay to fit",
            cfg.t_end
        )));
    }
    let params = PhysicalParams::natural(cfg.mu_b, cfg.spacing);
    let lat = crate::lattice::build_hexagon_bearded(cfg.rings, cfg.spacing)?;
    let source = lat.nearest(lat.centroid());
    let h = assemble_finite_hamiltonian(&lat, &params, cfg.detuning)?;
    let pols = [
        ("sigma+", Polarization::sigma_plus()),
        ("x", Polarization::x()),
        ("sigma-", Polarization::sigma_minus()),
    ];
    let protos: Vec<_> = pols
        .iter()
        .map(|(_, p)| {
            Some(DriveProtocol {
                target: source,
                omega: cfg.omega,
                detuning: cfg.detuning,
                polarization: *p,
                envelope: cfg.envelope,
                t_off: Some(cfg.t_off),
            })
        })
        .collect();
    let stride = ((0.1 / cfg.dt).round() as usize).max(1);
    let opts = EvolveOptions {
        dt: cfg.dt,
        t_end: cfg.t_end,
        stride,
        norm_tol: 1e-10,
        track_losses: false,
    };
    let trajs = evolve_batch(&h, &protos, None, &opts)?;
    let mut rates = Vec::new();
    for ((label, _), tr) in pols.iter().zip(&trajs) {
        let k = tr.snapshot_at(cfg.t_off)?;
        rates.push(BoundStateRate {
            polarization: label.to_string(),
            fit: fit_decay_rate(tr, cfg.t_off, cfg.settle)?,
            gamma_inst: instantaneous_decay(&h, &tr.states[k]),
        });
    }
    Ok((
        BoundStateReport {
            n_atoms: lat.len(),
            source,
            rates,
        },
        lat,
        trajs,
    ))
}
