#![allow(dead_code)]

use num_complex::Complex64 as C64;
use topoarray::lattice::{LatticeGeometry, Vec2};

/// Closed-form in-plane block of the free-space dyadic Green's function.
pub fn green_block(x: f64, y: f64, k: f64) -> [[C64; 2]; 2] {
    let r = x.hypot(y);
    let kr = k * r;
    let i = C64::new(0.0, 1.0);
    let pre = -(i * kr).exp() / (4.0 * std::f64::consts::PI * r);
    let d = pre * (1.0 + i / kr - 1.0 / (kr * kr));
    let c = pre * (-1.0 - 3.0 * i / kr + 3.0 / (kr * kr));
    let (nx, ny) = (x / r, y / r);
    [
        [d + c * nx * nx, c * nx * ny],
        [c * nx * ny, d + c * ny * ny],
    ]
}

/// Real-space lattice sum `sum_R e^{i kb.R} G(R + off) e^{-eps |R + off|^2}`
/// (the `R + off = 0` term dropped).
pub fn damped_sum(geom: &LatticeGeometry, k: f64, kb: Vec2, off: Vec2, eps: f64) -> [[C64; 2]; 2] {
    let rmax = (40.0 / eps).sqrt() + 2.0 * geom.spacing;
    let h = 1.5 * geom.spacing;
    let n2 = (rmax / h).ceil() as i64 + 1;
    let n1 = 2 * n2;
    let mut s = [[C64::new(0.0, 0.0); 2]; 2];
    for m1 in -n1..=n1 {
        for m2 in -n2..=n2 {
            let r = geom.bravais(m1, m2);
            let x = [r[0] + off[0], r[1] + off[1]];
            let d2 = x[0] * x[0] + x[1] * x[1];
            if d2 < 1e-24 || d2 > rmax * rmax {
                continue;
            }
            let w = C64::from_polar((-eps * d2).exp(), kb[0] * r[0] + kb[1] * r[1]);
            let g = green_block(x[0], x[1], k);
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += w * g[a][b];
                }
            }
        }
    }
    s
}

/// Damped sums at `eps0 / 2^j`, `j = 0..5`, Richardson-extrapolated to
/// `eps -> 0` assuming a power series in `eps`.
pub fn oracle_sum(geom: &LatticeGeometry, k: f64, kb: Vec2, off: Vec2, eps0: f64) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    let levels: Vec<_> = (0..5)
        .map(|j| damped_sum(geom, k, kb, off, eps0 / 2f64.powi(j)))
        .collect();
    for a in 0..2 {
        for b in 0..2 {
            let mut t: Vec<C64> = levels.iter().map(|s| s[a][b]).collect();
            let mut f = 2.0;
            while t.len() > 1 {
                t = t
                    .windows(2)
                    .map(|w| (f * w[1] - w[0]) / (f - 1.0))
                    .collect();
                f *= 2.0;
            }
            out[a][b] = t[0];
        }
    }
    out
}

pub fn frob(t: &[[C64; 2]; 2]) -> f64 {
    t.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frob_diff(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += (a[i][j] - b[i][j]).norm_sqr();
        }
    }
    s.sqrt()
}

/// Ten Bloch vectors inside the first zone with `|kb| > 1.2 k`, from a fixed
/// linear congruential sequence.
pub fn random_evanescent_points(geom: &LatticeGeometry, k: f64) -> Vec<Vec2> {
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = Vec::new();
    while out.len() < 10 {
        let (u, v) = (next(), next());
        let kb = [
            (u - 0.5) * geom.g1[0] + (v - 0.5) * geom.g2[0],
            (u - 0.5) * geom.g1[1] + (v - 0.5) * geom.g2[1],
        ];
        let kb = topoarray::bloch::fold_to_bz(geom, kb);
        if kb[0].hypot(kb[1]) > 1.2 * k {
            out.push(kb);
        }
    }
    out
}
