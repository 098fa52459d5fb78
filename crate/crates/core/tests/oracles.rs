mod common;

use common::*;
use topoarray::bloch::{LatticeSummer, Offset};
use topoarray::greens::{greens_free_space, greens_in_plane};
use topoarray::lattice::build_geometry;
use topoarray::{PhysicalParams, RegularizationParams};

#[test]
fn lattice_sums_match_damped_real_space_sums() {
    let p = PhysicalParams::natural(12.0, 0.05);
    let geom = build_geometry(p.spacing).unwrap();
    let summer =
        LatticeSummer::new(geom, p.k(), RegularizationParams::for_spacing(p.spacing)).unwrap();
    let mut worst: f64 = 0.0;
    for kb in random_evanescent_points(&geom, p.k()) {
        let s = summer.sums(kb).unwrap();
        for (off, vec) in [
            (Offset::Zero, [0.0, 0.0]),
            (Offset::PlusB, geom.b),
            (Offset::MinusB, [-geom.b[0], -geom.b[1]]),
        ] {
            let oracle = oracle_sum(&geom, p.k(), kb, vec, 2.0);
            let rel = frob_diff(&s.get(off), &oracle) / frob(&oracle);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative deviation {worst:e}");
}

#[test]
fn halving_the_regulator_leaves_the_sums_unchanged() {
    let p = PhysicalParams::natural(12.0, 0.05);
    let geom = build_geometry(p.spacing).unwrap();
    let reg = RegularizationParams::for_spacing(p.spacing);
    let half = RegularizationParams {
        a_ho: reg.a_ho / 2.0,
        ..reg
    };
    let s1 = LatticeSummer::new(geom, p.k(), reg).unwrap();
    let s2 = LatticeSummer::new(geom, p.k(), half).unwrap();
    for kb in random_evanescent_points(&geom, p.k()) {
        let (a, b) = (s1.sums(kb).unwrap(), s2.sums(kb).unwrap());
        for off in [Offset::Zero, Offset::PlusB, Offset::MinusB] {
            let rel = frob_diff(&a.get(off), &b.get(off)) / frob(&a.get(off));
            assert!(rel < 1e-8, "{off:?} at {kb:?}: {rel:e}");
        }
    }
}

#[test]
fn greens_function_matches_reference_values() {
    let k = 2.0 * std::f64::consts::PI;
    // High-precision references at r = lambda x-hat.
    let g = greens_free_space([1.0, 0.0, 0.0], k).unwrap();
    let yy = g.get(1, 1);
    let xx = g.get(0, 0);
    let closed = green_block(1.0, 0.0, k);
    assert!((yy - closed[1][1]).norm() < 1e-12);
    assert!((xx - closed[0][0]).norm() < 1e-12);
    assert!(g.get(2, 2) == yy);
    let ip = greens_in_plane(0.3, 0.1, k);
    let closed = green_block(0.3, 0.1, k);
    for a in 0..2 {
        for b in 0..2 {
            assert!((ip[a][b] - closed[a][b]).norm() < 1e-12 * closed[a][b].norm().max(1.0));
        }
    }
}
