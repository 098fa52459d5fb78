use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};
use topoarray::bloch::{band_gap, band_structure};
use topoarray::disorder::gap_vs_fluctuation;
use topoarray::dynamics::{
    edge_lifetime_scaling, edge_support_check, run_bound_states, Trajectory,
};
use topoarray::lattice::{build_geometry, build_stripe, bz_path, FiniteLattice};
use topoarray::stripes::{edge_branches, edge_group_velocity, stripe_spectrum_with, Side};
use topoarray::topology::{chern_numbers, gap_scaling_vs_spacing, gap_vs_field, scaled_fields};
use topoarray::transport::run_transport;
use topoarray::{PhysicalParams, RegularizationParams};

use crate::config::{Options, RunConfig};
use crate::Failure;

/// Artifact directory: every file written is recorded for the manifest.
struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn create<F>(&mut self, name: &str, fill: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> topoarray::Result<()>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Failure::io(format!("cannot create {}: {e}", parent.display())))?;
        }
        let file = File::create(&path)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush().map_err(|e| Failure::io(e.to_string()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), Failure> {
        self.create(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn lattice(&mut self, name: &str, lat: &FiniteLattice, lambda: f64) -> Result<(), Failure> {
        self.create(name, |w| lat.write_csv(lambda, w))
    }

    fn frames(
        &mut self,
        prefix: &str,
        traj: &Trajectory,
        lat: &FiniteLattice,
    ) -> Result<(), Failure> {
        for i in 0..traj.times.len() {
            self.create(&format!("frames/{prefix}_{i:04}.csv"), |w| {
                traj.write_snapshot_csv(i, lat, 1.0, w)
            })?;
        }
        Ok(())
    }
}

fn params_of(cfg: &RunConfig) -> (PhysicalParams, RegularizationParams) {
    (
        cfg.params.expect("resolved for this experiment"),
        cfg.regularization.expect("resolved for this experiment"),
    )
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", out.display())))?;
    let mut art = Artifacts {
        dir: out,
        written: Vec::new(),
    };
    let start = Instant::now();
    log::info!("running {} into {}", cfg.experiment(), out.display());
    let results = match &cfg.options {
        Options::Bands(o) => {
            let (p, reg) = params_of(cfg);
            let geom = build_geometry(p.spacing)?;
            let sym = geom.sym_points;
            let corners: Vec<_> = o
                .path
                .iter()
                .map(|n| match n.as_str() {
                    "Gamma" => sym.gamma,
                    "K" => sym.k,
                    _ => sym.m,
                })
                .collect();
            let path = bz_path(&corners, o.n_per_segment)?;
            // The lattice sums diverge on the light circle; such path points
            // are left out and listed in the manifest.
            let k = p.k();
            let (kept, skipped): (Vec<_>, Vec<_>) = path
                .iter()
                .enumerate()
                .partition(|(_, q)| (q.k[0].hypot(q.k[1]) - k).abs() > 1e-9 * k);
            let ks: Vec<_> = kept.iter().map(|(_, q)| q.k).collect();
            let arc: Vec<_> = kept.iter().map(|(_, q)| q.arc).collect();
            let points = band_structure(&ks, &p, reg)?;
            art.create("bands.csv", |w| {
                topoarray::bloch::write_bands_csv(&points, &arc, &p, w)
            })?;
            let gap = band_gap(&p, reg, o.grid_n)?;
            json!({
                "points": points.len(),
                "skipped_on_light_circle": skipped.iter().map(|(i, _)| *i).collect::<Vec<_>>(),
                "gap": gap,
            })
        }
        Options::Chern(o) => {
            let (p, reg) = params_of(cfg);
            let r = chern_numbers(&p, reg, o.grid_n)?;
            art.json("chern.json", &r.to_json())?;
            art.create("chern_flux.csv", |w| r.write_flux_csv(w))?;
            r.to_json()
        }
        Options::Gapscan(o) => {
            let (p, reg) = params_of(cfg);
            let fields = match o.mu_max {
                Some(m) => scaled_fields(1.0, 1.0, m, o.points),
                None => scaled_fields(p.spacing / p.lambda, 0.05, 40.0, o.points),
            };
            let curve = gap_vs_field(&p, reg, &fields, o.grid_n)?;
            art.create("gapscan.csv", |w| curve.write_csv(w))?;
            let (lo, hi) = o.slope_window;
            let low: Vec<f64> = (0..=6).map(|i| lo + (hi - lo) * i as f64 / 6.0).collect();
            let slope = gap_vs_field(&p, reg, &low, o.grid_n)?.slope(lo, hi)?;
            let summary = json!({
                "delta_max": curve.delta_max,
                "argmax_mu_b": curve.argmax_mu_b,
                "low_field_slope": slope,
                "slope_window": [lo, hi],
            });
            art.json("gapscan.json", &summary)?;
            summary
        }
        Options::SpacingScan(o) => {
            let (p, _) = params_of(cfg);
            let s = gap_scaling_vs_spacing(&p, &o.spacings, o.mu_max, o.fields, o.grid_n)?;
            art.create("spacing_scan.csv", |w| s.write_csv(w))?;
            let summary =
                json!({ "delta_slope": s.delta_slope, "coupling_slope": s.coupling_slope });
            art.json("spacing_scan.json", &summary)?;
            summary
        }
        Options::Stripe(o) => {
            let (p, reg) = params_of(cfg);
            let gap = band_gap(&p, reg, o.grid_n)?;
            let (lo, hi) = (gap.lower_max, gap.upper_min);
            let lat = build_stripe(
                o.edge,
                o.rows,
                o.cols,
                o.images.unwrap_or(o.rows / 2),
                p.spacing,
            )?;
            let spec = stripe_spectrum_with(&lat, &p, o.image_sum(p.lambda))?;
            art.create("stripe.csv", |w| spec.write_csv(&p, w))?;
            art.lattice("lattice.csv", &lat, p.lambda)?;
            let mid = 0.5 * (lo + hi);
            let mut sides = serde_json::Map::new();
            for (name, side) in [("bottom", Side::Bottom), ("top", Side::Top)] {
                let crossing = edge_branches(&spec, side, lo, hi).crossing(mid).len();
                let v = if gap.is_open() {
                    edge_group_velocity(&spec, side, lo, hi, mid, p.spacing)?
                } else {
                    Vec::new()
                };
                sides.insert(
                    name.into(),
                    json!({ "crossing_branches": crossing, "group_velocities": v }),
                );
            }
            let summary = json!({
                "n_atoms": lat.len(),
                "gap_window": [lo, hi],
                "edges": sides,
            });
            art.json("stripe.json", &summary)?;
            summary
        }
        Options::Evolve(t) => {
            let run = run_transport(t)?;
            art.lattice("lattice.csv", &run.clean, 1.0)?;
            art.frames("clean", &run.clean_runs[0], &run.clean)?;
            if let (Some(lat), Some(traj)) = (&run.damaged, &run.damaged_run) {
                art.lattice("lattice_damaged.csv", lat, 1.0)?;
                art.frames("damaged", traj, lat)?;
            }
            let metrics = serde_json::to_value(&run.metrics).map_err(topoarray::Error::from)?;
            art.json("metrics.json", &metrics)?;
            metrics
        }
        Options::Bound(b) => {
            let (report, lat, trajs) = run_bound_states(b)?;
            art.lattice("lattice.csv", &lat, 1.0)?;
            art.create("decay.csv", |w| {
                writeln!(w, "t,p_sigma_plus,p_x,p_sigma_minus")?;
                let every = ((0.05 / b.dt).round() as usize).max(1);
                for k in (0..trajs[0].norms.len()).step_by(every) {
                    writeln!(
                        w,
                        "{:.6},{:.10e},{:.10e},{:.10e}",
                        trajs[0].step_times[k],
                        trajs[0].norms[k],
                        trajs[1].norms[k],
                        trajs[2].norms[k]
                    )?;
                }
                Ok(())
            })?;
            for (r, traj) in report.rates.iter().zip(&trajs) {
                let k = traj.snapshot_at(b.t_off)?;
                let label = r.polarization.replace('+', "_plus").replace('-', "_minus");
                art.create(&format!("frames/bound_{label}_t_off.csv"), |w| {
                    traj.write_snapshot_csv(k, &lat, 1.0, w)
                })?;
            }
            let value = serde_json::to_value(&report).map_err(topoarray::Error::from)?;
            art.json("bound.json", &value)?;
            value
        }
        Options::Lifetimes(o) => {
            let (p, reg) = params_of(cfg);
            let gap = band_gap(&p, reg, o.grid_n)?;
            let window = (gap.lower_max, gap.upper_min);
            let scaling = edge_lifetime_scaling(&o.rings, &p, window)?;
            art.create("lifetimes.csv", |w| scaling.write_csv(w))?;
            let support = edge_support_check(o.support_rings, &p, window)?;
            let summary = json!({
                "gap_window": [window.0, window.1],
                "exponent": scaling.exponent,
                "points": scaling.points,
                "support": support,
                "all_in_gap_edge_supported": support.all_in_gap_supported(),
            });
            art.json("lifetimes.json", &summary)?;
            summary
        }
        Options::Fluct(o) => {
            let (p, reg) = params_of(cfg);
            let curve = gap_vs_fluctuation(&o.deltas, &p, reg, &o.sampling(cfg.seed))?;
            art.create("fluct.csv", |w| curve.write_csv(w))?;
            let d0 = curve.points.first().map(|q| q.gap.delta);
            let last = curve.points.last().map(|q| q.gap.delta);
            let summary = json!({
                "points": curve.points,
                "ratio_last_to_first": d0.zip(last).map(|(a, b)| b / a),
                "non_increasing_2se": curve.is_non_increasing(2.0),
            });
            art.json("fluct.json", &summary)?;
            summary
        }
    };
    let manifest = json!({
        "tool": "topoarray",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment(),
        "seed": cfg.seed,
        "config": cfg,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "artifacts": art.written,
        "results": results,
    });
    art.json("manifest.json", &manifest)?;
    log::info!("done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
