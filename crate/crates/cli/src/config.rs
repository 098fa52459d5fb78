use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use topoarray::disorder::FluctuationOptions;
use topoarray::dynamics::{BoundStateConfig, LIFETIME_RINGS};
use topoarray::lattice::BoundaryType;
use topoarray::stripes::ImageSum;
use topoarray::transport::TransportConfig;
use topoarray::{PhysicalParams, RegularizationParams};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bands,
    Chern,
    Gapscan,
    SpacingScan,
    Stripe,
    Evolve,
    Bound,
    Lifetimes,
    Fluct,
}

/// Config file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Option<ParamsConfig>,
    #[serde(default)]
    pub regularization: Option<RegConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub options: Option<Value>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub lambda: f64,
    pub gamma0: f64,
    pub mu_b: f64,
    pub spacing: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = PhysicalParams::default();
        Self {
            lambda: p.lambda,
            gamma0: p.gamma0,
            mu_b: p.mu_b,
            spacing: p.spacing,
        }
    }
}

/// Regulator; `a_ho` defaults to `spacing / 20`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegConfig {
    pub a_ho: Option<f64>,
    pub g_cutoff: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            a_ho: None,
            g_cutoff: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsOptions {
    /// Symmetry points among `Gamma`, `K`, `M`.
    pub path: Vec<String>,
    pub n_per_segment: usize,
    pub grid_n: usize,
}

impl Default for BandsOptions {
    fn default() -> Self {
        Self {
            path: vec!["M".into(), "Gamma".into(), "K".into(), "M".into()],
            n_per_segment: 100,
            grid_n: 24,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernOptions {
    pub grid_n: usize,
}

impl Default for ChernOptions {
    fn default() -> Self {
        Self { grid_n: 24 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapscanOptions {
    /// Upper end of the field window at the configured spacing; `None`
    /// scales `40 (0.05 lambda / a)^3`.
    pub mu_max: Option<f64>,
    pub points: usize,
    pub grid_n: usize,
    /// Window for the low-field slope.
    pub slope_window: (f64, f64),
}

impl Default for GapscanOptions {
    fn default() -> Self {
        Self {
            mu_max: None,
            points: 21,
            grid_n: 24,
            slope_window: (0.5, 2.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacingScanOptions {
    /// Spacings in units of lambda.
    pub spacings: Vec<f64>,
    /// Field window top at `a = 0.05 lambda`.
    pub mu_max: f64,
    pub fields: usize,
    pub grid_n: usize,
}

impl Default for SpacingScanOptions {
    fn default() -> Self {
        Self {
            spacings: vec![0.02, 0.025, 0.03, 0.04, 0.05],
            mu_max: 40.0,
            fields: 21,
            grid_n: 24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageSumKind {
    Truncated,
    Extrapolated,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripeOptions {
    pub edge: BoundaryType,
    pub rows: usize,
    pub cols: usize,
    /// Coupling images per side; `None` means `rows / 2`.
    pub images: Option<usize>,
    pub image_sum: ImageSumKind,
    /// Bulk grid for the gap window.
    pub grid_n: usize,
}

impl Default for StripeOptions {
    fn default() -> Self {
        Self {
            edge: BoundaryType::Bearded,
            rows: 40,
            cols: 42,
            images: None,
            image_sum: ImageSumKind::Truncated,
            grid_n: 24,
        }
    }
}

impl StripeOptions {
    pub fn image_sum(&self, lambda: f64) -> ImageSum {
        match self.image_sum {
            ImageSumKind::Truncated => ImageSum::Truncated,
            ImageSumKind::Extrapolated => ImageSum::extrapolated(lambda),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifetimeOptions {
    pub rings: Vec<usize>,
    pub grid_n: usize,
    /// Flake used for the edge-support check.
    pub support_rings: usize,
}

impl Default for LifetimeOptions {
    fn default() -> Self {
        Self {
            rings: LIFETIME_RINGS.to_vec(),
            grid_n: 24,
            support_rings: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctOptions {
    /// Rms displacement per axis in units of the spacing.
    pub deltas: Vec<f64>,
    pub samples: usize,
    /// Radius (units of the spacing) inside which couplings are averaged.
    pub shell: f64,
    pub grid_n: usize,
    pub batches: usize,
}

impl Default for FluctOptions {
    fn default() -> Self {
        let d = FluctuationOptions::default();
        Self {
            deltas: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
            samples: d.samples,
            shell: d.shell,
            grid_n: d.grid_n,
            batches: d.batches,
        }
    }
}

impl FluctOptions {
    pub fn sampling(&self, seed: u64) -> FluctuationOptions {
        FluctuationOptions {
            samples: self.samples,
            seed,
            shell: self.shell,
            grid_n: self.grid_n,
            batches: self.batches,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "experiment", content = "options", rename_all = "kebab-case")]
pub enum Options {
    Bands(BandsOptions),
    Chern(ChernOptions),
    Gapscan(GapscanOptions),
    SpacingScan(SpacingScanOptions),
    Stripe(StripeOptions),
    Evolve(TransportConfig),
    Bound(BoundStateConfig),
    Lifetimes(LifetimeOptions),
    Fluct(FluctOptions),
}

/// Fully resolved run: every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub options: Options,
    /// Physical parameters (`None` for experiments that carry their own).
    pub params: Option<PhysicalParams>,
    pub regularization: Option<RegularizationParams>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn typed<T: serde::de::DeserializeOwned + Default>(v: Option<Value>) -> Result<T, Failure> {
    match v {
        None => Ok(T::default()),
        Some(v) => {
            serde_json::from_value(v).map_err(|e| Failure::validation(format!("options: {e}")))
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::validation(format!("{name} must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Failure::validation(format!("config: {e}")))?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self, Failure> {
        let carries_own = matches!(raw.experiment, Experiment::Evolve | Experiment::Bound);
        if carries_own && (raw.params.is_some() || raw.regularization.is_some()) {
            return Err(Failure::validation(
                "params/regularization are not used by this experiment; set spacing and mu_b under options"
                    .to_string(),
            ));
        }
        let options = match raw.experiment {
            Experiment::Bands => Options::Bands(typed(raw.options)?),
            Experiment::Chern => Options::Chern(typed(raw.options)?),
            Experiment::Gapscan => Options::Gapscan(typed(raw.options)?),
            Experiment::SpacingScan => Options::SpacingScan(typed(raw.options)?),
            Experiment::Stripe => Options::Stripe(typed(raw.options)?),
            Experiment::Evolve => Options::Evolve(typed(raw.options)?),
            Experiment::Bound => Options::Bound(typed(raw.options)?),
            Experiment::Lifetimes => Options::Lifetimes(typed(raw.options)?),
            Experiment::Fluct => Options::Fluct(typed(raw.options)?),
        };
        let (params, regularization) = if carries_own {
            (None, None)
        } else {
            let pc = raw.params.unwrap_or_default();
            let p = PhysicalParams {
                lambda: pc.lambda,
                gamma0: pc.gamma0,
                mu_b: pc.mu_b,
                spacing: pc.spacing,
            };
            for (name, v) in [
                ("params.lambda", p.lambda),
                ("params.gamma0", p.gamma0),
                ("params.spacing", p.spacing),
            ] {
                check_positive(name, v)?;
            }
            p.validate()
                .map_err(|e| Failure::validation(format!("params: {e}")))?;
            let rc = raw.regularization.unwrap_or_default();
            let reg = RegularizationParams {
                a_ho: rc.a_ho.unwrap_or(p.spacing / 20.0),
                g_cutoff: rc.g_cutoff,
            };
            reg.validate(p.lambda)
                .map_err(|e| Failure::validation(format!("regularization: {e}")))?;
            (Some(p), Some(reg))
        };
        let mut cfg = Self {
            options,
            params,
            regularization,
            seed: raw.seed.unwrap_or(0),
            out: raw.out,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Experiment-specific range checks.
    fn check(&mut self) -> Result<(), Failure> {
        let v = |m: String| Failure::validation(m);
        match &self.options {
            Options::Bands(o) => {
                if o.path.len() < 2 {
                    return Err(v("options.path needs at least two points".into()));
                }
                for name in &o.path {
                    if !matches!(name.as_str(), "Gamma" | "K" | "M") {
                        return Err(v(format!(
                            "options.path: unknown point '{name}' (expected Gamma, K, M)"
                        )));
                    }
                }
                if o.n_per_segment == 0 || o.grid_n < 12 {
                    return Err(v(
                        "options.n_per_segment must be >= 1 and grid_n >= 12".into()
                    ));
                }
            }
            Options::Chern(o) if o.grid_n < 12 => {
                return Err(v(format!("options.grid_n must be >= 12, got {}", o.grid_n)));
            }
            Options::Gapscan(o) => {
                if o.points < 2 || o.grid_n < 12 {
                    return Err(v("options.points must be >= 2 and grid_n >= 12".into()));
                }
                if let Some(m) = o.mu_max {
                    check_positive("options.mu_max", m)?;
                }
            }
            Options::SpacingScan(o) => {
                if o.spacings.len() < 2 {
                    return Err(v("options.spacings needs at least two values".into()));
                }
                for &a in &o.spacings {
                    check_positive("options.spacings", a)?;
                }
                check_positive("options.mu_max", o.mu_max)?;
                if o.fields < 2 || o.grid_n < 12 {
                    return Err(v("options.fields must be >= 2 and grid_n >= 12".into()));
                }
            }
            Options::Stripe(o) => {
                if matches!(o.edge, BoundaryType::HexagonBearded) {
                    return Err(v("options.edge must be bearded, armchair or zigzag".into()));
                }
                if o.grid_n < 12 {
                    return Err(v("options.grid_n must be >= 12".into()));
                }
            }
            Options::Evolve(t) => {
                check_positive("options.spacing", t.spacing)?;
                check_positive("options.dt", t.dt)?;
                check_positive("options.t_end", t.t_end)?;
                t.envelope
                    .validate()
                    .map_err(|e| v(format!("options.envelope: {e}")))?;
                if t.rings == 0 || t.stride == 0 {
                    return Err(v("options.rings and stride must be >= 1".into()));
                }
            }
            Options::Bound(b) => {
                check_positive("options.spacing", b.spacing)?;
                check_positive("options.dt", b.dt)?;
                b.envelope
                    .validate()
                    .map_err(|e| v(format!("options.envelope: {e}")))?;
                if b.t_end < b.t_off + b.settle + 5.0 {
                    return Err(v("options.t_end must leave >= 5 time units of free decay after t_off + settle".into()));
                }
            }
            Options::Lifetimes(o) => {
                if o.rings.len() < 4 {
                    return Err(v("options.rings needs at least four flake sizes".into()));
                }
                if o.rings.contains(&0) || o.support_rings == 0 || o.grid_n < 12 {
                    return Err(v(
                        "options.rings entries must be >= 1 and grid_n >= 12".into()
                    ));
                }
            }
            Options::Fluct(o) => {
                if o.deltas.is_empty() {
                    return Err(v("options.deltas must not be empty".into()));
                }
                for &d in &o.deltas {
                    if !(0.0..=0.25).contains(&d) {
                        return Err(v(format!("options.deltas: {d} outside [0, 0.25]")));
                    }
                }
                check_positive("options.shell", o.shell)?;
                if o.samples == 0 || o.batches == 0 || o.grid_n < 12 {
                    return Err(v(
                        "options.samples and batches must be >= 1, grid_n >= 12".into()
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Applies a command-line seed. Only the fluctuation sampler draws
    /// random numbers.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn experiment(&self) -> &'static str {
        match self.options {
            Options::Bands(_) => "bands",
            Options::Chern(_) => "chern",
            Options::Gapscan(_) => "gapscan",
            Options::SpacingScan(_) => "spacing-scan",
            Options::Stripe(_) => "stripe",
            Options::Evolve(_) => "evolve",
            Options::Bound(_) => "bound",
            Options::Lifetimes(_) => "lifetimes",
            Options::Fluct(_) => "fluct",
        }
    }
}
