//! Configuration-driven parameter sweeps with CSV output.
//!
//! A config is a TOML file:
//!
//! ```toml
//! sweep = "L"
//! grid = [2, 4, 8, 12, 16, 20]
//! mc_samples = 5000
//! seed = 1
//! schemes = ["hbws", "hbacsi", "hbicsi"]
//!
//! [system]
//! d = 10
//! l = 8
//! k = 2
//! m1 = 2
//! rho = 10.0
//! zeta = 0.01
//!
//! [family]
//! kind = "banked"
//! ```
//!
//! Every grid point draws its Monte Carlo streams from a seed derived from
//! the root seed and the point, and all schemes at a point share them.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use serde::Deserialize;

use crate::beamformer::{
    dft_seed, gradient_ascent, greedy_permute, skew_reduced, sudarshan_rd, AscentOptions,
    RdBeamformer,
};
use crate::bounds::{beta_term, clb1_mc, clb_closed, EpsilonPolicy};
use crate::capacity::{
    baseline_capacity, hsnr_capacity_mc, hsnr_capacity_samples, zf_sum_rate_mc, Scheme,
    SchemeConfig,
};
use crate::channel::{
    effective_group_model, pas_correlation, ArrayGeometry, ChannelModel, EffectiveModel, PasSpec,
};
use crate::error::{Error, Result};
use crate::grassmann::{line_pack, LinePackOptions};
use crate::rng::{derive_seed, substream};
use crate::stats::{LogBase, McOptions, Moments};
use crate::switchset::SwitchFamily;

pub const CSV_COLUMNS: [&str; 13] = [
    "sweep_var",
    "value",
    "scheme",
    "mean_bits",
    "se_bits",
    "prelog",
    "throughput",
    "samples",
    "seed",
    "family_size",
    "f_fs",
    "notes",
    "wall_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepVar {
    L,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "users")]
    Users,
    D,
    #[serde(rename = "anisotropy")]
    Anisotropy,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::L => "L",
            SweepVar::Kappa => "kappa",
            SweepVar::Users => "users",
            SweepVar::D => "D",
            SweepVar::Anisotropy => "anisotropy",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub d: usize,
    pub l: usize,
    pub k: usize,
    pub m1: usize,
    #[serde(default = "one")]
    pub m2: usize,
    pub rho: f64,
    #[serde(default)]
    pub zeta: f64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Full,
    Banked,
    FranklBabai,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    #[serde(default)]
    pub kappa: Option<usize>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Uniform random same-size sub-families of the banked family, reported
    /// as an extra `HBwS-rand` row.
    #[serde(default)]
    pub random_controls: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            kind: FamilyKind::Banked,
            kappa: None,
            path: None,
            random_controls: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMethod {
    LinePack,
    Greedy,
    Ascent,
    /// Greedy permutation followed by gradient ascent.
    Both,
    Dft,
    Sudarshan,
}

impl DesignMethod {
    pub fn name(self) -> &'static str {
        match self {
            DesignMethod::LinePack => "line_pack",
            DesignMethod::Greedy => "greedy",
            DesignMethod::Ascent => "ascent",
            DesignMethod::Both => "both",
            DesignMethod::Dft => "dft",
            DesignMethod::Sudarshan => "sudarshan",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<DesignMethod>,
    /// Skewing exponent applied to every design when set.
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default = "default_ascent_iterations")]
    pub ascent_iterations: usize,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default = "default_restarts")]
    pub pack_restarts: usize,
}

fn default_methods() -> Vec<DesignMethod> {
    vec![DesignMethod::Greedy]
}

fn default_ascent_iterations() -> usize {
    AscentOptions::default().max_iterations
}

fn default_sharpness() -> f64 {
    AscentOptions::default().sharpness
}

fn default_restarts() -> usize {
    LinePackOptions::default().restarts
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            methods: default_methods(),
            xi: None,
            ascent_iterations: default_ascent_iterations(),
            sharpness: default_sharpness(),
            pack_restarts: default_restarts(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ChannelConfig {
    /// `Λ_D = I`, `R_rx = I`.
    Isotropic,
    /// PAS-integrated correlation on a uniform planar array.
    Pas {
        horizontal: usize,
        vertical: usize,
        #[serde(default = "half")]
        spacing: f64,
        #[serde(default = "default_eta")]
        eta: f64,
        /// `(azimuth, elevation)` pairs; the three-cluster scenario when
        /// absent.
        #[serde(default)]
        clusters: Option<Vec<(f64, f64)>>,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

fn half() -> f64 {
    0.5
}

fn default_eta() -> f64 {
    1.0
}

fn default_resolution() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub epsilon: EpsilonPolicy,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            enabled: false,
            epsilon: EpsilonPolicy::Zero,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub system: SystemConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default = "default_channel")]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    /// Users served by zero forcing (0-based); all users when absent.
    #[serde(default)]
    pub scheduled: Option<Vec<usize>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Free text copied into the notes column of every row.
    #[serde(default)]
    pub note: Option<String>,
}

fn default_samples() -> usize {
    5000
}

fn default_channel() -> ChannelConfig {
    ChannelConfig::Isotropic
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative family path is resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(p), Some(dir)) = (cfg.family.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("grid must be strictly increasing".into());
        }
        if self.mc_samples < 100 {
            return bad(format!(
                "mc_samples must be at least 100, got {}",
                self.mc_samples
            ));
        }
        if self.schemes.is_empty() && !self.bounds.enabled {
            return bad("nothing to evaluate: no schemes and bounds disabled".into());
        }
        if self.design.methods.is_empty() {
            return bad("design.methods must not be empty".into());
        }
        let integral = !matches!(self.sweep, SweepVar::Anisotropy);
        if integral && self.grid.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return bad(format!(
                "{} grid values must be nonnegative integers",
                self.sweep.name()
            ));
        }
        match self.family.kind {
            FamilyKind::FranklBabai
                if self.family.kappa.is_none() && self.sweep != SweepVar::Kappa =>
            {
                return bad("frankl_babai family needs family.kappa".into());
            }
            FamilyKind::File if self.family.path.is_none() => {
                return bad("file family needs family.path".into())
            }
            _ => {}
        }
        if self.sweep == SweepVar::Kappa && self.family.kind != FamilyKind::FranklBabai {
            return bad("a kappa sweep needs family.kind = \"frankl_babai\"".into());
        }
        if self.sweep == SweepVar::Anisotropy && !matches!(self.channel, ChannelConfig::Pas { .. })
        {
            return bad("an anisotropy sweep needs a pas channel".into());
        }
        if let ChannelConfig::Pas {
            horizontal,
            vertical,
            resolution,
            ..
        } = self.channel
        {
            if horizontal * vertical < self.system.d {
                return bad(format!(
                    "array has {} elements, fewer than D={}",
                    horizontal * vertical,
                    self.system.d
                ));
            }
            if resolution < 64 {
                return bad("PAS resolution must be at least 64".into());
            }
        }
        for &v in &self.grid {
            let (sys, _, _) = self.point(v);
            let cfg = SchemeConfig {
                scheme: Scheme::HBwS,
                ..sys
            };
            cfg.validate()
                .map_err(|e| Error::Config(format!("{}={v}: {e}", self.sweep.name())))?;
        }
        Ok(())
    }

    /// System parameters, kappa and anisotropy factor at grid value `v`.
    fn point(&self, v: f64) -> (SchemeConfig, Option<usize>, Option<f64>) {
        let s = &self.system;
        let mut cfg = SchemeConfig {
            scheme: Scheme::HBwS,
            d: s.d,
            l: s.l,
            k: s.k,
            m1: s.m1,
            m2: s.m2,
            rho: s.rho,
            zeta: s.zeta,
        };
        let mut kappa = self.family.kappa;
        let mut eta = match self.channel {
            ChannelConfig::Pas { eta, .. } => Some(eta),
            ChannelConfig::Isotropic => None,
        };
        let n = v as usize;
        match self.sweep {
            SweepVar::L => cfg.l = n,
            SweepVar::Kappa => kappa = Some(n),
            SweepVar::Users => {
                cfg.m1 = n;
                cfg.k = cfg.k.max(cfg.m());
            }
            SweepVar::D => cfg.d = n,
            SweepVar::Anisotropy => eta = Some(v),
        }
        (cfg, kappa, eta)
    }
}

/// One CSV row. Numeric fields are `None` for error rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_var: String,
    pub value: f64,
    pub scheme: String,
    pub mean_bits: Option<f64>,
    pub se_bits: Option<f64>,
    pub prelog: Option<f64>,
    pub throughput: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub family_size: Option<usize>,
    pub f_fs: Option<f64>,
    pub notes: String,
    pub wall_s: f64,
}

impl Row {
    pub fn is_error(&self) -> bool {
        self.notes.starts_with("error")
    }

    fn fields(&self) -> Vec<String> {
        fn opt<T: ToString>(x: Option<T>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        vec![
            self.sweep_var.clone(),
            self.value.to_string(),
            self.scheme.clone(),
            opt(self.mean_bits),
            opt(self.se_bits),
            opt(self.prelog),
            opt(self.throughput),
            opt(self.samples),
            self.seed.to_string(),
            opt(self.family_size),
            opt(self.f_fs),
            self.notes.clone(),
            format!("{:.3}", self.wall_s),
        ]
    }
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Uniform random sub-families of the banked family, each the size of
/// `frankl_babai(l, k, kappa)`, keeping the banked order.
pub fn sweep_random_family_control(
    l: usize,
    k: usize,
    kappa: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<SwitchFamily>> {
    let all = SwitchFamily::enumerate_banked(l, k)?;
    let target = SwitchFamily::frankl_babai(l, k, kappa)?.len();
    if target > all.len() {
        return Err(Error::Argument(format!(
            "target size {target} exceeds the {} banked subsets",
            all.len()
        )));
    }
    (0..trials)
        .map(|t| {
            let mut rng = substream(seed, t as u64);
            let mut idx = sample_indices(&mut rng, all.len(), target).into_vec();
            idx.sort_unstable();
            SwitchFamily::new(
                l,
                k,
                idx.into_iter().map(|i| all.subsets()[i].clone()).collect(),
            )
        })
        .collect()
}

struct Design {
    label: String,
    t: RdBeamformer,
}

/// Outcome of a sweep.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<Row>,
    pub failed_points: usize,
}

pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut failed = 0;
    let mut pas_cache: Option<(f64, usize, ChannelModel)> = None;
    for &v in &config.grid {
        let start = Instant::now();
        let seed = derive_seed(config.seed, &format!("{}={v}", config.sweep.name()));
        let mut point_rows = Vec::new();
        match run_point(config, v, seed, &mut pas_cache, &mut point_rows) {
            Ok(()) => rows.extend(point_rows),
            Err(e) => {
                log::error!("{}={v}: {e}", config.sweep.name());
                failed += 1;
                rows.extend(point_rows);
                rows.push(Row {
                    sweep_var: config.sweep.name().into(),
                    value: v,
                    scheme: "error".into(),
                    mean_bits: None,
                    se_bits: None,
                    prelog: None,
                    throughput: None,
                    samples: None,
                    seed,
                    family_size: None,
                    f_fs: None,
                    notes: format!("error: {e}"),
                    wall_s: 0.0,
                });
            }
        }
        let wall = start.elapsed().as_secs_f64();
        log::info!("{}={v} done in {wall:.1} s", config.sweep.name());
    }
    Ok(RunReport {
        rows,
        failed_points: failed,
    })
}

fn build_model(
    config: &ExperimentConfig,
    cfg: &SchemeConfig,
    eta: Option<f64>,
    cache: &mut Option<(f64, usize, ChannelModel)>,
) -> Result<EffectiveModel> {
    match &config.channel {
        ChannelConfig::Isotropic => Ok(EffectiveModel::isotropic(cfg.d, cfg.m1, cfg.m2)),
        ChannelConfig::Pas {
            horizontal,
            vertical,
            spacing,
            clusters,
            resolution,
            ..
        } => {
            let eta = eta.expect("pas channel has an eta");
            let fresh = !matches!(cache, Some((e, m1, _)) if *e == eta && *m1 == cfg.m1);
            if fresh {
                let mut pas = PasSpec::three_cluster(eta);
                if let Some(c) = clusters {
                    pas.clusters = c.clone();
                }
                pas.validate()?;
                let geom = ArrayGeometry::uniform_planar(*horizontal, *vertical, *spacing);
                let r = pas_correlation(&pas, &geom, *resolution)?;
                *cache = Some((
                    eta,
                    cfg.m1,
                    ChannelModel::from_correlation(&r, cfg.m1, cfg.m2, None)?,
                ));
            }
            effective_group_model(&cache.as_ref().unwrap().2, cfg.d)
        }
    }
}

fn build_family(
    config: &ExperimentConfig,
    cfg: &SchemeConfig,
    kappa: Option<usize>,
) -> Result<SwitchFamily> {
    let fam = match config.family.kind {
        FamilyKind::Full => SwitchFamily::enumerate_full(cfg.l, cfg.k, 1_000_000)?,
        FamilyKind::Banked => SwitchFamily::enumerate_banked(cfg.l, cfg.k)?,
        FamilyKind::FranklBabai => {
            SwitchFamily::frankl_babai(cfg.l, cfg.k, kappa.expect("validated"))?
        }
        FamilyKind::File => {
            let path = config.family.path.as_ref().expect("validated");
            SwitchFamily::from_text(&std::fs::read_to_string(path)?)?
        }
    };
    if fam.l() != cfg.l || fam.k() != cfg.k {
        return Err(Error::Dimension(format!(
            "family is over L={}, K={} but the point has L={}, K={}",
            fam.l(),
            fam.k(),
            cfg.l,
            cfg.k
        )));
    }
    Ok(fam)
}

fn build_designs(
    config: &ExperimentConfig,
    cfg: &SchemeConfig,
    family: &SwitchFamily,
    model: &EffectiveModel,
    seed: u64,
) -> Result<Vec<Design>> {
    let dc = &config.design;
    let pack = || {
        line_pack(
            cfg.d,
            cfg.l,
            LinePackOptions {
                restarts: dc.pack_restarts,
                seed: derive_seed(seed, "pack"),
                ..Default::default()
            },
        )
    };
    let ascent_opts = AscentOptions {
        max_iterations: dc.ascent_iterations,
        sharpness: dc.sharpness,
        ..Default::default()
    };
    let mut out = Vec::new();
    for &requested in &dc.methods {
        // Refinement needs at least one pair of selections.
        let method = match requested {
            DesignMethod::Greedy | DesignMethod::Ascent | DesignMethod::Both
                if family.len() < 2 =>
            {
                DesignMethod::LinePack
            }
            m => m,
        };
        let t = match method {
            DesignMethod::LinePack => pack()?,
            DesignMethod::Greedy => greedy_permute(&pack()?, family)?.0,
            DesignMethod::Ascent => gradient_ascent(&pack()?, family, ascent_opts)?.beamformer,
            DesignMethod::Both => {
                gradient_ascent(&greedy_permute(&pack()?, family)?.0, family, ascent_opts)?
                    .beamformer
            }
            DesignMethod::Dft => dft_seed(cfg.d, cfg.l)?,
            DesignMethod::Sudarshan => sudarshan_rd(cfg.d, cfg.l, cfg.k)?,
        };
        let t = match dc.xi {
            Some(xi) if method != DesignMethod::Sudarshan => skew_reduced(&model.lambda_d, &t, xi)?,
            _ => t,
        };
        out.push(Design {
            label: requested.name().into(),
            t,
        });
    }
    Ok(out)
}

fn run_point(
    config: &ExperimentConfig,
    v: f64,
    seed: u64,
    cache: &mut Option<(f64, usize, ChannelModel)>,
    rows: &mut Vec<Row>,
) -> Result<()> {
    let (cfg, kappa, eta) = config.point(v);
    let mut notes = Vec::new();
    if let Some(n) = &config.note {
        notes.push(n.clone());
    }
    if config.sweep == SweepVar::Users && cfg.k != config.system.k {
        notes.push(format!("K raised to M={}", cfg.k));
    }
    let base_note = notes.join("; ");
    let opts = McOptions::new(config.mc_samples, seed);
    let model = build_model(config, &cfg, eta, cache)?;
    let family = build_family(config, &cfg, kappa)?;
    let designs = build_designs(config, &cfg, &family, &model, seed)?;
    let multi = designs.len() > 1;
    let label = |scheme: &str, d: &Design| {
        if multi {
            format!("{scheme}/{}", d.label)
        } else {
            scheme.to_string()
        }
    };

    let row = |scheme: String,
               mean_bits: f64,
               se_bits: f64,
               samples: usize,
               prelog: f64,
               extra: &str,
               start: Instant| {
        let notes = [base_note.as_str(), extra]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join("; ");
        Row {
            sweep_var: config.sweep.name().into(),
            value: v,
            scheme,
            mean_bits: Some(mean_bits),
            se_bits: Some(se_bits),
            prelog: Some(prelog),
            throughput: Some(mean_bits * prelog),
            samples: Some(samples),
            seed,
            family_size: None,
            f_fs: None,
            notes,
            wall_s: start.elapsed().as_secs_f64(),
        }
    };
    let with_family = |r: Row, f_fs: Option<f64>| Row {
        family_size: Some(family.len()),
        f_fs,
        ..r
    };

    for &scheme in &config.schemes {
        let scfg = SchemeConfig { scheme, ..cfg };
        let prelog = scfg.prelog();
        if !(0.0..=1.0).contains(&prelog) {
            return Err(Error::OverheadInfeasible(prelog));
        }
        match scheme {
            Scheme::HBaCSI | Scheme::HBiCSI => {
                let start = Instant::now();
                let est = baseline_capacity(scheme, &model, &scfg, &opts)?.in_base(LogBase::Bits);
                rows.push(row(
                    scheme.label().into(),
                    est.mean,
                    est.std_error,
                    est.samples,
                    prelog,
                    "",
                    start,
                ));
            }
            Scheme::HBwS | Scheme::ZfHBwS => {
                for d in &designs {
                    let start = Instant::now();
                    let est = if scheme == Scheme::HBwS {
                        hsnr_capacity_mc(&d.t, &family, &model, &scfg, &opts)?
                    } else {
                        let all: Vec<usize> = (0..cfg.m1).collect();
                        zf_sum_rate_mc(
                            &d.t,
                            &family,
                            &model,
                            &scfg,
                            config.scheduled.as_deref().unwrap_or(&all),
                            &opts,
                        )?
                    };
                    let est = est.in_base(LogBase::Bits);
                    let extra = if est.singular_candidates > 0 {
                        format!("singular={}", est.singular_candidates)
                    } else {
                        String::new()
                    };
                    let r = row(
                        label(scheme.label(), d),
                        est.mean,
                        est.std_error,
                        est.samples,
                        prelog,
                        &extra,
                        start,
                    );
                    rows.push(with_family(r, pair_distance(&d.t, &family)?));
                }
            }
        }
    }

    let hb = SchemeConfig {
        scheme: Scheme::HBwS,
        ..cfg
    };
    if config.family.random_controls > 0 {
        let kappa = kappa.ok_or_else(|| Error::Config("random controls need a kappa".into()))?;
        let controls = sweep_random_family_control(
            cfg.l,
            cfg.k,
            kappa,
            config.family.random_controls,
            derive_seed(seed, "controls"),
        )?;
        let bits = LogBase::Bits.from_nats();
        for d in &designs {
            let start = Instant::now();
            let reference = hsnr_capacity_samples(&d.t, &family, &model, &hb, &opts)?;
            let mut margins = Vec::with_capacity(controls.len());
            let mut means = Vec::with_capacity(controls.len());
            for c in &controls {
                let s = hsnr_capacity_samples(&d.t, c, &model, &hb, &opts)?;
                margins.push(reference.paired_difference(&s)?.mean);
                means.push(s.estimate().mean);
            }
            // The standard error reported is that of the average over controls.
            let spread = Moments::of(&means);
            let margin = Moments::of(&margins).mean * bits;
            let extra = format!("controls={}; paired_margin_bits={margin}", controls.len());
            let r = row(
                label("HBwS-rand", d),
                spread.mean * bits,
                spread.std_error() * bits,
                config.mc_samples,
                hb.prelog(),
                &extra,
                start,
            );
            rows.push(with_family(r, None));
        }
    }

    if config.bounds.enabled {
        for d in &designs {
            let start = Instant::now();
            let lb = clb1_mc(&d.t, &family, &model, &hb, &opts)?.in_base(LogBase::Bits);
            let f_fs = pair_distance(&d.t, &family)?;
            let r = row(
                label("CLB1", d),
                lb.mean,
                lb.std_error,
                lb.samples,
                hb.prelog(),
                "",
                start,
            );
            rows.push(with_family(r, f_fs));
            if family.len() < 2 {
                continue;
            }
            let start = Instant::now();
            let beta = beta_term(cfg.m(), cfg.d, cfg.rho, &model.r_rx)?;
            let closed = clb_closed(&d.t, &family, &hb, beta, config.bounds.epsilon)?;
            let mut extra = format!("beta={beta}; {}", config.bounds.epsilon.tag());
            if beta < 2.0 {
                extra.push_str("; beta<2");
            }
            if closed.degenerate {
                extra.push_str("; degenerate");
            }
            let value = closed.value * LogBase::Bits.from_nats();
            rows.push(with_family(
                row(
                    label("CLB-closed", d),
                    value,
                    0.0,
                    0,
                    hb.prelog(),
                    &extra,
                    start,
                ),
                f_fs,
            ));
        }
    }
    Ok(())
}

/// `f_FS` of a design, undefined for families with fewer than two subsets.
fn pair_distance(t: &RdBeamformer, family: &SwitchFamily) -> Result<Option<f64>> {
    if family.len() < 2 {
        return Ok(None);
    }
    Ok(Some(t.f_fs(family)?.radians()))
}
