//! Ergodic sum capacity of a user group under HBwS and the baseline schemes.
//!
//! For a channel `B = R_rx^{1/2} H Λ^{1/2}` in the reduced space and a
//! selection with orthonormal basis `Q`, the per-realization value is
//! `log |I_M + (ρ/M) B Q Q^H B^H|` (nats); HBwS takes the best selection of
//! the family for every realization.

use crate::beamformer::RdBeamformer;
use crate::channel::EffectiveModel;
use crate::error::{Error, Result};
use crate::grassmann::{self, SemiUnitary};
use crate::linalg::{self, CMat};
use crate::rng::StreamRng;
use crate::stats::{monte_carlo, CapacityEstimate, McOptions, McSamples};
use crate::switchset::SwitchFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    #[serde(rename = "hbws")]
    HBwS,
    #[serde(rename = "hbacsi")]
    HBaCSI,
    #[serde(rename = "hbicsi")]
    HBiCSI,
    #[serde(rename = "zf")]
    ZfHBwS,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::HBwS => "HBwS",
            Scheme::HBaCSI => "HBaCSI",
            Scheme::HBiCSI => "HBiCSI",
            Scheme::ZfHBwS => "ZF-HBwS",
        }
    }
}

/// Dimensions and operating point of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub d: usize,
    pub l: usize,
    pub k: usize,
    pub m1: usize,
    pub m2: usize,
    /// Linear SNR.
    pub rho: f64,
    /// Symbol duration over coherence time.
    pub zeta: f64,
}

impl SchemeConfig {
    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Argument("D must be at least 1".into()));
        }
        if self.m() == 0 {
            return Err(Error::Argument(
                "the group needs at least one receive antenna".into(),
            ));
        }
        if self.k < self.m() {
            return Err(Error::Argument(format!(
                "K={} must be at least M={}",
                self.k,
                self.m()
            )));
        }
        if self.l < self.k {
            return Err(Error::Argument(format!(
                "L={} must be at least K={}",
                self.l, self.k
            )));
        }
        if !(self.rho >= 0.0) || !(self.zeta >= 0.0) {
            return Err(Error::Argument("rho and zeta must be nonnegative".into()));
        }
        Ok(())
    }

    fn check_model(&self, model: &EffectiveModel) -> Result<()> {
        self.validate()?;
        if model.d() != self.d || model.m() != self.m() {
            return Err(Error::Dimension(format!(
                "model is D={}, M={} but the scheme expects D={}, M={}",
                model.d(),
                model.m(),
                self.d,
                self.m()
            )));
        }
        Ok(())
    }

    /// Pre-log factor accounting for channel estimation overhead.
    pub fn prelog(&self) -> f64 {
        let pilots = match self.scheme {
            Scheme::HBwS | Scheme::ZfHBwS => self.d.min(self.l).div_ceil(self.k),
            Scheme::HBaCSI => 1,
            Scheme::HBiCSI => self.d.div_ceil(self.k),
        };
        1.0 - pilots as f64 * self.zeta
    }
}

/// `log |I_M + (ρ/M) A A^H|` for `A = B Q` (`M x K`), via Cholesky.
pub(crate) fn logdet_gram(a: &CMat, rho: f64, m: usize) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let mut x = a * a.adjoint() * num_complex::Complex64::new(rho / m as f64, 0.0);
    for i in 0..x.nrows() {
        x[(i, i)] += linalg::ONE;
    }
    linalg::hermitian_logdet(&x).unwrap_or_else(|| linalg::hermitian_psd_logdet(&x))
}

/// Per-realization log-det (nats) for selection basis `q`, i.i.d. channel
/// `h` (`M x D`), receive correlation square root and transmit eigenvalues.
pub fn instantaneous_logdet(
    q: &SemiUnitary,
    h: &CMat,
    r_rx_sqrt: &CMat,
    rho: f64,
    lambda_d: &[f64],
) -> Result<f64> {
    let q = q.as_matrix();
    if h.ncols() != q.nrows()
        || lambda_d.len() != q.nrows()
        || r_rx_sqrt.shape() != (h.nrows(), h.nrows())
    {
        return Err(Error::Dimension(
            "inconsistent shapes for the log-det".into(),
        ));
    }
    if !(rho >= 0.0) {
        return Err(Error::Argument(format!(
            "rho must be nonnegative, got {rho}"
        )));
    }
    let sl: Vec<f64> = lambda_d.iter().map(|x| x.max(0.0).sqrt()).collect();
    let b = r_rx_sqrt * linalg::scale_columns(h, &sl);
    Ok(logdet_gram(&(b * q), rho, h.nrows()))
}

/// The same quantity in the `K x K` form `|I_K + (ρ/M) Q^H B^H B Q|`.
pub fn instantaneous_logdet_k(
    q: &SemiUnitary,
    h: &CMat,
    r_rx_sqrt: &CMat,
    rho: f64,
    lambda_d: &[f64],
) -> f64 {
    let q = q.as_matrix();
    let sl: Vec<f64> = lambda_d.iter().map(|x| x.max(0.0).sqrt()).collect();
    let b = r_rx_sqrt * linalg::scale_columns(h, &sl);
    let a = &b * q;
    let mut x = a.adjoint() * a * num_complex::Complex64::new(rho / h.nrows() as f64, 0.0);
    for i in 0..x.nrows() {
        x[(i, i)] += linalg::ONE;
    }
    linalg::hermitian_psd_logdet(&x)
}

/// Per-selection factors `G_i` with `Q_i = T[:, S_i] G_i`; `None` marks a
/// rank-deficient selection.
#[derive(Debug, Clone)]
pub struct PreparedFamily {
    t: CMat,
    subsets: Vec<Vec<usize>>,
    g: Vec<Option<CMat>>,
}

impl PreparedFamily {
    pub fn new(t: &RdBeamformer, family: &SwitchFamily) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::Argument("selection needs a nonempty family".into()));
        }
        grassmann::check_family_fits(t.as_matrix(), family)?;
        let mut g = Vec::with_capacity(family.len());
        for s in family.subsets() {
            match grassmann::orthonormalize_columns(t.as_matrix(), s) {
                Ok((_, gi)) => g.push(Some(gi)),
                Err(Error::Singular { subset, ratio }) => {
                    log::warn!("selection {subset:?} is rank deficient (ratio {ratio:.2e}); it is never chosen");
                    g.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(PreparedFamily {
            t: t.as_matrix().clone(),
            subsets: family.subsets().to_vec(),
            g,
        })
    }

    pub fn singular_count(&self) -> usize {
        self.g.iter().filter(|g| g.is_none()).count()
    }

    /// Effective channels `B Q_i` for every usable selection, given `B T`.
    fn effective(&self, bt: &CMat, i: usize) -> Option<CMat> {
        self.g[i]
            .as_ref()
            .map(|g| linalg::select_columns(bt, &self.subsets[i]) * g)
    }

    /// Best selection for colored channel `b`: `(index, nats)`, lowest index
    /// on ties; `-inf` if every selection is singular.
    pub fn best(&self, b: &CMat, rho: f64) -> (usize, f64) {
        let bt = b * &self.t;
        let m = b.nrows();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.subsets.len() {
            if let Some(a) = self.effective(&bt, i) {
                let v = logdet_gram(&a, rho, m);
                if v > best.1 {
                    best = (i, v);
                }
            }
        }
        best
    }

    /// Best zero-forcing sum rate over the family for the scheduled rows of
    /// `b`; singular Gram matrices score `-inf`.
    pub fn best_zf(&self, b_sc: &CMat, rho: f64) -> f64 {
        let bt = b_sc * &self.t;
        let streams = b_sc.nrows() as f64;
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.subsets.len() {
            if let Some(a) = self.effective(&bt, i) {
                best = best.max(zf_rate(&a, rho, streams));
            }
        }
        best
    }
}

fn zf_rate(a: &CMat, rho: f64, streams: f64) -> f64 {
    let gram = a * a.adjoint();
    match linalg::hermitian_inverse_trace(&gram) {
        Some(tr) if tr > 0.0 => streams * (1.0 + rho / tr).ln(),
        _ => f64::NEG_INFINITY,
    }
}

/// Exhaustive best selection for one realization: `(0-based index, nats)`.
pub fn best_selection(
    t: &RdBeamformer,
    family: &SwitchFamily,
    h: &CMat,
    r_rx_sqrt: &CMat,
    rho: f64,
    lambda_d: &[f64],
) -> Result<(usize, f64)> {
    let prepared = PreparedFamily::new(t, family)?;
    if h.ncols() != t.d() || lambda_d.len() != t.d() || r_rx_sqrt.shape() != (h.nrows(), h.nrows())
    {
        return Err(Error::Dimension("inconsistent shapes for selection".into()));
    }
    let sl: Vec<f64> = lambda_d.iter().map(|x| x.max(0.0).sqrt()).collect();
    let b = r_rx_sqrt * linalg::scale_columns(h, &sl);
    Ok(prepared.best(&b, rho))
}

fn check_design(t: &RdBeamformer, cfg: &SchemeConfig) -> Result<()> {
    if t.d() != cfg.d || t.l() != cfg.l {
        return Err(Error::Dimension(format!(
            "design is {}x{} but the scheme expects D={}, L={}",
            t.d(),
            t.l(),
            cfg.d,
            cfg.l
        )));
    }
    Ok(())
}

/// Per-sample HBwS values (nats) for paired comparisons.
pub fn hsnr_capacity_samples(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<McSamples> {
    cfg.check_model(model)?;
    check_design(t, cfg)?;
    opts.check()?;
    if family.k() != cfg.k {
        return Err(Error::Dimension(format!(
            "family has K={} but the scheme has K={}",
            family.k(),
            cfg.k
        )));
    }
    let prepared = PreparedFamily::new(t, family)?;
    let singular = prepared.singular_count() as u64;
    let values = monte_carlo(opts, |rng: &mut StreamRng| {
        let b = model.sample_reduced(rng);
        prepared.best(&b, cfg.rho).1
    });
    Ok(McSamples {
        values,
        seed: opts.seed,
        singular_candidates: singular * opts.samples as u64,
    })
}

/// Ergodic hSNR sum capacity of HBwS with brute-force selection.
pub fn hsnr_capacity_mc(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<CapacityEstimate> {
    Ok(hsnr_capacity_samples(t, family, model, cfg, opts)?.estimate())
}

/// Top-`k` eigenvectors of `b^H b`.
fn top_eigenvectors(b: &CMat, k: usize) -> CMat {
    let gram = b.adjoint() * b;
    let eig = linalg::symmetrize(&gram).symmetric_eigen();
    let mut order: Vec<usize> = (0..gram.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    linalg::select_columns(&eig.eigenvectors, &order[..k])
}

/// Per-sample values of a fixed or per-realization baseline beamformer.
pub fn baseline_samples(
    kind: Scheme,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<McSamples> {
    cfg.check_model(model)?;
    opts.check()?;
    if cfg.k > cfg.d {
        return Err(Error::Argument(format!(
            "baselines need K <= D, got K={}, D={}",
            cfg.k, cfg.d
        )));
    }
    let m = cfg.m();
    let values = match kind {
        Scheme::HBaCSI => {
            let q = linalg::identity(cfg.d).columns(0, cfg.k).clone_owned();
            monte_carlo(opts, |rng: &mut StreamRng| {
                let b = model.sample_reduced(rng);
                logdet_gram(&(&b * &q), cfg.rho, m)
            })
        }
        Scheme::HBiCSI => monte_carlo(opts, |rng: &mut StreamRng| {
            let b = model.sample_reduced(rng);
            let q = top_eigenvectors(&b, cfg.k);
            logdet_gram(&(&b * &q), cfg.rho, m)
        }),
        other => {
            return Err(Error::Argument(format!(
                "{} is not a baseline scheme",
                other.label()
            )))
        }
    };
    Ok(McSamples {
        values,
        seed: opts.seed,
        singular_candidates: 0,
    })
}

pub fn baseline_capacity(
    kind: Scheme,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<CapacityEstimate> {
    Ok(baseline_samples(kind, model, cfg, opts)?.estimate())
}

/// Rows of the group channel belonging to the scheduled users (0-based).
fn scheduled_rows(scheduled: &[usize], m1: usize, m2: usize) -> Result<Vec<usize>> {
    let mut rows = Vec::with_capacity(scheduled.len() * m2);
    for &u in scheduled {
        if u >= m1 {
            return Err(Error::Argument(format!(
                "user {} is not in a group of {m1}",
                u + 1
            )));
        }
        rows.extend(u * m2..(u + 1) * m2);
    }
    Ok(rows)
}

/// Per-sample zero-forcing sum rates (nats).
pub fn zf_sum_rate_samples(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    scheduled: &[usize],
    opts: &McOptions,
) -> Result<McSamples> {
    cfg.check_model(model)?;
    check_design(t, cfg)?;
    opts.check()?;
    let rows = scheduled_rows(scheduled, cfg.m1, cfg.m2)?;
    if rows.is_empty() || rows.len() > cfg.k {
        return Err(Error::Argument(format!(
            "{} scheduled streams for K={}",
            rows.len(),
            cfg.k
        )));
    }
    let prepared = PreparedFamily::new(t, family)?;
    let singular = prepared.singular_count() as u64;
    let values = monte_carlo(opts, |rng: &mut StreamRng| {
        let b = model.sample_reduced(rng);
        prepared.best_zf(&linalg::select_rows(&b, &rows), cfg.rho)
    });
    Ok(McSamples {
        values,
        seed: opts.seed,
        singular_candidates: singular * opts.samples as u64,
    })
}

pub fn zf_sum_rate_mc(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    scheduled: &[usize],
    opts: &McOptions,
) -> Result<CapacityEstimate> {
    Ok(zf_sum_rate_samples(t, family, model, cfg, scheduled, opts)?.estimate())
}

/// Scales an estimate by the scheme's pre-log factor.
pub fn throughput(est: &CapacityEstimate, cfg: &SchemeConfig) -> Result<CapacityEstimate> {
    let f = cfg.prelog();
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OverheadInfeasible(f));
    }
    Ok(est.scaled(f))
}
