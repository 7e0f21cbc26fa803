//! Lower bounds on the HBwS sum capacity and the Gaussian approximation of
//! per-selection capacities.

use crate::beamformer::RdBeamformer;
use crate::capacity::SchemeConfig;
use crate::channel::{sample_iid_gaussian_channel, EffectiveModel};
use crate::error::{Error, Result};
use crate::grassmann::{self, Angle, SemiUnitary};
use crate::linalg::{self, CMat};
use crate::rng::StreamRng;
use crate::stats::{monte_carlo, CapacityEstimate, McOptions, McSamples};
use crate::switchset::SwitchFamily;

/// Digamma function.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || (x <= 0.0 && x == x.floor()) {
        return f64::NAN;
    }
    if x < 0.0 {
        // Reflection: psi(x) = psi(1 - x) - pi cot(pi x).
        return digamma(1.0 - x) - std::f64::consts::PI / (std::f64::consts::PI * x).tan();
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli-number tail B_2n / (2n x^2n), n = 1..7.
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 / x - tail
}

/// `M log(ρ/M) + log|R_rx| + sum_{m=1..M} psi(D - m + 1)` (nats).
pub fn beta_term(m: usize, d: usize, rho: f64, r_rx: &CMat) -> Result<f64> {
    if m == 0 || d < m {
        return Err(Error::Argument(format!(
            "beta needs 1 <= M <= D, got M={m}, D={d}"
        )));
    }
    if r_rx.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "R_rx is {:?}, expected {m}x{m}",
            r_rx.shape()
        )));
    }
    let wishart: f64 = (1..=m).map(|k| digamma((d - k + 1) as f64)).sum();
    Ok(m as f64 * (rho / m as f64).ln() + linalg::hermitian_psd_logdet(r_rx) + wishart)
}

/// Per-sample values of the higher-dimension lower bound (nats). The
/// channel is drawn first from each sample's stream, exactly as in
/// [`crate::capacity::hsnr_capacity_samples`], so both are paired.
pub fn clb1_samples(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<McSamples> {
    cfg.validate()?;
    opts.check()?;
    if !model.is_isotropic() {
        return Err(Error::Hypothesis(
            "the higher-dimension bound assumes Λ_D = I".into(),
        ));
    }
    if model.d() != cfg.d || model.m() != cfg.m() || t.d() != cfg.d {
        return Err(Error::Dimension(
            "model, design and scheme disagree on D or M".into(),
        ));
    }
    let qs = family
        .subsets()
        .iter()
        .map(|s| grassmann::orthonormalize_selection(t, s).map(|(q, _)| q.into_matrix()))
        .collect::<Result<Vec<_>>>()?;
    if qs.is_empty() {
        return Err(Error::Argument("bound needs a nonempty family".into()));
    }
    let m = cfg.m();
    let log_scale = m as f64 * (cfg.rho / m as f64).ln() + model.log_det_rx();
    let values = monte_carlo(opts, |rng: &mut StreamRng| {
        if cfg.rho == 0.0 {
            return 0.0;
        }
        let h = sample_iid_gaussian_channel(m, cfg.d, rng);
        let v = grassmann::sample_stiefel_uniform(cfg.d, cfg.k, rng)
            .expect("k <= d checked by orthonormalization");
        let log_alpha = log_scale + linalg::hermitian_psd_logdet(&(&h * h.adjoint()));
        let best = qs
            .iter()
            .map(|q| linalg::det(&(q.adjoint() * v.as_matrix())).norm_sqr())
            .fold(0.0f64, f64::max);
        // log(1 + alpha * best), stable for huge or tiny alpha.
        let x = log_alpha + best.ln();
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    });
    Ok(McSamples {
        values,
        seed: opts.seed,
        singular_candidates: 0,
    })
}

pub fn clb1_mc(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    opts: &McOptions,
) -> Result<CapacityEstimate> {
    Ok(clb1_samples(t, family, model, cfg, opts)?.estimate())
}

/// The `o(D)` exponent correction of the closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "c", rename_all = "lowercase")]
pub enum EpsilonPolicy {
    #[default]
    Zero,
    /// `epsilon = c D K` with `c` in `[-0.5, 0.5]`.
    Scaled(f64),
}

impl EpsilonPolicy {
    pub fn epsilon(self, d: usize, k: usize) -> Result<f64> {
        match self {
            EpsilonPolicy::Zero => Ok(0.0),
            EpsilonPolicy::Scaled(c) if (-0.5..=0.5).contains(&c) => Ok(c * (d * k) as f64),
            EpsilonPolicy::Scaled(c) => Err(Error::Argument(format!(
                "epsilon scale {c} outside [-0.5, 0.5]"
            ))),
        }
    }

    pub fn tag(self) -> String {
        match self {
            EpsilonPolicy::Zero => "eps=0".into(),
            EpsilonPolicy::Scaled(c) => format!("eps={c}*D*K"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedBound {
    /// Nats.
    pub value: f64,
    pub delta: Angle,
    pub beta: f64,
    /// Set when `delta = 0`, i.e. two selections span the same subspace.
    pub degenerate: bool,
}

/// `|S| ((1 - cos^{2/K}(δ/2)) / K)^{DK + ε} (β + log cos²(δ/2))`.
pub fn closed_bound_value(
    size: usize,
    d: usize,
    k: usize,
    delta: f64,
    beta: f64,
    epsilon: f64,
) -> f64 {
    let c2 = (delta / 2.0).cos().powi(2);
    let base = (1.0 - c2.powf(1.0 / k as f64)) / k as f64;
    size as f64 * base.powf((d * k) as f64 + epsilon) * (beta + c2.ln())
}

/// Closed-form Fubini-Study lower bound for a design and family.
pub fn clb_closed(
    t: &RdBeamformer,
    family: &SwitchFamily,
    cfg: &SchemeConfig,
    beta: f64,
    epsilon: EpsilonPolicy,
) -> Result<ClosedBound> {
    if beta < 2.0 {
        log::warn!("beta = {beta:.3} < 2: the bound is no longer guaranteed to increase with the packing distance");
    }
    let delta = grassmann::min_pairwise_fs(t, family)?;
    let eps = epsilon.epsilon(cfg.d, cfg.k)?;
    let value = closed_bound_value(family.len(), cfg.d, cfg.k, delta.radians(), beta, eps);
    Ok(ClosedBound {
        value,
        delta,
        beta,
        degenerate: delta.radians() == 0.0,
    })
}

/// Bound summary reported next to capacity estimates.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub clb1: CapacityEstimate,
    pub clb_closed: f64,
    pub delta: Angle,
    pub beta: f64,
    pub epsilon_policy: EpsilonPolicy,
}

pub fn bound_report(
    t: &RdBeamformer,
    family: &SwitchFamily,
    model: &EffectiveModel,
    cfg: &SchemeConfig,
    epsilon: EpsilonPolicy,
    opts: &McOptions,
) -> Result<BoundReport> {
    let beta = beta_term(cfg.m(), cfg.d, cfg.rho, &model.r_rx)?;
    let closed = clb_closed(t, family, cfg, beta, epsilon)?;
    Ok(BoundReport {
        clb1: clb1_mc(t, family, model, cfg, opts)?,
        clb_closed: closed.value,
        delta: closed.delta,
        beta,
        epsilon_policy: epsilon,
    })
}

/// Approximate mean of a single-selection capacity and the cross-covariance
/// of two selections (nats).
pub fn gaussian_moments(
    q_i: &SemiUnitary,
    q_j: &SemiUnitary,
    cfg: &SchemeConfig,
    log_det_rx: f64,
) -> Result<(f64, f64)> {
    if q_i.as_matrix().shape() != q_j.as_matrix().shape() {
        return Err(Error::Dimension("selection bases differ in shape".into()));
    }
    let (m, k) = (cfg.m() as f64, q_i.rank() as f64);
    let mean = m * (cfg.rho * k.powf(1.5) / (m * (k + 1.0).sqrt())).ln() + log_det_rx;
    let cross = (q_j.as_matrix().adjoint() * q_i.as_matrix()).norm_squared();
    Ok((mean, m * (1.0 + cross / (k * k)).ln()))
}
