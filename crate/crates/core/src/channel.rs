//! Kronecker channel statistics and realizations.
//!
//! A user group sees `H̃ = R_rx^{1/2} H Λ_tx^{1/2} E_tx^H` with `H` i.i.d.
//! `CN(0, 1)`. Capacity code works in the dominant `D`-dimensional transmit
//! eigenspace, where the channel is `R_rx^{1/2} H_D Λ_D^{1/2}`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rng::complex_gaussian;

/// Transmit eigensystem plus per-user receive correlations.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub e_tx: CMat,
    /// Descending, nonnegative.
    pub lambda_tx: Vec<f64>,
    pub rx_blocks: Vec<CMat>,
    pub m1: usize,
    pub m2: usize,
}

impl ChannelModel {
    /// `R_tx = I_N` and identity receive correlations.
    pub fn isotropic(n: usize, m1: usize, m2: usize) -> Self {
        ChannelModel {
            e_tx: linalg::identity(n),
            lambda_tx: vec![1.0; n],
            rx_blocks: vec![linalg::identity(m2); m1],
            m1,
            m2,
        }
    }

    /// Model from a transmit correlation matrix; identity receive blocks
    /// unless given.
    pub fn from_correlation(
        r_tx: &CMat,
        m1: usize,
        m2: usize,
        rx_blocks: Option<Vec<CMat>>,
    ) -> Result<Self> {
        let (e_tx, lambda) = eigendecompose_sorted(r_tx)?;
        let top = lambda.first().copied().unwrap_or(0.0).max(0.0);
        let lambda_tx = lambda
            .into_iter()
            .map(|x| {
                if x < -1e-8 * top.max(1.0) {
                    Err(Error::Argument(format!(
                        "transmit correlation has eigenvalue {x}"
                    )))
                } else {
                    Ok(x.max(0.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let rx_blocks = rx_blocks.unwrap_or_else(|| vec![linalg::identity(m2); m1]);
        let model = ChannelModel {
            e_tx,
            lambda_tx,
            rx_blocks,
            m1,
            m2,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.e_tx.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rx_blocks.len() != self.m1 {
            return Err(Error::Dimension(format!(
                "{} receive blocks for {} users",
                self.rx_blocks.len(),
                self.m1
            )));
        }
        for (i, b) in self.rx_blocks.iter().enumerate() {
            if b.shape() != (self.m2, self.m2) {
                return Err(Error::Dimension(format!(
                    "receive block {} has shape {:?}",
                    i + 1,
                    b.shape()
                )));
            }
            let dev = linalg::hermitian_deviation(b);
            if dev > 1e-12 {
                return Err(Error::NotHermitian(dev));
            }
            if linalg::hermitian_eigenvalues(b)
                .into_iter()
                .any(|e| e < -1e-10)
            {
                return Err(Error::Argument(format!(
                    "receive block {} is not PSD",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Transmit correlation `E Λ E^H`.
    pub fn r_tx(&self) -> CMat {
        let w: Vec<f64> = self.lambda_tx.clone();
        linalg::scale_columns(&self.e_tx, &w) * self.e_tx.adjoint()
    }

    /// One full `M x N` channel realization.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CMat> {
        let eff = effective_group_model(self, self.n())?;
        let b = eff.sample_reduced(rng);
        Ok(b * eff.e_d.adjoint())
    }
}

/// Power angle spectrum made of rectangular clusters with Laplacian decay
/// around each center.
#[derive(Debug, Clone, PartialEq)]
pub struct PasSpec {
    /// `(azimuth, elevation)` centers in radians.
    pub clusters: Vec<(f64, f64)>,
    pub eta: f64,
    pub half_width_theta: f64,
    pub half_width_phi: f64,
}

impl PasSpec {
    pub fn new(clusters: Vec<(f64, f64)>, eta: f64) -> Result<Self> {
        let spec = PasSpec {
            clusters,
            eta,
            half_width_theta: PI / 20.0,
            half_width_phi: PI / 20.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Three clusters at azimuths `(-3π/10, 0, π/5)` and elevations
    /// `(6π/10, 8π/10, 7π/10)`.
    pub fn three_cluster(eta: f64) -> Self {
        PasSpec {
            clusters: vec![
                (-3.0 * PI / 10.0, 6.0 * PI / 10.0),
                (0.0, 8.0 * PI / 10.0),
                (PI / 5.0, 7.0 * PI / 10.0),
            ],
            eta,
            half_width_theta: PI / 20.0,
            half_width_phi: PI / 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) {
            return Err(Error::Argument(format!(
                "anisotropy factor must be >= 0, got {}",
                self.eta
            )));
        }
        if !(self.half_width_theta > 0.0 && self.half_width_phi > 0.0) {
            return Err(Error::Argument(
                "cluster half-widths must be positive".into(),
            ));
        }
        for &(t, p) in &self.clusters {
            if !(-FRAC_PI_2..FRAC_PI_2).contains(&t) || !(0.0..PI).contains(&p) {
                return Err(Error::Argument(format!(
                    "cluster center ({t}, {p}) outside the angular domain"
                )));
            }
        }
        Ok(())
    }
}

/// Element positions in wavelengths, `(horizontal, vertical)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub positions: Vec<(f64, f64)>,
    /// Lattice pitch used to key position differences; 0 when irregular.
    pitch: f64,
}

impl ArrayGeometry {
    /// `horizontal x vertical` planar array with uniform spacing; elements
    /// are numbered along the horizontal axis first.
    pub fn uniform_planar(horizontal: usize, vertical: usize, spacing: f64) -> Self {
        let mut positions = Vec::with_capacity(horizontal * vertical);
        for v in 0..vertical {
            for h in 0..horizontal {
                positions.push((h as f64 * spacing, v as f64 * spacing));
            }
        }
        ArrayGeometry {
            positions,
            pitch: spacing,
        }
    }

    pub fn from_positions(positions: Vec<(f64, f64)>) -> Self {
        ArrayGeometry {
            positions,
            pitch: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn key(&self, dh: f64, dv: f64) -> (i64, i64) {
        let unit = if self.pitch > 0.0 { self.pitch } else { 1e-9 };
        ((dh / unit).round() as i64, (dv / unit).round() as i64)
    }
}

/// Quadrature nodes `(θ, φ, weight)` over the clipped cluster windows,
/// weights including the PAS value, `sin φ` and the cell area.
fn quadrature_nodes(pas: &PasSpec, resolution: usize) -> Vec<(f64, f64, f64)> {
    let mut nodes = Vec::with_capacity(pas.clusters.len() * resolution * resolution);
    for &(tc, pc) in &pas.clusters {
        let t0 = (tc - pas.half_width_theta).max(-FRAC_PI_2);
        let t1 = (tc + pas.half_width_theta).min(FRAC_PI_2);
        let p0 = (pc - pas.half_width_phi).max(0.0);
        let p1 = (pc + pas.half_width_phi).min(PI);
        if t1 <= t0 || p1 <= p0 {
            continue;
        }
        let (dt, dp) = ((t1 - t0) / resolution as f64, (p1 - p0) / resolution as f64);
        for i in 0..resolution {
            let theta = t0 + (i as f64 + 0.5) * dt;
            for j in 0..resolution {
                let phi = p0 + (j as f64 + 0.5) * dp;
                let density = (-pas.eta * (theta - tc).abs() - pas.eta * (phi - pc).abs()).exp();
                nodes.push((theta, phi, density * phi.sin() * dt * dp));
            }
        }
    }
    nodes
}

/// Transmit correlation of an array under a clustered PAS, by midpoint
/// quadrature with `resolution x resolution` cells per cluster window.
pub fn pas_correlation(pas: &PasSpec, geom: &ArrayGeometry, resolution: usize) -> Result<CMat> {
    pas.validate()?;
    if resolution < 64 {
        return Err(Error::Argument(format!(
            "quadrature needs at least 64x64 cells per window, got {resolution}"
        )));
    }
    let nodes = quadrature_nodes(pas, resolution);
    let norm: f64 = nodes.iter().map(|n| n.2).sum();
    if nodes.is_empty() || !(norm > 0.0) {
        return Err(Error::Degenerate(
            "power angle spectrum has empty support".into(),
        ));
    }
    // Per node: horizontal and vertical phase rates.
    let rates: Vec<(f64, f64, f64)> = nodes
        .iter()
        .map(|&(t, p, w)| (2.0 * PI * p.sin() * t.sin(), 2.0 * PI * p.cos(), w / norm))
        .collect();
    let n = geom.len();
    let mut cache: HashMap<(i64, i64), Complex64> = HashMap::new();
    let mut r = CMat::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let dh = geom.positions[a].0 - geom.positions[b].0;
            let dv = geom.positions[a].1 - geom.positions[b].1;
            let key = geom.key(dh, dv);
            let neg = (-key.0, -key.1);
            let g = if let Some(v) = cache.get(&key) {
                *v
            } else if let Some(v) = cache.get(&neg) {
                v.conj()
            } else {
                let v = rates
                    .iter()
                    .map(|&(uh, uv, w)| Complex64::from_polar(w, uh * dh + uv * dv))
                    .sum::<Complex64>();
                cache.insert(key, v);
                v
            };
            r[(a, b)] = g;
            r[(b, a)] = g.conj();
        }
    }
    Ok(r)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending; each
/// eigenvector is rotated so its largest-magnitude entry is real positive.
pub fn eigendecompose_sorted(r: &CMat) -> Result<(CMat, Vec<f64>)> {
    if !r.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {:?} matrix",
            r.shape()
        )));
    }
    let dev = linalg::hermitian_deviation(r);
    let scale = r.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    if dev > 1e-10 * scale {
        return Err(Error::Argument(format!(
            "matrix is not Hermitian (deviation {dev:.3e})"
        )));
    }
    let eig = linalg::symmetrize(r).symmetric_eigen();
    let n = r.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let mut e = CMat::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let mut v: DVector<Complex64> = eig.eigenvectors.column(i).clone_owned();
        let big = (0..n).fold(0, |best, p| {
            if v[p].norm() > v[best].norm() {
                p
            } else {
                best
            }
        });
        let phase = v[big].conj() / v[big].norm();
        v *= phase;
        v[big] = Complex64::new(v[big].norm(), 0.0);
        e.set_column(k, &v);
        lambda.push(eig.eigenvalues[i]);
    }
    Ok((e, lambda))
}

/// `m x d` matrix of i.i.d. `CN(0, 1)` entries.
pub fn sample_iid_gaussian_channel<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> CMat {
    CMat::from_fn(m, d, |_, _| complex_gaussian(rng))
}

/// The statistics one user group sees inside the dominant `D`-dimensional
/// transmit eigenspace.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    pub e_d: CMat,
    pub lambda_d: Vec<f64>,
    /// Block-diagonal `M x M` receive correlation.
    pub r_rx: CMat,
    pub r_rx_sqrt: CMat,
    pub m1: usize,
    pub m2: usize,
    sqrt_lambda: Vec<f64>,
    rx_identity: bool,
}

impl EffectiveModel {
    /// `Λ_D = I_D`, `R_rx = I_M`, `E_D = I_D`.
    pub fn isotropic(d: usize, m1: usize, m2: usize) -> Self {
        let m = m1 * m2;
        EffectiveModel {
            e_d: linalg::identity(d),
            lambda_d: vec![1.0; d],
            r_rx: linalg::identity(m),
            r_rx_sqrt: linalg::identity(m),
            m1,
            m2,
            sqrt_lambda: vec![1.0; d],
            rx_identity: true,
        }
    }

    pub fn d(&self) -> usize {
        self.lambda_d.len()
    }

    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn is_isotropic(&self) -> bool {
        self.lambda_d.iter().all(|&x| x == 1.0)
    }

    pub fn rx_is_identity(&self) -> bool {
        self.rx_identity
    }

    /// `log |R_rx|` (nats); `-inf` when singular.
    pub fn log_det_rx(&self) -> f64 {
        if self.rx_identity {
            0.0
        } else {
            linalg::hermitian_psd_logdet(&self.r_rx)
        }
    }

    /// Applies `R_rx^{1/2} (.) Λ_D^{1/2}` to an i.i.d. draw.
    pub fn color(&self, h: &CMat) -> CMat {
        let hl = linalg::scale_columns(h, &self.sqrt_lambda);
        if self.rx_identity {
            hl
        } else {
            &self.r_rx_sqrt * hl
        }
    }

    /// One reduced channel `R_rx^{1/2} H_D Λ_D^{1/2}` (`M x D`).
    pub fn sample_reduced<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        self.color(&sample_iid_gaussian_channel(self.m(), self.d(), rng))
    }
}

/// Truncates the transmit eigensystem to its top `d` eigenpairs and
/// assembles the block-diagonal receive correlation.
pub fn effective_group_model(model: &ChannelModel, d: usize) -> Result<EffectiveModel> {
    if d == 0 || d > model.n() {
        return Err(Error::Dimension(format!(
            "D={d} must be in 1..={}",
            model.n()
        )));
    }
    model.validate()?;
    let m = model.m1 * model.m2;
    let mut r_rx = CMat::zeros(m, m);
    for (i, b) in model.rx_blocks.iter().enumerate() {
        r_rx.view_mut((i * model.m2, i * model.m2), (model.m2, model.m2))
            .copy_from(b);
    }
    let rx_identity = r_rx == linalg::identity(m);
    let r_rx_sqrt = if rx_identity {
        r_rx.clone()
    } else {
        linalg::psd_sqrt(&r_rx)?
    };
    let lambda_d = model.lambda_tx[..d].to_vec();
    Ok(EffectiveModel {
        e_d: model.e_tx.columns(0, d).clone_owned(),
        sqrt_lambda: lambda_d.iter().map(|x| x.sqrt()).collect(),
        lambda_d,
        r_rx,
        r_rx_sqrt,
        m1: model.m1,
        m2: model.m2,
        rx_identity,
    })
}
