//! Reduced-dimensional beamformer design.
//!
//! The analog beamformer is `T = E_D T̂` where `E_D` spans the dominant
//! `D`-dimensional transmit eigenspace and `T̂` is a `D x L` design matrix.
//! Column scalings of `T̂` do not change capacity, so designs are kept in a
//! canonical form: unit-norm columns whose anchor entry (the first nonzero
//! entry, normally row 1) is real and nonnegative.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grassmann::{self, Angle};
use crate::linalg::{self, CMat};
use crate::switchset::SwitchFamily;

const CANON_TOL: f64 = 1e-10;

/// Margin by which a candidate must beat the incumbent to count as a strict
/// improvement; absorbs roundoff from re-orthonormalizing permuted columns.
const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RdBeamformer(CMat);

fn anchor_index(col: nalgebra::DVectorView<'_, Complex64>) -> Option<usize> {
    col.iter().position(|z| *z != linalg::ZERO)
}

impl RdBeamformer {
    /// Wraps a matrix that is already in canonical form.
    pub fn new(data: CMat) -> Result<Self> {
        for (j, col) in data.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > CANON_TOL {
                return Err(Error::Argument(format!("column {} has norm {n}", j + 1)));
            }
            let a = col[anchor_index(col).expect("unit column has a nonzero entry")];
            if a.im.abs() > CANON_TOL || a.re < -CANON_TOL {
                return Err(Error::Argument(format!(
                    "column {} anchor {a} is not real nonnegative",
                    j + 1
                )));
            }
        }
        Ok(RdBeamformer(data))
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn l(&self) -> usize {
        self.0.ncols()
    }

    /// Column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> RdBeamformer {
        RdBeamformer(linalg::select_columns(&self.0, perm))
    }

    /// Minimum pairwise Fubini-Study distance of the selected subspaces.
    pub fn f_fs(&self, family: &SwitchFamily) -> Result<Angle> {
        grassmann::min_pairwise_fs(self, family)
    }
}

/// Scales every column to unit norm with a real nonnegative anchor entry.
pub fn canonicalize(t: &CMat) -> Result<RdBeamformer> {
    let mut out = t.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let n = col.norm();
        let Some(a) = anchor_index(col.as_view()) else {
            return Err(Error::Degenerate(format!("column {} is zero", j + 1)));
        };
        if !n.is_finite() {
            return Err(Error::Numerical(format!("column {} is not finite", j + 1)));
        }
        let anchor = col[a];
        let scale = anchor.conj() / (n * anchor.norm());
        col *= scale;
        col[a] = Complex64::new(col[a].norm(), 0.0);
    }
    Ok(RdBeamformer(out))
}

/// Top `l x l` block is the unitary DFT, remaining rows zero.
pub fn dft_seed(d: usize, l: usize) -> Result<RdBeamformer> {
    if l == 0 || l > d {
        return Err(Error::Argument(format!(
            "DFT seed needs 1 <= l <= d (got d={d}, l={l}); use line_pack for l > d"
        )));
    }
    let norm = 1.0 / (l as f64).sqrt();
    let t = CMat::from_fn(d, l, |a, b| {
        if a < l {
            let phase = 2.0 * std::f64::consts::PI * ((a * b) % l) as f64 / l as f64;
            Complex64::from_polar(norm, phase)
        } else {
            linalg::ZERO
        }
    });
    canonicalize(&t)
}

/// Greedy column swaps: for each column `l`, try every swap `(l, j)` and keep
/// the best if it strictly raises `f_FS`; repeat until a full pass changes
/// nothing. Returns the permuted design and the accepted `f_FS` values,
/// starting with the input's.
pub fn greedy_permute(t: &RdBeamformer, family: &SwitchFamily) -> Result<(RdBeamformer, Vec<f64>)> {
    grassmann::check_family_fits(t.as_matrix(), family)?;
    if family.len() < 2 {
        return Err(Error::Argument(
            "greedy permutation needs at least two subsets".into(),
        ));
    }
    let l = t.l();
    let mut perm: Vec<usize> = (0..l).collect();
    let mut current = grassmann::min_pairwise_fs_total(t.as_matrix(), family);
    let mut trace = vec![current];
    loop {
        let mut changed = false;
        for a in 0..l {
            let scores: Vec<(usize, f64)> = (0..l)
                .into_par_iter()
                .filter(|&b| b != a)
                .map(|b| {
                    let mut p = perm.clone();
                    p.swap(a, b);
                    let cand = linalg::select_columns(t.as_matrix(), &p);
                    (b, grassmann::min_pairwise_fs_total(&cand, family))
                })
                .collect();
            // Lowest index wins ties.
            let best = scores
                .iter()
                .fold(None::<(usize, f64)>, |acc, &(b, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((b, v)),
                });
            if let Some((b, v)) = best {
                if v > current + IMPROVE_EPS {
                    perm.swap(a, b);
                    current = v;
                    trace.push(v);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok((t.permute_columns(&perm), trace))
}

/// Settings for [`gradient_ascent`].
#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub gamma: f64,
    pub delta_t: f64,
    /// Sharpness `s` of the soft minimum `-(1/s) log sum exp(-s d)`.
    pub sharpness: f64,
    pub max_iterations: usize,
    /// Step halvings tried before declaring no improvement.
    pub max_halvings: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            gamma: 0.05,
            delta_t: 1e-5,
            sharpness: 10.0,
            max_iterations: 500,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub beamformer: RdBeamformer,
    /// Soft objective of the input followed by every accepted iterate.
    pub accepted: Vec<f64>,
    /// `f_FS` of the returned design.
    pub f_fs: f64,
}

/// Cached selection bases and pair distances for fast re-evaluation of the
/// soft objective after a single-column change.
struct SoftState<'a> {
    family: &'a SwitchFamily,
    s: f64,
    qs: Vec<Option<CMat>>,
    dist: Vec<f64>,
    /// Subsets containing each column.
    members: Vec<Vec<usize>>,
    dmin: f64,
    total: f64,
}

impl<'a> SoftState<'a> {
    fn new(t: &CMat, family: &'a SwitchFamily, s: f64) -> Self {
        let n = family.len();
        let qs = grassmann::selection_bases(t, family);
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = grassmann::total_distance(&qs[i], &qs[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let mut members = vec![Vec::new(); family.l()];
        for (i, sub) in family.subsets().iter().enumerate() {
            for &c in sub {
                members[c].push(i);
            }
        }
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                dmin = dmin.min(dist[i * n + j]);
            }
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += (-s * (dist[i * n + j] - dmin)).exp();
            }
        }
        SoftState {
            family,
            s,
            qs,
            dist,
            members,
            dmin,
            total,
        }
    }

    fn value(&self) -> f64 {
        self.dmin - self.total.ln() / self.s
    }

    /// Soft objective after replacing column `c` of `t` by `col`.
    fn value_with_column(&self, t: &CMat, c: usize, col: &nalgebra::DVector<Complex64>) -> f64 {
        let mut t2 = t.clone();
        t2.set_column(c, col);
        let n = self.family.len();
        let affected = &self.members[c];
        let new_q: Vec<Option<CMat>> = affected
            .iter()
            .map(|&a| {
                grassmann::orthonormalize_columns(&t2, &self.family.subsets()[a])
                    .ok()
                    .map(|(q, _)| q.into_matrix())
            })
            .collect();
        let mut is_affected = vec![usize::MAX; n];
        for (pos, &a) in affected.iter().enumerate() {
            is_affected[a] = pos;
        }
        let mut delta = 0.0;
        for (pa, &a) in affected.iter().enumerate() {
            for b in 0..n {
                if b == a {
                    continue;
                }
                let pb = is_affected[b];
                if pb != usize::MAX && b < a {
                    continue;
                }
                let qb = if pb != usize::MAX {
                    &new_q[pb]
                } else {
                    &self.qs[b]
                };
                let d_new = grassmann::total_distance(&new_q[pa], qb);
                let d_old = self.dist[a * n + b];
                delta +=
                    (-self.s * (d_new - self.dmin)).exp() - (-self.s * (d_old - self.dmin)).exp();
            }
        }
        let total = (self.total + delta).max(f64::MIN_POSITIVE);
        self.dmin - total.ln() / self.s
    }
}

/// Smooth surrogate of `f_FS`: `-(1/s) log sum_{i<j} exp(-s d_ij)`.
pub fn soft_fs_objective(t: &CMat, family: &SwitchFamily, sharpness: f64) -> Result<f64> {
    grassmann::check_family_fits(t, family)?;
    if family.len() < 2 {
        return Err(Error::Argument(
            "soft objective needs at least two subsets".into(),
        ));
    }
    Ok(SoftState::new(t, family, sharpness).value())
}

fn gradient_from_state(t: &CMat, state: &SoftState<'_>, delta_t: f64) -> CMat {
    let (d, l) = t.shape();
    let base = state.value();
    let entries: Vec<(usize, usize, bool)> = (0..l)
        .flat_map(|c| (0..d).flat_map(move |r| [(r, c, false), (r, c, true)]))
        .collect();
    let partials: Vec<f64> = entries
        .par_iter()
        .map(|&(r, c, imag)| {
            let mut col = t.column(c).clone_owned();
            col[r] += if imag {
                Complex64::new(0.0, delta_t)
            } else {
                Complex64::new(delta_t, 0.0)
            };
            (state.value_with_column(t, c, &col) - base) / delta_t
        })
        .collect();
    let mut g = CMat::zeros(d, l);
    for (&(r, c, imag), p) in entries.iter().zip(partials) {
        if imag {
            g[(r, c)].im = p;
        } else {
            g[(r, c)].re = p;
        }
    }
    g
}

/// One-sided finite-difference gradient of [`soft_fs_objective`], with the
/// real and imaginary part of every entry perturbed separately.
pub fn soft_fs_gradient(
    t: &CMat,
    family: &SwitchFamily,
    sharpness: f64,
    delta_t: f64,
) -> Result<CMat> {
    grassmann::check_family_fits(t, family)?;
    if family.len() < 2 {
        return Err(Error::Argument(
            "soft objective needs at least two subsets".into(),
        ));
    }
    Ok(gradient_from_state(
        t,
        &SoftState::new(t, family, sharpness),
        delta_t,
    ))
}

/// Geodesic step of every column along its tangential gradient component.
fn geodesic_step(t: &CMat, g: &CMat, gamma: f64) -> CMat {
    let mut out = t.clone();
    for j in 0..t.ncols() {
        let col = t.column(j);
        let gj = g.column(j);
        let tangent = &gj - col * col.dotc(&gj);
        let tn = tangent.norm();
        if tn < 1e-14 {
            continue;
        }
        let new = col * Complex64::new((gamma * tn).cos(), 0.0)
            + tangent * Complex64::new((gamma * tn).sin() / tn, 0.0);
        out.set_column(j, &new);
    }
    out
}

/// Riemannian gradient ascent on the soft minimum distance. Each iteration
/// estimates the gradient by finite differences, moves every column along a
/// great circle and re-canonicalizes; non-improving steps are retried with a
/// halved step size before the search stops.
pub fn gradient_ascent(
    t: &RdBeamformer,
    family: &SwitchFamily,
    opts: AscentOptions,
) -> Result<AscentResult> {
    if !(opts.gamma > 0.0 && opts.delta_t > 0.0 && opts.sharpness > 0.0) {
        return Err(Error::Argument(
            "gamma, delta_t and sharpness must be positive".into(),
        ));
    }
    grassmann::check_family_fits(t.as_matrix(), family)?;
    if family.len() < 2 {
        return Err(Error::Argument(
            "gradient ascent needs at least two subsets".into(),
        ));
    }
    let mut current = t.clone();
    let mut state = SoftState::new(current.as_matrix(), family, opts.sharpness);
    let mut accepted = vec![state.value()];
    let mut best = (
        grassmann::min_pairwise_fs_total(current.as_matrix(), family),
        current.clone(),
    );
    for _ in 0..opts.max_iterations {
        let f_cur = state.value();
        let g = gradient_from_state(current.as_matrix(), &state, opts.delta_t);
        let mut gamma = opts.gamma;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let cand = canonicalize(&geodesic_step(current.as_matrix(), &g, gamma))?;
            let cand_state = SoftState::new(cand.as_matrix(), family, opts.sharpness);
            if cand_state.value() > f_cur + IMPROVE_EPS {
                next = Some((cand, cand_state));
                break;
            }
            gamma *= 0.5;
        }
        let Some((cand, cand_state)) = next else {
            break;
        };
        accepted.push(cand_state.value());
        current = cand;
        state = cand_state;
        let f = grassmann::min_pairwise_fs_total(current.as_matrix(), family);
        if f >= best.0 {
            best = (f, current.clone());
        }
    }
    Ok(AscentResult {
        beamformer: best.1,
        accepted,
        f_fs: best.0,
    })
}

/// `diag(lambda^xi) t`: the reduced-space form of the skewed beamformer,
/// re-canonicalized.
pub fn skew_reduced(lambda_d: &[f64], t: &RdBeamformer, xi: f64) -> Result<RdBeamformer> {
    check_lambda(lambda_d, t.d())?;
    let w: Vec<f64> = lambda_d.iter().map(|&x| x.max(0.0).powf(xi)).collect();
    canonicalize(&linalg::scale_rows(t.as_matrix(), &w))
}

/// Skewed beamformer `E_D diag(lambda^xi) T̂` in antenna space.
pub fn skew_anisotropic(e_d: &CMat, lambda_d: &[f64], t: &RdBeamformer, xi: f64) -> Result<CMat> {
    check_lambda(lambda_d, t.d())?;
    if e_d.ncols() != t.d() {
        return Err(Error::Dimension(format!(
            "E_D has {} columns, design has {} rows",
            e_d.ncols(),
            t.d()
        )));
    }
    let w: Vec<f64> = lambda_d.iter().map(|&x| x.max(0.0).powf(xi)).collect();
    Ok(e_d * linalg::scale_rows(t.as_matrix(), &w))
}

fn check_lambda(lambda_d: &[f64], d: usize) -> Result<()> {
    if lambda_d.len() != d {
        return Err(Error::Dimension(format!(
            "{} eigenvalues for dimension {d}",
            lambda_d.len()
        )));
    }
    if lambda_d.iter().all(|&x| x <= 0.0) {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    Ok(())
}

/// Fixed/variable split `T = T_var T_fix` of a beamformer with `L >= D`.
#[derive(Debug, Clone)]
pub struct TwoStageBeamformer {
    /// `N x D`, tracks the channel statistics.
    pub t_var: CMat,
    /// `D x L` with a leading identity block; fixed hardware.
    pub t_fix: CMat,
}

impl TwoStageBeamformer {
    pub fn product(&self) -> CMat {
        &self.t_var * &self.t_fix
    }
}

pub fn two_stage_decompose(
    t: &RdBeamformer,
    e_d: &CMat,
    lambda_d: Option<&[f64]>,
) -> Result<TwoStageBeamformer> {
    let (d, l) = (t.d(), t.l());
    if l < d {
        return Err(Error::Argument(format!(
            "two-stage split needs L >= D, got D={d}, L={l}"
        )));
    }
    if e_d.ncols() != d {
        return Err(Error::Dimension(format!(
            "E_D has {} columns, design has {d} rows",
            e_d.ncols()
        )));
    }
    let lead = t.as_matrix().columns(0, d).clone_owned();
    let (smin, smax) = linalg::singular_value_range(&lead);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond < 1e8) {
        return Err(Error::IllConditioned(cond));
    }
    let lu = lead.clone().lu();
    let rest = t.as_matrix().columns(d, l - d).clone_owned();
    let tail = lu.solve(&rest).ok_or(Error::IllConditioned(cond))?;
    let mut t_fix = CMat::zeros(d, l);
    t_fix
        .view_mut((0, 0), (d, d))
        .copy_from(&linalg::identity(d));
    t_fix.view_mut((0, d), (d, l - d)).copy_from(&tail);
    let weights: Vec<f64> = match lambda_d {
        Some(lam) => {
            check_lambda(lam, d)?;
            lam.to_vec()
        }
        None => vec![1.0; d],
    };
    let t_var = e_d * linalg::scale_rows(&lead, &weights);
    Ok(TwoStageBeamformer { t_var, t_fix })
}

/// Port-to-eigenvector map `mu(l) = ((l-1)K + floor((l-1)K/L)) mod L + 1`,
/// returned 0-based.
pub fn sudarshan_permutation(l: usize, k: usize) -> Vec<usize> {
    (0..l).map(|i| (i * k + (i * k) / l) % l).collect()
}

/// Columns `mu(1..L)` of the transmit eigenvector matrix.
pub fn sudarshan_baseline(e_tx: &CMat, l: usize, k: usize) -> Result<CMat> {
    if l > e_tx.ncols() {
        return Err(Error::Argument(format!(
            "L={l} exceeds {} eigenvectors",
            e_tx.ncols()
        )));
    }
    Ok(linalg::select_columns(e_tx, &sudarshan_permutation(l, k)))
}

/// [`sudarshan_baseline`] expressed in the dominant `d`-dimensional
/// eigenspace: columns `mu(1..L)` of `I_d`.
pub fn sudarshan_rd(d: usize, l: usize, k: usize) -> Result<RdBeamformer> {
    let eye = linalg::identity(d);
    canonicalize(&sudarshan_baseline(&eye, l, k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{line_pack, sample_stiefel_uniform, LinePackOptions};
    use crate::rng::{complex_gaussian, substream};
    use std::f64::consts::FRAC_PI_2;

    fn random_matrix(d: usize, l: usize, seed: u64) -> CMat {
        let mut rng = substream(seed, 0);
        CMat::from_fn(d, l, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn canonical_form_is_idempotent_and_scale_free() {
        let t = canonicalize(&random_matrix(5, 9, 1)).unwrap();
        let again = canonicalize(t.as_matrix()).unwrap();
        assert!((again.as_matrix() - t.as_matrix()).norm() < 1e-12);
        let mut scaled = t.as_matrix().clone();
        let s = Complex64::from_polar(3.0, std::f64::consts::PI / 7.0);
        let c2 = scaled.column(2) * s;
        scaled.set_column(2, &c2);
        let back = canonicalize(&scaled).unwrap();
        assert!((back.as_matrix() - t.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn canonical_anchor_falls_back_past_zero_rows() {
        let mut t = CMat::zeros(3, 1);
        t[(1, 0)] = Complex64::new(0.0, -2.0);
        t[(2, 0)] = Complex64::new(1.0, 1.0);
        let c = canonicalize(&t).unwrap();
        assert_eq!(c.as_matrix()[(1, 0)].im, 0.0);
        assert!(c.as_matrix()[(1, 0)].re > 0.0);
        assert!(matches!(
            canonicalize(&CMat::zeros(2, 1)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn canonicalization_preserves_selection_projectors() {
        let raw = random_matrix(5, 9, 2);
        let t = canonicalize(&raw).unwrap();
        let sub = [1usize, 4, 7];
        let (q0, _) = grassmann::orthonormalize_columns(&raw, &sub).unwrap();
        let (q1, _) = grassmann::orthonormalize_columns(t.as_matrix(), &sub).unwrap();
        assert!(linalg::projector_distance(q0.as_matrix(), q1.as_matrix()) < 1e-9);
    }

    #[test]
    fn dft_seed_cases() {
        let t = dft_seed(2, 2).unwrap();
        assert!(linalg::is_semi_unitary(t.as_matrix(), 1e-12));
        assert!((grassmann::min_column_distance(t.as_matrix()) - FRAC_PI_2).abs() < 1e-12);
        let t = dft_seed(4, 3).unwrap();
        let fam = SwitchFamily::enumerate_full(3, 2, 100).unwrap();
        assert!((t.f_fs(&fam).unwrap().radians() - FRAC_PI_2).abs() < 1e-9);
        assert!(linalg::is_semi_unitary(
            dft_seed(24, 9).unwrap().as_matrix(),
            1e-12
        ));
        assert!(dft_seed(3, 4).is_err());
    }

    #[test]
    fn greedy_on_full_family_keeps_value() {
        let t = canonicalize(&random_matrix(4, 6, 3)).unwrap();
        let fam = SwitchFamily::enumerate_full(6, 2, 100).unwrap();
        let before = t.f_fs(&fam).unwrap().radians();
        let (out, trace) = greedy_permute(&t, &fam).unwrap();
        assert_eq!(trace.len(), 1);
        assert!((out.f_fs(&fam).unwrap().radians() - before).abs() < 1e-12);
    }

    #[test]
    fn greedy_duplicate_columns_stay_at_zero() {
        let mut m = random_matrix(3, 4, 4);
        let c0 = m.column(0).clone_owned();
        m.set_column(1, &c0);
        m.set_column(2, &c0);
        m.set_column(3, &c0);
        let t = canonicalize(&m).unwrap();
        let fam = SwitchFamily::enumerate_banked(4, 2).unwrap();
        let (_, trace) = greedy_permute(&t, &fam).unwrap();
        assert_eq!(trace, vec![0.0]);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn greedy_separates_near_duplicate_columns() {
        let mut m = line_pack(
            4,
            8,
            LinePackOptions {
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap()
        .into_matrix();
        let near = m.column(0) + random_matrix(4, 1, 6).column(0) * Complex64::new(1e-3, 0.0);
        m.set_column(1, &near);
        let t = canonicalize(&m).unwrap();
        let fam = SwitchFamily::enumerate_banked(8, 2).unwrap();
        let before = t.f_fs(&fam).unwrap().radians();
        let (out, trace) = greedy_permute(&t, &fam).unwrap();
        let after = out.f_fs(&fam).unwrap().radians();
        assert!(after > before, "{after} vs {before}");
        assert!(trace.windows(2).all(|w| w[1] > w[0]));
        let oracle = permutations(8)
            .into_par_iter()
            .map(|p| {
                grassmann::min_pairwise_fs_total(&linalg::select_columns(t.as_matrix(), &p), &fam)
            })
            .reduce(|| 0.0, f64::max);
        assert!(after <= oracle + 1e-12);
        eprintln!(
            "greedy {after:.6} vs best permutation {oracle:.6} (gap {:.3e})",
            oracle - after
        );
    }

    #[test]
    fn ascent_fixed_point_at_optimum() {
        let q = sample_stiefel_uniform(4, 3, &mut substream(7, 0)).unwrap();
        let t = canonicalize(q.as_matrix()).unwrap();
        let fam = SwitchFamily::enumerate_full(3, 2, 100).unwrap();
        let res = gradient_ascent(&t, &fam, AscentOptions::default()).unwrap();
        assert_eq!(res.accepted.len(), 1);
        assert_eq!(res.beamformer, t);
        assert!((res.f_fs - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn ascent_improves_and_tracks_random_search() {
        let fam = SwitchFamily::enumerate_banked(6, 2).unwrap();
        let seed = line_pack(
            4,
            6,
            LinePackOptions {
                seed: 8,
                ..Default::default()
            },
        )
        .unwrap();
        let f_in = seed.f_fs(&fam).unwrap().radians();
        let res = gradient_ascent(&seed, &fam, AscentOptions::default()).unwrap();
        assert!(res.accepted.windows(2).all(|w| w[1] > w[0]));
        assert!(res.f_fs >= f_in - 1e-9);
        let oracle = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let m = random_matrix(4, 6, 1_000_000 + i);
                grassmann::min_pairwise_fs_total(&m, &fam)
            })
            .reduce(|| 0.0, f64::max);
        assert!(
            res.f_fs >= 0.98 * oracle,
            "ascent {} vs random search {oracle}",
            res.f_fs
        );
    }

    #[test]
    fn finite_difference_gradient_matches_central_differences() {
        let fam = SwitchFamily::enumerate_banked(6, 2).unwrap();
        let t = canonicalize(&random_matrix(4, 6, 9)).unwrap().into_matrix();
        let g = soft_fs_gradient(&t, &fam, 10.0, 1e-5).unwrap();
        let h = 1e-6;
        for (n, (r, c)) in [
            (0, 0),
            (1, 2),
            (3, 5),
            (2, 1),
            (0, 4),
            (3, 3),
            (1, 1),
            (2, 5),
            (0, 2),
            (3, 0),
        ]
        .into_iter()
        .enumerate()
        {
            let dir = if n % 2 == 0 {
                Complex64::new(h, 0.0)
            } else {
                Complex64::new(0.0, h)
            };
            let mut plus = t.clone();
            plus[(r, c)] += dir;
            let mut minus = t.clone();
            minus[(r, c)] -= dir;
            let central = (soft_fs_objective(&plus, &fam, 10.0).unwrap()
                - soft_fs_objective(&minus, &fam, 10.0).unwrap())
                / (2.0 * h);
            let fd = if n % 2 == 0 {
                g[(r, c)].re
            } else {
                g[(r, c)].im
            };
            assert!(
                (fd - central).abs() <= f64::max(1e-4, 0.05 * central.abs()),
                "({r},{c}): {fd} vs {central}"
            );
        }
    }

    #[test]
    fn skewing_cases() {
        let t = canonicalize(&random_matrix(3, 5, 10)).unwrap();
        let e = sample_stiefel_uniform(6, 3, &mut substream(10, 1))
            .unwrap()
            .into_matrix();
        let plain = skew_anisotropic(&e, &[1.0; 3], &t, 1.0).unwrap();
        assert!((plain - &e * t.as_matrix()).norm() < 1e-12);
        let t1 = canonicalize(&random_matrix(1, 4, 11)).unwrap();
        let e1 = e.columns(0, 1).clone_owned();
        let s = skew_anisotropic(&e1, &[2.0], &t1, 1.0).unwrap();
        for j in 0..4 {
            let c = s.column(j);
            assert!((c.dotc(&e1.column(0)).norm() - c.norm()).abs() < 1e-12);
        }
        assert!(matches!(
            skew_anisotropic(&e, &[0.0; 3], &t, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn two_stage_cases() {
        let q = sample_stiefel_uniform(4, 4, &mut substream(12, 0)).unwrap();
        let t = canonicalize(q.as_matrix()).unwrap();
        let e = sample_stiefel_uniform(8, 4, &mut substream(12, 1))
            .unwrap()
            .into_matrix();
        let ts = two_stage_decompose(&t, &e, None).unwrap();
        assert!((&ts.t_fix - linalg::identity(4)).norm() < 1e-12);

        let t = canonicalize(&random_matrix(5, 9, 13)).unwrap();
        let e = sample_stiefel_uniform(12, 5, &mut substream(13, 1))
            .unwrap()
            .into_matrix();
        let lam = [5.0, 3.0, 2.0, 1.0, 0.5];
        let ts = two_stage_decompose(&t, &e, Some(&lam)).unwrap();
        let full = skew_anisotropic(&e, &lam, &t, 1.0).unwrap();
        assert!((ts.product() - &full).norm() < 1e-9 * full.norm());
        assert_eq!(
            ts.t_fix.view((0, 0), (5, 5)).clone_owned(),
            linalg::identity(5)
        );

        let mut bad = t.as_matrix().clone();
        let c0 = bad.column(0).clone_owned();
        bad.set_column(1, &c0);
        let bad = canonicalize(&bad).unwrap();
        assert!(matches!(
            two_stage_decompose(&bad, &e, None),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn sudarshan_permutation_cases() {
        let mu: Vec<usize> = sudarshan_permutation(9, 3).iter().map(|x| x + 1).collect();
        assert_eq!(mu, vec![1, 4, 7, 2, 5, 8, 3, 6, 9]);
        assert_eq!(sudarshan_permutation(3, 3), vec![0, 1, 2]);
        for (l, k) in [(9usize, 3usize), (51, 3)] {
            let mut p = sudarshan_permutation(l, k);
            p.sort_unstable();
            assert_eq!(p, (0..l).collect::<Vec<_>>());
        }
        let e = sample_stiefel_uniform(12, 12, &mut substream(14, 0))
            .unwrap()
            .into_matrix();
        let t = canonicalize(&sudarshan_baseline(&e, 9, 3).unwrap()).unwrap();
        let ts = two_stage_decompose(&sudarshan_rd(9, 9, 3).unwrap(), &linalg::identity(9), None)
            .unwrap();
        assert!(ts
            .t_fix
            .iter()
            .all(|z| *z == linalg::ZERO || *z == linalg::ONE));
        assert_eq!(t.l(), 9);
    }
}
