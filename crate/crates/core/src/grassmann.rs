//! Subspace geometry on complex Stiefel and Grassmann manifolds.

use num_complex::Complex64;
use rand::Rng;

use crate::beamformer::{canonicalize, RdBeamformer};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rng::{complex_gaussian, substream};
use crate::switchset::SwitchFamily;

/// Relative smallest singular value below which a selection is rank deficient.
pub const RANK_TOL: f64 = 1e-8;

/// Slack for roundoff in `|det|` before it is clamped into `[0, 1]`.
const DET_SLACK: f64 = 1e-12;

/// A `D x K` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiUnitary(CMat);

impl SemiUnitary {
    pub fn new(data: CMat) -> Result<Self> {
        if data.nrows() < data.ncols() {
            return Err(Error::Dimension(format!(
                "semi-unitary matrix needs rows >= columns, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let err = (data.adjoint() * &data - linalg::identity(data.ncols())).norm();
        if err > 1e-10 {
            return Err(Error::Numerical(format!(
                "columns are not orthonormal (error {err:.3e})"
            )));
        }
        Ok(SemiUnitary(data))
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }
}

/// An angle in `[0, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=std::f64::consts::FRAC_PI_2).contains(&value) {
            Ok(Angle(value))
        } else {
            Err(Error::Argument(format!("angle {value} outside [0, pi/2]")))
        }
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// `|det(m)|` clamped into `[0, 1]`, rejecting excursions beyond roundoff.
fn clamp_unit(x: f64) -> Result<f64> {
    if !x.is_finite() || x < -DET_SLACK || x > 1.0 + DET_SLACK {
        return Err(Error::Numerical(format!(
            "overlap determinant {x} outside [0, 1]; inputs are not semi-unitary"
        )));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Fubini-Study distance from the `K x K` cross-Gram `a^H b` of two
/// semi-unitary matrices. `|det(a^H b b^H a)| = |det(a^H b)|^2`, and taking
/// the square root first avoids squaring tiny determinants.
pub(crate) fn fs_from_cross(cross: &CMat) -> Result<f64> {
    let c = clamp_unit(linalg::det(cross).norm())?;
    Ok(c.acos())
}

pub fn fubini_study_distance(a: &SemiUnitary, b: &SemiUnitary) -> Result<Angle> {
    if a.0.shape() != b.0.shape() {
        return Err(Error::Dimension(format!(
            "Fubini-Study distance needs equal shapes, got {:?} and {:?}",
            a.0.shape(),
            b.0.shape()
        )));
    }
    // Averaging both orders makes the result exactly symmetric; the two LU
    // factorizations may differ in the last bits.
    let ab = linalg::det(&(a.0.adjoint() * &b.0)).norm();
    let ba = linalg::det(&(b.0.adjoint() * &a.0)).norm();
    let c = clamp_unit(0.5 * (ab + ba))?;
    Ok(Angle(c.acos().min(std::f64::consts::FRAC_PI_2)))
}

/// Orthonormalizes the columns of `t` picked by `subset` (0-based).
/// Returns `(q, g)` with `q = t[:, subset] g` and `q^H q = I`.
pub fn orthonormalize_columns(t: &CMat, subset: &[usize]) -> Result<(SemiUnitary, CMat)> {
    if subset.iter().any(|&c| c >= t.ncols()) {
        return Err(Error::Dimension(format!(
            "subset {subset:?} out of range for {} columns",
            t.ncols()
        )));
    }
    if subset.len() > t.nrows() {
        return Err(Error::Singular {
            subset: subset.iter().map(|c| c + 1).collect(),
            ratio: 0.0,
        });
    }
    let sel = linalg::select_columns(t, subset);
    let (q, r) = linalg::qr_positive(&sel);
    let (smin, smax) = linalg::singular_value_range(&r);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(Error::Singular {
            subset: subset.iter().map(|c| c + 1).collect(),
            ratio,
        });
    }
    let k = subset.len();
    let g = r
        .solve_upper_triangular(&linalg::identity(k))
        .ok_or_else(|| Error::Numerical("triangular factor not invertible".into()))?;
    Ok((SemiUnitary(q), g))
}

pub fn orthonormalize_selection(t: &RdBeamformer, subset: &[usize]) -> Result<(SemiUnitary, CMat)> {
    orthonormalize_columns(t.as_matrix(), subset)
}

/// Uniform draw from the complex Stiefel manifold of `d x k` matrices.
pub fn sample_stiefel_uniform<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    rng: &mut R,
) -> Result<SemiUnitary> {
    if k == 0 || k > d {
        return Err(Error::Dimension(format!(
            "Stiefel sample needs 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    let g = CMat::from_fn(d, k, |_, _| complex_gaussian(rng));
    let (q, _) = linalg::qr_positive(&g);
    Ok(SemiUnitary(q))
}

/// Minimum pairwise Fubini-Study distance over the subspaces selected by
/// `family`.
pub fn min_pairwise_fs(t: &RdBeamformer, family: &SwitchFamily) -> Result<Angle> {
    if family.len() < 2 {
        return Err(Error::Argument(
            "minimum pairwise distance needs at least two subsets".into(),
        ));
    }
    check_family_fits(t.as_matrix(), family)?;
    let qs = family
        .subsets()
        .iter()
        .map(|s| orthonormalize_columns(t.as_matrix(), s).map(|(q, _)| q.0))
        .collect::<Result<Vec<_>>>()?;
    let mut best = std::f64::consts::FRAC_PI_2;
    for i in 0..qs.len() {
        for j in (i + 1)..qs.len() {
            best = best.min(fs_from_cross(&(qs[i].adjoint() * &qs[j]))?);
        }
    }
    Ok(Angle(best))
}

pub(crate) fn check_family_fits(t: &CMat, family: &SwitchFamily) -> Result<()> {
    if family.l() != t.ncols() {
        return Err(Error::Dimension(format!(
            "family is over {} ports but the beamformer has {} columns",
            family.l(),
            t.ncols()
        )));
    }
    Ok(())
}

/// Orthonormal bases of every selection, `None` where a selection is rank
/// deficient.
pub(crate) fn selection_bases(t: &CMat, family: &SwitchFamily) -> Vec<Option<CMat>> {
    family
        .subsets()
        .iter()
        .map(|s| orthonormalize_columns(t, s).ok().map(|(q, _)| q.0))
        .collect()
}

/// Distance between two optional bases; rank-deficient selections and
/// numerically invalid overlaps count as distance zero so that search
/// routines stay total.
pub(crate) fn total_distance(a: &Option<CMat>, b: &Option<CMat>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => fs_from_cross(&(a.adjoint() * b)).unwrap_or(0.0),
        _ => 0.0,
    }
}

/// Minimum pairwise distance where singular selections score zero.
pub(crate) fn min_pairwise_fs_total(t: &CMat, family: &SwitchFamily) -> f64 {
    let qs = selection_bases(t, family);
    let mut best = std::f64::consts::FRAC_PI_2;
    for i in 0..qs.len() {
        for j in (i + 1)..qs.len() {
            best = best.min(total_distance(&qs[i], &qs[j]));
        }
    }
    best
}

/// Options for [`line_pack`].
#[derive(Debug, Clone, Copy)]
pub struct LinePackOptions {
    pub restarts: usize,
    /// Ascent iterations per sharpness level.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LinePackOptions {
    fn default() -> Self {
        LinePackOptions {
            restarts: 16,
            iterations: 150,
            seed: 0,
        }
    }
}

/// Minimum pairwise Fubini-Study distance between the columns of `t`
/// (lines in `C^D`).
pub fn min_column_distance(t: &CMat) -> f64 {
    let l = t.ncols();
    let mut best = std::f64::consts::FRAC_PI_2;
    for i in 0..l {
        let ci = t.column(i);
        let ni = ci.norm();
        for j in (i + 1)..l {
            let cj = t.column(j);
            let c = (ci.dotc(&cj).norm() / (ni * cj.norm())).min(1.0);
            best = best.min(c.acos());
        }
    }
    best
}

/// Soft-min of pairwise column distances and its Euclidean gradient with
/// respect to the (unit-norm) columns.
fn soft_line_objective(t: &CMat, s: f64, want_grad: bool) -> (f64, Option<CMat>) {
    let l = t.ncols();
    let mut pairs = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            let c = t.column(i).dotc(&t.column(j));
            let d = c.norm().min(1.0).acos();
            pairs.push((i, j, c, d));
        }
    }
    let dmin = pairs.iter().map(|p| p.3).fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = pairs.iter().map(|p| (-s * (p.3 - dmin)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let value = dmin - total.ln() / s;
    if !want_grad {
        return (value, None);
    }
    let mut g = CMat::zeros(t.nrows(), l);
    for ((i, j, c, _), w) in pairs.iter().zip(&weights) {
        let mag = c.norm();
        if mag < 1e-15 {
            continue;
        }
        let w = w / total;
        let dd = -1.0 / (1.0 - mag * mag).max(1e-300).sqrt();
        // c = a_i^H a_j: d|c|/d conj(a_i) = a_j conj(c) / (2|c|), and
        // symmetrically for a_j with c replaced by conj(c).
        let scale = w * dd / mag;
        let coef_i = c.conj() * scale;
        let coef_j = *c * scale;
        for r in 0..t.nrows() {
            let aj = t[(r, *j)];
            let ai = t[(r, *i)];
            g[(r, *i)] += aj * coef_i;
            g[(r, *j)] += ai * coef_j;
        }
    }
    (value, Some(g))
}

fn normalize_columns(t: &mut CMat) {
    for mut col in t.column_iter_mut() {
        let n = col.norm();
        col /= Complex64::new(n, 0.0);
    }
}

fn pack_once(d: usize, l: usize, iterations: usize, rng: &mut crate::rng::StreamRng) -> CMat {
    let mut t = CMat::from_fn(d, l, |_, _| complex_gaussian(rng));
    normalize_columns(&mut t);
    let mut step = 0.1;
    let mut s = 10.0;
    while s <= 2560.0 {
        for _ in 0..iterations {
            let (f0, g) = soft_line_objective(&t, s, true);
            let mut g = g.expect("gradient requested");
            for j in 0..l {
                let col = t.column(j).clone_owned();
                let radial = col.dotc(&g.column(j));
                let proj = &col * radial;
                let mut gc = g.column_mut(j);
                gc -= proj;
            }
            let gn = g.norm();
            if gn < 1e-14 {
                break;
            }
            let dir = g / Complex64::new(gn, 0.0);
            let mut accepted = false;
            while step > 1e-12 {
                let mut cand = &t + &dir * Complex64::new(step, 0.0);
                normalize_columns(&mut cand);
                if soft_line_objective(&cand, s, false).0 > f0 {
                    t = cand;
                    accepted = true;
                    step = (step * 1.5).min(0.5);
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                step = 0.05;
                break;
            }
        }
        s *= 2.0;
    }
    t
}

/// Grassmannian line packing: a canonical `d x l` matrix whose columns
/// (locally) maximize their minimum pairwise Fubini-Study distance. For
/// `l <= d` the result has orthonormal columns.
pub fn line_pack(d: usize, l: usize, opts: LinePackOptions) -> Result<RdBeamformer> {
    if d == 0 || l == 0 {
        return Err(Error::Argument(format!(
            "line packing needs d, l >= 1, got d={d}, l={l}"
        )));
    }
    if l <= d {
        let mut rng = substream(opts.seed, 0);
        let q = sample_stiefel_uniform(d, l, &mut rng)?;
        return canonicalize(q.as_matrix());
    }
    let mut best: Option<(f64, CMat)> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = substream(opts.seed, r as u64);
        let t = pack_once(d, l, opts.iterations, &mut rng);
        let v = min_column_distance(&t);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, t));
        }
    }
    let (_, t) = best.expect("at least one restart");
    canonicalize(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn col(v: &[Complex64]) -> SemiUnitary {
        SemiUnitary::new(CMat::from_column_slice(v.len(), 1, v)).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(d: usize, l: usize, seed: u64) -> CMat {
        let mut rng = substream(seed, 0);
        CMat::from_fn(d, l, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn distance_hand_cases() {
        let e1 = col(&[c(1.0), c(0.0), c(0.0)]);
        let e2 = col(&[c(0.0), c(1.0), c(0.0)]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mid = col(&[c(h), c(h), c(0.0)]);
        assert_eq!(fubini_study_distance(&e1, &e1).unwrap().radians(), 0.0);
        assert!((fubini_study_distance(&e1, &e2).unwrap().radians() - FRAC_PI_2).abs() < 1e-15);
        assert!((fubini_study_distance(&e1, &mid).unwrap().radians() - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn distance_shape_mismatch() {
        let a = sample_stiefel_uniform(4, 2, &mut substream(1, 0)).unwrap();
        let b = sample_stiefel_uniform(4, 1, &mut substream(1, 1)).unwrap();
        assert!(matches!(
            fubini_study_distance(&a, &b),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn orthonormal_selection_has_identity_g() {
        let q = sample_stiefel_uniform(5, 3, &mut substream(2, 0)).unwrap();
        let t = canonicalize(q.as_matrix()).unwrap();
        let (_, g) = orthonormalize_selection(&t, &[0, 2]).unwrap();
        assert!((g - linalg::identity(2)).norm() < 1e-12);
    }

    #[test]
    fn single_scaled_column_gives_reciprocal() {
        let mut t = CMat::zeros(3, 2);
        t[(0, 0)] = c(2.5);
        t[(1, 1)] = c(0.5);
        let (_, g) = orthonormalize_columns(&t, &[0]).unwrap();
        assert!((g[(0, 0)] - c(0.4)).norm() < 1e-15);
        let (_, g) = orthonormalize_columns(&t, &[1]).unwrap();
        assert!((g[(0, 0)] - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn selection_span_matches_independent_factorization() {
        let t = random_matrix(4, 5, 3);
        let (q, g) = orthonormalize_columns(&t, &[1, 3]).unwrap();
        let q = q.as_matrix();
        let sel = linalg::select_columns(&t, &[1, 3]);
        assert!((&sel * &g - q).norm() < 1e-12);
        assert!((q.adjoint() * q - linalg::identity(2)).norm() < 1e-10);
        // Modified Gram-Schmidt as the reference factorization.
        let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        for k in 0..2 {
            let mut v = sel.column(k).clone_owned();
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
            let n = v.norm();
            basis.push(v / c(n));
        }
        let reference = CMat::from_columns(&basis);
        assert!(linalg::projector_distance(q, &reference) < 1e-9);
    }

    #[test]
    fn rank_deficient_selection_is_reported() {
        let mut t = random_matrix(4, 3, 4);
        let c0 = t.column(0).clone_owned() * Complex64::new(0.0, 2.0);
        t.set_column(2, &c0);
        match orthonormalize_columns(&t, &[0, 2]) {
            Err(Error::Singular { subset, .. }) => assert_eq!(subset, vec![1, 3]),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn stiefel_scalar_is_unit_modulus() {
        let v = sample_stiefel_uniform(1, 1, &mut substream(5, 0)).unwrap();
        assert!((v.as_matrix()[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(sample_stiefel_uniform(2, 3, &mut substream(5, 0)).is_err());
    }

    #[test]
    fn stiefel_is_deterministic() {
        let a = sample_stiefel_uniform(6, 2, &mut substream(9, 4)).unwrap();
        let b = sample_stiefel_uniform(6, 2, &mut substream(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stiefel_projector_mean_is_scaled_identity() {
        let (d, k, n) = (8usize, 3usize, 100_000usize);
        let projs: Vec<CMat> = (0..n)
            .map(|i| {
                let v = sample_stiefel_uniform(d, k, &mut substream(17, i as u64)).unwrap();
                let m = v.as_matrix();
                m * m.adjoint()
            })
            .collect();
        for r in 0..d {
            for cc in 0..d {
                let expected = if r == cc { k as f64 / d as f64 } else { 0.0 };
                for part in [0usize, 1] {
                    let xs: Vec<f64> = projs
                        .iter()
                        .map(|p| {
                            if part == 0 {
                                p[(r, cc)].re
                            } else {
                                p[(r, cc)].im
                            }
                        })
                        .collect();
                    let m = crate::stats::Moments::of(&xs);
                    let se = m.std_error();
                    let target = if part == 0 { expected } else { 0.0 };
                    if se == 0.0 {
                        assert!((m.mean - target).abs() < 1e-12);
                    } else {
                        assert!((m.mean - target).abs() <= 4.0 * se, "entry ({r},{cc})");
                    }
                }
            }
        }
    }

    #[test]
    fn semi_unitary_beamformer_attains_right_angle() {
        let q = sample_stiefel_uniform(5, 4, &mut substream(6, 0)).unwrap();
        let t = canonicalize(q.as_matrix()).unwrap();
        let fam = SwitchFamily::enumerate_full(4, 2, 1_000_000).unwrap();
        assert!((min_pairwise_fs(&t, &fam).unwrap().radians() - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn duplicated_subset_gives_zero() {
        let t = canonicalize(&random_matrix(4, 4, 7)).unwrap();
        let fam = SwitchFamily::with_repeats(4, 2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(min_pairwise_fs(&t, &fam).unwrap().radians(), 0.0);
        let single = SwitchFamily::new(4, 2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(
            min_pairwise_fs(&t, &single),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn min_pairwise_matches_direct_loop() {
        let t = canonicalize(&random_matrix(3, 4, 8)).unwrap();
        let fam = SwitchFamily::enumerate_full(4, 2, 1_000_000).unwrap();
        let mut oracle = f64::INFINITY;
        let subsets = fam.subsets();
        for i in 0..subsets.len() {
            for j in 0..subsets.len() {
                if i == j {
                    continue;
                }
                let (qi, _) = orthonormalize_selection(&t, &subsets[i]).unwrap();
                let (qj, _) = orthonormalize_selection(&t, &subsets[j]).unwrap();
                oracle = oracle.min(fubini_study_distance(&qi, &qj).unwrap().radians());
            }
        }
        assert_eq!(min_pairwise_fs(&t, &fam).unwrap().radians(), oracle);
    }

    #[test]
    fn line_pack_small_cases() {
        let t = line_pack(4, 3, LinePackOptions::default()).unwrap();
        assert!(linalg::is_semi_unitary(t.as_matrix(), 1e-10));
        assert!((min_column_distance(t.as_matrix()) - FRAC_PI_2).abs() < 1e-9);
        let one = line_pack(1, 1, LinePackOptions::default()).unwrap();
        assert!((one.as_matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn line_pack_three_lines_in_plane_matches_random_search() {
        let t = line_pack(2, 3, LinePackOptions::default()).unwrap();
        let ours = min_column_distance(t.as_matrix());
        let mut oracle = 0.0f64;
        for i in 0..100_000u64 {
            let mut rng = substream(12345, i);
            let cand = CMat::from_fn(2, 3, |_, _| complex_gaussian(&mut rng));
            oracle = oracle.max(min_column_distance(&cand));
        }
        assert!(
            ours >= 0.98 * oracle,
            "packed {ours} vs random-search {oracle}"
        );
        // Three lines in C^2 map to an equilateral triangle on a great circle
        // of the Bloch sphere: |<a, b>|^2 = 1/4.
        assert!((ours - std::f64::consts::FRAC_PI_3).abs() < 1e-6);
    }

    #[test]
    fn unit_eigenvalue_count_and_determinant_sandwich() {
        let t = canonicalize(&random_matrix(6, 8, 21)).unwrap();
        let subsets = [
            vec![0usize, 1, 2],
            vec![1, 2, 5],
            vec![2, 6, 7],
            vec![3, 4, 5],
        ];
        for a in &subsets {
            for b in &subsets {
                let (qi, _) = orthonormalize_selection(&t, a).unwrap();
                let (qj, _) = orthonormalize_selection(&t, b).unwrap();
                let (qi, qj) = (qi.as_matrix(), qj.as_matrix());
                let m = qi.adjoint() * qj * qj.adjoint() * qi;
                let mut ev = linalg::hermitian_eigenvalues(&m);
                ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
                let overlap = a.iter().filter(|x| b.contains(x)).count();
                let unit = ev.iter().filter(|&&e| (e - 1.0).abs() < 1e-6).count();
                assert_eq!(unit, overlap);
                let d = fs_from_cross(&(qi.adjoint() * qj)).unwrap();
                let cos2 = d.cos().powi(2);
                let p = (3 - overlap) as i32;
                assert!(cos2 >= ev[2].powi(p) - 1e-9);
                if overlap < 3 {
                    assert!(cos2 <= ev[overlap].powi(p) + 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn distance_symmetric_in_range_and_unitarily_invariant(seed in 0u64..10_000) {
            let mut rng = substream(seed, 0);
            let a = sample_stiefel_uniform(5, 2, &mut rng).unwrap();
            let b = sample_stiefel_uniform(5, 2, &mut rng).unwrap();
            let u = sample_stiefel_uniform(2, 2, &mut rng).unwrap();
            let dab = fubini_study_distance(&a, &b).unwrap().radians();
            let dba = fubini_study_distance(&b, &a).unwrap().radians();
            prop_assert_eq!(dab, dba);
            prop_assert!((0.0..=FRAC_PI_2).contains(&dab));
            let au = SemiUnitary::new(a.as_matrix() * u.as_matrix()).unwrap();
            let dau = fubini_study_distance(&au, &b).unwrap().radians();
            prop_assert!((dau - dab).abs() < 1e-10);
        }
    }
}
