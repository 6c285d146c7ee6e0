//! Forward-mode derivative of the truncated SVD when the discarded factors
//! are available.
//!
//! With `K = U†dAV` the kept-kept block is fixed up to the imaginary diagonal,
//! which is split between the left and right factors by `alpha`. Cross-cut
//! blocks come from `U⊥†dAV` and `V⊥†dA†U`. For non-square inputs the part of
//! the longer side not spanned by either block is reached through the
//! projector `1 - UU† - U⊥U⊥†` (or its V-side mirror) without building it.

use crate::config::GradConfig;
use crate::decomp::{SvdDiscarded, SvdKept};
use crate::error::{Error, Result};
use crate::matrix::{CMat, RealDiag, C64};

/// Internal blocks of an SVD tangent.
///
/// On the explicit path `du2`/`dv2` are coordinates in the discarded bases,
/// `(r-t) x t`. On the iterative path they are the full projected tangents
/// `(1 - UU†)dU` (`n x t`) and `(1 - VV†)dV` (`m x t`).
#[derive(Debug, Clone, PartialEq)]
pub struct SvdBlocks {
    pub du1: CMat,
    pub dv1: CMat,
    pub du2: CMat,
    pub dv2: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdTangent {
    pub du: CMat,
    pub ds: RealDiag,
    pub dv: CMat,
    pub blocks: SvdBlocks,
}

/// Reciprocal gaps `1/(S_j² - S_i²)` inside the kept block, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffF {
    t: usize,
    values: Vec<f64>,
}

impl CoeffF {
    pub fn size(&self) -> usize {
        self.t
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t + j]
    }

    pub fn to_matrix(&self) -> CMat {
        CMat::from_fn(self.t, self.t, |i, j| C64::new(self.at(i, j), 0.0))
    }
}

/// Reciprocal gaps `1/(S_j² - S⊥_i²)` across the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffG {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CoeffG {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn to_matrix(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| C64::new(self.at(i, j), 0.0))
    }
}

fn scale_of(s: &[f64]) -> f64 {
    s.first().map_or(0.0, |x| x * x)
}

pub fn coeff_f(s: &RealDiag, cfg: &GradConfig) -> Result<CoeffF> {
    let s = s.values();
    let t = s.len();
    let scale = scale_of(s);
    let mut values = vec![0.0; t * t];
    for i in 0..t {
        for j in (i + 1)..t {
            let r = cfg.reciprocal_gap(s[j] * s[j] - s[i] * s[i], scale, i, j)?;
            values[i * t + j] = r;
            values[j * t + i] = -r;
        }
    }
    Ok(CoeffF { t, values })
}

pub fn coeff_g(s: &RealDiag, s_disc: &RealDiag, cfg: &GradConfig) -> Result<CoeffG> {
    let s = s.values();
    let sd = s_disc.values();
    let scale = scale_of(s).max(scale_of(sd));
    let mut values = Vec::with_capacity(sd.len() * s.len());
    for (i, si) in sd.iter().enumerate() {
        for (j, sj) in s.iter().enumerate() {
            // report the pair in global indices: kept j, discarded t + i
            values.push(cfg.reciprocal_gap(sj * sj - si * si, scale, j, s.len() + i)?);
        }
    }
    Ok(CoeffG {
        rows: sd.len(),
        cols: s.len(),
        values,
    })
}

fn check_tangent_shape(kept: &SvdKept, da: &CMat) -> Result<()> {
    if da.shape() != (kept.n(), kept.m()) {
        return Err(Error::ShapeMismatch {
            op: "SVD tangent",
            left: (kept.n(), kept.m()),
            right: da.shape(),
        });
    }
    da.check_finite()
}

fn check_discarded(kept: &SvdKept, disc: &SvdDiscarded) -> Result<()> {
    if disc.u.rows() != kept.n()
        || disc.v.rows() != kept.m()
        || disc.u.cols() != disc.len()
        || disc.v.cols() != disc.len()
    {
        return Err(Error::InvalidDimensions(format!(
            "discarded factors U⊥ {:?}, V⊥ {:?} do not match kept factors of a {}x{} matrix",
            disc.u.shape(),
            disc.v.shape(),
            kept.n(),
            kept.m()
        )));
    }
    if kept.t() + disc.len() != kept.n().min(kept.m()) {
        return Err(Error::InvalidDimensions(format!(
            "kept ({}) plus discarded ({}) columns must equal min(n, m) = {}",
            kept.t(),
            disc.len(),
            kept.n().min(kept.m())
        )));
    }
    Ok(())
}

/// `U†dAV`, the kept-kept projection of the tangent.
pub(crate) fn kept_projection(kept: &SvdKept, da: &CMat) -> CMat {
    &kept.u().adjoint() * &(da * kept.v())
}

/// Real part of the diagonal of `U†dAV`.
pub fn ds_kept(kept: &SvdKept, da: &CMat) -> Result<RealDiag> {
    check_tangent_shape(kept, da)?;
    Ok(ds_from_projection(&kept_projection(kept, da)))
}

fn ds_from_projection(k: &CMat) -> RealDiag {
    RealDiag(k.diag().iter().map(|z| z.re).collect())
}

/// Kept-kept blocks `(U†dU, V†dV)`. Both are anti-Hermitian; the imaginary
/// diagonal `i Im K_kk / S_k` goes to the left block with weight `alpha` and
/// to the right block with weight `1 - alpha`.
pub fn du1_dv1(kept: &SvdKept, da: &CMat, cfg: &GradConfig) -> Result<(CMat, CMat)> {
    check_tangent_shape(kept, da)?;
    cfg.validate()?;
    let k = kept_projection(kept, da);
    du1_dv1_from_projection(&k, kept.s(), cfg)
}

pub(crate) fn du1_dv1_from_projection(k: &CMat, s: &RealDiag, cfg: &GradConfig) -> Result<(CMat, CMat)> {
    let f = coeff_f(s, cfg)?;
    let s = s.values();
    let t = s.len();
    let mut du1 = CMat::zeros(t, t);
    let mut dv1 = CMat::zeros(t, t);
    for i in 0..t {
        for j in 0..t {
            if i == j {
                let d = C64::new(0.0, k[(i, i)].im / s[i]);
                du1[(i, i)] = d * cfg.alpha;
                dv1[(i, i)] = -d * (1.0 - cfg.alpha);
            } else {
                let fij = f.at(i, j);
                let kji = k[(j, i)].conj();
                du1[(i, j)] = (k[(i, j)] * s[j] + kji * s[i]) * fij;
                dv1[(i, j)] = (k[(i, j)] * s[i] + kji * s[j]) * fij;
            }
        }
    }
    Ok((du1, dv1))
}

/// Cross-cut blocks `(U⊥†dU, V⊥†dV)`, each `(r-t) x t`.
pub fn du2_dv2_explicit(kept: &SvdKept, disc: &SvdDiscarded, da: &CMat, cfg: &GradConfig) -> Result<(CMat, CMat)> {
    check_tangent_shape(kept, da)?;
    check_discarded(kept, disc)?;
    cfg.validate()?;
    let t = kept.t();
    let d = disc.len();
    if d == 0 {
        return Ok((CMat::zeros(0, t), CMat::zeros(0, t)));
    }
    let g = coeff_g(kept.s(), &disc.s, cfg)?;
    let left = &disc.u.adjoint() * &(da * kept.v());
    let right = &disc.v.adjoint() * &da.adjoint_mul(kept.u())?;
    let s = kept.s().values();
    let sd = disc.s.values();
    let mut du2 = CMat::zeros(d, t);
    let mut dv2 = CMat::zeros(d, t);
    for i in 0..d {
        for j in 0..t {
            let gij = g.at(i, j);
            du2[(i, j)] = (left[(i, j)] * s[j] + right[(i, j)] * sd[i]) * gij;
            dv2[(i, j)] = (left[(i, j)] * sd[i] + right[(i, j)] * s[j]) * gij;
        }
    }
    Ok((du2, dv2))
}

/// `w - B B† w` for `B = [kept | disc]` with orthonormal columns.
fn remove_span(w: &CMat, kept: &CMat, disc: &CMat) -> Result<CMat> {
    let mut out = w - &(kept * &kept.adjoint_mul(w)?);
    if disc.cols() > 0 {
        out = &out - &(disc * &disc.adjoint_mul(&out)?);
    }
    Ok(out)
}

/// `(1_n - UU† - U⊥U⊥†) dA V S⁻¹`: the left tangent component outside the
/// span of the thin factors. Zero when `n <= m`.
pub fn tall_correction(kept: &SvdKept, disc: &SvdDiscarded, da: &CMat) -> Result<CMat> {
    check_tangent_shape(kept, da)?;
    check_discarded(kept, disc)?;
    let s_inv: Vec<f64> = kept.s().values().iter().map(|s| 1.0 / s).collect();
    if kept.n() <= kept.m() {
        return Ok(CMat::zeros(kept.n(), kept.t()));
    }
    let w = (da * kept.v()).scale_cols(&s_inv);
    remove_span(&w, kept.u(), &disc.u)
}

/// `(1_m - VV† - V⊥V⊥†) dA† U S⁻¹`, the right-side mirror of
/// [`tall_correction`]. Zero when `n >= m`.
pub fn wide_correction(kept: &SvdKept, disc: &SvdDiscarded, da: &CMat) -> Result<CMat> {
    check_tangent_shape(kept, da)?;
    check_discarded(kept, disc)?;
    if kept.n() >= kept.m() {
        return Ok(CMat::zeros(kept.m(), kept.t()));
    }
    let s_inv: Vec<f64> = kept.s().values().iter().map(|s| 1.0 / s).collect();
    let w = da.adjoint_mul(kept.u())?.scale_cols(&s_inv);
    remove_span(&w, kept.v(), &disc.v)
}

/// Tangent `(dU, dS, dV)` of the kept factors along `dA`.
pub fn jvp_truncated_svd_explicit(
    kept: &SvdKept,
    disc: &SvdDiscarded,
    da: &CMat,
    cfg: &GradConfig,
) -> Result<SvdTangent> {
    check_tangent_shape(kept, da)?;
    check_discarded(kept, disc)?;
    cfg.validate()?;
    let k = kept_projection(kept, da);
    let ds = ds_from_projection(&k);
    let (du1, dv1) = du1_dv1_from_projection(&k, kept.s(), cfg)?;
    let (du2, dv2) = du2_dv2_explicit(kept, disc, da, cfg)?;

    let mut du = kept.u() * &du1;
    let mut dv = kept.v() * &dv1;
    if !disc.is_empty() {
        du = &du + &(&disc.u * &du2);
        dv = &dv + &(&disc.v * &dv2);
    }
    if kept.n() > kept.m() {
        du = &du + &tall_correction(kept, disc, da)?;
    } else if kept.n() < kept.m() {
        dv = &dv + &wide_correction(kept, disc, da)?;
    }
    Ok(SvdTangent {
        du,
        ds,
        dv,
        blocks: SvdBlocks { du1, dv1, du2, dv2 },
    })
}

/// `‖U†dAV - dS - (U†dU) S - S (V†dV)†‖_F`.
pub fn kept_block_residual(kept: &SvdKept, da: &CMat, tangent: &SvdTangent) -> f64 {
    let s = kept.s().values();
    let k = kept_projection(kept, da);
    let b = &tangent.blocks;
    let mut r = &k - &tangent.ds.to_matrix();
    r = &r - &b.du1.scale_cols(s);
    r = &r - &b.dv1.adjoint().scale_rows(s);
    r.norm_fro()
}

/// Residuals of the two cross-cut relations for explicit-path blocks:
/// `‖U†dAV⊥ - S (V⊥†dV)† + (U⊥†dU)† S⊥‖` and
/// `‖U⊥†dAV - (U⊥†dU) S + S⊥ (V⊥†dV)‖`.
pub fn cross_block_residuals(kept: &SvdKept, disc: &SvdDiscarded, da: &CMat, tangent: &SvdTangent) -> (f64, f64) {
    if disc.is_empty() {
        return (0.0, 0.0);
    }
    let s = kept.s().values();
    let sd = disc.s.values();
    let b = &tangent.blocks;
    let upper = &kept.u().adjoint() * &(da * &disc.v);
    let upper = &(&upper - &b.dv2.adjoint().scale_rows(s)) + &b.du2.adjoint().scale_cols(sd);
    let lower = &disc.u.adjoint() * &(da * kept.v());
    let lower = &(&lower - &b.du2.scale_cols(s)) + &b.dv2.scale_rows(sd);
    (upper.norm_fro(), lower.norm_fro())
}

/// `max(‖X + X†‖_F)` over the two kept-kept blocks.
pub fn anti_hermitian_defect(tangent: &SvdTangent) -> f64 {
    let b = &tangent.blocks;
    let u = (&b.du1 + &b.du1.adjoint()).norm_fro();
    let v = (&b.dv1 + &b.dv1.adjoint()).norm_fro();
    u.max(v)
}

/// `dU S V† + U dS V† + U S dV†`, the first-order change of the kept
/// reconstruction.
pub fn reconstruction_tangent(kept: &SvdKept, tangent: &SvdTangent) -> CMat {
    let s = kept.s().values();
    let ds = tangent.ds.values();
    let a = &tangent.du.scale_cols(s) * &kept.v().adjoint();
    let b = &kept.u().scale_cols(ds) * &kept.v().adjoint();
    let c = &kept.u().scale_cols(s) * &tangent.dv.adjoint();
    &(&a + &b) + &c
}

/// First-order change of a projector `W W†` given `dW`: `dW W† + W dW†`.
pub fn projector_tangent(w: &CMat, dw: &CMat) -> CMat {
    let a = dw * &w.adjoint();
    &a + &a.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DegeneracyPolicy;
    use crate::decomp::{full_svd, truncate_svd};
    use crate::generate::{gen_matrix, MatrixSeed};
    use crate::matrix::ZERO;
    use proptest::prelude::*;

    fn split(a: &CMat, t: usize) -> (SvdKept, SvdDiscarded) {
        truncate_svd(&full_svd(a).unwrap(), t).unwrap()
    }

    fn real(rows: &[&[f64]]) -> CMat {
        CMat::from_real_rows(rows)
    }

    #[test]
    fn ds_of_ones_direction() {
        let a = CMat::from_real_diag(&[3.0, 2.0, 1.0]);
        let (k, _) = split(&a, 2);
        let da = CMat::from_fn(3, 3, |_, _| C64::new(1.0, 0.0));
        assert_eq!(ds_kept(&k, &da).unwrap().values(), &[1.0, 1.0]);
    }

    #[test]
    fn ds_of_phase_direction_vanishes() {
        let a = gen_matrix(&MatrixSeed::complex(3), 4, 4).unwrap();
        let (k, _) = split(&a, 2);
        let da = k.reconstruct().scale(C64::new(0.0, 1.0));
        let ds = ds_kept(&k, &da).unwrap();
        assert!(ds.values().iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn coefficient_examples() {
        let cfg = GradConfig::default();
        let f = coeff_f(&RealDiag(vec![3.0, 1.0]), &cfg).unwrap();
        assert_eq!(f.at(0, 1), -0.125);
        assert_eq!(f.at(1, 0), 0.125);
        assert_eq!(f.at(0, 0), 0.0);
        let g = coeff_g(&RealDiag(vec![2.0]), &RealDiag(vec![1.0]), &cfg).unwrap();
        assert_eq!(g.at(0, 0), 1.0 / 3.0);
        assert!(matches!(
            coeff_f(&RealDiag(vec![1.0 + 1e-15, 1.0]), &cfg),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn kept_blocks_worked_example() {
        let a = CMat::from_real_diag(&[3.0, 1.0]);
        let (k, _) = split(&a, 2);
        let da = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let (du1, dv1) = du1_dv1(&k, &da, &GradConfig::default()).unwrap();
        assert!((du1[(0, 1)] - C64::new(-0.125, 0.0)).norm() < 1e-15);
        assert!((du1[(1, 0)] - C64::new(0.125, 0.0)).norm() < 1e-15);
        // real data: real antisymmetric blocks
        for m in [&du1, &dv1] {
            assert!(m.as_slice().iter().all(|z| z.im == 0.0));
            assert_eq!(m[(0, 0)], ZERO);
        }
        let (du1, dv1) = du1_dv1(&k, &CMat::zeros(2, 2), &GradConfig::default()).unwrap();
        assert_eq!(du1.norm_fro() + dv1.norm_fro(), 0.0);
    }

    #[test]
    fn cross_blocks_worked_example() {
        let a = CMat::from_real_diag(&[2.0, 1.0]);
        let (k, d) = split(&a, 1);
        let da = real(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let (du2, dv2) = du2_dv2_explicit(&k, &d, &da, &GradConfig::default()).unwrap();
        assert!((du2[(0, 0)].re - 2.0 / 3.0).abs() < 1e-15);
        assert!((dv2[(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        let tan = jvp_truncated_svd_explicit(&k, &d, &da, &GradConfig::default()).unwrap();
        assert!((tan.du.col(0)[1].re - 2.0 / 3.0).abs() < 1e-15);
        assert!((tan.dv.col(0)[1].re - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(tan.ds.values(), &[0.0]);
    }

    #[test]
    fn cross_blocks_vanish_inside_kept_span() {
        let a = gen_matrix(&MatrixSeed::complex(8), 5, 5).unwrap();
        let (k, d) = split(&a, 2);
        let da = &k.u().scale_cols(&[0.3, -1.2]) * &k.v().adjoint();
        let (du2, dv2) = du2_dv2_explicit(&k, &d, &da, &GradConfig::default()).unwrap();
        assert!(du2.norm_fro() < 1e-14 && dv2.norm_fro() < 1e-14);
    }

    #[test]
    fn tall_and_wide_corrections() {
        let a = real(&[&[2.0], &[0.0], &[0.0]]);
        let (k, d) = split(&a, 1);
        let da = real(&[&[0.0], &[0.0], &[1.0]]);
        let c = tall_correction(&k, &d, &da).unwrap();
        assert!((&c - &real(&[&[0.0], &[0.0], &[0.5]])).norm_fro() < 1e-15);

        let (kw, dw) = split(&a.adjoint(), 1);
        let c = wide_correction(&kw, &dw, &da.adjoint()).unwrap();
        assert!((&c - &real(&[&[0.0], &[0.0], &[0.5]])).norm_fro() < 1e-15);

        let sq = gen_matrix(&MatrixSeed::complex(1), 4, 4).unwrap();
        let (k, d) = split(&sq, 2);
        let da = gen_matrix(&MatrixSeed::complex(2), 4, 4).unwrap();
        assert_eq!(tall_correction(&k, &d, &da).unwrap().norm_fro(), 0.0);
        assert_eq!(wide_correction(&k, &d, &da).unwrap().norm_fro(), 0.0);
    }

    #[test]
    fn tall_correction_annihilates_thin_span() {
        let a = gen_matrix(&MatrixSeed::complex(4), 7, 3).unwrap();
        let (k, d) = split(&a, 2);
        let coeffs = gen_matrix(&MatrixSeed::complex(5), 3, 3).unwrap();
        let basis = k.u().hstack(&d.u).unwrap();
        let da = &basis * &coeffs;
        assert!(tall_correction(&k, &d, &da).unwrap().norm_fro() < 1e-13);
    }

    #[test]
    fn wide_is_adjoint_of_tall() {
        let a = gen_matrix(&MatrixSeed::complex(6), 8, 4).unwrap();
        let da = gen_matrix(&MatrixSeed::complex(7), 8, 4).unwrap();
        let (k, d) = split(&a, 2);
        let tall = tall_correction(&k, &d, &da).unwrap();
        let kw = SvdKept::new(k.v().clone(), k.s().clone(), k.u().clone()).unwrap();
        let dw = SvdDiscarded {
            u: d.v.clone(),
            s: d.s.clone(),
            v: d.u.clone(),
        };
        let wide = wide_correction(&kw, &dw, &da.adjoint()).unwrap();
        assert!((&tall - &wide).norm_fro() < 1e-14);
    }

    #[test]
    fn full_rank_reconstruction() {
        for seed in 0..5 {
            let a = gen_matrix(&MatrixSeed::complex(seed), 5, 5).unwrap();
            let da = gen_matrix(&MatrixSeed::complex(seed + 50), 5, 5).unwrap();
            let (k, d) = split(&a, 5);
            let tan = jvp_truncated_svd_explicit(&k, &d, &da, &GradConfig::default()).unwrap();
            let rec = reconstruction_tangent(&k, &tan);
            assert!((&rec - &da).norm_fro() <= 1e-10 * da.norm_fro());
        }
    }

    #[test]
    fn shape_errors() {
        let a = gen_matrix(&MatrixSeed::complex(0), 4, 3).unwrap();
        let (k, d) = split(&a, 1);
        let bad = CMat::zeros(3, 4);
        assert!(matches!(ds_kept(&k, &bad), Err(Error::ShapeMismatch { .. })));
        assert!(jvp_truncated_svd_explicit(&k, &d, &bad, &GradConfig::default()).is_err());
    }

    #[test]
    fn lorentzian_stays_finite_on_degenerate_kept_pair() {
        let u = CMat::identity(3);
        let full = crate::decomp::FullSvd {
            u: u.clone(),
            s: RealDiag(vec![1.0, 1.0, 0.5]),
            v: u,
        };
        let cfg = GradConfig::default().with_policy(DegeneracyPolicy::Lorentzian { eps_b: 1e-6 });
        let (k, d) = crate::decomp::truncate_svd_with(&full, 2, &cfg).unwrap();
        let da = gen_matrix(&MatrixSeed::complex(1), 3, 3).unwrap();
        assert!(matches!(
            jvp_truncated_svd_explicit(&k, &d, &da, &GradConfig::default()),
            Err(Error::DegenerateSpectrum { i: 0, j: 1, .. })
        ));
        let tan = jvp_truncated_svd_explicit(&k, &d, &da, &cfg).unwrap();
        assert!(tan.du.check_finite().is_ok() && tan.dv.check_finite().is_ok());
    }

    fn shape_case() -> impl Strategy<Value = (usize, usize)> {
        prop_oneof![Just((6, 6)), Just((9, 4)), Just((4, 9)), Just((5, 7))]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn algebraic_residuals(seed in 0u64..10_000, (n, m) in shape_case(), tfrac in 0.0f64..1.0, alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0)]) {
            let r = n.min(m);
            let t = 1 + ((r - 1) as f64 * tfrac) as usize;
            let a = gen_matrix(&MatrixSeed::complex(seed), n, m).unwrap();
            let da = gen_matrix(&MatrixSeed::complex(seed ^ 0xdead), n, m).unwrap();
            let (k, d) = split(&a, t);
            let cfg = GradConfig::default().with_alpha(alpha);
            let tan = jvp_truncated_svd_explicit(&k, &d, &da, &cfg).unwrap();
            let scale = da.norm_fro();
            prop_assert!(kept_block_residual(&k, &da, &tan) <= 1e-12 * scale);
            let (r1, r2) = cross_block_residuals(&k, &d, &da, &tan);
            prop_assert!(r1 <= 1e-12 * scale && r2 <= 1e-12 * scale);
            prop_assert!(anti_hermitian_defect(&tan) <= 1e-12 * scale);
            // dS does not depend on the split
            let other = jvp_truncated_svd_explicit(&k, &d, &da, &GradConfig::default().with_alpha(1.0 - alpha)).unwrap();
            prop_assert_eq!(&tan.ds, &other.ds);
        }

        #[test]
        fn linear_in_direction(seed in 0u64..10_000, (n, m) in shape_case()) {
            let a = gen_matrix(&MatrixSeed::complex(seed), n, m).unwrap();
            let d1 = gen_matrix(&MatrixSeed::complex(seed + 1), n, m).unwrap();
            let d2 = gen_matrix(&MatrixSeed::real(seed + 2), n, m).unwrap();
            let (k, d) = split(&a, 2);
            let cfg = GradConfig::default();
            let t1 = jvp_truncated_svd_explicit(&k, &d, &d1, &cfg).unwrap();
            let t2 = jvp_truncated_svd_explicit(&k, &d, &d2, &cfg).unwrap();
            let t12 = jvp_truncated_svd_explicit(&k, &d, &(&d1 + &d2), &cfg).unwrap();
            let tol = 1e-11 * (d1.norm_fro() + d2.norm_fro());
            prop_assert!((&t12.du - &(&t1.du + &t2.du)).norm_fro() <= tol);
            prop_assert!((&t12.dv - &(&t1.dv + &t2.dv)).norm_fro() <= tol);
            let ds: Vec<f64> = t1.ds.values().iter().zip(t2.ds.values()).map(|(x, y)| x + y).collect();
            for (x, y) in t12.ds.values().iter().zip(ds) {
                prop_assert!((x - y).abs() <= tol);
            }
        }
    }
}
