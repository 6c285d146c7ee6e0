//! Reproducible random test matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{orthonormalize, CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum SeedKind {
    ComplexGaussian,
    RealGaussian,
    /// `A = Q1 diag(sigma) Q2†` with Haar-distributed semi-unitary factors.
    /// Missing trailing values are zero.
    PrescribedSpectrum(Vec<f64>),
    /// Leading pair of singular values separated by relative gap `gap`, the
    /// rest well separated below them.
    NearDegenerate {
        gap: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeed {
    pub seed: u64,
    pub kind: SeedKind,
}

impl MatrixSeed {
    pub fn new(seed: u64, kind: SeedKind) -> Self {
        Self { seed, kind }
    }

    pub fn complex(seed: u64) -> Self {
        Self::new(seed, SeedKind::ComplexGaussian)
    }

    pub fn real(seed: u64) -> Self {
        Self::new(seed, SeedKind::RealGaussian)
    }

    pub fn prescribed(seed: u64, spectrum: Vec<f64>) -> Self {
        Self::new(seed, SeedKind::PrescribedSpectrum(spectrum))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| complex_normal(rng))
}

pub(crate) fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> CMat {
    CMat::from_fn(n, m, |_, _| C64::new(rng.sample(StandardNormal), 0.0))
}

/// `n x k` matrix with orthonormal columns, the leading columns of a Haar
/// unitary: Gram-Schmidt on a complex Gaussian matrix, whose triangular
/// factor has a positive real diagonal.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMat {
    assert!(k <= n);
    loop {
        let g = complex_gaussian(rng, n, k);
        if let Ok(q) = orthonormalize(&g) {
            return q;
        }
    }
}

/// Matrix with prescribed singular values, `sigma.len() <= min(n, m)`.
pub fn with_singular_values<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, sigma: &[f64]) -> CMat {
    let r = n.min(m);
    let mut s = sigma.to_vec();
    s.resize(r, 0.0);
    let q1 = haar_isometry(rng, n, r);
    let q2 = haar_isometry(rng, m, r);
    &q1.scale_cols(&s) * &q2.adjoint()
}

fn near_degenerate_spectrum(r: usize, gap: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(r);
    s.push(1.0);
    if r > 1 {
        s.push(1.0 - gap);
    }
    let mut next = 0.5;
    while s.len() < r {
        s.push(next);
        next *= 0.7;
    }
    s
}

pub fn gen_matrix(seed: &MatrixSeed, n: usize, m: usize) -> Result<CMat> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimensions(format!(
            "generated matrices need n, m >= 1, got {n}x{m}"
        )));
    }
    let mut rng = seed.rng();
    match &seed.kind {
        SeedKind::ComplexGaussian => Ok(complex_gaussian(&mut rng, n, m)),
        SeedKind::RealGaussian => Ok(real_gaussian(&mut rng, n, m)),
        SeedKind::PrescribedSpectrum(sigma) => {
            if sigma.len() > n.min(m) {
                return Err(Error::InvalidDimensions(format!(
                    "{} singular values requested for a {n}x{m} matrix",
                    sigma.len()
                )));
            }
            if sigma.iter().any(|&s| !s.is_finite() || s < 0.0) {
                return Err(Error::InvalidDimensions(
                    "prescribed singular values must be finite and nonnegative".into(),
                ));
            }
            Ok(with_singular_values(&mut rng, n, m, sigma))
        }
        SeedKind::NearDegenerate { gap } => {
            if !(*gap > 0.0 && *gap < 0.5) {
                return Err(Error::InvalidDimensions(format!(
                    "near-degenerate gap must lie in (0, 0.5), got {gap}"
                )));
            }
            let sigma = near_degenerate_spectrum(n.min(m), *gap);
            Ok(with_singular_values(&mut rng, n, m, &sigma))
        }
    }
}
