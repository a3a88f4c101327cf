//! Hermitian eigendecompositions and spectral matrix functions.
//!
//! Eigenvalues below a relative cutoff are treated as exact zeros so that
//! logarithms and inverse powers follow the pseudo-inverse (on-support)
//! convention. Marginals of pure lattice states are rank-deficient, so this
//! convention is load-bearing throughout the recovery pipeline.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::state::CMatrix;
use crate::{Error, Result};

/// Hermiticity acceptance threshold for spectral inputs (relative to the
/// largest entry).
const SPECTRAL_HERM_TOL: f64 = 1e-8;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: CMatrix,
}

impl SpectralDecomposition {
    /// Decomposes `m`, which must be Hermitian within a small tolerance
    /// relative to its largest entry. The strictly upper/lower parts are
    /// averaged before the solve so the path is deterministic for fixed
    /// input bits.
    pub fn new(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let herm_dev = {
            let adj = m.adjoint();
            m.iter()
                .zip(adj.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        if herm_dev > SPECTRAL_HERM_TOL * scale {
            return Err(Error::NotHermitian(herm_dev));
        }
        let sym = (m + m.adjoint()).scale(0.5);
        let se = sym.symmetric_eigen();
        // Sort descending, permuting eigenvectors along.
        let n = se.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            vectors.set_column(new, &se.eigenvectors.column(old));
        }
        Ok(Self { eigenvalues, vectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `U diag(values) U†` for replacement eigenvalues (one per eigenvector).
    pub fn rebuild_real(&self, values: impl Iterator<Item = f64>) -> CMatrix {
        self.rebuild(values.map(|v| Complex64::new(v, 0.0)))
    }

    /// Complex-valued rebuild; used for the rotated powers where the
    /// "eigenvalues" carry phases.
    pub fn rebuild(&self, values: impl Iterator<Item = Complex64>) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.vectors.clone();
        for (k, v) in values.enumerate() {
            debug_assert!(k < n);
            let mut col = scaled.column_mut(k);
            for x in col.iter_mut() {
                *x *= v;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// Applies a real function to the spectrum with the on-support cutoff:
    /// eigenvalues at or below `cutoff * lambda_max` map to zero without
    /// passing through `f`.
    pub fn map_real(&self, f: impl Fn(f64) -> f64, cutoff: f64) -> CMatrix {
        let thresh = self.threshold(cutoff);
        self.rebuild_real(
            self.eigenvalues
                .iter()
                .map(move |&l| if l > thresh { f(l) } else { 0.0 }),
        )
    }

    /// Complex analogue of [`SpectralDecomposition::map_real`].
    pub fn map_complex(&self, f: impl Fn(f64) -> Complex64, cutoff: f64) -> CMatrix {
        let thresh = self.threshold(cutoff);
        self.rebuild(self.eigenvalues.iter().map(move |&l| {
            if l > thresh {
                f(l)
            } else {
                Complex64::default()
            }
        }))
    }

    /// Projector onto the eigenspaces above the cutoff (the support
    /// projector for a density matrix).
    pub fn support_projector(&self, cutoff: f64) -> CMatrix {
        self.map_real(|_| 1.0, cutoff)
    }

    /// Number of eigenvalues above the cutoff.
    pub fn rank(&self, cutoff: f64) -> usize {
        let thresh = self.threshold(cutoff);
        self.eigenvalues.iter().filter(|&&l| l > thresh).count()
    }

    fn threshold(&self, cutoff: f64) -> f64 {
        let lmax = self.max_eigenvalue().abs();
        cutoff * lmax
    }
}

/// `U f(Λ) U†` with the on-support cutoff convention. The input must be
/// Hermitian within tolerance.
pub fn spectral_transform(m: &CMatrix, f: impl Fn(f64) -> f64, cutoff: f64) -> Result<CMatrix> {
    Ok(SpectralDecomposition::new(m)?.map_real(f, cutoff))
}

/// The complex power `λ ↦ λ^{re + i·im}` on the positive support, zero
/// elsewhere. For Hermitian positive `ρ` this yields `ρ^{re + i·im}`
/// restricted to its support.
pub fn complex_power(re: f64, im: f64) -> impl Fn(f64) -> Complex64 {
    move |l: f64| {
        let ln = l.ln();
        let mag = (re * ln).exp();
        Complex64::new(mag * (im * ln).cos(), mag * (im * ln).sin())
    }
}

/// `sqrt(m)` on the support.
pub fn sqrt_psd(m: &CMatrix, cutoff: f64) -> Result<CMatrix> {
    spectral_transform(m, |l| l.max(0.0).sqrt(), cutoff)
}

#[allow(dead_code)]
pub(crate) fn identity_like(m: &CMatrix) -> DMatrix<Complex64> {
    CMatrix::identity(m.nrows(), m.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(vals: &[f64]) -> CMatrix {
        let n = vals.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in vals.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    #[test]
    fn identity_function_reproduces_input() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)],
        );
        let out = spectral_transform(&m, |l| l, 1e-12).unwrap();
        let err = (&out - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err:e}");
    }

    #[test]
    fn sqrt_of_diagonal() {
        let out = spectral_transform(&diag(&[4.0, 1.0]), |l| l.sqrt(), 1e-12).unwrap();
        assert!((out[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        assert!((out[(1, 1)] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_uses_support_convention() {
        // diag(4, 0) with x^{-1/2}: the zero eigenvalue maps to 0, not inf.
        let out = spectral_transform(&diag(&[4.0, 0.0]), |l| l.powf(-0.5), 1e-12).unwrap();
        assert!((out[(0, 0)] - c(0.5, 0.0)).norm() < 1e-12);
        assert!(out[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(spectral_transform(&m, |l| l, 1e-12).is_err());
    }

    #[test]
    fn reconstruction_and_unitarity() {
        use rand::RngExt;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 5, 8] {
            let g = CMatrix::from_fn(n, n, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let h = (&g + g.adjoint()).scale(0.5);
            let spec = SpectralDecomposition::new(&h).unwrap();
            let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let rec = spec.rebuild_real(spec.eigenvalues().iter().cloned());
            let err = (&rec - &h).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * scale.max(1.0), "reconstruction err {err:e}");
            let u = spec.eigenvectors();
            let gram = u.adjoint() * u;
            let id = CMatrix::identity(n, n);
            let uerr = (&gram - &id).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(uerr < 1e-10, "unitarity err {uerr:e}");
            // descending order
            assert!(spec.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn complex_power_matches_real_power_at_zero_rotation() {
        let f = complex_power(0.5, 0.0);
        for l in [0.1, 1.0, 7.5] {
            let z = f(l);
            // bitwise path check: exp(0.5 ln l) with cos(0)=1, sin(0)=0
            assert_eq!(z.re, (0.5 * l.ln()).exp());
            assert_eq!(z.im, 0.0);
        }
    }
}
