//! Entropic and metric functionals of density operators.
//!
//! Conventions: entropies are in nats (natural logarithm); the trace
//! distance is the Schatten-1 norm of the difference with no 1/2 factor; the
//! fidelity is `F(ρ,σ) = ‖ρ^{1/2} σ^{1/2}‖₁`.

use crate::spectral::SpectralDecomposition;
use crate::state::{CMatrix, LocalState, SiteId};
use crate::{Error, Result, DEFAULT_CUTOFF};

/// Von Neumann entropy `S(ρ) = -Tr(ρ ln ρ)` in nats. Eigenvalues below the
/// relative cutoff contribute zero.
pub fn entropy(s: &LocalState) -> Result<f64> {
    entropy_with_cutoff(s, DEFAULT_CUTOFF)
}

pub fn entropy_with_cutoff(s: &LocalState, cutoff: f64) -> Result<f64> {
    entropy_of_matrix(s.matrix(), cutoff)
}

pub(crate) fn entropy_of_matrix(m: &CMatrix, cutoff: f64) -> Result<f64> {
    let spec = SpectralDecomposition::new(m)?;
    let thresh = cutoff * spec.max_eigenvalue().abs();
    let mut acc = 0.0;
    for &l in spec.eigenvalues() {
        if l > thresh {
            acc -= l * l.ln();
        }
    }
    Ok(acc)
}

/// Conditional quantum mutual information
/// `I(A:C|B) = S(AB) + S(BC) - S(B) - S(ABC)`, each entropy computed on the
/// corresponding reduction of `s`. `B` may be empty (plain mutual
/// information); `A` and `C` must be nonempty and the three sets disjoint
/// subsets of the support.
pub fn cmi(s: &LocalState, a: &[SiteId], b: &[SiteId], c: &[SiteId]) -> Result<f64> {
    cmi_with_cutoff(s, a, b, c, DEFAULT_CUTOFF)
}

pub fn cmi_with_cutoff(
    s: &LocalState,
    a: &[SiteId],
    b: &[SiteId],
    c: &[SiteId],
    cutoff: f64,
) -> Result<f64> {
    if a.is_empty() || c.is_empty() {
        return Err(Error::InvalidSubset("A and C must be nonempty".into()));
    }
    for (name, set) in [("A", a), ("B", b), ("C", c)] {
        for &site in set {
            if !s.contains(site) {
                return Err(Error::InvalidSubset(format!(
                    "{name} contains site {site} outside the support"
                )));
            }
        }
    }
    let mut all: Vec<SiteId> = a.iter().chain(b).chain(c).copied().collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    if all.len() != total {
        return Err(Error::InvalidSubset("A, B, C must be disjoint".into()));
    }

    let union = |x: &[SiteId], y: &[SiteId]| -> Vec<SiteId> {
        let mut v: Vec<SiteId> = x.iter().chain(y).copied().collect();
        v.sort_unstable();
        v
    };
    let abc = s.reduce_to(&all)?;
    let s_abc = entropy_with_cutoff(&abc, cutoff)?;
    let s_ab = entropy_with_cutoff(&abc.reduce_to(&union(a, b))?, cutoff)?;
    let s_bc = entropy_with_cutoff(&abc.reduce_to(&union(b, c))?, cutoff)?;
    let s_b = if b.is_empty() {
        0.0
    } else {
        entropy_with_cutoff(&abc.reduce_to(&{
            let mut v = b.to_vec();
            v.sort_unstable();
            v
        })?, cutoff)?
    };
    Ok(s_ab + s_bc - s_b - s_abc)
}

/// Schatten-1 norm of `a - b` (no 1/2 factor). Supports must agree as sets;
/// operands are aligned to a common order internally.
pub fn trace_distance(a: &LocalState, b: &LocalState) -> Result<f64> {
    let mut sa: Vec<SiteId> = a.support().to_vec();
    let mut sb: Vec<SiteId> = b.support().to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(Error::SupportMismatch);
    }
    let ac = a.canonical();
    let bc = b.canonical();
    let diff = ac.matrix() - bc.matrix();
    trace_norm(&diff)
}

/// Schatten-1 norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub(crate) fn trace_norm(m: &CMatrix) -> Result<f64> {
    if m.iter().all(|z| z.norm() == 0.0) {
        return Ok(0.0);
    }
    let spec = SpectralDecomposition::new(m)?;
    Ok(spec.eigenvalues().iter().map(|l| l.abs()).sum())
}

/// Uhlmann fidelity `F(ρ,σ) = ‖ρ^{1/2} σ^{1/2}‖₁`, computed as
/// `Tr sqrt(σ^{1/2} ρ σ^{1/2})`.
pub fn fidelity(a: &LocalState, b: &LocalState) -> Result<f64> {
    fidelity_with_cutoff(a, b, DEFAULT_CUTOFF)
}

pub fn fidelity_with_cutoff(a: &LocalState, b: &LocalState, cutoff: f64) -> Result<f64> {
    let mut sa: Vec<SiteId> = a.support().to_vec();
    let mut sb: Vec<SiteId> = b.support().to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(Error::SupportMismatch);
    }
    let ac = a.canonical();
    let bc = b.canonical();
    let sqrt_b = crate::spectral::sqrt_psd(bc.matrix(), cutoff)?;
    let inner = &sqrt_b * ac.matrix() * &sqrt_b;
    let spec = SpectralDecomposition::new(&inner)?;
    Ok(spec
        .eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum())
}
