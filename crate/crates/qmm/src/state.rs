//! Dense Hermitian operators on multi-site registers.
//!
//! A [`LocalState`] is a density operator together with its support: an
//! ordered list of lattice sites with per-site dimensions. The canonical
//! matrix representation indexes basis states in row-major site order, with
//! sites sorted by ascending [`SiteId`]. Binary operations align operands to
//! a common order implicitly.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SANITIZE_TOL, STRICT_TOL};

pub type CMatrix = DMatrix<Complex64>;

/// Integer label of a lattice vertex. Total order is the integer order; the
/// canonical matrix representation of a state lists sites ascending.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A density operator on an explicit set of sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalState {
    support: Vec<SiteId>,
    dims: Vec<usize>,
    mat: CMatrix,
}

impl LocalState {
    /// Builds a state, checking Hermiticity and unit trace against the strict
    /// tolerance. Positivity is not checked here (it needs a full
    /// eigendecomposition); use [`LocalState::validate`] where it matters.
    pub fn new(support: Vec<SiteId>, dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let s = Self::from_parts(support, dims, mat)?;
        let herm = s.herm_deviation();
        if herm > STRICT_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = s.trace();
        let tr_dev = (tr.re - 1.0).hypot(tr.im);
        if tr_dev > STRICT_TOL {
            return Err(Error::InvalidTrace(tr_dev));
        }
        Ok(s)
    }

    /// Structural construction: shape checks only, no numeric validation.
    pub(crate) fn from_parts(support: Vec<SiteId>, dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        if support.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: dims.len(),
            });
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::SupportCollision(
                seen.windows(2).find(|w| w[0] == w[1]).unwrap()[0],
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let dim: usize = dims.iter().product();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows(),
            });
        }
        Ok(Self { support, dims, mat })
    }

    /// Accepts a raw matrix with mild violations and repairs them: the matrix
    /// is symmetrized, negative eigenvalues are clipped to zero and the trace
    /// is renormalized. Violations beyond [`SANITIZE_TOL`] are rejected
    /// rather than silently repaired.
    pub fn sanitize(support: Vec<SiteId>, dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let raw = Self::from_parts(support, dims, mat)?;
        let herm = raw.herm_deviation();
        if herm > SANITIZE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = raw.trace();
        let tr_dev = (tr.re - 1.0).hypot(tr.im);
        if tr_dev > SANITIZE_TOL {
            return Err(Error::InvalidTrace(tr_dev));
        }
        let sym = (&raw.mat + raw.mat.adjoint()).scale(0.5);
        let spec = crate::spectral::SpectralDecomposition::new(&sym)?;
        if let Some(&min) = spec
            .eigenvalues()
            .iter()
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            if min < -SANITIZE_TOL {
                return Err(Error::NotPositive(min));
            }
        }
        let clipped: Vec<f64> = spec.eigenvalues().iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::RankZeroBase);
        }
        let mat = spec.rebuild_real(clipped.iter().map(|&l| l / total));
        Self::from_parts(raw.support, raw.dims, mat)
    }

    /// Full validation: Hermiticity, unit trace and positivity at the strict
    /// tolerance. Costs an eigendecomposition.
    pub fn validate(&self) -> Result<()> {
        let herm = self.herm_deviation();
        if herm > STRICT_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        let tr_dev = (tr.re - 1.0).hypot(tr.im);
        if tr_dev > STRICT_TOL {
            return Err(Error::InvalidTrace(tr_dev));
        }
        let sym = (&self.mat + self.mat.adjoint()).scale(0.5);
        let spec = crate::spectral::SpectralDecomposition::new(&sym)?;
        let min = spec
            .eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -STRICT_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    /// Pure state from an amplitude vector in the canonical basis order.
    pub fn pure(support: Vec<SiteId>, dims: Vec<usize>, amplitudes: &[Complex64]) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::RankZeroBase);
        }
        let mut mat = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = amplitudes[i] * amplitudes[j].conj() / norm2;
            }
        }
        Self::from_parts(support, dims, mat)
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(support: Vec<SiteId>, dims: Vec<usize>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        let mat = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
        Self::from_parts(support, dims, mat)
    }

    /// Diagonal (classical) state from a probability vector.
    pub fn from_probabilities(support: Vec<SiteId>, dims: Vec<usize>, probs: &[f64]) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if probs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: probs.len(),
            });
        }
        let mut mat = CMatrix::zeros(dim, dim);
        for (i, &p) in probs.iter().enumerate() {
            mat[(i, i)] = Complex64::new(p, 0.0);
        }
        Self::from_parts(support, dims, mat)
    }

    pub fn support(&self) -> &[SiteId] {
        &self.support
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_sites(&self) -> usize {
        self.support.len()
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().iter().sum()
    }

    pub fn herm_deviation(&self) -> f64 {
        let adj = self.mat.adjoint();
        self.mat
            .iter()
            .zip(adj.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.support.contains(&site)
    }

    pub fn position_of(&self, site: SiteId) -> Option<usize> {
        self.support.iter().position(|&s| s == site)
    }

    pub fn is_canonical(&self) -> bool {
        self.support.windows(2).all(|w| w[0] < w[1])
    }

    /// Returns the state with sites sorted ascending (a no-op if already
    /// canonical).
    pub fn canonical(&self) -> Self {
        if self.is_canonical() {
            return self.clone();
        }
        let mut order = self.support.clone();
        order.sort_unstable();
        self.align(&order).expect("sorting the support is a permutation")
    }

    /// Permutes the matrix representation to the given site order, which must
    /// be a permutation of the support.
    pub fn align(&self, order: &[SiteId]) -> Result<Self> {
        if order.len() != self.support.len() {
            return Err(Error::InvalidSubset(
                "order is not a permutation of the support".into(),
            ));
        }
        // perm[new_pos] = old_pos
        let mut perm = Vec::with_capacity(order.len());
        for &site in order {
            match self.position_of(site) {
                Some(p) if !perm.contains(&p) => perm.push(p),
                _ => {
                    return Err(Error::InvalidSubset(
                        "order is not a permutation of the support".into(),
                    ))
                }
            }
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let map = index_permutation(&self.dims, &new_dims, &perm);
        let dim = self.dim();
        let mut mat = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            let oj = map[j];
            for i in 0..dim {
                mat[(i, j)] = self.mat[(map[i], oj)];
            }
        }
        Self::from_parts(order.to_vec(), new_dims, mat)
    }

    /// Tensor product; supports must be disjoint. The result is canonical.
    pub fn tensor(&self, other: &LocalState) -> Result<LocalState> {
        for &s in &other.support {
            if self.contains(s) {
                return Err(Error::SupportCollision(s));
            }
        }
        let a = self.canonical();
        let b = other.canonical();
        let (support, dims, mat) = tensor_mats(&a.mat, &a.support, &a.dims, &b.mat, &b.support, &b.dims);
        LocalState::from_parts(support, dims, mat)
    }

    /// Traces out the given sites. `drop` must be a proper nonempty subset of
    /// the support.
    pub fn partial_trace(&self, drop: &[SiteId]) -> Result<LocalState> {
        if drop.is_empty() {
            return Ok(self.clone());
        }
        let mut drop_pos = Vec::with_capacity(drop.len());
        for &site in drop {
            match self.position_of(site) {
                Some(p) if !drop_pos.contains(&p) => drop_pos.push(p),
                Some(_) => {
                    return Err(Error::InvalidSubset(format!(
                        "site {site} listed twice in drop set"
                    )))
                }
                None => return Err(Error::SiteNotInSupport(site)),
            }
        }
        if drop_pos.len() == self.support.len() {
            return Err(Error::InvalidSubset(
                "cannot trace out the entire support; take the scalar trace instead".into(),
            ));
        }
        drop_pos.sort_unstable();
        let keep_pos: Vec<usize> =
            (0..self.support.len()).filter(|p| !drop_pos.contains(p)).collect();
        let support: Vec<SiteId> = keep_pos.iter().map(|&p| self.support[p]).collect();
        let dims: Vec<usize> = keep_pos.iter().map(|&p| self.dims[p]).collect();
        let mat = partial_trace_mat(&self.mat, &self.dims, &keep_pos);
        LocalState::from_parts(support, dims, mat)
    }

    /// Reduction onto `keep` (complement of [`LocalState::partial_trace`]);
    /// the result is canonical.
    pub fn reduce_to(&self, keep: &[SiteId]) -> Result<LocalState> {
        for &site in keep {
            if !self.contains(site) {
                return Err(Error::SiteNotInSupport(site));
            }
        }
        let drop: Vec<SiteId> = self
            .support
            .iter()
            .copied()
            .filter(|s| !keep.contains(s))
            .collect();
        let red = if drop.is_empty() { self.clone() } else { self.partial_trace(&drop)? };
        Ok(red.canonical())
    }

    /// Convex mixture with the maximally mixed state on the same support.
    pub fn depolarize(&self, p: f64) -> LocalState {
        let dim = self.dim();
        let mut mat = self.mat.scale(1.0 - p);
        for i in 0..dim {
            mat[(i, i)] += Complex64::new(p / dim as f64, 0.0);
        }
        LocalState {
            support: self.support.clone(),
            dims: self.dims.clone(),
            mat,
        }
    }

    /// Max-abs elementwise distance; both operands aligned first.
    pub fn max_abs_diff(&self, other: &LocalState) -> Result<f64> {
        let b = other.align(&self.support)?;
        Ok(self
            .mat
            .iter()
            .zip(b.mat.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }
}

// ---------------------------------------------------------------------------
// Raw index machinery shared by the operator algebra and the channel code.
// All matrices use nalgebra's column-major storage; composite basis indices
// are row-major over the site list (first site most significant).
// ---------------------------------------------------------------------------

/// Row-major strides: `strides[k] = prod(dims[k+1..])`.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For a subset of site positions, the table mapping `(t, r) -> full index`
/// where `t` runs row-major over the target sites and `r` over the rest.
/// `table[t * rest_dim + r]` is the full composite index.
pub(crate) struct EmbedTable {
    pub target_dim: usize,
    pub rest_dim: usize,
    pub table: Vec<usize>,
}

pub(crate) fn embed_table(dims: &[usize], targets: &[usize]) -> EmbedTable {
    debug_assert!(targets.windows(2).all(|w| w[0] < w[1]));
    let full_dim: usize = dims.iter().product();
    let target_dim: usize = targets.iter().map(|&p| dims[p]).product();
    let rest_dim = full_dim / target_dim.max(1);
    let mut table = vec![0usize; full_dim];
    let mut digits = vec![0usize; dims.len()];
    let is_target: Vec<bool> = {
        let mut v = vec![false; dims.len()];
        for &p in targets {
            v[p] = true;
        }
        v
    };
    for i in 0..full_dim {
        let mut rem = i;
        for (k, &d) in dims.iter().enumerate() {
            let s: usize = dims[k + 1..].iter().product();
            digits[k] = rem / s;
            rem %= s;
            let _ = d;
        }
        let mut t = 0usize;
        let mut r = 0usize;
        for (k, &dig) in digits.iter().enumerate() {
            if is_target[k] {
                t = t * dims[k] + dig;
            } else {
                r = r * dims[k] + dig;
            }
        }
        table[t * rest_dim + r] = i;
    }
    EmbedTable {
        target_dim,
        rest_dim,
        table,
    }
}

/// `(M ⊗ I_rest) · X` where `M` acts on the sites at `targets`.
pub(crate) fn local_mult_left(x: &CMatrix, m: &CMatrix, dims: &[usize], targets: &[usize]) -> CMatrix {
    let et = embed_table(dims, targets);
    let (k, rest) = (et.target_dim, et.rest_dim);
    debug_assert_eq!(m.nrows(), k);
    let d = x.nrows();
    let mut out = CMatrix::zeros(d, d);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    // Row-major copy of M for a cache-friendly inner loop.
    let mut mrow = vec![Complex64::default(); k * k];
    for t in 0..k {
        for tp in 0..k {
            mrow[t * k + tp] = m[(t, tp)];
        }
    }
    for j in 0..d {
        let ci = &xs[j * d..(j + 1) * d];
        let co = &mut os[j * d..(j + 1) * d];
        for r in 0..rest {
            for t in 0..k {
                let mut acc = Complex64::default();
                for tp in 0..k {
                    let c = mrow[t * k + tp];
                    if c != Complex64::default() {
                        acc += c * ci[et.table[tp * rest + r]];
                    }
                }
                co[et.table[t * rest + r]] = acc;
            }
        }
    }
    out
}

/// `X · (M ⊗ I_rest)` where `M` acts on the sites at `targets`.
pub(crate) fn local_mult_right(x: &CMatrix, m: &CMatrix, dims: &[usize], targets: &[usize]) -> CMatrix {
    let et = embed_table(dims, targets);
    let (k, rest) = (et.target_dim, et.rest_dim);
    debug_assert_eq!(m.nrows(), k);
    let d = x.nrows();
    let mut out = CMatrix::zeros(d, d);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for r in 0..rest {
        for t in 0..k {
            let jo = et.table[t * rest + r];
            let co = &mut os[jo * d..(jo + 1) * d];
            for tp in 0..k {
                let c = m[(tp, t)];
                if c == Complex64::default() {
                    continue;
                }
                let ji = et.table[tp * rest + r];
                let ci = &xs[ji * d..(ji + 1) * d];
                for (o, i) in co.iter_mut().zip(ci.iter()) {
                    *o += c * i;
                }
            }
        }
    }
    out
}

/// `(S ⊗ I) X (S† ⊗ I)` with `S` acting on the sites at `targets`.
pub(crate) fn local_sandwich(x: &CMatrix, s: &CMatrix, dims: &[usize], targets: &[usize]) -> CMatrix {
    let left = local_mult_left(x, s, dims, targets);
    local_mult_right(&left, &s.adjoint(), dims, targets)
}

/// Partial trace keeping the site positions in `keep_pos` (ascending).
pub(crate) fn partial_trace_mat(x: &CMatrix, dims: &[usize], keep_pos: &[usize]) -> CMatrix {
    let et = embed_table(dims, keep_pos);
    let (dk, dd) = (et.target_dim, et.rest_dim);
    let d = x.nrows();
    let xs = x.as_slice();
    let mut out = CMatrix::zeros(dk, dk);
    for jk in 0..dk {
        for e in 0..dd {
            let cj = et.table[jk * dd + e];
            let col = &xs[cj * d..(cj + 1) * d];
            for ik in 0..dk {
                out[(ik, jk)] += col[et.table[ik * dd + e]];
            }
        }
    }
    out
}

/// Index map for a site permutation: `map[new_index] = old_index` where the
/// new composite index is row-major over `new_dims` and `perm[new_pos]` gives
/// the old position of each site.
fn index_permutation(old_dims: &[usize], new_dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let old_strides = strides(old_dims);
    let dim: usize = old_dims.iter().product();
    let mut map = vec![0usize; dim];
    let n = new_dims.len();
    let mut digits = vec![0usize; n];
    for (i, slot) in map.iter_mut().enumerate() {
        let mut rem = i;
        for k in 0..n {
            let s: usize = new_dims[k + 1..].iter().product();
            digits[k] = rem / s;
            rem %= s;
        }
        let mut old = 0usize;
        for k in 0..n {
            old += digits[k] * old_strides[perm[k]];
        }
        *slot = old;
    }
    map
}

/// Tensor product of two canonical registers, interleaved into the merged
/// ascending site order.
pub(crate) fn tensor_mats(
    a: &CMatrix,
    a_sites: &[SiteId],
    a_dims: &[usize],
    b: &CMatrix,
    b_sites: &[SiteId],
    b_dims: &[usize],
) -> (Vec<SiteId>, Vec<usize>, CMatrix) {
    // Merge the two ascending site lists, tracking origin.
    let mut support = Vec::with_capacity(a_sites.len() + b_sites.len());
    let mut dims = Vec::with_capacity(support.capacity());
    let mut from_a = Vec::with_capacity(support.capacity());
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < a_sites.len() || ib < b_sites.len() {
        let take_a = match (a_sites.get(ia), b_sites.get(ib)) {
            (Some(&x), Some(&y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        };
        if take_a {
            support.push(a_sites[ia]);
            dims.push(a_dims[ia]);
            from_a.push(true);
            ia += 1;
        } else {
            support.push(b_sites[ib]);
            dims.push(b_dims[ib]);
            from_a.push(false);
            ib += 1;
        }
    }
    let dim: usize = dims.iter().product();
    let mut ia_of = vec![0usize; dim];
    let mut ib_of = vec![0usize; dim];
    for i in 0..dim {
        let mut rem = i;
        let (mut va, mut vb) = (0usize, 0usize);
        for k in 0..dims.len() {
            let s: usize = dims[k + 1..].iter().product();
            let dig = rem / s;
            rem %= s;
            if from_a[k] {
                va = va * dims[k] + dig;
            } else {
                vb = vb * dims[k] + dig;
            }
        }
        ia_of[i] = va;
        ib_of[i] = vb;
    }
    let mut mat = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            mat[(i, j)] = a[(ia_of[i], ia_of[j])] * b[(ib_of[i], ib_of[j])];
        }
    }
    (support, dims, mat)
}

/// Embeds `X ⊗ I_C`: the operator on `x_sites` extended by the identity on
/// the (disjoint) sites `c_sites`, in merged canonical order.
pub(crate) fn embed_with_identity(
    x: &CMatrix,
    x_sites: &[SiteId],
    x_dims: &[usize],
    c_sites: &[SiteId],
    c_dims: &[usize],
) -> (Vec<SiteId>, Vec<usize>, CMatrix) {
    let dc: usize = c_dims.iter().product();
    let ident = CMatrix::identity(dc, dc);
    tensor_mats(x, x_sites, x_dims, &ident, c_sites, c_dims)
}


#[cfg(test)]
pub(crate) use tests::{ghz as test_ghz, ket as test_ket};
