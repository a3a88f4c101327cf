//! Recovery channels from a subsystem `B` to `B ∪ C`, built from a bipartite
//! state on `B ∪ C`.
//!
//! The base form is the Petz map
//! `R(X) = ρ_BC^{1/2} (ρ_B^{-1/2} X ρ_B^{-1/2} ⊗ I_C) ρ_BC^{1/2}`.
//! The rotated variant inserts imaginary exponents `±it/2` on the outer and
//! inner powers; the averaged variant integrates rotated maps against
//! `β₀(t) = (π/2)(cosh(πt) + 1)^{-1}`, discretized by the trapezoid rule.
//!
//! Inputs that leak off the support of `ρ_B` are routed to `ρ_BC` wholesale:
//! `R(X) += Tr[(I - P_B) X] · ρ_BC` with `P_B` the support projector. This
//! keeps the channel trace preserving when marginals are rank deficient.
//!
//! Channels are held as operational recipes (spectral data plus the formula),
//! not as materialized superoperators; the Choi matrix is only formed for
//! certification at small dimension.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::measures::{cmi_with_cutoff, fidelity_with_cutoff};
use crate::spectral::{complex_power, SpectralDecomposition};
use crate::state::{
    embed_with_identity, local_sandwich, partial_trace_mat, tensor_mats, CMatrix, LocalState,
    SiteId,
};
use crate::{Error, Result, DEFAULT_CUTOFF};

/// Which member of the recovery family to use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RecoveryKind {
    /// Plain Petz map; exact at zero conditional mutual information.
    Petz,
    /// Single rotated map with rotation parameter `t`.
    Rotated(f64),
    /// Trapezoid average of rotated maps over `[-half_width, half_width]`
    /// with `nodes` quadrature points, weighted by `β₀`.
    Averaged { nodes: usize, half_width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub kind: RecoveryKind,
    /// Relative eigenvalue cutoff for all spectral functions.
    pub cutoff: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            kind: RecoveryKind::Petz,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl RecoveryConfig {
    pub fn petz() -> Self {
        Self::default()
    }

    pub fn rotated(t: f64) -> Self {
        Self {
            kind: RecoveryKind::Rotated(t),
            ..Self::default()
        }
    }

    pub fn averaged(nodes: usize, half_width: f64) -> Self {
        Self {
            kind: RecoveryKind::Averaged { nodes, half_width },
            ..Self::default()
        }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "cutoff must lie in (0,1), got {}",
                self.cutoff
            )));
        }
        if let RecoveryKind::Averaged { nodes, half_width } = self.kind {
            if nodes < 3 || nodes % 2 == 0 {
                return Err(Error::InvalidSpec(format!(
                    "averaged map needs an odd node count >= 3, got {nodes}"
                )));
            }
            if half_width <= 0.0 {
                return Err(Error::InvalidSpec(
                    "averaged map needs a positive truncation".into(),
                ));
            }
        }
        Ok(())
    }

    /// Quadrature nodes `(t, weight)`; weights sum to one.
    fn nodes(&self) -> Vec<(f64, f64)> {
        match self.kind {
            RecoveryKind::Petz => vec![(0.0, 1.0)],
            RecoveryKind::Rotated(t) => vec![(t, 1.0)],
            RecoveryKind::Averaged { nodes, half_width } => {
                let k = nodes;
                let h = 2.0 * half_width / (k - 1) as f64;
                let beta0 = |t: f64| {
                    std::f64::consts::FRAC_PI_2 / ((std::f64::consts::PI * t).cosh() + 1.0)
                };
                let mut pts: Vec<(f64, f64)> = (0..k)
                    .map(|i| {
                        let t = -half_width + i as f64 * h;
                        let trap = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                        (t, beta0(t) * trap * h)
                    })
                    .collect();
                let total: f64 = pts.iter().map(|(_, w)| w).sum();
                for p in &mut pts {
                    p.1 /= total;
                }
                pts
            }
        }
    }
}

/// A completely positive trace preserving channel from operators on `B` to
/// operators on `B ∪ C`, acting as the identity on any spectator sites.
#[derive(Clone, Debug)]
pub struct RecoveryMap {
    b_sites: Vec<SiteId>,
    b_dims: Vec<usize>,
    c_sites: Vec<SiteId>,
    c_dims: Vec<usize>,
    bc_state: LocalState,
    b_spec: Option<SpectralDecomposition>,
    bc_spec: SpectralDecomposition,
    config: RecoveryConfig,
}

/// Builds the recovery channel determined by `rho_bc` and the bipartition
/// `(b, c)` of its support. `b` may be empty, in which case the channel
/// simply adjoins `ρ_C`; `c` must be nonempty.
pub fn build_recovery(
    rho_bc: &LocalState,
    b: &[SiteId],
    c: &[SiteId],
    cfg: RecoveryConfig,
) -> Result<RecoveryMap> {
    cfg.validate()?;
    if c.is_empty() {
        return Err(Error::InvalidSubset("C must be nonempty".into()));
    }
    let mut union: Vec<SiteId> = b.iter().chain(c).copied().collect();
    let total = union.len();
    union.sort_unstable();
    union.dedup();
    let mut supp = rho_bc.support().to_vec();
    supp.sort_unstable();
    if union.len() != total || union != supp {
        return Err(Error::InvalidSubset(
            "B and C must partition the support of the base state".into(),
        ));
    }
    let bc_state = rho_bc.canonical();
    let bc_spec = SpectralDecomposition::new(bc_state.matrix())?;
    if bc_spec.rank(cfg.cutoff) == 0 {
        return Err(Error::RankZeroBase);
    }
    let mut b_sorted = b.to_vec();
    b_sorted.sort_unstable();
    let mut c_sorted = c.to_vec();
    c_sorted.sort_unstable();
    let b_dims: Vec<usize> = b_sorted
        .iter()
        .map(|s| bc_state.dims()[bc_state.position_of(*s).unwrap()])
        .collect();
    let c_dims: Vec<usize> = c_sorted
        .iter()
        .map(|s| bc_state.dims()[bc_state.position_of(*s).unwrap()])
        .collect();
    let b_spec = if b_sorted.is_empty() {
        None
    } else {
        let rho_b = bc_state.reduce_to(&b_sorted)?;
        Some(SpectralDecomposition::new(rho_b.matrix())?)
    };
    Ok(RecoveryMap {
        b_sites: b_sorted,
        b_dims,
        c_sites: c_sorted,
        c_dims,
        bc_state,
        b_spec,
        bc_spec,
        config: cfg,
    })
}

impl RecoveryMap {
    pub fn b_sites(&self) -> &[SiteId] {
        &self.b_sites
    }

    pub fn c_sites(&self) -> &[SiteId] {
        &self.c_sites
    }

    pub fn base_state(&self) -> &LocalState {
        &self.bc_state
    }

    pub fn config(&self) -> &RecoveryConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.b_dims.iter().product()
    }

    pub fn output_dim(&self) -> usize {
        self.bc_state.dim()
    }

    /// Applies the channel to a state whose support contains `B` and is
    /// disjoint from `C`; the channel acts as the identity elsewhere.
    pub fn apply(&self, s: &LocalState) -> Result<LocalState> {
        for &site in &self.b_sites {
            if !s.contains(site) {
                return Err(Error::ExtensionDomain(format!(
                    "input lacks conditioning site {site}"
                )));
            }
        }
        for &site in &self.c_sites {
            if s.contains(site) {
                return Err(Error::ExtensionDomain(format!(
                    "input already contains target site {site}"
                )));
            }
        }
        let sc = s.canonical();
        let (sites, dims, mat) = self.apply_raw(sc.matrix(), sc.support(), sc.dims());
        LocalState::from_parts(sites, dims, mat)
    }

    /// Raw linear action on an arbitrary operator whose site list is
    /// canonical; used by [`Self::apply`] and by the Choi certification.
    pub(crate) fn apply_raw(
        &self,
        x: &CMatrix,
        sites: &[SiteId],
        dims: &[usize],
    ) -> (Vec<SiteId>, Vec<usize>, CMatrix) {
        let cutoff = self.config.cutoff;
        // Degenerate conditioning: adjoin rho_BC (= rho_C when B is empty).
        if self.b_sites.is_empty() {
            return tensor_mats(
                x,
                sites,
                dims,
                self.bc_state.matrix(),
                self.bc_state.support(),
                self.bc_state.dims(),
            );
        }
        let b_pos: Vec<usize> = self
            .b_sites
            .iter()
            .map(|b| sites.iter().position(|s| s == b).unwrap())
            .collect();
        let b_spec = self.b_spec.as_ref().unwrap();
        let mut accum: Option<CMatrix> = None;
        let mut merged: Option<(Vec<SiteId>, Vec<usize>)> = None;
        for (t, w) in self.config.nodes() {
            // rho_B^{-(1+it)/2} X rho_B^{-(1-it)/2}
            let inner = b_spec.map_complex(complex_power(-0.5, -t / 2.0), cutoff);
            let y = local_sandwich(x, &inner, dims, &b_pos);
            // ⊗ I_C
            let (sites2, dims2, y2) =
                embed_with_identity(&y, sites, dims, &self.c_sites, &self.c_dims);
            // rho_BC^{(1+it)/2} (...) rho_BC^{(1-it)/2}
            let bc_pos: Vec<usize> = self
                .bc_state
                .support()
                .iter()
                .map(|b| sites2.iter().position(|s| s == b).unwrap())
                .collect();
            let outer = self.bc_spec.map_complex(complex_power(0.5, t / 2.0), cutoff);
            let z = local_sandwich(&y2, &outer, &dims2, &bc_pos);
            match &mut accum {
                Some(a) => *a += z.scale(w),
                None => {
                    accum = Some(z.scale(w));
                    merged = Some((sites2, dims2));
                }
            }
        }
        let (sites2, dims2) = merged.unwrap();
        let mut out = accum.unwrap();

        // Off-support completion: Tr_B[(I - P_B) X (I - P_B)] ⊗ rho_BC.
        let d_b: usize = self.b_dims.iter().product();
        if b_spec.rank(cutoff) < d_b {
            let p = b_spec.support_projector(cutoff);
            let q = CMatrix::identity(d_b, d_b) - p;
            let xq = local_sandwich(x, &q, dims, &b_pos);
            if sites.len() == self.b_sites.len() {
                // No spectators: the completion is a scalar times rho_BC.
                let leak: Complex64 = xq.diagonal().iter().sum();
                out += self.bc_state.matrix().map(|z| z * leak);
            } else {
                let keep_pos: Vec<usize> =
                    (0..sites.len()).filter(|p| !b_pos.contains(p)).collect();
                let spect_sites: Vec<SiteId> = keep_pos.iter().map(|&p| sites[p]).collect();
                let spect_dims: Vec<usize> = keep_pos.iter().map(|&p| dims[p]).collect();
                let tq = partial_trace_mat(&xq, dims, &keep_pos);
                let (_, _, term) = tensor_mats(
                    &tq,
                    &spect_sites,
                    &spect_dims,
                    self.bc_state.matrix(),
                    self.bc_state.support(),
                    self.bc_state.dims(),
                );
                out += term;
            }
        }
        (sites2, dims2, out)
    }

    /// Normalized Choi matrix `(Λ ⊗ I)(|Ω⟩⟨Ω|)` of the channel restricted to
    /// inputs on `B` (no spectators), with `|Ω⟩` the normalized maximally
    /// entangled state. Dimension is `dim(BC) · dim(B)`.
    pub fn choi(&self) -> CMatrix {
        let d_b = self.input_dim();
        let d_out = self.output_dim();
        let dim = d_b * d_out;
        let mut choi = CMatrix::zeros(dim, dim);
        for i in 0..d_b {
            for j in 0..d_b {
                let mut unit = CMatrix::zeros(d_b, d_b);
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let (_, _, block) = self.apply_raw(&unit, &self.b_sites, &self.b_dims);
                for o in 0..d_out {
                    for op in 0..d_out {
                        choi[(o * d_b + i, op * d_b + j)] = block[(o, op)] / d_b as f64;
                    }
                }
            }
        }
        choi
    }

    /// Certification data: minimum Choi eigenvalue (complete positivity) and
    /// the worst trace-preservation deviation over a basis of inputs.
    pub fn cptp_check(&self) -> Result<CptpReport> {
        let d_b = self.input_dim();
        let mut tp_dev = 0.0f64;
        for i in 0..d_b {
            for j in 0..d_b {
                let mut unit = CMatrix::zeros(d_b, d_b);
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let (_, _, block) = self.apply_raw(&unit, &self.b_sites, &self.b_dims);
                let tr: Complex64 = block.diagonal().iter().sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                tp_dev = tp_dev.max((tr.re - expect).hypot(tr.im));
            }
        }
        let choi = self.choi();
        let spec = SpectralDecomposition::new(&choi)?;
        Ok(CptpReport {
            choi_min_eigenvalue: spec.min_eigenvalue(),
            tp_deviation: tp_dev,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CptpReport {
    pub choi_min_eigenvalue: f64,
    pub tp_deviation: f64,
}

/// Evaluates the fidelity side of the recovery bound together with the
/// conditional mutual information: returns
/// `(-2 ln F(ρ_ABC, (I_A ⊗ Φ)(ρ_AB)), I(A:C|B))` for the channel `Φ` built
/// from `ρ_BC` under `cfg`. For the averaged family with adequate
/// quadrature, the first component does not exceed the second (up to
/// numerical slack); for the other kinds the gap is only reported.
pub fn recovery_fidelity_gap(
    rho_abc: &LocalState,
    a: &[SiteId],
    b: &[SiteId],
    c: &[SiteId],
    cfg: RecoveryConfig,
) -> Result<(f64, f64)> {
    let mut all: Vec<SiteId> = a.iter().chain(b).chain(c).copied().collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    let mut supp = rho_abc.support().to_vec();
    supp.sort_unstable();
    if all.len() != total || all != supp {
        return Err(Error::InvalidSubset(
            "A, B, C must partition the support".into(),
        ));
    }
    let mutual = cmi_with_cutoff(rho_abc, a, b, c, cfg.cutoff)?;
    let mut bc: Vec<SiteId> = b.iter().chain(c).copied().collect();
    bc.sort_unstable();
    let mut ab: Vec<SiteId> = a.iter().chain(b).copied().collect();
    ab.sort_unstable();
    let rho_bc = rho_abc.reduce_to(&bc)?;
    let rho_ab = rho_abc.reduce_to(&ab)?;
    let map = build_recovery(&rho_bc, b, c, cfg)?;
    let recovered = map.apply(&rho_ab)?;
    let f = fidelity_with_cutoff(rho_abc, &recovered, cfg.cutoff)?;
    let bound_lhs = -2.0 * f.max(f64::MIN_POSITIVE).ln();
    Ok((bound_lhs, mutual))
}
