//! Seeded instance generators with known ground truth.
//!
//! Every generator returns a global state together with the marginal set
//! extracted from it, so the marginals are exactly consistent by
//! construction; the exact families additionally satisfy every local Markov
//! condition, making them ε ≈ 0 instances. A perturbation `p > 0`
//! depolarizes the stored (maximal) marginals only; nested marginals stay
//! derived, so the nested-consistency clause remains exact while genuine
//! pairwise gaps open up between sibling clusters.
//!
//! Instance families:
//!
//! - `classical_chain`: a vertex-level Markov chain distribution embedded
//!   diagonally.
//! - `ghz`: the d-ary GHZ state over all vertices (chain or grid).
//! - `cluster_state_1d`: the 1D graph state. Its geometry uses cell-granular
//!   adjacency ([`Geometry::chain_blocked`]): conditioning on single
//!   boundary vertices provably leaves a residual ln 2 of conditional
//!   mutual information for graph states, while whole-cell conditioning
//!   closes the Markov structure exactly.
//! - `sequential`: states generated by the recovery pipeline itself from a
//!   structured template — a classically bonded chain in 1D, independent
//!   full-rank row states in 2D. The template satisfies the Markov
//!   conditions exactly, and the returned global is the output of running
//!   the creation string, so reconstruction checks against these instances
//!   are not circular: the measured ε comes from the validator, not from
//!   the construction.
//! - `product`: independent random cell states.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{extract_marginals, Geometry, Layout, MarginalSet};
use crate::recovery::RecoveryConfig;
use crate::reconstruct::{string_1d, string_2d};
use crate::state::{CMatrix, LocalState, SiteId};
use crate::strings::evaluate;
use crate::{Error, Result};

/// Largest admissible global Hilbert-space dimension.
pub const MAX_GLOBAL_DIM: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    ClassicalChain,
    Ghz,
    ClusterState1d,
    Sequential,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub layout: Layout,
    /// Local dimension per vertex.
    pub d: usize,
    pub seed: u64,
    /// Depolarization strength applied to the stored marginals; must lie in
    /// `[0, 1)`.
    pub perturbation: f64,
}

impl InstanceSpec {
    pub fn chain(kind: InstanceKind, n: usize, d: usize, seed: u64) -> Self {
        Self {
            kind,
            layout: Layout::Chain { n },
            d,
            seed,
            perturbation: 0.0,
        }
    }

    pub fn hexgrid(kind: InstanceKind, n: usize, granularity: usize, d: usize, seed: u64) -> Self {
        Self {
            kind,
            layout: Layout::HexGrid { n, granularity },
            d,
            seed,
            perturbation: 0.0,
        }
    }

    pub fn with_perturbation(mut self, p: f64) -> Self {
        self.perturbation = p;
        self
    }
}

#[derive(Clone, Debug)]
pub struct GenOutput {
    /// The source global state (absent only for instance families that have
    /// none; every built-in family provides one).
    pub global: Option<LocalState>,
    pub marginals: MarginalSet,
}

/// Generates the instance described by `spec`.
pub fn gen(spec: &InstanceSpec) -> Result<GenOutput> {
    if !(0.0..1.0).contains(&spec.perturbation) {
        return Err(Error::InvalidSpec(format!(
            "perturbation must lie in [0,1), got {}",
            spec.perturbation
        )));
    }
    if spec.d < 2 {
        return Err(Error::InvalidSpec("local dimension must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (geometry, global) = match (spec.kind, spec.layout) {
        (InstanceKind::ClassicalChain, Layout::Chain { n }) => {
            let g = Geometry::chain(n, spec.d)?;
            guard_dim(&g)?;
            let global = classical_chain_global(&g, spec.d, &mut rng)?;
            (g, global)
        }
        (InstanceKind::Ghz, Layout::Chain { n }) => {
            let g = Geometry::chain(n, spec.d)?;
            guard_dim(&g)?;
            let global = ghz_global(&g, spec.d)?;
            (g, global)
        }
        (InstanceKind::Ghz, Layout::HexGrid { n, granularity }) => {
            let g = Geometry::hexgrid(n, spec.d, granularity)?;
            guard_dim(&g)?;
            let global = ghz_global(&g, spec.d)?;
            (g, global)
        }
        (InstanceKind::ClusterState1d, Layout::Chain { n }) => {
            if spec.d != 2 {
                return Err(Error::InvalidSpec(
                    "the 1D cluster state needs local dimension 2".into(),
                ));
            }
            let g = Geometry::chain_blocked(n, 2)?;
            guard_dim(&g)?;
            let global = cluster_state_global(n)?;
            (g, global)
        }
        (InstanceKind::Sequential, Layout::Chain { n }) => {
            let g = Geometry::chain(n, spec.d)?;
            guard_dim(&g)?;
            let template = bonded_chain_global(&g, spec.d, &mut rng)?;
            let template_ms = extract_marginals(&template, &g)?;
            let global = evaluate(
                &string_1d(n / 2)?,
                &template_ms,
                RecoveryConfig::petz(),
            )?;
            (g, global)
        }
        (InstanceKind::Sequential, Layout::HexGrid { n, granularity }) => {
            let g = Geometry::hexgrid(n, spec.d, granularity)?;
            guard_dim(&g)?;
            let template = row_product_global(&g, n, granularity, &mut rng)?;
            let template_ms = extract_marginals(&template, &g)?;
            let global = evaluate(&string_2d(n)?, &template_ms, RecoveryConfig::petz())?;
            (g, global)
        }
        (InstanceKind::Product, layout) => {
            let g = match layout {
                Layout::Chain { n } => Geometry::chain(n, spec.d)?,
                Layout::HexGrid { n, granularity } => {
                    Geometry::hexgrid(n, spec.d, granularity)?
                }
                Layout::Custom => return Err(Error::UnsupportedLayout),
            };
            guard_dim(&g)?;
            let global = product_global(&g, &mut rng)?;
            (g, global)
        }
        (kind, layout) => {
            return Err(Error::InvalidSpec(format!(
                "{kind:?} is not defined for {layout:?}"
            )))
        }
    };
    let mut marginals = extract_marginals(&global, &geometry)?;
    if spec.perturbation > 0.0 {
        marginals.depolarize(spec.perturbation);
    }
    Ok(GenOutput {
        global: Some(global),
        marginals,
    })
}

fn guard_dim(g: &Geometry) -> Result<()> {
    let mut dim = 1usize;
    for &(_, d) in g.vertices() {
        dim = dim.saturating_mul(d);
        if dim > MAX_GLOBAL_DIM {
            return Err(Error::InvalidSpec(format!(
                "global dimension exceeds {MAX_GLOBAL_DIM}"
            )));
        }
    }
    Ok(())
}

/// Full-rank random density matrix from a rectangular Gaussian matrix
/// (doubled environment keeps the spectrum away from zero).
pub fn random_full_rank_state(
    sites: Vec<SiteId>,
    dims: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<LocalState> {
    let dim: usize = dims.iter().product();
    let g = CMatrix::from_fn(dim, 2 * dim, |_, _| {
        Complex64::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        )
    });
    let h = &g * g.adjoint();
    let tr: Complex64 = h.diagonal().iter().sum();
    LocalState::new(sites, dims, h.scale(1.0 / tr.re))
}

fn random_probs(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::RngExt;
    let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn classical_chain_global(g: &Geometry, d: usize, rng: &mut ChaCha8Rng) -> Result<LocalState> {
    let n = g.num_sites();
    let initial = random_probs(d, rng);
    let transitions: Vec<Vec<f64>> = (0..n - 1)
        .flat_map(|_| std::iter::once(()))
        .map(|_| {
            (0..d)
                .flat_map(|_| random_probs(d, rng))
                .collect::<Vec<f64>>()
        })
        .collect();
    let dim = d.pow(n as u32);
    let mut probs = vec![0.0f64; dim];
    for (idx, slot) in probs.iter_mut().enumerate() {
        // row-major digits: site k value
        let mut digits = vec![0usize; n];
        let mut rem = idx;
        for k in (0..n).rev() {
            digits[k] = rem % d;
            rem /= d;
        }
        let mut p = initial[digits[0]];
        for k in 0..n - 1 {
            p *= transitions[k][digits[k] * d + digits[k + 1]];
        }
        *slot = p;
    }
    LocalState::from_probabilities(g.all_sites(), vec![d; n], &probs)
}

fn ghz_global(g: &Geometry, d: usize) -> Result<LocalState> {
    let n = g.num_sites();
    let dim = d.pow(n as u32);
    let mut amps = vec![Complex64::default(); dim];
    let norm = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        // |k,k,...,k> has index k * (d^{n-1} + ... + 1)
        let mut idx = 0usize;
        for _ in 0..n {
            idx = idx * d + k;
        }
        amps[idx] = Complex64::new(norm, 0.0);
    }
    LocalState::pure(g.all_sites(), vec![d; n], &amps)
}

fn cluster_state_global(n: usize) -> Result<LocalState> {
    let dim = 1usize << n;
    let norm = (dim as f64).sqrt().recip();
    let mut amps = vec![Complex64::default(); dim];
    for (x, amp) in amps.iter_mut().enumerate() {
        // CZ on every chain edge: phase (-1)^{sum_i x_i x_{i+1}}
        let mut phase = 0u32;
        for k in 0..n - 1 {
            let a = (x >> (n - 1 - k)) & 1;
            let b = (x >> (n - 2 - k)) & 1;
            phase ^= (a & b) as u32;
        }
        *amp = Complex64::new(if phase == 1 { -norm } else { norm }, 0.0);
    }
    LocalState::pure((1..=n as u32).map(SiteId).collect(), vec![2; n], &amps)
}

/// Classically bonded chain: each vertex splits into a 2-dimensional bond
/// carrier and a free factor. Bond values follow a random Markov chain;
/// every cell hosts a random pure state on its free factors conditioned on
/// the adjacent bond values. Both boundary bonds are pinned to 0.
///
/// The carriers make each conditioning vertex reveal its bond classically,
/// so every local Markov condition holds exactly, with genuine quantum
/// correlation inside cells whenever `d > 2`.
fn bonded_chain_global(g: &Geometry, d: usize, rng: &mut ChaCha8Rng) -> Result<LocalState> {
    if d % 2 != 0 {
        return Err(Error::InvalidSpec(
            "sequential chain instances need an even local dimension".into(),
        ));
    }
    let free = d / 2;
    let n = g.num_sites();
    let m = n / 2;
    let bonds = m - 1;
    let initial = random_probs(2, rng);
    let trans: Vec<Vec<f64>> = (0..bonds.saturating_sub(1))
        .map(|_| {
            let mut t = random_probs(2, rng);
            t.extend(random_probs(2, rng));
            t
        })
        .collect();
    // Random unit vector on the two free factors of each cell, one per
    // (cell, left bond, right bond).
    let mut cell_vecs = vec![vec![Vec::new(); 4]; m];
    for cell in 0..m {
        for lr in 0..4 {
            let mut v: Vec<Complex64> = (0..free * free)
                .map(|_| {
                    Complex64::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    )
                })
                .collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            cell_vecs[cell][lr] = v;
        }
    }
    let cell_amp = |cell: usize, l: usize, r: usize| -> Vec<Complex64> {
        // vertex basis: value = carrier * free + free_index
        let mut amp = vec![Complex64::default(); d * d];
        let phi = &cell_vecs[cell][l * 2 + r];
        for f1 in 0..free {
            for f2 in 0..free {
                amp[(l * free + f1) * d + (r * free + f2)] = phi[f1 * free + f2];
            }
        }
        amp
    };
    let dim = d.pow(n as u32);
    let mut mat = CMatrix::zeros(dim, dim);
    for b in 0..(1usize << bonds) {
        let bond = |k: usize| -> usize {
            if k == 0 || k > bonds {
                0
            } else {
                (b >> (k - 1)) & 1
            }
        };
        let mut p = if bonds > 0 { initial[bond(1)] } else { 1.0 };
        for k in 1..bonds {
            p *= trans[k - 1][bond(k) * 2 + bond(k + 1)];
        }
        // product of per-cell pure vectors
        let mut vec_total = vec![Complex64::new(1.0, 0.0)];
        for cell in 0..m {
            let amp = cell_amp(cell, bond(cell), bond(cell + 1));
            let mut next = vec![Complex64::default(); vec_total.len() * amp.len()];
            for (i, a) in vec_total.iter().enumerate() {
                for (j, bb) in amp.iter().enumerate() {
                    next[i * amp.len() + j] = a * bb;
                }
            }
            vec_total = next;
        }
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] += vec_total[i] * vec_total[j].conj() * p;
            }
        }
    }
    LocalState::new(g.all_sites(), vec![d; n], mat)
}

/// Independent full-rank random states on each grid row. Within a cluster,
/// every nonvacuous Markov condition separates cells of different rows, so
/// the product over rows satisfies all of them exactly while rows stay
/// arbitrarily correlated internally.
fn row_product_global(
    g: &Geometry,
    n: usize,
    granularity: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LocalState> {
    let mut global: Option<LocalState> = None;
    for j in 1..=n {
        let mut sites = Vec::new();
        for i in 1..=n {
            let cell = g
                .grid_cell(i, j)
                .ok_or_else(|| Error::Geometry(format!("missing cell [{i},{j}]")))?;
            sites.extend(g.cells()[cell].sites.iter().copied());
        }
        sites.sort_unstable();
        let dims = vec![
            g.site_dim(sites[0]).unwrap();
            n * granularity
        ];
        let row = random_full_rank_state(sites, dims, rng)?;
        global = Some(match global {
            None => row,
            Some(acc) => acc.tensor(&row)?,
        });
    }
    Ok(global.unwrap())
}

fn product_global(g: &Geometry, rng: &mut ChaCha8Rng) -> Result<LocalState> {
    let mut global: Option<LocalState> = None;
    for cell in g.cells() {
        let dims = g.dims_for(&cell.sites)?;
        let state = random_full_rank_state(cell.sites.clone(), dims, rng)?;
        global = Some(match global {
            None => state,
            Some(acc) => acc.tensor(&state)?,
        });
    }
    Ok(global.unwrap())
}

#[derive(Clone, Debug)]
pub struct InconsistentInstance {
    pub marginals: MarginalSet,
    /// Index of the stored cluster whose marginal was replaced.
    pub replaced_cluster: usize,
}

/// Negative-control instance: a classical chain whose last stored cluster
/// marginal is replaced by a seeded random state.
pub fn gen_inconsistent(seed: u64) -> Result<InconsistentInstance> {
    let spec = InstanceSpec::chain(InstanceKind::ClassicalChain, 8, 2, seed);
    let out = gen(&spec)?;
    let mut marginals = out.marginals;
    let replaced_cluster = marginals
        .geometry()
        .stored_clusters()
        .last()
        .expect("chain has at least one cluster");
    let sites = marginals.geometry().cluster_sites(replaced_cluster);
    let dims = marginals.geometry().dims_for(&sites)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let replacement = random_full_rank_state(sites, dims, &mut rng)?;
    marginals.replace(replaced_cluster, replacement)?;
    Ok(InconsistentInstance {
        marginals,
        replaced_cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::trace_distance;
    use crate::reconstruct::reconstruct;

    /// Classical conditional mutual information of the diagonal of a state,
    /// computed with Shannon entropies and direct marginalization - an
    /// independent path from the spectral machinery.
    fn classical_cmi(state: &LocalState, a: &[SiteId], b: &[SiteId], c: &[SiteId]) -> f64 {
        let dims = state.dims().to_vec();
        let n = dims.len();
        let dim = state.dim();
        let joint: Vec<f64> = (0..dim).map(|i| state.matrix()[(i, i)].re).collect();
        let positions = |set: &[SiteId]| -> Vec<usize> {
            set.iter()
                .map(|s| state.position_of(*s).unwrap())
                .collect()
        };
        let entropy_of = |keep: &[usize]| -> f64 {
            let mut acc: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
            for (idx, &p) in joint.iter().enumerate() {
                let mut digits = vec![0usize; n];
                let mut rem = idx;
                for k in (0..n).rev() {
                    digits[k] = rem % dims[k];
                    rem /= dims[k];
                }
                let key: Vec<usize> = keep.iter().map(|&k| digits[k]).collect();
                *acc.entry(key).or_insert(0.0) += p;
            }
            -acc.values()
                .filter(|&&p| p > 1e-300)
                .map(|&p| p * p.ln())
                .sum::<f64>()
        };
        let pa = positions(a);
        let pb = positions(b);
        let pc = positions(c);
        let mut ab = pa.clone();
        ab.extend(&pb);
        let mut bc = pb.clone();
        bc.extend(&pc);
        let mut abc = ab.clone();
        abc.extend(&pc);
        entropy_of(&ab) + entropy_of(&bc) - entropy_of(&pb) - entropy_of(&abc)
    }

    #[test]
    fn classical_chain_markov_conditions_vanish() {
        let spec = InstanceSpec::chain(InstanceKind::ClassicalChain, 8, 2, 7);
        let out = gen(&spec).unwrap();
        let report = out.marginals.check().unwrap();
        assert!(report.epsilon <= 1e-7, "epsilon {}", report.epsilon);
        // cross-check each condition against the classical oracle
        for cond in crate::model::markov_conditions(out.marginals.geometry()) {
            if cond.c.is_empty() {
                continue;
            }
            let marg = out.marginals.marginal(cond.cluster).unwrap();
            let classical = classical_cmi(&marg, &cond.a, &cond.b, &cond.c);
            let quantum = crate::measures::cmi(&marg, &cond.a, &cond.b, &cond.c).unwrap();
            assert!(classical.abs() <= 1e-12, "classical CMI {classical}");
            assert!((classical - quantum).abs() <= 1e-9);
        }
    }

    #[test]
    fn ghz_chain_marginals() {
        let spec = InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0);
        let out = gen(&spec).unwrap();
        for entry in out.marginals.entries().values() {
            let m = entry.matrix();
            assert!((m[(0, 0)].re - 0.5).abs() < 1e-12);
            assert!((m[(15, 15)].re - 0.5).abs() < 1e-12);
            assert!(m[(0, 15)].norm() < 1e-12);
        }
        let report = out.marginals.check().unwrap();
        assert!(report.epsilon <= 1e-7);
    }

    #[test]
    fn ghz_hexgrid_cmis_vanish() {
        let spec = InstanceSpec::hexgrid(InstanceKind::Ghz, 3, 1, 2, 0);
        let out = gen(&spec).unwrap();
        let report = out.marginals.check().unwrap();
        for cv in &report.cmi_values {
            assert!(cv.cmi.abs() <= 1e-9, "cluster {} cell {}", cv.cluster, cv.cell);
        }
        assert!(report.epsilon <= 1e-7);
    }

    #[test]
    fn unperturbed_marginals_match_global() {
        let spec = InstanceSpec::chain(InstanceKind::ClassicalChain, 8, 2, 3);
        let out = gen(&spec).unwrap();
        let re_extracted =
            extract_marginals(out.global.as_ref().unwrap(), out.marginals.geometry()).unwrap();
        for (k, entry) in out.marginals.entries() {
            let gap = trace_distance(entry, &re_extracted.entries()[k]).unwrap();
            assert!(gap <= 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            InstanceKind::ClassicalChain,
            InstanceKind::Ghz,
            InstanceKind::ClusterState1d,
            InstanceKind::Sequential,
            InstanceKind::Product,
        ] {
            let spec = InstanceSpec::chain(kind, 8, 2, 11).with_perturbation(0.01);
            let a = gen(&spec).unwrap();
            let b = gen(&spec).unwrap();
            assert_eq!(
                a.global.as_ref().unwrap().matrix(),
                b.global.as_ref().unwrap().matrix(),
                "{kind:?} global differs"
            );
            for (k, entry) in a.marginals.entries() {
                assert_eq!(entry.matrix(), b.marginals.entries()[k].matrix());
            }
        }
    }

    #[test]
    fn depolarization_monotone_epsilon() {
        let mut last = 0.0f64;
        for &p in &[1e-3, 3e-3, 1e-2, 3e-2] {
            let spec =
                InstanceSpec::chain(InstanceKind::ClassicalChain, 8, 2, 7).with_perturbation(p);
            let out = gen(&spec).unwrap();
            let eps = out.marginals.check().unwrap().epsilon;
            assert!(eps >= last, "epsilon not monotone: {eps} after {last}");
            last = eps;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn cluster_state_instance_is_exact() {
        let spec = InstanceSpec::chain(InstanceKind::ClusterState1d, 8, 2, 0);
        let out = gen(&spec).unwrap();
        let report = out.marginals.check().unwrap();
        assert!(report.epsilon <= 1e-7, "epsilon {}", report.epsilon);
        let (_, recon) = reconstruct(&out.marginals, RecoveryConfig::petz()).unwrap();
        assert!(recon.delta <= 1e-6, "delta {}", recon.delta);
    }

    #[test]
    fn sequential_chain_is_exact() {
        for d in [2usize, 4] {
            let n = if d == 2 { 8 } else { 4 };
            let spec = InstanceSpec::chain(InstanceKind::Sequential, n, d, 21);
            let out = gen(&spec).unwrap();
            let report = out.marginals.check().unwrap();
            assert!(
                report.epsilon <= 1e-7,
                "d={d} epsilon {}",
                report.epsilon
            );
            let (_, recon) = reconstruct(&out.marginals, RecoveryConfig::petz()).unwrap();
            assert!(recon.delta <= 1e-6, "d={d} delta {}", recon.delta);
        }
    }

    #[test]
    fn sequential_hexgrid_is_exact() {
        let spec = InstanceSpec::hexgrid(InstanceKind::Sequential, 3, 1, 2, 13);
        let out = gen(&spec).unwrap();
        let report = out.marginals.check().unwrap();
        assert!(report.epsilon <= 1e-7, "epsilon {}", report.epsilon);
    }

    #[test]
    fn product_is_exact() {
        for spec in [
            InstanceSpec::chain(InstanceKind::Product, 8, 2, 5),
            InstanceSpec::hexgrid(InstanceKind::Product, 3, 1, 2, 5),
        ] {
            let out = gen(&spec).unwrap();
            let report = out.marginals.check().unwrap();
            assert!(report.epsilon <= 1e-7, "epsilon {}", report.epsilon);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(gen(&InstanceSpec::hexgrid(InstanceKind::ClassicalChain, 3, 1, 2, 0)).is_err());
        assert!(gen(&InstanceSpec::hexgrid(InstanceKind::ClusterState1d, 3, 1, 2, 0)).is_err());
        assert!(gen(&InstanceSpec::chain(InstanceKind::ClusterState1d, 8, 3, 0)).is_err());
        assert!(gen(&InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0).with_perturbation(1.0)).is_err());
        assert!(gen(&InstanceSpec::chain(InstanceKind::Ghz, 40, 2, 0)).is_err());
    }

    #[test]
    fn inconsistent_instance_controls() {
        // Control 1: replacing a marginal by itself leaves no gap.
        let spec = InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0);
        let out = gen(&spec).unwrap();
        let mut ms = out.marginals.clone();
        let last = ms.geometry().stored_clusters().last().unwrap();
        let same = ms.entries()[&last].clone();
        ms.replace(last, same).unwrap();
        assert!(ms.check().unwrap().max_gap() <= 1e-12);

        // Control 2: an orthogonal pure product forces the maximal gap 2.
        let sites = out.marginals.geometry().cluster_sites(last);
        let dims = vec![2usize; 4];
        let mut amps = vec![Complex64::default(); 16];
        amps[0b0101] = Complex64::new(1.0, 0.0);
        let orto = LocalState::pure(sites, dims, &amps).unwrap();
        let mut ms = out.marginals.clone();
        ms.replace(last, orto).unwrap();
        let report = ms.check().unwrap();
        assert!((report.max_gap() - 2.0).abs() <= 1e-10, "gap {}", report.max_gap());
    }

    #[test]
    fn inconsistent_instance_has_visible_gap() {
        for seed in 0..10u64 {
            let inst = gen_inconsistent(seed).unwrap();
            let report = inst.marginals.check().unwrap();
            assert!(report.max_gap() > 0.1, "seed {seed}: gap {}", report.max_gap());
        }
    }
}
