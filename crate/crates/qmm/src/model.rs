//! Lattice geometry, marginal sets and the local validators.
//!
//! A [`Geometry`] is a graph with per-vertex dimensions, a partition of the
//! vertices into labeled cells, and a list of clusters (sets of cells).
//! Maximal clusters store a marginal; nested clusters never store one — their
//! marginal is derived from the stored parent by partial trace, so nested
//! consistency is exact by construction.
//!
//! [`check`](MarginalSet::check) measures how far a marginal set is from
//! being a locally consistent, locally Markov family: the trace-norm gap on
//! every overlap of stored clusters, and the conditional mutual information
//! of every (cluster, cell) condition. The aggregate figure is
//! `ε = max(max gap, sqrt(max CMI))`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::measures::{cmi_with_cutoff, trace_distance};
use crate::state::{LocalState, SiteId};
use crate::{Error, Result, DEFAULT_CUTOFF};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    /// Ascending site list.
    pub sites: Vec<SiteId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted cell indices.
    pub cells: Vec<usize>,
    /// Whether this cluster stores a marginal.
    pub stored: bool,
    /// For derived (nested) clusters, the stored cluster that contains them.
    pub parent: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    Chain { n: usize },
    HexGrid { n: usize, granularity: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    vertices: Vec<(SiteId, usize)>,
    edges: BTreeSet<(SiteId, SiteId)>,
    cells: Vec<Cell>,
    clusters: Vec<Cluster>,
    layout: Layout,
}

impl Geometry {
    /// Generic constructor with full validation of the partition and cluster
    /// structure.
    pub fn custom(
        vertices: Vec<(SiteId, usize)>,
        edges: BTreeSet<(SiteId, SiteId)>,
        cells: Vec<Cell>,
        clusters: Vec<Cluster>,
        layout: Layout,
    ) -> Result<Self> {
        let g = Self {
            vertices,
            edges,
            cells,
            clusters,
            layout,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let mut ids: Vec<SiteId> = self.vertices.iter().map(|&(s, _)| s).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(Error::Geometry("duplicate vertex ids".into()));
        }
        if self.vertices.iter().any(|&(_, d)| d == 0) {
            return Err(Error::Geometry("vertex with dimension 0".into()));
        }
        for &(a, b) in &self.edges {
            if a >= b {
                return Err(Error::Geometry(format!(
                    "edge ({a},{b}) is not normalized (a < b required)"
                )));
            }
            if !ids.binary_search(&a).is_ok() || !ids.binary_search(&b).is_ok() {
                return Err(Error::Geometry(format!("edge ({a},{b}) off the vertex set")));
            }
        }
        // cells partition V
        let mut seen: BTreeSet<SiteId> = BTreeSet::new();
        for cell in &self.cells {
            if cell.sites.is_empty() {
                return Err(Error::Geometry(format!("cell {} is empty", cell.label)));
            }
            if cell.sites.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Geometry(format!(
                    "cell {} sites not strictly ascending",
                    cell.label
                )));
            }
            for &s in &cell.sites {
                if !seen.insert(s) {
                    return Err(Error::Geometry(format!(
                        "site {s} appears in more than one cell"
                    )));
                }
            }
        }
        if seen.len() != ids.len() {
            return Err(Error::Geometry("cells do not cover the vertex set".into()));
        }
        for (k, cl) in self.clusters.iter().enumerate() {
            if cl.cells.is_empty() {
                return Err(Error::Geometry(format!("cluster {k} is empty")));
            }
            if cl.cells.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Geometry(format!("cluster {k} cells not sorted")));
            }
            if cl.cells.iter().any(|&c| c >= self.cells.len()) {
                return Err(Error::Geometry(format!("cluster {k} references a bad cell")));
            }
            match (cl.stored, cl.parent) {
                (true, Some(_)) => {
                    return Err(Error::Geometry(format!(
                        "stored cluster {k} must not have a parent"
                    )))
                }
                (false, None) => {
                    return Err(Error::Geometry(format!(
                        "derived cluster {k} needs a stored parent"
                    )))
                }
                (false, Some(p)) => {
                    let parent = self
                        .clusters
                        .get(p)
                        .ok_or_else(|| Error::Geometry(format!("cluster {k} has a bad parent")))?;
                    if !parent.stored {
                        return Err(Error::Geometry(format!(
                            "cluster {k} parent {p} is not stored"
                        )));
                    }
                    if !cl.cells.iter().all(|c| parent.cells.contains(c)) {
                        return Err(Error::Geometry(format!(
                            "cluster {k} is not nested in its parent {p}"
                        )));
                    }
                }
                (true, None) => {}
            }
        }
        Ok(())
    }

    /// 1D chain: vertices `1..=n`, edges `(i, i+1)`, cells `[i] = {2i-1, 2i}`
    /// and clusters `{[i], [i+1]}`. `n` must be even and at least 4.
    pub fn chain(n: usize, d: usize) -> Result<Self> {
        let edges = (1..n as u32)
            .map(|i| (SiteId(i), SiteId(i + 1)))
            .collect();
        Self::chain_with_edges(n, d, edges)
    }

    /// Chain cells with cell-granular adjacency: every vertex of a cell is
    /// joined to every vertex of the two neighboring cells. Conditioning
    /// sets then contain whole cells, which some instance families (graph
    /// states) need for their Markov structure to close.
    pub fn chain_blocked(n: usize, d: usize) -> Result<Self> {
        let mut edges = BTreeSet::new();
        let m = n / 2;
        for i in 1..m {
            // cells [i] = {2i-1, 2i}, [i+1] = {2i+1, 2i+2}
            for a in [2 * i as u32 - 1, 2 * i as u32] {
                for b in [2 * i as u32 + 1, 2 * i as u32 + 2] {
                    edges.insert((SiteId(a), SiteId(b)));
                }
            }
        }
        Self::chain_with_edges(n, d, edges)
    }

    fn chain_with_edges(n: usize, d: usize, edges: BTreeSet<(SiteId, SiteId)>) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Geometry(format!(
                "chain needs an even vertex count >= 4, got {n}"
            )));
        }
        let vertices: Vec<(SiteId, usize)> = (1..=n as u32).map(|i| (SiteId(i), d)).collect();
        let m = n / 2;
        let cells: Vec<Cell> = (1..=m)
            .map(|i| Cell {
                label: format!("[{i}]"),
                sites: vec![SiteId(2 * i as u32 - 1), SiteId(2 * i as u32)],
            })
            .collect();
        let clusters: Vec<Cluster> = (0..m - 1)
            .map(|i| Cluster {
                cells: vec![i, i + 1],
                stored: true,
                parent: None,
            })
            .collect();
        Self::custom(vertices, edges, cells, clusters, Layout::Chain { n })
    }

    /// Hexagonal grid of `n × n` cells labeled `[i,j]`, `i,j = 1..=n`, with
    /// cell centers at `(i - j/2, sqrt(3) j / 2)`. Two cells are adjacent
    /// iff their centers are at distance 1. Each cell carries `granularity`
    /// vertices; vertex edges mirror the cell adjacency (all cross pairs,
    /// plus all intra-cell pairs when `granularity > 1`).
    ///
    /// Stored clusters are the quadruples
    /// `{[i,j], [i+1,j], [i,j+1], [i+1,j+1]}`; each quadruple also carries
    /// two derived triple clusters.
    pub fn hexgrid(n: usize, d: usize, granularity: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Geometry(format!("hex grid needs n >= 2, got {n}")));
        }
        if granularity < 1 {
            return Err(Error::Geometry("granularity must be >= 1".into()));
        }
        let g = granularity;
        let cell_index = |i: usize, j: usize| (j - 1) * n + (i - 1);
        let center = |i: usize, j: usize| {
            (
                i as f64 - 0.5 * j as f64,
                3f64.sqrt() * 0.5 * j as f64,
            )
        };
        let mut vertices = Vec::with_capacity(n * n * g);
        let mut cells = Vec::with_capacity(n * n);
        for j in 1..=n {
            for i in 1..=n {
                let base = (cell_index(i, j) * g) as u32 + 1;
                let sites: Vec<SiteId> = (0..g as u32).map(|k| SiteId(base + k)).collect();
                for &s in &sites {
                    vertices.push((s, d));
                }
                cells.push(Cell {
                    label: format!("[{i},{j}]"),
                    sites,
                });
            }
        }
        vertices.sort_by_key(|&(s, _)| s);
        let mut edges = BTreeSet::new();
        for j1 in 1..=n {
            for i1 in 1..=n {
                for j2 in 1..=n {
                    for i2 in 1..=n {
                        let a = cell_index(i1, j1);
                        let b = cell_index(i2, j2);
                        if a >= b {
                            continue;
                        }
                        let (x1, y1) = center(i1, j1);
                        let (x2, y2) = center(i2, j2);
                        let dist = ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt();
                        if (dist - 1.0).abs() <= 1e-9 {
                            for &sa in &cells[a].sites {
                                for &sb in &cells[b].sites {
                                    edges.insert((sa.min(sb), sa.max(sb)));
                                }
                            }
                        }
                    }
                }
            }
        }
        if g > 1 {
            for cell in &cells {
                for (k, &sa) in cell.sites.iter().enumerate() {
                    for &sb in &cell.sites[k + 1..] {
                        edges.insert((sa.min(sb), sa.max(sb)));
                    }
                }
            }
        }
        let mut clusters = Vec::new();
        // Stored quadruples first, row-major over (i, j).
        for j in 1..=n - 1 {
            for i in 1..=n - 1 {
                let mut cs = vec![
                    cell_index(i, j),
                    cell_index(i + 1, j),
                    cell_index(i, j + 1),
                    cell_index(i + 1, j + 1),
                ];
                cs.sort_unstable();
                clusters.push(Cluster {
                    cells: cs,
                    stored: true,
                    parent: None,
                });
            }
        }
        // Derived triples, two per quadruple.
        for j in 1..=n - 1 {
            for i in 1..=n - 1 {
                let parent = (j - 1) * (n - 1) + (i - 1);
                let mut lower = vec![cell_index(i, j), cell_index(i + 1, j), cell_index(i, j + 1)];
                lower.sort_unstable();
                clusters.push(Cluster {
                    cells: lower,
                    stored: false,
                    parent: Some(parent),
                });
                let mut upper = vec![
                    cell_index(i + 1, j),
                    cell_index(i + 1, j + 1),
                    cell_index(i, j + 1),
                ];
                upper.sort_unstable();
                clusters.push(Cluster {
                    cells: upper,
                    stored: false,
                    parent: Some(parent),
                });
            }
        }
        Self::custom(
            vertices,
            edges,
            cells,
            clusters,
            Layout::HexGrid { n, granularity },
        )
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn vertices(&self) -> &[(SiteId, usize)] {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(SiteId, SiteId)> {
        &self.edges
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn num_sites(&self) -> usize {
        self.vertices.len()
    }

    pub fn site_dim(&self, site: SiteId) -> Option<usize> {
        self.vertices
            .iter()
            .find(|&&(s, _)| s == site)
            .map(|&(_, d)| d)
    }

    pub fn all_sites(&self) -> Vec<SiteId> {
        let mut v: Vec<SiteId> = self.vertices.iter().map(|&(s, _)| s).collect();
        v.sort_unstable();
        v
    }

    pub fn dims_for(&self, sites: &[SiteId]) -> Result<Vec<usize>> {
        sites
            .iter()
            .map(|&s| self.site_dim(s).ok_or(Error::SiteNotInSupport(s)))
            .collect()
    }

    pub fn cell_index(&self, label: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.label == label)
    }

    /// Chain cell `[i]` (1-based).
    pub fn line_cell(&self, i: usize) -> Option<usize> {
        self.cell_index(&format!("[{i}]"))
    }

    /// Grid cell `[i,j]` (1-based).
    pub fn grid_cell(&self, i: usize, j: usize) -> Option<usize> {
        self.cell_index(&format!("[{i},{j}]"))
    }

    /// Stored quadruple cluster with lower-left corner `[i,j]`.
    pub fn quad_cluster(&self, i: usize, j: usize) -> Option<usize> {
        match self.layout {
            Layout::HexGrid { n, .. } if (1..n).contains(&i) && (1..n).contains(&j) => {
                Some((j - 1) * (n - 1) + (i - 1))
            }
            _ => None,
        }
    }

    /// Sites adjacent to any site of `set`, excluding `set` itself.
    pub fn neighborhood(&self, set: &[SiteId]) -> BTreeSet<SiteId> {
        let inside: BTreeSet<SiteId> = set.iter().copied().collect();
        let mut out = BTreeSet::new();
        for &(a, b) in &self.edges {
            if inside.contains(&a) && !inside.contains(&b) {
                out.insert(b);
            }
            if inside.contains(&b) && !inside.contains(&a) {
                out.insert(a);
            }
        }
        out
    }

    /// Cell sites together with their neighborhood.
    pub fn closed_neighborhood(&self, cell: usize) -> BTreeSet<SiteId> {
        let sites = &self.cells[cell].sites;
        let mut out: BTreeSet<SiteId> = sites.iter().copied().collect();
        out.extend(self.neighborhood(sites));
        out
    }

    pub fn cells_adjacent(&self, a: usize, b: usize) -> bool {
        let sb: BTreeSet<SiteId> = self.cells[b].sites.iter().copied().collect();
        self.neighborhood(&self.cells[a].sites)
            .iter()
            .any(|s| sb.contains(s))
    }

    /// Sorted union of the cluster's cell sites.
    pub fn cluster_sites(&self, cluster: usize) -> Vec<SiteId> {
        let mut v: Vec<SiteId> = self.clusters[cluster]
            .cells
            .iter()
            .flat_map(|&c| self.cells[c].sites.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }

    pub fn stored_clusters(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.clusters.len()).filter(|&k| self.clusters[k].stored)
    }
}

/// One local Markov condition: within cluster `cluster`, cell `cell` should
/// be conditionally independent of the rest of the cluster given its
/// in-cluster neighborhood. `a`, `b`, `c` are the site sets of the CMI
/// `I(a : c | b)`; `c` may be empty, in which case the condition is vacuous
/// and evaluates to zero by convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovCondition {
    pub cluster: usize,
    pub cell: usize,
    pub a: Vec<SiteId>,
    pub b: Vec<SiteId>,
    pub c: Vec<SiteId>,
}

/// One condition per (cluster, cell) pair, over all clusters (stored and
/// derived alike).
pub fn markov_conditions(g: &Geometry) -> Vec<MarkovCondition> {
    let mut out = Vec::new();
    for (k, cluster) in g.clusters().iter().enumerate() {
        let bar_a = g.cluster_sites(k);
        let bar_a_set: BTreeSet<SiteId> = bar_a.iter().copied().collect();
        for &cell in &cluster.cells {
            let a = g.cells()[cell].sites.clone();
            let hood = g.neighborhood(&a);
            let b: Vec<SiteId> = hood.intersection(&bar_a_set).copied().collect();
            let used: BTreeSet<SiteId> = a.iter().chain(b.iter()).copied().collect();
            let c: Vec<SiteId> = bar_a_set.difference(&used).copied().collect();
            out.push(MarkovCondition {
                cluster: k,
                cell,
                a,
                b,
                c,
            });
        }
    }
    out
}

/// A geometry together with one stored marginal per maximal cluster.
#[derive(Clone, Debug)]
pub struct MarginalSet {
    geometry: Geometry,
    entries: BTreeMap<usize, LocalState>,
}

impl MarginalSet {
    pub fn new(geometry: Geometry, entries: BTreeMap<usize, LocalState>) -> Result<Self> {
        for k in geometry.stored_clusters() {
            let entry = entries
                .get(&k)
                .ok_or(Error::MissingMarginal(k))?;
            let expect = geometry.cluster_sites(k);
            if entry.support() != expect.as_slice() {
                return Err(Error::InvalidSubset(format!(
                    "marginal for cluster {k} is not on the cluster support in canonical order"
                )));
            }
            let dims = geometry.dims_for(&expect)?;
            if entry.dims() != dims.as_slice() {
                return Err(Error::DimensionMismatch {
                    expected: dims.iter().product(),
                    got: entry.dim(),
                });
            }
        }
        for &k in entries.keys() {
            if k >= geometry.clusters().len() || !geometry.clusters()[k].stored {
                return Err(Error::InvalidSubset(format!(
                    "entry for cluster {k} which is not a stored cluster"
                )));
            }
        }
        Ok(Self { geometry, entries })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn entries(&self) -> &BTreeMap<usize, LocalState> {
        &self.entries
    }

    /// Marginal of any cluster: stored clusters return their entry, derived
    /// clusters the reduction of their parent.
    pub fn marginal(&self, cluster: usize) -> Result<LocalState> {
        let info = self
            .geometry
            .clusters()
            .get(cluster)
            .ok_or(Error::MissingMarginal(cluster))?;
        if info.stored {
            return self
                .entries
                .get(&cluster)
                .cloned()
                .ok_or(Error::MissingMarginal(cluster));
        }
        let parent = info.parent.ok_or(Error::MissingMarginal(cluster))?;
        let parent_state = self
            .entries
            .get(&parent)
            .ok_or(Error::MissingMarginal(parent))?;
        parent_state.reduce_to(&self.geometry.cluster_sites(cluster))
    }

    /// Replaces the entry of a stored cluster.
    pub fn replace(&mut self, cluster: usize, state: LocalState) -> Result<()> {
        if !self.entries.contains_key(&cluster) {
            return Err(Error::MissingMarginal(cluster));
        }
        let expect = self.geometry.cluster_sites(cluster);
        if state.support() != expect.as_slice() {
            return Err(Error::InvalidSubset(
                "replacement is not on the cluster support".into(),
            ));
        }
        self.entries.insert(cluster, state);
        Ok(())
    }

    /// Applies `rho -> (1-p) rho + p I/dim` to every stored entry.
    pub fn depolarize(&mut self, p: f64) {
        for state in self.entries.values_mut() {
            *state = state.depolarize(p);
        }
    }

    pub fn check(&self) -> Result<MarkovReport> {
        self.check_with_cutoff(DEFAULT_CUTOFF)
    }

    pub fn check_with_cutoff(&self, cutoff: f64) -> Result<MarkovReport> {
        let stored: Vec<usize> = self.geometry.stored_clusters().collect();
        let mut consistency_gaps = Vec::new();
        for (x, &ka) in stored.iter().enumerate() {
            for &kb in &stored[x + 1..] {
                let sa = self.geometry.cluster_sites(ka);
                let sb: BTreeSet<SiteId> =
                    self.geometry.cluster_sites(kb).into_iter().collect();
                let overlap: Vec<SiteId> =
                    sa.iter().copied().filter(|s| sb.contains(s)).collect();
                if overlap.is_empty() {
                    continue;
                }
                let ra = self.entries[&ka].reduce_to(&overlap)?;
                let rb = self.entries[&kb].reduce_to(&overlap)?;
                let gap = trace_distance(&ra, &rb)?;
                consistency_gaps.push(PairGap {
                    clusters: (ka, kb),
                    gap,
                });
            }
        }
        let mut cmi_values = Vec::new();
        for cond in markov_conditions(&self.geometry) {
            let value = if cond.c.is_empty() {
                0.0
            } else {
                let marginal = self.marginal(cond.cluster)?;
                cmi_with_cutoff(&marginal, &cond.a, &cond.b, &cond.c, cutoff)?
            };
            cmi_values.push(ConditionValue {
                cluster: cond.cluster,
                cell: cond.cell,
                cmi: value,
            });
        }
        Ok(MarkovReport::from_parts(consistency_gaps, cmi_values))
    }
}

/// Marginals of a global state over every stored cluster. The result is
/// exactly consistent by construction.
pub fn extract_marginals(global: &LocalState, g: &Geometry) -> Result<MarginalSet> {
    let mut supp = global.support().to_vec();
    supp.sort_unstable();
    if supp != g.all_sites() {
        return Err(Error::SupportMismatch);
    }
    let gc = global.canonical();
    let mut entries = BTreeMap::new();
    for k in g.stored_clusters() {
        let sites = g.cluster_sites(k);
        entries.insert(k, gc.reduce_to(&sites)?);
    }
    MarginalSet::new(g.clone(), entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub clusters: (usize, usize),
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionValue {
    pub cluster: usize,
    pub cell: usize,
    pub cmi: f64,
}

/// Output of [`MarginalSet::check`]: all consistency gaps, all condition
/// values, and `ε = max(max gap, sqrt(max CMI clipped at 0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub consistency_gaps: Vec<PairGap>,
    pub cmi_values: Vec<ConditionValue>,
    pub epsilon: f64,
}

impl MarkovReport {
    pub fn from_parts(consistency_gaps: Vec<PairGap>, cmi_values: Vec<ConditionValue>) -> Self {
        let max_gap = consistency_gaps.iter().map(|g| g.gap).fold(0.0, f64::max);
        let max_cmi = cmi_values
            .iter()
            .map(|c| c.cmi.max(0.0))
            .fold(0.0, f64::max);
        Self {
            consistency_gaps,
            cmi_values,
            epsilon: max_gap.max(max_cmi.sqrt()),
        }
    }

    pub fn max_gap(&self) -> f64 {
        self.consistency_gaps.iter().map(|g| g.gap).fold(0.0, f64::max)
    }

    pub fn max_cmi(&self) -> f64 {
        self.cmi_values
            .iter()
            .map(|c| c.cmi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entropic quantities rescaled to a different logarithm base; `ε` is
    /// re-aggregated so the `ε²` threshold stays coherent.
    pub fn rescaled(&self, log_base: f64) -> MarkovReport {
        let factor = 1.0 / log_base.ln();
        let cmi_values: Vec<ConditionValue> = self
            .cmi_values
            .iter()
            .map(|c| ConditionValue {
                cluster: c.cluster,
                cell: c.cell,
                cmi: c.cmi * factor,
            })
            .collect();
        MarkovReport::from_parts(self.consistency_gaps.clone(), cmi_values)
    }
}
