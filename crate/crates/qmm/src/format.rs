//! On-disk formats: the `.mm` marginal-set manifest, state blobs and report
//! files.
//!
//! Manifests are JSON with `format: 1`. Matrix payloads are base64 of
//! little-endian IEEE-754 binary64 `(re, im)` pairs in row-major order and
//! canonical site order, so round trips are bit exact across platforms.
//! Serialization is canonical: serializing a parsed canonical file
//! reproduces it byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{Cell, Cluster, Geometry, Layout, MarginalSet, MarkovReport};
use crate::reconstruct::{ConsistencyReport, RelationGapEntry};
use crate::state::{CMatrix, LocalState, SiteId};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MATRIX_ENCODING: &str = "c128-le-b64";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexFile {
    pub id: u32,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub label: String,
    pub sites: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub cells: Vec<usize>,
    pub stored: bool,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutFile {
    Chain { n: usize },
    Hexgrid { n: usize, granularity: usize },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub layout: LayoutFile,
    pub vertices: Vec<VertexFile>,
    pub edges: Vec<[u32; 2]>,
    pub cells: Vec<CellFile>,
    pub clusters: Vec<ClusterFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryFile {
    pub cluster: usize,
    pub dim: usize,
    pub encoding: String,
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSetFile {
    pub format: u32,
    pub geometry: GeometryFile,
    pub entries: Vec<EntryFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub format: u32,
    pub sites: Vec<VertexFile>,
    pub encoding: String,
    pub payload: String,
}

fn encode_matrix(m: &CMatrix) -> String {
    let mut bytes = Vec::with_capacity(m.len() * 16);
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    B64.encode(bytes)
}

fn decode_matrix(payload: &str, dim: usize) -> Result<CMatrix> {
    let bytes = B64
        .decode(payload.trim())
        .map_err(|e| Error::Parse(format!("bad base64 payload: {e}")))?;
    if bytes.len() != dim * dim * 16 {
        return Err(Error::Parse(format!(
            "payload holds {} bytes, expected {} for a {dim}x{dim} matrix",
            bytes.len(),
            dim * dim * 16
        )));
    }
    let mut m = CMatrix::zeros(dim, dim);
    let mut k = 0usize;
    for i in 0..dim {
        for j in 0..dim {
            let re = f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[k + 8..k + 16].try_into().unwrap());
            m[(i, j)] = Complex64::new(re, im);
            k += 16;
        }
    }
    Ok(m)
}

fn layout_to_file(layout: Layout) -> LayoutFile {
    match layout {
        Layout::Chain { n } => LayoutFile::Chain { n },
        Layout::HexGrid { n, granularity } => LayoutFile::Hexgrid { n, granularity },
        Layout::Custom => LayoutFile::Custom,
    }
}

fn layout_from_file(layout: &LayoutFile) -> Layout {
    match *layout {
        LayoutFile::Chain { n } => Layout::Chain { n },
        LayoutFile::Hexgrid { n, granularity } => Layout::HexGrid { n, granularity },
        LayoutFile::Custom => Layout::Custom,
    }
}

pub fn geometry_to_file(g: &Geometry) -> GeometryFile {
    GeometryFile {
        layout: layout_to_file(g.layout()),
        vertices: g
            .vertices()
            .iter()
            .map(|&(s, d)| VertexFile { id: s.0, dim: d })
            .collect(),
        edges: g.edges().iter().map(|&(a, b)| [a.0, b.0]).collect(),
        cells: g
            .cells()
            .iter()
            .map(|c| CellFile {
                label: c.label.clone(),
                sites: c.sites.iter().map(|s| s.0).collect(),
            })
            .collect(),
        clusters: g
            .clusters()
            .iter()
            .map(|c| ClusterFile {
                cells: c.cells.clone(),
                stored: c.stored,
                parent: c.parent,
            })
            .collect(),
    }
}

pub fn geometry_from_file(f: &GeometryFile) -> Result<Geometry> {
    let vertices: Vec<(SiteId, usize)> = f
        .vertices
        .iter()
        .map(|v| (SiteId(v.id), v.dim))
        .collect();
    let edges: BTreeSet<(SiteId, SiteId)> = f
        .edges
        .iter()
        .map(|&[a, b]| (SiteId(a.min(b)), SiteId(a.max(b))))
        .collect();
    let cells: Vec<Cell> = f
        .cells
        .iter()
        .map(|c| Cell {
            label: c.label.clone(),
            sites: c.sites.iter().map(|&s| SiteId(s)).collect(),
        })
        .collect();
    let clusters: Vec<Cluster> = f
        .clusters
        .iter()
        .map(|c| Cluster {
            cells: c.cells.clone(),
            stored: c.stored,
            parent: c.parent,
        })
        .collect();
    Geometry::custom(vertices, edges, cells, clusters, layout_from_file(&f.layout))
        .map_err(|e| Error::Parse(format!("invalid geometry in file: {e}")))
}

pub fn marginal_set_to_file(ms: &MarginalSet) -> MarginalSetFile {
    let entries = ms
        .entries()
        .iter()
        .map(|(&cluster, state)| EntryFile {
            cluster,
            dim: state.dim(),
            encoding: MATRIX_ENCODING.to_string(),
            payload: encode_matrix(state.matrix()),
        })
        .collect();
    MarginalSetFile {
        format: FORMAT_VERSION,
        geometry: geometry_to_file(ms.geometry()),
        entries,
    }
}

/// Rebuilds the marginal set. Structural problems surface as parse errors;
/// numeric invariant violations (non-Hermitian, bad trace, negative
/// spectrum) surface as their own error kinds.
pub fn marginal_set_from_file(f: &MarginalSetFile) -> Result<MarginalSet> {
    if f.format != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format version {}",
            f.format
        )));
    }
    let geometry = geometry_from_file(&f.geometry)?;
    let mut entries = BTreeMap::new();
    for e in &f.entries {
        if e.encoding != MATRIX_ENCODING {
            return Err(Error::Parse(format!("unknown encoding {}", e.encoding)));
        }
        if e.cluster >= geometry.clusters().len() || !geometry.clusters()[e.cluster].stored {
            return Err(Error::Parse(format!(
                "entry for cluster {} which is not a stored cluster",
                e.cluster
            )));
        }
        let sites = geometry.cluster_sites(e.cluster);
        let dims = geometry.dims_for(&sites)?;
        let expect: usize = dims.iter().product();
        if e.dim != expect {
            return Err(Error::Parse(format!(
                "entry for cluster {} declares dim {}, geometry implies {}",
                e.cluster, e.dim, expect
            )));
        }
        let mat = decode_matrix(&e.payload, e.dim)?;
        let state = LocalState::new(sites, dims, mat)?;
        state.validate()?;
        entries.insert(e.cluster, state);
    }
    MarginalSet::new(geometry, entries)
}

pub fn state_to_file(s: &LocalState) -> StateFile {
    let c = s.canonical();
    StateFile {
        format: FORMAT_VERSION,
        sites: c
            .support()
            .iter()
            .zip(c.dims())
            .map(|(&s, &d)| VertexFile { id: s.0, dim: d })
            .collect(),
        encoding: MATRIX_ENCODING.to_string(),
        payload: encode_matrix(c.matrix()),
    }
}

pub fn state_from_file(f: &StateFile) -> Result<LocalState> {
    if f.format != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format version {}",
            f.format
        )));
    }
    if f.encoding != MATRIX_ENCODING {
        return Err(Error::Parse(format!("unknown encoding {}", f.encoding)));
    }
    let sites: Vec<SiteId> = f.sites.iter().map(|v| SiteId(v.id)).collect();
    let dims: Vec<usize> = f.sites.iter().map(|v| v.dim).collect();
    let dim: usize = dims.iter().product();
    let mat = decode_matrix(&f.payload, dim)?;
    LocalState::new(sites, dims, mat)
}

/// Canonical byte serialization: pretty JSON plus a trailing newline.
pub fn to_canonical_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

pub fn parse_marginal_file(bytes: &[u8]) -> Result<MarginalSetFile> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse(format!("bad manifest: {e}")))
}

pub fn save_marginals(path: &Path, ms: &MarginalSet) -> Result<()> {
    std::fs::write(path, to_canonical_bytes(&marginal_set_to_file(ms)))?;
    Ok(())
}

pub fn load_marginals(path: &Path) -> Result<MarginalSet> {
    let bytes = std::fs::read(path)?;
    marginal_set_from_file(&parse_marginal_file(&bytes)?)
}

pub fn save_state(path: &Path, s: &LocalState) -> Result<()> {
    std::fs::write(path, to_canonical_bytes(&state_to_file(s)))?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<LocalState> {
    let bytes = std::fs::read(path)?;
    let f: StateFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("bad state file: {e}")))?;
    state_from_file(&f)
}

// --- report files ---

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReportFile {
    pub format: u32,
    pub log_base: String,
    pub epsilon: f64,
    pub max_consistency_gap: f64,
    pub max_cmi: f64,
    pub report: MarkovReport,
}

impl CheckReportFile {
    pub fn new(report: MarkovReport, log_base: &str) -> Self {
        Self {
            format: FORMAT_VERSION,
            log_base: log_base.to_string(),
            epsilon: report.epsilon,
            max_consistency_gap: report.max_gap(),
            max_cmi: report.max_cmi(),
            report,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructReportFile {
    pub format: u32,
    pub map: String,
    pub report: ConsistencyReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaReportFile {
    pub format: u32,
    pub suite: String,
    pub map: String,
    pub entries: Vec<RelationGapEntry>,
    /// ε of the checked set, for gap/ε comparisons.
    pub epsilon: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen, InstanceKind, InstanceSpec};

    #[test]
    fn roundtrip_is_byte_identical() {
        let out = gen(&InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0)).unwrap();
        let file = marginal_set_to_file(&out.marginals);
        let bytes = to_canonical_bytes(&file);
        let parsed = parse_marginal_file(&bytes).unwrap();
        let bytes2 = to_canonical_bytes(&parsed);
        assert_eq!(bytes, bytes2);
        // and the numeric payload survives exactly
        let ms2 = marginal_set_from_file(&parsed).unwrap();
        for (k, entry) in out.marginals.entries() {
            assert_eq!(entry.matrix(), ms2.entries()[k].matrix());
        }
    }

    #[test]
    fn hexgrid_roundtrip() {
        let out = gen(&InstanceSpec::hexgrid(InstanceKind::Product, 3, 1, 2, 4)).unwrap();
        let bytes = to_canonical_bytes(&marginal_set_to_file(&out.marginals));
        let ms2 = marginal_set_from_file(&parse_marginal_file(&bytes).unwrap()).unwrap();
        assert_eq!(ms2.geometry(), out.marginals.geometry());
        let (_, report) =
            crate::reconstruct::reconstruct(&ms2, crate::recovery::RecoveryConfig::petz())
                .unwrap();
        assert!(report.delta < 1e-8);
    }

    #[test]
    fn corrupted_payload_is_a_parse_error() {
        let out = gen(&InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0)).unwrap();
        let mut file = marginal_set_to_file(&out.marginals);
        file.entries[0].payload = "!!!not-base64!!!".into();
        assert!(matches!(
            marginal_set_from_file(&file),
            Err(Error::Parse(_))
        ));
        // truncation too
        let mut file = marginal_set_to_file(&out.marginals);
        file.entries[0].payload.truncate(16);
        assert!(matches!(
            marginal_set_from_file(&file),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn invalid_state_is_flagged_as_invariant_violation() {
        let out = gen(&InstanceSpec::chain(InstanceKind::Ghz, 8, 2, 0)).unwrap();
        let mut file = marginal_set_to_file(&out.marginals);
        // scale the first matrix so its trace is 2
        let dim = file.entries[0].dim;
        let mat = decode_matrix(&file.entries[0].payload, dim).unwrap();
        file.entries[0].payload = encode_matrix(&mat.scale(2.0));
        assert!(matches!(
            marginal_set_from_file(&file),
            Err(Error::InvalidTrace(_))
        ));
    }

    #[test]
    fn state_file_roundtrip() {
        let out = gen(&InstanceSpec::chain(InstanceKind::ClassicalChain, 6, 2, 9)).unwrap();
        let s = out.global.unwrap();
        let f = state_to_file(&s);
        let s2 = state_from_file(&f).unwrap();
        assert_eq!(s.matrix(), s2.matrix());
        assert_eq!(s.support(), s2.support());
    }
}
