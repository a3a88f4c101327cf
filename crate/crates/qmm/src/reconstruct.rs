//! Global-state reconstruction and the relation verification suites.
//!
//! The chain driver evaluates `[1]^R [2]^L ... [m]^L`; the hex-grid driver
//! builds row 1 left to right with up-clusters and every following row with
//! down-clusters. The resulting global state is compared cluster by cluster
//! against the input marginals; the headline figure `δ` is the worst
//! trace-norm distance.
//!
//! The relation suites measure how exactly the string identities that back
//! the reconstruction hold on a given marginal set: forward/backward
//! contraction and cell exchange in 1D; inheritance, cell/row/supercell
//! exchange, row contraction and the two-row reduction in 2D.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::trace_distance;
use crate::model::{Layout, MarginalSet};
use crate::recovery::RecoveryConfig;
use crate::state::LocalState;
use crate::strings::{evaluate, relation_gap, Corner, MarginalString, Symbol};
use crate::{Error, Result};

/// `[1]^R [2]^L ... [num_cells]^L` in chain cluster indexing.
pub fn string_1d(num_cells: usize) -> Result<MarginalString> {
    if num_cells < 2 {
        return Err(Error::Geometry(format!(
            "need at least 2 cells, got {num_cells}"
        )));
    }
    let mut symbols = vec![Symbol::Extend { cell: 0, cluster: 0 }];
    for i in 1..num_cells {
        // [i+1]^L uses cluster {[i],[i+1]}, index i-1 (0-based cells)
        symbols.push(Symbol::Extend {
            cell: i,
            cluster: i - 1,
        });
    }
    Ok(MarginalString::new(symbols))
}

/// Cell index of `[i,j]` on an `n × n` grid (1-based coordinates).
fn grid_cell(n: usize, i: usize, j: usize) -> usize {
    (j - 1) * n + (i - 1)
}

/// Stored quadruple cluster index with lower-left corner `[i,j]`.
fn grid_quad(n: usize, i: usize, j: usize) -> Result<usize> {
    if i >= 1 && i < n && j >= 1 && j < n {
        Ok((j - 1) * (n - 1) + (i - 1))
    } else {
        Err(Error::Geometry(format!("no quadruple cluster at [{i},{j}]")))
    }
}

/// Extension symbol `[i,j]^corner` on an `n × n` grid.
fn grid_symbol(n: usize, i: usize, j: usize, corner: Corner) -> Result<Symbol> {
    let (qi, qj) = match corner {
        Corner::UR => (i, j),
        Corner::UL => {
            if i < 2 {
                return Err(Error::Geometry(format!("no UL cluster for [{i},{j}]")));
            }
            (i - 1, j)
        }
        Corner::DR => {
            if j < 2 {
                return Err(Error::Geometry(format!("no DR cluster for [{i},{j}]")));
            }
            (i, j - 1)
        }
        Corner::DL => {
            if i < 2 || j < 2 {
                return Err(Error::Geometry(format!("no DL cluster for [{i},{j}]")));
            }
            (i - 1, j - 1)
        }
    };
    Ok(Symbol::Extend {
        cell: grid_cell(n, i, j),
        cluster: grid_quad(n, qi, qj)?,
    })
}

fn grid_contract(n: usize, i: usize, j: usize) -> Symbol {
    Symbol::Contract {
        cell: grid_cell(n, i, j),
    }
}

/// Up-row string `[:,j]^U = [1,j]^UR Π [i+1,j]^UL`, or its reversed form
/// `[n,j]^UL Π [n-i,j]^UR`.
fn row_u(n: usize, j: usize, reversed: bool) -> Result<Vec<Symbol>> {
    let mut out = Vec::with_capacity(n);
    if reversed {
        out.push(grid_symbol(n, n, j, Corner::UL)?);
        for i in 1..n {
            out.push(grid_symbol(n, n - i, j, Corner::UR)?);
        }
    } else {
        out.push(grid_symbol(n, 1, j, Corner::UR)?);
        for i in 1..n {
            out.push(grid_symbol(n, i + 1, j, Corner::UL)?);
        }
    }
    Ok(out)
}

/// Down-row string `[:,j]^D = [1,j]^DR Π [i+1,j]^DL`, or its reversed form
/// `[n,j]^DL Π [n-i,j]^DR`.
fn row_d(n: usize, j: usize, reversed: bool) -> Result<Vec<Symbol>> {
    let mut out = Vec::with_capacity(n);
    if reversed {
        out.push(grid_symbol(n, n, j, Corner::DL)?);
        for i in 1..n {
            out.push(grid_symbol(n, n - i, j, Corner::DR)?);
        }
    } else {
        out.push(grid_symbol(n, 1, j, Corner::DR)?);
        for i in 1..n {
            out.push(grid_symbol(n, i + 1, j, Corner::DL)?);
        }
    }
    Ok(out)
}

fn row_contract(n: usize, j: usize) -> Vec<Symbol> {
    (1..=n).map(|i| grid_contract(n, i, j)).collect()
}

/// Proposed grid state: `[:,1]^U Π_{j=2}^{n} [:,j]^D`.
pub fn string_2d(n: usize) -> Result<MarginalString> {
    if n < 2 {
        return Err(Error::Geometry(format!("need a grid of side >= 2, got {n}")));
    }
    let mut symbols = row_u(n, 1, false)?;
    for j in 2..=n {
        symbols.extend(row_d(n, j, false)?);
    }
    Ok(MarginalString::new(symbols))
}

/// Comparison of a reconstructed global state against the input marginals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// (stored cluster index, trace distance) pairs.
    pub per_cluster_distance: Vec<(usize, f64)>,
    /// Worst per-cluster distance.
    pub delta: f64,
    /// ε of the input set, from the consistency/Markov validator.
    pub epsilon: f64,
    /// The size parameter the linear-in-ε bound is measured against
    /// (vertex count for chains, squared side for grids).
    pub size_param: f64,
    /// `delta / (size_param * epsilon)`; absent when ε is numerically zero.
    pub ratio: Option<f64>,
}

/// Builds the proposed global state for the set's layout and measures its
/// consistency with the inputs.
pub fn reconstruct(
    ms: &MarginalSet,
    cfg: RecoveryConfig,
) -> Result<(LocalState, ConsistencyReport)> {
    let (string, size_param) = match ms.geometry().layout() {
        Layout::Chain { n } => (string_1d(n / 2)?, n as f64),
        Layout::HexGrid { n, .. } => (string_2d(n)?, (n * n) as f64),
        Layout::Custom => return Err(Error::UnsupportedLayout),
    };
    reconstruct_with_string(ms, &string, size_param, cfg)
}

/// Reconstruction driver for an explicit creation string.
pub fn reconstruct_with_string(
    ms: &MarginalSet,
    string: &MarginalString,
    size_param: f64,
    cfg: RecoveryConfig,
) -> Result<(LocalState, ConsistencyReport)> {
    let g = ms.geometry();
    let global = evaluate(string, ms, cfg)?;
    if global.num_sites() != g.num_sites() {
        return Err(Error::ExtensionDomain(
            "creation string does not terminate on the full vertex set".into(),
        ));
    }
    let check = ms.check_with_cutoff(cfg.cutoff)?;
    let mut per_cluster_distance = Vec::new();
    for k in g.stored_clusters() {
        let sites = g.cluster_sites(k);
        let rebuilt = global.reduce_to(&sites)?;
        let dist = trace_distance(&rebuilt, &ms.entries()[&k])?;
        per_cluster_distance.push((k, dist));
    }
    let delta = per_cluster_distance
        .iter()
        .map(|&(_, d)| d)
        .fold(0.0, f64::max);
    let epsilon = check.epsilon;
    let ratio = if epsilon > 1e-12 {
        Some(delta / (size_param * epsilon))
    } else {
        None
    };
    Ok((
        global,
        ConsistencyReport {
            per_cluster_distance,
            delta,
            epsilon,
            size_param,
            ratio,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaSuite {
    OneD,
    TwoD,
}

/// Measured worst-case gap of one named relation over all its index
/// instances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationGapEntry {
    pub id: String,
    pub max_gap: f64,
    pub instances: usize,
}

type RelationInstances = Vec<(MarginalString, MarginalString)>;

/// Evaluates the relation suite appropriate for the layout. Entries record
/// the maximum trace-norm gap over all valid indices.
pub fn lemma_suite(
    ms: &MarginalSet,
    suite: LemmaSuite,
    cfg: RecoveryConfig,
) -> Result<Vec<RelationGapEntry>> {
    let relations = match (suite, ms.geometry().layout()) {
        (LemmaSuite::OneD, Layout::Chain { n }) => relations_1d(n / 2),
        (LemmaSuite::TwoD, Layout::HexGrid { n, .. }) => relations_2d(n)?,
        _ => return Err(Error::UnsupportedLayout),
    };
    relations
        .into_iter()
        .map(|(id, instances)| {
            let gaps: Result<Vec<f64>> = instances
                .par_iter()
                .map(|(lhs, rhs)| relation_gap(lhs, rhs, ms, cfg))
                .collect();
            let gaps = gaps?;
            Ok(RelationGapEntry {
                id,
                max_gap: gaps.iter().cloned().fold(0.0, f64::max),
                instances: gaps.len(),
            })
        })
        .collect()
}

fn relations_1d(m: usize) -> Vec<(String, RelationInstances)> {
    let ext = |cell: usize, cluster: usize| Symbol::Extend { cell, cluster };
    let con = |cell: usize| Symbol::Contract { cell };
    // 1-based cell coordinates; cluster {[i],[i+1]} has index i-1.
    let right = |i: usize| ext(i - 1, i - 1);
    let left = |i: usize| ext(i - 1, i - 2);
    let s = MarginalString::new;

    let mut out = Vec::new();
    let consistency: RelationInstances = (2..m)
        .map(|i| (s(vec![left(i)]), s(vec![right(i)])))
        .collect();
    out.push(("consistency".to_string(), consistency));
    let forward: RelationInstances = (1..m)
        .map(|i| {
            (
                s(vec![right(i), left(i + 1), con(i - 1)]),
                s(vec![left(i + 1)]),
            )
        })
        .collect();
    out.push(("forward_contraction".to_string(), forward));
    let exchange: RelationInstances = (1..m)
        .map(|i| {
            (
                s(vec![right(i), left(i + 1)]),
                s(vec![left(i + 1), right(i)]),
            )
        })
        .collect();
    out.push(("cell_exchange".to_string(), exchange));
    let backward: RelationInstances = (3..=m)
        .map(|i| {
            (
                s(vec![left(i), right(i - 1), con(i - 1)]),
                s(vec![right(i - 1)]),
            )
        })
        .collect();
    out.push(("backward_contraction".to_string(), backward));
    out
}

fn relations_2d(n: usize) -> Result<Vec<(String, RelationInstances)>> {
    use Corner::*;
    let s = MarginalString::new;
    let sym = |i: usize, j: usize, c: Corner| grid_symbol(n, i, j, c);
    let mut out = Vec::new();

    let mut inheritance_h = Vec::new();
    for j in 2..n {
        for i in 1..n {
            inheritance_h.push((
                s(vec![sym(i, j, UR)?, sym(i + 1, j, UL)?]),
                s(vec![sym(i + 1, j, DL)?, sym(i, j, DR)?]),
            ));
        }
    }
    out.push(("inheritance_horizontal".to_string(), inheritance_h));

    let mut inheritance_v = Vec::new();
    for j in 1..n {
        for i in 2..n {
            inheritance_v.push((
                s(vec![sym(i, j, UR)?, sym(i, j + 1, DR)?]),
                s(vec![sym(i, j + 1, DL)?, sym(i, j, UL)?]),
            ));
        }
    }
    out.push(("inheritance_vertical".to_string(), inheritance_v));

    let mut four_cell = Vec::new();
    let mut contract_ll = Vec::new();
    let mut contract_ur = Vec::new();
    for j in 1..n {
        for i in 1..n {
            let forward = vec![
                sym(i, j, UR)?,
                sym(i + 1, j, UL)?,
                sym(i, j + 1, DR)?,
                sym(i + 1, j + 1, DL)?,
            ];
            let reversed = vec![
                sym(i + 1, j + 1, DL)?,
                sym(i, j + 1, DR)?,
                sym(i + 1, j, UL)?,
                sym(i, j, UR)?,
            ];
            four_cell.push((s(forward.clone()), s(reversed.clone())));
            let mut lhs = forward.clone();
            lhs.push(grid_contract(n, i, j));
            contract_ll.push((
                s(lhs),
                s(vec![
                    sym(i + 1, j + 1, DL)?,
                    sym(i + 1, j, UL)?,
                    sym(i, j + 1, DR)?,
                ]),
            ));
            let mut lhs = reversed;
            lhs.push(grid_contract(n, i + 1, j + 1));
            contract_ur.push((
                s(lhs),
                s(vec![sym(i, j, UR)?, sym(i, j + 1, DR)?, sym(i + 1, j, UL)?]),
            ));
        }
    }
    out.push(("four_cell_exchange".to_string(), four_cell));
    out.push(("forward_cell_contraction".to_string(), contract_ll));
    out.push(("backward_cell_contraction".to_string(), contract_ur));

    let mut internal_reversal = Vec::new();
    for j in 2..n {
        internal_reversal.push((s(row_u(n, j, false)?), s(row_d(n, j, true)?)));
    }
    out.push(("internal_reversal".to_string(), internal_reversal));

    let mut forward_row = Vec::new();
    for j in 1..=n.saturating_sub(2) {
        let mut lhs = row_u(n, j, false)?;
        lhs.extend(row_d(n, j + 1, false)?);
        lhs.extend(row_contract(n, j));
        forward_row.push((s(lhs), s(row_u(n, j + 1, false)?)));
    }
    out.push(("forward_row_contraction".to_string(), forward_row));

    let mut row_exchange = Vec::new();
    for j in 1..n {
        let mut lhs = row_u(n, j, false)?;
        lhs.extend(row_d(n, j + 1, false)?);
        let mut rhs = row_d(n, j + 1, true)?;
        rhs.extend(row_u(n, j, true)?);
        row_exchange.push((s(lhs), s(rhs)));
    }
    out.push(("row_exchange".to_string(), row_exchange));

    let mut backward_row = Vec::new();
    for j in 2..n {
        let mut lhs = row_d(n, j + 1, true)?;
        lhs.extend(row_u(n, j, true)?);
        lhs.extend(row_contract(n, j + 1));
        backward_row.push((s(lhs), s(row_d(n, j, true)?)));
    }
    out.push(("backward_row_contraction".to_string(), backward_row));

    let mut two_row = Vec::new();
    for m in 1..n {
        let mut lhs = string_2d(n)?.symbols().to_vec();
        for j in 1..m {
            lhs.extend(row_contract(n, j));
        }
        for j in m + 2..=n {
            lhs.extend(row_contract(n, j));
        }
        let mut rhs = row_u(n, m, false)?;
        rhs.extend(row_d(n, m + 1, false)?);
        two_row.push((s(lhs), s(rhs)));
    }
    out.push(("two_row_reduction".to_string(), two_row));

    let mut fwd_super = Vec::new();
    let mut super_exchange = Vec::new();
    let mut bwd_super = Vec::new();
    for m in 1..n {
        for i in 1..=n.saturating_sub(2) {
            let lhs = vec![
                sym(i, m, UR)?,
                sym(i, m + 1, DR)?,
                sym(i + 1, m, UL)?,
                sym(i + 1, m + 1, DL)?,
            ];
            let mut fwd = lhs.clone();
            fwd.push(grid_contract(n, i, m));
            fwd.push(grid_contract(n, i, m + 1));
            fwd_super.push((
                s(fwd),
                s(vec![sym(i + 1, m, UR)?, sym(i + 1, m + 1, DR)?]),
            ));
            super_exchange.push((
                s(lhs),
                s(vec![
                    sym(i + 1, m, UR)?,
                    sym(i + 1, m + 1, DR)?,
                    sym(i, m + 1, DR)?,
                    sym(i, m, UR)?,
                ]),
            ));
        }
        for i in 2..n {
            let mut lhs = vec![
                sym(i + 1, m + 1, DL)?,
                sym(i + 1, m, UL)?,
                sym(i, m + 1, DR)?,
                sym(i, m, UR)?,
            ];
            lhs.push(grid_contract(n, i + 1, m + 1));
            lhs.push(grid_contract(n, i + 1, m));
            bwd_super.push((s(lhs), s(vec![sym(i, m + 1, DL)?, sym(i, m, UL)?])));
        }
    }
    out.push(("forward_supercell_contraction".to_string(), fwd_super));
    out.push(("supercell_exchange".to_string(), super_exchange));
    out.push(("backward_supercell_contraction".to_string(), bwd_super));

    Ok(out)
}
