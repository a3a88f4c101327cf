//! Sequences of polymorphic extensions and contractions.
//!
//! A [`Symbol`] either contracts a cell (partial trace) or extends the
//! current support by a cell via a recovery channel built from a cluster
//! marginal. A [`MarginalString`] applies its symbols left to right starting
//! from the scalar (empty support); the string can be read as the order in
//! which a state is created.
//!
//! Extension semantics at support `X`: for cell `a` and cluster `A`, the
//! channel is built from the reduction of the cluster marginal onto
//! `B ∪ a` with `B = N(a) ∩ X`, and applied with everything outside `B ∪ a`
//! as spectators. The very first extension (empty `B`) just reduces the
//! cluster marginal onto `a`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{Geometry, Layout, MarginalSet};
use crate::recovery::{build_recovery, RecoveryConfig};
use crate::state::{LocalState, SiteId};
use crate::measures::trace_distance;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    /// Grow the support by `cell`, conditioning on its in-support
    /// neighborhood, with the recovery channel built from `cluster`'s
    /// marginal. The cluster must contain the cell.
    Extend { cell: usize, cluster: usize },
    /// Trace out `cell`.
    Contract { cell: usize },
}

impl Symbol {
    pub fn cell(&self) -> usize {
        match *self {
            Symbol::Extend { cell, .. } | Symbol::Contract { cell } => cell,
        }
    }

    pub fn is_extend(&self) -> bool {
        matches!(self, Symbol::Extend { .. })
    }
}

/// 1D cluster choice relative to a cell: `[i]^L` uses `{[i-1],[i]}`,
/// `[i]^R` uses `{[i],[i+1]}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineDir {
    L,
    R,
}

/// 2D cluster choice relative to a cell `[i,j]`: the quadruple whose corner
/// the cell occupies. `UR` is `{[i,j],[i+1,j],[i,j+1],[i+1,j+1]}`, i.e. the
/// cluster sits up-right of the cell; `UL`, `DR`, `DL` follow the same
/// pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    UR,
    UL,
    DR,
    DL,
}

impl Corner {
    pub fn as_str(&self) -> &'static str {
        match self {
            Corner::UR => "UR",
            Corner::UL => "UL",
            Corner::DR => "DR",
            Corner::DL => "DL",
        }
    }
}

/// `[i]^L` / `[i]^R` extension symbol on a chain geometry (1-based cell
/// coordinate).
pub fn line_ext(g: &Geometry, i: usize, dir: LineDir) -> Result<Symbol> {
    let Layout::Chain { n } = g.layout() else {
        return Err(Error::UnsupportedLayout);
    };
    let m = n / 2;
    let cell = g
        .line_cell(i)
        .ok_or_else(|| Error::Geometry(format!("no cell [{i}]")))?;
    let cluster = match dir {
        // cluster {[i],[i+1]} has index i-1, cluster {[i-1],[i]} index i-2
        LineDir::R if i < m => i - 1,
        LineDir::L if i >= 2 => i - 2,
        _ => {
            return Err(Error::Geometry(format!(
                "cell [{i}] has no {:?} cluster",
                dir
            )))
        }
    };
    Ok(Symbol::Extend { cell, cluster })
}

/// `[i,j]^corner` extension symbol on a hex-grid geometry.
pub fn grid_ext(g: &Geometry, i: usize, j: usize, corner: Corner) -> Result<Symbol> {
    let Layout::HexGrid { .. } = g.layout() else {
        return Err(Error::UnsupportedLayout);
    };
    let cell = g
        .grid_cell(i, j)
        .ok_or_else(|| Error::Geometry(format!("no cell [{i},{j}]")))?;
    let (qi, qj) = match corner {
        Corner::UR => (i, j),
        Corner::UL => (i.wrapping_sub(1), j),
        Corner::DR => (i, j.wrapping_sub(1)),
        Corner::DL => (i.wrapping_sub(1), j.wrapping_sub(1)),
    };
    let cluster = g.quad_cluster(qi, qj).ok_or_else(|| {
        Error::Geometry(format!("cell [{i},{j}] has no {} cluster", corner.as_str()))
    })?;
    Ok(Symbol::Extend { cell, cluster })
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MarginalString {
    symbols: Vec<Symbol>,
}

impl MarginalString {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self { symbols }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn push(&mut self, s: Symbol) {
        self.symbols.push(s);
    }

    pub fn extend_from(&mut self, other: &MarginalString) {
        self.symbols.extend_from_slice(&other.symbols);
    }

    pub fn swapped(&self, k: usize) -> MarginalString {
        let mut symbols = self.symbols.clone();
        symbols.swap(k, k + 1);
        MarginalString { symbols }
    }

    /// Renders the string with layout sugar where possible
    /// (`[i]^R`, `[i,j]^DL`, `[i]^-1`), generic tokens otherwise.
    pub fn format_with(&self, g: &Geometry) -> String {
        let mut out = String::new();
        for (k, sym) in self.symbols.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let label = &g.cells()[sym.cell()].label;
            match *sym {
                Symbol::Contract { .. } => {
                    let _ = write!(out, "{label}^-1");
                }
                Symbol::Extend { cell, cluster } => {
                    if let Some(tag) = directional_tag(g, cell, cluster) {
                        let _ = write!(out, "{label}^{tag}");
                    } else {
                        let _ = write!(out, "e:{label}@{cluster}");
                    }
                }
            }
        }
        out
    }

    /// Parses whitespace-separated tokens: `[i]^L|R|-1`,
    /// `[i,j]^UR|UL|DR|DL|-1`, or the generic forms `c:<label>` and
    /// `e:<label>@<cluster-index>`.
    pub fn parse(text: &str, g: &Geometry) -> Result<Self> {
        let mut symbols = Vec::new();
        for token in text.split_whitespace() {
            symbols.push(parse_token(token, g)?);
        }
        Ok(Self { symbols })
    }
}

fn directional_tag(g: &Geometry, cell: usize, cluster: usize) -> Option<String> {
    match g.layout() {
        Layout::Chain { .. } => {
            let i = g.cells()[cell]
                .label
                .trim_start_matches('[')
                .trim_end_matches(']')
                .parse::<usize>()
                .ok()?;
            if i >= 1 && cluster + 1 == i {
                Some("R".into())
            } else if i >= 2 && cluster + 2 == i {
                Some("L".into())
            } else {
                None
            }
        }
        Layout::HexGrid { .. } => {
            let (i, j) = parse_grid_label(&g.cells()[cell].label)?;
            for corner in [Corner::UR, Corner::UL, Corner::DR, Corner::DL] {
                if let Ok(Symbol::Extend { cluster: q, .. }) = grid_ext(g, i, j, corner) {
                    if q == cluster {
                        return Some(corner.as_str().into());
                    }
                }
            }
            None
        }
        Layout::Custom => None,
    }
}

fn parse_grid_label(label: &str) -> Option<(usize, usize)> {
    let inner = label.strip_prefix('[')?.strip_suffix(']')?;
    let (i, j) = inner.split_once(',')?;
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

fn parse_token(token: &str, g: &Geometry) -> Result<Symbol> {
    if let Some(rest) = token.strip_prefix("c:") {
        let cell = g
            .cell_index(rest)
            .ok_or_else(|| Error::Parse(format!("unknown cell {rest}")))?;
        return Ok(Symbol::Contract { cell });
    }
    if let Some(rest) = token.strip_prefix("e:") {
        let (label, cluster) = rest
            .rsplit_once('@')
            .ok_or_else(|| Error::Parse(format!("missing @cluster in {token}")))?;
        let cell = g
            .cell_index(label)
            .ok_or_else(|| Error::Parse(format!("unknown cell {label}")))?;
        let cluster: usize = cluster
            .parse()
            .map_err(|_| Error::Parse(format!("bad cluster index in {token}")))?;
        if cluster >= g.clusters().len() {
            return Err(Error::Parse(format!("cluster {cluster} out of range")));
        }
        if !g.clusters()[cluster].cells.contains(&cell) {
            return Err(Error::Parse(format!(
                "cluster {cluster} does not contain cell {label}"
            )));
        }
        return Ok(Symbol::Extend { cell, cluster });
    }
    let (label, tag) = token
        .rsplit_once('^')
        .ok_or_else(|| Error::Parse(format!("cannot parse token {token}")))?;
    if tag == "-1" {
        let cell = g
            .cell_index(label)
            .ok_or_else(|| Error::Parse(format!("unknown cell {label}")))?;
        return Ok(Symbol::Contract { cell });
    }
    match g.layout() {
        Layout::Chain { .. } => {
            let i: usize = label
                .trim_start_matches('[')
                .trim_end_matches(']')
                .parse()
                .map_err(|_| Error::Parse(format!("bad cell label {label}")))?;
            let dir = match tag {
                "L" => LineDir::L,
                "R" => LineDir::R,
                _ => return Err(Error::Parse(format!("bad direction {tag}"))),
            };
            line_ext(g, i, dir)
        }
        Layout::HexGrid { .. } => {
            let (i, j) = parse_grid_label(label)
                .ok_or_else(|| Error::Parse(format!("bad cell label {label}")))?;
            let corner = match tag {
                "UR" => Corner::UR,
                "UL" => Corner::UL,
                "DR" => Corner::DR,
                "DL" => Corner::DL,
                _ => return Err(Error::Parse(format!("bad corner {tag}"))),
            };
            grid_ext(g, i, j, corner)
        }
        Layout::Custom => Err(Error::Parse(
            "directional sugar needs a chain or hex-grid layout".into(),
        )),
    }
}

/// Outcome of the well-formedness simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum WellFormedness {
    Ok { final_support: Vec<SiteId> },
    Fail { index: usize, reason: String },
}

impl WellFormedness {
    pub fn is_ok(&self) -> bool {
        matches!(self, WellFormedness::Ok { .. })
    }
}

/// Simulates the support evolution of `s` from the empty support: a
/// contraction needs its cell inside the support, an extension needs its
/// cell outside and its in-support neighborhood inside the cluster.
/// Returns the first failing symbol (0-based) or the final support.
pub fn well_formed(s: &MarginalString, g: &Geometry) -> WellFormedness {
    let mut support: BTreeSet<SiteId> = BTreeSet::new();
    for (index, sym) in s.symbols().iter().enumerate() {
        match check_symbol(sym, g, &support) {
            Err(reason) => return WellFormedness::Fail { index, reason },
            Ok(()) => apply_symbol_support(sym, g, &mut support),
        }
    }
    WellFormedness::Ok {
        final_support: support.into_iter().collect(),
    }
}

fn check_symbol(sym: &Symbol, g: &Geometry, support: &BTreeSet<SiteId>) -> std::result::Result<(), String> {
    match *sym {
        Symbol::Contract { cell } => {
            if cell >= g.cells().len() {
                return Err(format!("cell index {cell} out of range"));
            }
            let sites = &g.cells()[cell].sites;
            if !sites.iter().all(|s| support.contains(s)) {
                return Err(format!(
                    "cell {} not inside the current support",
                    g.cells()[cell].label
                ));
            }
            Ok(())
        }
        Symbol::Extend { cell, cluster } => {
            if cell >= g.cells().len() {
                return Err(format!("cell index {cell} out of range"));
            }
            if cluster >= g.clusters().len() {
                return Err(format!("cluster index {cluster} out of range"));
            }
            if !g.clusters()[cluster].cells.contains(&cell) {
                return Err(format!(
                    "cluster {cluster} does not contain cell {}",
                    g.cells()[cell].label
                ));
            }
            let sites = &g.cells()[cell].sites;
            if sites.iter().any(|s| support.contains(s)) {
                return Err("cell already in support".into());
            }
            let bar: BTreeSet<SiteId> = g.cluster_sites(cluster).into_iter().collect();
            let hood = g.neighborhood(sites);
            for s in hood.intersection(&support.clone()) {
                if !bar.contains(s) {
                    return Err(format!(
                        "in-support neighborhood site {s} lies outside the cluster"
                    ));
                }
            }
            Ok(())
        }
    }
}

fn apply_symbol_support(sym: &Symbol, g: &Geometry, support: &mut BTreeSet<SiteId>) {
    let sites = &g.cells()[sym.cell()].sites;
    match sym {
        Symbol::Contract { .. } => {
            for s in sites {
                support.remove(s);
            }
        }
        Symbol::Extend { .. } => {
            support.extend(sites.iter().copied());
        }
    }
}

/// Evaluates the string against the marginal set. The string must be
/// well-formed and must not terminate on the empty support.
pub fn evaluate(
    s: &MarginalString,
    ms: &MarginalSet,
    cfg: RecoveryConfig,
) -> Result<LocalState> {
    let g = ms.geometry();
    let mut support: BTreeSet<SiteId> = BTreeSet::new();
    let mut state: Option<LocalState> = None;
    for (index, sym) in s.symbols().iter().enumerate() {
        if let Err(reason) = check_symbol(sym, g, &support) {
            return Err(Error::MalformedString { index, reason });
        }
        state = apply_symbol(sym, state, ms, cfg)?;
        apply_symbol_support(sym, g, &mut support);
    }
    state.ok_or_else(|| Error::MalformedString {
        index: s.len(),
        reason: "string evaluates to a scalar (empty support)".into(),
    })
}

fn apply_symbol(
    sym: &Symbol,
    state: Option<LocalState>,
    ms: &MarginalSet,
    cfg: RecoveryConfig,
) -> Result<Option<LocalState>> {
    let g = ms.geometry();
    match *sym {
        Symbol::Contract { cell } => {
            let x = state.expect("checked by well-formedness");
            let sites = &g.cells()[cell].sites;
            if sites.len() == x.num_sites() {
                // Contracting the whole support: back to the scalar.
                return Ok(None);
            }
            Ok(Some(x.partial_trace(sites)?))
        }
        Symbol::Extend { cell, cluster } => {
            let marginal = ms.marginal(cluster)?;
            let c_sites = g.cells()[cell].sites.clone();
            match state {
                None => Ok(Some(marginal.reduce_to(&c_sites)?)),
                Some(x) => {
                    let hood = g.neighborhood(&c_sites);
                    let b_sites: Vec<SiteId> = x
                        .support()
                        .iter()
                        .copied()
                        .filter(|s| hood.contains(s))
                        .collect();
                    let mut bc: Vec<SiteId> =
                        b_sites.iter().chain(c_sites.iter()).copied().collect();
                    bc.sort_unstable();
                    let rho_bc = marginal.reduce_to(&bc)?;
                    let map = build_recovery(&rho_bc, &b_sites, &c_sites, cfg)?;
                    Ok(Some(map.apply(&x)?))
                }
            }
        }
    }
}

/// Decides whether two adjacent symbols commute for purely syntactic
/// reasons: the maps they apply act on disjoint subsystems, so exchanging
/// them composes the same channels. Two contractions always commute. For
/// pairs involving an extension of cell `a`, the other cell must avoid the
/// full neighborhood of `a` (otherwise the exchanged order would condition
/// on a different set), and two extensions must additionally not share an
/// in-support neighbor.
///
/// `support` is the support before either symbol is applied; both orders
/// must be applicable there.
pub fn syntactic_commute(
    x: &Symbol,
    y: &Symbol,
    g: &Geometry,
    support: &[SiteId],
) -> Result<bool> {
    let mut supp: BTreeSet<SiteId> = support.iter().copied().collect();
    // applicability of the pair in the given order
    check_symbol(x, g, &supp).map_err(|reason| Error::MalformedString { index: 0, reason })?;
    let before = supp.clone();
    apply_symbol_support(x, g, &mut supp);
    check_symbol(y, g, &supp).map_err(|reason| Error::MalformedString { index: 1, reason })?;

    let cell_sites =
        |cell: usize| -> BTreeSet<SiteId> { g.cells()[cell].sites.iter().copied().collect() };
    let result = match (x, y) {
        (Symbol::Contract { .. }, Symbol::Contract { .. }) => true,
        (Symbol::Extend { cell: a, .. }, Symbol::Contract { cell: b })
        | (Symbol::Contract { cell: b }, Symbol::Extend { cell: a, .. }) => {
            let hood_a = g.neighborhood(&g.cells()[*a].sites);
            cell_sites(*b).iter().all(|s| !hood_a.contains(s))
        }
        (Symbol::Extend { cell: a, .. }, Symbol::Extend { cell: b, .. }) => {
            let sa = cell_sites(*a);
            let sb = cell_sites(*b);
            let hood_a = g.neighborhood(&g.cells()[*a].sites);
            let hood_b = g.neighborhood(&g.cells()[*b].sites);
            let cells_clear = sa.iter().all(|s| !hood_b.contains(s))
                && sb.iter().all(|s| !hood_a.contains(s))
                && sa.is_disjoint(&sb);
            let shared_conditioning = hood_a
                .intersection(&hood_b)
                .any(|s| before.contains(s));
            cells_clear && !shared_conditioning
        }
    };
    Ok(result)
}

/// Trace-norm gap between the evaluations of two strings that terminate on
/// the same support.
pub fn relation_gap(
    lhs: &MarginalString,
    rhs: &MarginalString,
    ms: &MarginalSet,
    cfg: RecoveryConfig,
) -> Result<f64> {
    let a = evaluate(lhs, ms, cfg)?;
    let b = evaluate(rhs, ms, cfg)?;
    trace_distance(&a, &b)
}
