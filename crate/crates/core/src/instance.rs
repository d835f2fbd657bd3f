//! Blockade graphs and the monotone 2SAT instances they encode.
//!
//! Every vertex is an atom; an edge joins two atoms closer than the blockade
//! radius and contributes the clause `(¬x_i ∨ ¬x_j)`. Satisfying assignments
//! are exactly the independent sets of the graph.
//!
//! Vertices carry stable integer labels. Induced subgraphs and register
//! reductions keep the labels of the surviving vertices, so assignments can
//! always be reported against the original instance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph with optional planar coordinates and stable labels.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockadeGraph {
    edges: Vec<(usize, usize)>,
    coords: Option<Vec<[f64; 2]>>,
    labels: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
    label_index: HashMap<usize, usize>,
}

impl BlockadeGraph {
    /// Graph on `n` vertices labelled `0..n`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::from_parts(n, edges.into_iter().collect(), None, (0..n).collect())
    }

    /// Validating constructor used by every other builder.
    pub fn from_parts(
        n: usize,
        edges: Vec<(usize, usize)>,
        coords: Option<Vec<[f64; 2]>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} vertices",
                labels.len(),
                n
            )));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "{} coordinates for {} vertices",
                    c.len(),
                    n
                )));
            }
        }
        let mut label_index = HashMap::with_capacity(n);
        for (i, &l) in labels.iter().enumerate() {
            if label_index.insert(l, i).is_some() {
                return Err(Error::DuplicateLabel(l));
            }
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({},{})", e.0, e.1)));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            edges,
            coords,
            labels,
            adjacency,
            label_index,
        })
    }

    pub fn empty() -> Self {
        Self::new(0, []).expect("empty graph is valid")
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Edges as sorted `(i, j)` index pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Position of the vertex carrying `label`.
    pub fn index_of(&self, label: usize) -> Option<usize> {
        self.label_index.get(&label).copied()
    }

    /// Bitmask of the neighbours of vertex `i`; requires `n <= 64`.
    pub fn neighbor_mask(&self, i: usize) -> u64 {
        debug_assert!(self.n() <= 64);
        self.adjacency[i].iter().fold(0u64, |m, &j| m | (1u64 << j))
    }

    /// Induced subgraph on the given vertex indices, kept in ascending order.
    pub fn induced_subgraph(&self, keep: &[usize]) -> BlockadeGraph {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut remap = vec![usize::MAX; self.n()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| remap[a] != usize::MAX && remap[b] != usize::MAX)
            .map(|&(a, b)| (remap[a], remap[b]))
            .collect();
        let coords = self.coords.as_ref().map(|c| keep.iter().map(|&i| c[i]).collect());
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        BlockadeGraph::from_parts(keep.len(), edges, coords, labels)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// Whether `bits` (vertex `i` at bit `i`) is an independent set.
    pub fn is_independent(&self, bits: u64) -> bool {
        self.edges
            .iter()
            .all(|&(a, b)| (bits >> a) & 1 == 0 || (bits >> b) & 1 == 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Native on-disk form of a [`BlockadeGraph`].
#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
    coords: Option<Vec<[f64; 2]>>,
    labels: Vec<usize>,
}

impl From<&BlockadeGraph> for GraphJson {
    fn from(g: &BlockadeGraph) -> Self {
        GraphJson {
            n: g.n(),
            edges: g.edges.iter().map(|&(a, b)| [a, b]).collect(),
            coords: g.coords.clone(),
            labels: g.labels.clone(),
        }
    }
}

impl TryFrom<GraphJson> for BlockadeGraph {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        let edges = raw.edges.into_iter().map(|[a, b]| (a, b)).collect();
        BlockadeGraph::from_parts(raw.n, edges, raw.coords, raw.labels)
    }
}

/// Open chain of `n` atoms at unit spacing along the x axis.
pub fn build_chain(n: usize) -> Result<BlockadeGraph> {
    if n == 0 {
        return Err(Error::InvalidSize("chain needs at least one atom".into()));
    }
    build_grid(1, n)
}

/// `lx` rows of `ly` atoms each, row-major, unit spacing, rook adjacency.
///
/// Atom `r * ly + c` sits at `(c, r)`, so `build_grid(1, n)` is the chain.
pub fn build_grid(lx: usize, ly: usize) -> Result<BlockadeGraph> {
    if lx == 0 || ly == 0 {
        return Err(Error::InvalidSize(format!("grid dimensions {lx}x{ly}")));
    }
    let n = lx * ly;
    let mut edges = Vec::with_capacity(2 * n);
    let mut coords = Vec::with_capacity(n);
    for r in 0..lx {
        for c in 0..ly {
            let i = r * ly + c;
            coords.push([c as f64, r as f64]);
            if c + 1 < ly {
                edges.push((i, i + 1));
            }
            if r + 1 < lx {
                edges.push((i, i + ly));
            }
        }
    }
    BlockadeGraph::from_parts(n, edges, Some(coords), (0..n).collect())
}

/// Removes the atoms carrying the `holes` labels.
pub fn punch_grid(g: &BlockadeGraph, holes: &[usize]) -> Result<BlockadeGraph> {
    let mut removed = vec![false; g.n()];
    for &h in holes {
        let i = g.index_of(h).ok_or(Error::UnknownLabel(h))?;
        if removed[i] {
            return Err(Error::DuplicateLabel(h));
        }
        removed[i] = true;
    }
    let keep: Vec<usize> = (0..g.n()).filter(|&i| !removed[i]).collect();
    Ok(g.induced_subgraph(&keep))
}

/// Result of a unit-disk construction together with any layout warnings.
#[derive(Clone, Debug)]
pub struct UnitDisk {
    pub graph: BlockadeGraph,
    pub warnings: Vec<String>,
}

/// Edge between every pair of points strictly closer than `r_b`.
pub fn unit_disk_graph(coords: &[[f64; 2]], r_b: f64) -> Result<UnitDisk> {
    if coords.is_empty() {
        return Err(Error::InvalidSize("unit-disk graph needs at least one point".into()));
    }
    if !(r_b > 0.0 && r_b.is_finite()) {
        return Err(Error::Parameter(format!("blockade radius must be positive, got {r_b}")));
    }
    let mut edges = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let d = dx.hypot(dy);
            if d == 0.0 {
                warnings.push(format!("atoms {i} and {j} share coordinates"));
            }
            if d < r_b {
                edges.push((i, j));
            }
        }
    }
    let n = coords.len();
    let graph = BlockadeGraph::from_parts(n, edges, Some(coords.to_vec()), (0..n).collect())?;
    Ok(UnitDisk { graph, warnings })
}

/// Truth assignment over the vertices of a graph, vertex `i` at position `i`.
///
/// The text form prints vertex `n-1` first, so `"001"` sets vertex 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| (mask >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars().rev() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(Error::Parameter(format!("invalid bit '{ch}' in \"{s}\"")));
                }
            }
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter().rev() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Formats a basis state of `n` atoms, highest vertex first.
pub fn format_bits(mask: u64, n: usize) -> String {
    (0..n)
        .rev()
        .map(|i| if (mask >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`format_bits`].
pub fn parse_bits(s: &str) -> Result<u64> {
    if s.len() > 64 {
        return Err(Error::Parameter(format!("bitstring longer than 64: \"{s}\"")));
    }
    s.chars().try_fold(0u64, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::Parameter(format!("invalid bit '{ch}' in \"{s}\""))),
    })
}

/// True iff no edge has both endpoints set.
pub fn satisfies(g: &BlockadeGraph, a: &Assignment) -> Result<bool> {
    if a.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: a.len(),
        });
    }
    Ok(g.edges().iter().all(|&(i, j)| !(a.get(i) && a.get(j))))
}

/// DIMACS CNF with one `-i -j 0` clause per edge.
///
/// Non-identity labels are preserved in a `c labels ...` comment line.
pub fn to_cnf(g: &BlockadeGraph) -> String {
    let mut out = String::new();
    let identity = g.labels().iter().enumerate().all(|(i, &l)| i == l);
    if !identity {
        out.push_str("c labels");
        for l in g.labels() {
            out.push_str(&format!(" {l}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("p cnf {} {}\n", g.n(), g.edges().len()));
    for &(a, b) in g.edges() {
        out.push_str(&format!("-{} -{} 0\n", a + 1, b + 1));
    }
    out
}

pub fn parse_cnf(text: &str) -> Result<BlockadeGraph> {
    let mut header: Option<(usize, usize)> = None;
    let mut labels: Option<Vec<usize>> = None;
    let mut edges = Vec::new();
    let mut clause: Vec<i64> = Vec::new();
    let mut clause_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('c') {
            if let Some(list) = rest.trim_start().strip_prefix("labels") {
                let parsed: std::result::Result<Vec<usize>, _> = list.split_whitespace().map(str::parse).collect();
                labels = Some(parsed.map_err(|_| Error::Parse {
                    line,
                    msg: "malformed labels comment".into(),
                })?);
            }
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "duplicate header".into(),
                });
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let bad = || Error::Parse {
                line,
                msg: format!("malformed header \"{trimmed}\""),
            };
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(bad());
            }
            let n = parts[2].parse().map_err(|_| bad())?;
            let m = parts[3].parse().map_err(|_| bad())?;
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(Error::Parse {
                line,
                msg: "clause before header".into(),
            });
        };
        for tok in trimmed.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid literal \"{tok}\""),
            })?;
            if clause.is_empty() {
                clause_line = line;
            }
            if lit != 0 {
                if lit > 0 {
                    return Err(Error::Parse {
                        line,
                        msg: "non-monotone clause (positive literal)".into(),
                    });
                }
                if lit.unsigned_abs() as usize > n {
                    return Err(Error::Parse {
                        line,
                        msg: format!("variable {} exceeds declared {n}", -lit),
                    });
                }
                clause.push(lit);
                continue;
            }
            if clause.len() != 2 {
                return Err(Error::Parse {
                    line: clause_line,
                    msg: format!("clause has {} literals, expected 2", clause.len()),
                });
            }
            let a = (-clause[0]) as usize - 1;
            let b = (-clause[1]) as usize - 1;
            if a == b {
                return Err(Error::Parse {
                    line: clause_line,
                    msg: "clause repeats a variable".into(),
                });
            }
            edges.push((a, b, clause_line));
            clause.clear();
        }
    }
    if !clause.is_empty() {
        return Err(Error::Parse {
            line: clause_line,
            msg: "unterminated clause".into(),
        });
    }
    let Some((n, m)) = header else {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: "missing header".into(),
        });
    };
    if edges.len() != m {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("header declares {m} clauses, found {}", edges.len()),
        });
    }
    let mut seen = BTreeSet::new();
    for &(a, b, line) in &edges {
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::Parse {
                line,
                msg: "duplicate clause".into(),
            });
        }
    }
    let labels = labels.unwrap_or_else(|| (0..n).collect());
    BlockadeGraph::from_parts(n, edges.into_iter().map(|(a, b, _)| (a, b)).collect(), None, labels)
}

/// Atom register under self-reduction: the still-active part of the
/// original graph plus the bits fixed so far, both keyed by original label.
#[derive(Clone, Debug)]
pub struct Register {
    original: Arc<BlockadeGraph>,
    active: BlockadeGraph,
    fixed: BTreeMap<usize, bool>,
}

impl Register {
    pub fn new(graph: BlockadeGraph) -> Self {
        Self {
            active: graph.clone(),
            original: Arc::new(graph),
            fixed: BTreeMap::new(),
        }
    }

    pub fn original(&self) -> &BlockadeGraph {
        &self.original
    }

    pub fn graph(&self) -> &BlockadeGraph {
        &self.active
    }

    pub fn fixed(&self) -> &BTreeMap<usize, bool> {
        &self.fixed
    }

    pub fn is_complete(&self) -> bool {
        self.active.is_empty()
    }

    /// Fix `label` to 0: the atom is simply dropped.
    pub fn fix_zero(&self, label: usize) -> Result<Register> {
        let v = self.active.index_of(label).ok_or(Error::NotActive(label))?;
        let keep: Vec<usize> = (0..self.active.n()).filter(|&i| i != v).collect();
        let mut fixed = self.fixed.clone();
        fixed.insert(label, false);
        Ok(Register {
            original: Arc::clone(&self.original),
            active: self.active.induced_subgraph(&keep),
            fixed,
        })
    }

    /// Fix `label` to 1: the atom and its active neighbours are dropped,
    /// the neighbours being fixed to 0.
    pub fn fix_one(&self, label: usize) -> Result<Register> {
        let v = self.active.index_of(label).ok_or(Error::NotActive(label))?;
        let mut drop = vec![false; self.active.n()];
        drop[v] = true;
        let mut fixed = self.fixed.clone();
        fixed.insert(label, true);
        for &u in self.active.neighbors(v) {
            drop[u] = true;
            fixed.insert(self.active.label(u), false);
        }
        let keep: Vec<usize> = (0..self.active.n()).filter(|&i| !drop[i]).collect();
        Ok(Register {
            original: Arc::clone(&self.original),
            active: self.active.induced_subgraph(&keep),
            fixed,
        })
    }

    /// Fixes every remaining active atom to 0.
    pub fn complete_with_zeros(&self) -> Register {
        let mut fixed = self.fixed.clone();
        for &l in self.active.labels() {
            fixed.insert(l, false);
        }
        Register {
            original: Arc::clone(&self.original),
            active: BlockadeGraph::empty(),
            fixed,
        }
    }

    /// Full assignment over the original graph, defined once complete.
    pub fn assignment(&self) -> Option<Assignment> {
        if !self.is_complete() {
            return None;
        }
        let g = &self.original;
        let bits = g
            .labels()
            .iter()
            .map(|l| self.fixed.get(l).copied())
            .collect::<Option<Vec<bool>>>()?;
        Some(Assignment::new(bits))
    }
}
