//! Exact independent-set counts: a brute-force walk and a transfer-matrix DP.

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::instance::BlockadeGraph;

/// Largest register the brute-force walk accepts.
pub const BRUTE_FORCE_MAX_ATOMS: usize = 24;

/// Largest column the transfer-matrix DP accepts.
pub const DP_MAX_WIDTH: usize = 20;

/// Counts independent sets by walking the constrained backtracking tree.
pub fn exact_count_bruteforce(g: &BlockadeGraph) -> Result<BigUint> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_ATOMS {
        return Err(Error::Resource(format!(
            "brute force counts at most {BRUTE_FORCE_MAX_ATOMS} atoms, got {n}"
        )));
    }
    let masks: Vec<u64> = (0..n).map(|i| g.neighbor_mask(i)).collect();
    fn walk(masks: &[u64], i: usize, blocked: u64) -> u64 {
        if i == masks.len() {
            return 1;
        }
        let skip = walk(masks, i + 1, blocked);
        if blocked >> i & 1 == 1 {
            skip
        } else {
            skip + walk(masks, i + 1, blocked | masks[i])
        }
    }
    Ok(BigUint::from(walk(&masks, 0, 0)))
}

/// Vertices grouped into columns such that every edge stays inside a column
/// or joins neighbouring columns.
fn columns(g: &BlockadeGraph, component: &[usize]) -> Vec<Vec<usize>> {
    if let Some(coords) = g.coords() {
        let mut xs: Vec<f64> = component.iter().map(|&v| coords[v][0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let col_of = |v: usize| xs.partition_point(|&x| x < coords[v][0] - 1e-9);
        let layered = component
            .iter()
            .all(|&v| g.neighbors(v).iter().all(|&u| col_of(u).abs_diff(col_of(v)) <= 1));
        if layered {
            let mut cols = vec![Vec::new(); xs.len()];
            for &v in component {
                cols[col_of(v)].push(v);
            }
            return cols;
        }
    }
    // breadth-first layers never have edges skipping a layer
    let mut layer = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::from([component[0]]);
    layer[component[0]] = 0;
    let mut cols: Vec<Vec<usize>> = Vec::new();
    while let Some(v) = queue.pop_front() {
        if cols.len() <= layer[v] {
            cols.push(Vec::new());
        }
        cols[layer[v]].push(v);
        for &u in g.neighbors(v) {
            if layer[u] == usize::MAX {
                layer[u] = layer[v] + 1;
                queue.push_back(u);
            }
        }
    }
    cols
}

fn components(g: &BlockadeGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.n()];
    let mut out = Vec::new();
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            for &u in g.neighbors(comp[k]) {
                if !seen[u] {
                    seen[u] = true;
                    comp.push(u);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Column width the DP would need for `g`.
pub fn dp_width(g: &BlockadeGraph) -> usize {
    components(g)
        .iter()
        .flat_map(|c| columns(g, c))
        .map(|c| c.len())
        .max()
        .unwrap_or(0)
}

fn count_component(g: &BlockadeGraph, component: &[usize]) -> Result<BigUint> {
    let cols = columns(g, component);
    let width = cols.iter().map(Vec::len).max().unwrap_or(0);
    if width > DP_MAX_WIDTH {
        return Err(Error::Resource(format!(
            "transfer-matrix column width {width} exceeds {DP_MAX_WIDTH}"
        )));
    }
    let mut pos = vec![usize::MAX; g.n()];
    for col in &cols {
        for (k, &v) in col.iter().enumerate() {
            pos[v] = k;
        }
    }
    let local_masks = |col: &[usize], other: &[usize]| -> Vec<u32> {
        col.iter()
            .map(|&v| {
                g.neighbors(v)
                    .iter()
                    .filter(|u| other.contains(u))
                    .fold(0u32, |m, &u| m | 1 << pos[u])
            })
            .collect()
    };
    let independent = |inner: &[u32], s: u32| inner.iter().enumerate().all(|(k, &m)| s >> k & 1 == 0 || m & s == 0);

    let inner0 = local_masks(&cols[0], &cols[0]);
    let mut f: Vec<BigUint> = (0..1u32 << cols[0].len())
        .map(|s| {
            if independent(&inner0, s) {
                BigUint::one()
            } else {
                BigUint::zero()
            }
        })
        .collect();

    for c in 1..cols.len() {
        let prev_w = cols[c - 1].len();
        // subset sums: zeta[m] = Σ_{S ⊆ m} f[S]
        let mut zeta = f;
        for b in 0..prev_w {
            for m in 0..zeta.len() {
                if m >> b & 1 == 1 {
                    let lower = zeta[m ^ 1 << b].clone();
                    zeta[m] += lower;
                }
            }
        }
        let full = (1u32 << prev_w) - 1;
        let inner = local_masks(&cols[c], &cols[c]);
        let cross = local_masks(&cols[c], &cols[c - 1]);
        f = (0..1u32 << cols[c].len())
            .map(|t| {
                if !independent(&inner, t) {
                    return BigUint::zero();
                }
                let blocked = cross
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| t >> k & 1 == 1)
                    .fold(0u32, |m, (_, &x)| m | x);
                zeta[(full & !blocked) as usize].clone()
            })
            .collect();
    }
    Ok(f.into_iter().sum())
}

/// Counts independent sets with a transfer matrix over column states.
///
/// Columns come from the x coordinate when the graph carries coordinates and
/// every edge joins equal or adjacent columns, otherwise from breadth-first
/// layers of each connected component.
pub fn exact_count_dp(g: &BlockadeGraph) -> Result<BigUint> {
    let mut total = BigUint::one();
    for comp in components(g) {
        total *= count_component(g, &comp)?;
    }
    Ok(total)
}

/// Exact count by whichever oracle fits.
pub fn count_solutions(g: &BlockadeGraph) -> Result<BigUint> {
    match exact_count_dp(g) {
        Err(e) if e.is_resource() && g.n() <= BRUTE_FORCE_MAX_ATOMS => exact_count_bruteforce(g),
        other => other,
    }
}
