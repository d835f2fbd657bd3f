//! Fixed instance sets used for cross-checking oracles and for benchmarks.

use crate::error::Result;
use crate::instance::{build_chain, build_grid, punch_grid, BlockadeGraph};

#[derive(Clone, Debug)]
pub struct NamedInstance {
    pub name: String,
    pub graph: BlockadeGraph,
}

fn named(name: String, graph: BlockadeGraph) -> NamedInstance {
    NamedInstance { name, graph }
}

fn punched(lx: usize, ly: usize, holes: &[usize]) -> Result<NamedInstance> {
    let g = punch_grid(&build_grid(lx, ly)?, holes)?;
    let tag: Vec<String> = holes.iter().map(usize::to_string).collect();
    Ok(named(format!("punched-{lx}x{ly}-{}", tag.join("-")), g))
}

// (rows, columns, removed atoms)
const PUNCHED: [(usize, usize, &[usize]); 18] = [
    (3, 3, &[4]),
    (3, 3, &[0, 8]),
    (3, 4, &[5]),
    (3, 4, &[1, 10]),
    (3, 4, &[0, 6, 11]),
    (3, 5, &[7]),
    (3, 5, &[2, 12]),
    (3, 5, &[6, 8]),
    (4, 4, &[5]),
    (4, 4, &[5, 10]),
    (4, 4, &[0, 15]),
    (4, 4, &[1, 7, 14]),
    (4, 5, &[6, 13]),
    (4, 5, &[0, 9, 12]),
    (4, 5, &[7, 12]),
    (3, 6, &[7, 10]),
    (3, 6, &[4, 13]),
    (2, 9, &[4]),
];

/// Fifty small instances: chains of 1 to 20 atoms, rectangular grids up to
/// 4×5 and punched grids of at most 18 atoms.
pub fn oracle_corpus() -> Result<Vec<NamedInstance>> {
    let mut out = Vec::with_capacity(50);
    for n in 1..=20 {
        out.push(named(format!("chain-{n}"), build_chain(n)?));
    }
    for (lx, ly) in [
        (2, 2),
        (2, 3),
        (3, 2),
        (2, 4),
        (4, 2),
        (2, 5),
        (3, 3),
        (3, 4),
        (4, 3),
        (3, 5),
        (4, 4),
        (4, 5),
    ] {
        out.push(named(format!("grid-{lx}x{ly}"), build_grid(lx, ly)?));
    }
    for (lx, ly, holes) in PUNCHED {
        out.push(punched(lx, ly, holes)?);
    }
    Ok(out)
}

/// Punched grids used for the scaled grid-counting benchmark.
pub fn benchmark_grids() -> Result<Vec<NamedInstance>> {
    [(3, 5, &[7][..]), (4, 4, &[5, 10][..]), (3, 6, &[7, 10][..])]
        .into_iter()
        .map(|(lx, ly, holes)| punched(lx, ly, holes))
        .collect()
}
