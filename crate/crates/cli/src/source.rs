//! Instance arguments: a file path or an inline generator such as
//! `chain:10`, `grid:3x4` or `punched:3x3:4,5`.

use std::path::Path;

use rydcount_core::instance::{build_chain, build_grid, parse_cnf, punch_grid, BlockadeGraph};

use crate::error::CliError;

fn usize_arg(s: &str, what: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{what} must be a non-negative integer, got \"{s}\"")))
}

fn dims(s: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| CliError::Usage(format!("grid dimensions look like 3x4, got \"{s}\"")))?;
    Ok((usize_arg(a, "grid rows")?, usize_arg(b, "grid columns")?))
}

pub fn parse_holes(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| usize_arg(t, "hole label"))
        .collect()
}

fn generated(arg: &str) -> Option<Result<BlockadeGraph, CliError>> {
    let mut parts = arg.splitn(3, ':');
    let kind = parts.next()?;
    let rest: Vec<&str> = parts.collect();
    let built = match (kind, rest.as_slice()) {
        ("chain", [n]) => usize_arg(n, "chain length").and_then(|n| Ok(build_chain(n)?)),
        ("grid", [d]) => dims(d).and_then(|(lx, ly)| Ok(build_grid(lx, ly)?)),
        ("punched", [d, holes]) => dims(d).and_then(|(lx, ly)| {
            let holes = parse_holes(holes)?;
            Ok(punch_grid(&build_grid(lx, ly)?, &holes)?)
        }),
        ("chain" | "grid" | "punched", _) => Err(CliError::Usage(format!(
            "cannot read generator \"{arg}\"; try chain:10, grid:3x4 or punched:3x3:4"
        ))),
        _ => return None,
    };
    Some(built)
}

/// Loads an instance from a generator string, a DIMACS file (`.cnf`,
/// `.dimacs`) or a JSON instance file.
pub fn load(arg: &str) -> Result<BlockadeGraph, CliError> {
    if let Some(g) = generated(arg) {
        return g;
    }
    let path = Path::new(arg);
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read instance {arg}: {e}")))?;
    let dimacs = matches!(path.extension().and_then(|e| e.to_str()), Some("cnf" | "dimacs"))
        || !text.trim_start().starts_with('{');
    let g = if dimacs {
        parse_cnf(&text)?
    } else {
        BlockadeGraph::from_json(&text)?
    };
    Ok(g)
}
