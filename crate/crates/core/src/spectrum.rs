//! Blockade-constrained basis and the sparse PXP / Rydberg Hamiltonians.
//!
//! Both Hamiltonians use a Rabi term of `Ω/2 · X_i`, so the PXP matrix is
//! exactly the constrained block of the Rydberg matrix with the interaction
//! diagonal removed.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::counter::count_solutions;
use crate::error::{Error, Result};
use crate::evolution::krylov::extreme_eigenvalues;
use crate::instance::BlockadeGraph;

/// Default cap on the number of stored basis states.
pub const DEFAULT_MAX_BASIS: usize = 1 << 22;

/// Default cap on atoms for the unconstrained `2^n` Rydberg basis.
pub const DEFAULT_MAX_FULL_ATOMS: usize = 20;

/// Largest dimension diagonalised densely when computing level spacings.
pub const DENSE_SPECTRUM_CAP: usize = 4096;

/// All independent sets of a graph as bitmasks, in ascending numeric order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstrainedBasis {
    n: usize,
    states: Vec<u64>,
}

impl ConstrainedBasis {
    /// Number of atoms the bitstrings range over.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> u64 {
        self.states[idx]
    }

    pub fn index_of(&self, bits: u64) -> Option<usize> {
        self.states.binary_search(&bits).ok()
    }

    /// Index of the all-zeros state, always the first entry.
    pub fn zero_index(&self) -> usize {
        0
    }
}

pub fn enumerate_solutions(g: &BlockadeGraph) -> Result<ConstrainedBasis> {
    enumerate_solutions_capped(g, DEFAULT_MAX_BASIS)
}

/// Backtracking enumeration that never extends a blockade-violating prefix.
///
/// Vertices are decided from the highest index down, `0` before `1`, which
/// yields the states in ascending numeric order directly.
pub fn enumerate_solutions_capped(g: &BlockadeGraph, max_basis: usize) -> Result<ConstrainedBasis> {
    let n = g.n();
    if n > 64 {
        return Err(Error::Resource(format!("{n} atoms exceed the 64-atom bitstring limit")));
    }
    // neighbours with a higher index, i.e. already decided when v is reached
    let upper: Vec<u64> = (0..n)
        .map(|v| {
            g.neighbors(v)
                .iter()
                .filter(|&&u| u > v)
                .fold(0u64, |m, &u| m | (1u64 << u))
        })
        .collect();

    struct Walk<'a> {
        upper: &'a [u64],
        out: Vec<u64>,
        cap: usize,
        overflow: bool,
    }
    fn descend(w: &mut Walk<'_>, v: usize, cur: u64) {
        if w.overflow {
            return;
        }
        if v == 0 {
            if w.out.len() == w.cap {
                w.overflow = true;
                return;
            }
            w.out.push(cur);
            return;
        }
        let v = v - 1;
        descend(w, v, cur);
        if cur & w.upper[v] == 0 {
            descend(w, v, cur | (1u64 << v));
        }
    }

    let mut walk = Walk {
        upper: &upper,
        out: Vec::new(),
        cap: max_basis,
        overflow: false,
    };
    descend(&mut walk, n, 0);
    if walk.overflow {
        let size = count_solutions(g)
            .map(|c| c.to_string())
            .unwrap_or_else(|_| format!("more than {max_basis}"));
        return Err(Error::Resource(format!(
            "constrained basis has {size} states, cap is {max_basis}"
        )));
    }
    Ok(ConstrainedBasis { n, states: walk.out })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Independent sets only, PXP dynamics.
    Constrained,
    /// All `2^n` bitstrings, Rydberg dynamics.
    Full,
}

impl BasisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisKind::Constrained => "constrained",
            BasisKind::Full => "full",
        }
    }
}

/// Real symmetric matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    kind: BasisKind,
    omega: f64,
    v: f64,
}

impl SparseHamiltonian {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>, kind: BasisKind, omega: f64, v: f64) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, x) in row {
                cols.push(c);
                vals.push(x);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
            kind,
            omega,
            v,
        }
    }

    /// Arbitrary real symmetric matrix from dense rows; zeros are dropped.
    pub fn from_dense(m: &DMatrix<f64>, kind: BasisKind) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Parameter("matrix is not square".into()));
        }
        if (m - m.transpose()).abs().max() > 0.0 {
            return Err(Error::Parameter("matrix is not symmetric".into()));
        }
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j as u32, m[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(rows, kind, 0.0, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn interaction(&self) -> f64 {
        self.v
    }

    /// Sorted `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &x)| (c as usize, x))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `out = H · x` for complex vectors.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        }
    }

    /// `out = H · x` for real vectors.
    pub fn apply_real(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        }
    }

    /// `⟨x|H|x⟩` for a complex vector.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut hx = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut hx);
        x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|x| *x *= factor);
        out.omega *= factor;
        out.v *= factor;
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, x) in self.row(i) {
                m[(i, j)] = x;
            }
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, x)| self.get(j, i) == x))
    }

    /// Coordinate-list dump: header `dim nnz kind omega v`, then `i j value`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {} {} {}",
            self.dim,
            self.nnz(),
            self.kind.as_str(),
            self.omega,
            self.v
        )
        .unwrap();
        for i in 0..self.dim {
            for (j, x) in self.row(i) {
                writeln!(out, "{i} {j} {x}").unwrap();
            }
        }
        out
    }
}

/// PXP Hamiltonian on the constrained basis: `Ω/2` between states one
/// allowed spin flip apart, zero diagonal.
pub fn build_pxp(g: &BlockadeGraph, basis: &ConstrainedBasis, omega: f64) -> Result<SparseHamiltonian> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!("omega must be positive, got {omega}")));
    }
    if basis.n() != g.n() {
        return Err(Error::Parameter(format!(
            "basis over {} atoms does not match graph with {}",
            basis.n(),
            g.n()
        )));
    }
    let masks: Vec<u64> = (0..g.n()).map(|i| g.neighbor_mask(i)).collect();
    let coupling = omega / 2.0;
    let rows = basis
        .states()
        .iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(g.n());
            for (i, &mask) in masks.iter().enumerate() {
                let bit = 1u64 << i;
                if x & bit != 0 || x & mask == 0 {
                    let y = x ^ bit;
                    let j = basis.index_of(y).expect("flip stays in the basis");
                    row.push((j as u32, coupling));
                }
            }
            row
        })
        .collect();
    Ok(SparseHamiltonian::from_rows(rows, BasisKind::Constrained, omega, 0.0))
}

pub fn build_rydberg(g: &BlockadeGraph, omega: f64, v: f64) -> Result<SparseHamiltonian> {
    build_rydberg_capped(g, omega, v, DEFAULT_MAX_FULL_ATOMS)
}

/// Rydberg Hamiltonian on all `2^n` bitstrings with interaction `v` on
/// graph edges only.
pub fn build_rydberg_capped(g: &BlockadeGraph, omega: f64, v: f64, max_atoms: usize) -> Result<SparseHamiltonian> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!("omega must be positive, got {omega}")));
    }
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parameter(format!("interaction must be non-negative, got {v}")));
    }
    let n = g.n();
    if n > max_atoms {
        return Err(Error::Resource(format!(
            "full basis of {n} atoms exceeds the {max_atoms}-atom cap"
        )));
    }
    let dim = 1usize << n;
    let coupling = omega / 2.0;
    let rows = (0..dim as u64)
        .map(|x| {
            let mut row = Vec::with_capacity(n + 1);
            let violated = g
                .edges()
                .iter()
                .filter(|&&(a, b)| (x >> a) & 1 == 1 && (x >> b) & 1 == 1)
                .count();
            if violated > 0 && v > 0.0 {
                row.push((x as u32, v * violated as f64));
            }
            for i in 0..n {
                row.push(((x ^ (1u64 << i)) as u32, coupling));
            }
            row
        })
        .collect();
    Ok(SparseHamiltonian::from_rows(rows, BasisKind::Full, omega, v))
}

/// All eigenvalues of `h` in ascending order via dense diagonalisation.
pub fn dense_eigenvalues(h: &SparseHamiltonian) -> Vec<f64> {
    let mut w: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    w
}

/// `2π / δ̄` with `δ̄` the mean adjacent level spacing.
///
/// The mean spacing telescopes to `(E_max - E_min) / (dim - 1)`; above
/// [`DENSE_SPECTRUM_CAP`] the extremes come from Lanczos instead of a full
/// diagonalisation. Returns `f64::INFINITY` for a fully degenerate spectrum.
pub fn heisenberg_time(h: &SparseHamiltonian) -> Result<f64> {
    if h.dim() < 2 {
        return Err(Error::Parameter("heisenberg time needs dim >= 2".into()));
    }
    let (lo, hi) = if h.dim() <= DENSE_SPECTRUM_CAP {
        let w = dense_eigenvalues(h);
        (w[0], w[w.len() - 1])
    } else {
        extreme_eigenvalues(h)?
    };
    let spacing = (hi - lo) / (h.dim() - 1) as f64;
    if spacing <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * std::f64::consts::PI / spacing)
}
