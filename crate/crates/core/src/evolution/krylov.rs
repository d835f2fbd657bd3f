//! Lanczos routines for large sparse symmetric Hamiltonians.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::SparseHamiltonian;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Local error target per unit of evolution time.
    pub tol: f64,
    /// Largest Krylov subspace built for one step.
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_dim: 30 }
    }
}

// subspace sizes at which the error estimate is evaluated
const CHECKPOINTS: [usize; 12] = [2, 4, 6, 8, 10, 12, 15, 18, 21, 24, 27, 30];

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Small tridiagonal projection `T` diagonalised once per step.
struct Projection {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Projection {
    fn new(alpha: &[f64], beta: &[f64]) -> Self {
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i T dt) e_1`.
    fn propagate_first(&self, dt: f64) -> Vec<Complex64> {
        let m = self.values.len();
        let weights: Vec<Complex64> = (0..m)
            .map(|k| self.vectors[(0, k)] * Complex64::from_polar(1.0, -self.values[k] * dt))
            .collect();
        (0..m)
            .map(|i| (0..m).map(|k| weights[k] * self.vectors[(i, k)]).sum())
            .collect()
    }

    fn last_component(&self, dt: f64) -> f64 {
        let m = self.values.len();
        (0..m)
            .map(|k| self.vectors[(0, k)] * self.vectors[(m - 1, k)] * Complex64::from_polar(1.0, -self.values[k] * dt))
            .sum::<Complex64>()
            .norm()
    }
}

/// Replaces `psi` with `exp(-i H t) psi` using adaptive Lanczos steps.
pub fn propagate(h: &SparseHamiltonian, psi: &mut [Complex64], t: f64, opts: &KrylovOptions) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Parameter(format!(
            "evolution time must be finite and >= 0, got {t}"
        )));
    }
    let dim = h.dim();
    let max_dim = opts.max_dim.clamp(2, dim.max(2));
    let mut remaining = t;
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_dim);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];

    while remaining > 0.0 {
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok(());
        }
        basis.clear();
        basis.push(psi.iter().map(|x| x / beta0).collect());
        let mut alpha = Vec::with_capacity(max_dim);
        let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
        let scale = h.omega().abs().max(1.0) * (dim as f64).sqrt();

        let mut accepted: Option<(Projection, f64)> = None;
        let mut fallback: Option<Projection> = None;
        for j in 0..max_dim {
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b;
                }
            }
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
            let b = norm(&w);
            let m = j + 1;
            let breakdown = b <= 1e-13 * scale || m == dim;
            let at_checkpoint = CHECKPOINTS.contains(&m) || m == max_dim;
            if breakdown || at_checkpoint {
                let proj = Projection::new(&alpha, &beta);
                if breakdown {
                    accepted = Some((proj, remaining));
                    break;
                }
                let err = beta0 * b * proj.last_component(remaining);
                if err <= opts.tol * remaining {
                    accepted = Some((proj, remaining));
                    break;
                }
                if m == max_dim {
                    fallback = Some(proj);
                    // keep b so the error estimate can shrink dt below
                    beta.push(b);
                    break;
                }
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }

        let (proj, dt) = match accepted {
            Some(pair) => pair,
            None => {
                let proj = fallback.expect("subspace limit reached");
                let b = *beta.last().unwrap();
                let ok = |dt: f64| beta0 * b * proj.last_component(dt) <= opts.tol * dt;
                let mut dt = remaining / 2.0;
                while !ok(dt) {
                    dt /= 2.0;
                    if dt < 1e-12 * t.max(1.0) {
                        return Err(Error::Numerical("krylov step size underflow".into()));
                    }
                }
                // widen towards the largest admissible step
                let mut hi = (2.0 * dt).min(remaining);
                for _ in 0..6 {
                    let mid = 0.5 * (dt + hi);
                    if ok(mid) {
                        dt = mid;
                    } else {
                        hi = mid;
                    }
                }
                (proj, dt)
            }
        };

        let y = proj.propagate_first(dt);
        psi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (coef, v) in y.iter().zip(&basis) {
            let c = coef * beta0;
            for (p, vi) in psi.iter_mut().zip(v) {
                *p += vi * c;
            }
        }
        remaining -= dt;
        if remaining < 1e-14 * t {
            remaining = 0.0;
        }
    }
    Ok(())
}

/// Smallest and largest eigenvalue via Lanczos with full reorthogonalisation.
pub fn extreme_eigenvalues(h: &SparseHamiltonian) -> Result<(f64, f64)> {
    let dim = h.dim();
    if dim == 0 {
        return Err(Error::Parameter("empty hamiltonian".into()));
    }
    let max_iter = dim.min(300);
    let mut q: Vec<f64> = (0..dim)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
        .collect();
    let n0 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n0);
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; dim];
    let mut last = (f64::NAN, f64::NAN);
    for j in 0..max_iter {
        h.apply_real(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for v in &basis {
            let c: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if b >= 1e-12 && j % 10 != 9 && j + 1 < max_iter {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
            continue;
        }
        let proj = Projection::new(&alpha, &beta);
        let lo = proj.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = proj.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let converged =
            (lo - last.0).abs() < 1e-12 * hi.abs().max(1.0) && (hi - last.1).abs() < 1e-12 * hi.abs().max(1.0);
        last = (lo, hi);
        if b < 1e-12 || converged || j + 1 == max_iter {
            return Ok(last);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Ok(last)
}
