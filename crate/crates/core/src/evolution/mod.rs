//! Quench dynamics `|ψ(t)⟩ = exp(-iHt)|ψ(0)⟩` and survival probabilities.
//!
//! Two propagation back ends share one interface: a cached dense
//! eigendecomposition for small bases, and adaptive Lanczos stepping for
//! anything larger.

pub mod krylov;
mod survival;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{heisenberg_time, BasisKind, SparseHamiltonian};

pub use krylov::KrylovOptions;
pub use survival::{fit_exponential, ramp_dip_scan, ExponentialFit, RampDipReport, SurvivalCurve};

/// Largest dimension for which the exact back end is allowed by default.
pub const DEFAULT_EXACT_CAP: usize = 4096;

// columns per dense batch when evaluating many times at once
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Krylov,
}

/// Normalised complex amplitudes over a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amps: Vec<Complex64>,
    pub kind: BasisKind,
}

impl StateVector {
    /// Computational basis state `|idx⟩`.
    pub fn basis_state(dim: usize, idx: usize, kind: BasisKind) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[idx] = Complex64::new(1.0, 0.0);
        Self { amps, kind }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Born-rule measurement probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

struct Eigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Eigen {
    fn new(h: &SparseHamiltonian) -> Self {
        let eig = SymmetricEigen::new(h.to_dense());
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// Eigenbasis coefficients `V^T ψ`, real and imaginary parts separately.
    fn coefficients(&self, psi: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let re = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|a| a.re));
        let im = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|a| a.im));
        let cr = self.vectors.tr_mul(&re);
        let ci = self.vectors.tr_mul(&im);
        (cr.iter().copied().collect(), ci.iter().copied().collect())
    }

    /// Evolved states at each time in `times`, built with one matrix product.
    fn states_at(&self, coef: &(Vec<f64>, Vec<f64>), times: &[f64]) -> Vec<Vec<Complex64>> {
        let dim = self.values.len();
        let mut b = DMatrix::<f64>::zeros(dim, 2 * times.len());
        for (col, &t) in times.iter().enumerate() {
            for k in 0..dim {
                let c = Complex64::new(coef.0[k], coef.1[k]) * Complex64::from_polar(1.0, -self.values[k] * t);
                b[(k, 2 * col)] = c.re;
                b[(k, 2 * col + 1)] = c.im;
            }
        }
        let a = &self.vectors * b;
        (0..times.len())
            .map(|col| {
                (0..dim)
                    .map(|i| Complex64::new(a[(i, 2 * col)], a[(i, 2 * col + 1)]))
                    .collect()
            })
            .collect()
    }
}

/// Mean of `cos(ωt)` for `t` uniform in `[t0, t1]`.
fn window_cos(w: f64, t0: f64, t1: f64) -> f64 {
    let span = w * (t1 - t0);
    if span.abs() < 1e-8 {
        (w * 0.5 * (t0 + t1)).cos()
    } else {
        ((w * t1).sin() - (w * t0).sin()) / span
    }
}

/// Mean of `sin(ωt)` for `t` uniform in `[t0, t1]`.
fn window_sin(w: f64, t0: f64, t1: f64) -> f64 {
    let span = w * (t1 - t0);
    if span.abs() < 1e-8 {
        (w * 0.5 * (t0 + t1)).sin()
    } else {
        ((w * t0).cos() - (w * t1).cos()) / span
    }
}

fn window_kernels(values: &[f64], t0: f64, t1: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = values.len();
    let kc = DMatrix::from_fn(d, d, |j, k| window_cos(values[j] - values[k], t0, t1));
    let ks = DMatrix::from_fn(d, d, |j, k| window_sin(values[j] - values[k], t0, t1));
    (kc, ks)
}

/// Diagonal of `L K R^T`.
fn row_quadratic(l: &DMatrix<f64>, k: &DMatrix<f64>, r: &DMatrix<f64>) -> Vec<f64> {
    let lk = l * k;
    (0..l.nrows()).map(|x| lk.row(x).dot(&r.row(x))).collect()
}

/// Read-only propagator bound to one Hamiltonian.
pub struct EvolutionEngine {
    h: Arc<SparseHamiltonian>,
    method: Method,
    eigen: Option<Eigen>,
    krylov: KrylovOptions,
    t_heisenberg: OnceLock<f64>,
}

impl std::fmt::Debug for EvolutionEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvolutionEngine")
            .field("dim", &self.h.dim())
            .field("method", &self.method)
            .finish()
    }
}

impl EvolutionEngine {
    /// Engine with an explicit back end; exact mode is refused above
    /// [`DEFAULT_EXACT_CAP`].
    pub fn new(h: Arc<SparseHamiltonian>, method: Method) -> Result<Self> {
        Self::with_cap(h, method, DEFAULT_EXACT_CAP)
    }

    pub fn with_cap(h: Arc<SparseHamiltonian>, method: Method, exact_cap: usize) -> Result<Self> {
        let eigen = match method {
            Method::Exact if h.dim() > exact_cap => {
                return Err(Error::Resource(format!(
                    "exact evolution of dimension {} exceeds cap {exact_cap}",
                    h.dim()
                )));
            }
            Method::Exact => {
                let e = Eigen::new(&h);
                if e.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
                }
                Some(e)
            }
            Method::Krylov => None,
        };
        Ok(Self {
            h,
            method,
            eigen,
            krylov: KrylovOptions::default(),
            t_heisenberg: OnceLock::new(),
        })
    }

    /// Exact below [`DEFAULT_EXACT_CAP`], Krylov above.
    pub fn auto(h: Arc<SparseHamiltonian>) -> Result<Self> {
        let method = if h.dim() <= DEFAULT_EXACT_CAP {
            Method::Exact
        } else {
            Method::Krylov
        };
        Self::new(h, method)
    }

    pub fn with_krylov_options(mut self, opts: KrylovOptions) -> Self {
        self.krylov = opts;
        self
    }

    pub fn hamiltonian(&self) -> &SparseHamiltonian {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Sorted eigenvalues, available in exact mode only.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.eigen.as_ref().map(|e| {
            let mut w = e.values.clone();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w
        })
    }

    /// Heisenberg time of the driving Hamiltonian, computed once.
    pub fn heisenberg_time(&self) -> Result<f64> {
        if let Some(&t) = self.t_heisenberg.get() {
            return Ok(t);
        }
        let t = match self.eigenvalues() {
            Some(w) if w.len() >= 2 => {
                let spacing = (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64;
                if spacing <= 1e-14 * w[0].abs().max(w[w.len() - 1].abs()).max(1.0) {
                    f64::INFINITY
                } else {
                    2.0 * std::f64::consts::PI / spacing
                }
            }
            _ => heisenberg_time(&self.h)?,
        };
        Ok(*self.t_heisenberg.get_or_init(|| t))
    }

    fn check(&self, psi: &StateVector, t: f64) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.dim(),
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!(
                "evolution time must be finite and >= 0, got {t}"
            )));
        }
        Ok(())
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        self.check(psi, t)?;
        if t == 0.0 {
            return Ok(psi.clone());
        }
        let amps = match &self.eigen {
            Some(e) => {
                let coef = e.coefficients(&psi.amps);
                e.states_at(&coef, &[t]).pop().unwrap()
            }
            None => {
                let mut amps = psi.amps.clone();
                krylov::propagate(&self.h, &mut amps, t, &self.krylov)?;
                amps
            }
        };
        Ok(StateVector { amps, kind: psi.kind })
    }

    /// Calls `visit(i, ψ(times[i]))` for every time, in ascending time order.
    ///
    /// Krylov mode steps incrementally between consecutive sorted times, so
    /// a dense set of times costs roughly one evolution to the largest.
    pub fn propagate<F>(&self, psi0: &StateVector, times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &StateVector),
    {
        for &t in times {
            self.check(psi0, t)?;
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap().then(a.cmp(&b)));
        match &self.eigen {
            Some(e) => {
                let coef = e.coefficients(&psi0.amps);
                for chunk in order.chunks(BATCH) {
                    let ts: Vec<f64> = chunk.iter().map(|&i| times[i]).collect();
                    for (&i, amps) in chunk.iter().zip(e.states_at(&coef, &ts)) {
                        visit(i, &StateVector { amps, kind: psi0.kind });
                    }
                }
            }
            None => {
                let mut state = psi0.clone();
                let mut now = 0.0;
                for &i in &order {
                    let dt = times[i] - now;
                    if dt > 0.0 {
                        krylov::propagate(&self.h, &mut state.amps, dt, &self.krylov)?;
                        now = times[i];
                    }
                    visit(i, &state);
                }
            }
        }
        Ok(())
    }

    /// `|⟨ψ₀|ψ(t)⟩|²`.
    pub fn survival_probability(&self, psi0: &StateVector, t: f64) -> Result<f64> {
        Ok(self.survival_series(psi0, &[t])?[0])
    }

    /// Survival probability at every time, in input order.
    pub fn survival_series(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<f64>> {
        for &t in times {
            self.check(psi0, t)?;
        }
        if let Some(e) = &self.eigen {
            // |Σ_k |c_k|² e^{-iE_k t}|², no full state needed
            let (cr, ci) = e.coefficients(&psi0.amps);
            let weights: Vec<f64> = cr.iter().zip(&ci).map(|(a, b)| a * a + b * b).collect();
            return Ok(times
                .iter()
                .map(|&t| {
                    let amp: Complex64 = weights
                        .iter()
                        .zip(&e.values)
                        .map(|(w, &v)| Complex64::from_polar(*w, -v * t))
                        .sum();
                    amp.norm_sqr().min(1.0)
                })
                .collect());
        }
        let mut out = vec![0.0; times.len()];
        self.propagate(psi0, times, |i, s| out[i] = psi0.overlap(s).norm_sqr().min(1.0))?;
        Ok(out)
    }

    /// Born probabilities of `ψ(t)` averaged over `t` uniform in
    /// `[t_min, t_max]`, in closed form from the eigendecomposition.
    pub fn window_averaged_probabilities(&self, psi0: &StateVector, t_min: f64, t_max: f64) -> Result<Vec<f64>> {
        self.check(psi0, t_min)?;
        self.check(psi0, t_max)?;
        if t_max < t_min {
            return Err(Error::Parameter(format!("empty time window [{t_min}, {t_max}]")));
        }
        let e = self
            .eigen
            .as_ref()
            .ok_or_else(|| Error::Parameter("window-averaged probabilities need exact evolution".into()))?;
        let dim = self.dim();
        let (a, b) = e.coefficients(&psi0.amps);
        let (kc, ks) = window_kernels(&e.values, t_min, t_max);
        // ψ_x(t) = Σ_j V_xj c_j e^{-iE_j t}; with c = a + ib the average of
        // |ψ_x|² is (A Kc A^T + B Kc B^T + 2 B Ks A^T)_xx
        let scale_cols = |c: &[f64]| {
            let mut m = e.vectors.clone();
            for (j, &cj) in c.iter().enumerate() {
                m.column_mut(j).scale_mut(cj);
            }
            m
        };
        let am = scale_cols(&a);
        let mut out: Vec<f64> = row_quadratic(&am, &kc, &am);
        if b.iter().any(|&x| x != 0.0) {
            let bm = scale_cols(&b);
            let bb = row_quadratic(&bm, &kc, &bm);
            let ba = row_quadratic(&bm, &ks, &am);
            for x in 0..dim {
                out[x] += bb[x] + 2.0 * ba[x];
            }
        }
        Ok(out.into_iter().map(|p| p.max(0.0)).collect())
    }

    /// Survival probability averaged over `t` uniform in `[t_min, t_max]`.
    pub fn window_averaged_survival(&self, psi0: &StateVector, t_min: f64, t_max: f64) -> Result<f64> {
        self.check(psi0, t_min)?;
        self.check(psi0, t_max)?;
        if t_max < t_min {
            return Err(Error::Parameter(format!("empty time window [{t_min}, {t_max}]")));
        }
        let e = self
            .eigen
            .as_ref()
            .ok_or_else(|| Error::Parameter("window-averaged survival needs exact evolution".into()))?;
        let (a, b) = e.coefficients(&psi0.amps);
        let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * x + y * y).collect();
        let mut s = 0.0;
        for j in 0..w.len() {
            for k in 0..w.len() {
                s += w[j] * w[k] * window_cos(e.values[j] - e.values[k], t_min, t_max);
            }
        }
        Ok(s.clamp(0.0, 1.0))
    }

    /// Mean survival probability over `times`.
    pub fn averaged_survival(&self, psi0: &StateVector, times: &[f64]) -> Result<f64> {
        if times.is_empty() {
            return Err(Error::Parameter("averaged survival needs at least one time".into()));
        }
        let s = self.survival_series(psi0, times)?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }
}
