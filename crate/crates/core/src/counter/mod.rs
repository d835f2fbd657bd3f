//! Self-reduction counting driven by measured marginals.
//!
//! Each step samples the current register, fixes the most likely excited
//! atom to 1 and divides the running count by its likelihood. The product
//! of inverse likelihoods estimates the number of independent sets.

mod exact;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use exact::{
    count_solutions, dp_width, exact_count_bruteforce, exact_count_dp, BRUTE_FORCE_MAX_ATOMS, DP_MAX_WIDTH,
};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionEngine, Method, DEFAULT_EXACT_CAP};
use crate::instance::{satisfies, Assignment, BlockadeGraph, Register};
use crate::rng::{stream, Purpose, Streams};
use crate::sampler::{practical_ff, ryd_samp_ff, ryd_samp_fi, Protocol, SampleSet, SamplerConfig};
use crate::spectrum::{build_pxp, enumerate_solutions_capped, ConstrainedBasis, DEFAULT_MAX_BASIS};

/// Fraction of samples with each active atom excited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodVector {
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
}

impl LikelihoodVector {
    pub fn get(&self, label: usize) -> Option<f64> {
        self.labels.iter().position(|&l| l == label).map(|i| self.values[i])
    }
}

/// Empirical marginals of `s`, whose bits index the atoms of `g`.
pub fn likelihoods(s: &SampleSet, g: &BlockadeGraph) -> Result<LikelihoodVector> {
    if s.is_empty() {
        return Err(Error::Parameter("likelihoods of an empty sample set".into()));
    }
    let n = g.n();
    let mut ones = vec![0u64; n];
    for (&x, &c) in s.counts() {
        if n < 64 && x >> n != 0 {
            return Err(Error::InvalidSample(crate::instance::format_bits(x, s.n().max(n))));
        }
        for (i, o) in ones.iter_mut().enumerate() {
            if x >> i & 1 == 1 {
                *o += c;
            }
        }
    }
    let total = s.total() as f64;
    Ok(LikelihoodVector {
        labels: g.labels().to_vec(),
        values: ones.iter().map(|&o| o as f64 / total).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    Variable {
        label: usize,
        likelihood: f64,
    },
    /// No active atom was ever seen excited.
    Terminate,
}

/// Label with the largest likelihood, ties going to the smallest label.
pub fn select_variable(p: &LikelihoodVector) -> Result<Selection> {
    if p.labels.is_empty() {
        return Err(Error::Parameter("no active variables to select from".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (&l, &v) in p.labels.iter().zip(&p.values) {
        best = match best {
            Some((bl, bv)) if bv > v || (bv == v && bl < l) => Some((bl, bv)),
            _ => Some((l, v)),
        };
    }
    let (label, likelihood) = best.unwrap();
    if likelihood > 0.0 {
        Ok(Selection::Variable { label, likelihood })
    } else {
        Ok(Selection::Terminate)
    }
}

/// Source of samples over the active atoms of a register.
pub trait SolutionSampler {
    /// Short name recorded in count ledgers.
    fn name(&self) -> String;

    /// Samples for self-reduction step `step`; bits index `reg.graph()`.
    fn sample(&mut self, reg: &Register, step: usize) -> Result<SampleSet>;
}

/// How the quantum sampler picks its time-evolution method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnginePolicy {
    /// Krylov for fixed input above tiny sizes, exact for feed-forward up
    /// to the dense cap.
    #[default]
    Auto,
    Exact,
    Krylov,
}

// below this dimension fixed-input sampling is cheaper with the dense cache
const FI_KRYLOV_MIN_DIM: usize = 64;

/// Quench sampler on the PXP model of the current register, rebuilt at
/// every step.
#[derive(Clone, Debug)]
pub struct QuantumSampler {
    pub config: SamplerConfig,
    pub omega: f64,
    pub policy: EnginePolicy,
    pub max_basis: usize,
}

impl QuantumSampler {
    pub fn new(config: SamplerConfig) -> Self {
        Self {
            config,
            omega: 1.0,
            policy: EnginePolicy::Auto,
            max_basis: DEFAULT_MAX_BASIS,
        }
    }

    /// Back end used for a register with `dim` independent sets.
    pub fn method(&self, dim: usize) -> Method {
        match self.policy {
            EnginePolicy::Exact => Method::Exact,
            EnginePolicy::Krylov => Method::Krylov,
            EnginePolicy::Auto => match self.config.protocol {
                Protocol::FixedInput if dim >= FI_KRYLOV_MIN_DIM => Method::Krylov,
                _ if dim <= DEFAULT_EXACT_CAP => Method::Exact,
                _ => Method::Krylov,
            },
        }
    }
}

impl QuantumSampler {
    /// Independent-set basis and PXP engine for `g`.
    pub fn engine(&self, g: &BlockadeGraph) -> Result<(ConstrainedBasis, EvolutionEngine)> {
        let basis = enumerate_solutions_capped(g, self.max_basis)?;
        let h = build_pxp(g, &basis, self.omega)?;
        let engine = EvolutionEngine::new(Arc::new(h), self.method(basis.len()))?;
        Ok((basis, engine))
    }
}

impl SolutionSampler for QuantumSampler {
    fn name(&self) -> String {
        self.config.protocol.as_str().to_string()
    }

    fn sample(&mut self, reg: &Register, step: usize) -> Result<SampleSet> {
        let (basis, engine) = self.engine(reg.graph())?;
        let mut streams = Streams::new(self.config.seed, step as u64);
        match self.config.protocol {
            Protocol::FixedInput => ryd_samp_fi(&engine, &basis, &self.config, &mut streams),
            Protocol::FeedForward => Ok(ryd_samp_ff(&engine, &basis, &self.config, &mut streams)?.samples),
            Protocol::PracticalFeedForward => Ok(practical_ff(&engine, &basis, &self.config, &mut streams)?.samples),
        }
    }
}

/// Exactly uniform sampler over the independent sets of the register.
#[derive(Clone, Debug)]
pub struct UniformSampler {
    pub n_samp: usize,
    pub seed: u64,
    pub max_basis: usize,
}

impl UniformSampler {
    pub fn new(n_samp: usize, seed: u64) -> Self {
        Self {
            n_samp,
            seed,
            max_basis: DEFAULT_MAX_BASIS,
        }
    }
}

impl SolutionSampler for UniformSampler {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn sample(&mut self, reg: &Register, step: usize) -> Result<SampleSet> {
        if self.n_samp == 0 {
            return Err(Error::Parameter("n_samp must be at least 1".into()));
        }
        let basis = enumerate_solutions_capped(reg.graph(), self.max_basis)?;
        let mut rng = stream(self.seed, Purpose::Oracle, step as u64);
        let states = basis.states();
        Ok(SampleSet::from_outcomes(
            basis.n(),
            (0..self.n_samp).map(|_| states[rng.random_range(0..states.len())]),
        ))
    }
}

/// One self-reduction step of a counting run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountStep {
    pub label: usize,
    pub likelihood: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub log_kappa: f64,
    pub steps: Vec<CountStep>,
    /// Bit per original label.
    pub final_assignment: BTreeMap<usize, u8>,
    /// Set when a step saw no excitations and the rest was completed with zeros.
    pub terminated_early: bool,
    pub sampler: String,
}

impl CountEstimate {
    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    /// Relative error of `kappa` against an exact count.
    pub fn relative_error(&self, exact: f64) -> f64 {
        (self.kappa() - exact) / exact
    }
}

/// Runs self-reduction counting on a fully active register.
pub fn ryd_count<S: SolutionSampler + ?Sized>(reg: &Register, sampler: &mut S) -> Result<CountEstimate> {
    if !reg.fixed().is_empty() {
        return Err(Error::Parameter("counting needs a register with no fixed atoms".into()));
    }
    let mut reg = reg.clone();
    let mut log_kappa = 0.0;
    let mut steps = Vec::new();
    let mut terminated_early = false;
    while !reg.is_complete() {
        let samples = sampler.sample(&reg, steps.len())?;
        let p = likelihoods(&samples, reg.graph())?;
        match select_variable(&p)? {
            Selection::Variable { label, likelihood } => {
                log_kappa -= likelihood.ln();
                steps.push(CountStep {
                    label,
                    likelihood,
                    samples: samples.total(),
                });
                reg = reg.fix_one(label)?;
            }
            Selection::Terminate => {
                reg = reg.complete_with_zeros();
                terminated_early = true;
            }
        }
    }
    let assignment = reg
        .assignment()
        .ok_or_else(|| Error::Numerical("counting left atoms unassigned".into()))?;
    check_witness(reg.original(), &assignment)?;
    let final_assignment = reg.fixed().iter().map(|(&l, &b)| (l, b as u8)).collect();
    Ok(CountEstimate {
        log_kappa,
        steps,
        final_assignment,
        terminated_early,
        sampler: sampler.name(),
    })
}

fn check_witness(g: &BlockadeGraph, a: &Assignment) -> Result<()> {
    if satisfies(g, a)? {
        Ok(())
    } else {
        Err(Error::Numerical(format!("witness {a} violates the instance")))
    }
}

/// Counting with exactly uniform samples in place of the quench sampler.
pub fn ryd_count_with_oracle_sampler(reg: &Register, n_samp: usize, seed: u64) -> Result<CountEstimate> {
    ryd_count(reg, &mut UniformSampler::new(n_samp, seed))
}

/// Default per-step budget: `n⁴` samples for an `n`-atom instance.
pub fn default_n_samp(n: usize) -> usize {
    n.pow(4).max(1)
}

/// Counting configuration for `protocol` with the default budget.
///
/// Practical feed-forward takes `n` shots per evolution and enough
/// evolutions to reach `n_samp`; plain feed-forward takes one shot per
/// evolution.
pub fn counting_config(n: usize, protocol: Protocol, n_samp: usize, seed: u64) -> SamplerConfig {
    let n_samp = n_samp.max(1);
    let shots = match protocol {
        Protocol::PracticalFeedForward => n.clamp(1, n_samp),
        _ => 1,
    };
    SamplerConfig {
        n_samp,
        protocol,
        k: n_samp.div_ceil(shots),
        shots_per_step: shots,
        seed,
        ..SamplerConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_chain, build_grid};

    fn lv(values: &[f64]) -> LikelihoodVector {
        LikelihoodVector {
            labels: (0..values.len()).collect(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn marginals() {
        let g = BlockadeGraph::new(3, []).unwrap();
        let s = SampleSet::from_outcomes(3, [0b001, 0b001, 0b100]);
        let p = likelihoods(&s, &g).unwrap();
        let by_label_desc: Vec<f64> = [2, 1, 0].iter().map(|&l| p.get(l).unwrap()).collect();
        assert_eq!(by_label_desc, vec![1.0 / 3.0, 0.0, 2.0 / 3.0]);

        let zeros = SampleSet::from_outcomes(2, [0, 0, 0]);
        let g2 = build_chain(2).unwrap();
        assert_eq!(likelihoods(&zeros, &g2).unwrap().values, vec![0.0, 0.0]);
        let two = SampleSet::from_outcomes(2, [0b01, 0b10]);
        assert_eq!(likelihoods(&two, &g2).unwrap().values, vec![0.5, 0.5]);
        assert!(likelihoods(&SampleSet::new(2), &g2).is_err());
    }

    #[test]
    fn selection() {
        assert_eq!(
            select_variable(&lv(&[0.2, 0.7])).unwrap(),
            Selection::Variable {
                label: 1,
                likelihood: 0.7
            }
        );
        assert_eq!(
            select_variable(&lv(&[0.5, 0.5])).unwrap(),
            Selection::Variable {
                label: 0,
                likelihood: 0.5
            }
        );
        assert_eq!(select_variable(&lv(&[0.0, 0.0])).unwrap(), Selection::Terminate);
        assert!(select_variable(&lv(&[])).is_err());
        let reversed = LikelihoodVector {
            labels: vec![9, 4],
            values: vec![0.5, 0.5],
        };
        assert_eq!(
            select_variable(&reversed).unwrap(),
            Selection::Variable {
                label: 4,
                likelihood: 0.5
            }
        );
    }

    #[test]
    fn empty_register_counts_one() {
        let est = ryd_count_with_oracle_sampler(&Register::new(BlockadeGraph::empty()), 10, 0).unwrap();
        assert_eq!(est.kappa(), 1.0);
        assert!(est.steps.is_empty());
    }

    #[test]
    fn single_atom_oracle() {
        let est = ryd_count_with_oracle_sampler(&Register::new(build_chain(1).unwrap()), 10_000, 3).unwrap();
        assert!((est.kappa() - 2.0).abs() < 0.1, "{}", est.kappa());
    }

    #[test]
    fn small_grid_oracle() {
        let est = ryd_count_with_oracle_sampler(&Register::new(build_grid(2, 2).unwrap()), 100_000, 1).unwrap();
        assert!((est.kappa() - 7.0).abs() < 0.2, "{}", est.kappa());
        assert_eq!(est.final_assignment.len(), 4);
    }

    struct Silent;

    impl SolutionSampler for Silent {
        fn name(&self) -> String {
            "silent".into()
        }

        fn sample(&mut self, reg: &Register, _: usize) -> Result<SampleSet> {
            Ok(SampleSet::from_outcomes(reg.graph().n(), [0]))
        }
    }

    #[test]
    fn all_zero_samples_terminate() {
        let est = ryd_count(&Register::new(build_chain(4).unwrap()), &mut Silent).unwrap();
        assert_eq!(est.kappa(), 1.0);
        assert!(est.terminated_early);
        assert!(est.final_assignment.values().all(|&b| b == 0));
    }

    #[test]
    fn quantum_sampler_small_chain() {
        let reg = Register::new(build_chain(4).unwrap());
        let cfg = counting_config(4, Protocol::PracticalFeedForward, default_n_samp(4), 5);
        assert_eq!((cfg.shots_per_step, cfg.k), (4, 64));
        let est = ryd_count(&reg, &mut QuantumSampler::new(cfg)).unwrap();
        assert!(est.kappa() > 4.0 && est.kappa() < 16.0, "{}", est.kappa());
    }
}
