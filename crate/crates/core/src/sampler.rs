//! Quench-and-measure solution samplers and their non-uniformity.
//!
//! * fixed input (FI): every shot evolves `|0…0⟩` for a fresh random time;
//! * feed-forward (FF): every shot starts from the previous outcome;
//! * practical FF: each of `k` evolutions is measured `shots_per_step`
//!   times, one outcome is fed forward and all outcomes are kept.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionEngine, StateVector};
use crate::instance::{format_bits, parse_bits};
use crate::rng::Streams;
use crate::spectrum::{BasisKind, ConstrainedBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "fi")]
    FixedInput,
    #[serde(rename = "ff")]
    FeedForward,
    #[serde(rename = "pff")]
    PracticalFeedForward,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::FixedInput => "fi",
            Protocol::FeedForward => "ff",
            Protocol::PracticalFeedForward => "pff",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fi" => Ok(Protocol::FixedInput),
            "ff" => Ok(Protocol::FeedForward),
            "pff" => Ok(Protocol::PracticalFeedForward),
            _ => Err(Error::Parameter(format!("unknown protocol \"{s}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub n_samp: usize,
    pub protocol: Protocol,
    /// Feed-forward steps (FF and practical FF).
    pub k: usize,
    pub shots_per_step: usize,
    pub seed: u64,
    pub enforce_heisenberg_spacing: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            t_min: 10.0,
            t_max: 1000.0,
            n_samp: 1000,
            protocol: Protocol::FixedInput,
            k: 1,
            shots_per_step: 1,
            seed: 0,
            enforce_heisenberg_spacing: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min >= 0.0 && self.t_min <= self.t_max && self.t_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 <= t_min <= t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.n_samp == 0 {
            return Err(Error::Parameter("n_samp must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.shots_per_step == 0 {
            return Err(Error::Parameter("shots_per_step must be at least 1".into()));
        }
        Ok(())
    }
}

/// Multiset of measured bitstrings over `n` atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl SampleSet {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn from_outcomes(n: usize, outcomes: impl IntoIterator<Item = u64>) -> Self {
        let mut s = Self::new(n);
        for x in outcomes {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, bits: u64) {
        *self.counts.entry(bits).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn extend(&mut self, other: &SampleSet) {
        for (&x, &c) in &other.counts {
            *self.counts.entry(x).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count(&self, bits: u64) -> u64 {
        self.counts.get(&bits).copied().unwrap_or(0)
    }

    /// Empirical distribution over the basis order.
    pub fn distribution(&self, basis: &ConstrainedBasis) -> Result<Vec<f64>> {
        let mut p = vec![0.0; basis.len()];
        if self.total == 0 {
            return Err(Error::Parameter("empty sample set".into()));
        }
        for (&x, &c) in &self.counts {
            let i = basis
                .index_of(x)
                .ok_or_else(|| Error::InvalidSample(format_bits(x, self.n)))?;
            p[i] = c as f64 / self.total as f64;
        }
        Ok(p)
    }

    /// Serialised form with the generating configuration attached.
    pub fn to_json(&self, config: &SamplerConfig) -> String {
        let record = SampleSetJson {
            counts: self.counts.iter().map(|(&x, &c)| (format_bits(x, self.n), c)).collect(),
            total: self.total,
            config: config.clone(),
            seed: config.seed,
        };
        serde_json::to_string_pretty(&record).expect("sample set serializes")
    }

    pub fn from_json(text: &str) -> Result<(SampleSet, SamplerConfig)> {
        let raw: SampleSetJson = serde_json::from_str(text)?;
        let n = raw.counts.keys().next().map_or(0, String::len);
        let mut s = SampleSet::new(n);
        for (k, c) in raw.counts {
            if k.len() != n {
                return Err(Error::Parameter(format!("bitstring \"{k}\" has inconsistent length")));
            }
            s.counts.insert(parse_bits(&k)?, c);
            s.total += c;
        }
        if s.total != raw.total {
            return Err(Error::Parameter(format!(
                "counts sum to {}, total says {}",
                s.total, raw.total
            )));
        }
        Ok((s, raw.config))
    }
}

#[derive(Serialize, Deserialize)]
struct SampleSetJson {
    counts: BTreeMap<String, u64>,
    total: u64,
    config: SamplerConfig,
    seed: u64,
}

// probabilities at or below this count as outside the support
const SUPPORT_EPS: f64 = 1e-12;

/// Probability vector over a constrained basis with its non-uniformity.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionStats {
    pub probs: Vec<f64>,
    pub eta: f64,
    pub support_size: usize,
}

impl DistributionStats {
    pub fn new(probs: Vec<f64>) -> Self {
        let eta = total_variation_from_uniform(&probs);
        let support_size = probs.iter().filter(|&&p| p > SUPPORT_EPS).count();
        Self {
            probs,
            eta,
            support_size,
        }
    }

    /// `{"bitstring": probability}` keyed over the basis.
    pub fn to_map(&self, basis: &ConstrainedBasis) -> BTreeMap<String, f64> {
        basis
            .states()
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| (format_bits(x, basis.n()), p))
            .collect()
    }
}

/// `½ Σ |p(x) − 1/N|` over a full probability vector.
pub fn total_variation_from_uniform(probs: &[f64]) -> f64 {
    let q = 1.0 / probs.len() as f64;
    0.5 * probs.iter().map(|p| (p - q).abs()).sum::<f64>()
}

/// Total variation distance between two distributions over the same basis.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Non-uniformity of an exact distribution.
pub fn non_uniformity(d: &DistributionStats, basis: &ConstrainedBasis) -> Result<f64> {
    if d.probs.len() != basis.len() {
        return Err(Error::Parameter(format!(
            "distribution over {} states, basis has {}",
            d.probs.len(),
            basis.len()
        )));
    }
    Ok(total_variation_from_uniform(&d.probs))
}

/// Non-uniformity of the empirical distribution of a sample set.
pub fn sample_non_uniformity(s: &SampleSet, basis: &ConstrainedBasis) -> Result<f64> {
    Ok(total_variation_from_uniform(&s.distribution(basis)?))
}

/// `n_samp` i.i.d. times from `U(t_min, t_max)`, optionally rejection-resampled
/// until every pair is at least `t_heisenberg` apart.
pub fn draw_times<R: Rng>(cfg: &SamplerConfig, t_heisenberg: Option<f64>, rng: &mut R) -> Result<Vec<f64>> {
    draw_n_times(cfg, cfg.n_samp, t_heisenberg, rng)
}

fn draw_n_times<R: Rng>(cfg: &SamplerConfig, count: usize, t_heisenberg: Option<f64>, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    let width = cfg.t_max - cfg.t_min;
    let uniform = |rng: &mut R| cfg.t_min + width * rng.random::<f64>();
    if !cfg.enforce_heisenberg_spacing {
        return Ok((0..count).map(|_| uniform(rng)).collect());
    }
    let gap = t_heisenberg
        .ok_or_else(|| Error::Parameter("heisenberg spacing requested without a heisenberg time".into()))?;
    if count as f64 * gap > width {
        return Err(Error::Parameter(format!(
            "{count} times spaced by t_H = {gap:.3} do not fit in [{}, {}]; widen the window",
            cfg.t_min, cfg.t_max
        )));
    }
    let mut sorted: Vec<f64> = Vec::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 1000 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Parameter(format!(
                "could not place {count} times spaced by t_H = {gap:.3}; widen the window"
            )));
        }
        let t = uniform(rng);
        let pos = sorted.partition_point(|&s| s < t);
        let clear_left = pos == 0 || t - sorted[pos - 1] >= gap;
        let clear_right = pos == sorted.len() || sorted[pos] - t >= gap;
        if clear_left && clear_right {
            sorted.insert(pos, t);
            out.push(t);
        }
    }
    Ok(out)
}

fn check_engine(engine: &EvolutionEngine, basis: &ConstrainedBasis) -> Result<()> {
    if engine.hamiltonian().kind() != BasisKind::Constrained || engine.dim() != basis.len() {
        return Err(Error::Parameter(
            "sampler needs an engine over the constrained basis".into(),
        ));
    }
    Ok(())
}

fn heisenberg_for(engine: &EvolutionEngine, cfg: &SamplerConfig) -> Result<Option<f64>> {
    if cfg.enforce_heisenberg_spacing {
        Ok(Some(engine.heisenberg_time()?))
    } else {
        Ok(None)
    }
}

/// Inverse-CDF draw of a basis index from a state's Born probabilities.
fn measure_index(state: &StateVector, u: f64) -> usize {
    let total: f64 = state.amps.iter().map(|a| a.norm_sqr()).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if acc > target {
            return i;
        }
    }
    last_nonzero
}

/// Cumulative Born weights for repeated shots of one state.
struct ShotTable {
    cdf: Vec<f64>,
}

impl ShotTable {
    fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    fn draw(&self, u: f64) -> usize {
        let total = *self.cdf.last().unwrap();
        let target = u * total;
        let i = self.cdf.partition_point(|&c| c <= target);
        i.min(self.cdf.len() - 1)
    }
}

/// Fixed-input shots: one measurement of `exp(-iHt)|0…0⟩` per drawn time.
pub fn ryd_samp_fi(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    cfg: &SamplerConfig,
    streams: &mut Streams,
) -> Result<SampleSet> {
    check_engine(engine, basis)?;
    let times = draw_times(cfg, heisenberg_for(engine, cfg)?, &mut streams.times)?;
    let us: Vec<f64> = (0..times.len()).map(|_| streams.measure.random()).collect();
    let psi0 = StateVector::basis_state(basis.len(), basis.zero_index(), BasisKind::Constrained);
    let mut outcomes = vec![0u64; times.len()];
    engine.propagate(&psi0, &times, |i, state| {
        outcomes[i] = basis.state(measure_index(state, us[i]));
    })?;
    Ok(SampleSet::from_outcomes(basis.n(), outcomes))
}

/// Mean Born distribution of `exp(-iHt)|0…0⟩` over `times`.
pub fn effective_distribution_fi(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    times: &[f64],
) -> Result<DistributionStats> {
    effective_distribution_from(engine, basis, basis.zero_index(), times)
}

/// Exact fixed-input distribution: Born probabilities of
/// `exp(-iHt)|0…0⟩` averaged over `t` uniform in `[t_min, t_max]`.
pub fn exact_fi_distribution(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    cfg: &SamplerConfig,
) -> Result<DistributionStats> {
    check_engine(engine, basis)?;
    cfg.validate()?;
    let psi0 = StateVector::basis_state(basis.len(), basis.zero_index(), BasisKind::Constrained);
    let probs = engine.window_averaged_probabilities(&psi0, cfg.t_min, cfg.t_max)?;
    Ok(DistributionStats::new(probs))
}

/// Mean Born distribution of `exp(-iHt)|start⟩` over `times`.
pub fn effective_distribution_from(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    start: usize,
    times: &[f64],
) -> Result<DistributionStats> {
    check_engine(engine, basis)?;
    if times.is_empty() {
        return Err(Error::Parameter(
            "effective distribution needs at least one time".into(),
        ));
    }
    let psi0 = StateVector::basis_state(basis.len(), start, BasisKind::Constrained);
    let mut acc = vec![0.0; basis.len()];
    engine.propagate(&psi0, times, |_, state| {
        for (a, amp) in acc.iter_mut().zip(&state.amps) {
            *a += amp.norm_sqr();
        }
    })?;
    let m = times.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    Ok(DistributionStats::new(acc))
}

/// Classical draws from an exact distribution using the measurement stream.
pub fn sample_distribution<R: Rng>(
    d: &DistributionStats,
    basis: &ConstrainedBasis,
    count: usize,
    rng: &mut R,
) -> SampleSet {
    let table = ShotTable::new(&d.probs);
    SampleSet::from_outcomes(basis.n(), (0..count).map(|_| basis.state(table.draw(rng.random()))))
}

/// One evolution of the feed-forward chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedStep {
    /// Basis index the evolution started from.
    pub initial: usize,
    pub time: f64,
}

/// Outcome of an ideal feed-forward run.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForwardRun {
    pub samples: SampleSet,
    /// Measured bitstrings in order.
    pub trajectory: Vec<u64>,
    pub steps: Vec<FeedStep>,
}

/// Ideal feed-forward: `cfg.k` evolutions, each measured once and the
/// outcome used as the next initial state.
pub fn ryd_samp_ff(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    cfg: &SamplerConfig,
    streams: &mut Streams,
) -> Result<FeedForwardRun> {
    check_engine(engine, basis)?;
    let times = draw_n_times(cfg, cfg.k, heisenberg_for(engine, cfg)?, &mut streams.times)?;
    let mut current = basis.zero_index();
    let mut trajectory = Vec::with_capacity(cfg.k);
    let mut steps = Vec::with_capacity(cfg.k);
    for &t in &times {
        let psi = StateVector::basis_state(basis.len(), current, BasisKind::Constrained);
        let state = engine.evolve(&psi, t)?;
        steps.push(FeedStep {
            initial: current,
            time: t,
        });
        current = measure_index(&state, streams.measure.random());
        trajectory.push(basis.state(current));
    }
    Ok(FeedForwardRun {
        samples: SampleSet::from_outcomes(basis.n(), trajectory.iter().copied()),
        trajectory,
        steps,
    })
}

/// Outcome of a practical feed-forward run.
#[derive(Clone, Debug, PartialEq)]
pub struct PracticalRun {
    /// Union of all `k · shots_per_step` measurements.
    pub samples: SampleSet,
    pub steps: Vec<FeedStep>,
}

/// Practical feed-forward: `cfg.k` evolutions, `cfg.shots_per_step` shots
/// each, one uniformly chosen shot seeding the next evolution.
pub fn practical_ff(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    cfg: &SamplerConfig,
    streams: &mut Streams,
) -> Result<PracticalRun> {
    check_engine(engine, basis)?;
    let times = draw_n_times(cfg, cfg.k, heisenberg_for(engine, cfg)?, &mut streams.times)?;
    let mut samples = SampleSet::new(basis.n());
    let mut steps = Vec::with_capacity(cfg.k);
    let mut current = basis.zero_index();
    let mut shots = Vec::with_capacity(cfg.shots_per_step);
    for &t in &times {
        let psi = StateVector::basis_state(basis.len(), current, BasisKind::Constrained);
        let state = engine.evolve(&psi, t)?;
        let table = ShotTable::new(&state.probabilities());
        shots.clear();
        for _ in 0..cfg.shots_per_step {
            let idx = table.draw(streams.measure.random());
            shots.push(idx);
            samples.push(basis.state(idx));
        }
        steps.push(FeedStep {
            initial: current,
            time: t,
        });
        current = shots[streams.feed.random_range(0..shots.len())];
    }
    Ok(PracticalRun { samples, steps })
}

/// Non-uniformity of the exact mixture `(1/k) Σ_s |⟨x|U(t_s)|x_s⟩|²` after
/// each of the recorded feed-forward steps.
pub fn mixture_eta_trace(engine: &EvolutionEngine, basis: &ConstrainedBasis, steps: &[FeedStep]) -> Result<Vec<f64>> {
    check_engine(engine, basis)?;
    let mut acc = vec![0.0; basis.len()];
    let mut trace = Vec::with_capacity(steps.len());
    let mut mix = vec![0.0; basis.len()];
    for (k, step) in steps.iter().enumerate() {
        let psi = StateVector::basis_state(basis.len(), step.initial, BasisKind::Constrained);
        let state = engine.evolve(&psi, step.time)?;
        for (a, amp) in acc.iter_mut().zip(&state.amps) {
            *a += amp.norm_sqr();
        }
        let scale = 1.0 / (k + 1) as f64;
        mix.iter_mut().zip(&acc).for_each(|(m, a)| *m = a * scale);
        trace.push(total_variation_from_uniform(&mix));
    }
    Ok(trace)
}

/// Exact mixture distribution over all recorded feed-forward steps.
pub fn mixture_distribution(
    engine: &EvolutionEngine,
    basis: &ConstrainedBasis,
    steps: &[FeedStep],
) -> Result<DistributionStats> {
    check_engine(engine, basis)?;
    if steps.is_empty() {
        return Err(Error::Parameter("mixture needs at least one step".into()));
    }
    let mut acc = vec![0.0; basis.len()];
    for step in steps {
        let psi = StateVector::basis_state(basis.len(), step.initial, BasisKind::Constrained);
        let state = engine.evolve(&psi, step.time)?;
        for (a, amp) in acc.iter_mut().zip(&state.amps) {
            *a += amp.norm_sqr();
        }
    }
    let k = steps.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(DistributionStats::new(acc))
}
