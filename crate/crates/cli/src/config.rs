//! Run settings resolved as flags over config file over defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use rydcount_core::counter::{counting_config, default_n_samp, EnginePolicy};
use rydcount_core::sampler::{Protocol, SamplerConfig};
use rydcount_core::spectrum::DEFAULT_MAX_BASIS;

use crate::error::CliError;

pub const MAX_BASIS_ENV: &str = "RYDCOUNT_MAX_BASIS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolArg {
    Fi,
    Ff,
    Pff,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Fi => Protocol::FixedInput,
            ProtocolArg::Ff => Protocol::FeedForward,
            ProtocolArg::Pff => Protocol::PracticalFeedForward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Auto,
    Exact,
    Krylov,
}

impl From<EngineArg> for EnginePolicy {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => EnginePolicy::Auto,
            EngineArg::Exact => EnginePolicy::Exact,
            EngineArg::Krylov => EnginePolicy::Krylov,
        }
    }
}

/// Flags shared by the simulation commands. Every field is optional so that
/// unset flags fall through to the config file.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFlags {
    /// Sampling protocol
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    /// Samples per self-reduction step (default n^4)
    #[arg(long)]
    pub n_samp: Option<usize>,
    /// Feed-forward evolutions per step
    #[arg(long)]
    pub k: Option<usize>,
    /// Measurements per evolution in practical feed-forward (default n)
    #[arg(long)]
    pub shots_per_step: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Rabi frequency
    #[arg(long)]
    pub omega: Option<f64>,
    /// Blockade interaction on graph edges (Rydberg model only)
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep sampled times at least one Heisenberg time apart
    #[arg(long)]
    pub heisenberg_spacing: Option<bool>,
    /// Time-evolution back end
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Largest constrained basis to enumerate
    #[arg(long)]
    pub max_basis: Option<usize>,
}

impl RunFlags {
    fn or(self, lower: RunFlags) -> RunFlags {
        RunFlags {
            protocol: self.protocol.or(lower.protocol),
            n_samp: self.n_samp.or(lower.n_samp),
            k: self.k.or(lower.k),
            shots_per_step: self.shots_per_step.or(lower.shots_per_step),
            t_min: self.t_min.or(lower.t_min),
            t_max: self.t_max.or(lower.t_max),
            omega: self.omega.or(lower.omega),
            v: self.v.or(lower.v),
            seed: self.seed.or(lower.seed),
            heisenberg_spacing: self.heisenberg_spacing.or(lower.heisenberg_spacing),
            engine: self.engine.or(lower.engine),
            max_basis: self.max_basis.or(lower.max_basis),
        }
    }
}

/// Fully resolved settings, embedded in every record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub protocol: ProtocolArg,
    pub n_samp: Option<usize>,
    pub k: Option<usize>,
    pub shots_per_step: Option<usize>,
    pub t_min: f64,
    pub t_max: f64,
    pub omega: f64,
    pub v: f64,
    pub seed: u64,
    pub heisenberg_spacing: bool,
    pub engine: EngineArg,
    pub max_basis: usize,
}

fn read_config(path: &Path) -> Result<RunFlags, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

fn env_max_basis() -> Result<Option<usize>, CliError> {
    match std::env::var(MAX_BASIS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{MAX_BASIS_ENV} must be an integer, got \"{v}\""))),
        Err(_) => Ok(None),
    }
}

impl Settings {
    pub fn resolve(flags: &RunFlags, config: Option<&PathBuf>) -> Result<Settings, CliError> {
        let file = match config {
            Some(p) => read_config(p)?,
            None => RunFlags::default(),
        };
        let env = RunFlags {
            max_basis: env_max_basis()?,
            ..RunFlags::default()
        };
        // flags > environment (basis cap only) > file
        let f = flags.clone().or(env).or(file);
        let defaults = SamplerConfig::default();
        let s = Settings {
            protocol: f.protocol.unwrap_or(ProtocolArg::Pff),
            n_samp: f.n_samp,
            k: f.k,
            shots_per_step: f.shots_per_step,
            t_min: f.t_min.unwrap_or(defaults.t_min),
            t_max: f.t_max.unwrap_or(defaults.t_max),
            omega: f.omega.unwrap_or(1.0),
            v: f.v.unwrap_or(50.0),
            seed: f.seed.unwrap_or(0),
            heisenberg_spacing: f.heisenberg_spacing.unwrap_or(false),
            engine: f.engine.unwrap_or(EngineArg::Auto),
            max_basis: f.max_basis.unwrap_or(DEFAULT_MAX_BASIS),
        };
        if !(s.omega > 0.0 && s.omega.is_finite()) {
            return Err(CliError::Usage(format!("--omega must be positive, got {}", s.omega)));
        }
        Ok(s)
    }

    /// Sampler configuration for an `n`-atom instance with `seed`.
    pub fn sampler_config(&self, n: usize, seed: u64) -> Result<SamplerConfig, CliError> {
        let n_samp = self.n_samp.unwrap_or_else(|| default_n_samp(n));
        let mut cfg = counting_config(n, self.protocol.into(), n_samp, seed);
        if let Some(shots) = self.shots_per_step {
            cfg.shots_per_step = shots;
            cfg.k = n_samp.div_ceil(shots.max(1));
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        cfg.t_min = self.t_min;
        cfg.t_max = self.t_max;
        cfg.enforce_heisenberg_spacing = self.heisenberg_spacing;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 9\nt_min = 20.0\nprotocol = \"fi\"\n").unwrap();
        let flags = RunFlags {
            seed: Some(3),
            ..Default::default()
        };
        let s = Settings::resolve(&flags, Some(&path)).unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.t_min, 20.0);
        assert_eq!(s.protocol, ProtocolArg::Fi);
        assert_eq!(s.t_max, 1000.0);

        std::fs::write(&path, "sed = 9\n").unwrap();
        assert!(Settings::resolve(&flags, Some(&path)).is_err());
    }

    #[test]
    fn counting_defaults() {
        let s = Settings::resolve(&RunFlags::default(), None).unwrap();
        let cfg = s.sampler_config(10, 1).unwrap();
        assert_eq!(cfg.n_samp, 10_000);
        assert_eq!(cfg.shots_per_step, 10);
        assert_eq!(cfg.k, 1000);
    }
}
