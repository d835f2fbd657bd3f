use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use rydcount_core::counter::{
    count_solutions, ryd_count, CountEstimate, EnginePolicy, QuantumSampler, SolutionSampler, UniformSampler,
};
use rydcount_core::evolution::{fit_exponential, ramp_dip_scan, EvolutionEngine, Method, StateVector};
use rydcount_core::instance::{BlockadeGraph, Register};
use rydcount_core::rng::{stream, Purpose, Streams};
use rydcount_core::sampler::{
    draw_times, exact_fi_distribution, mixture_distribution, mixture_eta_trace, practical_ff, ryd_samp_ff, ryd_samp_fi,
    DistributionStats, FeedStep, Protocol, SampleSet, SamplerConfig,
};
use rydcount_core::spectrum::{build_pxp, build_rydberg, enumerate_solutions_capped, BasisKind};

use crate::config::{EngineArg, Settings};
use crate::error::CliError;
use crate::record::{emit, ExperimentRecord, InstanceInfo};

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item ran")).collect()
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

fn quantum_sampler(settings: &Settings, cfg: SamplerConfig) -> QuantumSampler {
    let mut sampler = QuantumSampler::new(cfg);
    sampler.omega = settings.omega;
    sampler.policy = settings.engine.into();
    sampler.max_basis = settings.max_basis;
    sampler
}

// ---- count ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountOptions {
    pub runs: usize,
    /// Replace the quench sampler with an exactly uniform one.
    pub oracle: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CountRun {
    seed: u64,
    kappa: f64,
    rel_error: Option<f64>,
    estimate: CountEstimate,
}

pub struct CountOutput {
    pub record: ExperimentRecord,
    pub csv: String,
}

pub fn count(
    name: &str,
    g: &BlockadeGraph,
    settings: &Settings,
    opts: &CountOptions,
    jobs: usize,
) -> Result<CountOutput, CliError> {
    if opts.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let n = g.n();
    let base = settings.sampler_config(n, settings.seed)?;
    let exact = match count_solutions(g) {
        Ok(c) => Some(c.to_string()),
        Err(e) if e.is_resource() => None,
        Err(e) => return Err(e.into()),
    };
    let exact_f = exact.as_ref().map(|c| c.parse::<f64>().expect("decimal count"));
    let seeds: Vec<u64> = (0..opts.runs as u64).map(|r| settings.seed.wrapping_add(r)).collect();
    let results = parallel_map(&seeds, jobs, |_, &seed| -> Result<CountRun, CliError> {
        let reg = Register::new(g.clone());
        let estimate = if opts.oracle {
            let mut sampler = UniformSampler::new(base.n_samp, seed);
            sampler.max_basis = settings.max_basis;
            ryd_count(&reg, &mut sampler)?
        } else {
            let mut sampler = quantum_sampler(settings, SamplerConfig { seed, ..base.clone() });
            ryd_count(&reg, &mut sampler)?
        };
        Ok(CountRun {
            seed,
            kappa: estimate.kappa(),
            rel_error: exact_f.map(|e| estimate.relative_error(e)),
            estimate,
        })
    });
    let runs: Vec<CountRun> = results.into_iter().collect::<Result<_, _>>()?;
    let mut kappas: Vec<f64> = runs.iter().map(|r| r.kappa).collect();
    let mut rels: Vec<f64> = runs.iter().filter_map(|r| r.rel_error).collect();
    let sampler_name = runs[0].estimate.sampler.clone();

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "instance",
        "n",
        "protocol",
        "n_samp",
        "kappa",
        "exact",
        "rel_error",
        "seed",
    ])
    .expect("in-memory csv");
    for r in &runs {
        csv.write_record([
            name.to_string(),
            n.to_string(),
            sampler_name.clone(),
            base.n_samp.to_string(),
            r.kappa.to_string(),
            exact.clone().unwrap_or_default(),
            r.rel_error.map(|x| x.to_string()).unwrap_or_default(),
            r.seed.to_string(),
        ])
        .expect("in-memory csv");
    }
    let csv = String::from_utf8(csv.into_inner().expect("in-memory csv")).expect("utf-8 csv");

    let outputs = json!({
        "sampler": sampler_name,
        "n_samp": base.n_samp,
        "k": base.k,
        "shots_per_step": base.shots_per_step,
        "exact": exact,
        "median_kappa": median(&mut kappas),
        "median_rel_error": median(&mut rels),
        "runs": runs,
    });
    let config = json!({ "settings": settings, "options": opts });
    let record = ExperimentRecord::new(
        "count",
        settings.seed,
        config,
        vec![InstanceInfo::new(name, g)],
        outputs,
    );
    Ok(CountOutput { record, csv })
}

// ---- sample / eta --------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Exact distribution instead of measured samples.
    pub exact: bool,
    pub oracle: bool,
    /// Non-uniformity after every feed-forward step.
    pub trace: bool,
    pub distribution: bool,
}

pub fn sample(
    name: &str,
    g: &BlockadeGraph,
    settings: &Settings,
    opts: &SampleOptions,
) -> Result<ExperimentRecord, CliError> {
    let n = g.n();
    let cfg = settings.sampler_config(n, settings.seed)?;
    let protocol: Protocol = settings.protocol.into();
    let mut outputs = serde_json::Map::new();
    let mut trace: Option<Vec<f64>> = None;

    let (basis, stats, total) = if opts.oracle {
        let basis = enumerate_solutions_capped(g, settings.max_basis)?;
        let mut oracle = UniformSampler::new(cfg.n_samp, settings.seed);
        oracle.max_basis = settings.max_basis;
        let s = oracle.sample(&Register::new(g.clone()), 0)?;
        let stats = DistributionStats::new(s.distribution(&basis)?);
        (basis, stats, Some(s.total()))
    } else {
        let mut sampler = quantum_sampler(settings, cfg.clone());
        if opts.exact && protocol == Protocol::FixedInput {
            sampler.policy = EnginePolicy::Exact;
        }
        let (basis, engine) = sampler.engine(g)?;
        let mut streams = Streams::new(settings.seed, 0);
        let (samples, steps): (Option<SampleSet>, Option<Vec<FeedStep>>) = match protocol {
            Protocol::FixedInput if opts.exact => (None, None),
            Protocol::FixedInput => (Some(ryd_samp_fi(&engine, &basis, &cfg, &mut streams)?), None),
            Protocol::FeedForward => {
                let run = ryd_samp_ff(&engine, &basis, &cfg, &mut streams)?;
                (Some(run.samples), Some(run.steps))
            }
            Protocol::PracticalFeedForward => {
                let run = practical_ff(&engine, &basis, &cfg, &mut streams)?;
                (Some(run.samples), Some(run.steps))
            }
        };
        if let (true, Some(steps)) = (opts.trace, &steps) {
            trace = Some(mixture_eta_trace(&engine, &basis, steps)?);
        }
        let total = samples.as_ref().map(SampleSet::total);
        let stats = match (opts.exact, steps, samples) {
            (true, Some(steps), _) => mixture_distribution(&engine, &basis, &steps)?,
            (true, None, _) => exact_fi_distribution(&engine, &basis, &cfg)?,
            (false, _, Some(s)) => DistributionStats::new(s.distribution(&basis)?),
            (false, _, None) => unreachable!("empirical runs always sample"),
        };
        (basis, stats, total)
    };

    outputs.insert(
        "protocol".into(),
        json!(if opts.oracle { "uniform" } else { protocol.as_str() }),
    );
    outputs.insert("mode".into(), json!(if opts.exact { "exact" } else { "empirical" }));
    outputs.insert("n".into(), json!(n));
    outputs.insert("basis_size".into(), json!(basis.len()));
    outputs.insert("samples".into(), json!(total));
    outputs.insert("eta".into(), json!(stats.eta));
    outputs.insert("n_eta".into(), json!(n as f64 * stats.eta));
    outputs.insert("support_size".into(), json!(stats.support_size));
    if let Some(t) = trace {
        outputs.insert("eta_trace".into(), json!(t));
    }
    if opts.distribution {
        let map: BTreeMap<String, f64> = stats.to_map(&basis);
        outputs.insert("distribution".into(), json!(map));
    }
    let config = json!({ "settings": settings, "options": opts, "sampler": cfg });
    Ok(ExperimentRecord::new(
        "sample",
        settings.seed,
        config,
        vec![InstanceInfo::new(name, g)],
        serde_json::Value::Object(outputs),
    ))
}

// ---- survival ------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Pxp,
    Rydberg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOptions {
    pub n_times: usize,
    pub model: Model,
    /// `start:stop:step` grid for the ramp-dip scan.
    pub t_grid: Option<String>,
    /// Directory receiving one `t,sp` CSV per instance.
    pub curve_dir: Option<PathBuf>,
}

fn parse_grid(arg: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("time grid looks like 0:20:0.05, got \"{arg}\""));
    let parts: Vec<f64> = arg
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start >= 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn survival(
    instances: &[(String, BlockadeGraph)],
    settings: &Settings,
    opts: &SurvivalOptions,
    jobs: usize,
) -> Result<ExperimentRecord, CliError> {
    if opts.n_times == 0 {
        return Err(CliError::Usage("--n-times must be at least 1".into()));
    }
    let grid = opts.t_grid.as_deref().map(parse_grid).transpose()?;
    if grid.is_some() && opts.curve_dir.is_none() {
        return Err(CliError::Usage("--t-grid needs --curve-dir for the curve files".into()));
    }
    let rows = parallel_map(
        instances,
        jobs,
        |idx, (name, g)| -> Result<serde_json::Value, CliError> {
            let basis = enumerate_solutions_capped(g, settings.max_basis)?;
            let (h, start, kind) = match opts.model {
                Model::Pxp => (
                    build_pxp(g, &basis, settings.omega)?,
                    basis.zero_index(),
                    BasisKind::Constrained,
                ),
                Model::Rydberg => (build_rydberg(g, settings.omega, settings.v)?, 0, BasisKind::Full),
            };
            let engine = match settings.engine {
                EngineArg::Exact => EvolutionEngine::new(Arc::new(h), Method::Exact)?,
                EngineArg::Krylov => EvolutionEngine::new(Arc::new(h), Method::Krylov)?,
                EngineArg::Auto => EvolutionEngine::auto(Arc::new(h))?,
            };
            let psi0 = StateVector::basis_state(engine.dim(), start, kind);
            let window = SamplerConfig {
                n_samp: opts.n_times,
                t_min: settings.t_min,
                t_max: settings.t_max,
                ..SamplerConfig::default()
            };
            let times = draw_times(&window, None, &mut stream(settings.seed, Purpose::Times, idx as u64))?;
            let averaged = engine.averaged_survival(&psi0, &times)?;
            let mut row = json!({
                "name": name,
                "n": g.n(),
                "solutions": basis.len(),
                "averaged_survival": averaged,
                "thermal": 1.0 / basis.len() as f64,
            });
            if let (Some(grid), Some(dir)) = (&grid, &opts.curve_dir) {
                let report = ramp_dip_scan(&engine, &psi0, grid)?;
                let csv = report.curve.to_csv();
                let path = dir.join(format!("{}.csv", file_stem(name)));
                emit(Some(&path), &csv)?;
                row["curve_file"] = json!(path.file_name().and_then(|f| f.to_str()));
                row["curve_digest"] = json!(crate::record::digest(csv.as_bytes()));
                row["long_time_mean"] = json!(report.long_time_mean);
                row["dip"] = json!(report.dip.map(|(t, v)| json!({ "t": t, "sp": v })));
                row["settle_time"] = json!(report.settle_time);
            }
            Ok(row)
        },
    );
    let rows: Vec<serde_json::Value> = rows.into_iter().collect::<Result<_, _>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r["n"].as_f64().unwrap()).collect();
    let distinct = ns.iter().any(|&x| x != ns[0]);
    let fit = |key: &str| -> Result<serde_json::Value, CliError> {
        let vals: Vec<f64> = rows.iter().map(|r| r[key].as_f64().unwrap()).collect();
        let f = fit_exponential(&ns, &vals)?;
        Ok(json!({ "alpha": f.alpha, "beta": f.beta, "residual": f.residual }))
    };
    let outputs = json!({
        "model": opts.model,
        "instances": rows,
        "fit": if distinct { fit("averaged_survival")? } else { serde_json::Value::Null },
        "thermal_fit": if distinct { fit("thermal")? } else { serde_json::Value::Null },
    });
    let config = json!({ "settings": settings, "options": opts });
    let infos = instances.iter().map(|(name, g)| InstanceInfo::new(name, g)).collect();
    Ok(ExperimentRecord::new("survival", settings.seed, config, infos, outputs))
}

/// `n,averaged,thermal` table for a survival record.
pub fn survival_csv(record: &ExperimentRecord) -> String {
    let mut out = String::from("instance,n,averaged_survival,thermal\n");
    if let Some(rows) = record.outputs["instances"].as_array() {
        for r in rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r["name"].as_str().unwrap_or(""),
                r["n"],
                r["averaged_survival"],
                r["thermal"]
            ));
        }
    }
    out
}

// ---- replay --------------------------------------------------------------

/// Reruns the command stored in `record` with its own settings.
pub fn rerun(record: &ExperimentRecord, jobs: usize) -> Result<ExperimentRecord, CliError> {
    let settings: Settings = serde_json::from_value(record.config["settings"].clone())?;
    let graphs = record
        .instances
        .iter()
        .map(|i| Ok((i.name.clone(), i.graph()?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let first = || {
        graphs
            .first()
            .ok_or_else(|| CliError::Usage("record lists no instances".into()))
    };
    match record.command.as_str() {
        "count" => {
            let opts: CountOptions = serde_json::from_value(record.config["options"].clone())?;
            let (name, g) = first()?;
            Ok(count(name, g, &settings, &opts, jobs)?.record)
        }
        "sample" => {
            let opts: SampleOptions = serde_json::from_value(record.config["options"].clone())?;
            let (name, g) = first()?;
            sample(name, g, &settings, &opts)
        }
        "survival" => {
            let opts: SurvivalOptions = serde_json::from_value(record.config["options"].clone())?;
            survival(&graphs, &settings, &opts, jobs)
        }
        other => Err(CliError::Usage(format!("cannot replay command \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u64> = (0..37).collect();
        let out = parallel_map(&items, 4, |i, &x| (i as u64) * 100 + x);
        assert_eq!(out, items.iter().map(|x| x * 101).collect::<Vec<_>>());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn protocol_names_match() {
        use crate::config::ProtocolArg;
        for p in [ProtocolArg::Fi, ProtocolArg::Ff, ProtocolArg::Pff] {
            let core: Protocol = p.into();
            assert_eq!(serde_json::to_value(p).unwrap(), json!(core.as_str()));
        }
    }
}
