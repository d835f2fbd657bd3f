//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rydcount_core::corpus::{benchmark_grids, oracle_corpus};
use rydcount_core::counter::{
    count_solutions, counting_config, default_n_samp, exact_count_bruteforce, exact_count_dp, ryd_count,
    ryd_count_with_oracle_sampler, QuantumSampler,
};
use rydcount_core::evolution::{fit_exponential, EvolutionEngine, Method, StateVector};
use rydcount_core::instance::{build_chain, BlockadeGraph, Register};
use rydcount_core::rng::{stream, Purpose, Streams};
use rydcount_core::sampler::{
    draw_times, exact_fi_distribution, mixture_eta_trace, ryd_samp_ff, total_variation, Protocol, SamplerConfig,
};
use rydcount_core::spectrum::{build_pxp, build_rydberg, enumerate_solutions, BasisKind, ConstrainedBasis};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Chain {
    n: usize,
    basis: ConstrainedBasis,
    engine: EvolutionEngine,
}

fn pxp_engine(g: &BlockadeGraph, method: Method) -> (ConstrainedBasis, EvolutionEngine) {
    let basis = enumerate_solutions(g).unwrap();
    let h = build_pxp(g, &basis, 1.0).unwrap();
    (basis, EvolutionEngine::new(Arc::new(h), method).unwrap())
}

fn vacuum(basis: &ConstrainedBasis) -> StateVector {
    StateVector::basis_state(basis.len(), basis.zero_index(), BasisKind::Constrained)
}

fn window_times(count: usize, seed: u64) -> Vec<f64> {
    let cfg = SamplerConfig {
        n_samp: count,
        t_min: 10.0,
        t_max: 1000.0,
        ..SamplerConfig::default()
    };
    draw_times(&cfg, None, &mut stream(seed, Purpose::Times, 0)).unwrap()
}

fn fibonacci(k: usize) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..k {
        (a, b) = (b, a + b);
    }
    a
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn exact_f64(g: &BlockadeGraph) -> f64 {
    count_solutions(g).unwrap().to_string().parse().unwrap()
}

fn exact_oracles() -> Outcome {
    let start = Instant::now();
    let corpus = oracle_corpus().unwrap();
    let mut disagree = Vec::new();
    for inst in &corpus {
        if exact_count_bruteforce(&inst.graph).unwrap() != exact_count_dp(&inst.graph).unwrap() {
            disagree.push(inst.name.clone());
        }
    }
    let fib_ok = (1..=20)
        .all(|n| count_solutions(&build_chain(n).unwrap()).unwrap().to_string() == fibonacci(n + 2).to_string());
    let c18 = count_solutions(&build_chain(18).unwrap()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        corpus.len() == 50 && disagree.is_empty() && fib_ok && c18.to_string() == "6765" && secs < 60.0,
        format!(
            "{} instances, {} disagreements, chain fibonacci {}, chain 18 = {c18}, {secs:.2}s",
            corpus.len(),
            disagree.len(),
            if fib_ok { "ok" } else { "broken" }
        ),
    )
}

fn self_reduction() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut broken = 0;
    for inst in oracle_corpus().unwrap() {
        let reg = Register::new(inst.graph.clone());
        let total = count_solutions(reg.graph()).unwrap();
        for &label in inst.graph.labels() {
            let zero = count_solutions(reg.fix_zero(label).unwrap().graph()).unwrap();
            let one = count_solutions(reg.fix_one(label).unwrap().graph()).unwrap();
            checked += 1;
            if total != zero + one {
                broken += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        broken == 0 && secs < 60.0,
        format!("{checked} vertex reductions, {broken} broken, {secs:.2}s"),
    )
}

fn dynamics() -> Outcome {
    let times = [0.0, 0.7, 10.0, 123.4, 1000.0];
    let mut norm_err: f64 = 0.0;
    let mut amp_err: f64 = 0.0;
    let mut max_dim = 0;
    for g in [
        build_chain(12).unwrap(),
        rydcount_core::instance::build_grid(3, 4).unwrap(),
    ] {
        let (basis, exact) = pxp_engine(&g, Method::Exact);
        let (_, krylov) = pxp_engine(&g, Method::Krylov);
        max_dim = max_dim.max(basis.len());
        for &t in &times {
            let a = exact.evolve(&vacuum(&basis), t).unwrap();
            let b = krylov.evolve(&vacuum(&basis), t).unwrap();
            norm_err = norm_err.max((a.norm() - 1.0).abs()).max((b.norm() - 1.0).abs());
            let d = a
                .amps
                .iter()
                .zip(&b.amps)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            amp_err = amp_err.max(d);
        }
    }
    let (basis, engine) = pxp_engine(&build_chain(2).unwrap(), Method::Exact);
    let mut sp_err: f64 = 0.0;
    for i in 0..=200 {
        let t = i as f64 * 5.0;
        let sp = engine.survival_probability(&vacuum(&basis), t).unwrap();
        sp_err = sp_err.max((sp - (t / 2f64.sqrt()).cos().powi(2)).abs());
    }
    outcome(
        norm_err <= 1e-10 && amp_err <= 1e-7 && max_dim <= 500 && sp_err <= 1e-8,
        format!("norm error {norm_err:.1e}, exact vs krylov {amp_err:.1e} (dim <= {max_dim}), two-atom survival {sp_err:.1e}"),
    )
}

fn rydberg_consistency() -> Outcome {
    let times = window_times(100, 2024);
    let mut worst_tv: f64 = 0.0;
    let mut worst_leak: f64 = 0.0;
    let mut rows = Vec::new();
    for n in 2..=8 {
        let g = build_chain(n).unwrap();
        let (basis, pxp) = pxp_engine(&g, Method::Exact);
        let ryd = EvolutionEngine::new(Arc::new(build_rydberg(&g, 1.0, 50.0).unwrap()), Method::Exact).unwrap();
        let r0 = StateVector::basis_state(1 << n, 0, BasisKind::Full);
        let m = times.len() as f64;
        let mut dp = vec![0.0; basis.len()];
        let mut dr = vec![0.0; basis.len()];
        let mut leak = 0.0;
        pxp.propagate(&vacuum(&basis), &times, |_, s| {
            dp.iter_mut().zip(s.probabilities()).for_each(|(a, p)| *a += p / m);
        })
        .unwrap();
        ryd.propagate(&r0, &times, |_, s| {
            let p = s.probabilities();
            let mut inside = 0.0;
            for (i, &x) in basis.states().iter().enumerate() {
                dr[i] += p[x as usize] / m;
                inside += p[x as usize];
            }
            leak += (1.0 - inside) / m;
        })
        .unwrap();
        let z: f64 = dr.iter().sum();
        dr.iter_mut().for_each(|p| *p /= z);
        let tv = total_variation(&dp, &dr);
        worst_tv = worst_tv.max(tv);
        worst_leak = worst_leak.max(leak);
        rows.push(format!("n={n} tv={tv:.3}"));
    }
    outcome(
        worst_tv <= 0.05 && worst_leak <= 0.02,
        format!("max tv {worst_tv:.3}, max leakage {worst_leak:.1e}; {}", rows.join(" ")),
    )
}

fn fi_bias(chains: &[Chain]) -> Outcome {
    let cfg = SamplerConfig::default();
    let mut n_eta = Vec::new();
    for c in chains {
        let d = exact_fi_distribution(&c.engine, &c.basis, &cfg).unwrap();
        n_eta.push((c.n as f64, c.n as f64 * d.eta));
    }
    let xs: Vec<f64> = n_eta.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = n_eta.iter().map(|p| p.1).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum::<f64>()
        / xs.iter().map(|x| (x - xbar).powi(2)).sum::<f64>();
    let strictly = ys.windows(2).all(|w| w[1] > w[0]);
    // same-parity chains share their spectral structure
    let by_parity = ys.windows(3).all(|w| w[2] > w[0]);
    let above_one = n_eta.iter().filter(|p| p.0 >= 14.0).all(|p| p.1 > 1.0);

    let trajectories = 10;
    let ks = [1usize, 2, 5, 10, 20, 50, 100, 200];
    let c14 = chains.iter().find(|c| c.n == 14).expect("chain 14 built");
    let mut mean_eta = vec![0.0; ks.len()];
    for seed in 0..trajectories {
        let cfg = SamplerConfig {
            protocol: Protocol::FeedForward,
            k: 200,
            seed,
            ..SamplerConfig::default()
        };
        let run = ryd_samp_ff(&c14.engine, &c14.basis, &cfg, &mut Streams::new(seed, 0)).unwrap();
        let trace = mixture_eta_trace(&c14.engine, &c14.basis, &run.steps).unwrap();
        for (m, &k) in mean_eta.iter_mut().zip(&ks) {
            *m += trace[k - 1] / trajectories as f64;
        }
    }
    let ff_decreasing = mean_eta.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[(f64, f64)]| {
        v.iter()
            .map(|(n, y)| format!("{n}:{y:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ff = ks
        .iter()
        .zip(&mean_eta)
        .map(|(k, e)| format!("{k}:{e:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    outcome(
        slope > 0.0 && by_parity && above_one && ff_decreasing,
        format!(
            "n*eta {} (slope {slope:.3}, strictly increasing {strictly}, increasing within parity {by_parity}); ff eta by k {ff}",
            fmt(&n_eta)
        ),
    )
}

fn survival_scaling(chains: &[Chain]) -> Outcome {
    let times = window_times(400, 4);
    let mut ns = Vec::new();
    let mut avg = Vec::new();
    let mut thermal = Vec::new();
    for c in chains {
        ns.push(c.n as f64);
        avg.push(c.engine.averaged_survival(&vacuum(&c.basis), &times).unwrap());
        thermal.push(1.0 / c.basis.len() as f64);
    }
    let fit = fit_exponential(&ns, &avg).unwrap();
    let th = fit_exponential(&ns, &thermal).unwrap();
    outcome(
        (0.25..=0.40).contains(&fit.alpha) && (0.42..=0.54).contains(&th.alpha),
        format!("alpha {:.3}, thermal alpha {:.3}", fit.alpha, th.alpha),
    )
}

fn chain_counting() -> Outcome {
    let seeds = 20;
    let mut fi_ok = true;
    let mut pff_ok = true;
    let mut rows = Vec::new();
    for n in 8..=12 {
        let g = build_chain(n).unwrap();
        let exact = exact_f64(&g);
        let reg = Register::new(g);
        let med = |protocol| {
            let kappas: Vec<f64> = (0..seeds)
                .map(|seed| {
                    let cfg = counting_config(n, protocol, default_n_samp(n), seed);
                    ryd_count(&reg, &mut QuantumSampler::new(cfg)).unwrap().kappa()
                })
                .collect();
            median(kappas)
        };
        let fi = med(Protocol::FixedInput);
        let pff = med(Protocol::PracticalFeedForward);
        let pff_err = pff / exact - 1.0;
        fi_ok &= fi > exact;
        pff_ok &= pff_err.abs() <= 0.10;
        rows.push(format!("n={n} fi {:+.3} pff {pff_err:+.4}", fi / exact - 1.0));
    }
    outcome(fi_ok && pff_ok, format!("median relative error: {}", rows.join(", ")))
}

fn grid_counting() -> Outcome {
    let mut ok = true;
    let mut rows = Vec::new();
    for inst in benchmark_grids().unwrap() {
        let n = inst.graph.n();
        let exact = exact_f64(&inst.graph);
        let reg = Register::new(inst.graph.clone());
        let errs: Vec<f64> = (0..3)
            .map(|seed| {
                let cfg = counting_config(n, Protocol::PracticalFeedForward, default_n_samp(n), seed);
                ryd_count(&reg, &mut QuantumSampler::new(cfg))
                    .unwrap()
                    .relative_error(exact)
            })
            .collect();
        let med = median(errs);
        ok &= med.abs() <= 0.10 && n <= 18;
        rows.push(format!("{} (n={n}, exact {exact}) {med:+.4}", inst.name));
    }
    outcome(ok, format!("median relative error over 3 seeds: {}", rows.join(", ")))
}

fn oracle_isolation() -> Outcome {
    let reg = Register::new(build_chain(12).unwrap());
    let hits = (0..100)
        .filter(|&seed| {
            let k = ryd_count_with_oracle_sampler(&reg, 100_000, seed).unwrap().kappa();
            (k / 377.0 - 1.0).abs() <= 0.03
        })
        .count();
    outcome(hits >= 95, format!("{hits}/100 runs within 3% of 377"))
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_rydcount"))
        .current_dir(dir)
        .args(args)
        .env_remove("RYDCOUNT_MAX_BASIS")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let commands: [(&str, Vec<&str>); 6] = [
        (
            "gen",
            vec!["gen", "punched", "3", "3", "--holes", "4", "--format", "dimacs"],
        ),
        (
            "count",
            vec!["count", "chain:7", "--runs", "3", "--jobs", "2", "--seed", "5"],
        ),
        (
            "count-csv",
            vec![
                "count",
                "grid:2x3",
                "--protocol",
                "fi",
                "--n-samp",
                "300",
                "--format",
                "csv",
            ],
        ),
        (
            "sample",
            vec!["sample", "chain:6", "--protocol", "ff", "--k", "80", "--trace"],
        ),
        ("eta", vec!["eta", "chain:8", "--protocol", "fi", "--exact"]),
        (
            "survival",
            vec![
                "survival",
                "chain:4",
                "chain:6",
                "--n-times",
                "50",
                "--t-grid",
                "0:5:0.5",
                "--curve-dir",
                "curves",
            ],
        ),
    ];
    let mut failures = Vec::new();
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let file = format!("{name}-{round}.out");
            let mut full: Vec<&str> = args.clone();
            full.extend(["-o", &file]);
            let (code, _) = run_cli(d, &full);
            let mut bytes = std::fs::read(d.join(&file)).unwrap_or_default();
            if *name == "survival" {
                for curve in ["chain_4.csv", "chain_6.csv"] {
                    bytes.extend(std::fs::read(d.join("curves").join(curve)).unwrap_or_default());
                }
            }
            outputs.push((code, bytes));
        }
        if outputs[0].0 != 0 || outputs[0] != outputs[1] || outputs[0].1.is_empty() {
            failures.push(name.to_string());
        }
    }
    let mut replays = 0;
    for record in ["count-0.out", "sample-0.out", "eta-0.out", "survival-0.out"] {
        if run_cli(d, &["replay", record]).0 == 0 {
            replays += 1;
        }
    }
    let text = std::fs::read_to_string(d.join("count-0.out")).unwrap();
    let tampered = text.replacen("\"median_kappa\": ", "\"median_kappa\": 1", 1);
    std::fs::write(d.join("tampered.json"), tampered).unwrap();
    let caught = run_cli(d, &["replay", "tampered.json"]).0 == 1;
    outcome(
        failures.is_empty() && replays == 4 && caught,
        format!(
            "{} commands rerun byte-identical, {replays}/4 records replayed, tampered record {}",
            commands.len() - failures.len(),
            if caught { "rejected" } else { "accepted" }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |id: usize, o: Outcome| {
        println!("criterion {id}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, o));
    };
    report(1, exact_oracles());
    report(2, self_reduction());
    report(3, dynamics());
    report(4, rydberg_consistency());
    let chains: Vec<Chain> = (8..=16)
        .map(|n| {
            let (basis, engine) = pxp_engine(&build_chain(n).unwrap(), Method::Exact);
            Chain { n, basis, engine }
        })
        .collect();
    report(5, fi_bias(&chains));
    report(6, survival_scaling(&chains));
    drop(chains);
    report(7, chain_counting());
    report(8, grid_counting());
    report(9, oracle_isolation());
    report(10, determinism());
    let failed: Vec<String> = results.iter().filter(|r| !r.1.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("acceptance: failed criteria {}", failed.join(", "));
        std::process::exit(1);
    }
}
