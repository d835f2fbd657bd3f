use std::sync::Arc;

use proptest::prelude::*;

use rydcount_core::counter::exact_count_bruteforce;
use rydcount_core::evolution::{EvolutionEngine, Method, StateVector};
use rydcount_core::instance::{build_chain, build_grid, BlockadeGraph};
use rydcount_core::rng::{stream, Purpose};
use rydcount_core::sampler::{draw_times, total_variation, SamplerConfig};
use rydcount_core::spectrum::{build_pxp, build_rydberg, enumerate_solutions, BasisKind, ConstrainedBasis};

fn arb_graph(max_n: usize) -> impl Strategy<Value = BlockadeGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
            let edges: Vec<_> = pairs.iter().zip(&keep).filter(|(_, k)| **k).map(|(e, _)| *e).collect();
            BlockadeGraph::new(n, edges).unwrap()
        })
    })
}

fn pxp(g: &BlockadeGraph, method: Method) -> (ConstrainedBasis, EvolutionEngine) {
    let basis = enumerate_solutions(g).unwrap();
    let h = build_pxp(g, &basis, 1.0).unwrap();
    (basis, EvolutionEngine::new(Arc::new(h), method).unwrap())
}

fn vacuum(basis: &ConstrainedBasis) -> StateVector {
    StateVector::basis_state(basis.len(), basis.zero_index(), BasisKind::Constrained)
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn two_atom_survival_is_cos_squared() {
    let (basis, engine) = pxp(&build_chain(2).unwrap(), Method::Exact);
    let psi = vacuum(&basis);
    for &t in &[0.0, 0.3, 1.0, 2.5, 10.0, 77.7, 999.0] {
        let sp = engine.survival_probability(&psi, t).unwrap();
        let want = (t / 2f64.sqrt()).cos().powi(2);
        assert!((sp - want).abs() < 1e-8, "t={t}: {sp} vs {want}");
    }
}

#[test]
fn basis_matches_brute_force_count() {
    for g in [
        build_chain(10).unwrap(),
        build_grid(3, 3).unwrap(),
        build_grid(2, 5).unwrap(),
    ] {
        let count = exact_count_bruteforce(&g).unwrap();
        assert_eq!(enumerate_solutions(&g).unwrap().len().to_string(), count.to_string());
    }
}

#[test]
fn exact_and_krylov_agree_on_chain_twelve() {
    let g = build_chain(12).unwrap();
    let (basis, exact) = pxp(&g, Method::Exact);
    let (_, krylov) = pxp(&g, Method::Krylov);
    assert!(basis.len() <= 500);
    let psi = vacuum(&basis);
    for &t in &[0.5, 10.0, 137.0, 1000.0] {
        let a = exact.evolve(&psi, t).unwrap();
        let b = krylov.evolve(&psi, t).unwrap();
        assert!(max_diff(&a, &b) < 1e-7, "t={t}");
        assert!((a.norm() - 1.0).abs() < 1e-10);
        assert!((b.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn pxp_and_rydberg_agree_at_strong_blockade() {
    // chains up to eight atoms are checked by the acceptance run
    let g = build_chain(6).unwrap();
    let basis = enumerate_solutions(&g).unwrap();
    let pxp = EvolutionEngine::new(Arc::new(build_pxp(&g, &basis, 1.0).unwrap()), Method::Exact).unwrap();
    let ryd = EvolutionEngine::new(Arc::new(build_rydberg(&g, 1.0, 50.0).unwrap()), Method::Exact).unwrap();
    let p0 = vacuum(&basis);
    let r0 = StateVector::basis_state(1 << g.n(), 0, BasisKind::Full);
    let cfg = SamplerConfig {
        n_samp: 100,
        t_min: 10.0,
        t_max: 1000.0,
        ..SamplerConfig::default()
    };
    let times = draw_times(&cfg, None, &mut stream(7, Purpose::Times, 0)).unwrap();
    let mut dp = vec![0.0; basis.len()];
    let mut dr = vec![0.0; basis.len()];
    let mut leak = 0.0;
    for &t in &times {
        let a = pxp.evolve(&p0, t).unwrap().probabilities();
        let b = ryd.evolve(&r0, t).unwrap().probabilities();
        for (i, &s) in basis.states().iter().enumerate() {
            dp[i] += a[i] / times.len() as f64;
            dr[i] += b[s as usize] / times.len() as f64;
        }
        leak += (1.0 - basis.states().iter().map(|&s| b[s as usize]).sum::<f64>()) / times.len() as f64;
    }
    assert!(leak < 0.02, "leakage {leak}");
    let z: f64 = dr.iter().sum();
    dr.iter_mut().for_each(|p| *p /= z);
    assert!(total_variation(&dp, &dr) < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_is_conserved(g in arb_graph(9), t in 0.0f64..1000.0) {
        let (basis, engine) = pxp(&g, Method::Exact);
        let psi = engine.evolve(&vacuum(&basis), t).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        let (_, kry) = pxp(&g, Method::Krylov);
        let psi = kry.evolve(&vacuum(&basis), t).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolution_composes(g in arb_graph(9), t1 in 0.0f64..500.0, t2 in 0.0f64..500.0) {
        let psi = |m| {
            let (basis, engine) = pxp(&g, m);
            let once = engine.evolve(&vacuum(&basis), t1 + t2).unwrap();
            let twice = engine.evolve(&engine.evolve(&vacuum(&basis), t1).unwrap(), t2).unwrap();
            max_diff(&once, &twice)
        };
        prop_assert!(psi(Method::Exact) < 1e-8);
        prop_assert!(psi(Method::Krylov) < 1e-6);
    }

    #[test]
    fn exact_matches_krylov(g in arb_graph(10), t in 0.0f64..1000.0) {
        let (basis, exact) = pxp(&g, Method::Exact);
        let (_, kry) = pxp(&g, Method::Krylov);
        let a = exact.evolve(&vacuum(&basis), t).unwrap();
        let b = kry.evolve(&vacuum(&basis), t).unwrap();
        prop_assert!(max_diff(&a, &b) < 1e-7);
    }

    #[test]
    fn energy_is_conserved(g in arb_graph(9), t in 0.0f64..1000.0, start in any::<prop::sample::Index>()) {
        let (basis, engine) = pxp(&g, Method::Exact);
        let psi0 = StateVector::basis_state(basis.len(), start.index(basis.len()), BasisKind::Constrained);
        let mut mixed = engine.evolve(&psi0, 0.37).unwrap();
        let e0 = engine.hamiltonian().expectation(&mixed.amps);
        mixed = engine.evolve(&mixed, t).unwrap();
        prop_assert!((engine.hamiltonian().expectation(&mixed.amps) - e0).abs() < 1e-8);
    }

    #[test]
    fn pxp_is_restricted_rydberg(g in arb_graph(9), omega in 0.1f64..3.0) {
        let basis = enumerate_solutions(&g).unwrap();
        let hp = build_pxp(&g, &basis, omega).unwrap();
        let hr = build_rydberg(&g, omega, 50.0).unwrap();
        prop_assert!(hp.is_symmetric() && hr.is_symmetric());
        let s = basis.states();
        for i in 0..s.len() {
            for j in 0..s.len() {
                let want = if i == j { 0.0 } else { hr.get(s[i] as usize, s[j] as usize) };
                prop_assert_eq!(hp.get(i, j), want);
            }
        }
    }

    #[test]
    fn pxp_entry_count_matches_flips(g in arb_graph(10)) {
        let basis = enumerate_solutions(&g).unwrap();
        let h = build_pxp(&g, &basis, 1.0).unwrap();
        let flips: usize = basis
            .states()
            .iter()
            .map(|&x| (0..g.n()).filter(|&i| basis.index_of(x ^ (1 << i)).is_some()).count())
            .sum();
        prop_assert_eq!(h.nnz(), flips);
    }

    #[test]
    fn enumeration_is_complete(g in arb_graph(10)) {
        let basis = enumerate_solutions(&g).unwrap();
        let all: Vec<u64> = (0..1u64 << g.n()).filter(|&x| g.is_independent(x)).collect();
        prop_assert_eq!(basis.states(), &all[..]);
    }
}
