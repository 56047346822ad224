//! Invariants checked over randomly drawn models.

use bdenet::components::{decompose_components, in_component, out_component};
use bdenet::delays::{assign_delays, min_delay, DelayMode};
use bdenet::engine::{
    brute_force_reference, run, CycleOutcome, ForcingSchedule, ModelSpec, ModelTemplate, TopologySpec, Variant,
};
use bdenet::observables::{ensemble_average, EnsembleOptions};
use bdenet::rng::{stream, Purpose};
use bdenet::theory::{mean_component_size, propagation_probabilities, solve_v};
use bdenet::time::{HistoryBank, TimeGrid};
use bdenet::topology::{make_braid_chain, sample_directed_rg, sample_undirected_rg, Network};
use proptest::prelude::*;
use rand::Rng;

const MODES: [DelayMode; 4] = [
    DelayMode::Constant,
    DelayMode::PerEdge,
    DelayMode::PerCustomer,
    DelayMode::PerSupplier,
];

fn random_network<R: Rng>(rng: &mut R, shape: usize, nodes: usize) -> Network {
    match shape % 3 {
        0 => make_braid_chain(nodes, rng.random_range(1..nodes.min(5))).unwrap(),
        1 => sample_directed_rg(nodes, rng.random_range(0.05..0.5), rng).unwrap(),
        _ => sample_undirected_rg(nodes, rng.random_range(0.05..0.5), rng).unwrap(),
    }
}

/// A small model of any variant, delay mode and topology.
fn small_spec(seed: u64, combo: usize) -> ModelSpec {
    let mut rng = stream(seed, Purpose::Other);
    let nodes = rng.random_range(2..=12usize);
    let net = random_network(&mut rng, combo / 8, nodes);
    let tau_min = [0.5, 1.0][rng.random_range(0..2usize)];
    let tau_max = tau_min * rng.random_range(1..=5u32) as f64;
    let resolution = if tau_min == 0.5 {
        [2, 4][rng.random_range(0..2usize)]
    } else {
        rng.random_range(1..=3u32)
    };
    let delays = assign_delays(&net, MODES[(combo / 2) % 4], tau_min, tau_max, &mut rng).unwrap();
    let tau_c = rng.random_range(0..=4 * resolution) as f64 / resolution as f64;
    ModelSpec {
        variant: [Variant::Free, Variant::Forced][combo % 2],
        forcing: ForcingSchedule::new(rng.random_range(0..nodes), tau_c),
        net,
        delays,
        grid: TimeGrid::new(resolution).unwrap(),
        horizon: rng.random_range(40..=200),
    }
}

fn template(variant: Variant, nodes: usize, topology: TopologySpec, mode: DelayMode, horizon: u64) -> ModelTemplate {
    ModelTemplate {
        variant,
        nodes,
        topology,
        delay_mode: mode,
        tau_min: 1.0,
        tau_max: 10.0,
        forcing: ForcingSchedule::new(0, 1.0),
        grid: TimeGrid::new(1).unwrap(),
        horizon,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn engine_matches_the_reference(seed in any::<u64>(), combo in 0usize..24) {
        let spec = small_spec(seed, combo);
        let fast = run(&spec).unwrap();
        let slow = brute_force_reference(&spec).unwrap();
        prop_assert_eq!(fast.theta(), slow.theta());
    }

    #[test]
    fn density_complements_damage(seed in any::<u64>(), combo in 0usize..24) {
        let spec = small_spec(seed, combo);
        let r = run(&spec).unwrap();
        let n = spec.net.len() as f64;
        for (k, &theta) in r.theta().iter().enumerate() {
            prop_assert!(theta as usize <= spec.net.len());
            prop_assert_eq!(r.rho_at(k), 1.0 - theta as f64 / n);
        }
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), combo in 0usize..24) {
        let (spec, again) = (small_spec(seed, combo), small_spec(seed, combo));
        prop_assert_eq!(&spec.net, &again.net);
        prop_assert_eq!(&spec.delays, &again.delays);
        prop_assert_eq!((spec.forcing, spec.horizon), (again.forcing, again.horizon));
        prop_assert_eq!(run(&spec).unwrap(), run(&spec).unwrap());
    }

    #[test]
    fn delays_survive_a_run(seed in any::<u64>(), combo in 0usize..24) {
        let spec = small_spec(seed, combo);
        let before = spec.delays.checksum();
        let model = spec.compile().unwrap();
        prop_assert_eq!(model.delay_checksum(), before);
        run(&spec).unwrap();
        prop_assert_eq!(spec.delays.checksum(), before);
    }

    #[test]
    fn node_indexed_delays_are_shared(seed in any::<u64>(), shape in 0usize..3) {
        let mut rng = stream(seed, Purpose::Other);
        let nodes = rng.random_range(2..=30usize);
        let net = random_network(&mut rng, shape, nodes);
        let per_customer = assign_delays(&net, DelayMode::PerCustomer, 1.0, 10.0, &mut rng).unwrap();
        let per_supplier = assign_delays(&net, DelayMode::PerSupplier, 1.0, 10.0, &mut rng).unwrap();
        for (i, j, e) in net.edges() {
            for (f, g, h) in net.edges() {
                if i == f {
                    prop_assert_eq!(per_customer.multiples()[e], per_customer.multiples()[h]);
                }
                if j == g {
                    prop_assert_eq!(per_supplier.multiples()[e], per_supplier.multiples()[h]);
                }
            }
        }
    }

    #[test]
    fn short_forcing_leaves_the_single_chain_free(
        seed in any::<u64>(),
        nodes in 2usize..30,
        mode in 0usize..4,
        levels in 1u32..=10,
        resolution in 1u32..=3,
    ) {
        let mut rng = stream(seed, Purpose::Other);
        let net = make_braid_chain(nodes, 1).unwrap();
        let delays = assign_delays(&net, MODES[mode], 1.0, levels as f64, &mut rng).unwrap();
        let steps = (min_delay(&delays).unwrap() * resolution as f64) as u32;
        let tau_c = rng.random_range(0..=steps) as f64 / resolution as f64;
        let mut spec = ModelSpec {
            variant: Variant::Free,
            forcing: ForcingSchedule::new(rng.random_range(0..nodes), tau_c),
            net,
            delays,
            grid: TimeGrid::new(resolution).unwrap(),
            horizon: 400,
        };
        let free = run(&spec).unwrap();
        spec.variant = Variant::Forced;
        let forced = run(&spec).unwrap();
        prop_assert_eq!(forced.theta(), free.theta());
    }

    #[test]
    fn full_damage_is_absorbing_after_forcing(seed in any::<u64>(), combo in 0usize..24) {
        let mut spec = small_spec(seed, combo);
        spec.variant = Variant::Free;
        let model = spec.compile().unwrap();
        let (window, from) = (model.window(), model.forcing_ticks().max(0) as usize);
        let r = run(&spec).unwrap();
        let n = spec.net.len() as u32;
        let theta = r.theta();
        // A forced node without suppliers recovers when forcing ends.
        let mut windows = from.min(theta.len())..theta.len().saturating_sub(window);
        if let Some(start) = windows.find(|&k| theta[k..k + window].iter().all(|&t| t == n)) {
            prop_assert!(theta[start..].iter().all(|&t| t == n));
        }
    }

    #[test]
    fn detected_cycles_repeat(seed in any::<u64>(), combo in 0usize..24) {
        let mut spec = small_spec(seed, combo);
        let outcome = spec.compile().unwrap().detect_cycle(200_000);
        let info = match outcome {
            CycleOutcome::Found(info) => info,
            CycleOutcome::Exhausted { horizon } => {
                prop_assert_eq!(horizon, 200_000);
                return Ok(());
            }
        };
        let start = info.transient_ticks as usize;
        let period = info.period_ticks as usize;
        prop_assume!(start + 3 * period <= 50_000);
        spec.horizon = spec.horizon.max((start + 3 * period) as u64);
        let r = run(&spec).unwrap();
        for k in start..start + 2 * period {
            prop_assert_eq!(r.theta()[k], r.theta()[k + period]);
        }
        let mean = r.theta()[start..start + period].iter().map(|&t| t as f64).sum::<f64>() / period as f64;
        prop_assert!((info.rho_inf - (1.0 - mean / spec.net.len() as f64)).abs() < 1e-12);
    }

    #[test]
    fn free_single_chain_has_no_transient(seed in any::<u64>(), nodes in 2usize..40) {
        let tpl = template(Variant::Free, nodes, TopologySpec::Braid { in_degree: 1 }, DelayMode::PerEdge, 100);
        let spec = tpl.instantiate(seed).unwrap();
        let info = *spec.compile().unwrap().detect_cycle(1_000_000).found().unwrap();
        prop_assert_eq!(info.transient_ticks, 0);
        let total: f64 = (0..spec.net.edge_count()).map(|e| spec.delays.days(e)).sum();
        prop_assert_eq!(info.period_days(), total);
    }

    #[test]
    fn strong_component_is_in_cap_out(seed in any::<u64>(), shape in 0usize..3) {
        let mut rng = stream(seed, Purpose::Links);
        let nodes = rng.random_range(2..=40usize);
        let net = random_network(&mut rng, shape, nodes);
        let d = decompose_components(&net);
        for i in 0..net.len() {
            let down = out_component(&net, i);
            let up = in_component(&net, i);
            let both = (0..net.len()).filter(|&k| down[k] && up[k]).count();
            prop_assert_eq!(both, d.scc_sizes[d.scc_of[i]]);
            prop_assert_eq!(down.iter().filter(|&&b| b).count(), d.out_size[i]);
            prop_assert_eq!(up.iter().filter(|&&b| b).count(), d.in_size[i]);
        }
    }

    #[test]
    fn same_seed_same_graph(seed in any::<u64>(), z in 0.2f64..4.0) {
        let tpl = template(Variant::Free, 200, TopologySpec::DirectedRandom { p: z / 199.0 }, DelayMode::PerEdge, 20);
        let a = tpl.instantiate(seed).unwrap();
        let b = tpl.instantiate(seed).unwrap();
        prop_assert_eq!(a.net, b.net);
        prop_assert_eq!(a.delays, b.delays);
    }

    #[test]
    fn propagation_probabilities_are_normalized(tau_max in 1u32..=20, multiple in 1u64..=40) {
        let (probs, c) = propagation_probabilities(multiple * tau_max as u64, tau_max).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(c >= 1.0 - 1e-12);
    }

    #[test]
    fn component_size_exceeds_any_bound_near_one(m in 1.5f64..1e4, frac in 0.0f64..1.0) {
        let lower = 1.0 - 1.0 / m;
        let z = lower + (1.0 - lower) * frac;
        prop_assume!(z > lower && z < 1.0);
        prop_assert!(mean_component_size(z).unwrap() > m);
    }

    #[test]
    fn window_encoding_is_deterministic(bits in proptest::collection::vec(any::<bool>(), 1..400), nodes in 1usize..8) {
        let fill = || {
            let mut bank = HistoryBank::new(nodes, 64, true, false);
            for chunk in bits.chunks(nodes) {
                let mut row = vec![true; nodes];
                row[..chunk.len()].copy_from_slice(chunk);
                bank.push_all(&row);
            }
            bank
        };
        let (a, b) = (fill(), fill());
        for width in [1, 7, 64, 65] {
            let ka = a.encode_window(width).unwrap();
            prop_assert_eq!(&ka, &b.encode_window(width).unwrap());
            prop_assert_eq!(ka.hash_value(), b.encode_window(width).unwrap().hash_value());
            prop_assert!(b.matches_key(&ka));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ensembles_ignore_worker_count(seed in any::<u64>(), workers in 2usize..5) {
        let tpl = template(Variant::Forced, 60, TopologySpec::DirectedRandom { p: 2.0 / 59.0 }, DelayMode::PerEdge, 150);
        let options = |w| EnsembleOptions { workers: Some(w), detection_horizon: Some(100_000) };
        let one = ensemble_average(&tpl, 12, seed, options(1)).unwrap();
        let many = ensemble_average(&tpl, 12, seed, options(workers)).unwrap();
        prop_assert_eq!(&one, &many);
        for k in 0..one.len() {
            prop_assert!((0.0..=1.0).contains(&one.mean_rho[k]));
            prop_assert!(one.se_rho[k] >= 0.0 && one.se_theta[k] >= 0.0);
        }
    }
}

fn variance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

#[test]
fn asymptotic_density_narrows_with_size() {
    let spread = |nodes| {
        let tpl = template(
            Variant::Forced,
            nodes,
            TopologySpec::Braid { in_degree: 2 },
            DelayMode::PerEdge,
            10,
        );
        let stats = ensemble_average(
            &tpl,
            300,
            11,
            EnsembleOptions {
                workers: None,
                detection_horizon: Some(10_000_000),
            },
        )
        .unwrap();
        assert_eq!(stats.exhausted_count(), 0);
        variance(&stats.rho_infs())
    };
    let (small, large) = (spread(6), spread(9));
    assert!(large < small, "var ρ∞: N=6 {small}, N=9 {large}");
}

#[test]
fn giant_out_component_matches_the_fixed_point() {
    let nodes = 20_000;
    for z in [1.5, 2.0, 3.0] {
        let net = sample_directed_rg(nodes, z / (nodes - 1) as f64, &mut stream(5, Purpose::Links)).unwrap();
        let d = decompose_components(&net);
        let g = solve_v(z).unwrap();
        let out = d.giant.out_component as f64 / nodes as f64;
        let inn = d.giant.in_component as f64 / nodes as f64;
        assert!(
            (out - (1.0 - g.v)).abs() < 0.02,
            "z={z}: S_O/N = {out}, 1 - v = {}",
            1.0 - g.v
        );
        assert!(
            (inn - g.s_in).abs() < 0.02,
            "z={z}: S_I/N = {inn}, predicted {}",
            g.s_in
        );
    }
}

#[test]
fn subcritical_mean_size_follows_the_pole() {
    let nodes = 10_000;
    for z in [0.3, 0.6] {
        let sizes: Vec<f64> = (0..20u64)
            .map(|k| {
                let net = sample_directed_rg(nodes, z / (nodes - 1) as f64, &mut stream(k, Purpose::Links)).unwrap();
                decompose_components(&net).mean_out_size()
            })
            .collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let expected = 1.0 / (1.0 - z);
        assert!((mean - expected).abs() < 0.03 * expected, "z={z}: {mean} vs {expected}");
    }
}
