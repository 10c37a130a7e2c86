use alphacent::consensus::Consensus;
use alphacent::control::{
    feasibility_check, qp_oracle, residual_f, solve, solve_breakpoints, ControlInstance, SolverKind,
};
use alphacent::estimation::{
    error_bound, oracle_alpha_centrality, run_estimation, CentralityConfig, ErrorBoundParams, StopRule,
};
use alphacent::graph::{alpha_bound, alpha_from_norms, perron_matrix, spectral_radius, Epsilon};
use alphacent::random::{random_control_instance, random_graph, seeded, GraphParams, TargetShape};
use alphacent::simnet::{distributed_alpha_agreement, simulate_consensus, simulate_estimation, Engine};
use alphacent::InfluenceGraph;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn graph(seed: u64, n: usize, loops: bool) -> InfluenceGraph {
    let params = GraphParams {
        self_loop_prob: if loops { 0.3 } else { 0.0 },
        w_min: 0.05,
        ..GraphParams::default()
    };
    random_graph(&mut seeded(seed), n, params)
}

fn config(g: &InfluenceGraph, frac: f64, zseed: u64) -> CentralityConfig {
    let mut rng = seeded(zseed);
    let z: Vec<f64> = (0..g.n())
        .map(|_| if rand::Rng::random_bool(&mut rng, 0.2) { 0.0 } else { rand::Rng::random_range(&mut rng, 0.1..2.0) })
        .collect();
    let z = if z.iter().all(|&v| v == 0.0) { vec![1.0; g.n()] } else { z };
    CentralityConfig::new(g, frac * alpha_bound(g).unwrap(), z).unwrap()
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_below_bound_is_admissible(seed in any::<u64>(), n in 2usize..12, loops in any::<bool>()) {
        let g = graph(seed, n, loops);
        let alpha = 0.999 * alpha_bound(&g).unwrap();
        let r = spectral_radius(g.weights()).unwrap();
        prop_assert!(alpha * r < 1.0, "alpha {alpha} radius {r}");
    }

    #[test]
    fn estimation_reaches_direct_solve(seed in any::<u64>(), n in 2usize..12, frac in 0.1f64..0.95, zseed in any::<u64>()) {
        let g = graph(seed, n, true);
        let cfg = config(&g, frac, zseed);
        let rho = oracle_alpha_centrality(&g, &cfg).unwrap();
        let run = run_estimation(&g, &cfg, &vec![0.0; n], StopRule::new(200_000, 1e-13)).unwrap();
        prop_assert!(run.converged);
        let scale = rho.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (c, r) in run.state.c.iter().zip(&rho) {
            prop_assert!((c - r).abs() <= 1e-8 * scale, "{c} vs {r}");
        }
    }

    #[test]
    fn estimates_grow_monotonically(seed in any::<u64>(), n in 2usize..10, frac in 0.1f64..0.95, from_seed in any::<bool>()) {
        let g = graph(seed, n, true);
        let cfg = config(&g, frac, seed ^ 1);
        let c0 = if from_seed { cfg.z().to_vec() } else { vec![0.0; n] };
        let run = run_estimation(&g, &cfg, &c0, StopRule::new(60, 0.0)).unwrap();
        for t in 1..run.trace.len() {
            let prev = run.trace.series("c", t - 1).unwrap();
            let next = run.trace.series("c", t).unwrap();
            for (a, b) in prev.iter().zip(next) {
                prop_assert!(b >= a, "round {t}: {a} -> {b}");
            }
        }
    }

    #[test]
    fn bound_dominates_and_contracts(seed in any::<u64>(), n in 2usize..10, frac in 0.1f64..0.9, from_zero in any::<bool>()) {
        let g = graph(seed, n, false);
        let cfg = config(&g, frac, seed.rotate_left(7));
        let c0 = if from_zero { vec![0.0; n] } else { cfg.z().to_vec() };
        let Some(p) = ErrorBoundParams::for_run(&g, &cfg, &c0) else {
            return Ok(());
        };
        let rho = oracle_alpha_centrality(&g, &cfg).unwrap();
        let run = run_estimation(&g, &cfg, &c0, StopRule::new(80, 0.0)).unwrap();
        let mut prev_err = None;
        for t in 0..run.trace.len() {
            let c = run.trace.series("c", t).unwrap();
            let err = l2(c, &rho);
            let slack = 1e-12 * (1.0 + p.m0);
            prop_assert!(err <= error_bound(&p, t).unwrap() + slack, "t={t}");
            let diff: Vec<f64> = c.iter().zip(&rho).map(|(a, b)| a - b).collect();
            let e = p.norm.of(&diff);
            if let Some(prev) = prev_err {
                prop_assert!(e <= p.kappa * prev + slack, "t={t}: {e} > {} * {prev}", p.kappa);
            }
            prev_err = Some(e);
        }
    }

    #[test]
    fn perron_matrix_is_doubly_stochastic(seed in any::<u64>(), n in 2usize..14, fixed in prop::option::of(0.05f64..1.0)) {
        let g = graph(seed, n, true);
        let eps = match fixed {
            Some(f) => Epsilon::Fixed(f / g.max_degree() as f64),
            None => Epsilon::Auto,
        };
        let Ok(q) = perron_matrix(&g, eps) else {
            // Only ε = 1/d_max on a bipartite graph may be refused.
            prop_assert!(fixed.is_some());
            return Ok(());
        };
        let m = q.matrix();
        for i in 0..n {
            let row: f64 = m.row(i).iter().sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
            for j in 0..n {
                prop_assert!(m[(i, j)] >= 0.0);
                prop_assert_eq!(m[(i, j)], m[(j, i)]);
                if i != j && !g.neighbors(i).contains(&j) {
                    prop_assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
        prop_assert!(q.lambda2() < 1.0);
    }

    #[test]
    fn residual_is_nonincreasing(seed in any::<u64>(), n in 2usize..9, a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let inst = random_control_instance(&mut seeded(seed), n, TargetShape::Reachable).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for i in 0..n {
            prop_assert!(residual_f(&inst, i, lo) >= residual_f(&inst, i, hi));
        }
    }

    #[test]
    fn solvers_agree_and_respect_the_box(seed in any::<u64>(), n in 2usize..9, unit in any::<bool>()) {
        let shape = if unit { TargetShape::Unit } else { TargetShape::Reachable };
        let inst = random_control_instance(&mut seeded(seed), n, shape).unwrap();
        prop_assert!(feasibility_check(&inst).is_feasible());
        let bp = solve(&inst, SolverKind::Breakpoints, false).unwrap();
        let en = solve(&inst, SolverKind::Enumeration, false).unwrap();
        let qp = qp_oracle(&inst).unwrap();
        let scale = bp.objective.max(1e-6);
        prop_assert!((bp.objective - en.objective).abs() <= 1e-8 * scale);
        prop_assert!((bp.objective - qp.objective).abs() <= 1e-6 * scale);
        let adjusted = bp.adjusted_weights(&inst);
        for i in 0..n {
            for j in 0..n {
                if inst.graph().supports(i, j) {
                    prop_assert!(inst.w_lower()[(i, j)] <= adjusted[(i, j)]);
                    prop_assert!(adjusted[(i, j)] <= inst.w_upper()[(i, j)]);
                } else {
                    prop_assert_eq!(bp.x_star[(i, j)], 0.0);
                }
            }
        }
        prop_assert!(bp.residual <= 1e-9 * inst.rho_star().iter().fold(1.0f64, |m, v| m.max(*v)));
    }

    #[test]
    fn local_solution_ignores_remote_data(seed in any::<u64>(), n in 3usize..9, pick in any::<prop::sample::Index>()) {
        let inst = random_control_instance(&mut seeded(seed), n, TargetShape::Reachable).unwrap();
        let i = pick.index(n);
        let g = inst.graph();
        let mut closed = g.neighbors(i).to_vec();
        closed.push(i);
        let mut w = g.weights().clone();
        let (lo, hi) = (inst.w_lower().clone(), inst.w_upper().clone());
        for a in 0..n {
            for b in 0..n {
                if b != i && g.supports(a, b) {
                    w[(a, b)] = lo[(a, b)];
                }
            }
        }
        let mut rho = inst.rho_star().to_vec();
        let mut z = inst.z().to_vec();
        for k in 0..n {
            if k != i {
                z[k] = 0.0;
            }
            if !closed.contains(&k) {
                rho[k] *= 2.0;
            }
        }
        let other = ControlInstance::new(g.with_weights(w).unwrap(), lo, hi, rho, z, inst.alpha()).unwrap();
        let a = solve_breakpoints(&inst.local(i)).unwrap();
        let b = solve_breakpoints(&other.local(i)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn simulated_estimation_matches_bitwise(seed in any::<u64>(), n in 2usize..12, frac in 0.1f64..0.95, parallel in any::<bool>()) {
        let g = graph(seed, n, true);
        let cfg = config(&g, frac, seed ^ 0xabc);
        let stop = StopRule::new(300, 1e-12);
        let central = run_estimation(&g, &cfg, &vec![0.0; n], stop).unwrap();
        let engine = Engine::new(&g).with_parallel(parallel);
        let sim = simulate_estimation(&engine, &cfg, &vec![0.0; n], stop).unwrap();
        prop_assert_eq!(central.trace.rounds(), sim.trace.rounds());
        prop_assert_eq!(central.converged, sim.converged);
    }

    #[test]
    fn simulated_consensus_matches_bitwise(seed in any::<u64>(), n in 2usize..10, correction in any::<bool>()) {
        let g = graph(seed, n, true);
        let cfg = config(&g, 0.8, seed ^ 0x55);
        let q = perron_matrix(&g, Epsilon::Auto).unwrap();
        let mut rng = seeded(seed ^ 0x77);
        let x0: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -10.0..10.0)).collect();
        let stop = StopRule::new(400, 1e-12);
        let mut c = Consensus::new(&g, &cfg, &q).unwrap();
        if !correction {
            c = c.without_correction();
        }
        let central = c.run(&x0, stop).unwrap();
        let serial = simulate_consensus(&Engine::new(&g), &cfg, q.epsilon(), &x0, correction, stop).unwrap();
        let par = simulate_consensus(&Engine::new(&g).with_parallel(true), &cfg, q.epsilon(), &x0, correction, stop).unwrap();
        prop_assert_eq!(central.trace.rounds(), serial.trace.rounds());
        prop_assert_eq!(serial.trace.rounds(), par.trace.rounds());
    }

    #[test]
    fn agents_agree_on_attenuation(seed in any::<u64>(), n in 1usize..14, margin in 0.05f64..1.0) {
        let g = if n == 1 {
            InfluenceGraph::new(1, &[], &[0], DMatrix::from_element(1, 1, 0.7)).unwrap()
        } else {
            graph(seed, n, true)
        };
        let agreement = distributed_alpha_agreement(&Engine::new(&g), margin).unwrap();
        let expected = alpha_from_norms(margin, g.norm_one(), g.norm_inf());
        for a in agreement.alphas {
            prop_assert_eq!(a.to_bits(), expected.to_bits());
        }
        prop_assert!(agreement.rounds <= g.diameter());
    }
}

#[test]
fn saturated_entry_rounding_stays_in_box() {
    let inst = random_control_instance(&mut seeded(9329675312174937317), 6, TargetShape::Reachable).unwrap();
    let sol = solve(&inst, SolverKind::Breakpoints, false).unwrap();
    let adjusted = sol.adjusted_weights(&inst);
    assert_eq!(adjusted[(0, 3)], inst.w_upper()[(0, 3)]);
}

#[test]
fn bipartite_supports_admit_alpha_check() {
    let g = graph(10197644940856604608, 7, false);
    let alpha = 0.1 * alpha_bound(&g).unwrap();
    assert!(CentralityConfig::with_unit_seed(&g, alpha).is_ok());
}
