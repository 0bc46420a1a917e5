use graphtv::graphs::{
    build_complete, build_cycle_power, build_erdos_renyi, build_grid, build_path, build_star, incidence, Family, Graph,
    IncidenceMatrix,
};
use graphtv::tvsolver::{
    denoise, denoise_path_exact, kkt_certificate, objective, Algorithm, DenoiseProblem, SolverOptions,
};
use graphtv::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn primal_dual() -> SolverOptions {
    SolverOptions { algorithm: Algorithm::PrimalDual, ..Default::default() }
}

fn blocky(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.1) {
                level = rng.gen_range(-3.0..3.0);
            }
            let e: f64 = rng.sample(StandardNormal);
            level + 0.5 * e
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_invariants(p: &DenoiseProblem<'_>, r: &graphtv::tvsolver::DenoiseResult, tol: f64) {
    let y_scale = 1.0 + p.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(r.dual_feasibility <= 1.0 + tol, "dual feasibility {}", r.dual_feasibility);
    assert!(r.stationarity_residual <= tol * y_scale, "residual {}", r.stationarity_residual);
    let dtheta = p.d.mul(&r.theta_hat);
    for (e, (&dt, &z)) in dtheta.iter().zip(&r.dual_z).enumerate() {
        if dt.abs() > 1e-8 * y_scale {
            assert_eq!(z, dt.signum(), "edge {e}");
        }
    }
    // recompute the stationarity residual from scratch
    let n = p.y.len() as f64;
    let dtz = p.d.mul_t(&r.dual_z);
    let res = (0..p.y.len())
        .map(|i| (2.0 / n * (r.theta_hat[i] - p.y[i]) + p.lambda * dtz[i]).abs())
        .fold(0.0, f64::max);
    assert!((res - r.stationarity_residual).abs() <= 1e-12 * (1.0 + res));
}

#[test]
fn agrees_with_exact_path_solver() {
    for &n in &[10usize, 50, 200] {
        let g = build_path(n).unwrap();
        let d = incidence(&g);
        for seed in 0..20u64 {
            let y = blocky(n, seed * 31 + n as u64);
            for lambda in [1e-4, 1e-3, 1e-2, 1e-1] {
                let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
                let r = denoise(&p, &primal_dual()).unwrap();
                assert!(r.converged, "n={n} seed={seed} lambda={lambda}: {:?}", r.warnings);
                let exact = denoise_path_exact(&y, lambda);
                let want = objective(&d, &y, &exact, lambda);
                assert!(
                    (r.objective - want).abs() <= 1e-6 * (1.0 + want),
                    "n={n} seed={seed} lambda={lambda}: {} vs {}",
                    r.objective,
                    want
                );
                check_invariants(&p, &r, 1e-6);
            }
        }
    }
}

#[test]
fn exact_path_solver_is_certified() {
    let g = build_path(300).unwrap();
    let d = incidence(&g);
    for seed in 0..5 {
        let y = blocky(300, seed);
        for lambda in [1e-3, 1e-2, 1e-1] {
            let theta = denoise_path_exact(&y, lambda);
            let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
            let (z, res) = kkt_certificate(&p, &theta);
            assert!(res <= 1e-12, "{res}");
            assert!(z.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }
}

#[test]
fn two_node_example_matches_grid_search() {
    let y = [0.0, 4.0];
    let lambda = 1.0;
    let obj = |a: f64, b: f64| ((a - y[0]).powi(2) + (b - y[1]).powi(2)) / 2.0 + lambda * (a - b).abs();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=400 {
            let (a, b) = (i as f64 / 100.0, j as f64 / 100.0);
            let f = obj(a, b);
            if f < best.0 {
                best = (f, a, b);
            }
        }
    }
    assert!((best.1 - 1.0).abs() < 1e-9 && (best.2 - 3.0).abs() < 1e-9);

    let g = build_path(2).unwrap();
    let d = incidence(&g);
    let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
    assert_eq!(denoise_path_exact(&y, lambda), vec![1.0, 3.0]);
    let r = denoise(&p, &primal_dual()).unwrap();
    assert!((r.theta_hat[0] - 1.0).abs() < 1e-9 && (r.theta_hat[1] - 3.0).abs() < 1e-9);
    let (_, res) = kkt_certificate(&p, &[1.0, 3.0]);
    assert!(res <= 1e-9);
}

#[test]
fn certificate_rejects_non_optimal_points() {
    let g = build_path(2).unwrap();
    let d = incidence(&g);
    let y = [0.0, 4.0];
    let p = DenoiseProblem::new(&y, &d, 1.0).unwrap();
    let (_, res) = kkt_certificate(&p, &[0.1, 4.0]);
    assert!(res > 0.0);

    let p0 = DenoiseProblem::new(&y, &d, 0.0).unwrap();
    let (z, res) = kkt_certificate(&p0, &y);
    assert_eq!(res, 0.0);
    assert!(z.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_lambda_returns_observation() {
    let g = build_grid(2, 5).unwrap();
    let d = incidence(&g);
    let y = blocky(25, 4);
    let p = DenoiseProblem::new(&y, &d, 0.0).unwrap();
    let r = denoise(&p, &SolverOptions::default()).unwrap();
    assert_eq!(r.theta_hat, y);
    assert_eq!(r.stationarity_residual, 0.0);
    assert!(r.converged);
}

#[test]
fn large_lambda_gives_the_mean() {
    let graphs = [
        build_grid(2, 6).unwrap(),
        build_star(15).unwrap(),
        build_cycle_power(20, 3).unwrap(),
        build_complete(12).unwrap(),
    ];
    for g in &graphs {
        let d = incidence(g);
        let y = blocky(g.n(), 9);
        let p = DenoiseProblem::new(&y, &d, 100.0).unwrap();
        let r = denoise(&p, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        let mu = mean(&y);
        for t in &r.theta_hat {
            assert!((t - mu).abs() < 1e-9, "{}: {t} vs {mu}", g.family());
        }
    }
}

#[test]
fn nan_is_rejected() {
    let g = build_path(3).unwrap();
    let d = incidence(&g);
    let y = [1.0, f64::NAN, 0.0];
    let p = DenoiseProblem::new(&y, &d, 0.1).unwrap();
    assert!(matches!(denoise(&p, &SolverOptions::default()), Err(Error::InvalidInput(_))));
    let y = [1.0, f64::INFINITY, 0.0];
    let p = DenoiseProblem::new(&y, &d, 0.1).unwrap();
    assert!(matches!(denoise(&p, &SolverOptions::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn bad_problem_shapes_are_rejected() {
    let g = build_path(3).unwrap();
    let d = incidence(&g);
    assert!(DenoiseProblem::new(&[1.0, 2.0], &d, 0.1).is_err());
    assert!(DenoiseProblem::new(&[1.0, 2.0, 3.0], &d, -0.1).is_err());
}

#[test]
fn disconnected_graph_is_solved_per_component() {
    let g = Graph::new(6, [(0, 1), (1, 2), (3, 4), (4, 5)], Family::Custom).unwrap();
    let d = incidence(&g);
    let y = [0.0, 1.0, 5.0, 10.0, 10.5, 12.0];
    let p = DenoiseProblem::new(&y, &d, 10.0).unwrap();
    let r = denoise(&p, &SolverOptions::default()).unwrap();
    assert!(r.converged);
    assert!(!r.warnings.is_empty());
    for i in 0..3 {
        assert!((r.theta_hat[i] - 2.0).abs() < 1e-9);
        assert!((r.theta_hat[3 + i] - 32.5 / 3.0).abs() < 1e-9);
    }
}

#[test]
fn complete_graph_direct_solver_matches_primal_dual() {
    for seed in 0..6u64 {
        let n = 25;
        let g = build_complete(n).unwrap();
        let d = incidence(&g);
        let y = blocky(n, 100 + seed);
        for lambda in [1e-4, 1e-3, 1e-2] {
            let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
            let fast = denoise(&p, &SolverOptions::default()).unwrap();
            assert_eq!(fast.method, "complete_isotonic");
            check_invariants(&p, &fast, 1e-9);
            let slow = denoise(&p, &primal_dual()).unwrap();
            assert!(slow.converged);
            assert!((fast.objective - slow.objective).abs() <= 1e-9 * (1.0 + fast.objective));
            for (a, b) in fast.theta_hat.iter().zip(&slow.theta_hat) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn regularization_path_is_monotone() {
    let instances: Vec<(IncidenceMatrix, Vec<f64>)> = vec![
        (incidence(&build_path(80).unwrap()), blocky(80, 1)),
        (incidence(&build_grid(2, 10).unwrap()), blocky(100, 2)),
        (incidence(&build_erdos_renyi(60, 0.1, 3).unwrap()), blocky(60, 3)),
    ];
    for (d, y) in &instances {
        let mut last = f64::INFINITY;
        for k in 0..=16 {
            let lambda = 1e-4 * 10f64.powf(k as f64 / 4.0);
            let p = DenoiseProblem::new(y, d, lambda).unwrap();
            let r = denoise(&p, &primal_dual()).unwrap();
            assert!(r.converged);
            let tv = d.l1_of_diff(&r.theta_hat);
            assert!(tv <= last + 1e-7 * (1.0 + last), "lambda={lambda}: {tv} > {last}");
            last = tv;
        }
    }
}

#[test]
fn fits_are_local_minima() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = build_erdos_renyi(50, 0.15, 5).unwrap();
    let d = incidence(&g);
    let y = blocky(50, 5);
    for lambda in [1e-3, 1e-2] {
        let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
        let r = denoise(&p, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        let m = mean(&r.theta_hat);
        let spread: f64 = r.theta_hat.iter().map(|t| (t - m).powi(2)).sum::<f64>().sqrt();
        let radius = 0.1 * spread.max(1e-3);
        for _ in 0..100 {
            let mut u: Vec<f64> = (0..50).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = radius * rng.gen_range(0.0..1.0) / norm;
            u.iter_mut().for_each(|v| *v *= scale);
            let moved: Vec<f64> = r.theta_hat.iter().zip(&u).map(|(a, b)| a + b).collect();
            assert!(objective(&d, &y, &moved, lambda) >= r.objective - 1e-12);
        }
    }
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    prop_oneof![
        (3usize..40).prop_map(|n| build_path(n).unwrap()),
        (2usize..7).prop_map(|s| build_grid(2, s).unwrap()),
        (4usize..20).prop_map(|n| build_star(n).unwrap()),
        (3usize..15).prop_map(|n| build_complete(n).unwrap()),
        (8usize..30, 0u64..1000).prop_map(|(n, s)| build_erdos_renyi(n, 0.3, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution_invariants(g in graph_strategy(), seed in 0u64..10_000, log_lambda in -4.0f64..0.0) {
        let d = incidence(&g);
        let y = blocky(g.n(), seed);
        let lambda = 10f64.powf(log_lambda);
        let p = DenoiseProblem::new(&y, &d, lambda).unwrap();
        let r = denoise(&p, &primal_dual()).unwrap();
        prop_assert!(r.converged);
        check_invariants(&p, &r, 1e-6);

        // mean preservation on connected graphs
        prop_assert!((mean(&r.theta_hat) - mean(&y)).abs() <= 1e-9 * (1.0 + mean(&y).abs()));

        // shrinkage toward the mean
        let my = mean(&y);
        let dist = |v: &[f64]| v.iter().map(|t| (t - my).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dist(&r.theta_hat) <= dist(&y) + 1e-9);
    }
}
