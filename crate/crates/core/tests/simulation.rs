use invnet_core::simulator::simulate_observed;
use invnet_core::*;

fn unit_config() -> NetworkConfig {
    NetworkConfig::with_constant_service(vec![1.0, 1.0], vec![2.0, 2.0], vec![1, 1], 1.0).unwrap()
}

fn theta_tv(result: &SimulationResult, exact: &ThetaMeasure) -> f64 {
    result.theta_hat().total_variation(exact).unwrap()
}

#[test]
fn empirical_theta_and_queue_match_product_form() {
    let cfg = unit_config();
    let exact = solve_config_exact(&cfg).unwrap();
    let result = simulate(&cfg, &SimulationOptions::new(1_000_000, 2024)).unwrap();
    assert!(theta_tv(&result, &exact) <= 0.02);
    let q = result.queue_marginal(0);
    for (n, p) in q.iter().enumerate().take(6) {
        assert!(
            (p - 0.5f64.powi(n as i32 + 1)).abs() <= 0.02,
            "n = {n}: {p}"
        );
    }
    assert!(decoupling_test(&result) < 0.03);
}

#[test]
fn stockless_service_counter_model_is_coupled() {
    let cfg = unit_config();
    let opts = SimulationOptions::new(1_000_000, 5).with_dynamics(Dynamics::StocklessService);
    let coupled = simulate(&cfg, &opts).unwrap();
    let tv = decoupling_test(&coupled);
    let baseline = decoupling_test(&simulate(&cfg, &SimulationOptions::new(1_000_000, 5)).unwrap());
    assert!(tv > 0.05, "counter-model decoupling TV {tv}");
    assert!(tv > 4.0 * baseline, "{tv} vs {baseline}");
}

#[test]
fn more_events_bring_theta_closer() {
    let cfg = unit_config();
    let exact = solve_config_exact(&cfg).unwrap();
    let mut wins = 0;
    for seed in 0..10u64 {
        let short = simulate(&cfg, &SimulationOptions::new(100_000, seed)).unwrap();
        let long = simulate(&cfg, &SimulationOptions::new(1_000_000, 1000 + seed)).unwrap();
        if theta_tv(&long, &exact) < theta_tv(&short, &exact) {
            wins += 1;
        }
    }
    assert!(wins >= 6, "long runs closer in only {wins}/10 seeds");
}

#[test]
fn inventory_is_conserved_along_the_path() {
    let cfg = NetworkConfig::with_constant_service(
        vec![0.8, 1.1, 0.6],
        vec![1.5, 1.5, 1.5],
        vec![3, 2, 1],
        1.7,
    )
    .unwrap();
    let mut visited = 0u64;
    simulate_observed(&cfg, &SimulationOptions::new(50_000, 9), |queues, k| {
        visited += 1;
        assert_eq!(queues.len(), 3);
        assert_eq!(k.iter().sum::<usize>(), 6);
        assert!(k[0] <= 3 && k[1] <= 2 && k[2] <= 1);
    })
    .unwrap();
    assert_eq!(visited, 50_000);
}

#[test]
fn clipping_does_not_touch_inventory_estimates() {
    let cfg = unit_config();
    let narrow = simulate(&cfg, &SimulationOptions::new(200_000, 4).with_n_obs(1)).unwrap();
    let wide = simulate(&cfg, &SimulationOptions::new(200_000, 4).with_n_obs(12)).unwrap();
    let tv = narrow
        .theta_hat()
        .total_variation(&wide.theta_hat())
        .unwrap();
    assert!(tv < 1e-12, "{tv}");
    assert_eq!(narrow.simulated_time(), wide.simulated_time());
}

#[test]
fn transfer_model_simulates_to_exact_theta() {
    let cfg = NetworkConfig::with_constant_service(vec![1.0, 1.0], vec![2.0, 2.0], vec![3, 3], 1.2)
        .unwrap()
        .with_transfer(0.8)
        .unwrap();
    let exact = solve_config_exact(&cfg).unwrap();
    let result = simulate(&cfg, &SimulationOptions::new(1_000_000, 77).with_n_obs(4)).unwrap();
    assert!(theta_tv(&result, &exact) < 0.03);
}
