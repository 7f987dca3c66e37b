//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use invnet_cli::theta_json;
use invnet_core::analysis::max_permutation_asymmetry;
use invnet_core::recursive_solver::max_gbe_residual;
use invnet_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SEED: u64 = 0x1D_2026;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rate(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.2..5.0)
}

fn rates(rng: &mut ChaCha8Rng, j: usize) -> Vec<f64> {
    (0..j).map(|_| rate(rng)).collect()
}

/// Random rates; service is irrelevant for theta, so it is drawn independently.
fn draw(rng: &mut ChaCha8Rng, b: Vec<usize>) -> NetworkConfig {
    let j = b.len();
    let lambda = rates(rng, j);
    let mu = rates(rng, j);
    NetworkConfig::with_constant_service(lambda, mu, b, rate(rng)).unwrap()
}

fn balance_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let start = Instant::now();
    let (mut worst, mut count) = (0.0f64, 0);
    for j in 2..=4 {
        for level in 1..=3 {
            for _ in 0..20 {
                let b = (0..j).map(|_| rng.random_range(1..=level)).collect();
                let cfg = draw(&mut rng, b);
                let g = build_reduced_generator(&cfg).unwrap();
                let theta = solve_theta_exact(&g).unwrap();
                worst = worst.max(g.balance_residual(theta.weights()) / g.max_abs_rate());
                count += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |theta Q|/max|q| = {worst:.2e} (tol 1e-12) over {count} configs in {elapsed:.2?} (limit 1s)"),
    )
}

fn closed_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst = 0.0f64;
    for j in 2..=6 {
        for _ in 0..50 {
            let cfg = draw(&mut rng, vec![1; j]);
            let tv = theta_unit_base_stock(&cfg)
                .unwrap()
                .total_variation(&solve_config_exact(&cfg).unwrap())
                .unwrap();
            worst = worst.max(tv);
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max TV(closed form, exact) = {worst:.2e} (tol 1e-12), J = 2..6 x 50 draws"),
    )
}

fn recursive_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut worst_tv, mut worst_gbe, mut count) = (0.0f64, 0.0f64, 0);
    for b1 in 2..=4 {
        for b2 in 2..=b1 {
            for _ in 0..50 {
                let cfg = draw(&mut rng, vec![b1, b2]);
                let sol = solve_theta_recursive_traced(&cfg).unwrap();
                let exact = solve_config_exact(&cfg).unwrap();
                worst_tv = worst_tv.max(sol.theta.total_variation(&exact).unwrap());
                worst_gbe = worst_gbe.max(max_gbe_residual(&sol.table, &cfg).unwrap());
                count += 1;
            }
        }
    }
    outcome(
        worst_tv <= 1e-10 && worst_gbe <= 1e-10,
        format!("max TV = {worst_tv:.2e}, max GBE residual = {worst_gbe:.2e} (tol 1e-10) over {count} configs"),
    )
}

fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut worst = 0.0f64;
    for j in 2..=3 {
        for b in 1..=3 {
            for _ in 0..20 {
                let lambda = rate(&mut rng);
                let cfg = NetworkConfig::with_constant_service(
                    vec![lambda; j],
                    rates(&mut rng, j),
                    vec![b; j],
                    rate(&mut rng),
                )
                .unwrap();
                worst = worst
                    .max(max_permutation_asymmetry(&solve_config_exact(&cfg).unwrap()).unwrap());
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max permutation asymmetry = {worst:.2e} (tol 1e-12), J in 2..3, b in 1..3"),
    )
}

fn cut_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut worst_hom = 0.0f64;
    for j in 2..=4 {
        for b in 1..=3 {
            for _ in 0..10 {
                let lambda = rate(&mut rng);
                let cfg = NetworkConfig::with_constant_service(
                    vec![lambda; j],
                    rates(&mut rng, j),
                    vec![b; j],
                    rate(&mut rng),
                )
                .unwrap();
                let theta = solve_config_exact(&cfg).unwrap();
                worst_hom =
                    worst_hom.max(check_cut_homogeneous(&theta, &cfg).unwrap().max_residual());
            }
        }
    }
    let families = [
        CutFamily::FirstLowRange,
        CutFamily::FirstMidRange,
        CutFamily::FirstTop,
        CutFamily::Second,
        CutFamily::Geometric,
    ];
    let mut worst_het = [0.0f64; 5];
    let mut seen = [0usize; 5];
    for b1 in 1..=5 {
        for b2 in 1..=b1 {
            for _ in 0..20 {
                let cfg = draw(&mut rng, vec![b1, b2]);
                let theta = solve_config_exact(&cfg).unwrap();
                let report = check_cut_heterogeneous(&theta, &cfg).unwrap();
                for (i, f) in families.iter().enumerate() {
                    worst_het[i] = worst_het[i].max(report.max_residual_of(*f));
                    seen[i] += report.count(*f);
                }
            }
        }
    }
    let het_max = worst_het.iter().copied().fold(0.0, f64::max);
    let per_family: Vec<String> = families
        .iter()
        .zip(worst_het.iter().zip(seen))
        .map(|(f, (w, n))| format!("{} {w:.1e} ({n})", f.as_str()))
        .collect();
    outcome(
        worst_hom <= 1e-10 && het_max <= 1e-10 && seen.iter().all(|&n| n > 0),
        format!(
            "homogeneous max {worst_hom:.2e}; heterogeneous {} (tol 1e-10)",
            per_family.join(", ")
        ),
    )
}

fn ergodicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let (mut accepted, mut rejected, mut errors) = (0, 0, 0);
    for _ in 0..200 {
        let j = rng.random_range(2..=4);
        let lambda = rates(&mut rng, j);
        // heads may be slower than lambda; only the tail decides
        let stable: Vec<ServiceRateProfile> = lambda
            .iter()
            .map(|&l| {
                let head = (0..rng.random_range(0..3))
                    .map(|_| rng.random_range(0.05..3.0))
                    .collect();
                ServiceRateProfile::new(head, l * rng.random_range(1.0001..3.0)).unwrap()
            })
            .collect();
        let ok = NetworkConfig::new(lambda.clone(), stable.clone(), vec![1; j], 1.0).unwrap();
        if ergodicity_check(&ok).ergodic {
            accepted += 1;
        } else {
            errors += 1;
        }
        let bad_at = rng.random_range(0..j);
        let factor = if rng.random_bool(0.3) {
            1.0
        } else {
            rng.random_range(0.2..1.0)
        };
        let mut unstable = stable;
        unstable[bad_at] = ServiceRateProfile::new(vec![10.0], lambda[bad_at] * factor).unwrap();
        let bad = NetworkConfig::new(lambda, unstable, vec![1; j], 1.0).unwrap();
        let verdict = ergodicity_check(&bad);
        if !verdict.ergodic && !verdict.locations[bad_at].stable {
            rejected += 1;
        } else {
            errors += 1;
        }
    }
    outcome(errors == 0, format!("{accepted}/200 stable accepted, {rejected}/200 unstable rejected (incl. lambda = mu_inf)"))
}

fn product_form_simulation() -> Outcome {
    let cfg = NetworkConfig::with_constant_service(vec![1.0, 1.0], vec![2.0, 2.0], vec![1, 1], 1.0)
        .unwrap();
    let exact = solve_config_exact(&cfg).unwrap();
    let start = Instant::now();
    let opts = SimulationOptions::new(1_000_000, SEED + 7).with_n_obs(6);
    let runs = simulate_replications(&cfg, &opts, 10).unwrap();
    let elapsed = start.elapsed();
    let geometric: Vec<f64> = (0..6).map(|n| 0.5f64.powi(n + 1)).collect();
    let (mut theta_ok, mut xi_worst, mut dec_worst, mut theta_worst) = (0, 0.0f64, 0.0f64, 0.0f64);
    for run in &runs {
        let tv = run.theta_hat().total_variation(&exact).unwrap();
        theta_worst = theta_worst.max(tv);
        if tv <= 0.02 {
            theta_ok += 1;
        }
        let xi = run.queue_marginal(0);
        let xi_tv = xi[..6]
            .iter()
            .zip(&geometric)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        xi_worst = xi_worst.max(xi_tv);
        dec_worst = dec_worst.max(decoupling_test(run));
    }
    outcome(
        theta_ok >= 9 && xi_worst <= 0.02 && dec_worst <= 0.03 && elapsed < Duration::from_secs(30),
        format!(
            "theta TV <= 0.02 in {theta_ok}/10 (worst {theta_worst:.4}); worst xi_1 TV on n <= 5 {xi_worst:.4} (tol 0.02); worst decoupling TV {dec_worst:.4} (tol 0.03); {elapsed:.2?} (limit 30s)"
        ),
    )
}

fn fingerprint(theta: &ThetaMeasure) -> String {
    let digest = Sha256::digest(theta_json(theta).unwrap().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn insensitivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let (mut mismatches, mut total) = (0, 0);
    for _ in 0..30 {
        let j = rng.random_range(2..=4);
        let b: Vec<usize> = (0..j).map(|_| rng.random_range(1..=3)).collect();
        let base = draw(&mut rng, b);
        let reference = fingerprint(&solve_config_exact(&base).unwrap());
        for _ in 0..5 {
            let profiles = (0..j)
                .map(|_| {
                    let head = (0..rng.random_range(0..4))
                        .map(|_| rng.random_range(0.01..20.0))
                        .collect();
                    ServiceRateProfile::new(head, rng.random_range(0.01..20.0)).unwrap()
                })
                .collect();
            let variant = base.with_service_profiles(profiles).unwrap();
            if fingerprint(&solve_config_exact(&variant).unwrap()) != reference {
                mismatches += 1;
            }
            total += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "{}/{total} service-profile variants reproduce the SHA-256 of serialized theta",
            total - mismatches
        ),
    )
}

fn transfer_extension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let (mut asym, mut conservation_errors, mut bitwise_errors) = (0.0f64, 0, 0);
    for b in 1..=3 {
        for _ in 0..10 {
            let lambda = rate(&mut rng);
            let base = NetworkConfig::with_constant_service(
                vec![lambda; 2],
                rates(&mut rng, 2),
                vec![b, b],
                rate(&mut rng),
            )
            .unwrap();
            let beta = rate(&mut rng);
            let with = base.clone().with_transfer(beta).unwrap();
            let theta = solve_config_exact(&with).unwrap();
            asym = asym.max(max_permutation_asymmetry(&theta).unwrap());
            for s in theta.states() {
                let state = FullState::new(vec![1, 0], s.on_hand(), &[b, b]).unwrap();
                for t in full_transitions(&with, &state).unwrap().transitions {
                    if t.target.inventory.as_slice().iter().sum::<usize>() != 2 * b {
                        conservation_errors += 1;
                    }
                }
            }
            let zero = base.clone().with_transfer(0.0).unwrap();
            let plain = solve_config_exact(&base).unwrap();
            let zeroed = solve_config_exact(&zero).unwrap();
            let same_generator = build_reduced_generator(&base).unwrap().matrix()
                == build_reduced_generator(&zero).unwrap().matrix();
            if plain.weights() != zeroed.weights() || !same_generator {
                bitwise_errors += 1;
            }
        }
    }
    outcome(
        asym <= 1e-12 && conservation_errors == 0 && bitwise_errors == 0,
        format!("beta > 0: max asymmetry {asym:.2e} (tol 1e-12), {conservation_errors} conservation violations; beta = 0: {bitwise_errors} bitwise differences"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("balance residual of the exact solver", balance_residual),
        (
            "closed form equals exact for b = 1",
            closed_form_equivalence,
        ),
        ("recursive algorithm equals exact", recursive_equivalence),
        ("symmetry of homogeneous networks", symmetry),
        ("cut identities", cut_identities),
        ("ergodicity criterion", ergodicity),
        ("product form by simulation", product_form_simulation),
        ("insensitivity to service rates", insensitivity),
        ("transfer extension", transfer_extension),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {} {} {name}: {}",
            i + 1,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
