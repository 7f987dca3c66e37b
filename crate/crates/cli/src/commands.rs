use invnet_core::analysis::{max_permutation_asymmetry, IDENTITY_TOL};
use invnet_core::exact_solver::RESIDUAL_TOL;
use invnet_core::recursive_solver::max_gbe_residual;
use invnet_core::{
    build_reduced_generator, check_cut_heterogeneous, check_cut_homogeneous, check_symmetry,
    decoupling_test, ergodicity_check, inventory_marginal, queue_marginal, simulate_replications,
    solve_pi_truncated, theta_unit_base_stock, CutFamily, NetworkConfig, Provenance,
    ServiceRateProfile, SimulationOptions, SimulationResult, ThetaMeasure,
};

use crate::method::{
    closed_form_applies, has_transfer, recursive_applies, select, solve, solve_recursive,
    swap_theta, swap_two, Method,
};
use crate::report::{Check, QueueSummary, Report, SimulationSummary};
use crate::CliError;

pub const CROSS_TOL_CLOSED: f64 = 1e-12;
pub const CROSS_TOL_RECURSIVE: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    /// Events per replication.
    pub events: u64,
    pub seed: u64,
    pub replications: usize,
    pub n_obs: usize,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        Self {
            events: 1_000_000,
            seed: 1,
            replications: 1,
            n_obs: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyArgs {
    /// `None` skips the simulation checks.
    pub simulation: Option<SimulateArgs>,
    pub theta_tol: f64,
    pub queue_tol: f64,
    pub decoupling_tol: f64,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        Self {
            simulation: Some(SimulateArgs::default()),
            theta_tol: 0.02,
            queue_tol: 0.02,
            decoupling_tol: 0.03,
        }
    }
}

/// `||theta Q_red||_inf / max |q|`.
pub fn relative_residual(config: &NetworkConfig, theta: &ThetaMeasure) -> Result<f64, CliError> {
    let g = build_reduced_generator(config)?;
    Ok(g.balance_residual(theta.weights()) / g.max_abs_rate())
}

fn describe_common(
    report: &mut Report,
    config: &NetworkConfig,
    theta: &ThetaMeasure,
) -> Result<(), CliError> {
    report.inventory_marginals = (0..config.locations())
        .map(|j| inventory_marginal(theta, j))
        .collect::<Result<_, _>>()?;
    let verdict = ergodicity_check(config);
    if verdict.ergodic {
        report.queues = (0..config.locations())
            .map(|j| queue_marginal(config, j).map(|m| QueueSummary::from(&m)))
            .collect::<Result<_, _>>()?;
    } else {
        report.notice("queue marginals omitted: the queues are not ergodic");
    }
    report.ergodicity = Some(verdict);
    Ok(())
}

pub fn run_solve(config: &NetworkConfig, method: Method) -> Result<Report, CliError> {
    let mut report = Report::new("solve");
    let (mut provenance, note) = select(method, config);
    if let Some(note) = note {
        report.notice(note);
    }
    let b = config.base_stock();
    if provenance == Provenance::Recursive
        && b.len() == 2
        && b.contains(&1)
        && !has_transfer(config)
    {
        provenance = Provenance::Exact;
        report.notice(format!(
            "the recursive algorithm needs b_1, b_2 > 1 (got {b:?}); solved with the exact solver instead"
        ));
    }
    let theta = solve(config, provenance)?;
    let tol = if provenance == Provenance::Recursive {
        CROSS_TOL_RECURSIVE
    } else {
        RESIDUAL_TOL
    };
    report.checks.push(Check::numerical(
        "balance residual |theta Q|/max|q|",
        relative_residual(config, &theta)?,
        tol,
    ));
    report.method = Some(provenance);
    describe_common(&mut report, config, &theta)?;
    report.theta = Some(theta);
    Ok(report)
}

/// Two-location configuration and measure with `b1 >= b2`.
fn oriented(
    config: &NetworkConfig,
    theta: &ThetaMeasure,
) -> Result<(NetworkConfig, ThetaMeasure), CliError> {
    if config.base_stock()[0] >= config.base_stock()[1] {
        Ok((config.clone(), theta.clone()))
    } else {
        Ok((swap_two(config)?, swap_theta(theta)?))
    }
}

/// The same `(lambda, b, nu)` with different, still valid, service profiles.
fn perturbed_service(config: &NetworkConfig) -> Result<NetworkConfig, CliError> {
    let profiles = config
        .service_profiles()
        .iter()
        .enumerate()
        .map(|(j, p)| ServiceRateProfile::new(vec![0.5 + j as f64, 3.0 * p.tail()], 2.0 * p.tail()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(config.with_service_profiles(profiles)?)
}

pub fn run_verify(config: &NetworkConfig, args: &VerifyArgs) -> Result<Report, CliError> {
    let mut report = Report::new("verify");
    report.method = Some(Provenance::Exact);
    let exact = solve(config, Provenance::Exact)?;
    report.checks.push(Check::numerical(
        "exact: balance residual",
        relative_residual(config, &exact)?,
        RESIDUAL_TOL,
    ));

    if closed_form_applies(config) {
        let closed = theta_unit_base_stock(config)?;
        report.checks.push(Check::property(
            "closed form vs exact (TV)",
            closed.total_variation(&exact)?,
            CROSS_TOL_CLOSED,
        ));
    }
    if recursive_applies(config) {
        let sol = solve_recursive(config)?;
        report.checks.push(Check::property(
            "recursive vs exact (TV)",
            sol.theta.total_variation(&exact)?,
            CROSS_TOL_RECURSIVE,
        ));
        report.checks.push(Check::numerical(
            "recursive: max GBE residual",
            max_gbe_residual(&sol.table, config)?,
            CROSS_TOL_RECURSIVE,
        ));
    }

    if config.is_homogeneous() {
        report.checks.push(Check::property(
            "symmetry",
            check_symmetry(&exact, config)?,
            SYMMETRY_TOL,
        ));
    } else if config
        .base_stock()
        .iter()
        .all(|&b| b == config.base_stock()[0])
    {
        report.notice(format!(
            "heterogeneous rates: permutation asymmetry {:.3e} (informational)",
            max_permutation_asymmetry(&exact)?
        ));
    }

    if has_transfer(config) {
        report.notice(
            "transfer channel active: cut identities, closed form and recursive algorithm skipped",
        );
    } else {
        if config.is_homogeneous() {
            let cuts = check_cut_homogeneous(&exact, config)?;
            report.checks.push(Check::property(
                "cut: homogeneous",
                cuts.max_residual(),
                IDENTITY_TOL,
            ));
        }
        if config.locations() == 2 {
            let (cfg, theta) = oriented(config, &exact)?;
            let cuts = check_cut_heterogeneous(&theta, &cfg)?;
            for family in [
                CutFamily::FirstLowRange,
                CutFamily::FirstMidRange,
                CutFamily::FirstTop,
                CutFamily::Second,
                CutFamily::Geometric,
            ] {
                if cuts.count(family) > 0 {
                    report.checks.push(Check::property(
                        format!("cut: {}", family.as_str()),
                        cuts.max_residual_of(family),
                        IDENTITY_TOL,
                    ));
                }
            }
        } else if !config.is_homogeneous() {
            report.notice(
                "cut identities are stated for homogeneous networks or two locations; skipped",
            );
        }
    }

    let other = solve(&perturbed_service(config)?, Provenance::Exact)?;
    let identical = other.weights() == exact.weights();
    report.checks.push(Check::property(
        "insensitivity to service rates (bitwise)",
        if identical {
            0.0
        } else {
            other.total_variation(&exact)?.max(f64::MIN_POSITIVE)
        },
        0.0,
    ));

    let verdict = ergodicity_check(config);
    if verdict.ergodic {
        let n_max = args.simulation.as_ref().map_or(6, |s| s.n_obs);
        report.checks.push(Check::numerical(
            "truncated pi: decoupling TV",
            truncated_decoupling(config, n_max)?,
            1e-12,
        ));
        if let Some(sim) = &args.simulation {
            let summary = run_simulation(config, &exact, sim)?;
            report.checks.push(Check::property(
                "simulation: TV(theta_hat, theta)",
                summary.theta_tv,
                args.theta_tol,
            ));
            for (j, tv) in summary.queue_tv.iter().enumerate() {
                report.checks.push(Check::property(
                    format!("simulation: TV(xi_hat_{}, xi_{})", j + 1, j + 1),
                    *tv,
                    args.queue_tol,
                ));
            }
            report.checks.push(Check::property(
                "simulation: decoupling TV",
                summary.decoupling_tv,
                args.decoupling_tol,
            ));
            report.simulation = Some(summary);
        } else {
            report.notice("simulation skipped (--no-simulation)");
        }
    } else {
        report.notice(format!(
            "not ergodic, joint-distribution and simulation checks skipped: {}",
            verdict.describe()
        ));
    }

    describe_common(&mut report, config, &exact)?;
    report.theta = Some(exact);
    Ok(report)
}

/// TV between the window-conditioned joint law and the product of its marginals.
fn truncated_decoupling(config: &NetworkConfig, n_max: usize) -> Result<f64, CliError> {
    let pi = solve_pi_truncated(config, n_max)?;
    let mass = pi.window_mass();
    let k_len = pi.theta().len();
    let queues = pi.queue_vectors();
    let mut joint = Vec::with_capacity(queues.len() * k_len);
    for n in &queues {
        for k in 0..k_len {
            joint.push(pi.prob(n, k) / mass);
        }
    }
    let queue_marg: Vec<f64> = joint.chunks(k_len).map(|r| r.iter().sum()).collect();
    let mut inv_marg = vec![0.0; k_len];
    for row in joint.chunks(k_len) {
        for (acc, x) in inv_marg.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let tv = joint
        .iter()
        .enumerate()
        .map(|(i, p)| (p - queue_marg[i / k_len] * inv_marg[i % k_len]).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

/// Analytic law of `min(X_j, n_obs)`.
fn clipped_queue_law(config: &NetworkConfig, j: usize, n_obs: usize) -> Result<Vec<f64>, CliError> {
    let m = queue_marginal(config, j)?;
    let mut law: Vec<f64> = (0..n_obs).map(|n| m.prob(n)).collect();
    law.push((1.0 - law.iter().sum::<f64>()).max(0.0));
    Ok(law)
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

fn run_simulation(
    config: &NetworkConfig,
    exact: &ThetaMeasure,
    args: &SimulateArgs,
) -> Result<SimulationSummary, CliError> {
    if args.replications == 0 {
        return Err(CliError::Validation(
            "`--replications` must be at least 1".into(),
        ));
    }
    if args.events == 0 {
        return Err(CliError::Validation("`--events` must be at least 1".into()));
    }
    let opts = SimulationOptions::new(args.events, args.seed).with_n_obs(args.n_obs);
    let runs = simulate_replications(config, &opts, args.replications)?;
    let replication_theta_tv = runs
        .iter()
        .map(|r| r.theta_hat().total_variation(exact))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = SimulationResult::merge(&runs)?;
    let queue_tv = (0..config.locations())
        .map(|j| {
            Ok(tv(
                &merged.queue_marginal(j),
                &clipped_queue_law(config, j, args.n_obs)?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SimulationSummary {
        events: merged.events(),
        simulated_time: merged.simulated_time(),
        seed: args.seed,
        replications: args.replications,
        n_obs: args.n_obs,
        theta_tv: merged.theta_hat().total_variation(exact)?,
        queue_tv,
        decoupling_tv: decoupling_test(&merged),
        replication_theta_tv,
    })
}

pub fn run_simulate(config: &NetworkConfig, args: &SimulateArgs) -> Result<Report, CliError> {
    let verdict = ergodicity_check(config);
    if !verdict.ergodic {
        return Err(CliError::Validation(format!(
            "refusing to simulate a non-ergodic network: {}",
            verdict.describe()
        )));
    }
    let mut report = Report::new("simulate");
    let exact = solve(config, Provenance::Exact)?;
    report.simulation = Some(run_simulation(config, &exact, args)?);
    report.method = Some(Provenance::Exact);
    report.notice("analytic reference: exact null-space solver");
    describe_common(&mut report, config, &exact)?;
    report.theta = Some(exact);
    Ok(report)
}
