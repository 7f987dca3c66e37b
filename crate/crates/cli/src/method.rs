use std::fmt;
use std::str::FromStr;

use invnet_core::{
    solve_config_exact, solve_theta_recursive_traced, theta_unit_base_stock, NetworkConfig,
    Provenance, RecursiveSolution, ThetaMeasure, ThetaTable,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Method {
    #[default]
    Auto,
    Exact,
    Closed,
    Recursive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Auto => "auto",
            Method::Exact => "exact",
            Method::Closed => "closed",
            Method::Recursive => "recursive",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Method::Auto),
            "exact" => Ok(Method::Exact),
            "closed" => Ok(Method::Closed),
            "recursive" => Ok(Method::Recursive),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

pub fn has_transfer(config: &NetworkConfig) -> bool {
    config.transfer_rate().is_some_and(|beta| beta > 0.0)
}

/// Two locations, both base-stock levels above one, no transfer channel.
pub fn recursive_applies(config: &NetworkConfig) -> bool {
    let b = config.base_stock();
    b.len() == 2 && b[0] > 1 && b[1] > 1 && !has_transfer(config)
}

pub fn closed_form_applies(config: &NetworkConfig) -> bool {
    config.has_unit_base_stock() && !has_transfer(config)
}

/// Resolves `auto` to a concrete solver, with a note explaining the choice.
pub fn select(method: Method, config: &NetworkConfig) -> (Provenance, Option<String>) {
    match method {
        Method::Exact => (Provenance::Exact, None),
        Method::Closed => (Provenance::ClosedForm, None),
        Method::Recursive => (Provenance::Recursive, None),
        Method::Auto if closed_form_applies(config) => (
            Provenance::ClosedForm,
            Some("auto: all base-stock levels are 1, using the closed form".into()),
        ),
        Method::Auto if recursive_applies(config) => (
            Provenance::Recursive,
            Some("auto: two locations with b > 1, using the recursive algorithm".into()),
        ),
        Method::Auto => {
            let why = if has_transfer(config) {
                "the transfer channel is active"
            } else {
                "neither the closed form nor the recursive algorithm applies"
            };
            (
                Provenance::Exact,
                Some(format!("auto: {why}, using the exact null-space solver")),
            )
        }
    }
}

pub fn solve(config: &NetworkConfig, provenance: Provenance) -> Result<ThetaMeasure, CliError> {
    match provenance {
        Provenance::Exact => Ok(solve_config_exact(config)?),
        Provenance::ClosedForm => theta_unit_base_stock(config).map_err(|e| {
            CliError::Validation(format!(
                "the closed form needs b = 1 everywhere and no transfer channel; use --method exact ({e})"
            ))
        }),
        Provenance::Recursive => Ok(solve_recursive(config)?.theta),
        Provenance::Empirical => Err(CliError::Validation(
            "empirical measures come from `simulate`".into(),
        )),
    }
}

/// Recursive solution for any two-location configuration with `b_1, b_2 > 1`.
/// When `b_1 < b_2` the locations are swapped for the algorithm and the
/// result is mapped back.
pub fn solve_recursive(config: &NetworkConfig) -> Result<RecursiveSolution, CliError> {
    let b = config.base_stock();
    if b.len() != 2 || has_transfer(config) || b.iter().any(|&x| x < 2) {
        return Err(CliError::Validation(format!(
            "the recursive algorithm covers J = 2 with b_1, b_2 > 1 and no transfer (got J = {}, b = {:?}); use --method exact",
            b.len(),
            b
        )));
    }
    if b[0] >= b[1] {
        return Ok(solve_theta_recursive_traced(config)?);
    }
    let mut sol = solve_theta_recursive_traced(&swap_two(config)?)?;
    sol.theta = swap_theta(&sol.theta)?;
    sol.table = ThetaTable::from_theta(&sol.theta)?;
    Ok(sol)
}

/// The same network with locations 1 and 2 exchanged.
pub fn swap_two(config: &NetworkConfig) -> Result<NetworkConfig, CliError> {
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
    let mut swapped = NetworkConfig::new(
        rev(config.arrival_rates()),
        config.service_profiles().iter().rev().cloned().collect(),
        config.base_stock().iter().rev().copied().collect(),
        config.supplier_rate(),
    )?;
    if let Some(beta) = config.transfer_rate() {
        swapped = swapped.with_transfer(beta)?;
    }
    Ok(swapped)
}

/// Relabels a two-location measure so that `(k1, k2)` becomes `(k2, k1)`.
pub fn swap_theta(theta: &ThetaMeasure) -> Result<ThetaMeasure, CliError> {
    let b: Vec<usize> = theta.base_stock().iter().rev().copied().collect();
    let target = invnet_core::InventorySpace::new(&b)?;
    let weights = target
        .states()
        .iter()
        .map(|s| {
            let k: Vec<usize> = s.on_hand().iter().rev().copied().collect();
            theta
                .weight(&k)
                .expect("swapped state lies in the original space")
        })
        .collect();
    Ok(ThetaMeasure::from_weights(&b, weights, theta.provenance())?)
}
