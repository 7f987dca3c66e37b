//! Explicit stationary measure of the inventory subsystem when every
//! location has base stock one.

use crate::error::{Error, Result};
use crate::exact_solver::{Provenance, ThetaMeasure};
use crate::model::{InventorySpace, InventoryState, NetworkConfig};

/// Unnormalized weight
/// `prod_{l=0}^{s-1} 1/(J-l) * prod_j lambda_j^{-k_j} * nu^{-k_{J+1}}` with `s = sum_j k_j`.
pub fn unit_base_stock_weight(config: &NetworkConfig, state: &InventoryState) -> Result<f64> {
    check_unit(config)?;
    let locations = config.locations();
    if state.locations() != locations {
        return Err(Error::Precondition("state dimension mismatch".into()));
    }
    let stocked: usize = state.on_hand().iter().sum();
    let mut w = 1.0;
    for l in 0..stocked {
        w /= (locations - l) as f64;
    }
    for (j, &k) in state.on_hand().iter().enumerate() {
        if k == 1 {
            w /= config.arrival_rate(j);
        }
    }
    w /= config.supplier_rate().powi(state.outstanding() as i32);
    Ok(w)
}

pub fn theta_unit_base_stock(config: &NetworkConfig) -> Result<ThetaMeasure> {
    check_unit(config)?;
    let space = InventorySpace::new(config.base_stock())?;
    let weights = space
        .states()
        .iter()
        .map(|s| unit_base_stock_weight(config, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ThetaMeasure::normalized_from(
        space,
        weights,
        Provenance::ClosedForm,
    ))
}

fn check_unit(config: &NetworkConfig) -> Result<()> {
    if !config.has_unit_base_stock() {
        return Err(Error::Precondition(format!(
            "closed form requires b_j = 1 for all j, got b = {:?}; use the exact solver",
            config.base_stock()
        )));
    }
    if config.transfer_rate().is_some_and(|b| b > 0.0) {
        return Err(Error::Precondition(
            "closed form does not cover the transfer channel".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_solver::solve_config_exact;

    fn cfg(lambda: Vec<f64>, nu: f64) -> NetworkConfig {
        let j = lambda.len();
        NetworkConfig::with_constant_service(lambda, vec![10.0; j], vec![1; j], nu).unwrap()
    }

    #[test]
    fn empty_inventory_weight() {
        let c = cfg(vec![1.0, 2.0, 3.0], 1.5);
        let s = InventoryState::new(&[0, 0, 0], &[1, 1, 1]).unwrap();
        let w = unit_base_stock_weight(&c, &s).unwrap();
        assert!((w - 1.5f64.powi(-3)).abs() < 1e-15);
    }

    #[test]
    fn all_stocked_weight_telescopes_to_factorial() {
        let c = cfg(vec![1.0, 2.0, 3.0, 0.5], 1.5);
        let s = InventoryState::new(&[1, 1, 1, 1], &[1, 1, 1, 1]).unwrap();
        let w = unit_base_stock_weight(&c, &s).unwrap();
        let expected = 1.0 / 24.0 / (1.0 * 2.0 * 3.0 * 0.5);
        assert!((w - expected).abs() < 1e-15);
    }

    #[test]
    fn two_location_unit_example() {
        let c = cfg(vec![1.0, 1.0], 1.0);
        let space = InventorySpace::new(&[1, 1]).unwrap();
        let raw: Vec<f64> = space
            .states()
            .iter()
            .map(|s| unit_base_stock_weight(&c, s).unwrap())
            .collect();
        // canonical order (0,0),(0,1),(1,0),(1,1)
        assert_eq!(raw, vec![1.0, 0.5, 0.5, 0.5]);
        let theta = theta_unit_base_stock(&c).unwrap();
        for (w, e) in theta.weights().iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert!((w - e).abs() < 1e-15);
        }
        assert_eq!(theta.provenance(), Provenance::ClosedForm);
    }

    #[test]
    fn three_location_matches_rational_oracle() {
        // exact rational null-space solution: weights * 229
        let c = cfg(vec![1.0, 2.0, 3.0], 1.5);
        let theta = theta_unit_base_stock(&c).unwrap();
        let expected = [96.0, 16.0, 24.0, 6.0, 48.0, 12.0, 18.0, 9.0].map(|x| x / 229.0);
        for (w, e) in theta.weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_exact_solver() {
        let c = cfg(vec![0.4, 1.9, 1.1, 2.7, 0.8], 1.3);
        let a = theta_unit_base_stock(&c).unwrap();
        let b = solve_config_exact(&c).unwrap();
        assert!(a.total_variation(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn rescaled_constant_gives_same_normalized_measure() {
        let c = cfg(vec![0.4, 1.9, 1.1], 1.3);
        let space = InventorySpace::new(&[1, 1, 1]).unwrap();
        let alt: Vec<f64> = space
            .states()
            .iter()
            .map(|s| unit_base_stock_weight(&c, s).unwrap() * 1.3f64.powi(3))
            .collect();
        let alt = ThetaMeasure::from_weights(&[1, 1, 1], alt, Provenance::ClosedForm)
            .unwrap()
            .normalized();
        let theta = theta_unit_base_stock(&c).unwrap();
        assert!(alt.total_variation(&theta).unwrap() < 1e-15);
    }

    #[test]
    fn rejects_larger_base_stock() {
        let c =
            NetworkConfig::with_constant_service(vec![1.0, 1.0], vec![2.0, 2.0], vec![2, 1], 1.0)
                .unwrap();
        assert!(matches!(
            theta_unit_base_stock(&c),
            Err(Error::Precondition(_))
        ));
    }
}
