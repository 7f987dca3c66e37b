//! Network parameters, the inventory state space and the strict-priority
//! replenishment policy.
//!
//! Locations are indexed from zero. An inventory state stores the on-hand
//! stock of every location followed by the number of outstanding orders at
//! the supplier, so a state for `J` locations has `J + 1` components and the
//! last one is always `sum_j (b_j - k_j)`.

use crate::error::{Error, Result};

/// Queue-length-dependent service rates: an explicit head `mu(1..=m)` and a
/// constant tail `mu_inf` used for every `n > m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRateProfile {
    head: Vec<f64>,
    tail: f64,
}

impl ServiceRateProfile {
    pub fn new(head: Vec<f64>, tail: f64) -> Result<Self> {
        if let Some(bad) = head.iter().find(|r| !is_positive_rate(**r)) {
            return Err(Error::config(
                "mu.head",
                format!("service rates must be finite and > 0, got {bad}"),
            ));
        }
        if !is_positive_rate(tail) {
            return Err(Error::config(
                "mu.tail",
                format!("service rates must be finite and > 0, got {tail}"),
            ));
        }
        Ok(Self { head, tail })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), rate)
    }

    /// Service rate with `n >= 1` customers present.
    pub fn rate(&self, n: usize) -> f64 {
        debug_assert!(n >= 1, "service rate is only defined for n >= 1");
        self.head
            .get(n.wrapping_sub(1))
            .copied()
            .unwrap_or(self.tail)
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }
}

/// All model parameters of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    lambda: Vec<f64>,
    mu: Vec<ServiceRateProfile>,
    base_stock: Vec<usize>,
    nu: f64,
    transfer_beta: Option<f64>,
}

impl NetworkConfig {
    pub fn new(
        lambda: Vec<f64>,
        mu: Vec<ServiceRateProfile>,
        base_stock: Vec<usize>,
        nu: f64,
    ) -> Result<Self> {
        let locations = lambda.len();
        if locations < 2 {
            return Err(Error::config(
                "J",
                format!("at least two locations are required, got {locations}"),
            ));
        }
        if mu.len() != locations {
            return Err(Error::config(
                "mu",
                format!("expected {locations} service profiles, got {}", mu.len()),
            ));
        }
        if base_stock.len() != locations {
            return Err(Error::config(
                "b",
                format!(
                    "expected {locations} base-stock levels, got {}",
                    base_stock.len()
                ),
            ));
        }
        if let Some(bad) = lambda.iter().find(|r| !is_positive_rate(**r)) {
            return Err(Error::config(
                "lambda",
                format!("arrival rates must be finite and > 0, got {bad}"),
            ));
        }
        validate_base_stock(&base_stock)?;
        if !is_positive_rate(nu) {
            return Err(Error::config(
                "nu",
                format!("supplier rate must be finite and > 0, got {nu}"),
            ));
        }
        Ok(Self {
            lambda,
            mu,
            base_stock,
            nu,
            transfer_beta: None,
        })
    }

    /// Convenience constructor with queue-length-independent service rates.
    pub fn with_constant_service(
        lambda: Vec<f64>,
        mu: Vec<f64>,
        base_stock: Vec<usize>,
        nu: f64,
    ) -> Result<Self> {
        let mu = mu
            .into_iter()
            .map(ServiceRateProfile::constant)
            .collect::<Result<Vec<_>>>()?;
        Self::new(lambda, mu, base_stock, nu)
    }

    /// Enables the inventory transfer channel between two homogeneous locations.
    pub fn with_transfer(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::config(
                "beta",
                format!("transfer rate must be finite and >= 0, got {beta}"),
            ));
        }
        if self.locations() != 2 || !self.is_homogeneous() {
            return Err(Error::config(
                "beta",
                "the transfer channel requires exactly two locations with equal b and lambda",
            ));
        }
        self.transfer_beta = Some(beta);
        Ok(self)
    }

    pub fn locations(&self) -> usize {
        self.lambda.len()
    }

    pub fn arrival_rates(&self) -> &[f64] {
        &self.lambda
    }

    pub fn arrival_rate(&self, j: usize) -> f64 {
        self.lambda[j]
    }

    pub fn service(&self, j: usize) -> &ServiceRateProfile {
        &self.mu[j]
    }

    pub fn service_profiles(&self) -> &[ServiceRateProfile] {
        &self.mu
    }

    pub fn base_stock(&self) -> &[usize] {
        &self.base_stock
    }

    pub fn supplier_rate(&self) -> f64 {
        self.nu
    }

    pub fn transfer_rate(&self) -> Option<f64> {
        self.transfer_beta
    }

    /// Equal base-stock levels and equal arrival rates at every location.
    /// Service rates are unrestricted.
    pub fn is_homogeneous(&self) -> bool {
        let b0 = self.base_stock[0];
        let l0 = self.lambda[0];
        self.base_stock.iter().all(|&b| b == b0) && self.lambda.iter().all(|&l| l == l0)
    }

    pub fn has_unit_base_stock(&self) -> bool {
        self.base_stock.iter().all(|&b| b == 1)
    }

    /// Returns a copy with every rate (arrival, service, supplier, transfer)
    /// multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mu = self
            .mu
            .iter()
            .map(|p| {
                ServiceRateProfile::new(
                    p.head.iter().map(|r| r * factor).collect(),
                    p.tail * factor,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let scaled = Self::new(
            self.lambda.iter().map(|r| r * factor).collect(),
            mu,
            self.base_stock.clone(),
            self.nu * factor,
        )?;
        match self.transfer_beta {
            Some(beta) => scaled.with_transfer(beta * factor),
            None => Ok(scaled),
        }
    }

    /// Copy of this configuration with the service profiles replaced.
    pub fn with_service_profiles(&self, mu: Vec<ServiceRateProfile>) -> Result<Self> {
        let cfg = Self::new(self.lambda.clone(), mu, self.base_stock.clone(), self.nu)?;
        match self.transfer_beta {
            Some(beta) => cfg.with_transfer(beta),
            None => Ok(cfg),
        }
    }
}

fn is_positive_rate(r: f64) -> bool {
    r.is_finite() && r > 0.0
}

fn validate_base_stock(b: &[usize]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::config(
            "b",
            "at least one base-stock level is required",
        ));
    }
    if let Some(pos) = b.iter().position(|&x| x < 1) {
        return Err(Error::config(
            "b",
            format!("base-stock levels must be >= 1, got b[{pos}] = {}", b[pos]),
        ));
    }
    Ok(())
}

/// Inventory vector `(k_1, ..., k_J, k_{J+1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InventoryState {
    k: Vec<usize>,
}

impl InventoryState {
    /// Builds a state from on-hand levels; the supplier component is derived.
    pub fn new(on_hand: &[usize], base_stock: &[usize]) -> Result<Self> {
        if on_hand.len() != base_stock.len() {
            return Err(Error::Precondition(format!(
                "state has {} locations, base stock has {}",
                on_hand.len(),
                base_stock.len()
            )));
        }
        if let Some(j) = on_hand.iter().zip(base_stock).position(|(k, b)| k > b) {
            return Err(Error::Precondition(format!(
                "on-hand level {} at location {j} exceeds base stock {}",
                on_hand[j], base_stock[j]
            )));
        }
        Ok(Self::from_levels_unchecked(on_hand, base_stock))
    }

    pub(crate) fn from_levels_unchecked(on_hand: &[usize], base_stock: &[usize]) -> Self {
        let outstanding = on_hand.iter().zip(base_stock).map(|(k, b)| b - k).sum();
        let mut k = Vec::with_capacity(on_hand.len() + 1);
        k.extend_from_slice(on_hand);
        k.push(outstanding);
        Self { k }
    }

    pub fn locations(&self) -> usize {
        self.k.len() - 1
    }

    /// On-hand levels `(k_1, ..., k_J)`.
    pub fn on_hand(&self) -> &[usize] {
        &self.k[..self.k.len() - 1]
    }

    /// Orders outstanding at the supplier, `k_{J+1}`.
    pub fn outstanding(&self) -> usize {
        self.k[self.k.len() - 1]
    }

    /// Full vector including the supplier component.
    pub fn as_slice(&self) -> &[usize] {
        &self.k
    }
}

/// A joint state of queue lengths and inventories.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FullState {
    pub queues: Vec<usize>,
    pub inventory: InventoryState,
}

impl FullState {
    pub fn new(queues: Vec<usize>, on_hand: &[usize], base_stock: &[usize]) -> Result<Self> {
        if queues.len() != base_stock.len() {
            return Err(Error::Precondition(format!(
                "state has {} queues, expected {}",
                queues.len(),
                base_stock.len()
            )));
        }
        Ok(Self {
            queues,
            inventory: InventoryState::new(on_hand, base_stock)?,
        })
    }
}

/// The finite inventory state space `K` with a mixed-radix index map.
///
/// States are ordered lexicographically on `(k_1, ..., k_J)` with `k_J`
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct InventorySpace {
    base_stock: Vec<usize>,
    strides: Vec<usize>,
    states: Vec<InventoryState>,
}

impl InventorySpace {
    pub fn new(base_stock: &[usize]) -> Result<Self> {
        validate_base_stock(base_stock)?;
        let mut strides = vec![1usize; base_stock.len()];
        for j in (0..base_stock.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (base_stock[j + 1] + 1);
        }
        let len = strides[0] * (base_stock[0] + 1);
        let mut states = Vec::with_capacity(len);
        let mut levels = vec![0usize; base_stock.len()];
        for _ in 0..len {
            states.push(InventoryState::from_levels_unchecked(&levels, base_stock));
            // odometer increment, last coordinate fastest
            for j in (0..levels.len()).rev() {
                if levels[j] < base_stock[j] {
                    levels[j] += 1;
                    break;
                }
                levels[j] = 0;
            }
        }
        Ok(Self {
            base_stock: base_stock.to_vec(),
            strides,
            states,
        })
    }

    pub fn base_stock(&self) -> &[usize] {
        &self.base_stock
    }

    pub fn states(&self) -> &[InventoryState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the state with the given on-hand levels, if it lies in `K`.
    pub fn index_of(&self, on_hand: &[usize]) -> Option<usize> {
        if on_hand.len() != self.base_stock.len() {
            return None;
        }
        let mut idx = 0;
        for ((k, b), s) in on_hand.iter().zip(&self.base_stock).zip(&self.strides) {
            if k > b {
                return None;
            }
            idx += k * s;
        }
        Some(idx)
    }
}

/// All inventory states for the given base-stock levels in canonical order.
pub fn enumerate_inventory_states(base_stock: &[usize]) -> Result<Vec<InventoryState>> {
    Ok(InventorySpace::new(base_stock)?.states)
}

/// Probability that the next finished item from the supplier is sent to
/// location `i` under the strict-priority policy.
///
/// The item goes to the location with the largest deficit `b_j - k_j`; ties
/// are broken uniformly. When every location is full the argmax set is all
/// locations and `1/J` is returned; callers guard replenishments with
/// `k_i < b_i`, so this value never carries rate.
pub fn routing_prob(base_stock: &[usize], k: &InventoryState, i: usize) -> Result<f64> {
    let locations = base_stock.len();
    if i >= locations {
        return Err(Error::IndexOutOfRange {
            index: i,
            locations,
        });
    }
    if k.locations() != locations {
        return Err(Error::Precondition(format!(
            "state has {} locations, base stock has {locations}",
            k.locations()
        )));
    }
    Ok(routing_prob_levels(base_stock, k.on_hand(), i))
}

pub(crate) fn routing_prob_levels(base_stock: &[usize], on_hand: &[usize], i: usize) -> f64 {
    let deficit = |j: usize| base_stock[j] - on_hand[j];
    let max = (0..base_stock.len()).map(deficit).max().unwrap_or(0);
    if deficit(i) != max {
        return 0.0;
    }
    let ties = (0..base_stock.len()).filter(|&j| deficit(j) == max).count();
    1.0 / ties as f64
}
