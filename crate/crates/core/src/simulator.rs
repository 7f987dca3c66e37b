//! Event-by-event simulation of the joint queueing-inventory process.
//!
//! The random source is `ChaCha8Rng` seeded with `seed_from_u64`; holding
//! times are `Exp1 / total_rate` and the next transition is chosen by one
//! uniform draw against the cumulative rates, in the order produced by the
//! transition function. Replication `r` of a batch uses seed `seed + r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::analysis::ergodicity_check;
use crate::error::{Error, Result};
use crate::exact_solver::{total_variation, Provenance, ThetaMeasure};
use crate::generator::{visit_transitions, TransitionKind};
use crate::model::{InventorySpace, NetworkConfig};

const MAX_CELLS: usize = 1 << 25;

/// Which dynamics to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    /// The production-inventory network.
    #[default]
    ProductionInventory,
    /// Counter-model: servers also work while their stock is empty, and such
    /// service completions consume nothing. Arrivals are still lost at
    /// empty locations, so queues and inventories become dependent.
    StocklessService,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub total_events: u64,
    pub seed: u64,
    /// Queue lengths above this are recorded in the `n_obs` bin.
    pub n_obs: usize,
    /// Fraction of the events discarded before accumulating occupancy.
    pub burn_in_fraction: f64,
    pub dynamics: Dynamics,
}

impl SimulationOptions {
    pub fn new(total_events: u64, seed: u64) -> Self {
        Self {
            total_events,
            seed,
            n_obs: 6,
            burn_in_fraction: 0.1,
            dynamics: Dynamics::ProductionInventory,
        }
    }

    pub fn with_n_obs(mut self, n_obs: usize) -> Self {
        self.n_obs = n_obs;
        self
    }

    pub fn with_dynamics(mut self, dynamics: Dynamics) -> Self {
        self.dynamics = dynamics;
        self
    }

    pub fn with_burn_in(mut self, fraction: f64) -> Self {
        self.burn_in_fraction = fraction;
        self
    }
}

/// Time-weighted occupancy of a run, over clipped queue vectors times `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    events: u64,
    simulated_time: f64,
    seed: u64,
    n_obs: usize,
    locations: usize,
    space: InventorySpace,
    /// Normalized, index `queue_code * |K| + k_index`.
    joint: Vec<f64>,
}

impl SimulationResult {
    pub fn events(&self) -> u64 {
        self.events
    }

    /// Observed time after burn-in.
    pub fn simulated_time(&self) -> f64 {
        self.simulated_time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    fn inventory_len(&self) -> usize {
        self.space.len()
    }

    fn queue_cells(&self) -> usize {
        self.joint.len() / self.inventory_len()
    }

    /// Empirical distribution of the clipped queue vector, last location fastest.
    pub fn queue_joint(&self) -> Vec<f64> {
        self.joint
            .chunks(self.inventory_len())
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Empirical inventory distribution as a measure on `K`.
    pub fn theta_hat(&self) -> ThetaMeasure {
        let mut w = vec![0.0; self.inventory_len()];
        for row in self.joint.chunks(self.inventory_len()) {
            for (acc, x) in w.iter_mut().zip(row) {
                *acc += x;
            }
        }
        ThetaMeasure::normalized_from(self.space.clone(), w, Provenance::Empirical)
    }

    /// Empirical distribution of queue `j` over `0..=n_obs` (last bin clipped).
    pub fn queue_marginal(&self, j: usize) -> Vec<f64> {
        let side = self.n_obs + 1;
        let stride = side.pow((self.locations - 1 - j) as u32);
        let mut out = vec![0.0; side];
        for (code, p) in self.queue_joint().into_iter().enumerate() {
            out[(code / stride) % side] += p;
        }
        out
    }

    /// Time-weighted average of several runs of the same model.
    pub fn merge(results: &[SimulationResult]) -> Result<SimulationResult> {
        let first = results
            .first()
            .ok_or_else(|| Error::Precondition("nothing to merge".into()))?;
        if results
            .iter()
            .any(|r| r.space != first.space || r.n_obs != first.n_obs)
        {
            return Err(Error::Precondition("runs observe different windows".into()));
        }
        let total_time: f64 = results.iter().map(|r| r.simulated_time).sum();
        let mut joint = vec![0.0; first.joint.len()];
        for r in results {
            let w = r.simulated_time / total_time;
            for (acc, x) in joint.iter_mut().zip(&r.joint) {
                *acc += w * x;
            }
        }
        Ok(SimulationResult {
            events: results.iter().map(|r| r.events).sum(),
            simulated_time: total_time,
            seed: first.seed,
            n_obs: first.n_obs,
            locations: first.locations,
            space: first.space.clone(),
            joint,
        })
    }
}

pub fn simulate(config: &NetworkConfig, options: &SimulationOptions) -> Result<SimulationResult> {
    simulate_observed(config, options, |_, _| {})
}

/// Like [`simulate`], calling `observer(queues, k)` on every visited state
/// (including burn-in). `k` includes the supplier component.
pub fn simulate_observed(
    config: &NetworkConfig,
    options: &SimulationOptions,
    mut observer: impl FnMut(&[usize], &[usize]),
) -> Result<SimulationResult> {
    let verdict = ergodicity_check(config);
    if !verdict.ergodic {
        return Err(Error::NotErgodic(verdict.describe()));
    }
    if options.total_events == 0 {
        return Err(Error::Precondition(
            "total_events must be at least 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&options.burn_in_fraction) {
        return Err(Error::Precondition(format!(
            "burn-in fraction must lie in [0, 1), got {}",
            options.burn_in_fraction
        )));
    }
    let b = config.base_stock();
    let locations = b.len();
    let space = InventorySpace::new(b)?;
    let side = options.n_obs + 1;
    let queue_cells = side
        .checked_pow(locations as u32)
        .filter(|c| c.saturating_mul(space.len()) <= MAX_CELLS)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "observation window (n_obs = {}) is too large for {locations} locations",
                options.n_obs
            ))
        })?;
    let mut occupancy = vec![0.0; queue_cells * space.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut queues = vec![0usize; locations];
    let mut k: Vec<usize> = b.iter().copied().chain(std::iter::once(0)).collect();
    let mut moves: Vec<(Move, f64)> = Vec::with_capacity(3 * locations + 2);
    let burn_in = (options.total_events as f64 * options.burn_in_fraction) as u64;
    let mut observed_time = 0.0;

    for event in 0..options.total_events {
        observer(&queues, &k);
        moves.clear();
        visit_transitions(config, &queues, &k[..locations], |kind, rate| {
            moves.push((Move::Model(kind), rate));
        });
        if options.dynamics == Dynamics::StocklessService {
            for (i, &n) in queues.iter().enumerate() {
                if n > 0 && k[i] == 0 {
                    moves.push((Move::StocklessDeparture(i), config.service(i).rate(n)));
                }
            }
        }
        let total: f64 = moves.iter().map(|(_, r)| r).sum();
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;

        if event >= burn_in {
            let mut code = 0;
            for &n in &queues {
                code = code * side + n.min(options.n_obs);
            }
            let cell = code * space.len()
                + space
                    .index_of(&k[..locations])
                    .expect("simulated inventory left K");
            occupancy[cell] += hold;
            observed_time += hold;
        }

        let mut u = rng.random::<f64>() * total;
        let mut chosen = moves[moves.len() - 1].0;
        for &(mv, rate) in &moves {
            if u < rate {
                chosen = mv;
                break;
            }
            u -= rate;
        }
        match chosen {
            Move::Model(kind) => kind.apply(&mut queues, &mut k),
            Move::StocklessDeparture(i) => queues[i] -= 1,
        }
    }

    occupancy.iter_mut().for_each(|x| *x /= observed_time);
    Ok(SimulationResult {
        events: options.total_events,
        simulated_time: observed_time,
        seed: options.seed,
        n_obs: options.n_obs,
        locations,
        space,
        joint: occupancy,
    })
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Model(TransitionKind),
    StocklessDeparture(usize),
}

/// Runs `replications` independent runs in parallel; run `r` uses seed `options.seed + r`.
pub fn simulate_replications(
    config: &NetworkConfig,
    options: &SimulationOptions,
    replications: usize,
) -> Result<Vec<SimulationResult>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut opts = options.clone();
            opts.seed = options.seed.wrapping_add(r);
            simulate(config, &opts)
        })
        .collect()
}

/// Total-variation distance between the empirical joint distribution of
/// (clipped queues, inventory) and the product of its two marginals.
pub fn decoupling_test(result: &SimulationResult) -> f64 {
    let queues = result.queue_joint();
    let theta = result.theta_hat();
    let product: Vec<f64> = queues
        .iter()
        .flat_map(|q| theta.weights().iter().map(move |t| q * t))
        .collect();
    debug_assert_eq!(product.len(), result.queue_cells() * result.inventory_len());
    total_variation(&result.joint, &product)
}
