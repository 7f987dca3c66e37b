//! Reduced generator on the inventory space and the transition function of
//! the full queueing-inventory process.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{routing_prob_levels, FullState, InventorySpace, InventoryState, NetworkConfig};

/// Dense generator of the inventory-replenishment subsystem on `K`.
#[derive(Debug, Clone)]
pub struct ReducedGenerator {
    space: InventorySpace,
    rates: DMatrix<f64>,
}

impl ReducedGenerator {
    pub fn space(&self) -> &InventorySpace {
        &self.space
    }

    pub fn states(&self) -> &[InventoryState] {
        self.space.states()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    /// Largest absolute entry of the matrix (the largest total outflow).
    pub fn max_abs_rate(&self) -> f64 {
        self.rates.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// `max_i |row_sum_i|`.
    pub fn max_row_sum(&self) -> f64 {
        self.rates
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }

    /// `||x Q||_inf` for a measure `x` in canonical order.
    pub fn balance_residual(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.len(), "measure length mismatch");
        let n = self.len();
        (0..n)
            .map(|col| {
                (0..n)
                    .map(|row| x[row] * self.rates[(row, col)])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Flow from `set` to its complement under measure `x` and the reverse flow.
    pub fn cut_flows(&self, x: &[f64], in_set: &[bool]) -> (f64, f64) {
        let n = self.len();
        let mut out = 0.0;
        let mut back = 0.0;
        for from in 0..n {
            for to in 0..n {
                if from == to || in_set[from] == in_set[to] {
                    continue;
                }
                let flow = x[from] * self.rates[(from, to)];
                if in_set[from] {
                    out += flow;
                } else {
                    back += flow;
                }
            }
        }
        (out, back)
    }

    /// Strong connectivity of the positive-rate graph, checked by a forward
    /// and a backward search from state 0.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(s) = queue.pop_front() {
                for t in 0..n {
                    let r = if forward {
                        self.rates[(s, t)]
                    } else {
                        self.rates[(t, s)]
                    };
                    if t != s && r > 0.0 && !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
            seen.into_iter().all(|v| v)
        };
        n > 0 && reach(true) && reach(false)
    }
}

/// Builds `Q_red`: demand `k -> k - e_i + e_{J+1}` at `lambda_i` when `k_i > 0`,
/// replenishment `k -> k + e_i - e_{J+1}` at `nu * p_i(k)` when `k_i < b_i`,
/// and, if enabled, transfers `k -> k - e_i + e_j` at `beta` when `k_i - k_j >= 2`.
pub fn build_reduced_generator(config: &NetworkConfig) -> Result<ReducedGenerator> {
    let b = config.base_stock();
    let space = InventorySpace::new(b)?;
    let n = space.len();
    let mut rates = DMatrix::<f64>::zeros(n, n);
    let mut target = vec![0usize; b.len()];

    for (from, state) in space.states().iter().enumerate() {
        visit_inventory_moves(config, state.on_hand(), |mv, rate| {
            target.copy_from_slice(state.on_hand());
            mv.apply(&mut target);
            let to = space
                .index_of(&target)
                .expect("inventory move left the state space");
            rates[(from, to)] += rate;
        });
    }
    for i in 0..n {
        let out: f64 = (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum();
        rates[(i, i)] = -out;
    }

    let generator = ReducedGenerator { space, rates };
    if !generator.is_irreducible() {
        return Err(Error::Reducible(format!(
            "positive-rate graph on {} inventory states is not strongly connected",
            n
        )));
    }
    Ok(generator)
}

/// What a transition does to the joint state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// A customer joins queue `i`.
    Arrival(usize),
    /// Service completion at `i`: one customer leaves and one item is consumed.
    Service(usize),
    /// An item from the supplier reaches location `i`.
    Replenishment(usize),
    /// One item moves through the transfer channel.
    Transfer { from: usize, to: usize },
}

impl TransitionKind {
    /// Applies the move in place. `queues` has length `J`, `k` has length `J + 1`.
    pub fn apply(self, queues: &mut [usize], k: &mut [usize]) {
        let supplier = k.len() - 1;
        match self {
            TransitionKind::Arrival(i) => queues[i] += 1,
            TransitionKind::Service(i) => {
                queues[i] -= 1;
                k[i] -= 1;
                k[supplier] += 1;
            }
            TransitionKind::Replenishment(i) => {
                k[i] += 1;
                k[supplier] -= 1;
            }
            TransitionKind::Transfer { from, to } => {
                k[from] -= 1;
                k[to] += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub kind: TransitionKind,
    pub target: FullState,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionList {
    pub transitions: Vec<Transition>,
}

impl TransitionList {
    pub fn total_rate(&self) -> f64 {
        self.transitions.iter().map(|t| t.rate).sum()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// All positive-rate transitions out of a joint state.
///
/// Demand at a location with no stock on hand is lost and does not join the
/// queue; a server with waiting customers but no stock idles until the next
/// replenishment arrives.
pub fn full_transitions(config: &NetworkConfig, state: &FullState) -> Result<TransitionList> {
    let b = config.base_stock();
    if state.queues.len() != b.len() || state.inventory.locations() != b.len() {
        return Err(Error::Precondition(format!(
            "state dimension does not match {} locations",
            b.len()
        )));
    }
    let mut transitions = Vec::new();
    visit_transitions(
        config,
        &state.queues,
        state.inventory.on_hand(),
        |kind, rate| {
            let mut queues = state.queues.clone();
            let mut k = state.inventory.as_slice().to_vec();
            kind.apply(&mut queues, &mut k);
            let inventory = InventoryState::from_levels_unchecked(&k[..b.len()], b);
            debug_assert_eq!(inventory.as_slice(), &k[..]);
            transitions.push(Transition {
                kind,
                target: FullState { queues, inventory },
                rate,
            });
        },
    );
    Ok(TransitionList { transitions })
}

/// Calls `f(kind, rate)` for every positive-rate transition out of `(queues, on_hand)`.
pub(crate) fn visit_transitions(
    config: &NetworkConfig,
    queues: &[usize],
    on_hand: &[usize],
    mut f: impl FnMut(TransitionKind, f64),
) {
    for (i, &n) in queues.iter().enumerate() {
        if on_hand[i] > 0 {
            f(TransitionKind::Arrival(i), config.arrival_rate(i));
            if n > 0 {
                f(TransitionKind::Service(i), config.service(i).rate(n));
            }
        }
    }
    visit_inventory_moves(config, on_hand, |mv, rate| match mv {
        InventoryMove::Demand(_) => {}
        InventoryMove::Replenish(i) => f(TransitionKind::Replenishment(i), rate),
        InventoryMove::Transfer { from, to } => f(TransitionKind::Transfer { from, to }, rate),
    });
}

#[derive(Debug, Clone, Copy)]
enum InventoryMove {
    Demand(usize),
    Replenish(usize),
    Transfer { from: usize, to: usize },
}

impl InventoryMove {
    fn apply(self, on_hand: &mut [usize]) {
        match self {
            InventoryMove::Demand(i) => on_hand[i] -= 1,
            InventoryMove::Replenish(i) => on_hand[i] += 1,
            InventoryMove::Transfer { from, to } => {
                on_hand[from] -= 1;
                on_hand[to] += 1;
            }
        }
    }
}

fn visit_inventory_moves(
    config: &NetworkConfig,
    on_hand: &[usize],
    mut f: impl FnMut(InventoryMove, f64),
) {
    let b = config.base_stock();
    let nu = config.supplier_rate();
    for i in 0..b.len() {
        if on_hand[i] > 0 {
            f(InventoryMove::Demand(i), config.arrival_rate(i));
        }
        if on_hand[i] < b[i] {
            let p = routing_prob_levels(b, on_hand, i);
            if p > 0.0 {
                f(InventoryMove::Replenish(i), nu * p);
            }
        }
    }
    if let Some(beta) = config.transfer_rate().filter(|&beta| beta > 0.0) {
        for from in 0..b.len() {
            for to in 0..b.len() {
                if from != to && on_hand[from] >= on_hand[to] + 2 {
                    f(InventoryMove::Transfer { from, to }, beta);
                }
            }
        }
    }
}
