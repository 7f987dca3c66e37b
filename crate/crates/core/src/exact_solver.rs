//! Linear-algebra solution of `theta * Q_red = 0` and assembly of the joint
//! stationary distribution on a finite window of queue lengths.

use std::fmt;

use nalgebra::DMatrix;

use crate::analysis::{ergodicity_check, queue_marginal, QueueMarginal};
use crate::error::{Error, Result};
use crate::generator::{build_reduced_generator, ReducedGenerator};
use crate::model::{InventorySpace, InventoryState, NetworkConfig};

/// Relative residual bound `||theta Q||_inf <= RESIDUAL_TOL * max|q|`.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Rounding band around zero: weights below `-POSITIVITY_TOL` mean the solve
/// failed, weights inside the band are recomputed before returning.
pub const POSITIVITY_TOL: f64 = 1e-14;

/// Which method produced a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Exact,
    ClosedForm,
    Recursive,
    Empirical,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::ClosedForm => "closed_form",
            Provenance::Recursive => "recursive",
            Provenance::Empirical => "empirical",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Provenance::Exact),
            "closed_form" => Ok(Provenance::ClosedForm),
            "recursive" => Ok(Provenance::Recursive),
            "empirical" => Ok(Provenance::Empirical),
            other => Err(Error::Precondition(format!("unknown provenance `{other}`"))),
        }
    }
}

/// A measure on the inventory space `K`, stored in canonical state order.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMeasure {
    space: InventorySpace,
    weights: Vec<f64>,
    normalized: bool,
    provenance: Provenance,
}

impl ThetaMeasure {
    /// Wraps weights given in canonical order. Weights must be finite and
    /// non-negative; `normalized` is derived from the total mass.
    pub fn from_weights(
        base_stock: &[usize],
        weights: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let space = InventorySpace::new(base_stock)?;
        if weights.len() != space.len() {
            return Err(Error::Precondition(format!(
                "expected {} weights, got {}",
                space.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Precondition(format!("invalid weight {w}")));
        }
        let normalized = (weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        Ok(Self {
            space,
            weights,
            normalized,
            provenance,
        })
    }

    pub(crate) fn normalized_from(
        space: InventorySpace,
        mut weights: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self {
            space,
            weights,
            normalized: true,
            provenance,
        }
    }

    pub fn space(&self) -> &InventorySpace {
        &self.space
    }

    pub fn base_stock(&self) -> &[usize] {
        self.space.base_stock()
    }

    pub fn states(&self) -> &[InventoryState] {
        self.space.states()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of the state with on-hand levels `on_hand`; `None` outside `K`.
    pub fn weight(&self, on_hand: &[usize]) -> Option<f64> {
        self.space.index_of(on_hand).map(|i| self.weights[i])
    }

    pub fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        self.normalized = true;
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Total-variation distance `1/2 * sum |a - b|` between two normalized measures on the same space.
    pub fn total_variation(&self, other: &ThetaMeasure) -> Result<f64> {
        if self.base_stock() != other.base_stock() {
            return Err(Error::Precondition(
                "measures live on different inventory spaces".into(),
            ));
        }
        Ok(total_variation(&self.weights, &other.weights))
    }
}

pub(crate) fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Solves `theta * Q_red = 0` through the right singular vector of `Q_red^T`
/// belonging to its smallest singular value, then fixes sign and normalizes.
pub fn solve_theta_exact(generator: &ReducedGenerator) -> Result<ThetaMeasure> {
    let n = generator.len();
    let transposed: DMatrix<f64> = generator.matrix().transpose();
    let svd = transposed.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Solver("SVD did not produce right singular vectors".into()))?;
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    let (min_idx, _) = sigma.argmin();

    // null-space dimension: singular values that are zero up to rounding
    let zero_tol = 1e-9 * sigma_max.max(f64::MIN_POSITIVE);
    let nullity = sigma.iter().filter(|&&s| s <= zero_tol).count();
    if n > 1 && nullity != 1 {
        return Err(Error::Reducible(format!(
            "null space of Q_red^T has dimension {nullity}, expected 1"
        )));
    }

    let mut weights: Vec<f64> = v_t.row(min_idx).iter().copied().collect();
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || total.abs() < f64::EPSILON {
        return Err(Error::Solver(
            "null vector has no usable mass for normalization".into(),
        ));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    if let Some(w) = weights.iter().find(|w| w.is_nan() || **w < -POSITIVITY_TOL) {
        return Err(Error::Solver(format!(
            "stationary vector is not positive (weight {w:e})"
        )));
    }
    if weights.iter().any(|&w| w <= POSITIVITY_TOL) {
        polish_small_weights(generator, &mut weights)?;
    }

    let theta =
        ThetaMeasure::normalized_from(generator.space().clone(), weights, Provenance::Exact);
    let residual = generator.balance_residual(theta.weights());
    let bound = RESIDUAL_TOL * generator.max_abs_rate();
    if residual > bound {
        return Err(Error::Solver(format!(
            "balance residual {residual:e} exceeds {bound:e}"
        )));
    }
    Ok(theta)
}

/// Weights at the rounding level carry no relative accuracy and may even
/// have the wrong sign. Gauss-Seidel sweeps of `theta(s) * q(s) = sum_r
/// theta(r) q(r, s)` recompute them from their inflow without cancellation,
/// leaving the well-resolved weights essentially unchanged.
fn polish_small_weights(generator: &ReducedGenerator, weights: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 200;
    let q = generator.matrix();
    let n = weights.len();
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for s in 0..n {
            let inflow: f64 = (0..n)
                .filter(|&r| r != s)
                .map(|r| weights[r].max(0.0) * q[(r, s)])
                .sum();
            let updated = inflow / -q[(s, s)];
            if updated > 0.0 {
                change = change.max((updated - weights[s]).abs() / updated);
            } else {
                change = f64::INFINITY;
            }
            weights[s] = updated;
        }
        if change <= 1e-12 {
            break;
        }
    }
    if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::Solver(
            "stationary vector has weights that stay non-positive".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(())
}

/// Builds the reduced generator for `config` and solves it.
pub fn solve_config_exact(config: &NetworkConfig) -> Result<ThetaMeasure> {
    solve_theta_exact(&build_reduced_generator(config)?)
}

/// Joint stationary distribution `pi(n, k) = xi(n) * theta(k)` restricted to
/// `n_j <= n_max` for every queue.
#[derive(Debug, Clone)]
pub struct TruncatedPi {
    n_max: usize,
    theta: ThetaMeasure,
    marginals: Vec<QueueMarginal>,
    /// `xi_j(0..=n_max)` per location.
    queue_probs: Vec<Vec<f64>>,
}

impl TruncatedPi {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn theta(&self) -> &ThetaMeasure {
        &self.theta
    }

    pub fn queue_marginals(&self) -> &[QueueMarginal] {
        &self.marginals
    }

    /// `pi(n, k)` for the inventory state at canonical index `k_index`.
    pub fn prob(&self, queues: &[usize], k_index: usize) -> f64 {
        self.queue_prob(queues) * self.theta.weights()[k_index]
    }

    /// `xi(n)` for a queue vector inside the window.
    pub fn queue_prob(&self, queues: &[usize]) -> f64 {
        queues
            .iter()
            .zip(&self.queue_probs)
            .map(|(&n, p)| p[n])
            .product()
    }

    /// Probability mass of the window `{n : n_j <= n_max}`.
    pub fn window_mass(&self) -> f64 {
        self.queue_probs
            .iter()
            .map(|p| p.iter().sum::<f64>())
            .product()
    }

    /// Every queue vector inside the window, last location varying fastest.
    pub fn queue_vectors(&self) -> Vec<Vec<usize>> {
        let j = self.queue_probs.len();
        let side = self.n_max + 1;
        let total = side.pow(j as u32);
        (0..total)
            .map(|mut code| {
                let mut n = vec![0; j];
                for slot in n.iter_mut().rev() {
                    *slot = code % side;
                    code /= side;
                }
                n
            })
            .collect()
    }
}

pub fn solve_pi_truncated(config: &NetworkConfig, n_max: usize) -> Result<TruncatedPi> {
    let verdict = ergodicity_check(config);
    if !verdict.ergodic {
        return Err(Error::NotErgodic(verdict.describe()));
    }
    let theta = solve_config_exact(config)?;
    let marginals = (0..config.locations())
        .map(|j| queue_marginal(config, j))
        .collect::<Result<Vec<_>>>()?;
    let queue_probs = marginals
        .iter()
        .map(|m| (0..=n_max).map(|n| m.prob(n)).collect())
        .collect();
    Ok(TruncatedPi {
        n_max,
        theta,
        marginals,
        queue_probs,
    })
}
