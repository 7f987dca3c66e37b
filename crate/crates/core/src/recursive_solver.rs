//! Recursive elimination of the global balance equations for two locations
//! with `b_1 >= b_2 > 1`.
//!
//! Entries of the inventory grid `theta(k1, k2)` are derived one at a time
//! from balance equations whose other terms are already known. Each outer
//! phase introduces one unknown `kappa` (the weight of the leftmost state of
//! the current row), carries every derived entry as an affine expression
//! `a + c * kappa`, and resolves `kappa` from one closing equation before the
//! next phase starts. Rows are processed from `k2 = b2` down to `k2 = 1`:
//!
//! * row `b2`: the right column `k1 = b1` is filled upward from the seed
//!   `theta(b1, 0) = 1`, the top row from `theta(0, b2) = kappa`, and
//!   `kappa` is fixed by the equation of `(b1, b2 - 1)`;
//! * rows `b2 - 1 ..= 2`: the row is extended left to right up to the
//!   policy diagonal, the diagonal point below is derived, the column
//!   through the diagonal is filled downward and `kappa` is fixed at the
//!   bottom of that column;
//! * row `1`: as above, followed by the bottom row right to left.
//!
//! The routing probabilities come from [`crate::model::routing_prob`], so the
//! half rate on the policy diagonal is never hard-coded.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::exact_solver::{Provenance, ThetaMeasure};
use crate::model::{routing_prob_levels, InventorySpace, NetworkConfig};

/// `constant + coefficient * kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AffineKappa {
    pub constant: f64,
    pub coefficient: f64,
}

impl AffineKappa {
    pub const ZERO: AffineKappa = AffineKappa {
        constant: 0.0,
        coefficient: 0.0,
    };

    pub fn known(value: f64) -> Self {
        Self {
            constant: value,
            coefficient: 0.0,
        }
    }

    /// The unknown itself.
    pub fn kappa() -> Self {
        Self {
            constant: 0.0,
            coefficient: 1.0,
        }
    }

    pub fn resolve(self, kappa: f64) -> f64 {
        self.constant + self.coefficient * kappa
    }

    pub fn is_resolved(self) -> bool {
        self.coefficient == 0.0
    }
}

impl Add for AffineKappa {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            constant: self.constant + rhs.constant,
            coefficient: self.coefficient + rhs.coefficient,
        }
    }
}

impl Sub for AffineKappa {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for AffineKappa {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            constant: -self.constant,
            coefficient: -self.coefficient,
        }
    }
}

impl Mul<f64> for AffineKappa {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self {
            constant: self.constant * rhs,
            coefficient: self.coefficient * rhs,
        }
    }
}

impl Div<f64> for AffineKappa {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Self {
            constant: self.constant / rhs,
            coefficient: self.coefficient / rhs,
        }
    }
}

/// The `(b1 + 1) x (b2 + 1)` grid of partially derived weights, indexed by
/// on-hand levels `(k1, k2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    b1: usize,
    b2: usize,
    entries: Vec<Option<AffineKappa>>,
}

impl ThetaTable {
    pub fn new(b1: usize, b2: usize) -> Self {
        Self {
            b1,
            b2,
            entries: vec![None; (b1 + 1) * (b2 + 1)],
        }
    }

    /// Table filled with the (resolved) weights of a two-location measure.
    pub fn from_theta(theta: &ThetaMeasure) -> Result<Self> {
        let &[b1, b2] = theta.base_stock() else {
            return Err(Error::Precondition(
                "theta table needs exactly two locations".into(),
            ));
        };
        let mut table = Self::new(b1, b2);
        for (state, &w) in theta.states().iter().zip(theta.weights()) {
            let k = state.on_hand();
            table.set(k[0], k[1], AffineKappa::known(w));
        }
        Ok(table)
    }

    pub fn base_stock(&self) -> (usize, usize) {
        (self.b1, self.b2)
    }

    fn slot(&self, k1: usize, k2: usize) -> usize {
        debug_assert!(k1 <= self.b1 && k2 <= self.b2);
        k1 * (self.b2 + 1) + k2
    }

    pub fn get(&self, k1: usize, k2: usize) -> Option<AffineKappa> {
        if k1 > self.b1 || k2 > self.b2 {
            return None;
        }
        self.entries[self.slot(k1, k2)]
    }

    pub fn set(&mut self, k1: usize, k2: usize, value: AffineKappa) {
        let slot = self.slot(k1, k2);
        self.entries[slot] = Some(value);
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// Number of present entries that still depend on `kappa`.
    pub fn unresolved(&self) -> usize {
        self.entries
            .iter()
            .flatten()
            .filter(|e| !e.is_resolved())
            .count()
    }

    fn substitute(&mut self, kappa: f64) {
        for e in self.entries.iter_mut().flatten() {
            *e = AffineKappa::known(e.resolve(kappa));
        }
    }

    /// Resolved weights in canonical order (`k1` major, `k2` minor).
    fn resolved_weights(&self) -> Option<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.filter(|a| a.is_resolved()).map(|a| a.constant))
            .collect()
    }
}

/// Coefficients of the balance equation of `(k1, k2)` written as
/// `sum_s coef(s) * theta(s) = 0`: the state itself carries its total
/// outflow, every predecessor carries minus its rate into the state.
/// Zero coefficients are omitted.
fn gbe_terms(config: &NetworkConfig, k1: usize, k2: usize) -> Vec<((usize, usize), f64)> {
    let b = config.base_stock();
    let nu = config.supplier_rate();
    let here = [k1, k2];
    let mut out = 0.0;
    let mut terms = Vec::with_capacity(5);
    for i in 0..2 {
        if here[i] > 0 {
            out += config.arrival_rate(i);
        }
        if here[i] < b[i] {
            out += nu * routing_prob_levels(b, &here, i);
        }
    }
    terms.push(((k1, k2), out));
    for i in 0..2 {
        // demand at i from the state one item richer
        if here[i] < b[i] {
            let mut from = here;
            from[i] += 1;
            terms.push(((from[0], from[1]), -config.arrival_rate(i)));
        }
        // replenishment of i from the state one item poorer
        if here[i] > 0 {
            let mut from = here;
            from[i] -= 1;
            let rate = nu * routing_prob_levels(b, &from, i);
            if rate > 0.0 {
                terms.push(((from[0], from[1]), -rate));
            }
        }
    }
    terms
}

fn check_two_locations(config: &NetworkConfig, k1: usize, k2: usize) -> Result<()> {
    let b = config.base_stock();
    if b.len() != 2 {
        return Err(Error::Precondition(format!(
            "balance equations on the grid need two locations, got {}",
            b.len()
        )));
    }
    if k1 > b[0] || k2 > b[1] {
        return Err(Error::Precondition(format!(
            "state ({k1}, {k2}) outside the grid for b = {b:?}"
        )));
    }
    if config.transfer_rate().is_some_and(|beta| beta > 0.0) {
        return Err(Error::Precondition(
            "grid balance equations do not include transfer flows".into(),
        ));
    }
    Ok(())
}

/// Left-hand side minus right-hand side of the balance equation of `state`,
/// as an affine expression in `kappa`.
pub fn gbe_residual(
    table: &ThetaTable,
    config: &NetworkConfig,
    state: (usize, usize),
) -> Result<AffineKappa> {
    let (k1, k2) = state;
    check_two_locations(config, k1, k2)?;
    if table.base_stock() != (config.base_stock()[0], config.base_stock()[1]) {
        return Err(Error::Precondition(
            "table and configuration disagree on b".into(),
        ));
    }
    gbe_terms(config, k1, k2)
        .into_iter()
        .try_fold(AffineKappa::ZERO, |acc, ((s1, s2), coef)| {
            let value = table.get(s1, s2).ok_or_else(|| {
                Error::Sequencing(format!(
                    "GBE of ({k1}, {k2}) needs theta({s1}, {s2}), which is not derived yet"
                ))
            })?;
            Ok(acc + value * coef)
        })
}

/// Largest `|residual|` over the balance equations of every grid state.
pub fn max_gbe_residual(table: &ThetaTable, config: &NetworkConfig) -> Result<f64> {
    let (b1, b2) = table.base_stock();
    let mut worst = 0.0f64;
    for k1 in 0..=b1 {
        for k2 in 0..=b2 {
            let r = gbe_residual(table, config, (k1, k2))?;
            if !r.is_resolved() {
                return Err(Error::Sequencing(format!(
                    "theta table still depends on kappa at GBE ({k1}, {k2})"
                )));
            }
            worst = worst.max(r.constant.abs());
        }
    }
    Ok(worst)
}

/// Uses the balance equation of `gbe_state` to express `target`, which must
/// be its only missing term.
fn derive_entry(
    table: &mut ThetaTable,
    config: &NetworkConfig,
    gbe_state: (usize, usize),
    target: (usize, usize),
) -> Result<AffineKappa> {
    let mut target_coef = None;
    let mut rest = AffineKappa::ZERO;
    for (s, coef) in gbe_terms(config, gbe_state.0, gbe_state.1) {
        if s == target {
            target_coef = Some(coef);
            continue;
        }
        let value = table.get(s.0, s.1).ok_or_else(|| {
            Error::Sequencing(format!(
                "deriving theta{target:?} from GBE {gbe_state:?} needs theta{s:?}"
            ))
        })?;
        rest = rest + value * coef;
    }
    let coef = target_coef.ok_or_else(|| {
        Error::Sequencing(format!(
            "theta{target:?} does not appear in the GBE of {gbe_state:?}"
        ))
    })?;
    let value = -rest / coef;
    table.set(target.0, target.1, value);
    Ok(value)
}

/// Solves the closing equation of a phase for `kappa` and substitutes it.
fn close_phase(
    table: &mut ThetaTable,
    config: &NetworkConfig,
    gbe_state: (usize, usize),
) -> Result<f64> {
    let residual = gbe_residual(table, config, gbe_state)?;
    let scale: f64 = gbe_terms(config, gbe_state.0, gbe_state.1)
        .iter()
        .filter_map(|((s1, s2), coef)| table.get(*s1, *s2).map(|v| (coef * v.coefficient).abs()))
        .sum();
    let c = residual.coefficient;
    if c == 0.0 || c.abs() <= 64.0 * f64::EPSILON * scale {
        return Err(Error::DegenerateElimination {
            k1: gbe_state.0,
            k2: gbe_state.1,
            coefficient: c,
        });
    }
    let kappa = -residual.constant / c;
    if !kappa.is_finite() {
        return Err(Error::Solver(format!(
            "closing equation at {gbe_state:?} gave non-finite kappa"
        )));
    }
    table.substitute(kappa);
    debug_assert_eq!(table.unresolved(), 0);
    Ok(kappa)
}

/// One resolved phase of the elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    /// Row `k2` processed by the phase.
    pub row: usize,
    pub kappa: f64,
    /// Entries still depending on `kappa` right after substitution (always 0).
    pub unresolved_after: usize,
    /// The closing equation that determined `kappa`.
    pub closing_state: (usize, usize),
}

/// Full output of the recursive solver: the normalized measure, the
/// unnormalized table and a record per phase.
#[derive(Debug, Clone)]
pub struct RecursiveSolution {
    pub theta: ThetaMeasure,
    /// The resolved table, scaled like `theta` to total mass one.
    pub table: ThetaTable,
    pub phases: Vec<PhaseRecord>,
}

pub fn solve_theta_recursive(config: &NetworkConfig) -> Result<ThetaMeasure> {
    Ok(solve_theta_recursive_traced(config)?.theta)
}

pub fn solve_theta_recursive_traced(config: &NetworkConfig) -> Result<RecursiveSolution> {
    let b = config.base_stock();
    if b.len() != 2 {
        return Err(Error::Precondition(format!(
            "recursive solver handles exactly two locations, got {}; use the exact solver",
            b.len()
        )));
    }
    let (b1, b2) = (b[0], b[1]);
    if b1 < b2 || b2 < 2 {
        return Err(Error::Precondition(format!(
            "recursive solver requires b1 >= b2 > 1, got b = ({b1}, {b2}); \
             use the exact solver (or the closed form when all b_j = 1)"
        )));
    }
    if config.transfer_rate().is_some() {
        return Err(Error::Precondition(
            "recursive solver does not cover the transfer channel; use the exact solver".into(),
        ));
    }

    let mut table = ThetaTable::new(b1, b2);
    let mut phases = Vec::with_capacity(b2);
    table.set(b1, 0, AffineKappa::known(1.0));

    // Row b2.
    table.set(0, b2, AffineKappa::kappa());
    for l in 0..=b2 - 2 {
        let v = derive_entry(&mut table, config, (b1, l), (b1, l + 1))?;
        if !v.is_resolved() {
            return Err(Error::Sequencing(format!(
                "theta({b1}, {}) unexpectedly depends on kappa",
                l + 1
            )));
        }
    }
    for k1 in 0..=b1 - 2 {
        derive_entry(&mut table, config, (k1, b2), (k1 + 1, b2))?;
    }
    derive_entry(&mut table, config, (b1, b2), (b1, b2))?;
    derive_entry(&mut table, config, (b1 - 1, b2), (b1 - 1, b2 - 1))?;
    let closing = (b1, b2 - 1);
    let kappa = close_phase(&mut table, config, closing)?;
    phases.push(PhaseRecord {
        row: b2,
        kappa,
        unresolved_after: table.unresolved(),
        closing_state: closing,
    });

    // Rows b2 - 1 down to 2.
    for k2 in (2..b2).rev() {
        let column = b1 - (b2 - k2);
        table.set(0, k2, AffineKappa::kappa());
        for k1 in 0..column {
            if k1 + 1 < column {
                derive_entry(&mut table, config, (k1, k2), (k1 + 1, k2))?;
            } else {
                derive_entry(&mut table, config, (k1, k2), (k1, k2 - 1))?;
            }
        }
        for l in (1..=k2).rev() {
            derive_entry(&mut table, config, (column, l), (column, l - 1))?;
        }
        let closing = (column, 0);
        let kappa = close_phase(&mut table, config, closing)?;
        phases.push(PhaseRecord {
            row: k2,
            kappa,
            unresolved_after: table.unresolved(),
            closing_state: closing,
        });
    }

    // Row 1, then the bottom row.
    let gap = b1 - b2;
    table.set(0, 1, AffineKappa::kappa());
    for k1 in 0..=gap + 1 {
        if k1 < gap {
            derive_entry(&mut table, config, (k1, 1), (k1 + 1, 1))?;
        } else {
            derive_entry(&mut table, config, (k1, 1), (k1, 0))?;
        }
    }
    for k1 in (1..=gap).rev() {
        derive_entry(&mut table, config, (k1, 0), (k1 - 1, 0))?;
    }
    let closing = (gap + 1, 0);
    let kappa = close_phase(&mut table, config, closing)?;
    phases.push(PhaseRecord {
        row: 1,
        kappa,
        unresolved_after: table.unresolved(),
        closing_state: closing,
    });

    let weights = table.resolved_weights().ok_or_else(|| {
        Error::Sequencing("elimination finished with missing or unresolved entries".into())
    })?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Solver(format!(
            "recursive elimination produced a non-positive weight {w:e}"
        )));
    }
    let space = InventorySpace::new(b)?;
    let theta = ThetaMeasure::normalized_from(space, weights, Provenance::Recursive);
    let table = ThetaTable::from_theta(&theta)?;
    Ok(RecursiveSolution {
        theta,
        table,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_reduced_generator;

    fn cfg(lambda: [f64; 2], b: [usize; 2], nu: f64) -> NetworkConfig {
        NetworkConfig::with_constant_service(lambda.to_vec(), vec![9.0, 9.0], b.to_vec(), nu)
            .unwrap()
    }

    /// `-(x Q)_s` evaluated from the generator matrix, an independent route
    /// to the balance-equation residual.
    fn generator_residual(config: &NetworkConfig, x: &[f64], k: [usize; 2]) -> f64 {
        let g = build_reduced_generator(config).unwrap();
        let col = g.space().index_of(&k).unwrap();
        -(0..g.len())
            .map(|row| x[row] * g.rate(row, col))
            .sum::<f64>()
    }

    #[test]
    fn affine_arithmetic() {
        let a = AffineKappa {
            constant: 2.0,
            coefficient: -1.0,
        };
        let b = AffineKappa::kappa() * 3.0 + AffineKappa::known(0.5);
        let c = (a + b) * 2.0 - AffineKappa::known(1.0);
        assert_eq!(
            c,
            AffineKappa {
                constant: 4.0,
                coefficient: 4.0
            }
        );
        assert_eq!(c.resolve(0.25), 5.0);
        assert_eq!((-c / 4.0).resolve(1.0), -2.0);
        assert!(AffineKappa::known(3.0).is_resolved());
    }

    #[test]
    fn residual_of_single_seed_matches_generator() {
        let c = cfg([1.0, 2.0], [2, 2], 3.0);
        let mut table = ThetaTable::new(2, 2);
        for k1 in 0..=2 {
            for k2 in 0..=2 {
                table.set(k1, k2, AffineKappa::ZERO);
            }
        }
        table.set(2, 0, AffineKappa::known(1.0));
        let r = gbe_residual(&table, &c, (2, 0)).unwrap();
        let mut x = vec![0.0; 9];
        x[InventorySpace::new(&[2, 2])
            .unwrap()
            .index_of(&[2, 0])
            .unwrap()] = 1.0;
        assert_eq!(r, AffineKappa::known(generator_residual(&c, &x, [2, 0])));
        assert_eq!(r.constant, 4.0);
        // the seed feeds (2, 1) through a replenishment of location 2 at rate nu
        let r21 = gbe_residual(&table, &c, (2, 1)).unwrap();
        assert_eq!(r21.constant, generator_residual(&c, &x, [2, 1]));
        assert_eq!(r21.constant, -3.0);
    }

    #[test]
    fn residual_is_linear_in_each_entry() {
        let c = cfg([0.7, 1.3], [3, 2], 1.9);
        let space = InventorySpace::new(&[3, 2]).unwrap();
        for target in space.states() {
            let mut table = ThetaTable::new(3, 2);
            let mut x = vec![0.0; space.len()];
            for s in space.states() {
                let k = s.on_hand();
                let v = if s == target { 0.37 } else { 0.0 };
                table.set(k[0], k[1], AffineKappa::known(v));
                x[space.index_of(k).unwrap()] = v;
            }
            for s in space.states() {
                let k = s.on_hand();
                let r = gbe_residual(&table, &c, (k[0], k[1])).unwrap();
                let expected = generator_residual(&c, &x, [k[0], k[1]]);
                assert!((r.constant - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn missing_entry_is_a_sequencing_error() {
        let c = cfg([1.0, 2.0], [2, 2], 3.0);
        let mut table = ThetaTable::new(2, 2);
        table.set(2, 0, AffineKappa::known(1.0));
        assert!(matches!(
            gbe_residual(&table, &c, (2, 0)),
            Err(Error::Sequencing(_))
        ));
    }

    #[test]
    fn exact_table_has_zero_residual() {
        let c = cfg([1.0, 2.0], [3, 2], 2.0);
        let theta = crate::exact_solver::solve_config_exact(&c).unwrap();
        let table = ThetaTable::from_theta(&theta).unwrap();
        assert!(max_gbe_residual(&table, &c).unwrap() < 1e-14);
    }

    #[test]
    fn homogeneous_two_by_two_matches_rational_oracle() {
        let theta = solve_theta_recursive(&cfg([1.0, 1.0], [2, 2], 1.0)).unwrap();
        // canonical order (0,0),(0,1),(0,2),(1,0),...
        let expected = [
            1.0 / 3.0,
            1.0 / 6.0,
            1.0 / 42.0,
            1.0 / 6.0,
            1.0 / 7.0,
            1.0 / 21.0,
            1.0 / 42.0,
            1.0 / 21.0,
            1.0 / 21.0,
        ];
        for (w, e) in theta.weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-14, "{w} vs {e}");
        }
        assert_eq!(theta.provenance(), Provenance::Recursive);
    }

    #[test]
    fn heterogeneous_three_by_two_matches_rational_oracle() {
        let theta = solve_theta_recursive(&cfg([1.0, 2.0], [3, 2], 2.0)).unwrap();
        let numerators = [
            1810.0, 332.0, 45.0, 2956.0, 1238.0, 180.0, 2772.0, 2210.0, 810.0, 940.0, 1410.0,
            1480.0,
        ];
        for (w, n) in theta.weights().iter().zip(numerators) {
            assert!((w - n / 16183.0).abs() < 1e-14);
        }
    }

    #[test]
    fn every_phase_resolves_kappa() {
        let sol = solve_theta_recursive_traced(&cfg([0.9, 1.6], [4, 3], 1.2)).unwrap();
        let rows: Vec<_> = sol.phases.iter().map(|p| p.row).collect();
        assert_eq!(rows, vec![3, 2, 1]);
        assert!(sol.phases.iter().all(|p| p.unresolved_after == 0));
        assert!(sol.table.is_complete());
        assert_eq!(sol.table, ThetaTable::from_theta(&sol.theta).unwrap());
        assert!(max_gbe_residual(&sol.table, &cfg([0.9, 1.6], [4, 3], 1.2)).unwrap() < 1e-12);
    }

    #[test]
    fn homogeneous_output_is_symmetric() {
        let theta = solve_theta_recursive(&cfg([1.7, 1.7], [4, 4], 0.6)).unwrap();
        for k1 in 0..=4 {
            for k2 in 0..=4 {
                let a = theta.weight(&[k1, k2]).unwrap();
                let b = theta.weight(&[k2, k1]).unwrap();
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn preconditions_point_to_other_solvers() {
        let three =
            NetworkConfig::with_constant_service(vec![1.0; 3], vec![2.0; 3], vec![2, 2, 2], 1.0)
                .unwrap();
        for bad in [
            three,
            cfg([1.0, 1.0], [3, 1], 1.0),
            cfg([1.0, 1.0], [2, 3], 1.0),
            cfg([1.0, 1.0], [1, 1], 1.0),
        ] {
            match solve_theta_recursive(&bad) {
                Err(Error::Precondition(msg)) => assert!(msg.contains("exact solver")),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
