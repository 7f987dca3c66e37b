//! Product-form pieces and structural checks: ergodicity, queue and
//! inventory marginals, cut identities and the permutation symmetry of
//! homogeneous networks.

use crate::error::{Error, Result};
use crate::exact_solver::ThetaMeasure;
use crate::model::{NetworkConfig, ServiceRateProfile};

/// Absolute tolerance for the identity checks on normalized measures.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LocationLoad {
    pub location: usize,
    pub lambda: f64,
    pub mu_tail: f64,
    /// `lambda / mu_tail`; the queue is stable iff this is below one.
    pub ratio: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    pub ergodic: bool,
    pub locations: Vec<LocationLoad>,
}

impl ErgodicityReport {
    pub fn describe(&self) -> String {
        self.locations
            .iter()
            .map(|l| {
                format!(
                    "location {}: lambda/mu_inf = {}/{} = {:.6} ({})",
                    l.location + 1,
                    l.lambda,
                    l.mu_tail,
                    l.ratio,
                    if l.stable { "stable" } else { "unstable" }
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// The joint process is ergodic iff `sum_n prod_{l<=n} lambda_j / mu_j(l)`
/// converges at every location. With a constant tail this is `lambda_j < mu_j^inf`.
pub fn ergodicity_check(config: &NetworkConfig) -> ErgodicityReport {
    let locations: Vec<_> = (0..config.locations())
        .map(|j| {
            let lambda = config.arrival_rate(j);
            let mu_tail = config.service(j).tail();
            let ratio = lambda / mu_tail;
            LocationLoad {
                location: j,
                lambda,
                mu_tail,
                ratio,
                stable: ratio < 1.0,
            }
        })
        .collect();
    ErgodicityReport {
        ergodic: locations.iter().all(|l| l.stable),
        locations,
    }
}

/// Stationary queue-length distribution of one location,
/// `xi_j(n) = C_j^{-1} prod_{l=1}^{n} lambda_j / mu_j(l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMarginal {
    location: usize,
    lambda: f64,
    profile: ServiceRateProfile,
    /// Unnormalized products for `n = 0..=m`, `m` = head length.
    head_products: Vec<f64>,
    tail_ratio: f64,
    normalization: f64,
}

impl QueueMarginal {
    pub fn location(&self) -> usize {
        self.location
    }

    /// `C_j`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `lambda_j / mu_j^inf`.
    pub fn tail_ratio(&self) -> f64 {
        self.tail_ratio
    }

    fn unnormalized(&self, n: usize) -> f64 {
        let m = self.head_products.len() - 1;
        if n <= m {
            self.head_products[n]
        } else {
            self.head_products[m] * self.tail_ratio.powi((n - m) as i32)
        }
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.unnormalized(n) / self.normalization
    }

    /// `P(X_j > 0)`, the fraction of time customers are present.
    pub fn busy_probability(&self) -> f64 {
        1.0 - self.prob(0)
    }

    pub fn mean(&self) -> f64 {
        let m = self.head_products.len() - 1;
        let head: f64 = self
            .head_products
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum();
        let rho = self.tail_ratio;
        let g = rho / (1.0 - rho);
        let tail = self.head_products[m] * (m as f64 * g + g / (1.0 - rho));
        (head + tail) / self.normalization
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn profile(&self) -> &ServiceRateProfile {
        &self.profile
    }
}

pub fn queue_marginal(config: &NetworkConfig, j: usize) -> Result<QueueMarginal> {
    if j >= config.locations() {
        return Err(Error::IndexOutOfRange {
            index: j,
            locations: config.locations(),
        });
    }
    let lambda = config.arrival_rate(j);
    let profile = config.service(j).clone();
    let tail_ratio = lambda / profile.tail();
    if tail_ratio >= 1.0 {
        return Err(Error::NotErgodic(format!(
            "location {}: lambda = {lambda} >= mu_inf = {}",
            j + 1,
            profile.tail()
        )));
    }
    let mut head_products = Vec::with_capacity(profile.head().len() + 1);
    head_products.push(1.0);
    let mut acc = 1.0;
    for &mu in profile.head() {
        acc *= lambda / mu;
        head_products.push(acc);
    }
    let head_sum: f64 = head_products.iter().sum();
    let normalization = head_sum + acc * tail_ratio / (1.0 - tail_ratio);
    Ok(QueueMarginal {
        location: j,
        lambda,
        profile,
        head_products,
        tail_ratio,
        normalization,
    })
}

/// Distribution of the on-hand level `Y_j` over `0..=b_j`.
pub fn inventory_marginal(theta: &ThetaMeasure, j: usize) -> Result<Vec<f64>> {
    let b = theta.base_stock();
    if j >= b.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            locations: b.len(),
        });
    }
    require_normalized(theta)?;
    let mut marginal = vec![0.0; b[j] + 1];
    for (s, w) in theta.states().iter().zip(theta.weights()) {
        marginal[s.on_hand()[j]] += w;
    }
    Ok(marginal)
}

fn require_normalized(theta: &ThetaMeasure) -> Result<()> {
    if theta.is_normalized() {
        Ok(())
    } else {
        Err(Error::Precondition("measure must be normalized".into()))
    }
}

fn require_matching(theta: &ThetaMeasure, config: &NetworkConfig) -> Result<()> {
    if theta.base_stock() != config.base_stock() {
        return Err(Error::Precondition(format!(
            "measure has b = {:?}, configuration has b = {:?}",
            theta.base_stock(),
            config.base_stock()
        )));
    }
    if config.transfer_rate().is_some_and(|beta| beta > 0.0) {
        return Err(Error::Precondition(
            "cut identities do not account for transfer flows".into(),
        ));
    }
    require_normalized(theta)
}

/// Which identity a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutFamily {
    /// Homogeneous networks, level `l` of location 1.
    Homogeneous,
    /// `P(Y1 = l) lambda1 = P(Y1 = l-1) nu` for `l <= b1 - b2`.
    FirstLowRange,
    /// Location 1 in `b1 - b2 < l < b1`, with the half-rate tie term.
    FirstMidRange,
    /// Location 1 at `l = b1`.
    FirstTop,
    /// Location 2, `l = 1..=b2`.
    Second,
    /// `P(Y1 = l) = P(Y1 = 0) (nu / lambda1)^l` for `l <= b1 - b2`.
    Geometric,
}

impl CutFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            CutFamily::Homogeneous => "homogeneous",
            CutFamily::FirstLowRange => "first_low_range",
            CutFamily::FirstMidRange => "first_mid_range",
            CutFamily::FirstTop => "first_top",
            CutFamily::Second => "second",
            CutFamily::Geometric => "geometric",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResidual {
    pub family: CutFamily,
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl CutResidual {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutReport {
    pub residuals: Vec<CutResidual>,
}

impl CutReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(CutResidual::residual)
            .fold(0.0, f64::max)
    }

    pub fn max_residual_of(&self, family: CutFamily) -> f64 {
        self.residuals
            .iter()
            .filter(|r| r.family == family)
            .map(CutResidual::residual)
            .fold(0.0, f64::max)
    }

    pub fn count(&self, family: CutFamily) -> usize {
        self.residuals.iter().filter(|r| r.family == family).count()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Level-crossing identity of location 1 in a homogeneous network:
///
/// `P(Y1 = l) lambda1 = sum_{i=1}^{J} C(J-1, i-1) nu/i *
///   P(Y_1..Y_i = l-1, Y_{i+1..J} > l-1)`
///
/// for `l = 1..=b`; the `i = J` term is `P(all = l-1) nu / J`.
pub fn check_cut_homogeneous(theta: &ThetaMeasure, config: &NetworkConfig) -> Result<CutReport> {
    if !config.is_homogeneous() {
        return Err(Error::Precondition(
            "homogeneous cut identity requires equal b and lambda".into(),
        ));
    }
    require_matching(theta, config)?;
    let j_count = config.locations();
    let b = config.base_stock()[0];
    let lambda = config.arrival_rate(0);
    let nu = config.supplier_rate();
    let y1 = inventory_marginal(theta, 0)?;

    let mut report = CutReport::default();
    for level in 1..=b {
        let below = level - 1;
        let mut rhs = 0.0;
        for i in 1..=j_count {
            let mass: f64 = theta
                .states()
                .iter()
                .zip(theta.weights())
                .filter(|(s, _)| {
                    let k = s.on_hand();
                    k[..i].iter().all(|&x| x == below) && k[i..].iter().all(|&x| x > below)
                })
                .map(|(_, w)| w)
                .sum();
            let weight = binomial((j_count - 1) as u64, (i - 1) as u64) as f64;
            rhs += mass * weight * nu / i as f64;
        }
        report.residuals.push(CutResidual {
            family: CutFamily::Homogeneous,
            level,
            lhs: y1[level] * lambda,
            rhs,
        });
    }
    Ok(report)
}

/// The four cut families for two locations with `b1 >= b2`, plus the
/// geometric relation on the low range of location 1.
pub fn check_cut_heterogeneous(theta: &ThetaMeasure, config: &NetworkConfig) -> Result<CutReport> {
    if config.locations() != 2 {
        return Err(Error::Precondition(format!(
            "heterogeneous cut identities need two locations, got {}",
            config.locations()
        )));
    }
    let (b1, b2) = (config.base_stock()[0], config.base_stock()[1]);
    if b1 < b2 {
        return Err(Error::Precondition(format!(
            "heterogeneous cut identities assume b1 >= b2, got ({b1}, {b2})"
        )));
    }
    require_matching(theta, config)?;
    let (lambda1, lambda2) = (config.arrival_rate(0), config.arrival_rate(1));
    let nu = config.supplier_rate();
    let p = |k1: usize, k2: usize| theta.weight(&[k1, k2]).unwrap_or(0.0);
    let y1 = inventory_marginal(theta, 0)?;
    let y2 = inventory_marginal(theta, 1)?;
    let gap = b1 - b2;
    let mut report = CutReport::default();

    for l in 1..=gap {
        report.residuals.push(CutResidual {
            family: CutFamily::FirstLowRange,
            level: l,
            lhs: y1[l] * lambda1,
            rhs: y1[l - 1] * nu,
        });
        report.residuals.push(CutResidual {
            family: CutFamily::Geometric,
            level: l,
            lhs: y1[l],
            rhs: y1[0] * (nu / lambda1).powi(l as i32),
        });
    }
    for l in gap + 1..b1 {
        // tie when location 2 sits at l - 1 - gap, location 1 wins above it
        let tie = l - 1 - gap;
        let wins: f64 = (tie + 1..=b2).map(|k2| p(l - 1, k2)).sum();
        report.residuals.push(CutResidual {
            family: CutFamily::FirstMidRange,
            level: l,
            lhs: y1[l] * lambda1,
            rhs: p(l - 1, tie) * 0.5 * nu + wins * nu,
        });
    }
    report.residuals.push(CutResidual {
        family: CutFamily::FirstTop,
        level: b1,
        lhs: y1[b1] * lambda1,
        rhs: p(b1 - 1, b2 - 1) * 0.5 * nu + p(b1 - 1, b2) * nu,
    });
    for l in 1..=b2 {
        let tie = gap + l - 1;
        let wins: f64 = (tie + 1..=b1).map(|k1| p(k1, l - 1)).sum();
        report.residuals.push(CutResidual {
            family: CutFamily::Second,
            level: l,
            lhs: y2[l] * lambda2,
            rhs: p(tie, l - 1) * 0.5 * nu + wins * nu,
        });
    }
    Ok(report)
}

/// `max_{sigma, k} |theta(k) - theta(sigma k)|` for a homogeneous network.
pub fn check_symmetry(theta: &ThetaMeasure, config: &NetworkConfig) -> Result<f64> {
    if !config.is_homogeneous() {
        return Err(Error::Precondition(
            "symmetry holds only for homogeneous locations".into(),
        ));
    }
    if theta.base_stock() != config.base_stock() {
        return Err(Error::Precondition(
            "measure and configuration disagree on b".into(),
        ));
    }
    max_permutation_asymmetry(theta)
}

/// Permutation asymmetry of any measure whose locations share one base-stock
/// level, without asking whether the rates are homogeneous.
pub fn max_permutation_asymmetry(theta: &ThetaMeasure) -> Result<f64> {
    let b = theta.base_stock();
    if b.iter().any(|&x| x != b[0]) {
        return Err(Error::Precondition(
            "permuting locations needs equal base-stock levels".into(),
        ));
    }
    let mut worst = 0.0f64;
    let mut permuted = vec![0usize; b.len()];
    for sigma in permutations(b.len()) {
        for (s, &w) in theta.states().iter().zip(theta.weights()) {
            let k = s.on_hand();
            for (slot, &src) in permuted.iter_mut().zip(&sigma) {
                *slot = k[src];
            }
            let other = theta.weight(&permuted).expect("permuted state lies in K");
            worst = worst.max((w - other).abs());
        }
    }
    Ok(worst)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                extend(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}
