use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use invnet_core::analysis::QueueMarginal;
use invnet_core::{ErgodicityReport, Provenance, ThetaMeasure};
use serde::ser::Error as _;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::CliError;

/// Formats `x` with 17 significant digits, enough to reproduce every `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// A structural identity or a cross-method comparison.
    Property,
    /// A solver self-check such as the balance residual.
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub kind: CheckKind,
}

impl Check {
    pub fn property(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            kind: CheckKind::Property,
        }
    }

    pub fn numerical(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            kind: CheckKind::Numerical,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueSummary {
    pub location: usize,
    pub normalization: f64,
    pub tail_ratio: f64,
    pub busy_probability: f64,
    pub mean: f64,
}

impl From<&QueueMarginal> for QueueSummary {
    fn from(m: &QueueMarginal) -> Self {
        Self {
            location: m.location(),
            normalization: m.normalization(),
            tail_ratio: m.tail_ratio(),
            busy_probability: m.busy_probability(),
            mean: m.mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub events: u64,
    pub simulated_time: f64,
    pub seed: u64,
    pub replications: usize,
    pub n_obs: usize,
    pub theta_tv: f64,
    /// Per location, over the clipped window `0..=n_obs`.
    pub queue_tv: Vec<f64>,
    pub decoupling_tv: f64,
    pub replication_theta_tv: Vec<f64>,
}

/// Everything a command produced, independent of the output format.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub method: Option<Provenance>,
    pub notices: Vec<String>,
    pub theta: Option<ThetaMeasure>,
    pub inventory_marginals: Vec<Vec<f64>>,
    pub queues: Vec<QueueSummary>,
    pub ergodicity: Option<ErgodicityReport>,
    pub checks: Vec<Check>,
    pub simulation: Option<SimulationSummary>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn notice(&mut self, message: impl Into<String>) {
        self.notices.push(message.into());
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// 0 when every check passes, 3 if a numerical self-check failed,
    /// otherwise 2.
    pub fn exit_code(&self) -> i32 {
        if self.failures().any(|c| c.kind == CheckKind::Numerical) {
            3
        } else if self.failures().next().is_some() {
            2
        } else {
            0
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "== {} ==", self.command);
        if let Some(m) = self.method {
            let _ = writeln!(out, "method: {m}");
        }
        for n in &self.notices {
            let _ = writeln!(out, "note: {n}");
        }
        if let Some(e) = &self.ergodicity {
            let verdict = if e.ergodic { "ergodic" } else { "NOT ergodic" };
            let _ = writeln!(out, "ergodicity: {verdict} ({})", e.describe());
        }
        if let Some(theta) = &self.theta {
            let j = theta.base_stock().len();
            let _ = writeln!(out, "\ntheta (b = {:?}):", theta.base_stock());
            let mut header: Vec<String> = (1..=j).map(|i| format!("k{i}")).collect();
            header.push(format!("k{}", j + 1));
            let _ = writeln!(
                out,
                "  {}  weight",
                header.iter().map(|h| format!("{h:>4}")).collect::<String>()
            );
            for (s, w) in theta.states().iter().zip(theta.weights()) {
                let cells: String = s.as_slice().iter().map(|k| format!("{k:>4}")).collect();
                let _ = writeln!(out, "  {cells}  {w:.12}");
            }
        }
        if !self.inventory_marginals.is_empty() {
            let _ = writeln!(out, "\ninventory marginals P(Y_j = y):");
            for (j, m) in self.inventory_marginals.iter().enumerate() {
                let cells: Vec<String> = m.iter().map(|p| format!("{p:.8}")).collect();
                let _ = writeln!(out, "  location {}: [{}]", j + 1, cells.join(", "));
            }
        }
        if !self.queues.is_empty() {
            let _ = writeln!(out, "\nqueue marginals:");
            for q in &self.queues {
                let _ = writeln!(
                    out,
                    "  location {}: C = {:.10}, tail ratio = {:.10}, P(busy) = {:.10}, mean = {:.10}",
                    q.location + 1,
                    q.normalization,
                    q.tail_ratio,
                    q.busy_probability,
                    q.mean
                );
            }
        }
        if let Some(s) = &self.simulation {
            let _ = writeln!(
                out,
                "\nsimulation: {} events over {} replication(s), seed {}, n_obs {}",
                s.events, s.replications, s.seed, s.n_obs
            );
            let _ = writeln!(out, "  observed time      {:.6}", s.simulated_time);
            let _ = writeln!(out, "  TV(theta_hat, theta) {:.6}", s.theta_tv);
            for (j, tv) in s.queue_tv.iter().enumerate() {
                let _ = writeln!(out, "  TV(xi_hat_{}, xi_{})     {:.6}", j + 1, j + 1, tv);
            }
            let _ = writeln!(out, "  decoupling TV        {:.6}", s.decoupling_tv);
            if s.replication_theta_tv.len() > 1 {
                let cells: Vec<String> = s
                    .replication_theta_tv
                    .iter()
                    .map(|t| format!("{t:.4}"))
                    .collect();
                let _ = writeln!(out, "  per-replication theta TV: [{}]", cells.join(", "));
            }
        }
        if !self.checks.is_empty() {
            let _ = writeln!(out, "\nchecks:");
            for c in &self.checks {
                let _ = writeln!(
                    out,
                    "  [{}] {:<40} {:.3e} (tol {:.0e})",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let theta = self.theta.as_ref().map(|t| JsonTheta {
            base_stock: t.base_stock().to_vec(),
            provenance: t.provenance().as_str(),
            states: t
                .states()
                .iter()
                .zip(t.weights())
                .map(|(s, &w)| JsonState {
                    k: s.as_slice().to_vec(),
                    weight: Num(w),
                })
                .collect(),
        });
        let json = JsonReport {
            command: &self.command,
            method: self.method.map(|m| m.as_str()),
            notices: &self.notices,
            theta,
            inventory_marginals: self.inventory_marginals.iter().map(|m| nums(m)).collect(),
            queues: self
                .queues
                .iter()
                .map(|q| JsonQueue {
                    location: q.location + 1,
                    normalization: Num(q.normalization),
                    tail_ratio: Num(q.tail_ratio),
                    busy_probability: Num(q.busy_probability),
                    mean: Num(q.mean),
                })
                .collect(),
            ergodicity: self.ergodicity.as_ref().map(|e| JsonErgodicity {
                ergodic: e.ergodic,
                load: e.locations.iter().map(|l| Num(l.ratio)).collect(),
            }),
            checks: self
                .checks
                .iter()
                .map(|c| JsonCheck {
                    name: &c.name,
                    value: Num(c.value),
                    tolerance: Num(c.tolerance),
                    passed: c.passed(),
                })
                .collect(),
            simulation: self.simulation.as_ref().map(|s| JsonSimulation {
                events: s.events,
                simulated_time: Num(s.simulated_time),
                seed: s.seed,
                replications: s.replications,
                n_obs: s.n_obs,
                theta_tv: Num(s.theta_tv),
                queue_tv: nums(&s.queue_tv),
                decoupling_tv: Num(s.decoupling_tv),
                replication_theta_tv: nums(&s.replication_theta_tv),
            }),
        };
        serde_json::to_string_pretty(&json).map_err(|e| CliError::Numerical(format!("json: {e}")))
    }

    /// Writes the theta table to `path` and the marginals and checks next to
    /// it (`<stem>.marginals.csv`, `<stem>.checks.csv`).
    pub fn write_csv(&self, path: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        if let Some(theta) = &self.theta {
            write_file(path, &theta_csv(theta))?;
            written.push(path.to_path_buf());
        }
        let mut marginals = String::from("location,level,probability\n");
        for (j, m) in self.inventory_marginals.iter().enumerate() {
            for (y, p) in m.iter().enumerate() {
                let _ = writeln!(marginals, "{},{},{}", j + 1, y, format_number(*p));
            }
        }
        let marginals_path = path.with_extension("marginals.csv");
        write_file(&marginals_path, &marginals)?;
        written.push(marginals_path);
        let mut checks = String::from("name,value,tolerance,passed\n");
        for c in &self.checks {
            let _ = writeln!(
                checks,
                "{},{},{},{}",
                c.name,
                format_number(c.value),
                format_number(c.tolerance),
                c.passed()
            );
        }
        let checks_path = path.with_extension("checks.csv");
        write_file(&checks_path, &checks)?;
        written.push(checks_path);
        Ok(written)
    }
}

/// Columns `k1..kJ, k{J+1}, weight`, one row per state in canonical order.
pub fn theta_csv(theta: &ThetaMeasure) -> String {
    let j = theta.base_stock().len();
    let mut out: String = (1..=j + 1).map(|i| format!("k{i},")).collect();
    out.push_str("weight\n");
    for (s, w) in theta.states().iter().zip(theta.weights()) {
        for k in s.as_slice() {
            let _ = write!(out, "{k},");
        }
        let _ = writeln!(out, "{}", format_number(*w));
    }
    out
}

/// Serialized theta alone, the input for fingerprinting and round trips.
pub fn theta_json(theta: &ThetaMeasure) -> Result<String, CliError> {
    let report = Report {
        theta: Some(theta.clone()),
        ..Report::new("theta")
    };
    report.to_json()
}

/// Reads the `theta` section of a JSON report back into a measure.
pub fn read_theta_json(text: &str) -> Result<ThetaMeasure, CliError> {
    #[derive(Deserialize)]
    struct Doc {
        theta: Option<Table>,
    }
    #[derive(Deserialize)]
    struct Table {
        base_stock: Vec<usize>,
        provenance: String,
        states: Vec<Row>,
    }
    #[derive(Deserialize)]
    struct Row {
        k: Vec<usize>,
        weight: f64,
    }
    let doc: Doc =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("json: {e}")))?;
    let table = doc
        .theta
        .ok_or_else(|| CliError::Validation("json: no `theta` section".into()))?;
    let provenance: Provenance = table.provenance.parse().map_err(|_| {
        CliError::Validation(format!("json: unknown provenance `{}`", table.provenance))
    })?;
    let space = invnet_core::InventorySpace::new(&table.base_stock)?;
    let j = table.base_stock.len();
    let mut weights = vec![f64::NAN; space.len()];
    for row in &table.states {
        let index = (row.k.len() == j + 1)
            .then(|| space.index_of(&row.k[..j]))
            .flatten()
            .ok_or_else(|| CliError::Validation(format!("json: state {:?} is outside K", row.k)))?;
        weights[index] = row.weight;
    }
    Ok(ThetaMeasure::from_weights(
        &table.base_stock,
        weights,
        provenance,
    )?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawValue::from_string(format_number(self.0))
            .map_err(S::Error::custom)?
            .serialize(serializer)
    }
}

fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().map(|&x| Num(x)).collect()
}

#[derive(Serialize)]
struct JsonReport<'a> {
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'static str>,
    notices: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<JsonTheta>,
    inventory_marginals: Vec<Vec<Num>>,
    queues: Vec<JsonQueue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ergodicity: Option<JsonErgodicity>,
    checks: Vec<JsonCheck<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<JsonSimulation>,
}

#[derive(Serialize)]
struct JsonTheta {
    base_stock: Vec<usize>,
    provenance: &'static str,
    states: Vec<JsonState>,
}

#[derive(Serialize)]
struct JsonState {
    k: Vec<usize>,
    weight: Num,
}

#[derive(Serialize)]
struct JsonQueue {
    location: usize,
    normalization: Num,
    tail_ratio: Num,
    busy_probability: Num,
    mean: Num,
}

#[derive(Serialize)]
struct JsonErgodicity {
    ergodic: bool,
    load: Vec<Num>,
}

#[derive(Serialize)]
struct JsonCheck<'a> {
    name: &'a str,
    value: Num,
    tolerance: Num,
    passed: bool,
}

#[derive(Serialize)]
struct JsonSimulation {
    events: u64,
    simulated_time: Num,
    seed: u64,
    replications: usize,
    n_obs: usize,
    theta_tv: Num,
    queue_tv: Vec<Num>,
    decoupling_tv: Num,
    replication_theta_tv: Vec<Num>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(0.4), "4.0000000000000002e-1");
        assert_eq!(format_number(f64::NAN), "null");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn exit_code_prefers_numerical_failures() {
        let mut r = Report::new("t");
        r.checks.push(Check::property("a", 0.0, 1.0));
        assert_eq!(r.exit_code(), 0);
        r.checks.push(Check::property("b", 2.0, 1.0));
        assert_eq!(r.exit_code(), 2);
        r.checks.push(Check::numerical("c", f64::NAN, 1.0));
        assert_eq!(r.exit_code(), 3);
    }
}
