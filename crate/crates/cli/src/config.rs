use std::path::Path;

use invnet_core::{NetworkConfig, ServiceRateProfile};
use serde::Deserialize;

use crate::CliError;

/// On-disk network description.
///
/// ```toml
/// J = 2
/// lambda = [1.0, 1.0]
/// b = [1, 1]
/// nu = 1.0
/// mu = [{ tail = 2.0 }, { head = [0.5], tail = 2.0 }]
/// # beta = 0.5
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "J")]
    pub locations: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<ServiceSpec>,
    pub b: Vec<usize>,
    pub nu: f64,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    #[serde(default)]
    pub head: Vec<f64>,
    pub tail: f64,
}

impl ConfigFile {
    pub fn into_network(self) -> Result<NetworkConfig, CliError> {
        let j = self.locations;
        for (field, len) in [
            ("lambda", self.lambda.len()),
            ("mu", self.mu.len()),
            ("b", self.b.len()),
        ] {
            if len != j {
                return Err(CliError::Validation(format!(
                    "`{field}`: expected {j} entries (J = {j}), found {len}"
                )));
            }
        }
        let mu = self
            .mu
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                ServiceRateProfile::new(s.head, s.tail)
                    .map_err(|e| CliError::Validation(format!("`mu[{i}]`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let config = NetworkConfig::new(self.lambda, mu, self.b, self.nu)?;
        match self.beta {
            Some(beta) => Ok(config.with_transfer(beta)?),
            None => Ok(config),
        }
    }
}

pub fn parse_config(text: &str) -> Result<NetworkConfig, CliError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    file.into_network()
}

pub fn load_config(path: &Path) -> Result<NetworkConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
