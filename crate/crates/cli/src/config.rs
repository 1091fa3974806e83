//! Run configuration: TOML file, then command-line flags on top.
//!
//! ```toml
//! [run]
//! seed = 20240601
//! samples = 200000
//! jobs = 4
//! format = "json"      # or "csv"
//! out = "result.json"
//!
//! [grids]
//! t = [0.25, 0.5, 0.75]
//! n = [1, 2, 4, 8, 16, 32]
//!
//! [quadrature]          # any subset of the fields
//! abs_tol = 1e-13
//! rel_tol = 1e-11
//!
//! [regressor]
//! method = "local-linear"
//! bandwidth = "silverman"   # or { fixed = 0.2 }, { silverman-scaled = 0.5 }
//! bins = 64
//! tail = 0.0
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steininfo::numerics::mc::MCSpec;
use steininfo::numerics::regress::ConditionalRegressor;
use steininfo::representations::representation_regressor;
use steininfo::QuadratureSpec;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub grids: GridSection,
    pub quadrature: Option<toml::Table>,
    pub regressor: Option<ConditionalRegressor>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Resolved settings shared by every subcommand; echoed in the output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub models: Vec<String>,
    pub seed: u64,
    pub samples: usize,
    /// `None` in canonical output: the worker count never changes results.
    pub jobs: Option<usize>,
    pub t_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub quadrature: QuadratureSpec,
    pub regressor: ConditionalRegressor,
    pub format: Format,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub canonical: bool,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    pub fn mc(&self) -> MCSpec {
        MCSpec::new(self.seed, self.samples).with_streams(self.workers)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.samples == 0 {
            return Err(CliError::Usage("samples must be positive".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Usage("jobs must be positive".into()));
        }
        if self.t_grid.is_empty() || self.n_grid.is_empty() {
            return Err(CliError::Usage("grids must be non-empty".into()));
        }
        for name in &self.models {
            steininfo::models::model_by_name::<f64>(name)?;
        }
        Ok(())
    }
}

/// Overlays the `[quadrature]` table on the defaults.
pub fn quadrature_from(table: Option<toml::Table>) -> Result<QuadratureSpec, CliError> {
    let Some(table) = table else { return Ok(QuadratureSpec::default()) };
    let mut base = toml::Table::try_from(QuadratureSpec::default()).map_err(|e| CliError::Usage(e.to_string()))?;
    for (k, v) in table {
        if !base.contains_key(&k) {
            return Err(CliError::Usage(format!("unknown quadrature key `{k}`")));
        }
        base.insert(k, v);
    }
    base.try_into().map_err(|e: toml::de::Error| CliError::Usage(format!("quadrature: {e}")))
}

pub fn default_regressor() -> ConditionalRegressor {
    representation_regressor()
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses `a,b,c`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| format!("bad list entry `{p}`")))
        .collect()
}

/// Parses `a:b:n` into `n` evenly spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else { return Err(format!("grid `{s}` is not a:b:n")) };
    let a: f64 = a.parse().map_err(|_| format!("bad grid start `{a}`"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad grid end `{b}`"))?;
    let n: usize = n.parse().map_err(|_| format!("bad grid count `{n}`"))?;
    if n < 2 || !(a < b) {
        return Err(format!("grid `{s}` needs a < b and n >= 2"));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = parse_grid("-1:1:5").unwrap();
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(parse_grid("1:0:5").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn file_sections() {
        let f: FileConfig = toml::from_str("[run]\nseed = 7\n[grids]\nn = [1, 2]\n[quadrature]\nmax_depth = 30\n").unwrap();
        assert_eq!(f.run.seed, Some(7));
        assert_eq!(f.grids.n, Some(vec![1, 2]));
        let q = quadrature_from(f.quadrature).unwrap();
        assert_eq!(q.max_depth, 30);
        assert!(toml::from_str::<FileConfig>("[run]\nsed = 7\n").is_err());
        let bad: FileConfig = toml::from_str("[quadrature]\ndepth = 3\n").unwrap();
        assert!(quadrature_from(bad.quadrature).is_err());
    }
}
