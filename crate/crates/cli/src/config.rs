//! Run configuration read from a TOML file.
//!
//! ```toml
//! version = 1
//! data = "data/GDPC1.csv"
//! column = "GDPC1"
//! yoy = true
//! output = "out"
//! seed = 20180530
//! catalogue = "builtin"          # "builtin", "vague", or a JSON file of view specs
//! # scenarios = "scenarios.csv"  # replaces the bundled supervisory scenarios
//!
//! [plan]
//! t0 = "1948Q1"
//! first_end = "1967Q4"
//! last_end = "2016Q4"
//! window = 40
//! horizon = 1
//! # density = "kernel"         # kernel-smoothed draws instead of the exact mixture
//!
//! [sampler]
//! burn_in = 1000
//! keep = 1000
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use viewpool::domain::{Quarter, ViewSpec};
use viewpool::evaluator::{BacktestPlan, Method};
use viewpool::forecaster::DensityMode;
use viewpool::pooler::{OptimizerConfig, ViewCatalogue};
use viewpool::sampler::{BridgeConfig, SamplerConfig};
use viewpool::series_io::LoadOptions;
use viewpool::views::{build_fed_views, build_vague_views, ScenarioTable};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub data: PathBuf,
    #[serde(default)]
    pub column: Option<String>,
    #[serde(default)]
    pub yoy: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_catalogue")]
    pub catalogue: String,
    #[serde(default)]
    pub scenarios: Option<PathBuf>,
    pub plan: PlanSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub bridge: Option<BridgeConfig>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub t0: Quarter,
    pub first_end: Quarter,
    pub last_end: Quarter,
    pub window: usize,
    #[serde(default = "one")]
    pub horizon: usize,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub rolling_width: Option<usize>,
    #[serde(default)]
    pub flat_equal_prior: bool,
    #[serde(default)]
    pub fan_methods: Option<Vec<String>>,
    #[serde(default)]
    pub density: DensityMode,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub burn_in: usize,
    pub keep: usize,
    #[serde(default = "one")]
    pub thin: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            burn_in: d.burn_in,
            keep: d.keep,
            thin: d.thin,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_catalogue() -> String {
    "builtin".into()
}

fn one() -> usize {
    1
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| viewpool::Error::Invalid(format!("config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            bail!(viewpool::Error::Invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data);
        if let Some(s) = cfg.scenarios.as_mut() {
            resolve(s);
        }
        if !matches!(cfg.catalogue.as_str(), "builtin" | "vague") {
            let mut p = PathBuf::from(&cfg.catalogue);
            resolve(&mut p);
            cfg.catalogue = p.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            column: self.column.clone(),
            start: None,
            end: None,
            yoy: self.yoy,
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            burn_in: self.sampler.burn_in,
            keep: self.sampler.keep,
            thin: self.sampler.thin,
            seed: self.seed,
        }
    }

    pub fn to_plan(&self) -> Result<BacktestPlan> {
        let catalogue = load_catalogue(&self.catalogue, self.scenarios.as_deref())?;
        let p = &self.plan;
        let mut plan = BacktestPlan::new(p.t0, p.first_end, p.last_end, p.window, p.horizon, catalogue);
        plan.sampler = self.sampler_config();
        if let Some(b) = self.bridge {
            plan.bridge = b;
        }
        if let Some(o) = self.optimizer {
            plan.optimizer = o;
        }
        if let Some(m) = &p.methods {
            plan.methods = parse_methods(m)?;
        }
        if let Some(m) = &p.fan_methods {
            plan.fan_methods = parse_methods(m)?;
        }
        if let Some(w) = p.rolling_width {
            plan.rolling_width = w;
        }
        plan.flat_equal_prior = p.flat_equal_prior;
        plan.density = p.density;
        Ok(plan)
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    Ok(names
        .iter()
        .map(|s| s.parse::<Method>())
        .collect::<viewpool::Result<Vec<_>>>()?)
}

/// `builtin` is the 13-view catalogue, `vague` its five vague views; anything else is a
/// JSON array of view specifications.
pub fn load_catalogue(spec: &str, scenarios: Option<&Path>) -> Result<ViewCatalogue> {
    let views: Vec<ViewSpec> = match spec {
        "builtin" => {
            let table = match scenarios {
                Some(p) => {
                    let f = std::fs::File::open(p)
                        .with_context(|| format!("opening scenarios {}", p.display()))?;
                    ScenarioTable::from_csv(f)?
                }
                None => ScenarioTable::bundled(),
            };
            let mut v = build_vague_views(5, 5);
            v.extend(build_fed_views(&table, &[0.9, 0.0, 0.0, 0.0, 0.0], 1e-5, 6)?);
            v
        }
        "vague" => build_vague_views(5, 5),
        path => {
            let f = std::fs::File::open(path).with_context(|| format!("opening catalogue {path}"))?;
            serde_json::from_reader(std::io::BufReader::new(f))
                .map_err(|e| viewpool::Error::Invalid(format!("catalogue {path}: {e}")))?
        }
    };
    Ok(ViewCatalogue::new(views)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
data = "gdp.csv"
[plan]
t0 = "1948Q1"
first_end = "1967Q4"
last_end = "2016Q4"
window = 40
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.data, dir.path().join("gdp.csv"));
        let plan = cfg.to_plan().unwrap();
        assert_eq!(plan.catalogue.len(), 13);
        assert_eq!(plan.horizon, 1);
        assert_eq!(plan.sampler.keep, 1000);
        assert_eq!(plan.evaluation_len(), 158);
        assert_eq!(plan.methods.len(), Method::ALL.len());
        assert_eq!(plan.density, DensityMode::Mixture);
    }

    #[test]
    fn kernel_density_is_opt_in() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, format!("{MINIMAL}density = \"kernel\"\n")).unwrap();
        let plan = RunConfig::load(&path).unwrap().to_plan().unwrap();
        assert_eq!(plan.density, DensityMode::Kernel);
    }

    #[test]
    fn rejects_unknown_version_and_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL.replace("version = 1", "version = 2")).unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::write(&path, format!("{MINIMAL}\nbogus = 3\n")).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn method_lists_parse() {
        let m = parse_methods(&["pi2".into(), "W1".into(), "ar-rolling".into()]).unwrap();
        assert_eq!(m, vec![Method::Pi2, Method::W1, Method::ArRolling]);
        assert!(parse_methods(&["nope".into()]).is_err());
    }
}
