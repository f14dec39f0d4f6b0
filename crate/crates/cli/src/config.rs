//! Run configuration: a single JSON document with one section per command.
//! Relative data paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rfp_core::driver_sim::DriverConfig;
use rfp_core::foreseeable::DimPolicy;
use rfp_core::preventable::{GridAxis, GridSpec, SequentialOptions};
use rfp_core::scenario_store::validate_categories;
use rfp_core::{ScenarioCategory, ScenarioFamily};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub categories: Vec<CategoryConfig>,
    /// Hours of driving the data were collected from.
    #[serde(default)]
    pub hours: Option<f64>,
    #[serde(default = "default_lambdas")]
    pub lambda_fs: Vec<f64>,
    #[serde(default)]
    pub evt: EvtConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub sequential: SequentialOptions,
    #[serde(default)]
    pub grids: BTreeMap<String, GridConfig>,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_lambdas() -> Vec<f64> {
    vec![0.1, 0.01]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            categories: Vec::new(),
            hours: None,
            lambda_fs: default_lambdas(),
            evt: EvtConfig::default(),
            driver: DriverConfig::default(),
            mc: McConfig::default(),
            sequential: SequentialOptions::default(),
            grids: BTreeMap::new(),
            base_seed: 0,
        }
    }
}

/// A preset id (`"lvd"`, `"cut-in"`, `"asv"`) or a full schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategorySource {
    Preset(String),
    Schema(ScenarioCategory),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryConfig {
    pub category: CategorySource,
    /// Scenario parameter CSV.
    pub data: PathBuf,
    /// Per-dimension range policy for the KDE solver; all dimensions expand by default.
    #[serde(default)]
    pub policy: Option<Vec<DimPolicy>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvtConfig {
    pub exceed_fraction: f64,
}

impl Default for EvtConfig {
    fn default() -> Self {
        EvtConfig {
            exceed_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_pilot: usize,
    pub n_is: usize,
    pub n_critical_fraction: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_pilot: 10_000,
            n_is: 10_000,
            n_critical_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisConfig {
    Values {
        name: String,
        values: Vec<f64>,
    },
    Range {
        name: String,
        start: f64,
        end: f64,
        n: usize,
    },
}

impl AxisConfig {
    fn to_axis(&self) -> GridAxis {
        match self {
            AxisConfig::Values { name, values } => GridAxis::new(name.clone(), values.clone()),
            AxisConfig::Range {
                name,
                start,
                end,
                n,
            } => GridAxis::linspace(name.clone(), *start, *end, *n),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub family: ScenarioFamily,
    pub axis1: AxisConfig,
    pub axis2: AxisConfig,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

impl GridConfig {
    pub fn to_spec(&self) -> GridSpec {
        GridSpec {
            parameter_names: ScenarioCategory::for_family(self.family).parameter_names,
            axis1: self.axis1.to_axis(),
            axis2: self.axis2.to_axis(),
            fixed: self.fixed.clone(),
        }
    }
}

/// A category with its schema resolved and its data path made absolute.
#[derive(Debug, Clone)]
pub struct ResolvedCategory {
    pub schema: ScenarioCategory,
    pub data: PathBuf,
    pub policy: Option<Vec<DimPolicy>>,
}

/// The parsed config plus the directory relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(LoadedConfig {
                config: RunConfig::default(),
                base_dir: PathBuf::from("."),
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig { config, base_dir };
        loaded.categories()?;
        Ok(loaded)
    }

    /// Checks numeric ranges; called after command-line overrides are applied.
    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(h) = c.hours {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("hours must be positive, got {h}"));
            }
        }
        if let Some(l) = c.lambda_fs.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return bad(format!("lambda_fs values must be positive, got {l}"));
        }
        if !(c.evt.exceed_fraction > 0.0 && c.evt.exceed_fraction < 1.0) {
            return bad(format!(
                "evt.exceed_fraction must lie in (0, 1), got {}",
                c.evt.exceed_fraction
            ));
        }
        if c.mc.n_pilot == 0 || c.mc.n_is == 0 {
            return bad("mc.n_pilot and mc.n_is must be at least 1".into());
        }
        if !(c.mc.n_critical_fraction > 0.0 && c.mc.n_critical_fraction < 1.0) {
            return bad(format!(
                "mc.n_critical_fraction must lie in (0, 1), got {}",
                c.mc.n_critical_fraction
            ));
        }
        c.driver.validate().map_err(rfp_core::Error::from)?;
        c.sequential.validate().map_err(rfp_core::Error::from)?;
        Ok(())
    }

    pub fn categories(&self) -> Result<Vec<ResolvedCategory>, CliError> {
        let resolved = self
            .config
            .categories
            .iter()
            .map(|entry| {
                let schema = match &entry.category {
                    CategorySource::Preset(id) => {
                        ScenarioCategory::preset(id).ok_or_else(|| {
                            CliError::Config(format!("unknown preset category {id:?}"))
                        })?
                    }
                    CategorySource::Schema(s) => s.clone(),
                };
                let data = self.base_dir.join(&entry.data);
                if !data.is_file() {
                    return Err(CliError::Config(format!(
                        "data file {} not found",
                        data.display()
                    )));
                }
                Ok(ResolvedCategory {
                    schema,
                    data,
                    policy: entry.policy.clone(),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let schemas: Vec<ScenarioCategory> = resolved.iter().map(|r| r.schema.clone()).collect();
        validate_categories(&schemas).map_err(rfp_core::Error::from)?;
        Ok(resolved)
    }

    pub fn category(&self, id: &str) -> Result<ResolvedCategory, CliError> {
        self.categories()?
            .into_iter()
            .find(|c| c.schema.id == id)
            .ok_or_else(|| CliError::Config(format!("category {id:?} is not in the config")))
    }

    pub fn hours(&self) -> Result<f64, CliError> {
        self.config
            .hours
            .ok_or_else(|| CliError::Config("config must set hours".into()))
    }
}
