//! Flat `key=value` configuration files and their merge with flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use meshdiff::{GeodesicBackend, LambdaParams, Mode, RegistrationConfig};

/// Keys accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "mode",
    "epsilon",
    "max_iterations",
    "levels",
    "lambda_max",
    "lambda_min",
    "sigma_scale",
    "fixed_reaction",
    "geodesic",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("--config: cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("--config: {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", k + 1))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", k + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Parsed value for `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key `{key}` = `{v}`: {e}"))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Full,
    Mr,
}

impl FromStr for ModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "mr" | "multires" => Ok(Self::Mr),
            _ => Err(format!("expected `full` or `mr`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GeodesicArg {
    Graph,
    Heat,
}

impl FromStr for GeodesicArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "graph" => Ok(Self::Graph),
            "heat" => Ok(Self::Heat),
            _ => Err(format!("expected `graph` or `heat`, got `{s}`")),
        }
    }
}

/// Registration parameters as given on the command line; unset flags fall
/// back to the config file and then to the library defaults.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RegistrationArgs {
    /// Full resolution or multi-resolution cascade.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Stop when the mean offset falls below this fraction of the template
    /// mean edge length.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration cap per level.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Number of decimated pyramid levels.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Lambda decay length in template mean edge lengths.
    #[arg(long)]
    pub sigma_scale: Option<f64>,
    /// Feed fixed-vertex offsets into the diffusion right-hand side.
    #[arg(long)]
    pub fixed_reaction: bool,
    /// Backend for the distance-to-fixed field.
    #[arg(long, value_enum)]
    pub geodesic: Option<GeodesicArg>,
    /// key=value file with defaults for the options above.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

impl RegistrationArgs {
    /// Resolves flag > file > default and validates the result.
    pub fn resolve(&self) -> Result<RegistrationConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        let d = RegistrationConfig::default();
        let mode = match self
            .mode
            .map(Ok)
            .or_else(|| file.get::<ModeArg>("mode").transpose())
            .transpose()?
        {
            Some(ModeArg::Mr) => Mode::MultiRes,
            Some(ModeArg::Full) => Mode::Full,
            None => d.mode,
        };
        let geodesic = match self
            .geodesic
            .map(Ok)
            .or_else(|| file.get::<GeodesicArg>("geodesic").transpose())
            .transpose()?
        {
            Some(GeodesicArg::Heat) => GeodesicBackend::Heat,
            Some(GeodesicArg::Graph) => GeodesicBackend::Graph,
            None => d.geodesic,
        };
        let pick = |flag: Option<f64>, key: &str, default: f64| -> Result<f64> {
            Ok(flag.or(file.get(key)?).unwrap_or(default))
        };
        let config = RegistrationConfig {
            epsilon: pick(self.epsilon, "epsilon", d.epsilon)?,
            max_iterations: self
                .max_iterations
                .or(file.get("max_iterations")?)
                .unwrap_or(d.max_iterations),
            mode,
            lambda: LambdaParams {
                max: pick(self.lambda_max, "lambda_max", d.lambda.max)?,
                min: pick(self.lambda_min, "lambda_min", d.lambda.min)?,
                sigma_scale: pick(self.sigma_scale, "sigma_scale", d.lambda.sigma_scale)?,
            },
            levels: self.levels.or(file.get("levels")?).unwrap_or(d.levels),
            fixed_reaction: self.fixed_reaction
                || file.get("fixed_reaction")?.unwrap_or(d.fixed_reaction),
            geodesic,
        };
        config.validate()?;
        Ok(config)
    }
}
