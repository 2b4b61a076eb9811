use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::ToleranceConfig;
use crate::hamiltonian::{builtin, default_region, BuiltinParams, HamiltonianModel, ModelError, Region};
use crate::resonance::DEFAULT_RES_TOL;

pub const SEED_ENV: &str = "KAMND_SEED";
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_MAX_NORM: i64 = 5;
/// Largest model dimension accepted from configuration.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no model given; use --model, --expr or --model-json")]
    NoModel,
    #[error("more than one model source given ({0})")]
    ConflictingModels(String),
    #[error("bad region `{text}`: {reason}")]
    BadRegion { text: String, reason: String },
    #[error("bad number list `{text}`: {reason}")]
    BadList { text: String, reason: String },
    #[error("region {region} is not inside the model domain {domain}")]
    RegionOutsideDomain { region: String, domain: String },
    #[error("{name} must be {what}, got {value}")]
    OutOfRange { name: &'static str, what: &'static str, value: String },
    #[error("unknown output format `{0}` (expected json, csv or svg)")]
    BadFormat(String),
    #[error("{SEED_ENV}=`{0}` is not an unsigned integer")]
    BadSeedEnv(String),
    #[error("config file {path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("model file {path}: {source}")]
    ModelFile { path: PathBuf, source: std::io::Error },
    #[error("--{flag} only applies to {applies}")]
    Inapplicable { flag: &'static str, applies: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            _ => Err(ConfigError::BadFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        })
    }
}

/// Where the Hamiltonian comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<Vec<f64>>,
    },
    Expr {
        expr: String,
        dim: usize,
    },
    Json {
        path: PathBuf,
    },
}

impl ModelSource {
    pub fn load(&self) -> Result<HamiltonianModel, ConfigError> {
        match self {
            ModelSource::Builtin { name, dim, omega } => {
                let params = BuiltinParams {
                    dim: *dim,
                    omega: omega.clone(),
                };
                Ok(builtin(name, &params)?)
            }
            ModelSource::Expr { expr, dim } => Ok(HamiltonianModel::parse(expr, *dim)?),
            ModelSource::Json { path } => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::ModelFile {
                    path: path.clone(),
                    source,
                })?;
                Ok(HamiltonianModel::from_json_str(&text)?)
            }
        }
    }
}

/// One layer of settings: command-line flags or a TOML config file. Every
/// field is optional; [`resolve`] merges the layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub model: Option<String>,
    pub expr: Option<String>,
    pub model_json: Option<PathBuf>,
    pub dim: Option<usize>,
    /// Frequencies of the `linear` builtin, `"1,1.5"`.
    pub omega: Option<String>,
    /// `"lo:hi,lo:hi"`; a single interval applies to every axis.
    pub region: Option<String>,
    /// `"x1,x2"`.
    pub point: Option<String>,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub max_norm: Option<i64>,
    pub tol_det: Option<f64>,
    pub tol_rank: Option<f64>,
    pub tol_russmann: Option<f64>,
    pub tol_res: Option<f64>,
    pub fd_step: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Comma-separated subset of `json,csv,svg`.
    pub format: Option<String>,
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn has_model(&self) -> bool {
        self.model.is_some() || self.expr.is_some() || self.model_json.is_some()
    }

    /// Field-wise `self` over `lower`. A model source named in `self`
    /// comes with its own `dim` and `omega`; otherwise `self` may still
    /// override `dim` and `omega` of the source in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        let (model, expr, model_json, dim, omega) = if self.has_model() {
            (self.model, self.expr, self.model_json, self.dim, self.omega)
        } else {
            (lower.model, lower.expr, lower.model_json, self.dim.or(lower.dim), self.omega.or(lower.omega))
        };
        Settings {
            model,
            expr,
            model_json,
            dim,
            omega,
            region: self.region.or(lower.region),
            point: self.point.or(lower.point),
            grid: self.grid.or(lower.grid),
            samples: self.samples.or(lower.samples),
            max_norm: self.max_norm.or(lower.max_norm),
            tol_det: self.tol_det.or(lower.tol_det),
            tol_rank: self.tol_rank.or(lower.tol_rank),
            tol_russmann: self.tol_russmann.or(lower.tol_russmann),
            tol_res: self.tol_res.or(lower.tol_res),
            fd_step: self.fd_step.or(lower.fd_step),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
        }
    }
}

/// Fully resolved run configuration; embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Option<ModelSource>,
    pub region: Option<Region>,
    pub point: Option<Vec<f64>>,
    pub tol: ToleranceConfig,
    pub res_tol: f64,
    pub max_norm: i64,
    /// Nodes per axis for scans and webs.
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    pub fd_step: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
}

/// Default nodes per axis for a scan in dimension `d`.
pub fn default_grid(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        3 => 40,
        _ => 12,
    }
}

/// Parse `"lo:hi,lo:hi,..."`. A single interval is repeated `dim` times.
pub fn parse_region(text: &str, dim: usize) -> Result<Region, ConfigError> {
    let bad = |reason: String| ConfigError::BadRegion {
        text: text.to_string(),
        reason,
    };
    let mut bounds = Vec::new();
    for part in text.split(',') {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| bad(format!("interval `{}` is not lo:hi", part.trim())))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("`{}`: {e}", s.trim())))
        };
        bounds.push([parse(lo)?, parse(hi)?]);
    }
    if bounds.len() == 1 && dim > 1 {
        bounds = vec![bounds[0]; dim];
    }
    if bounds.len() != dim {
        return Err(bad(format!("{} intervals for dimension {dim}", bounds.len())));
    }
    Region::new(bounds).map_err(|e| bad(e.to_string()))
}

/// Parse a comma-separated list of finite reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |reason: String| ConfigError::BadList {
        text: text.to_string(),
        reason,
    };
    let out = text
        .split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().map_err(|e| bad(format!("`{}`: {e}", s.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("`{}` is not finite", s.trim())))
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(out)
}

fn parse_formats(text: &str) -> Result<Vec<Format>, ConfigError> {
    let mut f = text.split(',').map(Format::from_str).collect::<Result<Vec<_>, _>>()?;
    f.sort();
    f.dedup();
    Ok(f)
}

fn positive<T: PartialOrd + Default + fmt::Display>(name: &'static str, v: T) -> Result<T, ConfigError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(ConfigError::OutOfRange {
            name,
            what: "positive",
            value: v.to_string(),
        })
    }
}

fn dimension(d: usize) -> Result<usize, ConfigError> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(d)
    } else {
        Err(ConfigError::OutOfRange {
            name: "dimension",
            what: "between 1 and 8",
            value: d.to_string(),
        })
    }
}

fn unit_interval(name: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::OutOfRange {
            name,
            what: "in (0, 1)",
            value: v.to_string(),
        })
    }
}

fn model_source(s: &Settings) -> Result<Option<ModelSource>, ConfigError> {
    let given: Vec<&str> = [
        s.model.as_ref().map(|_| "model"),
        s.expr.as_ref().map(|_| "expr"),
        s.model_json.as_ref().map(|_| "model-json"),
    ]
    .into_iter()
    .flatten()
    .collect();
    if given.len() > 1 {
        return Err(ConfigError::ConflictingModels(given.join(", ")));
    }
    let omega = s.omega.as_deref().map(parse_list).transpose()?;
    if omega.is_some() && s.model.as_deref() != Some("linear") {
        return Err(ConfigError::Inapplicable {
            flag: "omega",
            applies: "the linear builtin",
        });
    }
    if let (Some(w), Some(d)) = (&omega, s.dim) {
        if w.len() != d {
            return Err(ConfigError::OutOfRange {
                name: "omega length",
                what: "equal to --dim",
                value: w.len().to_string(),
            });
        }
    }
    Ok(if let Some(name) = &s.model {
        Some(ModelSource::Builtin {
            name: name.clone(),
            dim: s.dim.map(dimension).transpose()?,
            omega,
        })
    } else if let Some(expr) = &s.expr {
        let dim = match s.dim {
            Some(d) => d,
            // infer from the highest variable index
            None => crate::hamiltonian::parse_expr(expr, usize::MAX)
                .ok()
                .and_then(|e| e.max_var())
                .map_or(1, |v| v.saturating_add(1)),
        };
        let dim = dimension(dim)?;
        Some(ModelSource::Expr { expr: expr.clone(), dim })
    } else if let Some(path) = &s.model_json {
        if s.dim.is_some() {
            return Err(ConfigError::Inapplicable {
                flag: "dim",
                applies: "builtin and expression models",
            });
        }
        Some(ModelSource::Json { path: path.clone() })
    } else {
        None
    })
}

/// Merge flags over the config file, fill the seed from `KAMND_SEED`
/// (passed in as `env_seed`) and then from defaults, and validate.
pub fn resolve(flags: Settings, file: Option<Settings>, env_seed: Option<&str>) -> Result<RunConfig, ConfigError> {
    let s = flags.over(file.unwrap_or_default());
    let source = model_source(&s)?;
    let model = source.as_ref().map(ModelSource::load).transpose()?;
    if let Some(m) = &model {
        if m.dim > MAX_DIM {
            return Err(ConfigError::OutOfRange {
                name: "dimension",
                what: "between 1 and 8",
                value: m.dim.to_string(),
            });
        }
    }

    let region = match (&model, &s.region) {
        (Some(m), Some(text)) => {
            let r = parse_region(text, m.dim)?;
            if !r.is_subset_of(&m.domain) {
                return Err(ConfigError::RegionOutsideDomain {
                    region: r.to_string(),
                    domain: m.domain.to_string(),
                });
            }
            Some(r)
        }
        (Some(m), None) => Some(default_region(m)),
        (None, Some(text)) => Some(parse_region(text, text.split(',').count())?),
        (None, None) => None,
    };
    let point = s.point.as_deref().map(parse_list).transpose()?;

    let tol = ToleranceConfig {
        det_rel: unit_interval("tol-det", s.tol_det.unwrap_or(ToleranceConfig::default().det_rel))?,
        rank_rel: unit_interval("tol-rank", s.tol_rank.unwrap_or(ToleranceConfig::default().rank_rel))?,
        russmann_rel: unit_interval(
            "tol-russmann",
            s.tol_russmann.unwrap_or(ToleranceConfig::default().russmann_rel),
        )?,
    };
    let seed = match (s.seed, env_seed) {
        (Some(seed), _) => seed,
        (None, Some(text)) => text
            .trim()
            .parse()
            .map_err(|_| ConfigError::BadSeedEnv(text.to_string()))?,
        (None, None) => 0,
    };
    let dim = model.as_ref().map_or(2, |m| m.dim);
    let grid = s.grid.unwrap_or_else(|| default_grid(dim));
    if grid < 2 {
        return Err(ConfigError::OutOfRange {
            name: "grid",
            what: "at least 2",
            value: grid.to_string(),
        });
    }
    Ok(RunConfig {
        model: source,
        region,
        point,
        tol,
        res_tol: unit_interval("tol-res", s.tol_res.unwrap_or(DEFAULT_RES_TOL))?,
        max_norm: positive("max-norm", s.max_norm.unwrap_or(DEFAULT_MAX_NORM))?,
        grid,
        samples: positive("samples", s.samples.unwrap_or(DEFAULT_SAMPLES))?,
        seed,
        fd_step: s.fd_step.map(|h| positive("fd-step", h)).transpose()?,
        out: s.out,
        formats: match &s.format {
            Some(f) => parse_formats(f)?,
            None => vec![Format::Json, Format::Csv, Format::Svg],
        },
    })
}

impl RunConfig {
    pub fn load_model(&self) -> Result<HamiltonianModel, ConfigError> {
        self.model.as_ref().ok_or(ConfigError::NoModel)?.load()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
