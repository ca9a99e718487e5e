//! Run configuration: the bundled defaults, an optional user file merged on
//! top, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use mehler_core::experiments::TestFunctionFamily;
use mehler_core::{Grid, GridFunction, SemigroupSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");
pub const OUT_DIR_ENV: &str = "MEHLER_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_width: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplySection {
    pub t: f64,
    pub f: String,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSection {
    pub lambda: f64,
    pub f: String,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormSection {
    pub kind: String,
    pub f: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub t_set: Option<Vec<f64>>,
    pub lambda_set: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub spec: SpecSection,
    pub grid: GridSection,
    pub density: DensitySection,
    pub apply: ApplySection,
    pub resolvent: ResolventSection,
    pub seminorm: SeminormSection,
    pub suite: SuiteSection,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError::new(origin, e.message().to_string()))
}

impl RunConfig {
    /// Bundled defaults with `user` (a TOML document) merged on top.
    pub fn from_layers(user: Option<(&str, &Path)>) -> Result<Self, ConfigError> {
        let mut table = parse_table(DEFAULT_CONFIG, "default config")?;
        if let Some((text, path)) = user {
            merge(&mut table, parse_table(text, &path.display().to_string())?);
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new("config", e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Self::from_layers(None),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new(p.display().to_string(), e.to_string()))?;
                Self::from_layers(Some((&text, p)))
            }
        }
    }

    /// Validates every section that any command reads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = self.semigroup_spec()?;
        self.grid_for(&spec)?;
        positive("density.t", self.density.t)?;
        positive("apply.t", self.apply.t)?;
        positive("resolvent.lambda", self.resolvent.lambda)?;
        InputFunction::parse("apply.f", &self.apply.f, self.apply.beta)?;
        InputFunction::parse("resolvent.f", &self.resolvent.f, self.resolvent.beta)?;
        InputFunction::parse("seminorm.f", &self.seminorm.f, self.seminorm.beta)?;
        SeminormKind::parse(&self.seminorm.kind)?;
        if let Some(alpha) = self.seminorm.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(ConfigError::new("seminorm.alpha", format!("must lie in (0, 1), got {alpha}")));
            }
        }
        for (field, set) in [("seminorm.t_set", &self.seminorm.t_set), ("seminorm.lambda_set", &self.seminorm.lambda_set)] {
            if let Some(v) = set {
                if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(ConfigError::new(field, "must be a nonempty list of positive numbers"));
                }
            }
        }
        Ok(())
    }

    pub fn semigroup_spec(&self) -> Result<SemigroupSpec, ConfigError> {
        let len = self.spec.a.len();
        let dim = (1..=3).find(|d| d * d == len).ok_or_else(|| {
            ConfigError::new("spec.a", format!("needs 1, 4 or 9 row-major entries, got {len}"))
        })?;
        if self.spec.q.len() != len {
            return Err(ConfigError::new(
                "spec.q",
                format!("needs {len} entries to match spec.a, got {}", self.spec.q.len()),
            ));
        }
        SemigroupSpec::from_rows(dim, &self.spec.a, &self.spec.q, self.spec.s).map_err(|e| {
            let field = match e {
                mehler_core::Error::InvalidArgument(ref m) if m.contains("stability") || m.contains(" s ") => "spec.s",
                mehler_core::Error::InvalidArgument(ref m) if m.contains('Q') => "spec.q",
                _ => "spec",
            };
            ConfigError::new(field, e.to_string())
        })
    }

    pub fn grid_for(&self, spec: &SemigroupSpec) -> Result<Grid, ConfigError> {
        let dim = spec.dim();
        let widen = |field: &str, len: usize| -> Result<(), ConfigError> {
            if len == 1 || len == dim {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("needs 1 or {dim} entries, got {len}")))
            }
        };
        widen("grid.half_width", self.grid.half_width.len())?;
        widen("grid.points", self.grid.points.len())?;
        let half = (0..dim).map(|i| self.grid.half_width[i.min(self.grid.half_width.len() - 1)]).collect();
        let points = (0..dim).map(|i| self.grid.points[i.min(self.grid.points.len() - 1)]).collect();
        Grid::new(half, points).map_err(|e| ConfigError::new("grid", e.to_string()))
    }

    /// SHA-256 of the configuration, output location excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive, got {v}")))
    }
}

/// Named inputs for `apply`, `resolvent` and `seminorm`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputFunction {
    Constant(f64),
    Family(TestFunctionFamily),
}

pub const FUNCTION_NAMES: &str = "const1, cos, gaussian-bump, step, rational, weierstrass";

impl InputFunction {
    pub fn parse(field: &str, name: &str, beta: Option<f64>) -> Result<Self, ConfigError> {
        let f = match name {
            "const1" => Self::Constant(1.0),
            "cos" => Self::Family(TestFunctionFamily::Cosine),
            "gaussian-bump" => Self::Family(TestFunctionFamily::GaussianBump),
            "step" => Self::Family(TestFunctionFamily::Step),
            "rational" => Self::Family(TestFunctionFamily::RationalDecay),
            "weierstrass" => {
                let beta = beta.ok_or_else(|| ConfigError::new(field, "weierstrass needs beta"))?;
                Self::Family(TestFunctionFamily::weierstrass(beta).map_err(|e| ConfigError::new(field, e.to_string()))?)
            }
            other => {
                return Err(ConfigError::new(
                    field,
                    format!("unknown function {other:?}; expected one of {FUNCTION_NAMES}"),
                ))
            }
        };
        Ok(f)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Family(fam) => fam.eval(x),
        }
    }

    pub fn sample(&self, grid: &Grid) -> mehler_core::Result<GridFunction> {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeminormKind {
    Sup,
    Holder,
    Zygmund,
    SemigroupHolder,
    ResolventHolder,
    Flow,
}

impl SeminormKind {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "sup" => Self::Sup,
            "holder" => Self::Holder,
            "zygmund" => Self::Zygmund,
            "semigroup-holder" => Self::SemigroupHolder,
            "resolvent-holder" => Self::ResolventHolder,
            "flow" => Self::Flow,
            other => {
                return Err(ConfigError::new(
                    "seminorm.kind",
                    format!(
                        "unknown kind {other:?}; expected sup, holder, zygmund, semigroup-holder, resolvent-holder or flow"
                    ),
                ))
            }
        })
    }

    pub fn needs_alpha(&self) -> bool {
        !matches!(self, Self::Sup | Self::Zygmund)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = RunConfig::load(None).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.semigroup_spec().unwrap().dim(), 1);
        assert_eq!(cfg.grid_for(&cfg.semigroup_spec().unwrap()).unwrap().len(), 4096);
    }

    #[test]
    fn user_layer_overrides_and_reports_fields() {
        let p = Path::new("user.toml");
        let cfg = RunConfig::from_layers(Some(("[spec]\ns = 0.8\n", p))).unwrap();
        assert_eq!(cfg.spec.s, 0.8);
        assert_eq!(cfg.spec.a, vec![0.0]);

        let bad = RunConfig::from_layers(Some(("[spec]\ns = 1.5\n", p))).unwrap();
        assert_eq!(bad.validate().unwrap_err().field, "spec.s");
        let bad = RunConfig::from_layers(Some(("[spec]\na = [0.0, 1.0]\n", p))).unwrap();
        assert_eq!(bad.validate().unwrap_err().field, "spec.a");
        let bad = RunConfig::from_layers(Some(("[grid]\npoints = [100]\n", p))).unwrap();
        assert_eq!(bad.validate().unwrap_err().field, "grid");
        let bad = RunConfig::from_layers(Some(("[apply]\nf = \"sinc\"\n", p))).unwrap();
        assert_eq!(bad.validate().unwrap_err().field, "apply.f");
        assert!(RunConfig::from_layers(Some(("[spec]\nbogus = 1\n", p))).is_err());
        assert!(RunConfig::from_layers(Some(("not toml [", p))).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::load(None).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
