use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, Expr};
use crate::ifs::{AffineMap, BoxRegion, IfsError, IfsSystem};
use crate::measure::{SelfSimilarWeights, DEFAULT_BURN_IN};

pub const BUILTINS: [&str; 3] = ["example8", "example9-tent", "cantor3"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at `{path}`: {msg}")]
    Validation { path: String, msg: String },
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        path: path.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// The config file as written, before validation. All keys are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<MapSpec>>,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_cell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// A builtin name replaces any explicit system.
    pub fn set_builtin(&mut self, name: String) {
        self.builtin = Some(name);
        self.n = None;
        self.dimension = None;
        self.maps = None;
        self.bbox = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Collocation,
    Average,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system_name: String,
    pub system: IfsSystem,
    pub weights: SelfSimilarWeights,
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub level: usize,
    pub levels: (usize, usize),
    pub x0: Vec<f64>,
    pub samples_per_cell: usize,
    pub mode: ModeKind,
    pub mc_samples: usize,
    pub function: String,
    pub expr: Expr,
    pub output: PathBuf,
    pub echo: serde_json::Value,
}

/// Parses `A..B` (inclusive on both ends).
pub fn parse_levels(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {text:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad lower level {a:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad upper level {b:?}"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok((a, b))
}

fn build_system(raw: &RawConfig) -> Result<(String, IfsSystem), ConfigError> {
    if let Some(name) = &raw.builtin {
        if raw.maps.is_some() || raw.bbox.is_some() || raw.n.is_some() || raw.dimension.is_some() {
            return Err(invalid("builtin", "builtin cannot be combined with n/dimension/maps/box"));
        }
        let sys = IfsSystem::builtin(name).ok_or_else(|| {
            invalid("builtin", format!("unknown builtin {name:?}, expected one of {BUILTINS:?}"))
        })?;
        return Ok((name.clone(), sys));
    }
    let maps = raw
        .maps
        .as_ref()
        .ok_or_else(|| invalid("maps", "no system given: set `builtin` or `n`, `dimension`, `maps`, `box`"))?;
    let n = raw.n.ok_or_else(|| invalid("n", "missing"))?;
    let dim = raw.dimension.ok_or_else(|| invalid("dimension", "missing"))?;
    let bbox = raw.bbox.as_ref().ok_or_else(|| invalid("box", "missing"))?;
    if n != maps.len() {
        return Err(invalid("n", format!("n = {n} but {} maps given", maps.len())));
    }
    if bbox.lo.len() != dim || bbox.hi.len() != dim {
        return Err(invalid("box", format!("box corners must have {dim} coordinates")));
    }
    let ambient = BoxRegion::new(bbox.lo.clone(), bbox.hi.clone())
        .map_err(|e| invalid("box", e.to_string()))?;
    let mut affine = Vec::with_capacity(n);
    for (idx, m) in maps.iter().enumerate() {
        let path = format!("maps[{idx}]");
        if m.a.len() != dim || m.b.len() != dim {
            return Err(invalid(path, format!("map {} must be {dim}-dimensional", idx + 1)));
        }
        affine.push(AffineMap::from_rows(&m.a, &m.b).map_err(|e| invalid(path, e.to_string()))?);
    }
    let sys = IfsSystem::new(affine, ambient).map_err(|e| {
        let path = match &e {
            IfsError::Map { index, .. } | IfsError::EscapesBox { index } | IfsError::MapDimension { index, .. } => {
                format!("maps[{}]", index - 1)
            }
            _ => "maps".into(),
        };
        invalid(path, e.to_string())
    })?;
    Ok(("custom".into(), sys))
}

impl RunConfig {
    pub fn validate(raw: RawConfig) -> Result<Self, ConfigError> {
        let (system_name, system) = build_system(&raw)?;
        let n = system.n();
        let weights = match &raw.weights {
            Some(w) => {
                if w.len() != n {
                    return Err(invalid("weights", format!("{} weights for {n} maps", w.len())));
                }
                SelfSimilarWeights::new(w.clone()).map_err(|e| invalid("weights", e.to_string()))?
            }
            None => SelfSimilarWeights::hutchinson(n),
        };
        let samples = raw.samples.unwrap_or(100_000);
        if samples == 0 {
            return Err(invalid("samples", "sample count must be at least 1"));
        }
        let levels = match &raw.levels {
            Some(text) => parse_levels(text).map_err(|e| invalid("levels", e))?,
            None => (1, 8),
        };
        let x0 = raw.x0.clone().unwrap_or_else(|| system.ambient_box().center());
        if x0.len() != system.dim() || !system.ambient_box().contains(&x0, 0.0) {
            return Err(invalid("x0", "base point must lie in the ambient box"));
        }
        let mode = match raw.mode.as_deref() {
            None | Some("collocation") => ModeKind::Collocation,
            Some("average") => ModeKind::Average,
            Some(other) => {
                return Err(invalid("mode", format!("expected collocation or average, got {other:?}")))
            }
        };
        let samples_per_cell = raw.samples_per_cell.unwrap_or(crate::approx::DEFAULT_SAMPLES_PER_CELL);
        let function = raw
            .function
            .clone()
            .unwrap_or_else(|| if system.dim() == 1 { "x".into() } else { "x0".into() });
        let expr = parse_expr(&function, system.dim()).map_err(|e| invalid("function", e.to_string()))?;
        let echo = serde_json::to_value(&raw).expect("config serializes");
        Ok(Self {
            system_name,
            weights,
            samples,
            burn_in: raw.burn_in.unwrap_or(DEFAULT_BURN_IN),
            seed: raw.seed.unwrap_or(0),
            level: raw.level.unwrap_or(3),
            levels,
            x0,
            samples_per_cell,
            mode,
            mc_samples: raw.mc_samples.unwrap_or(10_000),
            function,
            expr,
            output: raw.output.clone().unwrap_or_else(|| PathBuf::from("out")),
            echo,
            system,
        })
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    RunConfig::validate(RawConfig::from_path(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn validate(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::validate(RawConfig::from_json(text)?)
    }

    #[test]
    fn builtin_example8() {
        let c = validate(r#"{"builtin": "example8"}"#).unwrap();
        assert_eq!(c.system, IfsSystem::example8());
        assert_eq!(c.system.maps()[1].apply(&[0.0]), vec![0.5]);
        assert!(c.weights.is_hutchinson());
        assert_eq!(c.x0, vec![0.5]);
    }

    #[test]
    fn builtin_cantor() {
        let c = validate(r#"{"builtin": "cantor3"}"#).unwrap();
        let m = &c.system.maps()[1];
        assert!((m.apply(&[0.0])[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.linear_part()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = validate(r#"{"builtin": "example8", "weights": [0.5, 0.6]}"#).unwrap_err();
        match err {
            ConfigError::Validation { path, msg } => {
                assert_eq!(path, "weights");
                assert!(msg.contains("sum to 1"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn explicit_system() {
        let c = validate(
            r#"{"n": 2, "dimension": 1,
                "maps": [{"A": [[0.5]], "b": [0.0]}, {"A": [[-0.5]], "b": [1.0]}],
                "box": {"lo": [0.0], "hi": [1.0]}, "levels": "2..4"}"#,
        )
        .unwrap();
        assert_eq!(c.system, IfsSystem::example9_tent());
        assert_eq!(c.levels, (2, 4));
    }

    #[test]
    fn non_contractive_map_named() {
        let err = validate(
            r#"{"n": 2, "dimension": 1,
                "maps": [{"A": [[0.5]], "b": [0.0]}, {"A": [[1.0]], "b": [0.0]}],
                "box": {"lo": [0.0], "hi": [1.0]}}"#,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("maps[1]") && text.contains("map 2 not contractive"), "{text}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = validate(r#"{"builtin": "example8", "colour": 3}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(ref m) if m.contains("colour")), "{err}");
    }

    #[test]
    fn other_validation_errors() {
        assert!(validate(r#"{"builtin": "sierpinski"}"#).is_err());
        assert!(validate(r#"{}"#).is_err());
        assert!(validate(r#"{"builtin": "example8", "x0": [2.0]}"#).is_err());
        assert!(validate(r#"{"builtin": "example8", "mode": "spline"}"#).is_err());
        assert!(validate(r#"{"builtin": "example8", "levels": "5..2"}"#).is_err());
        assert!(validate(r#"{"builtin": "example8", "function": "y"}"#).is_err());
        assert!(validate(r#"{"builtin": "example8", "n": 2}"#).is_err());
    }

    #[test]
    fn levels_parser() {
        assert_eq!(parse_levels("1..8"), Ok((1, 8)));
        assert!(parse_levels("3").is_err());
    }
}
