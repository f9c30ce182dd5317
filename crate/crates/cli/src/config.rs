//! Experiment configuration: a JSON document with `model`, `experiment`,
//! `numeric` and `output` blocks. Unknown keys are rejected and every
//! parameter is re-checked against the owning module before a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stable_fields::kernels::{Fractional, LatticeKernel};
use stable_fields::{KernelSpec, StabilityIndex};

/// A configuration problem located at a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    IidDelta,
    LatticeMa,
    Lfsm,
    LfsmIncrement,
    Hfsm,
    HfsmIncrement,
    Embedded,
    ConstantField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub tag: ModelTag,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    /// Field dimension d.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Effective dimension of an embedded model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Coefficient table (`i_1 … i_d value` per line), relative to the
    /// configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Bn,
    Moments,
    Frechet,
    Holder,
    Modulus,
    Chaining,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    /// Directory of earlier runs, for `report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    /// Single window size for `frechet`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Dyadic level: grid resolution 2^level for path studies, chain level
    /// n for `chaining`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    /// Quadrature tolerance for b_n.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// KS threshold for `frechet`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Worker threads, 0 = all cores.
    #[serde(default)]
    pub threads: usize,
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_threshold() -> f64 {
    0.05
}

impl Default for NumericBlock {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty numeric block")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelBlock,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub numeric: NumericBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Parses configuration text, reporting the failing field path.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        err(&path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    /// Canonical JSON: all defaults explicit, fixed key order.
    pub fn canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A validated configuration with its model built.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub model: KernelSpec,
}

fn dyadic(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl Validated {
    pub fn n_grid(&self) -> Vec<usize> {
        if let Some(g) = &self.config.numeric.n_grid {
            return g.clone();
        }
        match self.config.experiment.kind {
            ExperimentKind::Bn if self.model.dim() > 1 => dyadic(2, 8),
            ExperimentKind::Bn => dyadic(4, 12),
            _ => match self.model {
                KernelSpec::HfsmIncrement(_) | KernelSpec::LfsmIncrement(_) => dyadic(4, 10),
                _ => dyadic(4, 12),
            },
        }
    }

    pub fn beta(&self) -> f64 {
        self.config.numeric.beta.unwrap_or(self.model.alpha().value() / 4.0)
    }

    pub fn replicates(&self) -> usize {
        self.config.numeric.replicates.unwrap_or(match self.config.experiment.kind {
            ExperimentKind::Holder | ExperimentKind::Modulus => 200,
            ExperimentKind::Chaining => 500,
            _ => 2000,
        })
    }

    pub fn level(&self) -> u32 {
        self.config.numeric.level.unwrap_or(match self.config.experiment.kind {
            ExperimentKind::Chaining => 6,
            _ => 16,
        })
    }

    /// Six dyadic lags from 8 grid steps upward unless given.
    pub fn h_grid(&self) -> Vec<f64> {
        if let Some(h) = &self.config.numeric.h_grid {
            return h.clone();
        }
        let m = self.level() as i32;
        ((m - 8)..=(m - 3)).map(|k| 2f64.powi(-k)).collect()
    }

    pub fn gamma(&self) -> f64 {
        self.config.numeric.gamma.unwrap_or(match self.config.experiment.kind {
            ExperimentKind::Chaining => 0.5,
            _ => 1.0,
        })
    }

    pub fn theta2(&self) -> f64 {
        self.config.numeric.theta2.unwrap_or(self.model.dim() as f64)
    }

    pub fn frechet_n(&self) -> usize {
        self.config.numeric.n.unwrap_or(4096)
    }
}

fn build_model(m: &ModelBlock, base_dir: &Path) -> Result<KernelSpec, ConfigError> {
    let alpha = StabilityIndex::new(m.alpha)
        .and_then(|a| a.require_model())
        .map_err(|e| err("model.alpha", e.to_string()))?;
    let fractional = || -> Result<Fractional, ConfigError> {
        let h = m.hurst.ok_or_else(|| err("model.hurst", "required for fractional models"))?;
        Fractional::new(alpha, h).map_err(|e| err("model.hurst", e.to_string()))
    };
    let lattice = |dim: Option<usize>| -> Result<LatticeKernel, ConfigError> {
        let file = m
            .kernel_file
            .as_ref()
            .ok_or_else(|| err("model.kernel_file", "required for lattice moving averages"))?;
        let path = base_dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| err("model.kernel_file", format!("{}: {e}", path.display())))?;
        let k = LatticeKernel::parse(alpha, &text).map_err(|e| err("model.kernel_file", e.to_string()))?;
        if let Some(d) = dim {
            if k.dim() != d {
                return Err(err("model.kernel_file", format!("table has dimension {}, expected {d}", k.dim())));
            }
        }
        Ok(k)
    };
    let dim = |field: &str, v: Option<usize>| -> Result<usize, ConfigError> {
        match v {
            Some(0) => Err(err(field, "must be positive")),
            Some(d) => Ok(d),
            None => Err(err(field, "required for this model")),
        }
    };
    let no_hurst = || -> Result<(), ConfigError> {
        match m.hurst {
            Some(_) => Err(err("model.hurst", "only fractional models take a Hurst index")),
            None => Ok(()),
        }
    };
    match m.tag {
        ModelTag::IidDelta => {
            no_hurst()?;
            KernelSpec::iid(alpha, dim("model.d", m.d)?).map_err(|e| err("model", e.to_string()))
        }
        ModelTag::ConstantField => {
            no_hurst()?;
            KernelSpec::constant(alpha, dim("model.d", m.d)?).map_err(|e| err("model", e.to_string()))
        }
        ModelTag::LatticeMa => {
            no_hurst()?;
            Ok(KernelSpec::LatticeMa(lattice(m.d)?))
        }
        ModelTag::Embedded => {
            no_hurst()?;
            let d = dim("model.d", m.d)?;
            let p = dim("model.p", m.p)?;
            let base = if m.kernel_file.is_some() {
                KernelSpec::LatticeMa(lattice(Some(p))?)
            } else {
                KernelSpec::iid(alpha, p).map_err(|e| err("model.p", e.to_string()))?
            };
            KernelSpec::embedded(d, base).map_err(|e| err("model.p", e.to_string()))
        }
        ModelTag::Lfsm | ModelTag::LfsmIncrement | ModelTag::Hfsm | ModelTag::HfsmIncrement => {
            if m.d.is_some_and(|d| d != 1) {
                return Err(err("model.d", "fractional models are one-dimensional"));
            }
            let f = fractional()?;
            Ok(match m.tag {
                ModelTag::Lfsm => KernelSpec::Lfsm(f),
                ModelTag::LfsmIncrement => KernelSpec::LfsmIncrement(f),
                ModelTag::Hfsm => KernelSpec::Hfsm(f),
                _ => KernelSpec::HfsmIncrement(f),
            })
        }
    }
}

fn positive_grid(path: &str, grid: &[usize]) -> Result<(), ConfigError> {
    if grid.is_empty() || grid.contains(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err(path, "must be strictly increasing positive integers"));
    }
    Ok(())
}

/// Builds the model and checks every parameter the experiment uses.
/// Relative kernel files resolve against `base_dir`.
pub fn validate(config: ExperimentConfig, base_dir: &Path) -> Result<Validated, ConfigError> {
    let model = build_model(&config.model, base_dir)?;
    let v = Validated { config, model };
    let num = &v.config.numeric;
    let a = v.model.alpha().value();
    if let Some(g) = &num.n_grid {
        positive_grid("numeric.n_grid", g)?;
    }
    if !(num.tolerance > 0.0 && num.tolerance < 1.0) {
        return Err(err("numeric.tolerance", "must lie in (0, 1)"));
    }
    if v.config.output.formats.is_empty() {
        return Err(err("output.formats", "at least one format is needed"));
    }
    let process = matches!(v.model, KernelSpec::Lfsm(_) | KernelSpec::Hfsm(_));
    match v.config.experiment.kind {
        ExperimentKind::Bn => {
            if process {
                return Err(err("model.tag", "b_n is defined for stationary fields; use the increment model"));
            }
        }
        ExperimentKind::Moments => {
            if process {
                return Err(err("model.tag", "maximal moments need a stationary field; use the increment model"));
            }
            let b = v.beta();
            if !(b > 0.0 && b < a) {
                return Err(err("numeric.beta", format!("{b} is outside (0, alpha = {a})")));
            }
            if v.replicates() < 100 {
                return Err(err("numeric.replicates", "at least 100 replicates are needed"));
            }
            if v.n_grid().len() < 4 {
                return Err(err("numeric.n_grid", "a growth fit needs at least 4 window sizes"));
            }
        }
        ExperimentKind::Frechet => {
            if !v.model.is_dissipative() || process {
                return Err(err(
                    "model.tag",
                    format!("{} is not dissipative; its normalized maxima have no Frechet limit", v.model.tag()),
                ));
            }
            if v.replicates() < 500 {
                return Err(err("numeric.replicates", "at least 500 replicates are needed"));
            }
            if v.frechet_n() == 0 {
                return Err(err("numeric.n", "must be positive"));
            }
            if !(num.threshold > 0.0 && num.threshold < 1.0) {
                return Err(err("numeric.threshold", "must lie in (0, 1)"));
            }
        }
        ExperimentKind::Holder | ExperimentKind::Modulus | ExperimentKind::Chaining => {
            if !process {
                return Err(err("model.tag", "path studies need lfsm or hfsm"));
            }
            let level = v.level();
            if !(1..=20).contains(&level) {
                return Err(err("numeric.level", "must lie in 1..=20"));
            }
            let h = v.h_grid();
            if v.config.experiment.kind != ExperimentKind::Chaining && h.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(err("numeric.h_grid", "lags must lie in (0, 1)"));
            }
            let g = v.gamma();
            if !(g > 0.0 && g < a) {
                return Err(err("numeric.gamma", format!("{g} is outside (0, alpha = {a})")));
            }
            let hurst = v.model.hurst().expect("fractional model");
            if matches!(v.model, KernelSpec::Lfsm(_)) && hurst <= 1.0 / a {
                return Err(err(
                    "model.hurst",
                    format!("LFSM paths are unbounded unless H > 1/alpha = {}", 1.0 / a),
                ));
            }
            match v.config.experiment.kind {
                ExperimentKind::Holder if v.replicates() < 50 => {
                    return Err(err("numeric.replicates", "a Hölder fit needs at least 50 paths"))
                }
                ExperimentKind::Modulus if v.theta2() >= a * hurst => {
                    return Err(err(
                        "numeric.theta2",
                        format!("{} >= alpha H = {}; the modulus bound does not apply", v.theta2(), a * hurst),
                    ))
                }
                ExperimentKind::Chaining if v.replicates() < 2 => {
                    return Err(err("numeric.replicates", "at least 2 replicates are needed"))
                }
                _ => {}
            }
        }
        ExperimentKind::Report => {
            if v.config.experiment.source.is_none() {
                return Err(err("experiment.source", "required for report"));
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const IID: &str = r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "bn"}}"#;

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let e = parse(r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1, "colour": 3}, "experiment": {"kind": "bn"}}"#)
            .unwrap_err();
        assert_eq!(e.path, "model.colour");
        let e = parse(r#"{"model": {"tag": "iid_delta", "alpha": 1.2}, "experiment": {"kind": "bn"}, "numeric": {"beta": "x"}}"#)
            .unwrap_err();
        assert_eq!(e.path, "numeric.beta");
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse(IID).unwrap();
        let text = c.canonical();
        let again = parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical(), text);
        assert!(text.contains("\"tolerance\""));
    }

    #[test]
    fn semantic_checks_name_the_field() {
        let dir = Path::new(".");
        let c = parse(r#"{"model": {"tag": "lfsm", "alpha": 1.5, "hurst": 1.2}, "experiment": {"kind": "holder"}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "model.hurst");
        let c = parse(r#"{"model": {"tag": "iid_delta", "alpha": 1.2, "d": 1}, "experiment": {"kind": "moments"}, "numeric": {"beta": 1.5}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "numeric.beta");
        let c = parse(r#"{"model": {"tag": "constant_field", "alpha": 1.2, "d": 1}, "experiment": {"kind": "frechet"}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "model.tag");
        let c = parse(r#"{"model": {"tag": "lfsm", "alpha": 1.5, "hurst": 0.5}, "experiment": {"kind": "holder"}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "model.hurst");
        let c = parse(r#"{"model": {"tag": "lfsm", "alpha": 1.5, "hurst": 0.8}, "experiment": {"kind": "modulus"}, "numeric": {"theta2": 1.3}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "numeric.theta2");
        let c = parse(r#"{"model": {"tag": "iid_delta", "alpha": 2.5, "d": 1}, "experiment": {"kind": "bn"}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "model.alpha");
        let c = parse(r#"{"model": {"tag": "embedded", "alpha": 1.2, "d": 2}, "experiment": {"kind": "bn"}}"#).unwrap();
        assert_eq!(validate(c, dir).unwrap_err().path, "model.p");
    }

    #[test]
    fn defaults() {
        let v = validate(parse(IID).unwrap(), Path::new(".")).unwrap();
        assert_eq!(v.n_grid(), dyadic(4, 12));
        assert_eq!(v.beta(), 0.3);
        assert_eq!(v.config.numeric.seed, 0);
        let c = parse(r#"{"model": {"tag": "lfsm", "alpha": 1.8, "hurst": 0.8}, "experiment": {"kind": "holder"}}"#).unwrap();
        let v = validate(c, Path::new(".")).unwrap();
        let h = v.h_grid();
        assert_eq!(h.len(), 6);
        assert_eq!(h[0], 2f64.powi(-8));
        assert_eq!(h[5], 2f64.powi(-13));
    }
}
