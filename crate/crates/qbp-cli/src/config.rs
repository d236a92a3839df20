use std::path::{Path, PathBuf};

use qbp::thermal::{BoundConstants, DecayExponent};
use qbp::{EdgeFactory, GraphModel, ModelSpec, SiteId};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Stock chain `1 - 2 - ... - n` with one factory on every edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockModel {
    pub n: usize,
    #[serde(default = "qubit")]
    pub local_dim: usize,
    pub edge: EdgeFactory,
}

fn qubit() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Stock(StockModel),
    /// JSON model description; relative paths resolve against the config file.
    File(PathBuf),
}

/// The Lieb-Robinson and truncation constants; `(K, k)` always come from the fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(rename = "C", default = "one")]
    pub big_c: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default)]
    pub exponent: DecayExponent,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            alpha: 1.0,
            big_c: 1.0,
            a: 1.0,
            v: 1.0,
            exponent: DecayExponent::Derived,
        }
    }
}

impl ConstantsConfig {
    /// Completes the constants with a thermal fit. An undefined fit (fewer than two
    /// resolvable cumulants) becomes `K = 0`, `k = a`.
    pub fn with_fit(&self, fit: Option<(f64, f64)>) -> BoundConstants {
        let (k_big, k_small) = fit.unwrap_or((0.0, self.a));
        BoundConstants {
            c: self.c,
            alpha: self.alpha,
            big_c: self.big_c,
            a: self.a,
            v: self.v,
            k_big,
            k_small,
            exponent: self.exponent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelSource>,
    /// Vertex the window sweep and single-step experiment aim at; defaults to the largest leaf id.
    #[serde(default)]
    pub target: Option<SiteId>,
    /// Window sizes / blanket radii; omitted means `1..=N−1`.
    #[serde(default)]
    pub ells: Option<Vec<usize>>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default = "default_s_steps")]
    pub s_steps: Vec<usize>,
    /// Random instances for `hastings-verify` and `lemma-suite`.
    #[serde(default)]
    pub instances: Option<usize>,
    /// Largest connected `U` enumerated by `markov-audit`.
    #[serde(default = "default_max_subset")]
    pub max_subset: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_betas() -> Vec<f64> {
    vec![1.0]
}

fn default_s_steps() -> Vec<usize> {
    vec![16, 32, 64, 128]
}

fn default_max_subset() -> usize {
    2
}

/// A parsed config plus the raw bytes it came from (hashed into the manifest).
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let raw = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig {
            config,
            raw,
            base_dir,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if let Some(ells) = &self.ells {
            if ells.is_empty() {
                return bad("`ells` must not be empty");
            }
            if ells.contains(&0) {
                return bad("`ells` entries must be at least 1");
            }
        }
        if self.betas.is_empty() {
            return bad("`betas` must not be empty");
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("`betas` entries must be positive and finite");
        }
        if self.s_steps.is_empty() || self.s_steps.contains(&0) {
            return bad("`s_steps` must be a non-empty list of positive integers");
        }
        if self.instances == Some(0) {
            return bad("`instances` must be positive");
        }
        if self.max_subset == 0 {
            return bad("`max_subset` must be positive");
        }
        if self.seed.is_none() {
            return bad("a master seed is required (config `seed` or --seed)");
        }
        let k = self.constants;
        for (name, value) in [
            ("c", k.c),
            ("alpha", k.alpha),
            ("C", k.big_c),
            ("a", k.a),
            ("v", k.v),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(CliError::Config(format!(
                    "constant {name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config carries a seed")
    }

    /// Builds the model at inverse temperature 1; sweeps rescale it per β.
    pub fn build_model(&self, base_dir: &Path) -> Result<GraphModel, CliError> {
        match &self.model {
            None => Err(CliError::Config("this command needs a `model`".into())),
            Some(ModelSource::Stock(s)) => {
                if s.n < 2 {
                    return Err(CliError::Config("stock chains need n >= 2".into()));
                }
                GraphModel::chain(s.n, s.local_dim, &s.edge, 1.0).map_err(CliError::model)
            }
            Some(ModelSource::File(p)) => {
                let path = base_dir.join(p);
                let raw = std::fs::read(&path).map_err(|e| {
                    CliError::Config(format!("cannot read model {}: {e}", path.display()))
                })?;
                let spec: ModelSpec = serde_json::from_slice(&raw)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                GraphModel::from_spec(&spec).map_err(CliError::model)
            }
        }
    }

    pub fn ells_for(&self, model: &GraphModel) -> Vec<usize> {
        self.ells
            .clone()
            .unwrap_or_else(|| (1..model.num_vertices()).collect())
    }

    pub fn target(&self, model: &GraphModel) -> Result<SiteId, CliError> {
        let tree = model.tree();
        match self.target {
            Some(t) => {
                if !tree.is_leaf(t).map_err(CliError::model)? {
                    return Err(CliError::Config(format!("target {t} is not a leaf")));
                }
                Ok(t)
            }
            None => Ok(*tree
                .vertices()
                .iter()
                .rev()
                .find(|&&v| tree.is_leaf(v).unwrap_or(false))
                .expect("a tree with an edge has leaves")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefined_fit_falls_back() {
        let k = ConstantsConfig {
            a: 2.5,
            ..Default::default()
        }
        .with_fit(None);
        assert_eq!((k.k_big, k.k_small), (0.0, 2.5));
        let k = ConstantsConfig::default().with_fit(Some((3.0, 0.7)));
        assert_eq!((k.k_big, k.k_small), (3.0, 0.7));
    }

    #[test]
    fn stock_model_parses() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"model": {"stock": {"n": 3, "edge": {"factory": "heisenberg", "params": {"j": 1.0}}}}, "seed": 4}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let m = cfg.build_model(Path::new(".")).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(cfg.ells_for(&m), vec![1, 2]);
        assert_eq!(cfg.target(&m).unwrap(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"seed": 1, "elss": [1]}"#).is_err());
    }
}
