//! Model and experiment configuration, with their JSON forms.

use std::path::{Path, PathBuf};

use dla_core::analytics::finish_time;
use dla_core::engine::{default_max_steps, ExecutionMode};
use dla_core::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// JSON shape of a model: `{"model": "equal", "k": 2, "m": 100}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelJson {
    Equal { k: u32, m: u64 },
    Growing { k: u32, d: u64 },
    Tree { k: u32, d: u64 },
}

impl From<ModelSpec> for ModelJson {
    fn from(spec: ModelSpec) -> Self {
        match spec {
            ModelSpec::EqualLayers { k, m } => ModelJson::Equal { k, m },
            ModelSpec::GrowingLayers { k, d } => ModelJson::Growing { k, d },
            ModelSpec::CayleyTree { k, d } => ModelJson::Tree { k, d },
        }
    }
}

impl TryFrom<ModelJson> for ModelSpec {
    type Error = HarnessError;

    fn try_from(json: ModelJson) -> Result<Self, HarnessError> {
        let spec = match json {
            ModelJson::Equal { k, m } => ModelSpec::equal(k, m)?,
            ModelJson::Growing { k, d } => ModelSpec::growing(k, d)?,
            ModelJson::Tree { k, d } => ModelSpec::tree(k, d)?,
        };
        Ok(spec)
    }
}

/// Serde adapter for `ModelSpec` fields, via [`ModelJson`].
pub mod spec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(spec: &ModelSpec, s: S) -> Result<S::Ok, S::Error> {
        ModelJson::from(*spec).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ModelSpec, D::Error> {
        let json = ModelJson::deserialize(d)?;
        ModelSpec::try_from(json).map_err(serde::de::Error::custom)
    }
}

/// Builds a spec from CLI-style parts. `n` is accepted for equal layers as
/// an alternative to `m` and must be divisible by `k`.
pub fn spec_from_parts(
    model: &str,
    k: u32,
    m: Option<u64>,
    d: Option<u64>,
    n: Option<u64>,
) -> Result<ModelSpec, HarnessError> {
    let missing = |what: &str| HarnessError::Config(format!("model {model} needs --{what}"));
    let spec = match model {
        "equal" => {
            let m = match (m, n) {
                (Some(m), _) => m,
                (None, Some(n)) if k > 0 && n % u64::from(k) == 0 => n / u64::from(k),
                (None, Some(n)) => {
                    return Err(HarnessError::Config(format!(
                        "n = {n} is not a multiple of k = {k}"
                    )))
                }
                (None, None) => return Err(missing("m")),
            };
            ModelSpec::equal(k, m)?
        }
        "growing" => ModelSpec::growing(k, d.ok_or_else(|| missing("d"))?)?,
        "tree" => ModelSpec::tree(k, d.ok_or_else(|| missing("d"))?)?,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown model {other:?} (expected equal, growing or tree)"
            )))
        }
    };
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Vertex,
    Count,
}

impl From<Mode> for ExecutionMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Vertex => ExecutionMode::Vertex,
            Mode::Count => ExecutionMode::Count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

/// One simulation experiment: `trials` independent runs of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "spec_serde")]
    pub spec: ModelSpec,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Absolute snapshot steps.
    #[serde(default)]
    pub snapshot_steps: Vec<u64>,
    /// Snapshot times as multiples of the predicted finish time.
    #[serde(default)]
    pub snapshot_fractions: Vec<f64>,
    /// Defaults to `ln n`.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
    /// Defaults to `100 * ceil(T_f)`.
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn new(spec: ModelSpec, trials: u64, base_seed: u64) -> Self {
        ExperimentConfig {
            spec,
            trials,
            base_seed,
            snapshot_steps: Vec::new(),
            snapshot_fractions: Vec::new(),
            omega: None,
            mode: Mode::Vertex,
            max_steps: None,
            output: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.spec.validate()?;
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if let Some(f) = self
            .snapshot_fractions
            .iter()
            .find(|f| !(f.is_finite() && **f > 0.0))
        {
            return Err(HarnessError::Config(format!(
                "snapshot fraction {f} must be positive and finite"
            )));
        }
        if self.mode == Mode::Count && self.spec.is_tree() {
            return Err(HarnessError::Config(
                "count mode is only exact for bipartite models; trees run in vertex mode".into(),
            ));
        }
        if let Some(omega) = self.omega {
            if !(omega.is_finite() && omega > 0.0) {
                return Err(HarnessError::Config(format!(
                    "omega {omega} must be positive"
                )));
            }
        }
        if self.max_steps == Some(0) {
            return Err(HarnessError::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Sorted, deduplicated snapshot steps with fractions resolved against
    /// the predicted finish time, rounded down. Products within `1e-9` of an
    /// integer round to it, absorbing log-space error in `T_f`.
    pub fn snapshot_times(&self) -> Vec<u64> {
        let tf = finish_time(&self.spec);
        let mut times: Vec<u64> = self
            .snapshot_fractions
            .iter()
            .filter_map(|f| {
                let x = f * tf;
                let t = if (x - x.round()).abs() <= 1e-9 * x.abs() {
                    x.round()
                } else {
                    x.floor()
                };
                (t.is_finite() && t < u64::MAX as f64).then_some(t as u64)
            })
            .chain(self.snapshot_steps.iter().copied())
            .collect();
        times.sort_unstable();
        times.dedup();
        times
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
            .unwrap_or_else(|| default_max_steps(&self.spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_json_round_trip() {
        for spec in [
            ModelSpec::equal(3, 100).unwrap(),
            ModelSpec::growing(5, 20).unwrap(),
            ModelSpec::tree(12, 2).unwrap(),
        ] {
            let text = serde_json::to_string(&ModelJson::from(spec)).unwrap();
            let back: ModelJson = serde_json::from_str(&text).unwrap();
            assert_eq!(ModelSpec::try_from(back).unwrap(), spec);
        }
        let text =
            serde_json::to_string(&ModelJson::from(ModelSpec::equal(2, 5).unwrap())).unwrap();
        assert_eq!(text, r#"{"model":"equal","k":2,"m":5}"#);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let bad: ModelJson = serde_json::from_str(r#"{"model":"tree","k":3,"d":1}"#).unwrap();
        assert!(ModelSpec::try_from(bad).is_err());
        assert!(serde_json::from_str::<ModelJson>(r#"{"model":"equal","k":3}"#).is_err());
        assert!(serde_json::from_str::<ModelJson>(r#"{"model":"ring","k":3,"m":4}"#).is_err());
    }

    #[test]
    fn spec_from_cli_parts() {
        assert_eq!(
            spec_from_parts("equal", 2, None, None, Some(200_000)).unwrap(),
            ModelSpec::equal(2, 100_000).unwrap()
        );
        assert!(spec_from_parts("equal", 3, None, None, Some(100)).is_err());
        assert!(spec_from_parts("growing", 3, Some(4), None, None).is_err());
        assert_eq!(
            spec_from_parts("tree", 4, None, Some(3), None).unwrap(),
            ModelSpec::tree(4, 3).unwrap()
        );
    }

    #[test]
    fn experiment_config_checks() {
        let spec = ModelSpec::tree(3, 2).unwrap();
        let mut cfg = ExperimentConfig::new(spec, 10, 0);
        assert!(cfg.validate().is_ok());
        cfg.mode = Mode::Count;
        assert!(cfg.validate().is_err());
        cfg.mode = Mode::Vertex;
        cfg.snapshot_fractions = vec![0.5, 0.0];
        assert!(cfg.validate().is_err());
        cfg.snapshot_fractions.clear();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snapshot_fractions_resolve_against_finish_time() {
        // T_f = 20 for k = 1, m = 200.
        let mut cfg = ExperimentConfig::new(ModelSpec::equal(1, 200).unwrap(), 1, 0);
        cfg.snapshot_fractions = vec![1.0, 0.25, 0.5];
        cfg.snapshot_steps = vec![10, 3];
        assert_eq!(cfg.snapshot_times(), vec![3, 5, 10, 20]);
    }

    #[test]
    fn config_file_parses() {
        let text = r#"{
            "spec": {"model": "growing", "k": 5, "d": 20},
            "trials": 200,
            "base_seed": 7,
            "snapshot_fractions": [0.5, 1.0],
            "mode": "count",
            "output": {"path": "out.csv"}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.spec, ModelSpec::growing(5, 20).unwrap());
        assert_eq!(cfg.mode, Mode::Count);
        assert_eq!(cfg.output.unwrap().format, Format::Csv);
    }
}
