use std::path::{Path, PathBuf};

use beatstream::framing::FrameMethod;
use beatstream::models::{ModelKind, Task, TrainConfig};
use beatstream::pipeline::SynthDatasetSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a command needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Records, annotations and `manifest.csv`.
    pub dataset_dir: PathBuf,
    /// Checkpoints, histories, split manifest, frames and reports.
    pub output_dir: PathBuf,
    /// Required by `generate`.
    pub synthesis: Option<SynthDatasetSpec>,
    pub lead_index: usize,
    pub method: FrameMethod,
    pub model: ModelKind,
    pub train: TrainConfig,
    /// Cap on R-centred beats taken from each training record by the
    /// identified stream; all beats when absent.
    pub beats_per_record: Option<usize>,
    /// Identified checkpoint (typically from identity pretraining) whose
    /// feature layers initialise rhythm training of the identified stream.
    pub pretrained: Option<PathBuf>,
    /// Master seed; replaces the synthesis and training seeds when set.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            synthesis: None,
            lead_index: 0,
            method: FrameMethod::RCentered,
            model: ModelKind::Identified,
            train: TrainConfig::default(),
            beats_per_record: None,
            pretrained: None,
            seed: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<FrameMethod>,
    pub model: Option<ModelKind>,
    pub lead: Option<usize>,
}

impl PipelineConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(m) = o.model {
            self.model = m;
        }
        if let Some(l) = o.lead {
            self.lead_index = l;
        }
        if let Some(s) = self.seed {
            self.train.seed = s;
            if let Some(syn) = &mut self.synthesis {
                syn.seed = s;
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(syn) = &self.synthesis {
            syn.record_params().map_err(|e| CliError::Usage(format!("synthesis: {e}")))?;
        }
        if self.train.task == Task::Identity && self.model != ModelKind::Identified {
            return Err(CliError::Usage(format!(
                "identity pretraining applies to the identified stream, not {}",
                self.model
            )));
        }
        if self.pretrained.is_some() && self.model != ModelKind::Identified {
            return Err(CliError::Usage("`pretrained` applies only to the identified stream".into()));
        }
        if self.beats_per_record == Some(0) {
            return Err(CliError::Usage("beats_per_record must be positive".into()));
        }
        Ok(())
    }
}

/// Reads the file (or defaults), applies flags and validates.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"modle": "temporal"}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let nested = r#"{"train": {"epochs": 3, "lr": 0.1}}"#;
        assert!(serde_json::from_str::<PipelineConfig>(nested).is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut cfg: PipelineConfig = serde_json::from_str(
            r#"{"model": "temporal", "method": "chronological", "lead_index": 1, "seed": 4}"#,
        )
        .unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            method: Some(FrameMethod::RCentered),
            model: None,
            lead: Some(0),
        });
        assert_eq!(cfg.model, ModelKind::Temporal);
        assert_eq!(cfg.method, FrameMethod::RCentered);
        assert_eq!(cfg.lead_index, 0);
        assert_eq!((cfg.seed, cfg.train.seed), (Some(9), 9));
    }

    #[test]
    fn defaults_follow_training_setup() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!((cfg.train.epochs, cfg.train.batch_size), (60, 1000));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"train": {"epochs": 0}}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"model": "temporal", "train": {"task": "identity"}}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }
}
