//! The two classification streams, their late fusion, and training.

mod fusion;
mod identified;
mod init;
mod temporal;
mod train;

pub use fusion::{
    fuse_average, fuse_fc_forward, fusion_probs, joint_loss_graph, stack_features, FusionHead,
    FUSION_INPUT,
};
pub use identified::{IdentifiedSpec, IdentifiedStream};
pub use temporal::{TemporalSpec, TemporalStream};
pub use train::{
    evaluate, history_to_csv, train, EpochRecord, Evaluation, Example, Task, TrainConfig, TrainOutcome,
};

use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{softmax, Graph, Mode, NnError, ParamStore, Var};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("data error: {0}")]
    Data(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Identified,
    Temporal,
    FusionAvg,
    FusionFc,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Identified => "identified",
            ModelKind::Temporal => "temporal",
            ModelKind::FusionAvg => "fusion_avg",
            ModelKind::FusionFc => "fusion_fc",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identified" => Ok(ModelKind::Identified),
            "temporal" => Ok(ModelKind::Temporal),
            "fusion_avg" => Ok(ModelKind::FusionAvg),
            "fusion_fc" => Ok(ModelKind::FusionFc),
            other => Err(format!(
                "unknown model {other:?} (expected identified, temporal, fusion_avg or fusion_fc)"
            )),
        }
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    pub probs: Vec<T>,
    pub penultimate: Vec<T>,
}

/// A network that maps one input to class logits.
pub trait Classifier<T: Scalar> {
    type Input;

    fn classes(&self) -> usize;
    fn params(&self) -> &ParamStore<T>;
    fn params_mut(&mut self) -> &mut ParamStore<T>;

    /// Records the forward pass in `g` using parameter handles `vars` (in
    /// store order) and returns `(logits, penultimate)`.
    fn build(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        input: &Self::Input,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Var, Var)>;

    /// Evaluation-mode forward pass.
    fn forward(&self, input: &Self::Input) -> Result<Forward<T>> {
        let mut g = Graph::new();
        let vars = self.params().bind(&mut g, false);
        // Evaluation mode draws no random numbers.
        let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let (logits, pen) = self.build(&mut g, &vars, input, Mode::Eval, &mut unused)?;
        Ok(Forward { probs: softmax(g.value(logits)), penultimate: g.value(pen).to_vec() })
    }

    /// Most probable class and the class probabilities.
    fn predict(&self, input: &Self::Input) -> Result<(usize, Vec<T>)> {
        let f = self.forward(input)?;
        Ok((argmax(&f.probs), f.probs))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
