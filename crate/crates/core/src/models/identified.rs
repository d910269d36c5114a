use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::init::{constant, he_uniform};
use super::{Classifier, ModelError, Result};
use crate::framing::{BeatFrame, FRAME_LEN};
use crate::nn::{Graph, Mode, NnError, ParamStore, Var};
use crate::scalar::Scalar;

/// Layer sizes of the beat CNN:
/// conv-pool-conv-pool-conv-pool-conv-dropout-fc-fc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiedSpec {
    pub input_len: usize,
    pub conv_channels: [usize; 4],
    pub kernel: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub classes: usize,
}

impl IdentifiedSpec {
    pub fn new(classes: usize) -> Self {
        Self {
            input_len: FRAME_LEN,
            conv_channels: [16, 32, 64, 64],
            kernel: 5,
            dropout: 0.5,
            hidden: 128,
            classes,
        }
    }

    /// Length after each of the four convolutions (pooling follows the
    /// first three).
    pub fn feature_lengths(&self) -> Result<[usize; 4]> {
        let mut len = self.input_len;
        let mut out = [0; 4];
        for (layer, slot) in out.iter_mut().enumerate() {
            if len < self.kernel {
                return Err(ModelError::Config(format!(
                    "input length {} too short for conv layer {}",
                    self.input_len,
                    layer + 1
                )));
            }
            len = len - self.kernel + 1;
            *slot = len;
            if layer < 3 {
                if len < 3 {
                    return Err(ModelError::Config(format!(
                        "input length {} too short for pooling layer {}",
                        self.input_len,
                        layer + 1
                    )));
                }
                len = (len - 3) / 2 + 1;
            }
        }
        Ok(out)
    }

    /// Width of the flattened last feature map.
    pub fn flatten_width(&self) -> Result<usize> {
        Ok(self.feature_lengths()?[3] * self.conv_channels[3])
    }

    pub fn layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let mut v = Vec::new();
        let mut c_in = 1;
        for (i, &c) in self.conv_channels.iter().enumerate() {
            v.push((format!("conv{}.weight", i + 1), vec![c, c_in, self.kernel]));
            v.push((format!("conv{}.bias", i + 1), vec![c]));
            c_in = c;
        }
        v.push(("fc1.weight".into(), vec![self.hidden, self.flatten_width()?]));
        v.push(("fc1.bias".into(), vec![self.hidden]));
        v.push(("fc2.weight".into(), vec![self.classes, self.hidden]));
        v.push(("fc2.bias".into(), vec![self.classes]));
        Ok(v)
    }
}

/// Single-beat 1D CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedStream<T> {
    pub spec: IdentifiedSpec,
    params: ParamStore<T>,
}

impl<T: Scalar> IdentifiedStream<T> {
    /// He-initialised feature layers and a zero classifier, so a fresh
    /// model predicts the uniform distribution.
    pub fn new<R: Rng + ?Sized>(spec: IdentifiedSpec, rng: &mut R) -> Result<Self> {
        if spec.classes < 2 {
            return Err(ModelError::Config("need at least 2 classes".into()));
        }
        let mut params = ParamStore::new();
        for (name, shape) in spec.layout()? {
            if name.starts_with("fc2") || name.ends_with("bias") {
                constant(&mut params, &name, &shape, 0.0)?;
            } else {
                let fan_in = shape[1..].iter().product();
                he_uniform(&mut params, &name, &shape, fan_in, rng)?;
            }
        }
        Ok(Self { spec, params })
    }

    pub fn zeroed(spec: IdentifiedSpec) -> Result<Self> {
        let mut params = ParamStore::new();
        for (name, shape) in spec.layout()? {
            params.zeros(&name, &shape)?;
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: IdentifiedSpec, params: ParamStore<T>) -> Result<Self> {
        params.check_layout(&spec.layout()?)?;
        Ok(Self { spec, params })
    }

    /// Keeps every feature layer and replaces the classifier with a fresh
    /// zero head for `classes` outputs.
    pub fn with_new_head(&self, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(ModelError::Config("need at least 2 classes".into()));
        }
        let spec = IdentifiedSpec { classes, ..self.spec.clone() };
        let mut params = ParamStore::new();
        for (name, shape) in spec.layout()? {
            match self.params.get(&name) {
                Some(p) if !name.starts_with("fc2") => {
                    params.insert(&name, &shape, p.data.clone())?;
                }
                _ => {
                    params.zeros(&name, &shape)?;
                }
            }
        }
        Ok(Self { spec, params })
    }
}

impl<T: Scalar> Classifier<T> for IdentifiedStream<T> {
    type Input = BeatFrame<T>;

    fn classes(&self) -> usize {
        self.spec.classes
    }

    fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    fn build(
        &self,
        g: &mut Graph<T>,
        vars: &[Var],
        input: &BeatFrame<T>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Var, Var)> {
        if input.samples.len() != self.spec.input_len {
            return Err(NnError::Shape {
                op: "identified_forward",
                msg: format!("frame has {} samples, expected {}", input.samples.len(), self.spec.input_len),
            }
            .into());
        }
        let mut x = g.constant(input.samples.clone(), &[1, self.spec.input_len])?;
        for layer in 0..4 {
            x = g.conv1d(x, vars[2 * layer], vars[2 * layer + 1])?;
            x = g.relu(x);
            if layer < 3 {
                x = g.avgpool1d(x)?;
            }
        }
        let flat = g.flatten(x)?;
        let dropped = g.dropout(flat, self.spec.dropout, mode, rng)?;
        let hidden = g.fully_connected(dropped, vars[8], vars[9])?;
        let hidden = g.relu(hidden);
        let logits = g.fully_connected(hidden, vars[10], vars[11])?;
        Ok((logits, hidden))
    }
}
