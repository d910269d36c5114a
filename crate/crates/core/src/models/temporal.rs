use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::init::{constant, uniform};
use super::{Classifier, ModelError, Result};
use crate::framing::{FrameSequence, FRAME_LEN, SEQUENCE_LEN};
use crate::nn::{lstm_step, Graph, LstmVars, Mode, NnError, ParamStore, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalSpec {
    pub input: usize,
    pub hidden: usize,
    pub steps: usize,
    pub classes: usize,
}

impl TemporalSpec {
    pub fn new(classes: usize) -> Self {
        Self { input: FRAME_LEN, hidden: 128, steps: SEQUENCE_LEN, classes }
    }

    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let gate = vec![self.hidden, self.hidden + self.input];
        let mut v: Vec<(String, Vec<usize>)> = ["f", "i", "c", "o"]
            .iter()
            .map(|g| (format!("lstm.w_{g}"), gate.clone()))
            .collect();
        v.extend(["f", "i", "c", "o"].iter().map(|g| (format!("lstm.b_{g}"), vec![self.hidden])));
        v.push(("fc.weight".into(), vec![self.classes, self.hidden]));
        v.push(("fc.bias".into(), vec![self.classes]));
        v
    }
}

/// LSTM over a sequence of beat frames; the last hidden state feeds a
/// linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalStream<T> {
    pub spec: TemporalSpec,
    params: ParamStore<T>,
}

impl<T: Scalar> TemporalStream<T> {
    /// Gate weights `U(-1/sqrt(H), 1/sqrt(H))`, forget bias 1, other biases
    /// and the classifier zero.
    pub fn new<R: Rng + ?Sized>(spec: TemporalSpec, rng: &mut R) -> Result<Self> {
        if spec.classes < 2 {
            return Err(ModelError::Config("need at least 2 classes".into()));
        }
        let bound = 1.0 / (spec.hidden as f64).sqrt();
        let mut params = ParamStore::new();
        for (name, shape) in spec.layout() {
            match name.as_str() {
                n if n.starts_with("lstm.w_") => uniform(&mut params, n, &shape, bound, rng)?,
                "lstm.b_f" => constant(&mut params, &name, &shape, 1.0)?,
                n => constant(&mut params, n, &shape, 0.0)?,
            };
        }
        Ok(Self { spec, params })
    }

    pub fn zeroed(spec: TemporalSpec) -> Result<Self> {
        let mut params = ParamStore::new();
        for (name, shape) in spec.layout() {
            params.zeros(&name, &shape)?;
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: TemporalSpec, params: ParamStore<T>) -> Result<Self> {
        params.check_layout(&spec.layout())?;
        Ok(Self { spec, params })
    }
}

impl<T: Scalar> Classifier<T> for TemporalStream<T> {
    type Input = FrameSequence<T>;

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
        input: &FrameSequence<T>,
        _mode: Mode,
        _rng: &mut dyn RngCore,
    ) -> Result<(Var, Var)> {
        let shape_err = |msg: String| -> ModelError {
            NnError::Shape { op: "temporal_forward", msg }.into()
        };
        if input.frames.len() != self.spec.steps {
            return Err(shape_err(format!(
                "sequence has {} frames, expected {}",
                input.frames.len(),
                self.spec.steps
            )));
        }
        let cell = LstmVars {
            w_f: vars[0],
            w_i: vars[1],
            w_c: vars[2],
            w_o: vars[3],
            b_f: vars[4],
            b_i: vars[5],
            b_c: vars[6],
            b_o: vars[7],
        };
        let hdim = self.spec.hidden;
        let mut h = g.constant(vec![T::zero(); hdim], &[hdim])?;
        let mut c = h;
        for frame in &input.frames {
            if frame.samples.len() != self.spec.input {
                return Err(shape_err(format!(
                    "frame has {} samples, expected {}",
                    frame.samples.len(),
                    self.spec.input
                )));
            }
            let x = g.constant(frame.samples.clone(), &[self.spec.input])?;
            (h, c) = lstm_step(g, &cell, x, h, c)?;
        }
        let logits = g.fully_connected(h, vars[8], vars[9])?;
        Ok((logits, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::{BeatFrame, FrameMethod};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sequence(seed: u64) -> FrameSequence<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..SEQUENCE_LEN)
            .map(|_| {
                let mut f = BeatFrame::zeros("r", 0);
                f.samples = (0..FRAME_LEN).map(|_| rng.random_range(-1.5..1.5)).collect();
                f
            })
            .collect();
        FrameSequence { frames, label: 0, method: FrameMethod::Chronological, real_frames: 10 }
    }

    #[test]
    fn zero_parameters_predict_uniform() {
        let m = TemporalStream::<f64>::zeroed(TemporalSpec::new(3)).unwrap();
        let f = m.forward(&sequence(0)).unwrap();
        assert!(f.probs.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(f.penultimate, vec![0.0; 128]);
    }

    #[test]
    fn order_matters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = TemporalStream::<f64>::new(TemporalSpec::new(2), &mut rng).unwrap();
        for p in m.params_mut().iter_mut() {
            for v in &mut p.data {
                *v = rng.random_range(-0.2..0.2);
            }
        }
        let seq = sequence(1);
        let mut permuted = seq.clone();
        permuted.frames[..9].reverse();
        let a = m.forward(&seq).unwrap();
        let b = m.forward(&permuted).unwrap();
        let diff = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff > 1e-9, "{diff}");
    }

    #[test]
    fn wrong_sequence_length_rejected() {
        let m = TemporalStream::<f64>::zeroed(TemporalSpec::new(2)).unwrap();
        let mut seq = sequence(2);
        seq.frames.pop();
        assert!(m.forward(&seq).is_err());
    }
}
