use rand::RngCore;

use super::init::constant;
use super::{Classifier, Forward, IdentifiedStream, ModelError, Result, TemporalStream};
use crate::framing::{BeatFrame, FrameSequence};
use crate::nn::{softmax, Graph, Mode, NnError, ParamStore, Var};
use crate::scalar::Scalar;

/// Width of the stacked penultimate features of both streams.
pub const FUSION_INPUT: usize = 256;

/// Elementwise mean of two probability vectors.
pub fn fuse_average<T: Scalar>(p1: &[T], p2: &[T]) -> Result<Vec<T>> {
    if p1.len() != p2.len() {
        return Err(NnError::Shape {
            op: "fuse_average",
            msg: format!("{} vs {} classes", p1.len(), p2.len()),
        }
        .into());
    }
    let half = T::lit(0.5);
    Ok(p1.iter().zip(p2).map(|(&a, &b)| (a + b) * half).collect())
}

/// Linear classifier over `[identified penultimate, temporal penultimate]`.
/// The streams themselves stay frozen; the head is trained on their cached
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead<T> {
    pub classes: usize,
    pub input: usize,
    params: ParamStore<T>,
}

impl<T: Scalar> FusionHead<T> {
    pub fn layout(classes: usize, input: usize) -> Vec<(String, Vec<usize>)> {
        vec![
            ("fusion.weight".into(), vec![classes, input]),
            ("fusion.bias".into(), vec![classes]),
        ]
    }

    /// Zero-initialised head (uniform predictions until trained).
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(ModelError::Config("need at least 2 classes".into()));
        }
        let mut params = ParamStore::new();
        for (name, shape) in Self::layout(classes, FUSION_INPUT) {
            constant(&mut params, &name, &shape, 0.0)?;
        }
        Ok(Self { classes, input: FUSION_INPUT, params })
    }

    pub fn from_params(classes: usize, params: ParamStore<T>) -> Result<Self> {
        params.check_layout(&Self::layout(classes, FUSION_INPUT))?;
        Ok(Self { classes, input: FUSION_INPUT, params })
    }
}

impl<T: Scalar> Classifier<T> for FusionHead<T> {
    type Input = Vec<T>;

    fn classes(&self) -> usize {
        self.classes
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
        input: &Vec<T>,
        _mode: Mode,
        _rng: &mut dyn RngCore,
    ) -> Result<(Var, Var)> {
        if input.len() != self.input {
            return Err(NnError::Shape {
                op: "fuse_fc_forward",
                msg: format!("{} stacked features, expected {}", input.len(), self.input),
            }
            .into());
        }
        let x = g.constant(input.clone(), &[self.input])?;
        let logits = g.fully_connected(x, vars[0], vars[1])?;
        Ok((logits, x))
    }
}

/// Concatenates the two penultimate vectors.
pub fn stack_features<T: Scalar>(pen1: &[T], pen2: &[T]) -> Vec<T> {
    pen1.iter().chain(pen2).copied().collect()
}

/// Runs both streams and the fusion head on one record.
pub fn fuse_fc_forward<T: Scalar>(
    identified: &IdentifiedStream<T>,
    temporal: &TemporalStream<T>,
    head: &FusionHead<T>,
    frame: &BeatFrame<T>,
    sequence: &FrameSequence<T>,
) -> Result<Forward<T>> {
    let a = identified.forward(frame)?;
    let b = temporal.forward(sequence)?;
    head.forward(&stack_features(&a.penultimate, &b.penultimate))
}

/// Records the full fused network in one graph, with the streams bound as
/// non-trainable, and returns the loss node plus the three handle sets.
#[doc(hidden)]
#[allow(clippy::too_many_arguments)]
pub fn joint_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    identified: &IdentifiedStream<T>,
    temporal: &TemporalStream<T>,
    head: &FusionHead<T>,
    frame: &BeatFrame<T>,
    sequence: &FrameSequence<T>,
    target: usize,
    rng: &mut dyn RngCore,
) -> Result<(Var, [Vec<Var>; 3])> {
    let iv = identified.params().bind(g, false);
    let tv = temporal.params().bind(g, false);
    let hv = head.params().bind(g, true);
    let (_, p1) = identified.build(g, &iv, frame, Mode::Train, rng)?;
    let (_, p2) = temporal.build(g, &tv, sequence, Mode::Train, rng)?;
    let stacked = g.concat(&[p1, p2])?;
    let logits = g.fully_connected(stacked, hv[0], hv[1])?;
    let (loss, _) = g.softmax_cross_entropy(logits, target)?;
    Ok((loss, [iv, tv, hv]))
}

/// Probabilities from stacked features, without building a graph.
pub fn fusion_probs<T: Scalar>(head: &FusionHead<T>, stacked: &[T]) -> Result<Vec<T>> {
    let w = &head.params().iter().next().expect("weight").data;
    let b = &head.params().iter().nth(1).expect("bias").data;
    if stacked.len() != head.input {
        return Err(ModelError::Data(format!("{} stacked features", stacked.len())));
    }
    let logits: Vec<T> = (0..head.classes)
        .map(|k| {
            w[k * head.input..(k + 1) * head.input]
                .iter()
                .zip(stacked)
                .fold(b[k], |acc, (&wv, &x)| acc + wv * x)
        })
        .collect();
    Ok(softmax(&logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::{FrameMethod, FRAME_LEN, SEQUENCE_LEN};
    use crate::models::{IdentifiedSpec, TemporalSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn average_examples() {
        let p = fuse_average(&[0.8f64, 0.2], &[0.6, 0.4]).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        let q = [0.1f64, 0.6, 0.3];
        assert_eq!(fuse_average(&q, &q).unwrap(), q.to_vec());
        assert!(fuse_average(&[0.5f64, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn zero_head_is_uniform() {
        let head = FusionHead::<f64>::new(4).unwrap();
        let f = head.forward(&vec![0.3; FUSION_INPUT]).unwrap();
        assert!(f.probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(head.forward(&vec![0.0; 10]).is_err());
    }

    #[test]
    fn frozen_streams_receive_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ident = IdentifiedStream::<f64>::new(IdentifiedSpec::new(3), &mut rng).unwrap();
        let temp = TemporalStream::<f64>::new(TemporalSpec::new(3), &mut rng).unwrap();
        let mut head = FusionHead::<f64>::new(3).unwrap();
        for p in head.params_mut().iter_mut() {
            p.data.iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
        }
        let mut frame = BeatFrame::zeros("r", 1);
        frame.samples = (0..FRAME_LEN).map(|i| (i as f64 * 0.05).sin()).collect();
        let seq = FrameSequence {
            frames: vec![frame.clone(); SEQUENCE_LEN],
            label: 1,
            method: FrameMethod::Chronological,
            real_frames: SEQUENCE_LEN,
        };
        let mut g = Graph::new();
        let (loss, [iv, tv, hv]) =
            joint_loss_graph(&mut g, &ident, &temp, &head, &frame, &seq, 1, &mut rng).unwrap();
        g.backward(loss).unwrap();
        assert!(iv.iter().chain(&tv).all(|&v| g.grad(v).is_none()));
        assert!(hv.iter().all(|&v| g.grad(v).is_some_and(|d| d.iter().any(|&x| x != 0.0))));

        let full = fuse_fc_forward(&ident, &temp, &head, &frame, &seq).unwrap();
        let a = ident.forward(&frame).unwrap().penultimate;
        let b = temp.forward(&seq).unwrap().penultimate;
        let direct = fusion_probs(&head, &stack_features(&a, &b)).unwrap();
        for (x, y) in full.probs.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
