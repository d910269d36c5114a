//! Model behaviour beyond single operations: training bookkeeping, fusion
//! contracts, checkpoints and single precision.

mod common;

use beatstream::framing::{BeatFrame, FrameMethod, FrameSequence, FRAME_LEN, SEQUENCE_LEN};
use beatstream::models::{
    argmax, evaluate, fuse_average, train, Classifier, Example, IdentifiedSpec, IdentifiedStream,
    TemporalSpec, TemporalStream, TrainConfig,
};
use beatstream::nn::{load_checkpoint, save_checkpoint};
use beatstream::pipeline::{init_rng, pretrain_identity, train_fusion, train_identified, train_temporal};
use beatstream::{IdentifiedStream32, TemporalStream32};
use common::tasks::build_task;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frame<T: beatstream::scalar::Scalar>(rng: &mut ChaCha8Rng, label: usize) -> BeatFrame<T> {
    let mut f = BeatFrame::zeros("r", label);
    f.samples = (0..FRAME_LEN).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    f
}

fn random_beats(n: usize, classes: usize, seed: u64) -> Vec<Example<BeatFrame<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % classes;
            let mut f = frame::<f64>(&mut rng, label);
            // A class-dependent offset makes the task learnable.
            f.samples.iter_mut().take(60).for_each(|v| *v += label as f64);
            Example { input: f, label }
        })
        .collect()
}

#[test]
fn first_epoch_loss_is_ln_c_for_a_fresh_model() {
    for classes in [2, 3, 5] {
        let data = random_beats(40, classes, 1);
        let mut m = IdentifiedStream::new(IdentifiedSpec::new(classes), &mut init_rng(2)).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: data.len(), seed: 3, ..TrainConfig::default() };
        let out = train(&mut m, &data, &data, &cfg).unwrap();
        assert!((out.history[0].train_loss - (classes as f64).ln()).abs() < 1e-12, "C = {classes}");
    }
}

#[test]
fn best_validation_checkpoint_only_improves() {
    let data = random_beats(48, 3, 4);
    let (tr, va) = data.split_at(36);
    let mut m = IdentifiedStream::new(IdentifiedSpec::new(3), &mut init_rng(5)).unwrap();
    let cfg = TrainConfig { epochs: 12, batch_size: 12, seed: 6, ..TrainConfig::default() };
    let out = train(&mut m, tr, va, &cfg).unwrap();
    assert_eq!(out.history.len(), 12);
    assert!(out.checkpoint_updates.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 > w[0].0));
    let min = out.history.iter().map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_valid_loss, min);
    assert_eq!(out.history[out.best_epoch].valid_loss, min);
    assert_eq!(out.checkpoint_updates.last().unwrap().0, out.best_epoch);
    assert_eq!(out.history.iter().map(|r| r.lr).collect::<Vec<_>>()[0], 0.01);

    let mut best = m.clone();
    *best.params_mut() = out.best_params.clone();
    let v = evaluate(&best, va).unwrap();
    assert!((v.loss - min).abs() < 1e-12);
}

#[test]
fn batch_evaluation_matches_single_predictions() {
    let data = random_beats(20, 4, 7);
    let m = IdentifiedStream::new(IdentifiedSpec::new(4), &mut init_rng(8)).unwrap();
    let ev = evaluate(&m, &data).unwrap();
    for (i, ex) in data.iter().enumerate() {
        let (k, p) = m.predict(&ex.input).unwrap();
        assert_eq!(ev.predictions[i], k);
        assert_eq!(ev.probs[i], p);
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = TemporalStream::<f64>::new(TemporalSpec::new(3), &mut init_rng(10)).unwrap();
    let bytes = save_checkpoint(m.params(), &serde_json::json!({"model": "temporal"}));
    let (params, meta) = load_checkpoint::<f64>(&bytes).unwrap();
    assert_eq!(meta["model"], "temporal");
    let back = TemporalStream::from_params(TemporalSpec::new(3), params).unwrap();
    let frames: Vec<BeatFrame<f64>> = (0..SEQUENCE_LEN).map(|_| frame(&mut rng, 0)).collect();
    let seq = FrameSequence { frames, label: 0, method: FrameMethod::Chronological, real_frames: SEQUENCE_LEN };
    assert_eq!(m.forward(&seq).unwrap(), back.forward(&seq).unwrap());
    assert!(load_checkpoint::<f32>(&bytes).is_err());
}

#[test]
fn single_precision_streams_run_and_learn() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ident = IdentifiedStream32::new(IdentifiedSpec::new(2), &mut init_rng(12)).unwrap();
    let f = ident.forward(&frame::<f32>(&mut rng, 0)).unwrap();
    assert!((f.probs.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    assert_eq!(f.penultimate.len(), 128);

    let temp = TemporalStream32::new(TemporalSpec::new(2), &mut init_rng(13)).unwrap();
    let frames: Vec<BeatFrame<f32>> = (0..4).map(|_| frame(&mut rng, 1)).collect();
    let seq = beatstream::framing::build_sequence(&frames, 1, FrameMethod::RCentered).unwrap();
    let f = temp.forward(&seq).unwrap();
    assert!((f.probs.iter().sum::<f32>() - 1.0).abs() < 1e-6);

    let data: Vec<Example<BeatFrame<f32>>> = random_beats(24, 2, 14)
        .into_iter()
        .map(|e| {
            let mut f = BeatFrame::zeros("r", e.label);
            f.samples = e.input.samples.iter().map(|&v| v as f32).collect();
            Example { input: f, label: e.label }
        })
        .collect();
    let mut m = IdentifiedStream32::new(IdentifiedSpec::new(2), &mut init_rng(15)).unwrap();
    let cfg = TrainConfig { epochs: 8, batch_size: 8, seed: 16, ..TrainConfig::default() };
    let out = train(&mut m, &data, &data, &cfg).unwrap();
    assert!(out.history.last().unwrap().train_loss < out.history[0].train_loss);
}

#[test]
fn fusion_training_leaves_streams_untouched_and_pretraining_swaps_heads() {
    let task = build_task(&[("compact", 1.0), ("compact_inverted_t", 0.5)], 10, 21);
    let cfg = TrainConfig { epochs: 3, batch_size: 16, seed: 22, ..TrainConfig::default() };
    let method = FrameMethod::Chronological;

    let (pre, _) = pretrain_identity(&task.records, &task.split.train, &cfg, 5).unwrap();
    assert_eq!(pre.classes(), task.split.train.len());
    let (ident, _) =
        train_identified(&task.records, &task.split, 2, &cfg, Some(2), Some(&pre)).unwrap();
    assert_eq!(ident.classes(), 2);
    for (a, b) in pre.params().iter().zip(ident.params()) {
        assert_eq!(a.name, b.name);
        if !a.name.starts_with("fc2") {
            assert_eq!(a.shape, b.shape, "{}", a.name);
        }
    }

    let (temp, _) = train_temporal(&task.records, &task.split, 2, method, &cfg).unwrap();
    let (ident_before, temp_before) = (ident.params().clone(), temp.params().clone());
    let (head, out) = train_fusion(&ident, &temp, &task.records, &task.split, method, &cfg).unwrap();
    assert_eq!(out.history.len(), 3);
    assert_eq!(head.classes(), 2);
    assert_eq!(ident.params(), &ident_before);
    assert_eq!(temp.params(), &temp_before);
}

fn distribution(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn averaging_stays_in_the_convex_hull(
        pair in (2usize..8).prop_flat_map(|c| (
            prop::collection::vec(0.001f64..1.0, c),
            prop::collection::vec(0.001f64..1.0, c),
        ))
    ) {
        let (p1, p2) = (distribution(&pair.0), distribution(&pair.1));
        let avg = fuse_average(&p1, &p2).unwrap();
        for ((a, b), m) in p1.iter().zip(&p2).zip(&avg) {
            prop_assert!(a.min(*b) <= *m && *m <= a.max(*b));
        }
        prop_assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if argmax(&avg) != argmax(&p1) && argmax(&avg) != argmax(&p2) {
            prop_assert_ne!(argmax(&p1), argmax(&p2));
        }
        prop_assert_eq!(fuse_average(&p1, &p1).unwrap(), p1);
    }
}
