//! Glue between the stages: synthetic datasets, record processing
//! (denoise, detect, frame), seeded record-level splits, and stream training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::{
    build_sequence, chronological_frames, segment_beats, BeatFrame, FrameMethod, FrameSequence,
    FramingError, SEQUENCE_LEN,
};
use crate::models::{
    stack_features, train, Classifier, Example, FusionHead, IdentifiedSpec, IdentifiedStream,
    ModelError, TemporalSpec, TemporalStream, TrainConfig, TrainOutcome,
};
use crate::preprocess::{denoise, detect_r_peaks, PreprocessError};
use crate::scalar::Scalar;
use crate::signal_io::{
    generate_synthetic_record, map_symbols_to_classes, EcgRecord, Morphology, SignalIoError,
    SynthesisParams, SyntheticRecord, NON_BEAT_SYMBOLS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    SignalIo(#[from] SignalIoError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Data(String),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Either a named preset or explicit deflections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MorphologySpec {
    Preset(String),
    Custom(Morphology),
}

impl MorphologySpec {
    pub const PRESETS: [&'static str; 6] =
        ["normal", "wide_qrs", "inverted_t", "peaked_p", "compact", "compact_inverted_t"];

    pub fn resolve(&self) -> Result<Morphology> {
        match self {
            MorphologySpec::Custom(m) => Ok(*m),
            MorphologySpec::Preset(name) => match name.as_str() {
                "normal" => Ok(Morphology::normal()),
                "wide_qrs" => Ok(Morphology::wide_qrs()),
                "inverted_t" => Ok(Morphology::inverted_t()),
                "peaked_p" => Ok(Morphology::peaked_p()),
                "compact" => Ok(Morphology::compact()),
                "compact_inverted_t" => Ok(Morphology::compact_inverted_t()),
                other => Err(PipelineError::Data(format!(
                    "unknown morphology preset {other:?} (known: {})",
                    Self::PRESETS.join(", ")
                ))),
            },
        }
    }
}

/// One synthetic class: a beat shape and a rhythm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub morphology: MorphologySpec,
    pub mean_rr_s: f64,
    #[serde(default)]
    pub rr_jitter_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDatasetSpec {
    pub classes: Vec<ClassSpec>,
    pub records_per_class: usize,
    #[serde(default = "default_fs")]
    pub fs: u32,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_fs() -> u32 {
    500
}

fn default_duration() -> f64 {
    10.0
}

impl SynthDatasetSpec {
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Generator parameters for every record, class by class.
    pub fn record_params(&self) -> Result<Vec<SynthesisParams>> {
        if self.classes.len() < 2 {
            return Err(PipelineError::Data("need at least 2 classes".into()));
        }
        if self.records_per_class == 0 {
            return Err(PipelineError::Data("records_per_class must be positive".into()));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(PipelineError::Data("class names must be unique".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.classes.len() * self.records_per_class);
        for class in &self.classes {
            let morphology = class.morphology.resolve()?;
            for i in 0..self.records_per_class {
                let mut p = SynthesisParams::new(
                    format!("{}_{i:04}", class.name),
                    class.name.clone(),
                    rng.random(),
                );
                p.fs = self.fs;
                p.duration_s = self.duration_s;
                p.mean_rr_s = class.mean_rr_s;
                p.rr_jitter_s = class.rr_jitter_s;
                p.morphology = morphology;
                p.noise_snr_db = self.noise_snr_db;
                p.validate()?;
                out.push(p);
            }
        }
        Ok(out)
    }
}

pub fn synthesize_dataset(spec: &SynthDatasetSpec) -> Result<Vec<SyntheticRecord>> {
    spec.record_params()?
        .iter()
        .map(|p| generate_synthetic_record(p).map_err(PipelineError::from))
        .collect()
}

/// A record after denoising, R-peak detection and framing.
#[derive(Debug, Clone)]
pub struct ProcessedRecord<T> {
    pub name: String,
    pub label: usize,
    pub r_peaks: Vec<usize>,
    /// R-centred beats in time order.
    pub beats: Vec<BeatFrame<T>>,
    pub chronological: Vec<BeatFrame<T>>,
}

impl<T: Scalar> ProcessedRecord<T> {
    /// The identified stream's input for this record.
    pub fn first_frame(&self) -> Result<&BeatFrame<T>> {
        self.beats
            .first()
            .ok_or_else(|| PipelineError::Data(format!("record {} has no usable beats", self.name)))
    }

    pub fn sequence(&self, method: FrameMethod) -> Result<FrameSequence<T>> {
        let frames = match method {
            FrameMethod::RCentered => &self.beats,
            FrameMethod::Chronological => &self.chronological,
        };
        if frames.is_empty() {
            return Err(PipelineError::Data(format!(
                "record {} has no {method} frames",
                self.name
            )));
        }
        Ok(build_sequence(frames, self.label, method)?)
    }
}

/// Denoise, detect R peaks, cut R-centred beats and chronological frames.
pub fn process_record<T: Scalar>(record: &EcgRecord, label: usize) -> Result<ProcessedRecord<T>> {
    let fs = record.fs as f64;
    let physical: Vec<T> = record.to_physical();
    let clean = denoise(&physical, fs)?;
    let r_peaks = detect_r_peaks(&clean, fs)?;
    let seg = segment_beats(&clean, record.fs, &r_peaks, &record.name, label)?;
    if seg.skipped_bounds + seg.skipped_constant > 0 {
        log::debug!(
            "{}: skipped {} beats at the edges and {} constant beats",
            record.name,
            seg.skipped_bounds,
            seg.skipped_constant
        );
    }
    let chronological = chronological_frames(&clean, record.fs, SEQUENCE_LEN, &record.name, label)?;
    Ok(ProcessedRecord { name: record.name.clone(), label, r_peaks, beats: seg.frames, chronological })
}

/// Beats cut at annotated positions and labelled with their AAMI class.
/// Non-beat annotations are skipped.
pub fn annotated_beats<T: Scalar>(record: &EcgRecord) -> Result<Vec<BeatFrame<T>>> {
    let anns = record.annotations.as_deref().ok_or_else(|| {
        PipelineError::Data(format!("record {} has no annotations", record.name))
    })?;
    let beats: Vec<_> = anns.iter().filter(|a| !NON_BEAT_SYMBOLS.contains(&a.symbol.as_str())).collect();
    let symbols: Vec<&str> = beats.iter().map(|a| a.symbol.as_str()).collect();
    let classes = map_symbols_to_classes(&symbols)?;
    let physical: Vec<T> = record.to_physical();
    let clean = denoise(&physical, record.fs as f64)?;
    let mut out = Vec::with_capacity(beats.len());
    for (a, class) in beats.iter().zip(classes) {
        let seg = segment_beats(&clean, record.fs, &[a.sample], &record.name, class.index())?;
        out.extend(seg.frames);
    }
    Ok(out)
}

/// Record indices for each part of a split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub valid: Vec<usize>,
}

impl Split {
    /// `record,label,split` rows in record order.
    pub fn to_csv(&self, names: &[String], labels: &[String]) -> Vec<u8> {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        rows.extend(self.train.iter().map(|&i| (i, "train")));
        rows.extend(self.test.iter().map(|&i| (i, "test")));
        rows.extend(self.valid.iter().map(|&i| (i, "valid")));
        rows.sort_unstable();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["record", "label", "split"]).expect("in-memory csv");
        for (i, part) in rows {
            w.write_record([names[i].as_str(), labels[i].as_str(), part]).expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }
}

/// Seeded record-level split, stratified by label so each class keeps the
/// train:test:valid ratios.
pub fn split_records(labels: &[usize], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios.iter().any(|&r| r < 0.0) {
        return Err(PipelineError::Data(format!("invalid split ratios {ratios:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut split = Split::default();
    for class in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let n = idx.len() as f64;
        let n_train = (n * ratios[0]).round() as usize;
        let n_test = ((n * ratios[1]).round() as usize).min(idx.len() - n_train);
        split.train.extend_from_slice(&idx[..n_train]);
        split.test.extend_from_slice(&idx[n_train..n_train + n_test]);
        split.valid.extend_from_slice(&idx[n_train + n_test..]);
    }
    for part in [&mut split.train, &mut split.test, &mut split.valid] {
        part.sort_unstable();
    }
    Ok(split)
}

/// R-centred beats of the chosen records, at most `per_record` from each.
pub fn beat_examples<T: Scalar>(
    records: &[ProcessedRecord<T>],
    which: &[usize],
    per_record: Option<usize>,
) -> Vec<Example<BeatFrame<T>>> {
    which
        .iter()
        .flat_map(|&i| {
            let r = &records[i];
            r.beats
                .iter()
                .take(per_record.unwrap_or(usize::MAX))
                .map(|b| Example { input: b.clone(), label: r.label })
        })
        .collect()
}

/// The first R-centred beat of each chosen record.
pub fn first_frame_examples<T: Scalar>(
    records: &[ProcessedRecord<T>],
    which: &[usize],
) -> Result<Vec<Example<BeatFrame<T>>>> {
    which
        .iter()
        .map(|&i| {
            let r = &records[i];
            Ok(Example { input: r.first_frame()?.clone(), label: r.label })
        })
        .collect()
}

pub fn sequence_examples<T: Scalar>(
    records: &[ProcessedRecord<T>],
    which: &[usize],
    method: FrameMethod,
) -> Result<Vec<Example<FrameSequence<T>>>> {
    which
        .iter()
        .map(|&i| {
            let r = &records[i];
            Ok(Example { input: r.sequence(method)?, label: r.label })
        })
        .collect()
}

/// Stacked penultimate features of both frozen streams for each record.
pub fn fusion_examples<T: Scalar>(
    identified: &IdentifiedStream<T>,
    temporal: &TemporalStream<T>,
    records: &[ProcessedRecord<T>],
    which: &[usize],
    method: FrameMethod,
) -> Result<Vec<Example<Vec<T>>>> {
    which
        .iter()
        .map(|&i| {
            let r = &records[i];
            let a = identified.forward(r.first_frame()?)?;
            let b = temporal.forward(&r.sequence(method)?)?;
            Ok(Example { input: stack_features(&a.penultimate, &b.penultimate), label: r.label })
        })
        .collect()
}

/// Beats labelled by record index, split per record into training and
/// validation beats (every `valid_every`-th beat goes to validation).
#[allow(clippy::type_complexity)]
pub fn identity_examples<T: Scalar>(
    records: &[ProcessedRecord<T>],
    valid_every: usize,
) -> (Vec<Example<BeatFrame<T>>>, Vec<Example<BeatFrame<T>>>) {
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (id, r) in records.iter().enumerate() {
        for (k, b) in r.beats.iter().enumerate() {
            let ex = Example { input: b.clone(), label: id };
            if valid_every > 0 && k % valid_every == valid_every - 1 {
                va.push(ex);
            } else {
                tr.push(ex);
            }
        }
    }
    (tr, va)
}

/// Seed for parameter initialisation, kept apart from the training stream.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains the beat CNN on every beat of the training records (up to
/// `per_record`), validating on each validation record's first beat. The
/// returned model holds the best-validation parameters.
pub fn train_identified<T: Scalar>(
    records: &[ProcessedRecord<T>],
    split: &Split,
    classes: usize,
    cfg: &TrainConfig,
    per_record: Option<usize>,
    pretrained: Option<&IdentifiedStream<T>>,
) -> Result<(IdentifiedStream<T>, TrainOutcome<T>)> {
    let mut model = match pretrained {
        Some(p) => p.with_new_head(classes)?,
        None => IdentifiedStream::new(IdentifiedSpec::new(classes), &mut init_rng(cfg.seed))?,
    };
    let tr = beat_examples(records, &split.train, per_record);
    let va = first_frame_examples(records, &split.valid)?;
    let outcome = train(&mut model, &tr, &va, cfg)?;
    *model.params_mut() = outcome.best_params.clone();
    Ok((model, outcome))
}

/// Pretrains the beat CNN to tell the chosen records apart, one class per
/// record. Every `valid_every`-th beat of each record is held out for
/// validation. Returns the best-validation model.
pub fn pretrain_identity<T: Scalar>(
    records: &[ProcessedRecord<T>],
    which: &[usize],
    cfg: &TrainConfig,
    valid_every: usize,
) -> Result<(IdentifiedStream<T>, TrainOutcome<T>)> {
    if which.len() < 2 {
        return Err(PipelineError::Data("identity pretraining needs at least 2 records".into()));
    }
    let chosen: Vec<ProcessedRecord<T>> = which.iter().map(|&i| records[i].clone()).collect();
    let (tr, va) = identity_examples(&chosen, valid_every);
    let mut model =
        IdentifiedStream::new(IdentifiedSpec::new(chosen.len()), &mut init_rng(cfg.seed))?;
    let outcome = train(&mut model, &tr, &va, cfg)?;
    *model.params_mut() = outcome.best_params.clone();
    Ok((model, outcome))
}

pub fn train_temporal<T: Scalar>(
    records: &[ProcessedRecord<T>],
    split: &Split,
    classes: usize,
    method: FrameMethod,
    cfg: &TrainConfig,
) -> Result<(TemporalStream<T>, TrainOutcome<T>)> {
    let mut model = TemporalStream::new(TemporalSpec::new(classes), &mut init_rng(cfg.seed))?;
    let tr = sequence_examples(records, &split.train, method)?;
    let va = sequence_examples(records, &split.valid, method)?;
    let outcome = train(&mut model, &tr, &va, cfg)?;
    *model.params_mut() = outcome.best_params.clone();
    Ok((model, outcome))
}

/// Trains only the fusion layer on features from the frozen streams.
pub fn train_fusion<T: Scalar>(
    identified: &IdentifiedStream<T>,
    temporal: &TemporalStream<T>,
    records: &[ProcessedRecord<T>],
    split: &Split,
    method: FrameMethod,
    cfg: &TrainConfig,
) -> Result<(FusionHead<T>, TrainOutcome<T>)> {
    let classes = identified.classes();
    if temporal.classes() != classes {
        return Err(PipelineError::Data(format!(
            "streams disagree on class count ({classes} vs {})",
            temporal.classes()
        )));
    }
    let mut head = FusionHead::new(classes)?;
    let tr = fusion_examples(identified, temporal, records, &split.train, method)?;
    let va = fusion_examples(identified, temporal, records, &split.valid, method)?;
    let outcome = train(&mut head, &tr, &va, cfg)?;
    *head.params_mut() = outcome.best_params.clone();
    Ok((head, outcome))
}
