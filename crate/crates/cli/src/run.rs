use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use beatstream::framing::{frames_to_csv, FrameMethod};
use beatstream::fsutil::write_atomic;
use beatstream::metrics::{confusion_named, Report};
use beatstream::models::{
    argmax, fuse_average, fusion_probs, history_to_csv, stack_features, Classifier, FusionHead,
    IdentifiedSpec, IdentifiedStream, ModelKind, Task, TemporalSpec, TemporalStream, TrainOutcome,
};
use beatstream::nn::{load_checkpoint, save_checkpoint, ParamStore};
use beatstream::pipeline::{
    pretrain_identity, process_record, split_records, synthesize_dataset, train_fusion, train_identified,
    train_temporal, ProcessedRecord, Split,
};
use beatstream::signal_io::{
    read_manifest, read_record_dir, write_manifest, write_record_dir, EcgRecord, ManifestEntry,
};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{io_err, CliError};

pub const SPLIT_FILE: &str = "split.csv";
pub const IDENTITY_CHECKPOINT: &str = "identified_identity.ckpt";
/// Every n-th beat of each record validates identity pretraining.
const IDENTITY_VALID_EVERY: usize = 5;

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| io_err(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn checkpoint_path(cfg: &PipelineConfig, model: ModelKind) -> PathBuf {
    cfg.output_dir.join(format!("{model}.ckpt"))
}

pub fn generate(cfg: &PipelineConfig) -> Result<(), CliError> {
    let spec = cfg
        .synthesis
        .as_ref()
        .ok_or_else(|| CliError::Usage("generate needs a `synthesis` section in the config".into()))?;
    let records = synthesize_dataset(spec)?;
    let mut entries = Vec::with_capacity(records.len());
    for s in records {
        write_record_dir(&cfg.dataset_dir, &s.record)?;
        entries.push(ManifestEntry { record: s.record.name.clone(), label: s.label });
    }
    write_manifest(&cfg.dataset_dir, &entries)?;
    log::info!("generated {} records in {}", entries.len(), cfg.dataset_dir.display());
    Ok(())
}

/// Records listed in the manifest, with class names in order of first
/// appearance.
struct Dataset {
    records: Vec<EcgRecord>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    fn names(&self) -> Vec<String> {
        self.records.iter().map(|r| r.name.clone()).collect()
    }

    fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|&l| self.class_names[l].clone()).collect()
    }
}

fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset, CliError> {
    let dir = &cfg.dataset_dir;
    let entries = read_manifest(dir)?;
    let missing: Vec<&str> = entries
        .iter()
        .filter(|e| !dir.join(format!("{}.hea", e.record)).exists())
        .map(|e| e.record.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "{} record(s) missing from {}: {}",
            missing.len(),
            dir.display(),
            missing.join(", ")
        )));
    }
    let unlabelled: Vec<&str> =
        entries.iter().filter(|e| e.label.is_empty()).map(|e| e.record.as_str()).collect();
    if !unlabelled.is_empty() {
        return Err(CliError::Data(format!(
            "manifest rows without a record label: {}",
            unlabelled.join(", ")
        )));
    }
    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(entries.len());
    let mut records = Vec::with_capacity(entries.len());
    for e in &entries {
        let label = match class_names.iter().position(|c| *c == e.label) {
            Some(i) => i,
            None => {
                class_names.push(e.label.clone());
                class_names.len() - 1
            }
        };
        let rec = read_record_dir(dir, &e.record, cfg.lead_index)
            .map_err(|err| CliError::Data(format!("record {}: {err}", e.record)))?;
        labels.push(label);
        records.push(rec);
    }
    if class_names.len() < 2 {
        return Err(CliError::Data("the manifest must contain at least two classes".into()));
    }
    Ok(Dataset { records, labels, class_names })
}

fn process_all(ds: &Dataset) -> Result<Vec<ProcessedRecord<f64>>, CliError> {
    ds.records
        .iter()
        .zip(&ds.labels)
        .map(|(r, &l)| {
            process_record(r, l).map_err(|e| CliError::Data(format!("record {}: {e}", r.name)))
        })
        .collect()
}

pub fn preprocess(cfg: &PipelineConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let processed = process_all(&ds)?;
    let beats: Vec<_> = processed.iter().flat_map(|p| p.beats.iter().cloned()).collect();
    let chrono: Vec<_> = processed.iter().flat_map(|p| p.chronological.iter().cloned()).collect();
    let mut peaks = String::from("record,sample\n");
    for p in &processed {
        for r in &p.r_peaks {
            peaks.push_str(&format!("{},{r}\n", p.name));
        }
    }
    let out = &cfg.output_dir;
    write_out(&out.join("r_peaks.csv"), peaks.as_bytes())?;
    write_out(
        &out.join(format!("frames_{}.csv", FrameMethod::RCentered)),
        frames_to_csv(&beats, &ds.class_names).as_bytes(),
    )?;
    write_out(
        &out.join(format!("frames_{}.csv", FrameMethod::Chronological)),
        frames_to_csv(&chrono, &ds.class_names).as_bytes(),
    )?;
    Ok(())
}

fn meta(cfg: &PipelineConfig, model: ModelKind, class_names: &[String]) -> serde_json::Value {
    let method = match model {
        ModelKind::Identified => serde_json::Value::Null,
        _ => json!(cfg.method),
    };
    json!({
        "model": model,
        "classes": class_names,
        "method": method,
        "seed": cfg.train.seed,
        "split": cfg.train.split,
    })
}

fn log_outcome(model: ModelKind, out: &TrainOutcome<f64>) {
    log::info!(
        "{model}: best validation loss {:.6} at epoch {}",
        out.best_valid_loss,
        out.best_epoch
    );
}

pub fn train(cfg: &PipelineConfig) -> Result<(), CliError> {
    let model = cfg.model;
    if model == ModelKind::FusionAvg {
        return Err(CliError::Usage(
            "fusion_avg has no parameters; train identified and temporal, then evaluate".into(),
        ));
    }
    if cfg.train.task == Task::Identity {
        return pretrain(cfg);
    }
    // Inputs from earlier runs are checked before any work.
    let streams = if model == ModelKind::FusionFc { Some(load_streams(cfg)?) } else { None };
    let pretrained = match &cfg.pretrained {
        Some(p) => Some(load_pretrained(p)?),
        None => None,
    };
    let ds = load_dataset(cfg)?;
    if let Some((_, _, names)) = &streams {
        check_classes(names, &ds.class_names)?;
    }
    let processed = process_all(&ds)?;
    let split = split_records(&ds.labels, cfg.train.split, cfg.train.seed)?;
    let classes = ds.class_names.len();
    let (params, outcome): (ParamStore<f64>, TrainOutcome<f64>) = match model {
        ModelKind::Identified => {
            let (m, o) =
                train_identified(
                    &processed,
                    &split,
                    classes,
                    &cfg.train,
                    cfg.beats_per_record,
                    pretrained.as_ref(),
                )?;
            (m.params().clone(), o)
        }
        ModelKind::Temporal => {
            let (m, o) = train_temporal(&processed, &split, classes, cfg.method, &cfg.train)?;
            (m.params().clone(), o)
        }
        ModelKind::FusionFc => {
            let (ident, temp, _) = streams.as_ref().expect("loaded above");
            let (h, o) = train_fusion(ident, temp, &processed, &split, cfg.method, &cfg.train)?;
            (h.params().clone(), o)
        }
        ModelKind::FusionAvg => unreachable!("rejected above"),
    };
    log_outcome(model, &outcome);
    let out = &cfg.output_dir;
    write_out(&out.join(SPLIT_FILE), &split.to_csv(&ds.names(), &ds.label_names()))?;
    write_out(&out.join(format!("history_{model}.csv")), &history_to_csv(&outcome.history))?;
    write_out(
        &checkpoint_path(cfg, model),
        &save_checkpoint(&params, &meta(cfg, model, &ds.class_names)),
    )?;
    Ok(())
}

/// Trains the beat CNN to recognise the training records themselves.
fn pretrain(cfg: &PipelineConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let processed = process_all(&ds)?;
    let split = split_records(&ds.labels, cfg.train.split, cfg.train.seed)?;
    let (model, outcome) =
        pretrain_identity(&processed, &split.train, &cfg.train, IDENTITY_VALID_EVERY)?;
    log_outcome(ModelKind::Identified, &outcome);
    let names: Vec<String> = split.train.iter().map(|&i| ds.records[i].name.clone()).collect();
    let meta = json!({
        "model": ModelKind::Identified,
        "task": Task::Identity,
        "classes": names,
        "method": serde_json::Value::Null,
        "seed": cfg.train.seed,
        "split": cfg.train.split,
    });
    let out = &cfg.output_dir;
    write_out(&out.join(SPLIT_FILE), &split.to_csv(&ds.names(), &ds.label_names()))?;
    write_out(&out.join("history_identified_identity.csv"), &history_to_csv(&outcome.history))?;
    write_out(&out.join(IDENTITY_CHECKPOINT), &save_checkpoint(model.params(), &meta))?;
    Ok(())
}

/// A beat CNN checkpoint whose feature layers seed rhythm training.
fn load_pretrained(path: &Path) -> Result<IdentifiedStream<f64>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let (params, meta) = load_checkpoint::<f64>(&bytes).map_err(to_data(path.to_path_buf()))?;
    if meta.get("model").and_then(|m| m.as_str()) != Some("identified") {
        return Err(CliError::Data(format!(
            "{}: pretrained weights must come from an identified checkpoint",
            path.display()
        )));
    }
    let classes = meta.get("classes").and_then(|c| c.as_array()).map_or(0, Vec::len);
    IdentifiedStream::from_params(IdentifiedSpec::new(classes), params)
        .map_err(to_data(path.to_path_buf()))
}

struct Loaded {
    params: ParamStore<f64>,
    class_names: Vec<String>,
    method: Option<FrameMethod>,
}

fn read_checkpoint(cfg: &PipelineConfig, model: ModelKind) -> Result<Loaded, CliError> {
    let path = checkpoint_path(cfg, model);
    let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
    let (params, meta) =
        load_checkpoint::<f64>(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bad = |what: &str| CliError::Data(format!("{}: checkpoint metadata lacks {what}", path.display()));
    if meta.get("model").and_then(|m| m.as_str()) != Some(model.to_string().as_str()) {
        return Err(CliError::Data(format!(
            "{}: checkpoint does not hold a {model} model",
            path.display()
        )));
    }
    let class_names: Vec<String> = meta
        .get("classes")
        .cloned()
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or_else(|| bad("class names"))?;
    let method = match meta.get("method") {
        Some(serde_json::Value::Null) | None => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|_| bad("a framing method"))?),
    };
    if let Some(m) = method {
        if m != cfg.method {
            return Err(CliError::Usage(format!(
                "{} was trained on {m} frames but {} was requested",
                path.display(),
                cfg.method
            )));
        }
    }
    Ok(Loaded { params, class_names, method })
}

fn check_classes(checkpoint: &[String], dataset: &[String]) -> Result<(), CliError> {
    if checkpoint != dataset {
        return Err(CliError::Data(format!(
            "class mismatch: checkpoint has {} class(es) {checkpoint:?}, dataset has {} {dataset:?}",
            checkpoint.len(),
            dataset.len()
        )));
    }
    Ok(())
}

fn to_data<E: std::fmt::Display>(path: PathBuf) -> impl Fn(E) -> CliError {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn load_identified(cfg: &PipelineConfig) -> Result<(IdentifiedStream<f64>, Vec<String>), CliError> {
    let l = read_checkpoint(cfg, ModelKind::Identified)?;
    let spec = IdentifiedSpec::new(l.class_names.len());
    let m = IdentifiedStream::from_params(spec, l.params)
        .map_err(to_data(checkpoint_path(cfg, ModelKind::Identified)))?;
    Ok((m, l.class_names))
}

fn load_temporal(cfg: &PipelineConfig) -> Result<(TemporalStream<f64>, Vec<String>), CliError> {
    let l = read_checkpoint(cfg, ModelKind::Temporal)?;
    debug_assert!(l.method.is_some());
    let spec = TemporalSpec::new(l.class_names.len());
    let m = TemporalStream::from_params(spec, l.params)
        .map_err(to_data(checkpoint_path(cfg, ModelKind::Temporal)))?;
    Ok((m, l.class_names))
}

type Streams = (IdentifiedStream<f64>, TemporalStream<f64>, Vec<String>);

/// Both stream checkpoints, which must exist and agree on the classes.
fn load_streams(cfg: &PipelineConfig) -> Result<Streams, CliError> {
    let missing: Vec<String> = [ModelKind::Identified, ModelKind::Temporal]
        .into_iter()
        .map(|m| checkpoint_path(cfg, m))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "{} needs both stream checkpoints; missing: {}",
            cfg.model,
            missing.join(", ")
        )));
    }
    let (ident, a) = load_identified(cfg)?;
    let (temp, b) = load_temporal(cfg)?;
    if a != b {
        return Err(CliError::Data(format!("stream checkpoints disagree on classes: {a:?} vs {b:?}")));
    }
    Ok((ident, temp, a))
}

enum Predictor {
    Identified(IdentifiedStream<f64>),
    Temporal(TemporalStream<f64>, FrameMethod),
    FusionAvg(IdentifiedStream<f64>, TemporalStream<f64>, FrameMethod),
    FusionFc(IdentifiedStream<f64>, TemporalStream<f64>, FusionHead<f64>, FrameMethod),
}

impl Predictor {
    fn load(cfg: &PipelineConfig) -> Result<(Self, Vec<String>), CliError> {
        Ok(match cfg.model {
            ModelKind::Identified => {
                let (m, names) = load_identified(cfg)?;
                (Predictor::Identified(m), names)
            }
            ModelKind::Temporal => {
                let (m, names) = load_temporal(cfg)?;
                (Predictor::Temporal(m, cfg.method), names)
            }
            ModelKind::FusionAvg => {
                let (i, t, names) = load_streams(cfg)?;
                (Predictor::FusionAvg(i, t, cfg.method), names)
            }
            ModelKind::FusionFc => {
                let (i, t, names) = load_streams(cfg)?;
                let l = read_checkpoint(cfg, ModelKind::FusionFc)?;
                check_classes(&l.class_names, &names)?;
                let head = FusionHead::from_params(names.len(), l.params)
                    .map_err(to_data(checkpoint_path(cfg, ModelKind::FusionFc)))?;
                (Predictor::FusionFc(i, t, head, cfg.method), names)
            }
        })
    }

    fn probs(&self, r: &ProcessedRecord<f64>) -> Result<Vec<f64>, CliError> {
        let ctx = |e: beatstream::models::ModelError| CliError::Data(format!("record {}: {e}", r.name));
        let frame = || r.first_frame().map_err(|e| CliError::Data(e.to_string()));
        let seq = |m: FrameMethod| r.sequence(m).map_err(|e| CliError::Data(e.to_string()));
        Ok(match self {
            Predictor::Identified(m) => m.forward(frame()?).map_err(ctx)?.probs,
            Predictor::Temporal(m, method) => m.forward(&seq(*method)?).map_err(ctx)?.probs,
            Predictor::FusionAvg(i, t, method) => {
                let a = i.forward(frame()?).map_err(ctx)?;
                let b = t.forward(&seq(*method)?).map_err(ctx)?;
                fuse_average(&a.probs, &b.probs).map_err(ctx)?
            }
            Predictor::FusionFc(i, t, h, method) => {
                let a = i.forward(frame()?).map_err(ctx)?;
                let b = t.forward(&seq(*method)?).map_err(ctx)?;
                fusion_probs(h, &stack_features(&a.penultimate, &b.penultimate)).map_err(ctx)?
            }
        })
    }
}

/// Reads the split manifest written by `train` and checks it against the
/// dataset.
fn read_split(cfg: &PipelineConfig, ds: &Dataset) -> Result<Split, CliError> {
    let path = cfg.output_dir.join(SPLIT_FILE);
    let mut rdr = csv::Reader::from_path(&path).map_err(to_data(path.clone()))?;
    let names = ds.names();
    let mut split = Split::default();
    let mut seen = vec![false; names.len()];
    for row in rdr.records() {
        let row = row.map_err(to_data(path.clone()))?;
        let (name, label, part) = (&row[0], &row[1], &row[2]);
        let i = names.iter().position(|n| n == name).ok_or_else(|| {
            CliError::Data(format!("{}: record {name} is not in the dataset", path.display()))
        })?;
        if seen[i] {
            return Err(CliError::Data(format!("{}: record {name} listed twice", path.display())));
        }
        seen[i] = true;
        if ds.class_names[ds.labels[i]] != label {
            return Err(CliError::Data(format!(
                "{}: record {name} has label {label} but the dataset says {}",
                path.display(),
                ds.class_names[ds.labels[i]]
            )));
        }
        match part {
            "train" => split.train.push(i),
            "test" => split.test.push(i),
            "valid" => split.valid.push(i),
            other => {
                return Err(CliError::Data(format!("{}: unknown split {other:?}", path.display())))
            }
        }
    }
    Ok(split)
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<(), CliError> {
    let (predictor, class_names) = Predictor::load(cfg)?;
    let ds = load_dataset(cfg)?;
    check_classes(&class_names, &ds.class_names)?;
    let split = read_split(cfg, &ds)?;
    if split.test.is_empty() {
        return Err(CliError::Data("the split manifest has no test records".into()));
    }
    let test: Vec<EcgRecord> = split.test.iter().map(|&i| ds.records[i].clone()).collect();
    let mut truth = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    let mut rows = String::from("record,label,predicted");
    for c in &class_names {
        rows.push_str(&format!(",p_{c}"));
    }
    rows.push('\n');
    for (rec, &i) in test.iter().zip(&split.test) {
        let p = process_record::<f64>(rec, ds.labels[i])
            .map_err(|e| CliError::Data(format!("record {}: {e}", rec.name)))?;
        let probs = predictor.probs(&p)?;
        let k = argmax(&probs);
        truth.push(ds.labels[i]);
        predicted.push(k);
        rows.push_str(&format!("{},{},{}", rec.name, class_names[ds.labels[i]], class_names[k]));
        for v in &probs {
            rows.push_str(&format!(",{v}"));
        }
        rows.push('\n');
    }
    let cm = confusion_named(&truth, &predicted, class_names.clone())?;
    let report = Report::new(&cfg.model.to_string(), &cm)?;
    let model = cfg.model;
    let out = &cfg.output_dir;
    write_out(&out.join(format!("predictions_{model}.csv")), rows.as_bytes())?;
    write_out(&out.join(format!("confusion_{model}.csv")), &cm.to_csv())?;
    write_out(&out.join(format!("report_{model}.csv")), &report.to_csv())?;
    write_out(&out.join(format!("report_{model}.json")), report.to_json().as_bytes())?;
    log::info!(
        "{model}: accuracy {:.4} over {} test records",
        report.overall.accuracy,
        test.len()
    );
    Ok(())
}

/// `dir/name` from a record path given with or without `.hea`.
fn split_record_path(path: &Path) -> Result<(PathBuf, String), CliError> {
    let name = match path.extension() {
        Some(ext) if ext == "hea" => path.file_stem(),
        _ => path.file_name(),
    }
    .and_then(|n| n.to_str())
    .ok_or_else(|| CliError::Usage(format!("invalid record path {}", path.display())))?
    .to_string();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((dir, name))
}

pub fn predict(cfg: &PipelineConfig, record: &Path) -> Result<(), CliError> {
    let (predictor, class_names) = Predictor::load(cfg)?;
    let (dir, name) = split_record_path(record)?;
    let rec = read_record_dir(&dir, &name, cfg.lead_index)
        .map_err(|e| CliError::Data(format!("record {}: {e}", record.display())))?;
    let p = process_record::<f64>(&rec, 0)
        .map_err(|e| CliError::Data(format!("record {name}: {e}")))?;
    let probs = predictor.probs(&p)?;
    let by_class: BTreeMap<&str, f64> =
        class_names.iter().map(String::as_str).zip(probs.iter().copied()).collect();
    let line = json!({
        "record": name,
        "class_name": class_names[argmax(&probs)],
        "probs": by_class,
    });
    println!("{line}");
    Ok(())
}
