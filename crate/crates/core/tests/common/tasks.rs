//! Small synthetic classification tasks run through the full
//! preprocessing chain.

use beatstream::pipeline::{
    process_record, split_records, synthesize_dataset, ClassSpec, MorphologySpec,
    ProcessedRecord, Split, SynthDatasetSpec,
};

pub struct Task {
    pub records: Vec<ProcessedRecord<f64>>,
    pub split: Split,
    pub classes: usize,
}

/// `(morphology preset, mean RR in seconds)` per class; every record is
/// 10 s at 500 Hz with 20 ms RR jitter and 20 dB SNR.
pub fn build_task(classes: &[(&str, f64)], per_class: usize, seed: u64) -> Task {
    let spec = SynthDatasetSpec {
        classes: classes
            .iter()
            .enumerate()
            .map(|(k, (m, rr))| ClassSpec {
                name: format!("c{k}"),
                morphology: MorphologySpec::Preset(m.to_string()),
                mean_rr_s: *rr,
                rr_jitter_s: 0.02,
            })
            .collect(),
        records_per_class: per_class,
        fs: 500,
        duration_s: 10.0,
        noise_snr_db: Some(20.0),
        seed,
    };
    let synth = synthesize_dataset(&spec).unwrap();
    let labels: Vec<usize> = (0..synth.len()).map(|i| i / per_class).collect();
    let records = synth
        .iter()
        .zip(&labels)
        .map(|(s, &l)| process_record(&s.record, l).unwrap())
        .collect();
    let split = split_records(&labels, [0.7, 0.2, 0.1], seed).unwrap();
    Task { records, split, classes: classes.len() }
}
