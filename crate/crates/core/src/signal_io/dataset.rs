//! On-disk dataset layout: per record `<name>.hea`, `<name>.dat` and an
//! optional `<name>.ann` text annotation file, plus `manifest.csv` with
//! `record,label` rows.

use std::path::Path;

use super::{read_annotations, read_wfdb_record, write_annotations, write_wfdb_record};
use super::{EcgRecord, Result, SignalIoError};
use crate::fsutil::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub record: String,
    /// Empty when labels come from beat annotations.
    pub label: String,
}

pub fn write_record_dir(dir: &Path, record: &EcgRecord) -> Result<()> {
    let (header, dat) = write_wfdb_record(record)?;
    write_atomic(&dir.join(format!("{}.hea", record.name)), header.as_bytes())?;
    write_atomic(&dir.join(format!("{}.dat", record.name)), &dat)?;
    if let Some(anns) = &record.annotations {
        write_atomic(
            &dir.join(format!("{}.ann", record.name)),
            write_annotations(anns).as_bytes(),
        )?;
    }
    Ok(())
}

/// Reads `<name>.hea` + the `.dat` it names, and `<name>.ann` when present.
pub fn read_record_dir(dir: &Path, name: &str, lead_index: usize) -> Result<EcgRecord> {
    let header = std::fs::read_to_string(dir.join(format!("{name}.hea")))?;
    let dat_name = header
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .nth(1 + lead_index)
        .and_then(|l| l.split_whitespace().next())
        .map(str::to_string)
        .unwrap_or_else(|| format!("{name}.dat"));
    let dat = std::fs::read(dir.join(dat_name))?;
    let record = read_wfdb_record(&header, &dat, lead_index)?;
    let ann_path = dir.join(format!("{name}.ann"));
    if ann_path.exists() {
        let anns = read_annotations(&std::fs::read_to_string(ann_path)?)?;
        return record.with_annotations(anns);
    }
    Ok(record)
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| SignalIoError::Manifest(e.to_string());
    w.write_record(["record", "label"]).map_err(to_err)?;
    for e in entries {
        w.write_record([&e.record, &e.label]).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| SignalIoError::Manifest(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    let mut rdr = csv::Reader::from_path(&path)
        .map_err(|e| SignalIoError::Manifest(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| SignalIoError::Manifest(e.to_string()))?.clone();
    if headers.get(0) != Some("record") {
        return Err(SignalIoError::Manifest("first column must be `record`".into()));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| SignalIoError::Manifest(format!("row {}: {e}", i + 2)))?;
        let record = row.get(0).unwrap_or_default().trim().to_string();
        if record.is_empty() {
            return Err(SignalIoError::Manifest(format!("row {}: empty record name", i + 2)));
        }
        out.push(ManifestEntry { record, label: row.get(1).unwrap_or_default().trim().to_string() });
    }
    Ok(out)
}
