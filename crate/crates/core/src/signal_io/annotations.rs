use super::{Result, SignalIoError};

/// One beat annotation: a sample position and its symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub sample: usize,
    pub symbol: String,
}

impl Annotation {
    pub fn new(sample: usize, symbol: impl Into<String>) -> Self {
        Self { sample, symbol: symbol.into() }
    }
}

/// Parses `<sample_index> <symbol>` lines. Blank lines are skipped; the
/// result is strictly increasing in sample index.
pub fn read_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out: Vec<Annotation> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let index_field = fields.next().unwrap_or_default();
        let sample: usize = index_field.parse().map_err(|_| SignalIoError::AnnotationParse {
            line,
            msg: format!("non-numeric sample index `{index_field}`"),
        })?;
        let symbol = fields.next().ok_or_else(|| SignalIoError::AnnotationParse {
            line,
            msg: "missing symbol".into(),
        })?;
        if let Some(prev) = out.last() {
            if prev.sample == sample {
                return Err(SignalIoError::DuplicateAnnotation { line, index: sample });
            }
            if prev.sample > sample {
                return Err(SignalIoError::AnnotationOrder { line, index: sample });
            }
        }
        out.push(Annotation::new(sample, symbol));
    }
    Ok(out)
}

pub fn write_annotations(anns: &[Annotation]) -> String {
    let mut s = String::with_capacity(anns.len() * 8);
    for a in anns {
        s.push_str(&a.sample.to_string());
        s.push(' ');
        s.push_str(&a.symbol);
        s.push('\n');
    }
    s
}
