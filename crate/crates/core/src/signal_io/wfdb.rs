//! WFDB header + format 212 signal files.
//!
//! Format 212 packs two 12-bit two's complement samples into three bytes:
//!
//! ```text
//! s1 = ((b1 & 0x0F) << 8) | b0
//! s2 = ((b1 & 0xF0) << 4) | b2
//! ```
//!
//! Samples of all signals are interleaved frame by frame before packing.
//! Only the header subset `name nsig fs nsamples` plus per-signal
//! `file format gain [adcres adczero ...]` is interpreted.

use super::{EcgRecord, Result, SignalIoError};

pub const SAMPLE_MIN: i32 = -2048;
pub const SAMPLE_MAX: i32 = 2047;

/// WFDB default for an uncalibrated (gain 0) signal.
const WFDB_DEFAULT_GAIN: f64 = 200.0;

#[inline]
fn sign_extend_12(v: u16) -> i32 {
    ((v as i32) << 20) >> 20
}

/// Unpacks format 212 bytes. A trailing incomplete group is ignored; callers
/// check the length first.
pub fn decode_212(bytes: &[u8]) -> Vec<i32> {
    let mut out = Vec::with_capacity(bytes.len() / 3 * 2);
    for chunk in bytes.chunks_exact(3) {
        let (b0, b1, b2) = (chunk[0] as u16, chunk[1] as u16, chunk[2] as u16);
        out.push(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        out.push(sign_extend_12(((b1 & 0xF0) << 4) | b2));
    }
    out
}

/// Packs samples into format 212, appending a zero sample when the count is
/// odd.
pub fn encode_212(samples: &[i32]) -> Result<Vec<u8>> {
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, &v)| !(SAMPLE_MIN..=SAMPLE_MAX).contains(&v))
    {
        return Err(SignalIoError::SampleRange { index, value });
    }
    let mut out = Vec::with_capacity(samples.len().div_ceil(2) * 3);
    for pair in samples.chunks(2) {
        let s1 = (pair[0] as u16) & 0x0FFF;
        let s2 = (pair.get(1).copied().unwrap_or(0) as u16) & 0x0FFF;
        out.push((s1 & 0xFF) as u8);
        out.push((((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)) as u8);
        out.push((s2 & 0xFF) as u8);
    }
    Ok(out)
}

struct RecordLine {
    nsig: usize,
    fs: u32,
    nsamples: usize,
}

struct SignalLine {
    gain: f64,
    baseline: i32,
}

fn header_err(line: usize, msg: impl Into<String>) -> SignalIoError {
    SignalIoError::HeaderParse { line, msg: msg.into() }
}

fn parse_record_line(line_no: usize, fields: &[&str]) -> Result<(String, RecordLine)> {
    if fields.len() < 4 {
        return Err(header_err(
            line_no,
            "record line needs `name nsig fs nsamples`",
        ));
    }
    let name = fields[0];
    if name.contains('/') {
        return Err(header_err(line_no, "multi-segment records are not supported"));
    }
    let nsig: usize = fields[1]
        .parse()
        .map_err(|_| header_err(line_no, format!("bad signal count `{}`", fields[1])))?;
    // fs may carry a counter frequency suffix: `360/...`
    let fs_field = fields[2].split('/').next().unwrap_or_default();
    let fs: f64 = fs_field
        .parse()
        .map_err(|_| header_err(line_no, format!("bad sampling rate `{}`", fields[2])))?;
    if !(fs > 0.0) || fs.fract() != 0.0 || fs > u32::MAX as f64 {
        return Err(header_err(
            line_no,
            format!("sampling rate must be a positive integer, got `{}`", fields[2]),
        ));
    }
    let nsamples: usize = fields[3]
        .parse()
        .map_err(|_| header_err(line_no, format!("bad sample count `{}`", fields[3])))?;
    if fields.len() > 4 {
        log::warn!("header line {line_no}: ignoring base time/date fields");
    }
    Ok((
        name.to_string(),
        RecordLine { nsig, fs: fs as u32, nsamples },
    ))
}

fn parse_signal_line(line_no: usize, fields: &[&str]) -> Result<SignalLine> {
    if fields.len() < 2 {
        return Err(header_err(line_no, "signal line needs at least `file format`"));
    }
    // `212`, `212x1`, `212:0`, `212+3` all name format 212.
    let fmt_digits: String = fields[1].chars().take_while(|c| c.is_ascii_digit()).collect();
    if fmt_digits.is_empty() {
        return Err(header_err(line_no, format!("bad format field `{}`", fields[1])));
    }
    if fmt_digits != "212" {
        return Err(SignalIoError::UnsupportedFormat(fmt_digits));
    }
    if fmt_digits.len() != fields[1].len() {
        log::warn!("header line {line_no}: ignoring format modifiers in `{}`", fields[1]);
    }

    let mut gain = WFDB_DEFAULT_GAIN;
    let mut explicit_baseline = None;
    if let Some(gain_field) = fields.get(2) {
        // gain[(baseline)][/units]
        let spec = gain_field.split('/').next().unwrap_or_default();
        let (g, base) = match spec.find('(') {
            Some(open) => {
                let close = spec
                    .find(')')
                    .ok_or_else(|| header_err(line_no, "unterminated baseline in gain field"))?;
                let b: i32 = spec[open + 1..close]
                    .parse()
                    .map_err(|_| header_err(line_no, format!("bad baseline in `{gain_field}`")))?;
                (&spec[..open], Some(b))
            }
            None => (spec, None),
        };
        let g: f64 = g
            .parse()
            .map_err(|_| header_err(line_no, format!("bad gain `{gain_field}`")))?;
        if g < 0.0 || !g.is_finite() {
            return Err(header_err(line_no, format!("gain must be non-negative, got {g}")));
        }
        if g > 0.0 {
            gain = g;
        } else {
            log::warn!("header line {line_no}: gain 0 (uncalibrated), using {WFDB_DEFAULT_GAIN}");
        }
        explicit_baseline = base;
    }
    // adczero is the fifth field; it doubles as the baseline when the gain
    // field does not carry one.
    let adc_zero = match fields.get(4) {
        Some(f) => Some(
            f.parse::<i32>()
                .map_err(|_| header_err(line_no, format!("bad ADC zero `{f}`")))?,
        ),
        None => None,
    };
    if fields.len() > 5 {
        log::warn!("header line {line_no}: ignoring initial value/checksum/description fields");
    }
    Ok(SignalLine {
        gain,
        baseline: explicit_baseline.or(adc_zero).unwrap_or(0),
    })
}

/// Parses a header and its format 212 signal file, returning one lead.
pub fn read_wfdb_record(header_text: &str, dat_bytes: &[u8], lead_index: usize) -> Result<EcgRecord> {
    let mut lines = header_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, first) = lines
        .next()
        .ok_or_else(|| header_err(1, "empty header"))?;
    let fields: Vec<&str> = first.split_whitespace().collect();
    let (name, rec) = parse_record_line(line_no, &fields)?;
    if rec.nsig == 0 {
        return Err(header_err(line_no, "record declares no signals"));
    }
    if lead_index >= rec.nsig {
        return Err(SignalIoError::LeadOutOfRange { lead: lead_index, nsig: rec.nsig });
    }

    let mut signals = Vec::with_capacity(rec.nsig);
    for _ in 0..rec.nsig {
        let (line_no, text) = lines
            .next()
            .ok_or_else(|| header_err(line_no + signals.len() + 1, "missing signal line"))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        signals.push(parse_signal_line(line_no, &fields)?);
    }

    let total = rec.nsig * rec.nsamples;
    let expected = total.div_ceil(2) * 3;
    if dat_bytes.len() != expected {
        return Err(SignalIoError::LengthMismatch { expected, actual: dat_bytes.len() });
    }
    let interleaved = decode_212(dat_bytes);
    let samples: Vec<i32> = interleaved[..total]
        .iter()
        .skip(lead_index)
        .step_by(rec.nsig)
        .copied()
        .collect();
    let sig = &signals[lead_index];
    EcgRecord::new(name, rec.fs, sig.gain, sig.baseline, samples, None)
}

/// Serialises a single-lead record as a header and a format 212 signal file.
/// Annotations are not part of the output.
pub fn write_wfdb_record(record: &EcgRecord) -> Result<(String, Vec<u8>)> {
    record.validate()?;
    if record.name.is_empty() || record.name.chars().any(char::is_whitespace) {
        return Err(SignalIoError::InvalidRecord(format!(
            "record name `{}` must be non-empty without whitespace",
            record.name
        )));
    }
    let dat = encode_212(&record.samples)?;
    let mut header = format!("{} 1 {} {}\n", record.name, record.fs, record.samples.len());
    header.push_str(&format!(
        "{}.dat 212 {}({})/mV 12 {}\n",
        record.name, record.gain, record.baseline, record.baseline
    ));
    if record.samples.len() % 2 == 1 {
        header.push_str("# dat padded with 1 zero sample\n");
    }
    Ok((header, dat))
}
