use beatstream::signal_io::{
    decode_212, encode_212, generate_synthetic_record, map_symbols_to_classes, read_annotations,
    read_wfdb_record, write_wfdb_record, AamiClass, EcgRecord, SynthesisParams, NON_BEAT_SYMBOLS,
    SAMPLE_MAX, SAMPLE_MIN,
};
use proptest::prelude::*;

const BEAT_SYMBOLS: [&str; 15] =
    ["N", "L", "R", "e", "j", "A", "a", "J", "S", "V", "E", "F", "/", "f", "Q"];

/// Normalised autocorrelation at `lag` of the mean-removed signal.
fn autocorr(x: &[f64], lag: usize) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let num: f64 = c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
    num / c.iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn generator_periodicity_matches_mean_rr() {
    for (rr, fs) in [(1.0, 500u32), (0.75, 500), (0.6, 360), (0.9, 250)] {
        let mut p = SynthesisParams::new("p", "N", 1);
        p.mean_rr_s = rr;
        p.fs = fs;
        let x = generate_synthetic_record(&p).unwrap().clean_mv;
        let period = (rr * fs as f64).round() as usize;
        let lo = period / 2;
        let best = (lo..=period * 3 / 2).max_by(|&a, &b| autocorr(&x, a).total_cmp(&autocorr(&x, b))).unwrap();
        assert_eq!(best, period, "rr {rr} at {fs} Hz");
    }
}

#[test]
fn every_beat_symbol_has_one_class() {
    let classes = map_symbols_to_classes(&BEAT_SYMBOLS).unwrap();
    let again = map_symbols_to_classes(&BEAT_SYMBOLS).unwrap();
    assert_eq!(classes, again);
    for (s, c) in BEAT_SYMBOLS.iter().zip(&classes) {
        assert_eq!(AamiClass::from_symbol(s), Some(*c));
    }
    for s in NON_BEAT_SYMBOLS {
        assert_eq!(AamiClass::from_symbol(s), None, "{s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn codec_round_trip(samples in prop::collection::vec(SAMPLE_MIN..=SAMPLE_MAX, 0..400)) {
        let mut even = samples;
        if even.len() % 2 == 1 {
            even.pop();
        }
        let bytes = encode_212(&even).unwrap();
        prop_assert_eq!(bytes.len(), even.len() / 2 * 3);
        prop_assert_eq!(decode_212(&bytes), even);
    }

    #[test]
    fn record_round_trip(samples in prop::collection::vec(SAMPLE_MIN..=SAMPLE_MAX, 1..300), fs in 1u32..2000) {
        let rec = EcgRecord::new("r100", fs, 200.0, 0, samples, None).unwrap();
        let (header, dat) = write_wfdb_record(&rec).unwrap();
        let back = read_wfdb_record(&header, &dat, 0).unwrap();
        prop_assert_eq!(back.samples, rec.samples);
        prop_assert_eq!(back.fs, fs);
    }

    #[test]
    fn accepted_annotations_are_strictly_increasing(
        rows in prop::collection::vec((0usize..5000, prop::sample::select(BEAT_SYMBOLS.to_vec())), 0..60)
    ) {
        let text: String = rows.iter().map(|(i, s)| format!("{i} {s}\n")).collect();
        if let Ok(anns) = read_annotations(&text) {
            prop_assert!(anns.windows(2).all(|w| w[0].sample < w[1].sample));
            prop_assert_eq!(anns.len(), rows.len());
        } else {
            prop_assert!(rows.windows(2).any(|w| w[0].0 >= w[1].0));
        }
    }

    #[test]
    fn symbol_mapping_is_a_function(symbols in prop::collection::vec(prop::sample::select(BEAT_SYMBOLS.to_vec()), 1..50)) {
        let classes = map_symbols_to_classes(&symbols).unwrap();
        for (s, c) in symbols.iter().zip(&classes) {
            prop_assert_eq!(AamiClass::from_symbol(s), Some(*c));
        }
    }
}
