//! MIT-BIH beat symbols grouped into the five AAMI EC57 classes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Result, SignalIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AamiClass {
    /// Normal and bundle-branch-block beats.
    N,
    /// Supraventricular ectopic.
    S,
    /// Ventricular ectopic.
    V,
    /// Fusion of ventricular and normal.
    F,
    /// Paced or unclassifiable.
    Q,
}

impl AamiClass {
    pub const ALL: [AamiClass; 5] = [Self::N, Self::S, Self::V, Self::F, Self::Q];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_symbol(symbol: &str) -> Option<Self> {
        Some(match symbol {
            "N" | "L" | "R" | "e" | "j" => Self::N,
            "A" | "a" | "J" | "S" => Self::S,
            "V" | "E" => Self::V,
            "F" => Self::F,
            "/" | "f" | "Q" => Self::Q,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::S => "S",
            Self::V => "V",
            Self::F => "F",
            Self::Q => "Q",
        }
    }
}

impl fmt::Display for AamiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// MIT-BIH annotation codes that mark events rather than beats (rhythm
/// changes, noise, signal quality, flutter waves). These are filtered out
/// before class mapping.
pub const NON_BEAT_SYMBOLS: &[&str] = &[
    "+", "~", "|", "\"", "x", "!", "[", "]", "p", "t", "u", "`", "'", "^", "s", "T", "*", "D",
    "=", "@",
];

/// Maps every symbol to its AAMI class. Any symbol outside the beat alphabet
/// makes the whole call fail, listing each offender once.
pub fn map_symbols_to_classes<S: AsRef<str>>(symbols: &[S]) -> Result<Vec<AamiClass>> {
    let mut unknown: Vec<String> = Vec::new();
    let mut out = Vec::with_capacity(symbols.len());
    for s in symbols {
        match AamiClass::from_symbol(s.as_ref()) {
            Some(c) => out.push(c),
            None => {
                if !unknown.iter().any(|u| u == s.as_ref()) {
                    unknown.push(s.as_ref().to_string());
                }
            }
        }
    }
    if unknown.is_empty() {
        Ok(out)
    } else {
        Err(SignalIoError::UnknownSymbol(unknown))
    }
}

/// Ordered class names for one dataset; a label is an index into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect() }
    }

    pub fn aami() -> Self {
        Self::new(AamiClass::ALL.iter().map(|c| c.name()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AamiClass::*;

    #[test]
    fn maps_example_symbols() {
        assert_eq!(
            map_symbols_to_classes(&["N", "L", "A", "V", "F", "/"]).unwrap(),
            vec![N, N, S, V, F, Q]
        );
        assert!(map_symbols_to_classes::<&str>(&[]).unwrap().is_empty());
    }

    #[test]
    fn full_table() {
        let table = [
            ("N", N), ("L", N), ("R", N), ("e", N), ("j", N),
            ("A", S), ("a", S), ("J", S), ("S", S),
            ("V", V), ("E", V),
            ("F", F),
            ("/", Q), ("f", Q), ("Q", Q),
        ];
        for (sym, class) in table {
            assert_eq!(AamiClass::from_symbol(sym), Some(class), "{sym}");
        }
    }

    #[test]
    fn unknown_symbols_listed() {
        match map_symbols_to_classes(&["N", "X", "+", "X"]) {
            Err(SignalIoError::UnknownSymbol(u)) => assert_eq!(u, vec!["X", "+"]),
            other => panic!("unexpected {other:?}"),
        }
        for s in NON_BEAT_SYMBOLS {
            assert!(AamiClass::from_symbol(s).is_none());
        }
    }
}
