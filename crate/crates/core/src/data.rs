//! Default lexicons and pattern files compiled into the library.
//!
//! Every table here can be replaced at runtime by pointing the config at an
//! edited copy of the file under `data/`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const PROXIMITY: &str = include_str!("../data/proximity.tsv");
pub const CONFLICTING: &str = include_str!("../data/conflicting.tsv");
pub const SPECIALIZED: &str = include_str!("../data/specialized.tsv");
pub const TURN_PATTERNS: &str = include_str!("../data/turn_patterns.tsv");
pub const REGIONAL_LEXICON: &str = include_str!("../data/regional_lexicon.tsv");
pub const DEVICE_TERMS: &str = include_str!("../data/device_terms.tsv");
pub const DISTANCE_BREAKPOINTS: &str = include_str!("../data/distance_breakpoints.json");

/// Non-comment, non-blank lines split on tabs.
pub fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| (i, l.split('\t').map(str::trim).collect()))
}

pub fn parse_weight(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("bad weight {s:?}") })
}

/// Two-column `term<TAB>value` table.
pub fn pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (line, cols) in tsv_rows(text) {
        if cols.len() < 2 {
            return Err(Error::Parse { line, message: "expected two tab-separated columns".into() });
        }
        out.insert(cols[0].to_lowercase(), cols[1].to_string());
    }
    Ok(out)
}

pub fn read_or_default(path: Option<&std::path::Path>, default: &str) -> Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(p.to_path_buf()),
            _ => Error::Io(e),
        }),
        None => Ok(default.to_string()),
    }
}
