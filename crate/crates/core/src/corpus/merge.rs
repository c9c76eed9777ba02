use crate::error::{Error, Result};

/// Joins narrative parts (in column order) into one whitespace-normalized text.
///
/// Empty or blank parts are skipped. Fails when nothing is left.
pub fn merge_narratives<S: AsRef<str>>(crash_key: &str, parts: &[S]) -> Result<String> {
    let merged = parts
        .iter()
        .flat_map(|p| p.as_ref().split_whitespace())
        .collect::<Vec<_>>()
        .join(" ");
    if merged.is_empty() {
        return Err(Error::EmptyNarrative { crash_key: crash_key.to_string() });
    }
    Ok(merged)
}
