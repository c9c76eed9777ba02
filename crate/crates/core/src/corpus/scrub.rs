use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::ScrubToggles;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrubCategory {
    Email,
    Ssn,
    Phone,
    Dob,
    Plate,
    Address,
    Name,
}

impl ScrubCategory {
    pub fn placeholder(self) -> &'static str {
        match self {
            ScrubCategory::Email => "[EMAIL]",
            ScrubCategory::Ssn => "[SSN]",
            ScrubCategory::Phone => "[PHONE]",
            ScrubCategory::Dob => "[DOB]",
            ScrubCategory::Plate => "[PLATE]",
            ScrubCategory::Address => "[ADDR]",
            ScrubCategory::Name => "[NAME]",
        }
    }
}

/// Replacement counts by category.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrubReport {
    pub counts: BTreeMap<ScrubCategory, usize>,
}

impl ScrubReport {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn merge(&mut self, other: &ScrubReport) {
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_default() += v;
        }
    }
}

struct Pattern {
    category: ScrubCategory,
    regex: &'static LazyLock<Regex>,
    /// Capture group holding the PII; text outside it is kept.
    group: usize,
    /// Extra check on the captured text; a failed check leaves the match alone.
    accept: fn(&str) -> bool,
}

fn any(_: &str) -> bool {
    true
}

fn has_digit(s: &str) -> bool {
    s.bytes().any(|b| b.is_ascii_digit())
}

static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b").unwrap());
static SSN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{3}-\d{2}-\d{4})\b").unwrap());
static PHONE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\(\d{3}\)\s*|\b\d{3}[-.\s])\d{3}[-.]\d{4}\b").unwrap()
});
static DOB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:dob|d\.o\.b\.|date of birth|born(?: on)?)\s*[:#-]?\s*(\d{1,2}[/-]\d{1,2}[/-]\d{2,4})",
    )
    .unwrap()
});
static PLATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(?i:license plate|plate|lic\.?|tag)(?:\s+(?i:number|no\.?|#))?\s*[:#]?\s+([A-Z0-9]{2,4}[- ]?[A-Z0-9]{2,4})\b",
    )
    .unwrap()
});
static ADDRESS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b\d{1,6}\s+(?:[NSEW]\.?\s+)?(?:[A-Z][a-z]+\s+){1,3}(?:Street|St|Avenue|Ave|Road|Rd|Drive|Dr|Lane|Ln|Boulevard|Blvd|Court|Ct|Place|Pl|Way|Circle|Cir|Parkway|Pkwy|Terrace|Ter)\b\.?",
    )
    .unwrap()
});
static NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:Mr|Mrs|Ms|Miss|Dr)\.?\s+[A-Z][a-z]+(?:\s+[A-Z][a-z]+)?").unwrap());

static PATTERNS: [Pattern; 7] = [
    Pattern { category: ScrubCategory::Email, regex: &EMAIL, group: 0, accept: any },
    Pattern { category: ScrubCategory::Ssn, regex: &SSN, group: 1, accept: any },
    Pattern { category: ScrubCategory::Phone, regex: &PHONE, group: 0, accept: any },
    Pattern { category: ScrubCategory::Dob, regex: &DOB, group: 1, accept: any },
    Pattern { category: ScrubCategory::Plate, regex: &PLATE, group: 1, accept: has_digit },
    Pattern { category: ScrubCategory::Address, regex: &ADDRESS, group: 0, accept: any },
    Pattern { category: ScrubCategory::Name, regex: &NAME, group: 0, accept: any },
];

/// Pattern-based PII scrubber. Name detection is off unless toggled on.
#[derive(Clone, Debug, Default)]
pub struct Scrubber {
    toggles: ScrubToggles,
}

impl Scrubber {
    pub fn new(toggles: ScrubToggles) -> Self {
        Self { toggles }
    }

    pub fn scrub(&self, text: &str) -> (String, ScrubReport) {
        let mut out = text.to_string();
        let mut report = ScrubReport::default();
        for p in PATTERNS.iter().filter(|p| self.toggles.enabled(p.category)) {
            let mut n = 0usize;
            let replaced = p.regex.replace_all(&out, |caps: &Captures| {
                let whole = caps.get(0).unwrap();
                let target = caps.get(p.group).unwrap();
                if !(p.accept)(target.as_str()) {
                    return whole.as_str().to_string();
                }
                n += 1;
                let mut s = String::with_capacity(whole.len());
                s.push_str(&whole.as_str()[..target.start() - whole.start()]);
                s.push_str(p.category.placeholder());
                s.push_str(&whole.as_str()[target.end() - whole.start()..]);
                s
            });
            let replaced = replaced.into_owned();
            if n > 0 {
                report.counts.insert(p.category, n);
                out = replaced;
            }
        }
        (out, report)
    }
}

/// Scrubs PII with default toggles (everything except name heuristics).
pub fn scrub_pii(narrative: &str) -> (String, ScrubReport) {
    Scrubber::default().scrub(narrative)
}
