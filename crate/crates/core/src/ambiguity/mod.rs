//! Ambiguity detection (short, proximity, conflicting, specialized) and the
//! preprocessing that reacts to it: proximity weights, location phrases and
//! widened review bands.

mod lexicon;
mod location;
mod proximity;

use serde::{Deserialize, Serialize};

pub use lexicon::{
    AmbiguityLexicons, Breakpoint, DistanceBreakpoints, IndicatorLexicon, LexiconPaths, Phrase, ProximityLexicon,
    SpecializedLexicon,
};
pub use location::{extract_location_phrases, LocationPhrase, LocationRole};
pub use proximity::{anchor_positions, find_cues, governing, nearest_cue, proximity_weight_tokens, Cue, CueKind, WINDOW};

use crate::error::{Error, Result};
use crate::textpipe::{tokenize, TokenStream};

/// Narratives with fewer tokens than this are flagged short.
pub const SHORT_TOKENS: usize = 25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityCategory {
    Proximity,
    Conflicting,
    Short,
    Specialized,
    #[default]
    Clear,
}

impl AmbiguityCategory {
    pub const ALL: [AmbiguityCategory; 5] = [
        AmbiguityCategory::Proximity,
        AmbiguityCategory::Conflicting,
        AmbiguityCategory::Short,
        AmbiguityCategory::Specialized,
        AmbiguityCategory::Clear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AmbiguityCategory::Proximity => "proximity",
            AmbiguityCategory::Conflicting => "conflicting",
            AmbiguityCategory::Short => "short",
            AmbiguityCategory::Specialized => "specialized",
            AmbiguityCategory::Clear => "clear",
        }
    }

    pub fn is_ambiguous(self) -> bool {
        self != AmbiguityCategory::Clear
    }
}

impl std::fmt::Display for AmbiguityCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityFlags {
    pub short: bool,
    pub proximity: bool,
    pub conflicting: bool,
    pub specialized_terms: bool,
    /// Set after classification by [`ReviewBand::flag`].
    pub low_confidence: bool,
    pub category: AmbiguityCategory,
}

impl AmbiguityFlags {
    pub fn new(short: bool, proximity: bool, conflicting: bool, specialized_terms: bool) -> Self {
        let mut f = Self { short, proximity, conflicting, specialized_terms, low_confidence: false, category: AmbiguityCategory::Clear };
        f.category = f.primary();
        f
    }

    /// Highest-precedence set flag: proximity > conflicting > short > specialized.
    pub fn primary(&self) -> AmbiguityCategory {
        if self.proximity {
            AmbiguityCategory::Proximity
        } else if self.conflicting {
            AmbiguityCategory::Conflicting
        } else if self.short {
            AmbiguityCategory::Short
        } else if self.specialized_terms {
            AmbiguityCategory::Specialized
        } else {
            AmbiguityCategory::Clear
        }
    }

    pub fn any(&self) -> bool {
        self.short || self.proximity || self.conflicting || self.specialized_terms
    }
}

/// Flags a narrative. Pure in `(stream, lexicons)`; no model is consulted.
pub fn detect(stream: &TokenStream, lex: &AmbiguityLexicons) -> AmbiguityFlags {
    let toks = &stream.tokens;
    let cues = find_cues(toks, &lex.proximity);
    let proximity = anchor_positions(toks, &lex.proximity)
        .into_iter()
        .any(|a| governing(&cues, a).any(|c| c.kind != CueKind::At));
    let has = |ps: &[Phrase]| ps.iter().any(|p| p.occurs_in(toks));
    let conflicting = has(&lex.indicators.intersection) && has(&lex.indicators.non_intersection);
    AmbiguityFlags::new(toks.len() < SHORT_TOKENS, proximity, conflicting, has(&lex.specialized.terms))
}

pub fn detect_text(narrative: &str, lex: &AmbiguityLexicons) -> AmbiguityFlags {
    detect(&tokenize(narrative), lex)
}

pub fn proximity_weight(narrative: &str, lex: &ProximityLexicon) -> f64 {
    proximity_weight_tokens(&tokenize(narrative).tokens, lex)
}

/// Per-category half-widths of the low-confidence band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdMargins {
    pub clear: f64,
    pub proximity: f64,
    pub conflicting: f64,
    pub short: f64,
    pub specialized: f64,
}

impl Default for ThresholdMargins {
    fn default() -> Self {
        Self { clear: 0.05, proximity: 0.10, conflicting: 0.10, short: 0.10, specialized: 0.10 }
    }
}

impl ThresholdMargins {
    pub fn uniform(m: f64) -> Self {
        Self { clear: m, proximity: m, conflicting: m, short: m, specialized: m }
    }

    pub fn for_category(&self, c: AmbiguityCategory) -> f64 {
        match c {
            AmbiguityCategory::Clear => self.clear,
            AmbiguityCategory::Proximity => self.proximity,
            AmbiguityCategory::Conflicting => self.conflicting,
            AmbiguityCategory::Short => self.short,
            AmbiguityCategory::Specialized => self.specialized,
        }
    }
}

/// Closed interval of probabilities routed to review.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewBand {
    pub lower: f64,
    pub upper: f64,
}

impl ReviewBand {
    /// Strictly inside the band; a zero-width band flags nothing.
    pub fn contains(&self, p: f64) -> bool {
        self.lower < p && p < self.upper
    }

    pub fn flag(&self, flags: &mut AmbiguityFlags, p: f64) {
        flags.low_confidence = self.contains(p);
    }
}

pub fn adaptive_threshold(flags: &AmbiguityFlags, base: f64, margins: &ThresholdMargins) -> Result<ReviewBand> {
    if !(base > 0.0 && base < 1.0) {
        return Err(Error::Config(format!("base threshold {base} outside (0, 1)")));
    }
    let m = margins.for_category(flags.category);
    Ok(ReviewBand { lower: (base - m).max(0.0), upper: (base + m).min(1.0) })
}
