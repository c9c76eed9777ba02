use serde::{Deserialize, Serialize};

use super::proximity::{anchor_positions, find_cues, CueKind, WINDOW};
use super::ProximityLexicon;
use crate::textpipe::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationRole {
    /// The crash happened here.
    Site,
    /// The place is a landmark for a crash elsewhere.
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationPhrase {
    pub phrase: String,
    pub role: LocationRole,
}

const DIRECTIONS: &[&str] = &[
    "north", "south", "east", "west", "northeast", "northwest", "southeast", "southwest", "northbound",
    "southbound", "eastbound", "westbound",
];
const PREPOSITIONS: &[&str] = &["at", "in", "into", "near", "through", "of", "to", "from", "approaching", "entered", "entering", "past", "beyond", "with"];
const TAIL_BREAKS: &[&str] = &[
    "when", "while", "as", "was", "were", "where", "after", "before", "at", "near", "in", "on", "then", "and", "struck", "collided",
];

/// Intersection-anchored location phrases, one per anchor noun, split on
/// sentence boundaries. A phrase governed by a distance or direction pattern
/// ("150 feet east of ...") is a reference; anything else is a site.
pub fn extract_location_phrases(narrative: &str, lex: &ProximityLexicon) -> Vec<LocationPhrase> {
    let mut out = Vec::new();
    for sentence in narrative.split(['.', ';', '!', '?']) {
        let toks = tokenize(sentence).tokens;
        let cues = find_cues(&toks, lex);
        for a in anchor_positions(&toks, lex) {
            let lo = a.saturating_sub(WINDOW + 2);
            let distance = cues
                .iter()
                .filter(|c| matches!(c.kind, CueKind::Distance { .. }) && c.end <= a && a - c.end <= WINDOW)
                .min_by_key(|c| c.start);
            let direction = (lo..a).find(|&i| DIRECTIONS.contains(&toks[i].as_str()) && toks.get(i + 1).is_some_and(|t| t == "of"));
            let (start, role) = match (distance, direction) {
                (Some(c), _) => (c.start, LocationRole::Reference),
                (None, Some(d)) => (d, LocationRole::Reference),
                (None, None) => {
                    let s = (a.saturating_sub(4)..a).rev().find(|&i| PREPOSITIONS.contains(&toks[i].as_str())).unwrap_or(a);
                    (s, LocationRole::Site)
                }
            };
            let mut end = a + 1;
            if toks.get(end).is_some_and(|t| t == "of" || t == "with") {
                let mut j = end + 1;
                let mut seen_and = false;
                while j < toks.len() && j < end + 1 + WINDOW {
                    let t = toks[j].as_str();
                    if t == "and" && !seen_and && j > end + 1 {
                        seen_and = true;
                    } else if TAIL_BREAKS.contains(&t) {
                        break;
                    }
                    j += 1;
                }
                if toks[j - 1] == "and" {
                    j -= 1;
                }
                if j > end + 1 {
                    end = j;
                }
            }
            out.push(LocationPhrase { phrase: toks[start..end].join(" "), role });
        }
    }
    out
}
