use serde::{Deserialize, Serialize};

use super::ProximityLexicon;

/// Maximum number of tokens between a cue and the intersection noun it governs.
pub const WINDOW: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CueKind {
    At,
    Near,
    Distance { feet: f64 },
}

/// A matched proximity cue covering tokens `start..end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cue {
    pub start: usize,
    pub end: usize,
    pub kind: CueKind,
    pub weight: f64,
}

/// Splits `"150"`, `"150ft"` or `"1"` into a number and an optional glued unit.
fn number_prefix(tok: &str) -> Option<(f64, &str)> {
    let split = tok.find(|c: char| !c.is_ascii_digit()).unwrap_or(tok.len());
    if split == 0 {
        return None;
    }
    let n: f64 = tok[..split].parse().ok()?;
    Some((n, &tok[split..]))
}

/// Every at-term, near-term and distance-quantity match in `tokens`.
pub fn find_cues(tokens: &[String], lex: &ProximityLexicon) -> Vec<Cue> {
    let mut cues = Vec::new();
    for p in &lex.at_terms {
        for s in p.find_all(tokens) {
            cues.push(Cue { start: s, end: s + p.tokens.len(), kind: CueKind::At, weight: lex.distance.at_weight });
        }
    }
    for p in &lex.near_terms {
        for s in p.find_all(tokens) {
            cues.push(Cue { start: s, end: s + p.tokens.len(), kind: CueKind::Near, weight: p.weight });
        }
    }
    for (i, tok) in tokens.iter().enumerate() {
        let Some((n, glued)) = number_prefix(tok) else { continue };
        let (unit, end) = if glued.is_empty() {
            match tokens.get(i + 1) {
                Some(u) => (u.as_str(), i + 2),
                None => continue,
            }
        } else {
            (glued, i + 1)
        };
        if let Some(per) = lex.distance.unit_feet(unit) {
            let feet = n * per;
            cues.push(Cue { start: i, end, kind: CueKind::Distance { feet }, weight: lex.distance.weight_for_feet(feet) });
        }
    }
    cues.sort_by_key(|c| (c.start, c.end));
    cues
}

/// Cues governing the anchor at `anchor`: at-terms that contain it, or
/// near/distance cues ending at most [`WINDOW`] tokens before it.
pub fn governing<'a>(cues: &'a [Cue], anchor: usize) -> impl Iterator<Item = &'a Cue> {
    cues.iter().filter(move |c| match c.kind {
        CueKind::At => c.start <= anchor && anchor < c.end,
        _ => c.end <= anchor && anchor - c.end <= WINDOW,
    })
}

/// The nearest governing cue; at-terms containing the anchor count as nearest.
pub fn nearest_cue(cues: &[Cue], anchor: usize) -> Option<Cue> {
    governing(cues, anchor).max_by_key(|c| (c.end, std::cmp::Reverse(c.start))).copied()
}

pub fn anchor_positions(tokens: &[String], lex: &ProximityLexicon) -> Vec<usize> {
    tokens.iter().enumerate().filter(|(_, t)| lex.is_anchor(t)).map(|(i, _)| i).collect()
}

/// Weight in [0, 1] applied to intersection-evidence terms. Any anchor whose
/// nearest cue is an at-term yields the at weight; otherwise the smallest
/// near/distance weight; 1.0 when nothing matches.
pub fn proximity_weight_tokens(tokens: &[String], lex: &ProximityLexicon) -> f64 {
    let cues = find_cues(tokens, lex);
    let mut w: Option<f64> = None;
    for a in anchor_positions(tokens, lex) {
        match nearest_cue(&cues, a) {
            Some(c) if c.kind == CueKind::At => return lex.distance.at_weight,
            Some(c) => w = Some(w.map_or(c.weight, |x: f64| x.min(c.weight))),
            None => {}
        }
    }
    w.unwrap_or(1.0)
}
