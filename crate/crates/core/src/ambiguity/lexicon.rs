use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};
use crate::textpipe::tokenize;

/// A multi-token phrase with a weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Phrase {
    pub tokens: Vec<String>,
    pub weight: f64,
}

impl Phrase {
    fn new(text: &str, weight: f64) -> Self {
        Self { tokens: tokenize(text).tokens, weight }
    }

    /// Start positions of every occurrence in `tokens`.
    pub fn find_all(&self, tokens: &[String]) -> Vec<usize> {
        let n = self.tokens.len();
        if n == 0 || tokens.len() < n {
            return Vec::new();
        }
        (0..=tokens.len() - n).filter(|&i| tokens[i..i + n] == self.tokens[..]).collect()
    }

    pub fn occurs_in(&self, tokens: &[String]) -> bool {
        !self.find_all(tokens).is_empty()
    }
}

/// Distance quantities: unit conversions and weight breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceBreakpoints {
    pub at_weight: f64,
    pub near_weight: f64,
    /// Checked in order; the first entry with `feet >= min_feet` applies.
    pub breakpoints: Vec<Breakpoint>,
    pub units: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub min_feet: f64,
    pub weight: f64,
}

impl DistanceBreakpoints {
    pub fn parse(json: &str) -> Result<Self> {
        let mut b: DistanceBreakpoints = serde_json::from_str(json)?;
        b.breakpoints.sort_by(|x, y| y.min_feet.total_cmp(&x.min_feet));
        for w in b.breakpoints.iter().map(|p| p.weight).chain([b.at_weight, b.near_weight]) {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("distance weight {w} outside [0, 1]")));
            }
        }
        Ok(b)
    }

    pub fn builtin() -> Self {
        Self::parse(data::DISTANCE_BREAKPOINTS).expect("built-in breakpoints parse")
    }

    pub fn unit_feet(&self, unit: &str) -> Option<f64> {
        self.units.get(unit).copied()
    }

    pub fn weight_for_feet(&self, feet: f64) -> f64 {
        self.breakpoints.iter().find(|b| feet >= b.min_feet).map_or(self.at_weight, |b| b.weight)
    }
}

/// At-terms, near-terms and the intersection anchor nouns they attach to.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityLexicon {
    pub at_terms: Vec<Phrase>,
    pub near_terms: Vec<Phrase>,
    pub anchors: Vec<String>,
    pub distance: DistanceBreakpoints,
}

impl ProximityLexicon {
    pub fn parse(tsv: &str, distance: DistanceBreakpoints) -> Result<Self> {
        let mut lex = Self { at_terms: Vec::new(), near_terms: Vec::new(), anchors: Vec::new(), distance };
        for (line, cols) in data::tsv_rows(tsv) {
            let (kind, term) = match cols.as_slice() {
                [k, t, ..] => (*k, *t),
                _ => return Err(Error::Parse { line, message: "expected kind<TAB>phrase".into() }),
            };
            let weight = cols.get(2).map(|w| data::parse_weight(line, w)).transpose()?;
            match kind {
                "at" => lex.at_terms.push(Phrase::new(term, 1.0)),
                "near" => {
                    let w = weight.unwrap_or(lex.distance.near_weight);
                    if !(0.0..1.0).contains(&w) {
                        return Err(Error::Parse { line, message: format!("near weight {w} must lie in [0, 1)") });
                    }
                    lex.near_terms.push(Phrase::new(term, w));
                }
                "anchor" => lex.anchors.push(term.to_lowercase()),
                other => return Err(Error::Parse { line, message: format!("unknown kind {other:?}") }),
            }
        }
        Ok(lex)
    }

    pub fn builtin() -> Self {
        Self::parse(data::PROXIMITY, DistanceBreakpoints::builtin()).expect("built-in proximity lexicon parses")
    }

    pub fn is_anchor(&self, token: &str) -> bool {
        self.anchors.iter().any(|a| a == token)
    }
}

/// Intersection and non-intersection indicator terms.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorLexicon {
    pub intersection: Vec<Phrase>,
    pub non_intersection: Vec<Phrase>,
}

impl IndicatorLexicon {
    pub fn parse(tsv: &str) -> Result<Self> {
        let mut lex = Self { intersection: Vec::new(), non_intersection: Vec::new() };
        for (line, cols) in data::tsv_rows(tsv) {
            match cols.as_slice() {
                ["intersection", t, ..] => lex.intersection.push(Phrase::new(t, 1.0)),
                ["non_intersection", t, ..] => lex.non_intersection.push(Phrase::new(t, 1.0)),
                _ => return Err(Error::Parse { line, message: "expected intersection|non_intersection<TAB>term".into() }),
            }
        }
        Ok(lex)
    }

    pub fn builtin() -> Self {
        Self::parse(data::CONFLICTING).expect("built-in indicator lexicon parses")
    }
}

/// Specialized terminology (roundabout variants, RCUTs, gore areas, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct SpecializedLexicon {
    pub terms: Vec<Phrase>,
}

impl SpecializedLexicon {
    pub fn parse(tsv: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (line, cols) in data::tsv_rows(tsv) {
            let w = cols.get(1).map(|w| data::parse_weight(line, w)).transpose()?.unwrap_or(1.0);
            terms.push(Phrase::new(cols[0], w));
        }
        Ok(Self { terms })
    }

    pub fn builtin() -> Self {
        Self::parse(data::SPECIALIZED).expect("built-in specialized lexicon parses")
    }
}

/// Every lexicon the detector consults.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguityLexicons {
    pub proximity: ProximityLexicon,
    pub indicators: IndicatorLexicon,
    pub specialized: SpecializedLexicon,
}

/// Optional replacement files; `None` keeps the built-in table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconPaths {
    pub proximity: Option<std::path::PathBuf>,
    pub conflicting: Option<std::path::PathBuf>,
    pub specialized: Option<std::path::PathBuf>,
    pub distance_breakpoints: Option<std::path::PathBuf>,
}

impl AmbiguityLexicons {
    pub fn builtin() -> Self {
        Self {
            proximity: ProximityLexicon::builtin(),
            indicators: IndicatorLexicon::builtin(),
            specialized: SpecializedLexicon::builtin(),
        }
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self> {
        let read = |p: &Option<std::path::PathBuf>, d: &str| data::read_or_default(p.as_deref().map(Path::new), d);
        let distance = DistanceBreakpoints::parse(&read(&paths.distance_breakpoints, data::DISTANCE_BREAKPOINTS)?)?;
        Ok(Self {
            proximity: ProximityLexicon::parse(&read(&paths.proximity, data::PROXIMITY)?, distance)?,
            indicators: IndicatorLexicon::parse(&read(&paths.conflicting, data::CONFLICTING)?)?,
            specialized: SpecializedLexicon::parse(&read(&paths.specialized, data::SPECIALIZED)?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_load() {
        let l = AmbiguityLexicons::builtin();
        assert!(l.proximity.at_terms.iter().all(|p| p.weight == 1.0));
        assert!(l.proximity.near_terms.iter().all(|p| p.weight < 1.0));
        assert!(l.proximity.is_anchor("intersection"));
        assert!(!l.indicators.intersection.is_empty());
        assert!(!l.specialized.terms.is_empty());
    }

    #[test]
    fn breakpoints() {
        let b = DistanceBreakpoints::builtin();
        assert_eq!(b.weight_for_feet(500.0), 0.2);
        assert_eq!(b.weight_for_feet(100.0), 0.2);
        assert_eq!(b.weight_for_feet(99.0), 0.6);
        assert_eq!(b.unit_feet("yards"), Some(3.0));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(ProximityLexicon::parse("near\tnear\t1.5\n", DistanceBreakpoints::builtin()).is_err());
        assert!(ProximityLexicon::parse("sideways\tx\n", DistanceBreakpoints::builtin()).is_err());
        assert!(IndicatorLexicon::parse("maybe\tx\n").is_err());
    }
}
