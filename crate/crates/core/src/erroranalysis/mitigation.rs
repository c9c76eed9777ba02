use std::collections::BTreeSet;
use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{proximity_weight_tokens, ProximityLexicon};
use crate::data;
use crate::error::{Error, Result};
use crate::textpipe::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationKind {
    DistanceWeighting,
    TurnMovement,
    RegionalLexicon,
    DeviceMapping,
}

impl MitigationKind {
    pub const ALL: [MitigationKind; 4] = [
        MitigationKind::DistanceWeighting,
        MitigationKind::TurnMovement,
        MitigationKind::RegionalLexicon,
        MitigationKind::DeviceMapping,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MitigationKind::DistanceWeighting => "distance_weighting",
            MitigationKind::TurnMovement => "turn_movement",
            MitigationKind::RegionalLexicon => "regional_lexicon",
            MitigationKind::DeviceMapping => "device_mapping",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm || k.as_str().replace('_', "") == norm)
            .ok_or_else(|| Error::Config(format!("unknown mitigation {s:?}")))
    }

    /// Parses a comma-separated list; `all` and `none` are accepted.
    pub fn parse_list(s: &str) -> Result<BTreeSet<Self>> {
        match s.trim() {
            "" | "none" => Ok(BTreeSet::new()),
            "all" => Ok(Self::ALL.into_iter().collect()),
            list => list.split(',').map(Self::parse).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationConfig {
    pub enabled: BTreeSet<MitigationKind>,
    /// Value of the turn-movement and device-mapping features relative to the
    /// unit-norm text block.
    pub aux_weight: f64,
    /// Tokens either side of a device term searched for negation cues.
    pub negation_window: usize,
    pub turn_patterns: Option<PathBuf>,
    pub regional_lexicon: Option<PathBuf>,
    pub device_terms: Option<PathBuf>,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self { enabled: BTreeSet::new(), aux_weight: 0.3, negation_window: 3, turn_patterns: None, regional_lexicon: None, device_terms: None }
    }
}

impl MitigationConfig {
    pub fn with(kinds: impl IntoIterator<Item = MitigationKind>) -> Self {
        Self { enabled: kinds.into_iter().collect(), ..Default::default() }
    }

    pub fn has(&self, k: MitigationKind) -> bool {
        self.enabled.contains(&k)
    }
}

/// Regex patterns signalling an intersection maneuver.
#[derive(Clone, Debug)]
pub struct TurnPatterns {
    patterns: Vec<Regex>,
}

impl TurnPatterns {
    pub fn parse(tsv: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (line, cols) in data::tsv_rows(tsv) {
            let re = Regex::new(&format!("(?i){}", cols[0])).map_err(|e| Error::Parse { line, message: e.to_string() })?;
            patterns.push(re);
        }
        Ok(Self { patterns })
    }

    pub fn builtin() -> Self {
        Self::parse(data::TURN_PATTERNS).expect("built-in turn patterns compile")
    }

    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(text))
    }
}

/// Rewrites regional intersection vocabulary to canonical terms.
#[derive(Clone, Debug)]
pub struct RegionalLexicon {
    rules: Vec<(Regex, String)>,
}

impl RegionalLexicon {
    pub fn parse(tsv: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (term, canonical) in data::pairs(tsv)? {
            if term == canonical {
                continue;
            }
            // "4-way intersection" collapses to "intersection" rather than doubling it
            let pat = format!(r"(?i)(^|[^\w-]){}(\s+{})?($|[^\w-])", regex::escape(&term), regex::escape(&canonical));
            let re = Regex::new(&pat).map_err(|e| Error::Config(e.to_string()))?;
            rules.push((re, canonical));
        }
        Ok(Self { rules })
    }

    pub fn builtin() -> Self {
        Self::parse(data::REGIONAL_LEXICON).expect("built-in regional lexicon parses")
    }

    pub fn canonicalize(&self, text: &str) -> String {
        let mut out = text.to_string();
        for (re, canon) in &self.rules {
            // loop because adjacent matches share their boundary character
            loop {
                let next = re.replace_all(&out, |c: &regex::Captures| format!("{}{}{}", &c[1], canon, &c[3])).into_owned();
                if next == out {
                    break;
                }
                out = next;
            }
        }
        out
    }
}

/// Traffic-control device mentions, ignoring negated ones.
#[derive(Clone, Debug)]
pub struct DeviceMapper {
    devices: Vec<Vec<String>>,
    negations: Vec<String>,
    window: usize,
}

impl DeviceMapper {
    pub fn parse(tsv: &str, window: usize) -> Result<Self> {
        let mut devices = Vec::new();
        let mut negations = Vec::new();
        for (line, cols) in data::tsv_rows(tsv) {
            match cols.as_slice() {
                ["device", t, ..] => devices.push(tokenize(t).tokens),
                ["negation", t, ..] => negations.push(t.to_lowercase()),
                _ => return Err(Error::Parse { line, message: "expected device|negation<TAB>term".into() }),
            }
        }
        Ok(Self { devices, negations, window })
    }

    pub fn builtin(window: usize) -> Self {
        Self::parse(data::DEVICE_TERMS, window).expect("built-in device terms parse")
    }

    pub fn matches_tokens(&self, toks: &[String]) -> bool {
        for d in &self.devices {
            let n = d.len();
            if n == 0 || toks.len() < n {
                continue;
            }
            for s in 0..=toks.len() - n {
                if toks[s..s + n] != d[..] {
                    continue;
                }
                let lo = s.saturating_sub(self.window);
                let hi = (s + n + self.window).min(toks.len());
                let negated = toks[lo..s].iter().chain(&toks[s + n..hi]).any(|t| self.negations.contains(t));
                if !negated {
                    return true;
                }
            }
        }
        false
    }

    pub fn matches(&self, text: &str) -> bool {
        self.matches_tokens(&tokenize(text).tokens)
    }
}

/// Loaded pattern files for all four systems.
#[derive(Clone, Debug)]
pub struct Mitigations {
    pub config: MitigationConfig,
    pub turn: TurnPatterns,
    pub regional: RegionalLexicon,
    pub device: DeviceMapper,
}

impl Mitigations {
    pub fn load(config: &MitigationConfig) -> Result<Self> {
        let read = |p: &Option<PathBuf>, d: &str| data::read_or_default(p.as_deref(), d);
        Ok(Self {
            config: config.clone(),
            turn: TurnPatterns::parse(&read(&config.turn_patterns, data::TURN_PATTERNS)?)?,
            regional: RegionalLexicon::parse(&read(&config.regional_lexicon, data::REGIONAL_LEXICON)?)?,
            device: DeviceMapper::parse(&read(&config.device_terms, data::DEVICE_TERMS)?, config.negation_window)?,
        })
    }

    pub fn none() -> Self {
        Self::load(&MitigationConfig::default()).expect("built-in pattern files load")
    }

    pub fn has(&self, k: MitigationKind) -> bool {
        self.config.has(k)
    }

    /// Number of auxiliary features appended to each vector.
    pub fn aux_dim(&self) -> usize {
        usize::from(self.has(MitigationKind::TurnMovement)) + usize::from(self.has(MitigationKind::DeviceMapping))
    }
}

/// Weight for intersection-evidence terms: 1.0 for at-phrases or no mention,
/// the distance breakpoint weight for quantified references, the near weight
/// for vague ones.
pub fn mitigate_distance_weighting(narrative: &str, lex: &ProximityLexicon) -> f64 {
    proximity_weight_tokens(&tokenize(narrative).tokens, lex)
}

pub fn mitigate_turn_movement(narrative: &str, patterns: &TurnPatterns) -> bool {
    patterns.matches(narrative)
}

pub fn mitigate_regional_lexicon(narrative: &str, lexicon: &RegionalLexicon) -> String {
    lexicon.canonicalize(narrative)
}

pub fn mitigate_device_mapping(narrative: &str, mapper: &DeviceMapper) -> bool {
    mapper.matches(narrative)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_weighting() {
        let lex = ProximityLexicon::builtin();
        assert_eq!(mitigate_distance_weighting("stopped at the intersection", &lex), 1.0);
        assert_eq!(mitigate_distance_weighting("500 feet from the intersection", &lex), 0.2);
        assert_eq!(mitigate_distance_weighting("hit a deer", &lex), 1.0);
    }

    #[test]
    fn turn_movement() {
        let t = TurnPatterns::builtin();
        assert!(mitigate_turn_movement("V2 was attempting to navigate a left turn onto Elm", &t));
        assert!(mitigate_turn_movement("driver made a left turn across traffic and collided", &t));
        assert!(!mitigate_turn_movement("rear-ended on interstate", &t));
        let empty = TurnPatterns::parse("# nothing\n").unwrap();
        assert!(!mitigate_turn_movement("made a left turn", &empty));
    }

    #[test]
    fn regional() {
        let r = RegionalLexicon::builtin();
        assert_eq!(mitigate_regional_lexicon("collided at the junction with Oak Avenue", &r), "collided at the intersection with Oak Avenue");
        assert_eq!(mitigate_regional_lexicon("struck a tree", &r), "struck a tree");
        assert_eq!(r.canonicalize("the 4-way intersection of A and B"), "the intersection of A and B");
        let once = r.canonicalize("Junction, crossing; four-way crossroads");
        assert_eq!(once, "intersection, intersection; intersection");
        assert_eq!(r.canonicalize(&once), once);
        assert_eq!(r.canonicalize("rear-ended at the t-junction"), "rear-ended at the t-junction");
    }

    #[test]
    fn device_mapping() {
        let d = DeviceMapper::builtin(3);
        assert!(mitigate_device_mapping("proceeding through the green light", &d));
        assert!(!mitigate_device_mapping("icy road conditions, the vehicle struck a tree", &d));
        assert!(!mitigate_device_mapping("no signal present", &d));
        assert!(mitigate_device_mapping("no damage; stopped at the stop sign", &d));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(MitigationKind::parse_list("distance_weighting,turn-movement").unwrap().len(), 2);
        assert_eq!(MitigationKind::parse_list("all").unwrap().len(), 4);
        assert!(MitigationKind::parse("bogus").is_err());
    }
}
