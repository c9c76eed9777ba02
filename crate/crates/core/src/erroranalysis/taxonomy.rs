use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Mitigations;
use crate::ambiguity::{anchor_positions, extract_location_phrases, AmbiguityFlags, AmbiguityLexicons, LocationRole};
use crate::corpus::RoadTypeLabel;
use crate::textpipe::tokenize;

/// Primary cause assigned to a misclassified record. Variant order is the
/// precedence order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    ProximityReference,
    TrafficControlFocus,
    ImplicitIntersection,
    UnconventionalTerminology,
    TerminologyAmbiguity,
    ComplexMultiVehicle,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 7] = [
        ErrorCategory::ProximityReference,
        ErrorCategory::TrafficControlFocus,
        ErrorCategory::ImplicitIntersection,
        ErrorCategory::UnconventionalTerminology,
        ErrorCategory::TerminologyAmbiguity,
        ErrorCategory::ComplexMultiVehicle,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::ProximityReference => "proximity_reference",
            ErrorCategory::TrafficControlFocus => "traffic_control_focus",
            ErrorCategory::ImplicitIntersection => "implicit_intersection",
            ErrorCategory::UnconventionalTerminology => "unconventional_terminology",
            ErrorCategory::TerminologyAmbiguity => "terminology_ambiguity",
            ErrorCategory::ComplexMultiVehicle => "complex_multi_vehicle",
            ErrorCategory::Other => "other",
        }
    }

    /// The five-way grouping used when comparing error distributions:
    /// traffic-control and unconventional-terminology errors fold into
    /// implicit references and terminology ambiguity respectively.
    pub fn five_way(self) -> usize {
        match self {
            ErrorCategory::ProximityReference => 0,
            ErrorCategory::ImplicitIntersection | ErrorCategory::TrafficControlFocus => 1,
            ErrorCategory::TerminologyAmbiguity | ErrorCategory::UnconventionalTerminology => 2,
            ErrorCategory::ComplexMultiVehicle => 3,
            ErrorCategory::Other => 4,
        }
    }
}

pub const FIVE_WAY_NAMES: [&str; 5] =
    ["proximity_reference", "implicit_intersection", "terminology_ambiguity", "complex_multi_vehicle", "other"];

static VEHICLE_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:vehicle|unit|driver|v)\s*#?\s*(\d+)\b").unwrap());
static INTERACTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(struck|strike|collided|hit|rear-ended|sideswiped|t-boned|broadside)\b").unwrap());
static APPROACH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(approaching|prior to|before reaching|just past|beyond)\b").unwrap());

/// Rule-based assignment of misclassified records to causes.
pub struct ErrorClassifier<'a> {
    pub lexicons: &'a AmbiguityLexicons,
    pub mitigations: &'a Mitigations,
}

impl ErrorClassifier<'_> {
    /// `None` when the prediction is correct.
    pub fn categorize(&self, narrative: &str, prediction: RoadTypeLabel, truth: RoadTypeLabel, flags: &AmbiguityFlags) -> Option<ErrorCategory> {
        if prediction == truth {
            return None;
        }
        let toks = tokenize(narrative).tokens;
        let has_anchor = !anchor_positions(&toks, &self.lexicons.proximity).is_empty();
        let canonical = self.mitigations.regional.canonicalize(narrative);
        let regional = canonical != narrative;
        let specialized = flags.specialized_terms || self.lexicons.specialized.terms.iter().any(|p| p.occurs_in(&toks));
        let mut hits = BTreeSet::new();

        if prediction == RoadTypeLabel::Intersection {
            let reference = extract_location_phrases(narrative, &self.lexicons.proximity)
                .iter()
                .any(|p| p.role == LocationRole::Reference);
            if flags.proximity || reference || (has_anchor && APPROACH.is_match(narrative)) {
                hits.insert(ErrorCategory::ProximityReference);
            }
            if regional || specialized {
                hits.insert(ErrorCategory::TerminologyAmbiguity);
            }
        } else {
            if !has_anchor && self.mitigations.device.matches_tokens(&toks) {
                hits.insert(ErrorCategory::TrafficControlFocus);
            }
            if !has_anchor && self.mitigations.turn.matches(narrative) {
                hits.insert(ErrorCategory::ImplicitIntersection);
            }
            if regional || specialized {
                hits.insert(ErrorCategory::UnconventionalTerminology);
            }
        }
        let vehicles: BTreeSet<&str> = VEHICLE_REF.captures_iter(narrative).map(|c| c.get(1).unwrap().as_str()).collect();
        if vehicles.len() >= 2 && INTERACTION.is_match(narrative) {
            hits.insert(ErrorCategory::ComplexMultiVehicle);
        }
        Some(hits.into_iter().next().unwrap_or(ErrorCategory::Other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::detect_text;
    use RoadTypeLabel::*;

    fn cat(text: &str, pred: RoadTypeLabel, truth: RoadTypeLabel) -> Option<ErrorCategory> {
        let lex = AmbiguityLexicons::builtin();
        let m = Mitigations::none();
        let c = ErrorClassifier { lexicons: &lex, mitigations: &m };
        c.categorize(text, pred, truth, &detect_text(text, &lex))
    }

    #[test]
    fn table_example_two_is_proximity() {
        let t = "Driver 1 was traveling east on County Road B when the vehicle slid on the icy road and struck a tree approximately 150 feet east of County Road B intersection.";
        assert_eq!(cat(t, Intersection, NonIntersection), Some(ErrorCategory::ProximityReference));
    }

    #[test]
    fn implicit_left_turn() {
        let t = "driver made a left turn across traffic and collided";
        assert_eq!(cat(t, NonIntersection, Intersection), Some(ErrorCategory::ImplicitIntersection));
    }

    #[test]
    fn traffic_control_outranks_implicit() {
        let t = "V1 ran the red light and turned left into V2";
        assert_eq!(cat(t, NonIntersection, Intersection), Some(ErrorCategory::TrafficControlFocus));
    }

    #[test]
    fn fallbacks() {
        assert_eq!(cat("vehicle stalled", NonIntersection, Intersection), Some(ErrorCategory::Other));
        assert_eq!(cat("vehicle stalled", Intersection, Intersection), None);
        assert_eq!(cat("Vehicle 1 struck Vehicle 2 in heavy traffic", Intersection, NonIntersection), Some(ErrorCategory::ComplexMultiVehicle));
        assert_eq!(cat("struck the pole near the junction of Oak and Elm", Intersection, NonIntersection), Some(ErrorCategory::ProximityReference));
        assert_eq!(cat("hit the attenuator at the gore area", Intersection, NonIntersection), Some(ErrorCategory::TerminologyAmbiguity));
        assert_eq!(cat("V1 entered the roundabout and hit the curb", NonIntersection, Intersection), Some(ErrorCategory::UnconventionalTerminology));
    }
}
