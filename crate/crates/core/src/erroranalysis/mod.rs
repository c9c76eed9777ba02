//! Error taxonomy for misclassified records and the four mitigation systems.

mod framework;
mod mitigation;
mod taxonomy;

pub use framework::{default_systems, integrated_framework, integrated_framework_with, CategoryDelta, MitigationReport, MitigationRow};
pub use mitigation::{
    mitigate_device_mapping, mitigate_distance_weighting, mitigate_regional_lexicon, mitigate_turn_movement, DeviceMapper,
    MitigationConfig, MitigationKind, Mitigations, RegionalLexicon, TurnPatterns,
};
pub use taxonomy::{ErrorCategory, ErrorClassifier, FIVE_WAY_NAMES};
