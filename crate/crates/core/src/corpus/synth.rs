//! Deterministic synthetic crash corpus.
//!
//! Narratives are assembled from class-distinctive phrase templates, neutral
//! filler sentences, and (for the ambiguous strata) injected proximity
//! references, short texts, conflicting indicators, or specialized terms.
//! Structured fields and intersection nodes are generated alongside, with
//! signal correlated to the ground-truth label.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    CrashRecord, RoadTypeLabel, RuralUrban, StructuredFields, INTERSECTION_SUBLEVELS,
    NON_INTERSECTION_SUBLEVELS,
};
use crate::error::{Error, Result};
use crate::fusion::{offset_point, IntersectionNode};

/// Per-category fractions of ambiguous records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmbiguityMix {
    pub proximity: f64,
    pub short: f64,
    pub conflicting: f64,
    pub specialized: f64,
}

impl AmbiguityMix {
    /// Splits `total` across the four categories in the 8.7 : 5.2 : 4.8 : 3.1
    /// proportions observed in real police narratives.
    pub fn scaled(total: f64) -> Self {
        let parts = [8.7, 5.2, 4.8, 3.1];
        let sum: f64 = parts.iter().sum();
        Self {
            proximity: total * parts[0] / sum,
            short: total * parts[1] / sum,
            conflicting: total * parts[2] / sum,
            specialized: total * parts[3] / sum,
        }
    }

    pub fn total(&self) -> f64 {
        self.proximity + self.short + self.conflicting + self.specialized
    }

    fn fractions(&self) -> [f64; 4] {
        [self.proximity, self.short, self.conflicting, self.specialized]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_records: usize,
    /// Fraction of intersection records.
    pub class_balance: f64,
    pub ambiguity_mix: AmbiguityMix,
    pub seed: u64,
    /// Fraction of records whose coded label is flipped.
    #[serde(default)]
    pub label_noise: f64,
    /// Per-field probability that a structured field is missing.
    #[serde(default = "default_missing_rate")]
    pub missing_rate: f64,
    /// Per-word probability of a transposition or dropped-letter typo.
    #[serde(default = "default_typo_rate")]
    pub typo_rate: f64,
    /// Fraction of clear records whose narrative carries no location evidence;
    /// only the structured fields tell these apart.
    #[serde(default = "default_vague_rate")]
    pub vague_rate: f64,
}

fn default_missing_rate() -> f64 {
    0.1
}

fn default_typo_rate() -> f64 {
    0.12
}

fn default_vague_rate() -> f64 {
    0.1
}

impl SyntheticSpec {
    pub fn new(n_records: usize, class_balance: f64, ambiguous: f64, seed: u64) -> Self {
        Self {
            n_records,
            class_balance,
            ambiguity_mix: AmbiguityMix::scaled(ambiguous),
            seed,
            label_noise: 0.0,
            missing_rate: default_missing_rate(),
            typo_rate: default_typo_rate(),
            vague_rate: default_vague_rate(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("class_balance", self.class_balance)?;
        unit("label_noise", self.label_noise)?;
        unit("missing_rate", self.missing_rate)?;
        unit("vague_rate", self.vague_rate)?;
        unit("typo_rate", self.typo_rate)?;
        for (name, v) in ["proximity", "short", "conflicting", "specialized"]
            .iter()
            .zip(self.ambiguity_mix.fractions())
        {
            unit(name, v)?;
        }
        if self.ambiguity_mix.total() > 1.0 + 1e-12 {
            return Err(Error::Config("ambiguity fractions sum above 1".into()));
        }
        Ok(())
    }
}

/// Generator-side stratum of a synthetic record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SynthCategory {
    Clear,
    Proximity,
    Short,
    Conflicting,
    Specialized,
}

impl SynthCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthCategory::Clear => "clear",
            SynthCategory::Proximity => "proximity",
            SynthCategory::Short => "short",
            SynthCategory::Conflicting => "conflicting",
            SynthCategory::Specialized => "specialized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    /// The record as a police database would hold it; `label` is the coded label.
    pub record: CrashRecord,
    pub truth: RoadTypeLabel,
    pub category: SynthCategory,
    /// Coded road-type sub-level.
    pub road_type: String,
}

impl SyntheticRecord {
    pub fn label_noisy(&self) -> bool {
        self.record.label != Some(self.truth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub records: Vec<SyntheticRecord>,
    pub nodes: Vec<IntersectionNode>,
}

impl SyntheticCorpus {
    pub fn crash_records(&self) -> Vec<CrashRecord> {
        self.records.iter().map(|r| r.record.clone()).collect()
    }

    pub fn count(&self, category: SynthCategory) -> usize {
        self.records.iter().filter(|r| r.category == category).count()
    }

    /// Writes `narratives.csv`, `tabular.csv`, `nodes.csv` and `truth.csv`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut n = csv::Writer::from_path(dir.join("narratives.csv"))?;
        n.write_record(["CRASH_KEY", "NARRATIVE1", "NARRATIVE2", "NARRATIVE3", "NARRATIVE4", "NARRATIVE5"])?;
        for r in &self.records {
            let mut row = vec![r.record.crash_key.clone()];
            row.extend(split_parts(&r.record.narrative, 5));
            n.write_record(&row)?;
        }
        n.flush()?;

        let mut t = csv::Writer::from_path(dir.join("tabular.csv"))?;
        t.write_record(["CRASH_KEY", "ROADTYPE", "LAT", "LON", "ROAD_CLASS", "TCD", "MANEUVER", "RURAL_URBAN"])?;
        for r in &self.records {
            let s = r.record.structured.clone().unwrap_or_default();
            let opt = |v: Option<String>| v.unwrap_or_default();
            t.write_record([
                r.record.crash_key.clone(),
                r.road_type.clone(),
                opt(s.latitude.map(|v| format!("{v:.7}"))),
                opt(s.longitude.map(|v| format!("{v:.7}"))),
                opt(s.road_class),
                opt(s.tcd_present.map(|b| if b { "1".into() } else { "0".into() })),
                opt(s.vehicle_maneuver),
                opt(s.rural_urban.map(|v| v.as_str().to_string())),
            ])?;
        }
        t.flush()?;

        crate::fusion::write_nodes(&dir.join("nodes.csv"), &self.nodes)?;

        let mut g = csv::Writer::from_path(dir.join("truth.csv"))?;
        g.write_record(["CRASH_KEY", "TRUTH", "CATEGORY"])?;
        for r in &self.records {
            g.write_record([r.record.crash_key.as_str(), r.truth.as_str(), r.category.as_str()])?;
        }
        g.flush()?;
        Ok(())
    }
}

/// Splits a narrative into at most `n` parts on sentence boundaries.
fn split_parts(text: &str, n: usize) -> Vec<String> {
    let sentences: Vec<&str> = text.split_inclusive(". ").map(str::trim).filter(|s| !s.is_empty()).collect();
    let mut parts = vec![String::new(); n];
    if sentences.is_empty() {
        return parts;
    }
    let per = sentences.len().div_ceil(n);
    for (i, chunk) in sentences.chunks(per).enumerate() {
        parts[i] = chunk.join(" ");
    }
    parts
}

/// Largest-remainder allocation of `n` items over `fractions` (plus the remainder class).
fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let target = raw.iter().sum::<f64>().round() as usize;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(raw.len() * 2) {
        if assigned >= target.min(n) {
            break;
        }
        counts[i] += 1;
        assigned += 1;
    }
    counts
}

// ---- phrase pools ---------------------------------------------------------

const STREETS: &[&str] = &[
    "Main", "Oak", "Elm", "Jefferson", "Washington", "Lincoln", "Grand", "University", "Ingersoll",
    "Locust", "Walnut", "Maple", "Cedar", "Pine", "Euclid", "Hickman", "Douglas", "Fleur", "Park",
    "Lake", "Hill", "Court", "Market", "Broad", "Center", "Garfield", "Madison", "Monroe", "Adams",
    "Jackson", "Franklin", "Harrison", "Kennedy", "Bluff", "River", "Prairie", "Meadow", "Sunset",
    "Ridge", "Valley", "Willow", "Birch", "Spruce", "Hickory", "Chestnut", "Poplar", "Orchard",
    "5th", "6th", "9th", "12th", "14th", "16th", "21st", "30th", "42nd", "63rd", "86th", "100th",
];
const STREET_TYPES: &[&str] = &["Street", "Avenue", "Road", "Drive", "Boulevard", "Way", "Parkway"];
const RURAL_ROADS: &[&str] = &[
    "Highway 30", "Highway 3", "US 65", "US 20", "IA 141", "IA 92", "County Road B", "County Road R38",
    "County Road E41", "260th Street", "Old Highway 6", "Highway 151",
];
const DIRS: &[&str] = &["north", "south", "east", "west"];
const SUBJECTS: &[&str] = &["Vehicle 1", "Unit 1", "Driver 1", "V1"];
const OTHERS: &[&str] = &["Vehicle 2", "Unit 2", "Driver 2", "V2"];
const VEHICLE_TYPES: &[&str] =
    &["passenger car", "pickup", "SUV", "semi tractor", "minivan", "sedan", "box truck", "motorcycle", "van"];
const ADVERBS: &[&str] =
    &["", "", "", "then", "suddenly", "reportedly", "apparently", "slowly", "quickly", "allegedly"];

/// Hedges officers drop in front of verbs.
const FILLERS: &[&str] = &["then", "also", "reportedly", "apparently", "allegedly", "evidently", "initially", "subsequently"];
const VERB_SLOTS: &[&str] = &[
    "was", "were", "struck", "collided", "made", "entered", "ran", "failed", "turned", "came", "lost", "left", "slid",
    "backed", "rear-ended", "sideswiped", "crossed", "changed", "exited", "attempted", "pulled", "proceeded", "stated",
    "sustained", "showed", "confirmed", "had", "used", "merged", "hit", "disregarded", "went", "began", "completed",
];
const FILLER_RATE: f64 = 0.5;
/// Interchangeable wordings; each occurrence is reworded independently.
const SYNONYMS: &[&[&str]] = &[
    &["struck", "hit", "impacted"],
    &["traveling", "driving", "headed", "going"],
    &["collided", "crashed"],
    &["entered", "went into", "pulled into"],
    &["stopped", "halted", "waiting"],
    &["roadway", "road", "pavement"],
    &["approximately", "about", "around"],
    &["sustained", "received", "had"],
    &["towed", "hauled"],
    &["vehicle", "car", "auto"],
    &["failed", "neglected"],
    &["made", "executed"],
    &["scene", "area"],
    &["stated", "said", "reported"],
];
const SYNONYM_RATE: f64 = 0.5;

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick(&mut self, items: &[&'static str]) -> &'static str {
        items.choose(&mut self.rng).copied().unwrap_or("")
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn num(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.random_range(lo..=hi)
    }

    fn adv(&mut self) -> String {
        let a = self.pick(ADVERBS);
        if a.is_empty() {
            String::new()
        } else {
            format!("{a} ")
        }
    }

    fn street(&mut self) -> String {
        format!("{} {}", self.pick(STREETS), self.pick(STREET_TYPES))
    }

    fn road(&mut self) -> String {
        if self.chance(0.6) {
            self.street()
        } else {
            self.pick(RURAL_ROADS).to_string()
        }
    }

    fn subject(&mut self) -> &'static str {
        self.pick(SUBJECTS)
    }

    fn other(&mut self) -> &'static str {
        self.pick(OTHERS)
    }

    // ---- neutral sentences ----

    fn opener(&mut self) -> String {
        let s = self.subject();
        let vt = self.pick(VEHICLE_TYPES);
        let dir = self.pick(DIRS);
        let road = self.road();
        let tail = match self.num(0, 3) {
            0 => format!(" at approximately {} mph", self.num(15, 70)),
            1 => format!(" in the {} lane", self.pick(&["left", "right", "inside", "outside"])),
            _ => String::new(),
        };
        match self.num(0, 2) {
            0 => format!("{s} was traveling {dir}bound on {road}{tail}."),
            1 => format!("{s}, a {vt}, was traveling {dir} on {road}{tail}."),
            _ => format!("{s} was driving a {vt} {dir}bound on {road}{tail}."),
        }
    }

    fn neutral(&mut self) -> String {
        match self.num(0, 9) {
            8 => format!(
                "{} came to rest {} the {}.",
                self.pick(&["Vehicle 1", "Vehicle 2", "Unit 1", "Unit 2"]),
                self.pick(&["near", "close to", "just past", "well beyond", "against"]),
                self.pick(&["curb", "fog line", "tree line", "sign post", "point of impact", "snow bank"])
            ),
            9 => {
                let place = self.pick(&["the nearest residence", "the county line", "a bridge", "the school", "the city limits", "a church"]);
                if self.chance(0.5) {
                    format!(
                        "The crash occurred {} {} {} of {place}.",
                        self.num(50, 800),
                        self.pick(&["feet", "yards", "ft"]),
                        self.pick(DIRS)
                    )
                } else {
                    format!("The crash occurred {} {place}.", self.pick(&["near", "close to", "just past", "well beyond"]))
                }
            }
            0 => format!(
                "{} and the road surface was {}.",
                self.pick(&["Weather was clear", "It was raining", "Light snow was falling", "Fog was present", "It was dark"]),
                self.pick(&["dry", "wet", "icy", "snow covered", "slushy"])
            ),
            1 => format!(
                "{} sustained {} damage to the {}.",
                self.pick(&["Vehicle 1", "Vehicle 2", "Unit 1", "Unit 2"]),
                self.pick(&["disabling", "functional", "minor", "moderate"]),
                self.pick(&["front", "rear", "left side", "right side", "passenger side"])
            ),
            2 => self.pick(&[
                "No injuries were reported.",
                "Driver 2 complained of neck pain.",
                "The passenger was transported by ambulance.",
                "Driver 1 complained of back pain.",
                "Both drivers declined medical treatment.",
            ])
            .to_string(),
            3 => format!(
                "Debris was located {} feet {} of the {}.",
                self.num(5, 400),
                self.pick(DIRS),
                self.pick(&["point of impact", "final rest position", "area of impact"])
            ),
            4 => format!(
                "Driver 1 stated {}.",
                self.pick(&[
                    "they did not see the other vehicle",
                    "they were distracted by their phone",
                    "the sun was in their eyes",
                    "they were adjusting the radio",
                    "a passenger distracted them",
                    "they had been awake for many hours",
                ])
            ),
            5 => self
                .pick(&[
                    "Both vehicles were towed from the scene.",
                    "Vehicle 1 was towed from the scene.",
                    "Vehicle 2 was driven from the scene.",
                    "Officers cleared the scene after one hour.",
                ])
                .to_string(),
            6 => format!(
                "A witness traveling {} confirmed the account of {}.",
                self.pick(DIRS),
                self.pick(&["Driver 1", "Driver 2", "both drivers"])
            ),
            _ => format!(
                "The {} showed {} feet of skid marks.",
                self.pick(&["pavement", "roadway surface", "scene diagram"]),
                self.num(10, 150)
            ),
        }
    }

    // ---- intersection evidence ----

    fn intersection_anchor(&mut self) -> String {
        let s = self.subject();
        let o = self.other();
        let adv = self.adv();
        match self.num(0, 8) {
            0 => {
                let adj = self.pick(&[
                    "", "", "busy", "four-way", "signalized", "uncontrolled", "two-way stop", "downtown",
                    "skewed", "rural", "T", "residential",
                ]);
                let adj = if adj.is_empty() { String::new() } else { format!("{adj} ") };
                if self.chance(0.5) {
                    let r = self.intersection_ref();
                    format!("The crash occurred {} {r}.", self.pick(&["at", "in", "within"]))
                } else {
                    let (a, b) = (self.street(), self.street());
                    format!("The crash occurred at the {adj}intersection of {a} and {b}.")
                }
            }
            1 => format!(
                "{s} {adv}{} a {} turn {} {}.",
                self.pick(&["made", "was making", "attempted", "began", "completed", "initiated"]),
                self.pick(&["left", "right"]),
                self.pick(&["onto", "into", "toward"]),
                self.street()
            ),
            2 => {
                let to = if self.chance(0.2) {
                    format!("to {o}")
                } else {
                    self.pick(&["the right of way", "to oncoming traffic", "at the stop sign", "to cross traffic"]).to_string()
                };
                format!("{s} {adv}failed to yield {to}.")
            }
            3 => format!(
                "{s} {adv}{} the {} and struck {o}.",
                self.pick(&["ran", "disregarded", "went through", "entered on"]),
                self.pick(&["red light", "stop sign", "flashing red signal", "yield sign"])
            ),
            4 => format!(
                "The {} {} the intersection was {}.",
                self.pick(&["traffic signal", "stop sign", "signal", "traffic light"]),
                self.pick(&["controlling", "at", "for"]),
                self.pick(&["functioning", "red for Vehicle 1", "green for Vehicle 2", "visible", "working properly"])
            ),
            5 => format!(
                "{s} struck {o} broadside in the {} of the intersection.",
                self.pick(&["middle", "center", "north half", "south half"])
            ),
            6 => format!(
                "{o} {adv}was stopped at the {} on {} when {s} {}.",
                self.pick(&["stop sign", "red light", "stop bar", "traffic signal"]),
                self.street(),
                self.pick(&["pulled out", "entered the cross street", "turned in front of it", "proceeded"])
            ),
            7 => format!(
                "{s} {adv}entered the intersection {} and collided with {o}.",
                self.pick(&["from a stop", "on a yellow light", "after stopping", "without stopping", "from the cross street"])
            ),
            _ => format!(
                "{o} was {} {} when {s} {adv}turned left across its path.",
                self.pick(&["traversing", "entering", "proceeding through"]),
                self.pick(&["the crosswalk", "the intersection", "the cross street"])
            ),
        }
    }

    fn nonintersection_anchor(&mut self) -> String {
        let s = self.subject();
        let o = self.other();
        let adv = self.adv();
        match self.num(0, 8) {
            0 => format!(
                "{s} {adv}{} and {} the {}.",
                self.pick(&["lost control", "left the roadway", "slid off the roadway", "ran off the road"]),
                self.pick(&["entered", "came to rest in", "rolled into"]),
                self.pick(&["ditch", "median", "shoulder", "embankment"])
            ),
            1 => format!(
                "{s} {adv}struck a {} {}.",
                self.pick(&["deer", "tree", "guardrail", "utility pole", "fence", "mailbox", "cable barrier"]),
                self.pick(&["on the shoulder", "off the roadway", "in the ditch", "along the highway"])
            ),
            2 => format!(
                "{s} {adv}rear-ended {o} in {} traffic {}.",
                self.pick(&["heavy", "slow", "stop-and-go", "construction"]),
                format!("{} mile marker {}", self.pick(&["near", "at", "just past"]), self.num(1, 220))
            ),
            3 => format!(
                "{s} {adv}{} from the on-ramp and sideswiped {o} on the interstate.",
                self.pick(&["merged", "was merging", "accelerated"])
            ),
            4 => format!(
                "{s} {adv}{} out of a {} in the parking lot and struck {o}.",
                self.pick(&["backed", "was backing", "reversed"]),
                self.pick(&["parking stall", "parking space", "driveway"])
            ),
            5 => format!(
                "{s} {adv}crossed the center line and {} {o}.",
                self.pick(&["sideswiped", "struck", "hit head-on"])
            ),
            6 => format!(
                "{s} {adv}changed lanes on the interstate {} {o}.",
                self.pick(&["and sideswiped", "into the path of", "and clipped"])
            ),
            7 => format!(
                "{s} {adv}exited on the off-ramp and {} the guardrail.",
                self.pick(&["struck", "scraped", "slid into"])
            ),
            _ => format!(
                "{s} {adv}lost control on a {} of {} and entered the ditch.",
                self.pick(&["curve", "hill", "straight stretch", "bridge deck"]),
                self.pick(RURAL_ROADS)
            ),
        }
    }

    fn anchor(&mut self, label: RoadTypeLabel) -> String {
        match label {
            RoadTypeLabel::Intersection => self.intersection_anchor(),
            RoadTypeLabel::NonIntersection => self.nonintersection_anchor(),
        }
    }

    fn intersection_ref(&mut self) -> String {
        let (a, b) = (self.pick(STREETS), self.street());
        match self.num(0, 3) {
            0 => format!("the intersection of {a} Street and {b}"),
            1 => format!("the {b} intersection"),
            2 => format!("{} intersection", self.pick(RURAL_ROADS)),
            _ => format!("the intersection with {b}"),
        }
    }

    /// Officer-style typos on longer alphabetic words.
    fn typos(&mut self, text: &str, rate: f64) -> String {
        if rate == 0.0 {
            return text.to_string();
        }
        let mut out: Vec<String> = Vec::new();
        for word in text.split(' ') {
            if !out.is_empty() && VERB_SLOTS.contains(&word) && self.chance(FILLER_RATE) {
                out.push(self.pick(FILLERS).to_string());
            }
            let bare = word.trim_end_matches(|c: char| !c.is_ascii_alphanumeric());
            let word = match SYNONYMS.iter().find(|g| g[0] == bare) {
                Some(g) if self.chance(SYNONYM_RATE) => format!("{}{}", self.pick(g), &word[bare.len()..]),
                _ => word.to_string(),
            };
            let mut chars: Vec<char> = word.chars().collect();
            let alpha = chars.iter().take_while(|c| c.is_ascii_alphabetic()).count();
            if alpha >= 5 && self.chance(rate) {
                let i = self.rng.random_range(1..alpha - 1);
                if self.chance(0.5) {
                    chars.swap(i, i + 1);
                } else {
                    chars.remove(i);
                }
            }
            out.push(chars.into_iter().collect::<String>());
        }
        out.join(" ")
    }

    /// A collision description that says nothing about the location.
    fn vague(&mut self) -> String {
        let s = self.subject();
        let o = self.other();
        let adv = self.adv();
        match self.num(0, 5) {
            0 => format!("{s} {adv}struck {o} in the rear."),
            1 => format!("{s} and {o} {adv}collided."),
            2 => format!("{s} {adv}collided with {o}."),
            3 => format!("{s} {adv}struck the {} of {o}.", self.pick(&["side", "front", "left side", "right side"])),
            4 => format!("{o} was {adv}struck by {s}."),
            _ => format!("{s} {adv}made contact with {o}."),
        }
    }

    // ---- ambiguous strata ----

    fn proximity_phrase(&mut self, label: RoadTypeLabel) -> String {
        let r = self.intersection_ref();
        let approx = self.pick(&["approximately ", "about ", "roughly ", ""]);
        match label {
            RoadTypeLabel::NonIntersection => {
                let lead = match self.num(0, 3) {
                    0 | 1 => "The crash occurred".to_string(),
                    2 => format!("{} struck {}", self.subject(), self.other()),
                    _ => "The vehicle came to rest".to_string(),
                };
                if self.chance(0.65) {
                    format!(
                        "{lead} {approx}{} {} {} of {r}.",
                        self.num(120, 900),
                        self.pick(&["feet", "feet", "yards", "ft"]),
                        self.pick(DIRS)
                    )
                } else {
                    format!("{lead} {} {r}.", self.pick(&["near", "close to", "just past", "well beyond"]))
                }
            }
            RoadTypeLabel::Intersection => format!(
                "{} was stopped in the queue {approx}{} feet {} of {r} waiting for the {}.",
                self.other(),
                self.num(20, 90),
                self.pick(DIRS),
                self.pick(&["signal", "light to change", "traffic signal", "stop sign"])
            ),
        }
    }

    fn distractor(&mut self, label: RoadTypeLabel) -> String {
        match label {
            RoadTypeLabel::Intersection => format!(
                "{} had just {} a {}.",
                self.subject(),
                self.pick(&["pulled out of", "exited", "left"]),
                self.pick(&["private driveway", "parking lot", "gas station driveway"])
            ),
            RoadTypeLabel::NonIntersection => format!(
                "{} had {} the intersection of {} and {} {}.",
                self.subject(),
                self.pick(&["come from", "passed through", "cleared"]),
                self.street(),
                self.street(),
                self.pick(&["earlier", "moments before", "several blocks back"])
            ),
        }
    }

    fn specialized_phrase(&mut self, label: RoadTypeLabel) -> String {
        let s = self.subject();
        let o = self.other();
        match label {
            RoadTypeLabel::Intersection => match self.num(0, 3) {
                0 => format!("{o} T-boned {s} {}.", self.pick(&["in the roundabout", "at the RCUT", "in the slip lane"])),
                1 => format!("{s} was using the jughandle when {o} struck it."),
                2 => format!("{s} entered the channelized right turn lane and was struck by {o}."),
                _ => format!("{s} attempted a J-turn at the RCUT and struck {o}."),
            },
            RoadTypeLabel::NonIntersection => match self.num(0, 3) {
                0 => format!("{s} struck the attenuator in the gore area."),
                1 => format!("{s} used the median crossover and was struck by {o}."),
                2 => format!("{s} was traveling on the frontage road when it left the pavement."),
                _ => format!("{s} pulled into the turnout and struck {o}."),
            },
        }
    }

    fn short_text(&mut self, label: RoadTypeLabel) -> String {
        let s = self.subject();
        let o = self.other();
        match label {
            RoadTypeLabel::Intersection => match self.num(0, 3) {
                0 => format!("{s} ran the stop sign and struck {o}."),
                1 => format!("{s} failed to yield while turning left. Struck {o}."),
                2 => format!("{s} entered on red light. Hit {o}."),
                _ => format!("{o} stopped at signal, struck by {s}."),
            },
            RoadTypeLabel::NonIntersection => match self.num(0, 3) {
                0 => format!("{s} struck a deer on {}.", self.pick(RURAL_ROADS)),
                1 => format!("{s} slid off roadway into ditch."),
                2 => format!("{s} rear-ended {o} on the interstate."),
                _ => format!("{s} backed into {o} in parking lot."),
            },
        }
    }

    fn narrative(&mut self, label: RoadTypeLabel, cat: SynthCategory, vague: bool) -> String {
        let mut sentences: Vec<String> = Vec::new();
        match cat {
            SynthCategory::Short => {
                return self.short_text(label);
            }
            SynthCategory::Clear if vague => {
                sentences.push(self.opener());
                sentences.push(self.vague());
                for _ in 0..self.num(3, 4) {
                    sentences.push(self.neutral());
                }
            }
            SynthCategory::Clear => {
                sentences.push(self.opener());
                for _ in 0..self.num(1, 2) {
                    sentences.push(self.anchor(label));
                }
                for _ in 0..self.num(2, 4) {
                    sentences.push(self.neutral());
                }
            }
            SynthCategory::Proximity => {
                sentences.push(self.opener());
                let lead = if label == RoadTypeLabel::NonIntersection && self.chance(0.7) {
                    self.vague()
                } else {
                    self.anchor(label)
                };
                sentences.push(lead);
                sentences.push(self.proximity_phrase(label));
                for _ in 0..self.num(1, 3) {
                    sentences.push(self.neutral());
                }
            }
            SynthCategory::Conflicting => {
                sentences.push(self.opener());
                sentences.push(self.distractor(label));
                for _ in 0..self.num(1, 2) {
                    sentences.push(self.anchor(label));
                }
                for _ in 0..self.num(1, 3) {
                    sentences.push(self.neutral());
                }
            }
            SynthCategory::Specialized => {
                sentences.push(self.opener());
                sentences.push(self.specialized_phrase(label));
                if self.chance(0.5) {
                    sentences.push(self.anchor(label));
                }
                for _ in 0..self.num(2, 3) {
                    sentences.push(self.neutral());
                }
            }
        }
        // opener first, the rest in random order
        sentences[1..].shuffle(&mut self.rng);
        sentences.join(" ")
    }

    fn structured(
        &mut self,
        label: RoadTypeLabel,
        cat: SynthCategory,
        nodes: &[IntersectionNode],
        missing: f64,
    ) -> StructuredFields {
        let is_i = label.is_intersection();
        let node = nodes.choose(&mut self.rng).expect("node grid is never empty");
        let dist = if is_i {
            self.rng.random_range(0.0..25.0)
        } else if cat == SynthCategory::Proximity {
            self.rng.random_range(40.0..280.0)
        } else {
            (self.rng.random_range(60f64.ln()..3000f64.ln())).exp()
        };
        let bearing = self.rng.random_range(0.0..360.0);
        let (lat, lon) = offset_point(node.lat, node.lon, dist, bearing);
        let road_class = weighted(
            &mut self.rng,
            if is_i {
                &[("CITY_STREET", 50), ("LOCAL", 20), ("COUNTY", 15), ("STATE_HWY", 10), ("US_HWY", 5)]
            } else {
                &[("INTERSTATE", 30), ("US_HWY", 20), ("STATE_HWY", 15), ("COUNTY", 15), ("CITY_STREET", 10), ("LOCAL", 10)]
            },
        );
        let maneuver = weighted(
            &mut self.rng,
            if is_i {
                &[("LEFT_TURN", 35), ("RIGHT_TURN", 15), ("STRAIGHT", 35), ("STOPPED", 15)]
            } else {
                &[("STRAIGHT", 55), ("CHANGING_LANES", 15), ("BACKING", 10), ("STOPPED", 10), ("NEGOTIATING_CURVE", 10)]
            },
        );
        let tcd = self.chance(if is_i { 0.75 } else { 0.12 });
        let urban = self.chance(if is_i { 0.7 } else { 0.35 });
        let mut keep = || !self.rng.random_bool(missing);
        let coords = keep();
        StructuredFields {
            latitude: coords.then_some(lat),
            longitude: coords.then_some(lon),
            road_class: keep().then(|| road_class.to_string()),
            tcd_present: keep().then_some(tcd),
            vehicle_maneuver: keep().then(|| maneuver.to_string()),
            rural_urban: keep().then_some(if urban { RuralUrban::Urban } else { RuralUrban::Rural }),
        }
    }
}

fn weighted(rng: &mut ChaCha8Rng, items: &[(&'static str, u32)]) -> &'static str {
    let total: u32 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.random_range(0..total);
    for (s, w) in items {
        if x < *w {
            return s;
        }
        x -= w;
    }
    items[items.len() - 1].0
}

fn node_grid() -> Vec<IntersectionNode> {
    let mut nodes = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            nodes.push(IntersectionNode {
                node_id: format!("N{:03}", i * 20 + j),
                lat: 41.0 + 0.1 * i as f64,
                lon: -96.0 + 0.25 * j as f64,
            });
        }
    }
    nodes
}

/// Generates a synthetic corpus. A pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let n = spec.n_records;
    let mut gen = Gen { rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let nodes = node_grid();

    let n_int = (spec.class_balance * n as f64).round() as usize;
    let mut truths: Vec<RoadTypeLabel> = (0..n)
        .map(|i| RoadTypeLabel::from_bool(i < n_int))
        .collect();
    truths.shuffle(&mut gen.rng);

    let counts = allocate(n, &spec.ambiguity_mix.fractions());
    let mut cats: Vec<SynthCategory> = Vec::with_capacity(n);
    for (c, k) in [
        SynthCategory::Proximity,
        SynthCategory::Short,
        SynthCategory::Conflicting,
        SynthCategory::Specialized,
    ]
    .into_iter()
    .zip(&counts)
    {
        cats.extend(std::iter::repeat_n(c, *k));
    }
    cats.resize(n, SynthCategory::Clear);
    cats.shuffle(&mut gen.rng);

    let n_noisy = (spec.label_noise * n as f64).round() as usize;
    let mut noisy: Vec<bool> = (0..n).map(|i| i < n_noisy).collect();
    noisy.shuffle(&mut gen.rng);

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let truth = truths[i];
        let cat = cats[i];
        let vague = cat == SynthCategory::Clear && gen.chance(spec.vague_rate);
        let narrative = gen.narrative(truth, cat, vague);
        let narrative = gen.typos(&narrative, spec.typo_rate);
        let coded = if noisy[i] { truth.flipped() } else { truth };
        let road_type = match coded {
            RoadTypeLabel::Intersection => gen.pick(&INTERSECTION_SUBLEVELS),
            RoadTypeLabel::NonIntersection => gen.pick(&NON_INTERSECTION_SUBLEVELS),
        }
        .to_string();
        let structured = gen.structured(truth, cat, &nodes, spec.missing_rate);
        let mut key = String::new();
        write!(key, "S{:06}", i + 1).unwrap();
        let record = CrashRecord {
            crash_key: key,
            narrative,
            label: Some(coded),
            structured: (!structured.is_empty()).then_some(structured),
        };
        records.push(SyntheticRecord { record, truth, category: cat, road_type });
    }
    Ok(SyntheticCorpus { spec: spec.clone(), records, nodes })
}
