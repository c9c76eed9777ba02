//! Narrative-to-vector pipeline: regional canonicalization, tokenization,
//! ambiguity-aware term weighting, auxiliary lexicon/mitigation features and
//! early or hybrid fusion with structured fields.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ambiguity::{
    detect, extract_location_phrases, proximity_weight_tokens, AmbiguityFlags, AmbiguityLexicons, LexiconPaths, LocationRole,
};
use crate::corpus::CrashRecord;
use crate::error::{Error, Result};
use crate::erroranalysis::{MitigationConfig, MitigationKind, Mitigations};
use crate::fusion::{fuse_early, read_nodes, FusionConfig, FusionMode, HybridModulation, IntersectionNode};
use crate::textpipe::{fit_vocabulary, tokenize, FeatureVector, LexiconFeatures, StopWords, TokenStream, Vocabulary, VocabularyConfig};

/// Ambiguity-aware block: location site, location reference, remoteness.
const AWARE_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub vocabulary: VocabularyConfig,
    /// Proximity down-weighting and location-phrase features for flagged narratives.
    pub ambiguity_aware: bool,
    /// Append the weighted domain-lexicon block.
    pub lexicon_features: bool,
    /// Norm of the lexicon block relative to the unit text block.
    pub lexicon_weight: f64,
    pub mitigations: MitigationConfig,
    pub fusion: FusionConfig,
    pub lexicons: LexiconPaths,
    pub stopwords: Option<PathBuf>,
    pub domain_lexicon: Option<PathBuf>,
    /// `NODE_ID,LAT,LON` inventory; distance features are missing without it.
    pub nodes: Option<PathBuf>,
    /// In-memory node inventory; takes precedence over `nodes`.
    #[serde(skip)]
    pub node_inventory: Option<Vec<IntersectionNode>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vocabulary: VocabularyConfig::default(),
            ambiguity_aware: false,
            lexicon_features: false,
            lexicon_weight: 0.5,
            mitigations: MitigationConfig::default(),
            fusion: FusionConfig::default(),
            lexicons: LexiconPaths::default(),
            stopwords: None,
            domain_lexicon: None,
            nodes: None,
            node_inventory: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.vocabulary.ngram_range.validate()?;
        self.fusion.validate()?;
        if !(self.lexicon_weight.is_finite() && self.lexicon_weight >= 0.0) {
            return Err(Error::Config("lexicon_weight must be non-negative".into()));
        }
        if !(self.mitigations.aux_weight.is_finite() && self.mitigations.aux_weight >= 0.0) {
            return Err(Error::Config("aux_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything needed to rebuild a fitted pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineState {
    pub config: PipelineConfig,
    pub vocabulary: String,
    pub nodes: Option<Vec<IntersectionNode>>,
}

/// A narrative after canonicalization and flagging.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub text: String,
    pub stream: TokenStream,
    pub flags: AmbiguityFlags,
}

/// Fitted pipeline. Transforms are pure and safe to run in parallel.
#[derive(Clone, Debug)]
pub struct TextPipeline {
    config: PipelineConfig,
    vocab: Vocabulary,
    lexicons: AmbiguityLexicons,
    domain: LexiconFeatures,
    mitigations: Mitigations,
    nodes: Option<Vec<IntersectionNode>>,
    indicator: Vec<bool>,
    space: u64,
    structured_space: u64,
}

impl TextPipeline {
    pub fn fit(records: &[CrashRecord], config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let nodes = match &config.node_inventory {
            Some(n) => Some(n.clone()),
            None => config.nodes.as_deref().map(read_nodes).transpose()?,
        };
        let stop = match &config.stopwords {
            Some(p) => StopWords::parse(&crate::data::read_or_default(Some(p), "")?),
            None => StopWords::builtin(),
        };
        let mitigations = Mitigations::load(&config.mitigations)?;
        let streams: Vec<TokenStream> = records.iter().map(|r| tokenize(&canonical(&mitigations, &r.narrative))).collect();
        let vocab = fit_vocabulary(&streams, &config.vocabulary, &stop)?;
        Self::assemble(config.clone(), vocab, nodes, mitigations)
    }

    pub fn from_state(state: PipelineState) -> Result<Self> {
        let vocab = Vocabulary::from_json(&state.vocabulary)?;
        let mitigations = Mitigations::load(&state.config.mitigations)?;
        Self::assemble(state.config, vocab, state.nodes, mitigations)
    }

    fn assemble(config: PipelineConfig, vocab: Vocabulary, nodes: Option<Vec<IntersectionNode>>, mitigations: Mitigations) -> Result<Self> {
        let lexicons = AmbiguityLexicons::load(&config.lexicons)?;
        let domain = match &config.domain_lexicon {
            Some(p) => LexiconFeatures::parse(&crate::data::read_or_default(Some(p), "")?)?,
            None => LexiconFeatures::builtin(),
        };
        let indicator = vocab.terms().iter().map(|t| is_indicator_term(t, &lexicons)).collect();
        let mut h = Sha256::new();
        h.update(vocab.id().to_le_bytes());
        h.update(serde_json::to_vec(&config).expect("config serializes"));
        let space = u64::from_le_bytes(h.finalize()[..8].try_into().unwrap());
        let mut h = Sha256::new();
        h.update(b"structured");
        h.update(serde_json::to_vec(&config.fusion.encoder).expect("encoder serializes"));
        let structured_space = u64::from_le_bytes(h.finalize()[..8].try_into().unwrap());
        Ok(Self { config, vocab, lexicons, domain, mitigations, nodes, indicator, space, structured_space })
    }

    pub fn state(&self) -> PipelineState {
        PipelineState { config: self.config.clone(), vocabulary: self.vocab.to_json(), nodes: self.nodes.clone() }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn lexicons(&self) -> &AmbiguityLexicons {
        &self.lexicons
    }

    pub fn mitigations(&self) -> &Mitigations {
        &self.mitigations
    }

    pub fn nodes(&self) -> Option<&[IntersectionNode]> {
        self.nodes.as_deref()
    }

    /// Identifier of the full feature space produced by `transform`.
    pub fn space(&self) -> u64 {
        self.space
    }

    pub fn structured_space(&self) -> u64 {
        self.structured_space
    }

    /// Hybrid fusion builds on the ambiguity-aware preprocessing.
    fn aware_features(&self) -> bool {
        self.config.ambiguity_aware || self.config.fusion.mode == FusionMode::Hybrid
    }

    fn aware_dim(&self) -> usize {
        if self.aware_features() {
            AWARE_DIM
        } else {
            0
        }
    }

    fn lexicon_dim(&self) -> usize {
        if self.config.lexicon_features {
            self.domain.len()
        } else {
            0
        }
    }

    fn structured_dim(&self) -> usize {
        if self.config.fusion.mode == FusionMode::Early {
            self.config.fusion.encoder.dim()
        } else {
            0
        }
    }

    pub fn dim(&self) -> usize {
        self.vocab.len() + self.lexicon_dim() + self.aware_dim() + self.mitigations.aux_dim() + self.structured_dim()
    }

    /// Canonicalizes (when the regional lexicon is enabled), tokenizes and flags.
    pub fn prepare(&self, narrative: &str) -> Prepared {
        let text = canonical(&self.mitigations, narrative);
        let stream = tokenize(&text);
        let flags = detect(&stream, &self.lexicons);
        Prepared { text, stream, flags }
    }

    pub fn flags(&self, narrative: &str) -> AmbiguityFlags {
        detect(&tokenize(narrative), &self.lexicons)
    }

    /// Weight on intersection-indicator terms for this narrative.
    pub fn intersection_weight(&self, prep: &Prepared, modulation: HybridModulation) -> f64 {
        let proximity_enabled = self.config.ambiguity_aware
            || self.config.fusion.mode == FusionMode::Hybrid
            || self.mitigations.has(MitigationKind::DistanceWeighting);
        let w = if proximity_enabled && prep.flags.any() && !modulation.suppress_proximity {
            proximity_weight_tokens(&prep.stream.tokens, &self.lexicons.proximity)
        } else {
            1.0
        };
        w * modulation.intersection_scale
    }

    /// Unnormalized TF-IDF pairs with intersection-indicator terms scaled.
    pub fn weighted_text_pairs(&self, prep: &Prepared, modulation: HybridModulation) -> Vec<(u32, f64)> {
        let w = self.intersection_weight(prep, modulation);
        let counts = self.vocab.counts(&prep.stream);
        counts
            .iter()
            .filter_map(|(t, tf)| {
                let i = self.vocab.index_of(t)?;
                let scale = if self.indicator[i as usize] { w } else { 1.0 };
                Some((i, tf * scale * self.vocab.idf(i)))
            })
            .collect()
    }

    fn modulation(&self, record: &CrashRecord) -> HybridModulation {
        if self.config.fusion.mode == FusionMode::Hybrid {
            HybridModulation::from_fields(record.structured.as_ref(), self.nodes(), &self.config.fusion)
        } else {
            HybridModulation::NEUTRAL
        }
    }

    /// Feature vector for `record` in this pipeline's space.
    pub fn transform(&self, record: &CrashRecord) -> FeatureVector {
        let prep = self.prepare(&record.narrative);
        let pairs = self.weighted_text_pairs(&prep, self.modulation(record));
        let mut v = FeatureVector::from_pairs(pairs, self.vocab.len(), self.space).normalized();

        let mut touched = false;
        let mut push = |v: FeatureVector, block: Vec<(usize, f64)>, dim: usize| {
            touched |= !block.is_empty();
            v.concat(&block, dim, self.space)
        };
        if self.config.lexicon_features {
            let raw = self.domain.features(&prep.stream);
            let norm = raw.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
            let block = if norm > 0.0 {
                raw.into_iter().map(|(i, x)| (i, x / norm * self.config.lexicon_weight)).collect()
            } else {
                Vec::new()
            };
            v = push(v, block, self.domain.len());
        }
        let aux = self.config.mitigations.aux_weight;
        if self.aware_features() {
            let mut block = Vec::new();
            if prep.flags.proximity {
                let phrases = extract_location_phrases(&prep.text, &self.lexicons.proximity);
                let site = phrases.iter().any(|p| p.role == LocationRole::Site);
                let reference = phrases.iter().any(|p| p.role == LocationRole::Reference);
                if site {
                    block.push((0, aux));
                }
                if reference {
                    block.push((1, aux));
                }
                // how strongly the cues place the crash away from the intersection
                let remoteness = 1.0 - proximity_weight_tokens(&prep.stream.tokens, &self.lexicons.proximity);
                if remoteness > 0.0 {
                    block.push((2, remoteness * aux));
                }
            }
            v = push(v, block, AWARE_DIM);
        }
        if self.mitigations.has(MitigationKind::TurnMovement) {
            let hit = self.mitigations.turn.matches(&prep.text);
            v = push(v, if hit { vec![(0, aux)] } else { Vec::new() }, 1);
        }
        if self.mitigations.has(MitigationKind::DeviceMapping) {
            let hit = self.mitigations.device.matches_tokens(&prep.stream.tokens);
            v = push(v, if hit { vec![(0, aux)] } else { Vec::new() }, 1);
        }
        if self.config.fusion.mode == FusionMode::Early {
            let enc = &self.config.fusion.encoder;
            match &record.structured {
                Some(f) => {
                    let block = enc.scaled(f, self.nodes());
                    let pairs: Vec<(usize, f64)> =
                        block.sparse().into_iter().map(|(i, x)| (i, x * self.config.fusion.structured_weight)).collect();
                    v = push(v, pairs, enc.dim());
                }
                None => v = push(v, Vec::new(), enc.dim()),
            }
        }
        if touched {
            v.normalized()
        } else {
            v
        }
    }

    pub fn transform_all(&self, records: &[CrashRecord]) -> Vec<FeatureVector> {
        use rayon::prelude::*;
        records.par_iter().map(|r| self.transform(r)).collect()
    }

    /// Structured-only vector for the late-fusion side model; `None` when the
    /// record carries no structured fields.
    pub fn structured_vector(&self, record: &CrashRecord) -> Option<FeatureVector> {
        let f = record.structured.as_ref()?;
        let enc = &self.config.fusion.encoder;
        let block = enc.scaled(f, self.nodes());
        let empty = FeatureVector::zero(0, self.structured_space);
        Some(fuse_early(empty, &block, 1.0, self.structured_space))
    }
}

fn canonical(m: &Mitigations, narrative: &str) -> String {
    if m.has(MitigationKind::RegionalLexicon) {
        m.regional.canonicalize(narrative)
    } else {
        narrative.to_string()
    }
}

/// An n-gram carries intersection evidence when it contains an anchor noun or
/// an intersection-indicator phrase.
fn is_indicator_term(term: &str, lex: &AmbiguityLexicons) -> bool {
    let toks: Vec<String> = term.split(' ').map(str::to_string).collect();
    toks.iter().any(|t| lex.proximity.is_anchor(t)) || lex.indicators.intersection.iter().any(|p| p.occurs_in(&toks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StructuredFields;
    use crate::textpipe::NgramRange;

    fn records(texts: &[&str]) -> Vec<CrashRecord> {
        texts.iter().enumerate().map(|(i, t)| CrashRecord::new(format!("K{i}"), *t)).collect()
    }

    fn corpus() -> Vec<CrashRecord> {
        records(&[
            "red car entered the intersection and struck the blue truck",
            "red car entered the intersection on a green light",
            "blue truck slid into the ditch near the intersection",
            "blue truck slid into the ditch on the icy road",
            "red car struck a deer on the icy road",
        ])
    }

    fn unigram() -> VocabularyConfig {
        VocabularyConfig { ngram_range: NgramRange::new(1, 1).unwrap(), min_df: 1, max_features: 1000 }
    }

    #[test]
    fn plain_pipeline_matches_vocabulary() {
        let p = TextPipeline::fit(&corpus(), &PipelineConfig::default()).unwrap();
        let r = &corpus()[0];
        let direct = p.vocabulary().vectorize(&tokenize(&r.narrative));
        let v = p.transform(r);
        assert_eq!(v.indices, direct.indices);
        assert_eq!(v.values, direct.values);
        assert_eq!(v.dim, p.dim());
        assert_eq!(v.space, p.space());
    }

    #[test]
    fn aware_leaves_clear_records_bit_identical() {
        let long = "the red car was traveling north on the main road in the right lane at a normal speed when the driver looked down and the car drifted off the road and struck a fence post";
        let recs = records(&[long, long]);
        let plain = TextPipeline::fit(&recs, &PipelineConfig::default()).unwrap();
        let aware = TextPipeline::fit(&recs, &PipelineConfig { ambiguity_aware: true, ..Default::default() }).unwrap();
        assert!(!aware.prepare(long).flags.any());
        let (a, b) = (plain.transform(&recs[0]), aware.transform(&recs[0]));
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn proximity_downweights_intersection_terms() {
        let cfg = PipelineConfig { vocabulary: unigram(), ambiguity_aware: true, ..Default::default() };
        let p = TextPipeline::fit(&corpus(), &cfg).unwrap();
        let prep = p.prepare("blue truck slid into the ditch near the intersection");
        assert_eq!(p.intersection_weight(&prep, HybridModulation::NEUTRAL), 0.4);
        let pairs = p.weighted_text_pairs(&prep, HybridModulation::NEUTRAL);
        let i = p.vocabulary().index_of("intersection").unwrap();
        let got = pairs.iter().find(|(j, _)| *j == i).unwrap().1;
        assert!((got - 0.4 * p.vocabulary().idf(i)).abs() < 1e-12);
        // hybrid suppression restores full weight
        let m = HybridModulation { intersection_scale: 1.0, suppress_proximity: true };
        assert_eq!(p.intersection_weight(&prep, m), 1.0);
    }

    #[test]
    fn hybrid_tcd_scales_indicator_terms() {
        let recs = records(&["car entered intersection", "car entered intersection", "truck hit deer"]);
        let base = PipelineConfig { vocabulary: unigram(), ..Default::default() };
        let hybrid = PipelineConfig { fusion: FusionConfig::with_mode(FusionMode::Hybrid), ..base.clone() };
        let p = TextPipeline::fit(&recs, &hybrid).unwrap();
        let plain = TextPipeline::fit(&recs, &base).unwrap();

        let mut rec = recs[0].clone();
        // no structured fields: same values as the plain pipeline
        assert_eq!(p.transform(&rec).values, plain.transform(&rec).values);

        rec.structured = Some(StructuredFields { tcd_present: Some(true), ..Default::default() });
        let idf = |t: &str| p.vocabulary().idf(p.vocabulary().index_of(t).unwrap());
        // hand-computed: tf=1 per term, intersection scaled by 1.5
        let raw = [idf("car"), idf("entered"), 1.5 * idf("intersection")];
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = p.transform(&rec);
        for (t, r) in ["car", "entered", "intersection"].iter().zip(raw) {
            assert!((v.get(p.vocabulary().index_of(t).unwrap()) - r / norm).abs() < 1e-12, "{t}");
        }

        let neutral = PipelineConfig { fusion: FusionConfig { tcd_factor: 1.0, ..FusionConfig::with_mode(FusionMode::Hybrid) }, ..base };
        let p1 = TextPipeline::fit(&recs, &neutral).unwrap();
        assert_eq!(p1.transform(&rec).values, plain.transform(&rec).values);
    }

    #[test]
    fn early_fusion_dimension_and_reduction() {
        let cfg = PipelineConfig { fusion: FusionConfig::with_mode(FusionMode::Early), ..Default::default() };
        let p = TextPipeline::fit(&corpus(), &cfg).unwrap();
        let plain = TextPipeline::fit(&corpus(), &PipelineConfig::default()).unwrap();
        let mut r = corpus()[0].clone();
        let v = p.transform(&r);
        assert_eq!(v.dim, plain.vocabulary().len() + cfg.fusion.encoder.dim());
        assert_eq!(v.values, plain.transform(&r).values);
        r.structured = Some(StructuredFields { tcd_present: Some(true), ..Default::default() });
        let v = p.transform(&r);
        assert!(v.indices.iter().any(|&i| i as usize >= plain.vocabulary().len()));
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mitigation_aux_features() {
        let cfg = PipelineConfig {
            mitigations: MitigationConfig::with([MitigationKind::TurnMovement, MitigationKind::DeviceMapping]),
            ..Default::default()
        };
        let p = TextPipeline::fit(&corpus(), &cfg).unwrap();
        let base = p.vocabulary().len();
        let r = CrashRecord::new("x", "red car made a left turn and ran the stop sign");
        let v = p.transform(&r);
        assert_eq!(v.dim, base + 2);
        assert!(v.get(base as u32) > 0.0 && v.get(base as u32 + 1) > 0.0);
        let r = CrashRecord::new("x", "blue truck slid into the ditch on the icy road");
        let plain = TextPipeline::fit(&corpus(), &PipelineConfig::default()).unwrap();
        assert_eq!(p.transform(&r).values, plain.transform(&r).values);
    }

    #[test]
    fn state_roundtrip_preserves_space() {
        let cfg = PipelineConfig { lexicon_features: true, ..Default::default() };
        let p = TextPipeline::fit(&corpus(), &cfg).unwrap();
        let json = serde_json::to_string(&p.state()).unwrap();
        let q = TextPipeline::from_state(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(p.space(), q.space());
        assert_eq!(p.transform(&corpus()[1]), q.transform(&corpus()[1]));
    }
}
