//! Two-stage named-entity recognition: a span detector scores every
//! candidate token range, a nested decoder picks a non-crossing subset, and
//! an entity classifier assigns each picked span a type.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::annotation::{TokenSpan, TrainingRecord};
use crate::corpus::Pos;
use crate::features::{featurize_span, SparseVector, FEATURE_SPEC_ID};
use crate::linear::{train_binary, BinaryLogistic, GdConfig, OneVsRest, TrainReport, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NerHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_span_len: usize,
    pub threshold: f64,
}

impl Default for NerHyper {
    fn default() -> Self {
        let gd = GdConfig::default();
        Self {
            epochs: gd.epochs,
            learning_rate: gd.learning_rate,
            l2: gd.l2,
            max_span_len: 8,
            threshold: 0.5,
        }
    }
}

impl NerHyper {
    pub fn gd(&self) -> GdConfig {
        GdConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            l2: self.l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no positive examples to train on")]
    NoPositives,
    #[error("no relation examples other than NONE")]
    NoRelations,
    #[error("threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("maximum span length must be at least 1")]
    BadSpanLength,
}

/// A candidate range with its hashed features.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanCandidate {
    pub span: TokenSpan,
    pub features: SparseVector,
}

/// All ranges `[i, j)` with `j - i <= max_len`, in lexicographic order.
pub fn enumerate_spans(n_tokens: usize, max_len: usize) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    for i in 0..n_tokens {
        for j in (i + 1)..=(i + max_len).min(n_tokens) {
            out.push(TokenSpan::new(i, j));
        }
    }
    out
}

pub fn span_candidates(tokens: &[String], pos: &[Pos], max_len: usize) -> Vec<SpanCandidate> {
    enumerate_spans(tokens.len(), max_len)
        .into_iter()
        .map(|span| SpanCandidate {
            span,
            features: featurize_span(tokens, pos, span),
        })
        .collect()
}

/// Greedy nested decoding: candidates scoring at least `threshold` are
/// visited by descending score (ties: earlier start, then longer span) and
/// accepted unless they cross an accepted span. Nesting and disjointness
/// are both allowed. Output is sorted by start, outer spans first.
pub fn decode_nested(scored: &[(TokenSpan, f64)], threshold: f64) -> Vec<TokenSpan> {
    let mut order: Vec<&(TokenSpan, f64)> = scored.iter().filter(|(_, s)| *s >= threshold).collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.start.cmp(&b.0.start))
            .then(b.0.len().cmp(&a.0.len()))
    });
    let mut accepted: Vec<TokenSpan> = Vec::new();
    for (span, _) in order {
        if accepted.iter().any(|a| a == span || a.crosses(span)) {
            continue;
        }
        accepted.push(*span);
    }
    accepted.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    accepted
}

/// Candidate-level training data for the span detector.
fn detector_examples(records: &[TrainingRecord], max_len: usize) -> (Vec<SparseVector>, Vec<bool>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in records {
        for cand in span_candidates(&rec.tokens, &rec.pos, max_len) {
            ys.push(rec.spans.iter().any(|g| g.span == cand.span));
            xs.push(cand.features);
        }
    }
    (xs, ys)
}

/// Binary span detector over all candidates up to `max_span_len`.
pub fn train_span_detector(records: &[TrainingRecord], hyper: &NerHyper) -> Result<(BinaryLogistic, TrainReport), TrainError> {
    check_hyper(hyper)?;
    let (xs, ys) = detector_examples(records, hyper.max_span_len);
    if !ys.iter().any(|y| *y) {
        return Err(TrainError::NoPositives);
    }
    Ok(train_binary(&xs, &ys, Weighting::Balanced, &hyper.gd()))
}

fn check_hyper(hyper: &NerHyper) -> Result<(), TrainError> {
    if !(hyper.threshold > 0.0 && hyper.threshold < 1.0) {
        return Err(TrainError::BadThreshold(hyper.threshold));
    }
    if hyper.max_span_len == 0 {
        return Err(TrainError::BadSpanLength);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityClassifier {
    pub model: OneVsRest,
    /// Set when the training data held a single type; the classifier then
    /// always predicts it.
    pub degenerate: bool,
}

impl EntityClassifier {
    pub fn predict(&self, x: &SparseVector) -> (usize, f64) {
        if self.degenerate {
            return (0, 1.0);
        }
        self.model.predict(x).unwrap_or((0, 0.0))
    }
}

/// One-vs-rest classifier over gold spans. Classes are the sorted distinct
/// gold labels.
pub fn train_entity_classifier(records: &[TrainingRecord], hyper: &NerHyper) -> Result<EntityClassifier, TrainError> {
    let mut classes: Vec<String> = records
        .iter()
        .flat_map(|r| r.spans.iter().map(|s| s.label.clone()))
        .collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return Err(TrainError::NoPositives);
    }
    let mut xs = Vec::new();
    let mut targets = Vec::new();
    for rec in records {
        for gold in &rec.spans {
            xs.push(featurize_span(&rec.tokens, &rec.pos, gold.span));
            targets.push(classes.binary_search(&gold.label).expect("label collected above"));
        }
    }
    let degenerate = classes.len() == 1;
    let (model, _) = OneVsRest::train(classes, &xs, &targets, &hyper.gd());
    Ok(EntityClassifier { model, degenerate })
}

/// A trained two-stage entity recogniser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerModel {
    pub feature_spec: String,
    pub hyper: NerHyper,
    pub type_list: Vec<String>,
    pub span_detector: BinaryLogistic,
    pub entity_classifier: EntityClassifier,
}

/// A decoded, typed entity span.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedEntity {
    pub span: TokenSpan,
    pub label: String,
    pub span_score: f64,
    pub type_score: f64,
}

impl NerModel {
    pub fn train(records: &[TrainingRecord], hyper: &NerHyper) -> Result<Self, TrainError> {
        let (span_detector, _) = train_span_detector(records, hyper)?;
        let entity_classifier = train_entity_classifier(records, hyper)?;
        Ok(Self {
            feature_spec: FEATURE_SPEC_ID.to_string(),
            hyper: *hyper,
            type_list: entity_classifier.model.classes.clone(),
            span_detector,
            entity_classifier,
        })
    }

    /// Candidate spans with detector scores.
    pub fn score_spans(&self, tokens: &[String], pos: &[Pos]) -> Vec<(TokenSpan, f64)> {
        span_candidates(tokens, pos, self.hyper.max_span_len)
            .into_iter()
            .map(|c| (c.span, self.span_detector.score(&c.features)))
            .collect()
    }

    pub fn predict(&self, tokens: &[String], pos: &[Pos]) -> Vec<PredictedEntity> {
        let scored = self.score_spans(tokens, pos);
        decode_nested(&scored, self.hyper.threshold)
            .into_iter()
            .map(|span| {
                let span_score = scored.iter().find(|(s, _)| *s == span).map_or(0.0, |s| s.1);
                let (k, type_score) = self.entity_classifier.predict(&featurize_span(tokens, pos, span));
                PredictedEntity {
                    span,
                    label: self.type_list[k].clone(),
                    span_score,
                    type_score,
                }
            })
            .collect()
    }
}
