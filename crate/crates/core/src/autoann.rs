//! Auto-annotation (rule matches and trained models) and micro-F1
//! evaluation of predicted entities against gold.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, EntityAnnotation, Provenance, RelationAnnotation};
use crate::corpus::{CharSpan, Document, Pos};
use crate::features::FEATURE_SPEC_ID;
use crate::ner::NerModel;
use crate::ontology::{OntologySchema, NO_RELATION};
use crate::rc::RcModel;

/// A single rule match inside a paragraph, in character offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    pub para_id: String,
    pub span: CharSpan,
    pub rule_index: usize,
    pub entity_type: String,
}

/// Resolves overlapping matches from different rules: longer spans win,
/// then earlier rules, then earlier starts. Any overlap (nesting included)
/// eliminates the lower-priority match. Output is sorted by position.
pub fn resolve_rule_matches(mut matches: Vec<RuleMatch>) -> Vec<RuleMatch> {
    matches.sort_by(|a, b| {
        b.span
            .len()
            .cmp(&a.span.len())
            .then(a.rule_index.cmp(&b.rule_index))
            .then(a.span.start.cmp(&b.span.start))
    });
    let mut kept: Vec<RuleMatch> = Vec::new();
    for m in matches {
        let clash = kept
            .iter()
            .any(|k| k.para_id == m.para_id && k.span.start < m.span.end && m.span.start < k.span.end);
        if !clash {
            kept.push(m);
        }
    }
    kept.sort_by(|a, b| (&a.para_id, a.span).cmp(&(&b.para_id, b.span)));
    kept
}

/// Turns resolved matches into `regex`-provenance entities, ordered by
/// paragraph position within `doc`.
pub fn annotations_from_matches(doc: &Document, matches: Vec<RuleMatch>) -> AnnotationSet {
    let order: BTreeMap<&str, usize> = doc
        .paragraphs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.para_id.as_str(), i))
        .collect();
    let mut resolved = resolve_rule_matches(matches);
    resolved.sort_by_key(|m| (order.get(m.para_id.as_str()).copied().unwrap_or(usize::MAX), m.span));
    let mut set = AnnotationSet::new(doc.doc_id.clone());
    for m in resolved {
        let Some(para) = doc.paragraph(&m.para_id) else { continue };
        let Some(surface) = para.slice(m.span) else { continue };
        set.entities.push(EntityAnnotation {
            ann_id: format!("T{}", set.entities.len() + 1),
            entity_type: m.entity_type,
            para_id: m.para_id,
            span: m.span,
            surface: surface.to_string(),
            provenance: Provenance::Regex,
        });
    }
    set
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelSchemaError {
    #[error("model feature spec {found:?} does not match {expected:?}")]
    FeatureSpec { found: String, expected: String },
    #[error("entity type {0:?} from the model is not in the schema")]
    UnknownEntityType(String),
    #[error("relation {0:?} from the model is not in the schema")]
    UnknownRelation(String),
}

/// Applies the NER and RC models sentence by sentence. Relation pairs
/// labelled `NONE` or not allowed by the schema are dropped.
pub fn auto_annotate(doc: &Document, ner: &NerModel, rc: &RcModel, schema: &OntologySchema) -> Result<AnnotationSet, ModelSchemaError> {
    for spec in [&ner.feature_spec, &rc.feature_spec] {
        if spec != FEATURE_SPEC_ID {
            return Err(ModelSchemaError::FeatureSpec {
                found: spec.clone(),
                expected: FEATURE_SPEC_ID.to_string(),
            });
        }
    }
    if let Some(t) = ner.type_list.iter().find(|t| !schema.has_entity_type(t)) {
        return Err(ModelSchemaError::UnknownEntityType(t.clone()));
    }
    let known = schema.relation_names();
    if let Some(r) = rc.relations().find(|r| !known.contains(*r)) {
        return Err(ModelSchemaError::UnknownRelation(r.to_string()));
    }

    let mut set = AnnotationSet::new(doc.doc_id.clone());
    for (para, sent) in doc.sentences() {
        let tokens: Vec<String> = sent.tokens.iter().map(|t| t.surface.clone()).collect();
        let pos: Vec<Pos> = sent.tokens.iter().map(|t| t.pos.unwrap_or(Pos::X)).collect();
        let predicted = ner.predict(&tokens, &pos);
        let first_id = set.entities.len();
        for p in &predicted {
            let span = CharSpan::new(sent.tokens[p.span.start].span.start, sent.tokens[p.span.end - 1].span.end);
            set.entities.push(EntityAnnotation {
                ann_id: format!("T{}", set.entities.len() + 1),
                entity_type: p.label.clone(),
                para_id: para.para_id.clone(),
                span,
                surface: para.slice(span).unwrap_or_default().to_string(),
                provenance: Provenance::Model,
            });
        }
        for (h, head) in predicted.iter().enumerate() {
            for (t, tail) in predicted.iter().enumerate() {
                if h == t {
                    continue;
                }
                let label = rc.predict(&tokens, (head.span, &head.label), (tail.span, &tail.label), schema);
                if label == NO_RELATION {
                    continue;
                }
                set.relations.push(RelationAnnotation {
                    ann_id: format!("R{}", set.relations.len() + 1),
                    relation_type: label.to_string(),
                    arg1: format!("T{}", first_id + h + 1),
                    arg2: format!("T{}", first_id + t + 1),
                    provenance: Provenance::Model,
                });
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeScores {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TypeScores {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if gold > 0 { tp as f64 / gold as f64 } else { 0.0 };
        Self {
            true_positives: tp,
            predicted,
            gold,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub per_type: BTreeMap<String, TypeScores>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction is for document {pred:?} but gold is for {gold:?}")]
    DocumentMismatch { pred: String, gold: String },
}

type EntityKey = (String, CharSpan, String);

fn keys(set: &AnnotationSet) -> BTreeSet<EntityKey> {
    set.entities
        .iter()
        .map(|e| (e.para_id.clone(), e.span, e.entity_type.clone()))
        .collect()
}

/// Exact (paragraph, span, type) matching, micro-averaged over types.
pub fn evaluate_micro_f1(pred: &AnnotationSet, gold: &AnnotationSet) -> Result<EvalResult, EvalError> {
    evaluate_many(&[(pred, gold)])
}

/// Pools counts over several documents before computing the scores.
pub fn evaluate_many(pairs: &[(&AnnotationSet, &AnnotationSet)]) -> Result<EvalResult, EvalError> {
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (pred, gold) in pairs {
        if pred.doc_id != gold.doc_id {
            return Err(EvalError::DocumentMismatch {
                pred: pred.doc_id.clone(),
                gold: gold.doc_id.clone(),
            });
        }
        let p = keys(pred);
        let g = keys(gold);
        for k in &p {
            let c = counts.entry(k.2.clone()).or_default();
            c.1 += 1;
            if g.contains(k) {
                c.0 += 1;
            }
        }
        for k in &g {
            counts.entry(k.2.clone()).or_default().2 += 1;
        }
    }
    let (tp, np, ng) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let total = TypeScores::from_counts(tp, np, ng);
    Ok(EvalResult {
        precision: total.precision,
        recall: total.recall,
        micro_f1: total.f1,
        true_positives: tp,
        predicted: np,
        gold: ng,
        per_type: counts
            .into_iter()
            .map(|(t, (tp, p, g))| (t, TypeScores::from_counts(tp, p, g)))
            .collect(),
    })
}
