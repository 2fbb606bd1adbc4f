//! Relation classification over every ordered pair of entities in a
//! sentence, with predictions outside the ontology masked to `NONE`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::{TokenSpan, TrainingRecord};
use crate::features::{featurize_pair, SparseVector, TypedSpan, FEATURE_SPEC_ID};
use crate::linear::{GdConfig, OneVsRest};
use crate::ner::TrainError;
use crate::ontology::{OntologySchema, NO_RELATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcModel {
    pub feature_spec: String,
    pub gd: GdConfig,
    /// `NONE` first, then the schema's relation names in sorted order.
    pub relation_list: Vec<String>,
    pub classifier: OneVsRest,
}

/// Training examples skipped because their label is not a schema relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RcTrainStats {
    pub examples: usize,
    pub skipped_unknown_label: usize,
}

pub fn train_rc(records: &[TrainingRecord], schema: &OntologySchema, gd: &GdConfig) -> Result<(RcModel, RcTrainStats), TrainError> {
    let mut relation_list = Vec::with_capacity(1 + schema.relation_names().len());
    relation_list.push(NO_RELATION.to_string());
    relation_list.extend(schema.relation_names());

    let mut xs = Vec::new();
    let mut targets = Vec::new();
    let mut stats = RcTrainStats::default();
    for rec in records {
        for pair in &rec.pairs {
            let Some(k) = relation_list.iter().position(|r| *r == pair.label) else {
                stats.skipped_unknown_label += 1;
                continue;
            };
            let head = &rec.spans[pair.head];
            let tail = &rec.spans[pair.tail];
            xs.push(featurize_pair(
                &rec.tokens,
                TypedSpan { span: head.span, label: &head.label },
                TypedSpan { span: tail.span, label: &tail.label },
            ));
            targets.push(k);
        }
    }
    stats.examples = xs.len();
    if !targets.iter().any(|&k| k != 0) {
        return Err(TrainError::NoRelations);
    }
    let (classifier, _) = OneVsRest::train(relation_list.clone(), &xs, &targets, gd);
    Ok((
        RcModel {
            feature_spec: FEATURE_SPEC_ID.to_string(),
            gd: *gd,
            relation_list,
            classifier,
        },
        stats,
    ))
}

impl RcModel {
    /// Unmasked best label for a feature vector.
    pub fn predict_raw(&self, x: &SparseVector) -> &str {
        let (k, _) = self.classifier.predict(x).unwrap_or((0, 0.0));
        &self.relation_list[k]
    }

    /// Label for the ordered pair; `NONE` when the classifier says so or
    /// when the schema does not allow the predicted triple.
    pub fn predict(&self, tokens: &[String], head: (TokenSpan, &str), tail: (TokenSpan, &str), schema: &OntologySchema) -> &str {
        let x = featurize_pair(
            tokens,
            TypedSpan { span: head.0, label: head.1 },
            TypedSpan { span: tail.0, label: tail.1 },
        );
        let label = self.predict_raw(&x);
        if label != NO_RELATION && !schema.allowed(head.1, label, tail.1) {
            return NO_RELATION;
        }
        label
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relation_list.iter().map(String::as_str).filter(|r| *r != NO_RELATION)
    }
}
