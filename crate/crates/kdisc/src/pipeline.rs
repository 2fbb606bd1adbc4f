//! Multi-document compositions of the core operations, shared by the
//! command-line tool and the service.

use std::collections::BTreeMap;

use kdisc_core::annotation::{export_training, AnnotationSet, ExportWarning, Provenance, TrainingRecord};
use kdisc_core::autoann::{auto_annotate, evaluate_many, EvalError, EvalResult, ModelSchemaError};
use kdisc_core::corpus::{Corpus, Document, IngestError, PosTagger};
use kdisc_core::graph::{build_graph, GraphError, PropertyGraph};
use kdisc_core::ner::{NerHyper, NerModel, TrainError};
use kdisc_core::ontology::OntologySchema;
use kdisc_core::qa::{ask, Answer, GenerationBackend, PromptTemplates, QaError, QaResources, Question};
use kdisc_core::rc::{train_rc, RcModel, RcTrainStats};
use kdisc_core::retrieval::{index_paragraphs, Embedder, VectorIndex};

use crate::archive::{looks_like_zip, read_archive, ArchiveError};
use crate::ingest::{ingest, Format};

#[derive(Debug, thiserror::Error)]
pub enum IngestFailure {
    #[error("{name}: {source}")]
    Document { name: String, source: IngestError },
    #[error("{name}: {source}")]
    Archive { name: String, source: ArchiveError },
}

/// Ingests payloads, expanding zip archives. `format` of `None` means
/// sniff each payload. Documents come back in input order; a failing
/// payload is reported and skipped.
pub fn ingest_payloads(
    inputs: Vec<(String, Option<Format>, Vec<u8>)>,
    tagger: &dyn PosTagger,
) -> (Vec<Document>, Vec<IngestFailure>) {
    let mut docs = Vec::new();
    let mut failures = Vec::new();
    let one = |name: String, format: Option<Format>, payload: &[u8], docs: &mut Vec<Document>, failures: &mut Vec<IngestFailure>| {
        let format = format.unwrap_or_else(|| Format::sniff(payload));
        match ingest(payload, format, tagger) {
            Ok(d) => docs.push(d),
            Err(source) => failures.push(IngestFailure::Document { name, source }),
        }
    };
    for (name, format, payload) in inputs {
        if looks_like_zip(&payload) {
            match read_archive(&payload) {
                Ok((entries, _)) => {
                    for e in entries {
                        one(format!("{name}:{}", e.name), Some(e.format), &e.payload, &mut docs, &mut failures);
                    }
                }
                Err(source) => failures.push(IngestFailure::Archive { name, source }),
            }
        } else {
            one(name, format, &payload, &mut docs, &mut failures);
        }
    }
    (docs, failures)
}

/// Training records for every document that has an annotation set, in
/// corpus order. Sets for unknown documents are ignored.
pub fn training_records(corpus: &Corpus, sets: &[AnnotationSet]) -> (Vec<TrainingRecord>, Vec<ExportWarning>) {
    let by_doc: BTreeMap<&str, &AnnotationSet> = sets.iter().map(|s| (s.doc_id.as_str(), s)).collect();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for doc in &corpus.documents {
        if let Some(set) = by_doc.get(doc.doc_id.as_str()) {
            let (r, w) = export_training(doc, set);
            records.extend(r);
            warnings.extend(w);
        }
    }
    (records, warnings)
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub ner: NerModel,
    pub rc: RcModel,
    pub rc_stats: RcTrainStats,
    pub records: usize,
    pub warnings: Vec<ExportWarning>,
}

pub fn train_models(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    schema: &OntologySchema,
    hyper: &NerHyper,
) -> Result<TrainedModels, TrainError> {
    let (records, warnings) = training_records(corpus, sets);
    let ner = NerModel::train(&records, hyper)?;
    let (rc, rc_stats) = train_rc(&records, schema, &hyper.gd())?;
    Ok(TrainedModels {
        ner,
        rc,
        rc_stats,
        records: records.len(),
        warnings,
    })
}

pub fn auto_annotate_all(
    docs: &[Document],
    ner: &NerModel,
    rc: &RcModel,
    schema: &OntologySchema,
) -> Result<Vec<AnnotationSet>, ModelSchemaError> {
    docs.iter().map(|d| auto_annotate(d, ner, rc, schema)).collect()
}

/// Replaces the machine annotations of `existing` with `fresh` ones.
/// Human annotations are kept; a fresh entity identical to a kept one
/// (paragraph, span, type) is dropped and its relations are re-pointed to
/// the kept entity. The result is canonicalised.
pub fn merge_machine_annotations(existing: &AnnotationSet, fresh: &AnnotationSet) -> AnnotationSet {
    let mut out = AnnotationSet::new(existing.doc_id.clone());
    out.entities = existing
        .entities
        .iter()
        .filter(|e| e.provenance == Provenance::Human)
        .cloned()
        .collect();
    let kept_ids: Vec<&str> = out.entities.iter().map(|e| e.ann_id.as_str()).collect();
    out.relations = existing
        .relations
        .iter()
        .filter(|r| {
            r.provenance == Provenance::Human && kept_ids.contains(&r.arg1.as_str()) && kept_ids.contains(&r.arg2.as_str())
        })
        .cloned()
        .collect();
    let mut next = out.entities.len() + out.relations.len() + 1;
    let mut remap: BTreeMap<&str, String> = BTreeMap::new();
    for e in &fresh.entities {
        let same = out
            .entities
            .iter()
            .find(|k| k.para_id == e.para_id && k.span == e.span && k.entity_type == e.entity_type);
        let id = match same {
            Some(k) => k.ann_id.clone(),
            None => {
                let mut e = e.clone();
                e.ann_id = format!("T{next}");
                next += 1;
                let id = e.ann_id.clone();
                out.entities.push(e);
                id
            }
        };
        remap.insert(e.ann_id.as_str(), id);
    }
    for r in &fresh.relations {
        let (Some(a), Some(b)) = (remap.get(r.arg1.as_str()), remap.get(r.arg2.as_str())) else { continue };
        let dup = out
            .relations
            .iter()
            .any(|k| &k.arg1 == a && &k.arg2 == b && k.relation_type == r.relation_type);
        if !dup && a != b {
            let mut r = r.clone();
            r.ann_id = format!("R{next}");
            next += 1;
            r.arg1 = a.clone();
            r.arg2 = b.clone();
            out.relations.push(r);
        }
    }
    out.canonicalize()
}

/// Pairs predicted and gold sets by document id; documents present on only
/// one side count as empty on the other.
pub fn evaluate_sets(pred: &[AnnotationSet], gold: &[AnnotationSet]) -> Result<EvalResult, EvalError> {
    let mut ids: Vec<&str> = pred.iter().chain(gold).map(|s| s.doc_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let find = |sets: &[AnnotationSet], id: &str| {
        sets.iter()
            .find(|s| s.doc_id == id)
            .cloned()
            .unwrap_or_else(|| AnnotationSet::new(id))
    };
    let pairs: Vec<(AnnotationSet, AnnotationSet)> = ids.iter().map(|id| (find(pred, id), find(gold, id))).collect();
    let refs: Vec<(&AnnotationSet, &AnnotationSet)> = pairs.iter().map(|(p, g)| (p, g)).collect();
    evaluate_many(&refs)
}

/// Graph and index for a corpus with its annotation sets.
pub fn build_artifacts(
    corpus: &Corpus,
    sets: &[AnnotationSet],
    embedder: &dyn Embedder,
) -> Result<(PropertyGraph, VectorIndex), GraphError> {
    let graph = build_graph(&corpus.documents, sets)?;
    Ok((graph, index_paragraphs(corpus, embedder)))
}

pub fn answer_question(
    question: &Question,
    corpus: &Corpus,
    graph: &PropertyGraph,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    templates: &PromptTemplates,
    backend: &dyn GenerationBackend,
) -> Result<Answer, QaError> {
    let res = QaResources {
        corpus,
        index,
        embedder,
        graph,
        templates,
    };
    ask(question, &res, backend)
}
