//! On-disk formats.
//!
//! - corpus: JSON lines, one document per line
//! - annotations: JSON lines, one annotation set per line
//! - schema: JSON object `{"entities": [...], "rules": [[head, relation, tail], ...]}`
//! - models: JSON, rejected on load unless the feature spec id matches
//! - training export: JSON lines, one sentence record per line
//! - graph dump: tab-separated `N`/`E` records between a header and an end marker
//! - index dump: tab-separated header and one line per paragraph

use std::fmt::Write as _;

use kdisc_core::annotation::{AnnotationSet, TrainingRecord};
use kdisc_core::corpus::{Corpus, Document};
use kdisc_core::features::FEATURE_SPEC_ID;
use kdisc_core::graph::{Edge, EdgeKind, Node, NodeKind, PropValue, PropertyGraph};
use kdisc_core::ner::NerModel;
use kdisc_core::ontology::{OntologySchema, SchemaConfig, SchemaError};
use kdisc_core::qa::PromptTemplates;
use kdisc_core::rc::RcModel;
use kdisc_core::retrieval::{EmbeddingVector, VectorIndex};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    /// `record` is the 1-based line number, or 1 for single-object files.
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("model feature spec {found:?} does not match {expected:?}")]
    FeatureSpec { found: String, expected: String },
    #[error("invalid schema: {0}")]
    Schema(#[from] SchemaError),
}

fn record_err(record: usize, message: impl ToString) -> LoadError {
    LoadError::Record {
        record,
        message: message.to_string(),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("in-memory values serialise")
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values serialise");
    s.push('\n');
    s
}

pub fn write_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_json(item));
        out.push('\n');
    }
    out
}

/// Parses JSON lines, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, LoadError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| record_err(i + 1, e)))
        .collect()
}

pub fn write_corpus(corpus: &Corpus) -> String {
    write_jsonl(&corpus.documents)
}

pub fn read_corpus(text: &str) -> Result<Corpus, LoadError> {
    let docs: Vec<Document> = read_jsonl(text)?;
    let mut corpus = Corpus::default();
    for d in docs {
        corpus.upsert(d);
    }
    Ok(corpus)
}

pub fn write_annotations(sets: &[AnnotationSet]) -> String {
    write_jsonl(sets)
}

pub fn read_annotations(text: &str) -> Result<Vec<AnnotationSet>, LoadError> {
    read_jsonl(text)
}

pub fn write_training(records: &[TrainingRecord]) -> String {
    write_jsonl(records)
}

pub fn read_training(text: &str) -> Result<Vec<TrainingRecord>, LoadError> {
    read_jsonl(text)
}

pub fn write_schema(schema: &OntologySchema) -> String {
    to_json_pretty(&schema.to_config())
}

pub fn read_schema(text: &str) -> Result<OntologySchema, LoadError> {
    let config: SchemaConfig = serde_json::from_str(text).map_err(|e| record_err(1, e))?;
    Ok(OntologySchema::load(config)?)
}

pub fn write_templates(t: &PromptTemplates) -> String {
    to_json_pretty(t)
}

pub fn read_templates(text: &str) -> Result<PromptTemplates, LoadError> {
    serde_json::from_str(text).map_err(|e| record_err(1, e))
}

fn check_spec(found: &str) -> Result<(), LoadError> {
    if found == FEATURE_SPEC_ID {
        Ok(())
    } else {
        Err(LoadError::FeatureSpec {
            found: found.to_string(),
            expected: FEATURE_SPEC_ID.to_string(),
        })
    }
}

pub fn write_ner_model(m: &NerModel) -> String {
    to_json(m)
}

pub fn read_ner_model(text: &str) -> Result<NerModel, LoadError> {
    let m: NerModel = serde_json::from_str(text).map_err(|e| record_err(1, e))?;
    check_spec(&m.feature_spec)?;
    Ok(m)
}

pub fn write_rc_model(m: &RcModel) -> String {
    to_json(m)
}

pub fn read_rc_model(text: &str) -> Result<RcModel, LoadError> {
    let m: RcModel = serde_json::from_str(text).map_err(|e| record_err(1, e))?;
    check_spec(&m.feature_spec)?;
    Ok(m)
}

const GRAPH_HEADER: &str = "# kdisc-graph v1";
const END_MARKER: &str = "# end";

fn check_field(record: usize, what: &str, s: &str) -> Result<(), LoadError> {
    if s.is_empty() || s.contains(['\t', '\n', '\r']) {
        return Err(record_err(record, format!("invalid {what} {s:?}")));
    }
    Ok(())
}

/// `N\t<id>\t<kind>\t<props-json>` per node, then
/// `E\t<id>\t<kind>\t<src>\t<dst>` per edge, framed by a header line and
/// `# end\t<nodes>\t<edges>` so truncation is detectable.
pub fn write_graph(g: &PropertyGraph) -> String {
    let mut out = String::new();
    out.push_str(GRAPH_HEADER);
    out.push('\n');
    for n in g.nodes() {
        let _ = writeln!(out, "N\t{}\t{}\t{}", n.node_id, n.kind, to_json(&n.props));
    }
    for e in g.edges() {
        let _ = writeln!(out, "E\t{}\t{}\t{}\t{}", e.edge_id, e.kind.as_str(), e.src, e.dst);
    }
    let _ = writeln!(out, "{END_MARKER}\t{}\t{}", g.nodes().len(), g.edges().len());
    out
}

pub fn read_graph(text: &str) -> Result<PropertyGraph, LoadError> {
    let mut g = PropertyGraph::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == GRAPH_HEADER => {}
        _ => return Err(record_err(1, "missing graph header")),
    }
    let mut last = 1;
    for (i, line) in lines {
        let record = i + 1;
        last = record;
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[..] {
            ["N", id, kind, props] => {
                check_field(record, "node id", id)?;
                let kind = NodeKind::parse(kind).ok_or_else(|| record_err(record, format!("unknown node kind {kind:?}")))?;
                let props: std::collections::BTreeMap<String, PropValue> =
                    serde_json::from_str(props).map_err(|e| record_err(record, e))?;
                g.add_node(Node {
                    node_id: id.to_string(),
                    kind,
                    props: props.into_iter().collect(),
                })
                .map_err(|e| record_err(record, e))?;
            }
            ["E", id, kind, src, dst] => {
                for (what, f) in [("edge id", id), ("edge kind", kind), ("source", src), ("target", dst)] {
                    check_field(record, what, f)?;
                }
                g.add_edge(Edge {
                    edge_id: id.to_string(),
                    kind: EdgeKind::parse(kind),
                    src: src.to_string(),
                    dst: dst.to_string(),
                })
                .map_err(|e| record_err(record, e))?;
            }
            [END_MARKER, n, e] => {
                let counts = (n.parse::<usize>().ok(), e.parse::<usize>().ok());
                if counts != (Some(g.nodes().len()), Some(g.edges().len())) {
                    return Err(record_err(record, "record counts do not match end marker"));
                }
                if let Some((j, _)) = text.lines().enumerate().skip(record).find(|(_, l)| !l.is_empty()) {
                    return Err(record_err(j + 1, "data after end marker"));
                }
                return Ok(g);
            }
            _ => return Err(record_err(record, "malformed record")),
        }
    }
    Err(record_err(last + 1, "missing end marker (truncated file)"))
}

const INDEX_MAGIC: &str = "# kdisc-index v1";

/// Header `# kdisc-index v1\t<embedder_id>\t<D>`, then
/// `<para_id>\t<v1> <v2> ... <vD>` per entry. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_index(index: &VectorIndex) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{INDEX_MAGIC}\t{}\t{}", index.embedder_id, index.dimension);
    for (id, v) in &index.entries {
        out.push_str(id);
        out.push('\t');
        for (i, x) in v.values.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

pub fn read_index(text: &str) -> Result<VectorIndex, LoadError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    let [magic, embedder_id, dim] = header.split('\t').collect::<Vec<_>>()[..] else {
        return Err(record_err(1, "malformed index header"));
    };
    if magic != INDEX_MAGIC {
        return Err(record_err(1, "missing index header"));
    }
    let dimension: usize = dim.parse().map_err(|_| record_err(1, format!("bad dimension {dim:?}")))?;
    let mut index = VectorIndex::new(embedder_id, dimension);
    for (i, line) in lines {
        let record = i + 1;
        if line.is_empty() {
            continue;
        }
        let (id, floats) = line.split_once('\t').ok_or_else(|| record_err(record, "malformed record"))?;
        check_field(record, "paragraph id", id)?;
        let values = floats
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f32>().map_err(|_| record_err(record, format!("bad float {s:?}"))))
            .collect::<Result<Vec<f32>, _>>()?;
        index
            .insert(id, EmbeddingVector { values })
            .map_err(|e| record_err(record, e))?;
    }
    Ok(index)
}
