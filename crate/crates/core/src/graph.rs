//! In-memory property graph of documents, paragraphs, sentences, entity
//! mentions and predicted relations.
//!
//! Node ids: documents, paragraphs and sentences reuse their corpus ids;
//! entity nodes are `<sent_id>/<start>-<end>/<type>`. Nodes keep insertion
//! order, which for a built graph is corpus order (document, paragraph,
//! sentence, span).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationSet;
use crate::corpus::{CharSpan, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeKind {
    Document,
    Paragraph,
    Sentence,
    Entity,
}

impl NodeKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            NodeKind::Document => "DOCUMENT",
            NodeKind::Paragraph => "PARAGRAPH",
            NodeKind::Sentence => "SENTENCE",
            NodeKind::Entity => "ENTITY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "DOCUMENT" => NodeKind::Document,
            "PARAGRAPH" => NodeKind::Paragraph,
            "SENTENCE" => NodeKind::Sentence,
            "ENTITY" => NodeKind::Entity,
            _ => return None,
        })
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    HasParagraph,
    HasSentence,
    HasEntity,
    Relation(String),
}

impl EdgeKind {
    pub fn as_str(&self) -> &str {
        match self {
            EdgeKind::HasParagraph => "HAS_PARAGRAPH",
            EdgeKind::HasSentence => "HAS_SENTENCE",
            EdgeKind::HasEntity => "HAS_ENTITY",
            EdgeKind::Relation(name) => name,
        }
    }

    /// Containment names map to their variants, anything else is a relation.
    pub fn parse(s: &str) -> Self {
        match s {
            "HAS_PARAGRAPH" => EdgeKind::HasParagraph,
            "HAS_SENTENCE" => EdgeKind::HasSentence,
            "HAS_ENTITY" => EdgeKind::HasEntity,
            other => EdgeKind::Relation(other.to_string()),
        }
    }

    pub const fn is_containment(&self) -> bool {
        !matches!(self, EdgeKind::Relation(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Int(i64),
    Text(String),
    List(Vec<String>),
}

impl PropValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropValue::Int(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: String,
    pub kind: NodeKind,
    pub props: BTreeMap<String, PropValue>,
}

impl Node {
    pub fn text_prop(&self, key: &str) -> Option<&str> {
        self.props.get(key).and_then(PropValue::as_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub edge_id: String,
    pub kind: EdgeKind,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("annotation {ann_id} refers to a missing sentence ({reason})")]
    MissingSentence { ann_id: String, reason: String },
    #[error("annotations reference unknown document {0}")]
    UnknownDocument(String),
    #[error("relation {ann_id} has an unresolved argument")]
    DanglingRelation { ann_id: String },
    #[error("unknown paragraph id {0}")]
    UnknownParagraph(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("edge {0} references a missing node")]
    DanglingEdge(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "GraphRepr")]
pub struct PropertyGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(skip)]
    node_index: BTreeMap<String, usize>,
    #[serde(skip)]
    edge_index: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct GraphRepr {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl From<GraphRepr> for PropertyGraph {
    fn from(repr: GraphRepr) -> Self {
        let mut g = PropertyGraph {
            nodes: repr.nodes,
            edges: repr.edges,
            ..PropertyGraph::default()
        };
        g.reindex();
        g
    }
}

/// Edge-id convention shared by build and load.
fn edge_id(kind: &EdgeKind, src: &str, dst: &str) -> String {
    match kind {
        EdgeKind::Relation(name) => format!("{src}>{name}>{dst}"),
        _ => format!("{}:{dst}", kind.as_str()),
    }
}

pub fn entity_node_id(sent_id: &str, span: CharSpan, entity_type: &str) -> String {
    format!("{sent_id}/{}-{}/{entity_type}", span.start, span.end)
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn node_position(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// Rebuilds lookup indexes after deserialisation.
    pub fn reindex(&mut self) {
        self.node_index = self.nodes.iter().enumerate().map(|(i, n)| (n.node_id.clone(), i)).collect();
        self.edge_index = self.edges.iter().enumerate().map(|(i, e)| (e.edge_id.clone(), i)).collect();
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        if self.node_index.contains_key(&node.node_id) {
            return Err(GraphError::DuplicateNode(node.node_id));
        }
        self.node_index.insert(node.node_id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    /// Adds an edge between existing nodes. Re-adding an identical edge id
    /// is a no-op.
    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        if !self.node_index.contains_key(&edge.src) || !self.node_index.contains_key(&edge.dst) {
            return Err(GraphError::DanglingEdge(edge.edge_id));
        }
        if self.edge_index.contains_key(&edge.edge_id) {
            return Ok(());
        }
        self.edge_index.insert(edge.edge_id.clone(), self.edges.len());
        self.edges.push(edge);
        Ok(())
    }

    fn connect(&mut self, kind: EdgeKind, src: &str, dst: &str) -> Result<(), GraphError> {
        let edge_id = edge_id(&kind, src, dst);
        self.add_edge(Edge {
            edge_id,
            kind,
            src: src.to_string(),
            dst: dst.to_string(),
        })
    }
}

struct EntityInfo {
    node_id: String,
    span: CharSpan,
    entity_type: String,
    surface: String,
    para_id: String,
    sent_id: String,
    provenance: BTreeSet<&'static str>,
}

/// Builds the graph for `corpus` with entity and relation nodes from
/// `sets`. Entity nodes are keyed by (sentence, span, type), so the same
/// mention from several sources collapses to one node whose provenance
/// lists every source.
pub fn build_graph(corpus: &[Document], sets: &[AnnotationSet]) -> Result<PropertyGraph, GraphError> {
    // sent_id -> entities, keyed by node id
    let mut by_sentence: BTreeMap<String, BTreeMap<String, EntityInfo>> = BTreeMap::new();
    let mut relations: Vec<(String, String, String)> = Vec::new();
    for set in sets {
        let doc = corpus
            .iter()
            .find(|d| d.doc_id == set.doc_id)
            .ok_or_else(|| GraphError::UnknownDocument(set.doc_id.clone()))?;
        let mut ann_node: BTreeMap<&str, String> = BTreeMap::new();
        for e in &set.entities {
            let para = doc.paragraph(&e.para_id).ok_or_else(|| GraphError::MissingSentence {
                ann_id: e.ann_id.clone(),
                reason: format!("no paragraph {}", e.para_id),
            })?;
            let sent = para.sentence_containing(e.span).ok_or_else(|| GraphError::MissingSentence {
                ann_id: e.ann_id.clone(),
                reason: format!("span {} is not inside one sentence", e.span),
            })?;
            let node_id = entity_node_id(&sent.sent_id, e.span, &e.entity_type);
            ann_node.insert(e.ann_id.as_str(), node_id.clone());
            let info = by_sentence
                .entry(sent.sent_id.clone())
                .or_default()
                .entry(node_id.clone())
                .or_insert_with(|| EntityInfo {
                    node_id,
                    span: e.span,
                    entity_type: e.entity_type.clone(),
                    surface: para.slice(e.span).unwrap_or_default().to_string(),
                    para_id: para.para_id.clone(),
                    sent_id: sent.sent_id.clone(),
                    provenance: BTreeSet::new(),
                });
            info.provenance.insert(e.provenance.as_str());
        }
        for r in &set.relations {
            let (Some(src), Some(dst)) = (ann_node.get(r.arg1.as_str()), ann_node.get(r.arg2.as_str())) else {
                return Err(GraphError::DanglingRelation { ann_id: r.ann_id.clone() });
            };
            relations.push((src.clone(), r.relation_type.clone(), dst.clone()));
        }
    }

    let mut g = PropertyGraph::new();
    for doc in corpus {
        let mut props = BTreeMap::new();
        props.insert("title".to_string(), PropValue::Text(doc.metadata.title.clone()));
        props.insert("authors".to_string(), PropValue::List(doc.metadata.authors.clone()));
        if let Some(year) = doc.metadata.year {
            props.insert("year".to_string(), PropValue::Int(i64::from(year)));
        }
        g.add_node(Node {
            node_id: doc.doc_id.clone(),
            kind: NodeKind::Document,
            props,
        })?;
        for (pi, para) in doc.paragraphs.iter().enumerate() {
            let mut props = BTreeMap::new();
            props.insert("ordinal".to_string(), PropValue::Int(pi as i64));
            if let Some(section) = &para.source_section {
                props.insert("section".to_string(), PropValue::Text(section.clone()));
            }
            g.add_node(Node {
                node_id: para.para_id.clone(),
                kind: NodeKind::Paragraph,
                props,
            })?;
            g.connect(EdgeKind::HasParagraph, &doc.doc_id, &para.para_id)?;
            for (si, sent) in para.sentences.iter().enumerate() {
                let mut props = BTreeMap::new();
                props.insert("ordinal".to_string(), PropValue::Int(si as i64));
                props.insert("start".to_string(), PropValue::Int(sent.span.start as i64));
                props.insert("end".to_string(), PropValue::Int(sent.span.end as i64));
                props.insert(
                    "text".to_string(),
                    PropValue::Text(para.slice(sent.span).unwrap_or_default().to_string()),
                );
                g.add_node(Node {
                    node_id: sent.sent_id.clone(),
                    kind: NodeKind::Sentence,
                    props,
                })?;
                g.connect(EdgeKind::HasSentence, &para.para_id, &sent.sent_id)?;
                let Some(entities) = by_sentence.remove(&sent.sent_id) else { continue };
                let mut entities: Vec<EntityInfo> = entities.into_values().collect();
                entities.sort_by(|a, b| (a.span, &a.entity_type).cmp(&(b.span, &b.entity_type)));
                for e in entities {
                    let mut props = BTreeMap::new();
                    props.insert("surface".to_string(), PropValue::Text(e.surface));
                    props.insert("entity_type".to_string(), PropValue::Text(e.entity_type));
                    props.insert(
                        "provenance".to_string(),
                        PropValue::List(e.provenance.iter().map(|p| p.to_string()).collect()),
                    );
                    props.insert("start".to_string(), PropValue::Int(e.span.start as i64));
                    props.insert("end".to_string(), PropValue::Int(e.span.end as i64));
                    props.insert("para_id".to_string(), PropValue::Text(e.para_id));
                    props.insert("sent_id".to_string(), PropValue::Text(e.sent_id));
                    g.add_node(Node {
                        node_id: e.node_id.clone(),
                        kind: NodeKind::Entity,
                        props,
                    })?;
                    g.connect(EdgeKind::HasEntity, &sent.sent_id, &e.node_id)?;
                }
            }
        }
    }
    relations.sort_by(|a, b| {
        let pa = (g.node_position(&a.0), g.node_position(&a.2), &a.1);
        let pb = (g.node_position(&b.0), g.node_position(&b.2), &b.1);
        pa.cmp(&pb)
    });
    for (src, name, dst) in relations {
        g.connect(EdgeKind::Relation(name), &src, &dst)?;
    }
    Ok(g)
}

/// The listed paragraphs with their owning documents, sentences, entity
/// nodes, and the relation edges whose endpoints are both inside.
pub fn subgraph_for_paragraphs(g: &PropertyGraph, para_ids: &[String]) -> Result<PropertyGraph, GraphError> {
    let mut keep: BTreeSet<&str> = BTreeSet::new();
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| e.kind.is_containment()) {
        children.entry(e.src.as_str()).or_default().push(e.dst.as_str());
        parent.insert(e.dst.as_str(), e.src.as_str());
    }
    for pid in para_ids {
        match g.node(pid) {
            Some(n) if n.kind == NodeKind::Paragraph => {}
            _ => return Err(GraphError::UnknownParagraph(pid.clone())),
        }
        keep.insert(pid.as_str());
        if let Some(doc) = parent.get(pid.as_str()) {
            keep.insert(doc);
        }
        let mut stack: Vec<&str> = alloc::vec![pid.as_str()];
        while let Some(id) = stack.pop() {
            for &c in children.get(id).map(Vec::as_slice).unwrap_or_default() {
                keep.insert(c);
                stack.push(c);
            }
        }
    }
    let mut out = PropertyGraph::new();
    for n in g.nodes.iter().filter(|n| keep.contains(n.node_id.as_str())) {
        out.add_node(n.clone())?;
    }
    for e in &g.edges {
        if keep.contains(e.src.as_str()) && keep.contains(e.dst.as_str()) {
            out.add_edge(e.clone())?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRef {
    pub node_id: String,
    pub surface: String,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityRef,
    pub relation: String,
    pub tail: EntityRef,
}

fn entity_ref(n: &Node) -> EntityRef {
    EntityRef {
        node_id: n.node_id.clone(),
        surface: n.text_prop("surface").unwrap_or_default().to_string(),
        entity_type: n.text_prop("entity_type").unwrap_or_default().to_string(),
    }
}

/// Relation edges matching every provided filter field, ordered by the
/// head's corpus position, then the tail's, then relation name.
pub fn query_triples(g: &PropertyGraph, filter: &TripleFilter) -> Vec<Triple> {
    let mut hits: Vec<(usize, usize, Triple)> = Vec::new();
    for e in &g.edges {
        let EdgeKind::Relation(name) = &e.kind else { continue };
        let (Some(hp), Some(tp)) = (g.node_position(&e.src), g.node_position(&e.dst)) else { continue };
        let head = entity_ref(&g.nodes[hp]);
        let tail = entity_ref(&g.nodes[tp]);
        let ok = filter.head_type.as_ref().is_none_or(|t| *t == head.entity_type)
            && filter.relation.as_ref().is_none_or(|r| r == name)
            && filter.tail_type.as_ref().is_none_or(|t| *t == tail.entity_type);
        if ok {
            hits.push((hp, tp, Triple { head, relation: name.clone(), tail }));
        }
    }
    hits.sort_by(|a, b| (a.0, a.1, &a.2.relation).cmp(&(b.0, b.1, &b.2.relation)));
    hits.into_iter().map(|h| h.2).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphViolation {
    DanglingEdge { edge_id: String },
    BadContainment { edge_id: String },
    WrongParentCount { node_id: String, parents: usize },
    RelationEndpoint { edge_id: String },
}

/// Checks edge endpoints, containment typing, and that each paragraph,
/// sentence and entity has exactly one containment parent.
pub fn integrity_report(g: &PropertyGraph) -> Vec<GraphViolation> {
    let mut out = Vec::new();
    let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &g.edges {
        let (Some(src), Some(dst)) = (g.node(&e.src), g.node(&e.dst)) else {
            out.push(GraphViolation::DanglingEdge { edge_id: e.edge_id.clone() });
            continue;
        };
        let expected = match e.kind {
            EdgeKind::HasParagraph => Some((NodeKind::Document, NodeKind::Paragraph)),
            EdgeKind::HasSentence => Some((NodeKind::Paragraph, NodeKind::Sentence)),
            EdgeKind::HasEntity => Some((NodeKind::Sentence, NodeKind::Entity)),
            EdgeKind::Relation(_) => None,
        };
        match expected {
            Some(pair) => {
                if (src.kind, dst.kind) != pair {
                    out.push(GraphViolation::BadContainment { edge_id: e.edge_id.clone() });
                }
                *parents.entry(e.dst.as_str()).or_default() += 1;
            }
            None => {
                if src.kind != NodeKind::Entity || dst.kind != NodeKind::Entity {
                    out.push(GraphViolation::RelationEndpoint { edge_id: e.edge_id.clone() });
                }
            }
        }
    }
    for n in g.nodes.iter().filter(|n| n.kind != NodeKind::Document) {
        let count = parents.get(n.node_id.as_str()).copied().unwrap_or(0);
        if count != 1 {
            out.push(GraphViolation::WrongParentCount {
                node_id: n.node_id.clone(),
                parents: count,
            });
        }
    }
    out
}
