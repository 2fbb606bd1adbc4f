//! Entity/relation annotations, the BRAT-style standoff encoding, schema
//! validation, human revisions and training-data export.
//!
//! Standoff grammar, one record per line, UTF-8, offsets in Unicode scalar
//! values relative to the paragraph text:
//!
//! ```text
//! T<id>\t<Type> <start> <end>\t<surface>
//! R<id>\t<Rel> Arg1:T<i> Arg2:T<j>
//! ```
//!
//! Tabs and line breaks inside a surface are written as single spaces.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, CharSpan, Document, Pos};
use crate::ontology::{OntologySchema, NO_RELATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Human,
    Regex,
    Model,
}

impl Provenance {
    pub const fn as_str(self) -> &'static str {
        match self {
            Provenance::Human => "human",
            Provenance::Regex => "regex",
            Provenance::Model => "model",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub ann_id: String,
    pub entity_type: String,
    pub para_id: String,
    pub span: CharSpan,
    pub surface: String,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub ann_id: String,
    pub relation_type: String,
    pub arg1: String,
    pub arg2: String,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub doc_id: String,
    #[serde(default)]
    pub entities: Vec<EntityAnnotation>,
    #[serde(default)]
    pub relations: Vec<RelationAnnotation>,
}

impl AnnotationSet {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }

    pub fn entity(&self, ann_id: &str) -> Option<&EntityAnnotation> {
        self.entities.iter().find(|e| e.ann_id == ann_id)
    }

    /// Sorts entities by (paragraph, start, end, type), renumbers them
    /// `T1..`, remaps relation arguments and renumbers relations `R1..` in
    /// (arg1, arg2, type) order. Paragraph order is lexicographic on id.
    pub fn canonicalize(&self) -> AnnotationSet {
        let mut entities = self.entities.clone();
        entities.sort_by(|a, b| {
            (&a.para_id, a.span, &a.entity_type).cmp(&(&b.para_id, b.span, &b.entity_type))
        });
        let mut remap: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, e) in entities.iter().enumerate() {
            if let Some(orig) = self.entities.iter().find(|o| {
                o.para_id == e.para_id && o.span == e.span && o.entity_type == e.entity_type
            }) {
                remap.insert(orig.ann_id.as_str(), i + 1);
            }
        }
        let mut relations: Vec<(usize, usize, RelationAnnotation)> = self
            .relations
            .iter()
            .filter_map(|r| {
                let a = *remap.get(r.arg1.as_str())?;
                let b = *remap.get(r.arg2.as_str())?;
                Some((a, b, r.clone()))
            })
            .collect();
        relations.sort_by(|x, y| (x.0, x.1, &x.2.relation_type).cmp(&(y.0, y.1, &y.2.relation_type)));
        for (i, e) in entities.iter_mut().enumerate() {
            e.ann_id = format!("T{}", i + 1);
        }
        let relations = relations
            .into_iter()
            .enumerate()
            .map(|(i, (a, b, mut r))| {
                r.ann_id = format!("R{}", i + 1);
                r.arg1 = format!("T{a}");
                r.arg2 = format!("T{b}");
                r
            })
            .collect();
        AnnotationSet {
            doc_id: self.doc_id.clone(),
            entities,
            relations,
        }
    }

    /// Splits a document-level set into one set per paragraph. Relations
    /// follow their first argument.
    pub fn split_by_paragraph(&self) -> BTreeMap<String, AnnotationSet> {
        let mut out: BTreeMap<String, AnnotationSet> = BTreeMap::new();
        for e in &self.entities {
            out.entry(e.para_id.clone())
                .or_insert_with(|| AnnotationSet::new(self.doc_id.clone()))
                .entities
                .push(e.clone());
        }
        for r in &self.relations {
            if let Some(head) = self.entity(&r.arg1) {
                if let Some(set) = out.get_mut(&head.para_id) {
                    set.relations.push(r.clone());
                }
            }
        }
        out
    }

    fn next_number(&self, prefix: char) -> usize {
        let ids = self
            .entities
            .iter()
            .map(|e| e.ann_id.as_str())
            .chain(self.relations.iter().map(|r| r.ann_id.as_str()));
        ids.filter_map(|id| id.strip_prefix(prefix)?.parse::<usize>().ok())
            .max()
            .unwrap_or(0)
            + 1
    }

    fn has_duplicate(&self, entity_type: &str, para_id: &str, span: CharSpan, except: Option<&str>) -> bool {
        self.entities.iter().any(|e| {
            Some(e.ann_id.as_str()) != except
                && e.entity_type == entity_type
                && e.para_id == para_id
                && e.span == span
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{ann_id}: surface {found:?} does not match text {expected:?}")]
    SurfaceMismatch {
        ann_id: String,
        found: String,
        expected: String,
    },
    #[error("{ann_id}: offsets {span} outside paragraph of length {len}")]
    OutOfRange { ann_id: String, span: CharSpan, len: usize },
    #[error("{ann_id}: argument {arg} does not resolve to an entity")]
    DanglingArgument { ann_id: String, arg: String },
    #[error("line {line}: duplicate id {ann_id}")]
    DuplicateId { line: usize, ann_id: String },
    #[error("{ann_id}: duplicates an existing (type, span)")]
    DuplicateEntity { ann_id: String },
}

fn flatten_surface(s: &str) -> String {
    s.chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect()
}

fn valid_id(id: &str, prefix: char) -> bool {
    id.strip_prefix(prefix)
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Parses the standoff annotations of one paragraph.
pub fn parse_standoff(
    ann_text: &str,
    paragraph_text: &str,
    doc_id: &str,
    para_id: &str,
) -> Result<AnnotationSet, ParseError> {
    let text_len = paragraph_text.chars().count();
    let mut set = AnnotationSet::new(doc_id);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, raw) in ann_text.split('\n').enumerate() {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let malformed = |reason: &str| ParseError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let mut fields = raw.split('\t');
        let id = fields.next().unwrap_or_default();
        if valid_id(id, 'T') {
            let body = fields.next().ok_or_else(|| malformed("missing type and offsets"))?;
            let surface = fields.next().ok_or_else(|| malformed("missing surface"))?;
            if fields.next().is_some() {
                return Err(malformed("too many fields"));
            }
            let parts: Vec<&str> = body.split(' ').collect();
            let [ty, start, end] = parts[..] else {
                return Err(malformed("expected `<Type> <start> <end>`; discontinuous spans are unsupported"));
            };
            if ty.is_empty() {
                return Err(malformed("empty type"));
            }
            let start: usize = start.parse().map_err(|_| malformed("bad start offset"))?;
            let end: usize = end.parse().map_err(|_| malformed("bad end offset"))?;
            let span = CharSpan::new(start, end);
            if start >= end || end > text_len {
                return Err(ParseError::OutOfRange {
                    ann_id: id.to_string(),
                    span,
                    len: text_len,
                });
            }
            let expected = char_slice(paragraph_text, span).unwrap_or_default();
            if flatten_surface(expected) != surface {
                return Err(ParseError::SurfaceMismatch {
                    ann_id: id.to_string(),
                    found: surface.to_string(),
                    expected: expected.to_string(),
                });
            }
            if !seen.insert(id.to_string()) {
                return Err(ParseError::DuplicateId {
                    line,
                    ann_id: id.to_string(),
                });
            }
            if set.has_duplicate(ty, para_id, span, None) {
                return Err(ParseError::DuplicateEntity { ann_id: id.to_string() });
            }
            set.entities.push(EntityAnnotation {
                ann_id: id.to_string(),
                entity_type: ty.to_string(),
                para_id: para_id.to_string(),
                span,
                surface: expected.to_string(),
                provenance: Provenance::Human,
            });
        } else if valid_id(id, 'R') {
            let body = fields.next().ok_or_else(|| malformed("missing relation body"))?;
            match fields.next() {
                None | Some("") => {}
                Some(_) => return Err(malformed("too many fields")),
            }
            if fields.next().is_some() {
                return Err(malformed("too many fields"));
            }
            let parts: Vec<&str> = body.split(' ').collect();
            let [rel, a1, a2] = parts[..] else {
                return Err(malformed("expected `<Rel> Arg1:T<i> Arg2:T<j>`"));
            };
            let arg1 = a1.strip_prefix("Arg1:").filter(|a| valid_id(a, 'T'));
            let arg2 = a2.strip_prefix("Arg2:").filter(|a| valid_id(a, 'T'));
            let (Some(arg1), Some(arg2)) = (arg1, arg2) else {
                return Err(malformed("bad relation arguments"));
            };
            if rel.is_empty() {
                return Err(malformed("empty relation type"));
            }
            if !seen.insert(id.to_string()) {
                return Err(ParseError::DuplicateId {
                    line,
                    ann_id: id.to_string(),
                });
            }
            set.relations.push(RelationAnnotation {
                ann_id: id.to_string(),
                relation_type: rel.to_string(),
                arg1: arg1.to_string(),
                arg2: arg2.to_string(),
                provenance: Provenance::Human,
            });
        } else {
            return Err(malformed("unsupported record type"));
        }
    }
    for r in &set.relations {
        for arg in [&r.arg1, &r.arg2] {
            if set.entity(arg).is_none() {
                return Err(ParseError::DanglingArgument {
                    ann_id: r.ann_id.clone(),
                    arg: arg.clone(),
                });
            }
        }
        if r.arg1 == r.arg2 {
            return Err(ParseError::DanglingArgument {
                ann_id: r.ann_id.clone(),
                arg: r.arg2.clone(),
            });
        }
    }
    Ok(set)
}

/// Writes `set` in canonical standoff order. The set is expected to cover a
/// single paragraph (see [`AnnotationSet::split_by_paragraph`]).
pub fn serialize_standoff(set: &AnnotationSet) -> String {
    let canon = set.canonicalize();
    let mut out = String::new();
    for e in &canon.entities {
        let _ = writeln!(
            out,
            "{}\t{} {} {}\t{}",
            e.ann_id,
            e.entity_type,
            e.span.start,
            e.span.end,
            flatten_surface(&e.surface)
        );
    }
    for r in &canon.relations {
        let _ = writeln!(
            out,
            "{}\t{} Arg1:{} Arg2:{}",
            r.ann_id, r.relation_type, r.arg1, r.arg2
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownEntityType { ann_id: String, entity_type: String },
    DisallowedRelation {
        ann_id: String,
        head_type: String,
        relation: String,
        tail_type: String,
    },
    DanglingArgument { ann_id: String, arg: String },
    UnknownParagraph { ann_id: String, para_id: String },
    SurfaceMismatch { ann_id: String },
    CrossesSentence { ann_id: String },
    CrossSentenceRelation { ann_id: String },
    DuplicateId { ann_id: String },
    DuplicateEntity { ann_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks entity types and relation triples against the schema.
pub fn validate(set: &AnnotationSet, schema: &OntologySchema) -> ValidationReport {
    let mut violations = Vec::new();
    for e in &set.entities {
        if !schema.has_entity_type(&e.entity_type) {
            violations.push(Violation::UnknownEntityType {
                ann_id: e.ann_id.clone(),
                entity_type: e.entity_type.clone(),
            });
        }
    }
    for r in &set.relations {
        let (Some(head), Some(tail)) = (set.entity(&r.arg1), set.entity(&r.arg2)) else {
            let arg = if set.entity(&r.arg1).is_none() { &r.arg1 } else { &r.arg2 };
            violations.push(Violation::DanglingArgument {
                ann_id: r.ann_id.clone(),
                arg: arg.clone(),
            });
            continue;
        };
        if !schema.allowed(&head.entity_type, &r.relation_type, &tail.entity_type) {
            violations.push(Violation::DisallowedRelation {
                ann_id: r.ann_id.clone(),
                head_type: head.entity_type.clone(),
                relation: r.relation_type.clone(),
                tail_type: tail.entity_type.clone(),
            });
        }
    }
    ValidationReport { violations }
}

/// Structural checks against the document the set refers to: ids are
/// unique, paragraphs exist, surfaces match, entities sit inside one
/// sentence, relation arguments are distinct and share a sentence.
pub fn check_against_document(set: &AnnotationSet, doc: &Document) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = BTreeSet::new();
    let mut keys = BTreeSet::new();
    let mut sentence_of: BTreeMap<&str, &str> = BTreeMap::new();
    for e in &set.entities {
        if !ids.insert(e.ann_id.as_str()) {
            violations.push(Violation::DuplicateId { ann_id: e.ann_id.clone() });
        }
        if !keys.insert((&e.para_id, e.span, &e.entity_type)) {
            violations.push(Violation::DuplicateEntity { ann_id: e.ann_id.clone() });
        }
        let Some(para) = doc.paragraph(&e.para_id) else {
            violations.push(Violation::UnknownParagraph {
                ann_id: e.ann_id.clone(),
                para_id: e.para_id.clone(),
            });
            continue;
        };
        if e.span.is_empty() || para.slice(e.span) != Some(e.surface.as_str()) {
            violations.push(Violation::SurfaceMismatch { ann_id: e.ann_id.clone() });
            continue;
        }
        match para.sentence_containing(e.span) {
            Some(s) => {
                sentence_of.insert(e.ann_id.as_str(), s.sent_id.as_str());
            }
            None => violations.push(Violation::CrossesSentence { ann_id: e.ann_id.clone() }),
        }
    }
    for r in &set.relations {
        if !ids.insert(r.ann_id.as_str()) {
            violations.push(Violation::DuplicateId { ann_id: r.ann_id.clone() });
        }
        let mut dangling = false;
        for arg in [&r.arg1, &r.arg2] {
            if set.entity(arg).is_none() {
                dangling = true;
                violations.push(Violation::DanglingArgument {
                    ann_id: r.ann_id.clone(),
                    arg: arg.clone(),
                });
            }
        }
        if dangling {
            continue;
        }
        if r.arg1 == r.arg2 {
            violations.push(Violation::DanglingArgument {
                ann_id: r.ann_id.clone(),
                arg: r.arg2.clone(),
            });
            continue;
        }
        match (sentence_of.get(r.arg1.as_str()), sentence_of.get(r.arg2.as_str())) {
            (Some(a), Some(b)) if a == b => {}
            _ => violations.push(Violation::CrossSentenceRelation { ann_id: r.ann_id.clone() }),
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    AddEntity {
        entity_type: String,
        para_id: String,
        span: CharSpan,
        surface: String,
    },
    AddRelation {
        relation_type: String,
        arg1: String,
        arg2: String,
    },
    Delete { ann_id: String },
    Retype { ann_id: String, new_type: String },
    /// Marks a machine annotation as reviewed without changing it.
    Accept { ann_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RevisionError {
    #[error("edit {index}: unknown annotation id {ann_id}")]
    UnknownId { index: usize, ann_id: String },
    #[error("edit {index}: an entity with the same type and span already exists")]
    Duplicate { index: usize },
    #[error("edit {index}: invalid span {span}")]
    InvalidSpan { index: usize, span: CharSpan },
    #[error("edit {index}: relation arguments must differ")]
    SelfRelation { index: usize },
}

/// Applies edits in order. Deleting an entity removes its incident
/// relations; every added or edited annotation becomes `human`.
pub fn apply_revision(set: &AnnotationSet, edits: &[Edit]) -> Result<AnnotationSet, RevisionError> {
    let mut out = set.clone();
    for (index, edit) in edits.iter().enumerate() {
        let unknown = |id: &str| RevisionError::UnknownId {
            index,
            ann_id: id.to_string(),
        };
        match edit {
            Edit::AddEntity {
                entity_type,
                para_id,
                span,
                surface,
            } => {
                if span.is_empty() {
                    return Err(RevisionError::InvalidSpan { index, span: *span });
                }
                if out.has_duplicate(entity_type, para_id, *span, None) {
                    return Err(RevisionError::Duplicate { index });
                }
                let ann_id = format!("T{}", out.next_number('T'));
                out.entities.push(EntityAnnotation {
                    ann_id,
                    entity_type: entity_type.clone(),
                    para_id: para_id.clone(),
                    span: *span,
                    surface: surface.clone(),
                    provenance: Provenance::Human,
                });
            }
            Edit::AddRelation {
                relation_type,
                arg1,
                arg2,
            } => {
                for arg in [arg1, arg2] {
                    if out.entity(arg).is_none() {
                        return Err(unknown(arg));
                    }
                }
                if arg1 == arg2 {
                    return Err(RevisionError::SelfRelation { index });
                }
                let ann_id = format!("R{}", out.next_number('R'));
                out.relations.push(RelationAnnotation {
                    ann_id,
                    relation_type: relation_type.clone(),
                    arg1: arg1.clone(),
                    arg2: arg2.clone(),
                    provenance: Provenance::Human,
                });
            }
            Edit::Delete { ann_id } => {
                if let Some(pos) = out.entities.iter().position(|e| &e.ann_id == ann_id) {
                    out.entities.remove(pos);
                    out.relations.retain(|r| &r.arg1 != ann_id && &r.arg2 != ann_id);
                } else if let Some(pos) = out.relations.iter().position(|r| &r.ann_id == ann_id) {
                    out.relations.remove(pos);
                } else {
                    return Err(unknown(ann_id));
                }
            }
            Edit::Retype { ann_id, new_type } => {
                if let Some(e) = out.entities.iter().find(|e| &e.ann_id == ann_id) {
                    let (para, span) = (e.para_id.clone(), e.span);
                    if out.has_duplicate(new_type, &para, span, Some(ann_id)) {
                        return Err(RevisionError::Duplicate { index });
                    }
                    let e = out.entities.iter_mut().find(|e| &e.ann_id == ann_id).expect("present");
                    e.entity_type = new_type.clone();
                    e.provenance = Provenance::Human;
                } else if let Some(r) = out.relations.iter_mut().find(|r| &r.ann_id == ann_id) {
                    r.relation_type = new_type.clone();
                    r.provenance = Provenance::Human;
                } else {
                    return Err(unknown(ann_id));
                }
            }
            Edit::Accept { ann_id } => {
                if let Some(e) = out.entities.iter_mut().find(|e| &e.ann_id == ann_id) {
                    e.provenance = Provenance::Human;
                } else if let Some(r) = out.relations.iter_mut().find(|r| &r.ann_id == ann_id) {
                    r.provenance = Provenance::Human;
                } else {
                    return Err(unknown(ann_id));
                }
            }
        }
    }
    Ok(out)
}

/// Half-open token-index range within a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub const fn len(&self) -> usize {
        self.end - self.start
    }

    pub const fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub const fn contains(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Partial overlap without containment.
    pub const fn crosses(&self, other: &TokenSpan) -> bool {
        (self.start < other.start && other.start < self.end && self.end < other.end)
            || (other.start < self.start && self.start < other.end && other.end < self.end)
    }

    pub const fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub span: TokenSpan,
    pub label: String,
}

/// Label for the ordered pair (`spans[head]`, `spans[tail]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPair {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

/// One sentence of training data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub sent_id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<Pos>,
    pub spans: Vec<GoldSpan>,
    pub pairs: Vec<GoldPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExportWarning {
    /// The character span started or ended inside a token and was widened.
    Snapped { ann_id: String, from: CharSpan, to: TokenSpan },
    CrossesSentence { ann_id: String },
    NoTokens { ann_id: String },
    UnknownParagraph { ann_id: String },
    /// Another annotation already produced the same (token range, type).
    Collapsed { ann_id: String },
    DroppedRelation { ann_id: String },
    ConflictingRelation { ann_id: String },
}

/// Smallest token range covering `span`; `None` when no token overlaps it.
/// The flag reports whether the range is wider than the span.
pub fn snap_to_tokens(token_spans: &[CharSpan], span: CharSpan) -> Option<(TokenSpan, bool)> {
    let first = token_spans.iter().position(|t| t.end > span.start && t.start < span.end)?;
    let last = token_spans.iter().rposition(|t| t.end > span.start && t.start < span.end)?;
    let widened = token_spans[first].start < span.start || token_spans[last].end > span.end;
    Some((TokenSpan::new(first, last + 1), widened))
}

/// Produces one record per sentence of `doc`, with gold spans snapped to
/// tokens and a label for every ordered pair of spans.
pub fn export_training(doc: &Document, set: &AnnotationSet) -> (Vec<TrainingRecord>, Vec<ExportWarning>) {
    let mut warnings = Vec::new();
    // sent_id -> [(ann_id, span, label)]
    let mut by_sentence: BTreeMap<&str, Vec<(&str, TokenSpan, &str)>> = BTreeMap::new();
    for e in &set.entities {
        let Some(para) = doc.paragraph(&e.para_id) else {
            warnings.push(ExportWarning::UnknownParagraph { ann_id: e.ann_id.clone() });
            continue;
        };
        let Some(sent) = para.sentence_containing(e.span) else {
            warnings.push(ExportWarning::CrossesSentence { ann_id: e.ann_id.clone() });
            continue;
        };
        let token_spans: Vec<CharSpan> = sent.tokens.iter().map(|t| t.span).collect();
        let Some((range, widened)) = snap_to_tokens(&token_spans, e.span) else {
            warnings.push(ExportWarning::NoTokens { ann_id: e.ann_id.clone() });
            continue;
        };
        if widened {
            warnings.push(ExportWarning::Snapped {
                ann_id: e.ann_id.clone(),
                from: e.span,
                to: range,
            });
        }
        let entry = by_sentence.entry(sent.sent_id.as_str()).or_default();
        if entry.iter().any(|(_, s, l)| *s == range && *l == e.entity_type) {
            warnings.push(ExportWarning::Collapsed { ann_id: e.ann_id.clone() });
            continue;
        }
        entry.push((e.ann_id.as_str(), range, e.entity_type.as_str()));
    }

    let mut records = Vec::new();
    for (_, sent) in doc.sentences() {
        let mut spans = by_sentence.remove(sent.sent_id.as_str()).unwrap_or_default();
        spans.sort_by(|a, b| (a.1, a.2).cmp(&(b.1, b.2)));
        let index_of: BTreeMap<&str, usize> = spans.iter().enumerate().map(|(i, s)| (s.0, i)).collect();
        let mut labels: BTreeMap<(usize, usize), &str> = BTreeMap::new();
        for r in &set.relations {
            let (Some(&h), Some(&t)) = (index_of.get(r.arg1.as_str()), index_of.get(r.arg2.as_str())) else {
                continue;
            };
            if h == t {
                continue;
            }
            if labels.contains_key(&(h, t)) {
                warnings.push(ExportWarning::ConflictingRelation { ann_id: r.ann_id.clone() });
            } else {
                labels.insert((h, t), r.relation_type.as_str());
            }
        }
        let mut pairs = Vec::new();
        for h in 0..spans.len() {
            for t in 0..spans.len() {
                if h != t {
                    pairs.push(GoldPair {
                        head: h,
                        tail: t,
                        label: labels.get(&(h, t)).copied().unwrap_or(NO_RELATION).to_string(),
                    });
                }
            }
        }
        records.push(TrainingRecord {
            sent_id: sent.sent_id.clone(),
            tokens: sent.tokens.iter().map(|t| t.surface.clone()).collect(),
            pos: sent.tokens.iter().map(|t| t.pos.unwrap_or(Pos::X)).collect(),
            spans: spans
                .into_iter()
                .map(|(_, span, label)| GoldSpan {
                    span,
                    label: label.to_string(),
                })
                .collect(),
            pairs,
        });
    }
    // relations whose endpoints were skipped
    let kept: BTreeSet<&str> = set
        .entities
        .iter()
        .filter(|e| {
            !warnings.iter().any(|w| match w {
                ExportWarning::CrossesSentence { ann_id }
                | ExportWarning::NoTokens { ann_id }
                | ExportWarning::UnknownParagraph { ann_id }
                | ExportWarning::Collapsed { ann_id } => ann_id == &e.ann_id,
                _ => false,
            })
        })
        .map(|e| e.ann_id.as_str())
        .collect();
    for r in &set.relations {
        if !kept.contains(r.arg1.as_str()) || !kept.contains(r.arg2.as_str()) {
            warnings.push(ExportWarning::DroppedRelation { ann_id: r.ann_id.clone() });
        }
    }
    (records, warnings)
}
