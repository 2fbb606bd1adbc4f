#![allow(dead_code)]

use std::path::{Path, PathBuf};

use kdisc::ingest::{ingest, Format};
use kdisc_core::annotation::{
    export_training, parse_standoff, AnnotationSet, EntityAnnotation, Provenance, RelationAnnotation, TrainingRecord,
};
use kdisc_core::autoann::{auto_annotate, evaluate_many};
use kdisc_core::corpus::{doc_id_for_payload, CharSpan, Corpus, Document, HeuristicTagger, Metadata, RawParagraph};
use kdisc_core::ner::NerModel;
use kdisc_core::ontology::{OntologySchema, RelationRule};
use kdisc_core::rc::RcModel;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/qa")
}

pub const FIXTURE_DOCS: [&str; 5] = ["doc1.txt", "doc2.txt", "doc3.txt", "doc4.txt", "doc5.xml"];

/// The five QA fixture documents with their hand-written annotations.
pub fn qa_fixture() -> (Corpus, Vec<AnnotationSet>) {
    let dir = fixture_dir();
    let mut docs = Vec::new();
    let mut sets = Vec::new();
    for name in FIXTURE_DOCS {
        let path = dir.join(name);
        let payload = std::fs::read(&path).unwrap();
        let doc = ingest(&payload, Format::from_path(&path).unwrap(), &HeuristicTagger).unwrap();
        let para = &doc.paragraphs[0];
        let ann = std::fs::read_to_string(path.with_extension("ann")).unwrap();
        sets.push(parse_standoff(&ann, &para.text, &doc.doc_id, &para.para_id).unwrap());
        docs.push(doc);
    }
    (Corpus::new(docs), sets)
}

pub const MATERIAL: &str = "MATERIAL";
pub const VALUE: &str = "VALUE";
pub const AFFECTS: &str = "affects";
pub const HAS_VALUE: &str = "has_value";

pub fn synthetic_schema() -> OntologySchema {
    OntologySchema::new(
        [MATERIAL, VALUE],
        [
            RelationRule::new(MATERIAL, AFFECTS, MATERIAL),
            RelationRule::new(MATERIAL, HAS_VALUE, VALUE),
        ],
    )
    .unwrap()
}

/// Surface forms a generated document may use. Formulas and four-digit
/// values are always on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Variants {
    /// Hyphenated alloy names such as `Ti-6Al-4V`.
    pub alloys: bool,
    /// Decimal values such as `5.25`.
    pub decimals: bool,
    /// Trade names such as `Inconel`, shaped like ordinary capitalised words.
    pub names: bool,
    /// Spelled-out values such as `twelve`, shaped like ordinary words.
    pub spelled: bool,
}

impl Variants {
    /// Every shape-distinguishable form.
    pub const SHAPES: Variants = Variants {
        alloys: true,
        decimals: true,
        names: false,
        spelled: false,
    };
    pub const ALL: Variants = Variants {
        alloys: true,
        decimals: true,
        names: true,
        spelled: true,
    };
}

const NAMES: &[&str] = &["Inconel", "Hastelloy", "Stellite", "Waspaloy", "Nimonic", "Monel", "Invar", "Kovar"];
const SPELLED: &[&str] = &["five", "twelve", "twenty", "forty", "ninety", "hundred", "thousand", "eleven"];

const ELEMENTS: &[&str] = &["Fe", "Al", "Ti", "Ni", "Cu", "Mg", "Zn", "Si", "Co", "Cr", "Mo", "W", "O", "N", "C", "V"];
const FILLER: &[&str] = &[
    "sample", "was", "tested", "at", "room", "temperature", "with", "high", "strength", "grain", "boundary",
    "observed", "in", "after", "annealing", "this", "study", "shows", "microstructure", "phase", "results", "measured",
    "data", "clearly", "under", "load", "during", "cooling",
];
const STARTERS: &[&str] = &["The", "In", "This", "Our", "Here"];

fn formula(rng: &mut ChaCha8Rng) -> String {
    let parts = rng.gen_range(2..=3);
    let mut s = String::new();
    for _ in 0..parts {
        s.push_str(ELEMENTS.choose(rng).unwrap());
        if rng.gen_bool(0.7) {
            s.push_str(&rng.gen_range(2..=9).to_string());
        }
    }
    if !s.chars().any(|c| c.is_ascii_digit()) {
        s.push('2');
    }
    s
}

fn alloy(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}-{}{}-{}{}",
        ELEMENTS.choose(rng).unwrap(),
        rng.gen_range(1..=9),
        ELEMENTS.choose(rng).unwrap(),
        rng.gen_range(1..=9),
        ELEMENTS.choose(rng).unwrap()
    )
}

fn material(rng: &mut ChaCha8Rng, v: Variants) -> String {
    if v.names && rng.gen_bool(0.4) {
        return NAMES.choose(rng).unwrap().to_string();
    }
    if v.alloys && rng.gen_bool(0.5) {
        alloy(rng)
    } else {
        formula(rng)
    }
}

fn value(rng: &mut ChaCha8Rng, v: Variants) -> String {
    if v.spelled && rng.gen_bool(0.4) {
        return SPELLED.choose(rng).unwrap().to_string();
    }
    if v.decimals && rng.gen_bool(0.5) {
        format!("{}.{:02}", rng.gen_range(1..=9), rng.gen_range(0..100))
    } else {
        rng.gen_range(1000..10000).to_string()
    }
}

enum Piece {
    Word(String),
    Entity(usize),
}

fn fillers(rng: &mut ChaCha8Rng, max: usize, out: &mut Vec<Piece>) {
    for _ in 0..rng.gen_range(0..=max) {
        out.push(Piece::Word(FILLER.choose(rng).unwrap().to_string()));
    }
}

/// One sentence as pieces, its entities (surface, type) and relations
/// (head index, tail index, name). Relations hold exactly when the trigger
/// word sits between the two mentions.
fn sentence(rng: &mut ChaCha8Rng, v: Variants) -> (Vec<Piece>, Vec<(String, &'static str)>, Vec<(usize, usize, &'static str)>) {
    let mut pieces = Vec::new();
    if rng.gen_bool(0.5) {
        pieces.push(Piece::Word(STARTERS.choose(rng).unwrap().to_string()));
        fillers(rng, 2, &mut pieces);
    }
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let template = rng.gen_range(0..4);
    let first = material(rng, v);
    entities.push((first, MATERIAL));
    pieces.push(Piece::Entity(0));
    if rng.gen_bool(0.3) {
        pieces.push(Piece::Word("clearly".into()));
    }
    let (connector, second, relation) = match template {
        0 => ("causes", (material(rng, v), MATERIAL), Some(AFFECTS)),
        1 => (*["and", "with", "unlike"].choose(rng).unwrap(), (material(rng, v), MATERIAL), None),
        2 => ("reaches", (value(rng, v), VALUE), Some(HAS_VALUE)),
        _ => (*["near", "after", "at"].choose(rng).unwrap(), (value(rng, v), VALUE), None),
    };
    pieces.push(Piece::Word(connector.into()));
    entities.push(second);
    pieces.push(Piece::Entity(1));
    if let Some(r) = relation {
        relations.push((0, 1, r));
    }
    fillers(rng, 3, &mut pieces);
    (pieces, entities, relations)
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub doc: Document,
    pub set: AnnotationSet,
}

/// A document of `paragraphs` paragraphs with five sentences each, and its
/// gold annotations.
pub fn generate(rng: &mut ChaCha8Rng, paragraphs: usize, v: Variants) -> Generated {
    let mut raw = Vec::new();
    let mut pending: Vec<(usize, EntityAnnotation)> = Vec::new();
    let mut pending_rel: Vec<(usize, usize, &'static str)> = Vec::new();
    for p in 0..paragraphs {
        let mut text = String::new();
        for _ in 0..5 {
            if !text.is_empty() {
                text.push(' ');
            }
            let (pieces, entities, relations) = sentence(rng, v);
            let base = pending.len();
            let mut spans = vec![CharSpan::new(0, 0); entities.len()];
            for (i, piece) in pieces.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                let word = match piece {
                    Piece::Word(w) => w.as_str(),
                    Piece::Entity(k) => entities[*k].0.as_str(),
                };
                let start = text.chars().count();
                text.push_str(word);
                if let Piece::Entity(k) = piece {
                    spans[*k] = CharSpan::new(start, start + word.chars().count());
                }
            }
            text.push('.');
            for ((surface, ty), span) in entities.into_iter().zip(spans) {
                pending.push((
                    p,
                    EntityAnnotation {
                        ann_id: String::new(),
                        entity_type: ty.into(),
                        para_id: String::new(),
                        span,
                        surface,
                        provenance: Provenance::Human,
                    },
                ));
            }
            pending_rel.extend(relations.into_iter().map(|(h, t, r)| (base + h, base + t, r)));
        }
        raw.push(RawParagraph::new(text));
    }
    let joined: Vec<&str> = raw.iter().map(|r| r.text.as_str()).collect();
    let doc_id = doc_id_for_payload(joined.join("\n\n").as_bytes());
    let doc = Document::build(doc_id.clone(), Metadata::default(), raw, &HeuristicTagger).unwrap();
    let mut set = AnnotationSet::new(doc_id);
    for (i, (p, mut e)) in pending.into_iter().enumerate() {
        e.ann_id = format!("T{}", i + 1);
        e.para_id = doc.paragraphs[p].para_id.clone();
        set.entities.push(e);
    }
    for (i, (h, t, r)) in pending_rel.into_iter().enumerate() {
        set.relations.push(RelationAnnotation {
            ann_id: format!("R{}", i + 1),
            relation_type: r.into(),
            arg1: format!("T{}", h + 1),
            arg2: format!("T{}", t + 1),
            provenance: Provenance::Human,
        });
    }
    Generated { doc, set }
}

pub fn records(data: &[Generated]) -> Vec<TrainingRecord> {
    data.iter().flat_map(|g| export_training(&g.doc, &g.set).0).collect()
}

/// Pooled micro-F1 of `auto_annotate` against the gold sets.
pub fn ner_f1(ner: &NerModel, rc: &RcModel, schema: &OntologySchema, data: &[Generated]) -> f64 {
    let pred: Vec<AnnotationSet> = data.iter().map(|g| auto_annotate(&g.doc, ner, rc, schema).unwrap()).collect();
    let pairs: Vec<(&AnnotationSet, &AnnotationSet)> = pred.iter().zip(data.iter().map(|g| &g.set)).collect();
    evaluate_many(&pairs).unwrap().micro_f1
}

/// Fraction of gold ordered entity pairs (NONE included) labelled correctly.
pub fn rc_accuracy(rc: &RcModel, schema: &OntologySchema, records: &[TrainingRecord]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for rec in records {
        for pair in &rec.pairs {
            let h = &rec.spans[pair.head];
            let t = &rec.spans[pair.tail];
            let got = rc.predict(&rec.tokens, (h.span, &h.label), (t.span, &t.label), schema);
            total += 1;
            correct += usize::from(got == pair.label);
        }
    }
    if total == 0 {
        return 0.0;
    }
    correct as f64 / total as f64
}
