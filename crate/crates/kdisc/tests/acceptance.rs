//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{Generated, Variants};
use kdisc::{cli, formats};
use kdisc_core::annotation::{
    export_training, parse_standoff, serialize_standoff, AnnotationSet, EntityAnnotation, Provenance, RelationAnnotation, TokenSpan,
};
use kdisc_core::autoann::{auto_annotate, evaluate_many, evaluate_micro_f1};
use kdisc_core::corpus::{char_slice, CharSpan, Corpus, Document, HeuristicTagger, Metadata, RawParagraph};
use kdisc_core::graph::{build_graph, integrity_report, subgraph_for_paragraphs, EdgeKind, NodeKind, PropertyGraph};
use kdisc_core::ner::{decode_nested, NerHyper, NerModel};
use kdisc_core::rc::train_rc;
use kdisc_core::retrieval::{index_paragraphs, Embedder, HashingEmbedder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const TEXT_WORDS: &[&str] = &[
    "alloy", "Fe2O3", "naïve", "grain", "5.2", "MPa", "crack", "β-phase", "under", "the", "Ti-6Al-4V", "résumé", "heat",
    "(", ")", ",", "yield", "\n", "σ", "日本",
];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..40);
    let words: Vec<&str> = (0..n).map(|_| *TEXT_WORDS.choose(rng).unwrap()).collect();
    words.join(" ")
}

/// Valid single-paragraph set: unique (span, type), distinct relation
/// arguments, ids deliberately out of canonical order.
fn random_set(rng: &mut ChaCha8Rng, text: &str) -> AnnotationSet {
    let len = text.chars().count();
    let mut set = AnnotationSet::new("doc-x");
    for _ in 0..rng.gen_range(0..15) {
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len.min(start + 12));
        let span = CharSpan::new(start, end);
        let ty = ["MAT", "PROP", "VAL"].choose(rng).unwrap().to_string();
        if set.entities.iter().any(|e| e.span == span && e.entity_type == ty) {
            continue;
        }
        set.entities.push(EntityAnnotation {
            ann_id: format!("T{}", rng.gen_range(1..1000)),
            entity_type: ty,
            para_id: "doc-x.p0".into(),
            span,
            surface: char_slice(text, span).unwrap().to_string(),
            provenance: Provenance::Human,
        });
    }
    set.entities.dedup_by(|a, b| a.ann_id == b.ann_id);
    let mut seen = std::collections::BTreeSet::new();
    set.entities.retain(|e| seen.insert(e.ann_id.clone()));
    let n = set.entities.len();
    if n >= 2 {
        for i in 0..rng.gen_range(0..10) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            set.relations.push(RelationAnnotation {
                ann_id: format!("R{}", 500 - i),
                relation_type: ["affects", "has_value"].choose(rng).unwrap().to_string(),
                arg1: set.entities[a].ann_id.clone(),
                arg2: set.entities[b].ann_id.clone(),
                provenance: Provenance::Human,
            });
        }
    }
    set
}

fn standoff_round_trip() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut entities = 0;
    for i in 0..1000 {
        let text = random_text(&mut rng);
        let set = random_set(&mut rng, &text);
        entities += set.entities.len();
        let parsed = parse_standoff(&serialize_standoff(&set), &text, "doc-x", "doc-x.p0")
            .map_err(|e| format!("set {i}: {e}"))?;
        ensure(parsed == set.canonicalize(), || format!("set {i} changed in round trip"))?;
    }
    Ok(format!("1000 sets, {entities} entities"))
}

fn nested_decode() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tau = NerHyper::default().threshold;
    let mut accepted = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=8);
        let mut scored = Vec::new();
        for s in 0..n {
            for e in s + 1..=n {
                scored.push((TokenSpan::new(s, e), rng.gen::<f64>()));
            }
        }
        let out = decode_nested(&scored, tau);
        accepted += out.len();
        for a in &out {
            for b in &out {
                let crossing = a.start < b.start && b.start < a.end && a.end < b.end;
                ensure(!crossing, || format!("case {case}: {a:?} crosses {b:?}"))?;
            }
        }
        for (span, score) in &scored {
            if *score < tau || out.contains(span) {
                continue;
            }
            let blocked = out.iter().any(|a| {
                (a.start < span.start && span.start < a.end && a.end < span.end)
                    || (span.start < a.start && a.start < span.end && span.end < a.end)
            });
            ensure(blocked, || format!("case {case}: {span:?} (score {score}) could be added"))?;
        }
    }
    Ok(format!("500 cases, {accepted} spans accepted"))
}

fn ents(specs: &[(usize, usize, &str)]) -> AnnotationSet {
    let mut set = AnnotationSet::new("d");
    for (i, (s, e, ty)) in specs.iter().enumerate() {
        set.entities.push(EntityAnnotation {
            ann_id: format!("T{}", i + 1),
            entity_type: ty.to_string(),
            para_id: "d.p0".into(),
            span: CharSpan::new(*s, *e),
            surface: String::new(),
            provenance: Provenance::Human,
        });
    }
    set
}

fn micro_f1_oracle() -> Result<String, String> {
    // (pred, gold, precision, recall, f1), counts worked out by hand.
    let g3 = [(0, 4, "A"), (5, 9, "B"), (10, 12, "A")];
    let fixtures: Vec<(Vec<(usize, usize, &str)>, Vec<(usize, usize, &str)>, f64, f64, f64)> = vec![
        (vec![], vec![], 0.0, 0.0, 0.0),
        (vec![], g3.to_vec(), 0.0, 0.0, 0.0),
        (g3.to_vec(), g3.to_vec(), 1.0, 1.0, 1.0),
        (g3.to_vec(), vec![], 0.0, 0.0, 0.0),
        // tp 2 of 2 predicted, 3 gold: p 1, r 2/3, f1 0.8
        (vec![(0, 4, "A"), (5, 9, "B")], g3.to_vec(), 1.0, 2.0 / 3.0, 0.8),
        // wrong type on one: tp 2, pred 3, gold 3
        (vec![(0, 4, "A"), (5, 9, "A"), (10, 12, "A")], g3.to_vec(), 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0),
        // boundary off by one: tp 0
        (vec![(0, 3, "A"), (5, 10, "B")], g3.to_vec(), 0.0, 0.0, 0.0),
        // tp 1, pred 4, gold 3: p 1/4, r 1/3, f1 2/7
        (vec![(0, 4, "A"), (1, 4, "A"), (6, 9, "B"), (20, 22, "C")], g3.to_vec(), 0.25, 1.0 / 3.0, 2.0 / 7.0),
        // tp 3, pred 5, gold 3: p 3/5, r 1, f1 3/4
        (
            vec![(0, 4, "A"), (0, 4, "B"), (5, 9, "B"), (10, 12, "A"), (10, 12, "C")],
            g3.to_vec(),
            0.6,
            1.0,
            0.75,
        ),
        // nested gold spans, tp 2 of pred 2, gold 4: p 1, r 1/2, f1 2/3
        (
            vec![(0, 12, "A"), (5, 9, "B")],
            vec![(0, 12, "A"), (0, 4, "A"), (5, 9, "B"), (10, 12, "A")],
            1.0,
            0.5,
            2.0 / 3.0,
        ),
    ];
    for (i, (pred, gold, p, r, f)) in fixtures.iter().enumerate() {
        let res = evaluate_micro_f1(&ents(pred), &ents(gold)).map_err(|e| e.to_string())?;
        for (name, got, want) in [("precision", res.precision, p), ("recall", res.recall, r), ("f1", res.micro_f1, f)] {
            ensure((got - want).abs() <= 1e-9, || format!("fixture {i}: {name} {got} != {want}"))?;
        }
    }
    Ok(format!("{} fixtures", fixtures.len()))
}

fn retrieval_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab: Vec<String> = (0..3000)
        .map(|_| {
            let len = rng.gen_range(3..9);
            (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
        })
        .collect();
    let sentence = |rng: &mut ChaCha8Rng, n: usize| -> String {
        let words: Vec<&str> = (0..n).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
        words.join(" ")
    };
    let docs: Vec<Document> = (0..1000)
        .map(|i| {
            let n = rng.gen_range(10..40);
            let text = sentence(&mut rng, n);
            Document::build(format!("doc{i:04}"), Metadata::default(), vec![RawParagraph::new(text)], &HeuristicTagger)
                .unwrap()
        })
        .collect();
    let corpus = Corpus::new(docs);
    let e = HashingEmbedder::default();
    let index = index_paragraphs(&corpus, &e);
    ensure(index.len() == 1000, || format!("{} entries", index.len()))?;
    let dot = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum::<f64>();
    for qi in 0..100 {
        let n = rng.gen_range(2..12);
        let query = sentence(&mut rng, n);
        let q = e.embed(&query);
        let qn = dot(&q.values, &q.values).sqrt();
        let mut scan: Vec<(&String, f64)> = index
            .entries
            .iter()
            .map(|(id, v)| {
                let vn = dot(&v.values, &v.values).sqrt();
                let c = if qn == 0.0 || vn == 0.0 { 0.0 } else { dot(&q.values, &v.values) / (qn * vn) };
                (id, c)
            })
            .collect();
        scan.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        for k in [1, 3, 10] {
            let hits = index.top_k(&e, &query, k).map_err(|e| e.to_string())?;
            ensure(hits.len() == k, || format!("query {qi}: {} hits for k={k}", hits.len()))?;
            for (h, (id, c)) in hits.iter().zip(&scan) {
                ensure(&h.para_id == *id && (h.score - c).abs() <= 1e-12, || {
                    format!("query {qi} k={k}: got {} {} expected {id} {c}", h.para_id, h.score)
                })?;
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut self_queries = 0;
    for _ in 0..100 {
        let doc = corpus.documents.choose(&mut rng).unwrap();
        let para = &doc.paragraphs[0];
        if !seen.insert(para.para_id.clone()) {
            continue;
        }
        self_queries += 1;
        let hits = index.top_k(&e, &para.text, 1).map_err(|e| e.to_string())?;
        ensure(hits[0].para_id == para.para_id && (hits[0].score - 1.0).abs() <= 1e-6, || {
            format!("self query {} returned {} {}", para.para_id, hits[0].para_id, hits[0].score)
        })?;
    }
    Ok(format!("1000 paragraphs, 100 queries x k in {{1,3,10}}, {self_queries} self queries"))
}

fn generate_docs(seed: u64, docs: usize, paragraphs: usize, v: Variants) -> Vec<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..docs).map(|_| common::generate(&mut rng, paragraphs, v)).collect()
}

fn synthetic_learning() -> Result<String, String> {
    let schema = common::synthetic_schema();
    let train = generate_docs(10, 8, 3, Variants::SHAPES);
    let test = generate_docs(11, 4, 3, Variants::SHAPES);
    let records = common::records(&train);
    let hyper = NerHyper::default();
    let ner = NerModel::train(&records, &hyper).map_err(|e| e.to_string())?;
    let (rc, _) = train_rc(&records, &schema, &hyper.gd()).map_err(|e| e.to_string())?;
    let f1 = common::ner_f1(&ner, &rc, &schema, &test);
    let acc = common::rc_accuracy(&rc, &schema, &common::records(&test));
    let detail = format!("NER micro-F1 {f1:.4}, RC pair accuracy {acc:.4} ({} train sentences)", records.len());
    ensure(f1 >= 0.95 && acc >= 0.95, || detail.clone())?;
    Ok(detail)
}

/// The last fifth of a document's sentences: an 80/20 split by sentence.
fn dev_sentences(doc: &Document) -> Vec<String> {
    let all: Vec<&str> = doc.sentences().map(|(_, s)| s.sent_id.as_str()).collect();
    let cut = all.len() - all.len() / 5;
    all[cut..].iter().map(|s| s.to_string()).collect()
}

/// Entities of `set` inside `sents`, with the relations among them.
fn restrict(doc: &Document, set: &AnnotationSet, sents: &[String]) -> AnnotationSet {
    let mut out = set.clone();
    out.entities.retain(|e| {
        doc.paragraph(&e.para_id)
            .and_then(|p| p.sentence_containing(e.span))
            .is_some_and(|s| sents.contains(&s.sent_id))
    });
    let kept: Vec<&str> = out.entities.iter().map(|e| e.ann_id.as_str()).collect();
    let relations = out
        .relations
        .iter()
        .filter(|r| kept.contains(&r.arg1.as_str()) && kept.contains(&r.arg2.as_str()))
        .cloned()
        .collect();
    out.relations = relations;
    out
}

/// F1 on the fixed dev split after training on d1, d1+d2 and d1+d2+d3.
/// Each document has 8 paragraphs of 5 sentences; its last 8 sentences are dev.
fn trend_replicate(seed: u64) -> Result<[f64; 3], String> {
    let schema = common::synthetic_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs: Vec<Generated> = (0..3).map(|_| common::generate(&mut rng, 8, Variants::ALL)).collect();
    let dev: Vec<Vec<String>> = docs.iter().map(|g| dev_sentences(&g.doc)).collect();
    let gold: Vec<AnnotationSet> = docs.iter().zip(&dev).map(|(g, d)| restrict(&g.doc, &g.set, d)).collect();
    let hyper = NerHyper::default();
    let mut f1s = [0.0; 3];
    for n in 1..=3 {
        let records: Vec<_> = docs[..n]
            .iter()
            .zip(&dev)
            .flat_map(|(g, d)| export_training(&g.doc, &g.set).0.into_iter().filter(|r| !d.contains(&r.sent_id)))
            .collect();
        let ner = NerModel::train(&records, &hyper).map_err(|e| e.to_string())?;
        let (rc, _) = train_rc(&records, &schema, &hyper.gd()).map_err(|e| e.to_string())?;
        let mut pred = Vec::new();
        for (g, d) in docs.iter().zip(&dev) {
            let set = auto_annotate(&g.doc, &ner, &rc, &schema).map_err(|e| e.to_string())?;
            pred.push(restrict(&g.doc, &set, d));
        }
        let pairs: Vec<(&AnnotationSet, &AnnotationSet)> = pred.iter().zip(&gold).collect();
        f1s[n - 1] = evaluate_many(&pairs).map_err(|e| e.to_string())?.micro_f1;
    }
    Ok(f1s)
}

const TREND_REPLICATES: u64 = 10;

fn trend() -> Result<String, String> {
    let mut mean = [0.0; 3];
    let mut strict = 0;
    for r in 0..TREND_REPLICATES {
        let f = trend_replicate(1000 + r)?;
        strict += usize::from(f[0] <= f[1] && f[1] <= f[2]);
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x / TREND_REPLICATES as f64;
        }
    }
    let detail = format!(
        "mean F1 d1 {:.1}, d1+d2 {:.1}, d1+d2+d3 {:.1} over {TREND_REPLICATES} replicates; strict chain in {strict}/{TREND_REPLICATES}",
        100.0 * mean[0],
        100.0 * mean[1],
        100.0 * mean[2]
    );
    ensure(mean[0] <= mean[1] && mean[1] <= mean[2] + 0.01, || detail.clone())?;
    Ok(detail)
}

/// Entity nodes reachable in `sub` whose sentence is not inside one of
/// `paras`, found by walking containment edges.
fn ungrounded_entities(sub: &PropertyGraph, paras: &[String]) -> Vec<String> {
    let parent: BTreeMap<&str, &str> = sub
        .edges()
        .iter()
        .filter(|e| e.kind.is_containment())
        .map(|e| (e.dst.as_str(), e.src.as_str()))
        .collect();
    sub.nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Entity)
        .filter(|n| {
            let para = parent.get(n.node_id.as_str()).and_then(|s| parent.get(s));
            !para.is_some_and(|p| paras.iter().any(|x| x == p))
        })
        .map(|n| n.node_id.clone())
        .collect()
}

fn graph_invariants() -> Result<String, String> {
    let mut fixtures: Vec<(String, Corpus, Vec<AnnotationSet>)> = Vec::new();
    let (qa, qa_sets) = common::qa_fixture();
    fixtures.push(("qa".into(), qa, qa_sets));
    for seed in 30..33 {
        let g = generate_docs(seed, 4, 2, Variants::SHAPES);
        let corpus = Corpus::new(g.iter().map(|x| x.doc.clone()).collect());
        fixtures.push((format!("synthetic-{seed}"), corpus, g.into_iter().map(|x| x.set).collect()));
    }
    let e = HashingEmbedder::default();
    let mut nodes = 0;
    for (name, corpus, sets) in &fixtures {
        let g = build_graph(&corpus.documents, sets).map_err(|e| format!("{name}: {e}"))?;
        nodes += g.nodes().len();
        let report = integrity_report(&g);
        ensure(report.is_empty(), || format!("{name}: {report:?}"))?;
        for edge in g.edges() {
            ensure(g.node(&edge.src).is_some() && g.node(&edge.dst).is_some(), || {
                format!("{name}: dangling {}", edge.edge_id)
            })?;
        }
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for edge in g.edges().iter().filter(|e| e.kind.is_containment()) {
            parents.entry(edge.dst.as_str()).or_default().push(edge.src.as_str());
        }
        for n in g.nodes() {
            let want = usize::from(n.kind != NodeKind::Document);
            let got = parents.get(n.node_id.as_str()).map_or(0, Vec::len);
            ensure(got == want, || format!("{name}: {} has {got} containment parents", n.node_id))?;
        }
        let index = index_paragraphs(corpus, &e);
        let query = &corpus.documents[0].paragraphs[0].text;
        let paras: Vec<String> = index
            .top_k(&e, query, 3)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|h| h.para_id)
            .collect();
        let sub = subgraph_for_paragraphs(&g, &paras).map_err(|e| e.to_string())?;
        let stray = ungrounded_entities(&sub, &paras);
        ensure(stray.is_empty(), || format!("{name}: entities outside retrieved paragraphs: {stray:?}"))?;
        let relation_edges = sub.edges().iter().filter(|e| matches!(e.kind, EdgeKind::Relation(_))).count();
        ensure(integrity_report(&sub).is_empty(), || format!("{name}: subgraph not closed ({relation_edges} relations)"))?;
    }
    Ok(format!("{} corpora, {nodes} nodes", fixtures.len()))
}

/// Hand counts for the subgraph of the three paragraphs retrieved for the
/// fixture question (doc1, doc2, doc3): 3 documents + 3 paragraphs + 6
/// sentences + 17 entities; 3 + 6 + 17 containment edges + 9 relations.
const QA_SUBGRAPH_NODES: usize = 29;
const QA_SUBGRAPH_EDGES: usize = 35;

fn run_cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["kdisc"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    if code != 0 {
        return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)));
    }
    String::from_utf8(out).map_err(|e| e.to_string())
}

fn end_to_end_mock_qa() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tmp = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let fixtures = common::fixture_dir();
    let inputs: Vec<String> = common::FIXTURE_DOCS
        .iter()
        .map(|n| fixtures.join(n).to_string_lossy().into_owned())
        .collect();
    let mut args = vec!["ingest", "--out"];
    let corpus = tmp("corpus.jsonl");
    args.push(&corpus);
    args.extend(inputs.iter().map(String::as_str));
    run_cli(&args)?;
    let (_, sets) = common::qa_fixture();
    let annotations = tmp("annotations.jsonl");
    std::fs::write(&annotations, formats::write_annotations(&sets)).map_err(|e| e.to_string())?;
    let schema = fixtures.join("schema.json").to_string_lossy().into_owned();
    run_cli(&["schema", "validate", &schema, "--corpus", &corpus, "--annotations", &annotations])?;
    let graph = tmp("graph.tsv");
    let index = tmp("index.tsv");
    run_cli(&["graph", "build", "--corpus", &corpus, "--annotations", &annotations, "--out", &graph])?;
    run_cli(&["index", "build", "--corpus", &corpus, "--out", &index])?;
    let question = std::fs::read_to_string(fixtures.join("question.txt")).map_err(|e| e.to_string())?;
    let ask = [
        "ask", "--mock", "--corpus", &corpus, "--annotations", &annotations, "--graph", &graph, "--index", &index,
        "--q", question.trim(),
    ];
    let first = run_cli(&ask)?;
    let second = run_cli(&ask)?;
    ensure(first == second, || "transcript differs between runs".into())?;
    let expected = std::fs::read_to_string(fixtures.join("expected_transcript.txt")).map_err(|e| e.to_string())?;
    ensure(first == expected, || format!("transcript differs from fixture:\n{first}"))?;
    let count = |prefix: &str| first.lines().filter(|l| l.starts_with(prefix)).count();
    ensure(count("context ") == 3 && count("answer ") == 3 && count("summary: ") == 1, || {
        format!("{} contexts, {} answers, {} summaries", count("context "), count("answer "), count("summary: "))
    })?;
    let want = format!("subgraph: {QA_SUBGRAPH_NODES} nodes, {QA_SUBGRAPH_EDGES} edges");
    ensure(first.lines().any(|l| l == want), || format!("expected `{want}`"))?;
    Ok(format!("{} bytes, {want}", first.len()))
}

fn determinism() -> Result<String, String> {
    let schema = common::synthetic_schema();
    let train = generate_docs(40, 4, 2, Variants::SHAPES);
    let test = generate_docs(41, 2, 2, Variants::SHAPES);
    let run = || -> Result<(String, String, String), String> {
        let records = common::records(&train);
        let hyper = NerHyper::default();
        let ner = NerModel::train(&records, &hyper).map_err(|e| e.to_string())?;
        let (rc, _) = train_rc(&records, &schema, &hyper.gd()).map_err(|e| e.to_string())?;
        let sets: Vec<AnnotationSet> = test
            .iter()
            .map(|g| auto_annotate(&g.doc, &ner, &rc, &schema).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok((formats::write_ner_model(&ner), formats::write_rc_model(&rc), formats::write_annotations(&sets)))
    };
    let a = run()?;
    let b = run()?;
    ensure(a.0 == b.0, || "NER models differ".into())?;
    ensure(a.1 == b.1, || "RC models differ".into())?;
    ensure(a.2 == b.2, || "annotation sets differ".into())?;
    let ner_a = formats::read_ner_model(&a.0).map_err(|e| e.to_string())?;
    let ner_b = formats::read_ner_model(&b.0).map_err(|e| e.to_string())?;
    let bits = |m: &NerModel| -> Vec<u64> { m.span_detector.weights.iter().map(|w| w.to_bits()).collect() };
    ensure(bits(&ner_a) == bits(&ner_b), || "detector weights differ bitwise".into())?;
    Ok(format!("{} + {} model bytes, {} annotation bytes identical", a.0.len(), a.1.len(), a.2.len()))
}

fn main() {
    let criteria: [(&str, Duration, Check); 9] = [
        ("standoff round-trip", Duration::from_secs(10), standoff_round_trip),
        ("nested-decode soundness and maximality", Duration::from_secs(10), nested_decode),
        ("micro-F1 oracle", Duration::from_secs(1), micro_f1_oracle),
        ("retrieval oracle", Duration::from_secs(30), retrieval_oracle),
        ("synthetic learning", Duration::from_secs(120), synthetic_learning),
        ("trend analog", Duration::from_secs(300), trend),
        ("graph invariants", Duration::from_secs(10), graph_invariants),
        ("end-to-end mock QA", Duration::from_secs(10), end_to_end_mock_qa),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = t.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > limit => Err(format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
