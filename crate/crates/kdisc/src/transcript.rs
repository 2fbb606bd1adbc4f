//! Plain-text rendering of a question-answering result.
//!
//! ```text
//! question: <question>
//! context 1: <para_id> (score 0.123456)
//! answer 1: <per-context answer>
//! summary: <summary>
//! subgraph: <n> nodes, <m> edges
//! ```
//!
//! Contexts are listed before answers, both in retrieval order. Multi-line
//! values continue on lines indented by two spaces.

use std::fmt::Write as _;

use kdisc_core::qa::Answer;

fn field(out: &mut String, label: &str, value: &str) {
    let mut lines = value.lines();
    let _ = writeln!(out, "{label}: {}", lines.next().unwrap_or_default());
    for l in lines {
        let _ = writeln!(out, "  {l}");
    }
}

pub fn render(question: &str, answer: &Answer) -> String {
    let mut out = String::new();
    field(&mut out, "question", question);
    for (i, hit) in answer.contexts.iter().enumerate() {
        let _ = writeln!(out, "context {}: {} (score {:.6})", i + 1, hit.para_id, hit.score);
    }
    for (i, a) in answer.per_context.iter().enumerate() {
        field(&mut out, &format!("answer {}", i + 1), &a.answer);
    }
    field(&mut out, "summary", &answer.summary);
    let _ = writeln!(
        out,
        "subgraph: {} nodes, {} edges",
        answer.subgraph.nodes().len(),
        answer.subgraph.edges().len()
    );
    out
}
