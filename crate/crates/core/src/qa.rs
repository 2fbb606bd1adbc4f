//! Retrieval-augmented question answering: retrieve the top paragraphs,
//! prompt a generation backend once per paragraph and once for a summary,
//! and attach the paragraphs' subgraph.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_closed_class, segment_sentences, tokenize, char_slice, Corpus};
use crate::graph::{subgraph_for_paragraphs, GraphError, PropertyGraph};
use crate::hash::fingerprint;
use crate::retrieval::{Embedder, IndexError, RetrievalHit, VectorIndex};

/// Number of paragraphs retrieved per question.
pub const CONTEXT_COUNT: usize = 3;

/// Summary returned when retrieval finds nothing; no backend call is made.
pub const NO_CONTEXT_MESSAGE: &str = "No relevant context was found in the project documents.";

/// Extractive mock answer when no context sentence shares a content word
/// with the question.
pub const NO_ANSWER_MESSAGE: &str = "The context does not answer the question.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    #[serde(default)]
    pub project_id: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub params: GenParams,
}

impl Question {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            project_id: String::new(),
            model_id: String::new(),
            params: GenParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BackendError(pub String);

/// Text-generation backend.
pub trait GenerationBackend {
    fn backend_id(&self) -> String;
    fn generate(&self, model_id: &str, prompt: &str, params: &GenParams) -> Result<String, BackendError>;
}

/// Versioned prompt templates. Placeholders: `{question}` and
/// `{context_1}`..`{context_3}`. Blank-line separated blocks that mention a
/// context beyond the number retrieved are left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub version: String,
    pub per_context: String,
    pub summary: String,
}

pub const DEFAULT_TEMPLATE_VERSION: &str = "qa-v1";

pub const DEFAULT_PER_CONTEXT_TEMPLATE: &str = "\
Answer the question using only the context below. If the context does not contain the answer, say so.

Context:
{context_1}

Question: {question}
Answer:";

pub const DEFAULT_SUMMARY_TEMPLATE: &str = "\
Write a short summarised answer to the question using only the numbered contexts below.

Context 1:
{context_1}

Context 2:
{context_2}

Context 3:
{context_3}

Question: {question}
Answer:";

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            version: DEFAULT_TEMPLATE_VERSION.to_string(),
            per_context: DEFAULT_PER_CONTEXT_TEMPLATE.to_string(),
            summary: DEFAULT_SUMMARY_TEMPLATE.to_string(),
        }
    }
}

enum Placeholder {
    Question,
    Context(usize),
}

/// Parses a placeholder at the start of `s` (just after `{`), returning it
/// and the byte length consumed including the closing brace.
fn placeholder_at(s: &str) -> Option<(Placeholder, usize)> {
    if let Some(rest) = s.strip_prefix("question}") {
        return Some((Placeholder::Question, s.len() - rest.len()));
    }
    let rest = s.strip_prefix("context_")?;
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || rest.as_bytes().get(digits) != Some(&b'}') {
        return None;
    }
    let n: usize = rest[..digits].parse().ok()?;
    Some((Placeholder::Context(n), "context_".len() + digits + 1))
}

fn mentions_missing_context(block: &str, available: usize) -> bool {
    block.match_indices('{').any(|(i, _)| {
        matches!(placeholder_at(&block[i + 1..]), Some((Placeholder::Context(n), _)) if n == 0 || n > available)
    })
}

/// Single-pass substitution, so placeholder-like text inside the question
/// or a context is never expanded.
pub fn render_template(template: &str, question: &str, contexts: &[&str]) -> String {
    let blocks: Vec<&str> = template
        .split("\n\n")
        .filter(|b| !mentions_missing_context(b, contexts.len()))
        .collect();
    let kept = blocks.join("\n\n");
    let mut out = String::with_capacity(kept.len() + question.len() + contexts.iter().map(|c| c.len()).sum::<usize>());
    let mut rest = kept.as_str();
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        match placeholder_at(&rest[i + 1..]) {
            Some((Placeholder::Question, len)) => {
                out.push_str(question);
                rest = &rest[i + 1 + len..];
            }
            Some((Placeholder::Context(n), len)) => {
                out.push_str(contexts[n - 1]);
                rest = &rest[i + 1 + len..];
            }
            None => {
                out.push('{');
                rest = &rest[i + 1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompts {
    pub summary_prompt: String,
    pub per_context_prompts: Vec<String>,
}

/// Builds the summary prompt over all contexts (in retrieval order) and one
/// prompt per context.
pub fn build_prompts(templates: &PromptTemplates, question: &str, contexts: &[&str]) -> Prompts {
    Prompts {
        summary_prompt: render_template(&templates.summary, question, contexts),
        per_context_prompts: contexts
            .iter()
            .map(|c| render_template(&templates.per_context, question, &[c]))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    PerContext,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub kind: PromptKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub para_id: Option<String>,
    pub template_version: String,
    /// FNV-1a fingerprint of `template_version` and the prompt text.
    pub prompt_hash: String,
    pub prompt: String,
}

impl PromptRecord {
    fn new(kind: PromptKind, para_id: Option<String>, version: &str, prompt: String) -> Self {
        let mut keyed = String::with_capacity(version.len() + 1 + prompt.len());
        keyed.push_str(version);
        keyed.push('\n');
        keyed.push_str(&prompt);
        Self {
            kind,
            para_id,
            template_version: version.to_string(),
            prompt_hash: fingerprint(keyed.as_bytes()),
            prompt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAnswer {
    pub para_id: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub summary: String,
    pub per_context: Vec<ContextAnswer>,
    pub contexts: Vec<RetrievalHit>,
    pub subgraph: PropertyGraph,
    pub prompt_log: Vec<PromptRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QaErrorKind {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("retrieval failed: {0}")]
    Retrieval(#[from] IndexError),
    #[error("indexed paragraph {0} is missing from the corpus")]
    MissingParagraph(String),
    #[error("subgraph extraction failed: {0}")]
    Graph(#[from] GraphError),
    #[error("generation failed: {0}")]
    Backend(#[from] BackendError),
}

/// Failure with whatever was produced before it: contexts and subgraph
/// survive a generation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind}")]
pub struct QaError {
    pub kind: QaErrorKind,
    pub partial: Box<Answer>,
}

/// Everything `ask` reads besides the question and backend.
pub struct QaResources<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn Embedder,
    pub graph: &'a PropertyGraph,
    pub templates: &'a PromptTemplates,
}

fn empty_answer() -> Answer {
    Answer {
        summary: String::new(),
        per_context: Vec::new(),
        contexts: Vec::new(),
        subgraph: PropertyGraph::new(),
        prompt_log: Vec::new(),
    }
}

pub fn ask(question: &Question, res: &QaResources<'_>, backend: &dyn GenerationBackend) -> Result<Answer, QaError> {
    let mut answer = empty_answer();
    let fail = |kind: QaErrorKind, partial: &Answer| QaError {
        kind,
        partial: Box::new(partial.clone()),
    };
    if question.text.trim().is_empty() {
        return Err(fail(QaErrorKind::EmptyQuestion, &answer));
    }
    let hits = res
        .index
        .top_k(res.embedder, &question.text, CONTEXT_COUNT)
        .map_err(|e| fail(e.into(), &answer))?;
    if hits.is_empty() {
        answer.summary = NO_CONTEXT_MESSAGE.to_string();
        return Ok(answer);
    }
    let mut texts: Vec<&str> = Vec::with_capacity(hits.len());
    for h in &hits {
        match res.corpus.paragraph(&h.para_id) {
            Some(p) => texts.push(&p.text),
            None => return Err(fail(QaErrorKind::MissingParagraph(h.para_id.clone()), &answer)),
        }
    }
    answer.contexts = hits;
    if !res.graph.is_empty() {
        let ids: Vec<String> = answer.contexts.iter().map(|h| h.para_id.clone()).collect();
        answer.subgraph = subgraph_for_paragraphs(res.graph, &ids).map_err(|e| fail(e.into(), &answer))?;
    }

    let prompts = build_prompts(res.templates, &question.text, &texts);
    let version = res.templates.version.as_str();
    for (hit, prompt) in answer.contexts.clone().iter().zip(prompts.per_context_prompts) {
        answer.prompt_log.push(PromptRecord::new(
            PromptKind::PerContext,
            Some(hit.para_id.clone()),
            version,
            prompt.clone(),
        ));
        let text = backend
            .generate(&question.model_id, &prompt, &question.params)
            .map_err(|e| fail(e.into(), &answer))?;
        answer.per_context.push(ContextAnswer {
            para_id: hit.para_id.clone(),
            answer: text,
        });
    }
    answer.prompt_log.push(PromptRecord::new(
        PromptKind::Summary,
        None,
        version,
        prompts.summary_prompt.clone(),
    ));
    answer.summary = backend
        .generate(&question.model_id, &prompts.summary_prompt, &question.params)
        .map_err(|e| fail(e.into(), &answer))?;
    Ok(answer)
}

/// Returns the prompt unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl GenerationBackend for EchoBackend {
    fn backend_id(&self) -> String {
        "echo".to_string()
    }

    fn generate(&self, _model_id: &str, prompt: &str, _params: &GenParams) -> Result<String, BackendError> {
        Ok(prompt.to_string())
    }
}

/// Offline extractive backend: answers with the context sentence sharing
/// the most content words with the question (earliest on ties).
///
/// It reads prompts laid out like the default templates: the first
/// blank-line block is the instruction, a context block may open with a
/// header line ending in `:`, and the question sits on a line starting with
/// `Question:`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveMock;

fn content_words(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut words: Vec<String> = tokenize(&lowered)
        .into_iter()
        .filter_map(|s| char_slice(&lowered, s))
        .filter(|w| w.chars().any(char::is_alphanumeric) && !is_closed_class(w))
        .map(str::to_string)
        .collect();
    words.sort();
    words.dedup();
    words
}

impl ExtractiveMock {
    pub fn answer(prompt: &str) -> String {
        let question = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Question:"))
            .unwrap_or_default()
            .trim();
        let wanted = content_words(question);
        let mut best: Option<(usize, String)> = None;
        for block in prompt.split("\n\n").skip(1) {
            if block.lines().any(|l| l.starts_with("Question:")) {
                continue;
            }
            let body = match block.split_once('\n') {
                Some((first, rest)) if first.trim_end().ends_with(':') => rest,
                _ => block,
            };
            for span in segment_sentences(body) {
                let sentence = char_slice(body, span).unwrap_or_default();
                let words = content_words(sentence);
                let overlap = words.iter().filter(|w| wanted.binary_search(w).is_ok()).count();
                if overlap > 0 && best.as_ref().is_none_or(|(b, _)| overlap > *b) {
                    best = Some((overlap, sentence.to_string()));
                }
            }
        }
        best.map_or_else(|| NO_ANSWER_MESSAGE.to_string(), |(_, s)| s)
    }
}

impl GenerationBackend for ExtractiveMock {
    fn backend_id(&self) -> String {
        "extractive-mock-v1".to_string()
    }

    fn generate(&self, _model_id: &str, prompt: &str, _params: &GenParams) -> Result<String, BackendError> {
        Ok(Self::answer(prompt))
    }
}
