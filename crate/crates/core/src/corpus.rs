//! Canonical corpus model: Document → Paragraph → Sentence → Token.
//!
//! All offsets are counted in Unicode scalar values and are relative to the
//! owning paragraph's text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::hash;

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub const fn len(&self) -> usize {
        self.end - self.start
    }

    pub const fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub const fn contains(&self, other: &CharSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Coarse 12-tag part-of-speech set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Propn,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Punct,
    X,
}

impl Pos {
    pub const fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Propn => "PROPN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Num => "NUM",
            Pos::Conj => "CONJ",
            Pos::Punct => "PUNCT",
            Pos::X => "X",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub span: CharSpan,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Pos>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub span: CharSpan,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub para_id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_section: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub metadata: Metadata,
    pub paragraphs: Vec<Paragraph>,
}

/// Raw paragraph before segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawParagraph {
    pub text: String,
    pub source_section: Option<String>,
}

impl RawParagraph {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source_section: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("document body is empty")]
    EmptyBody,
    #[error("payload is not valid UTF-8 (byte {position})")]
    InvalidUtf8 { position: usize },
}

/// Document id derived from the payload bytes, so re-ingesting the same
/// payload is idempotent.
pub fn doc_id_for_payload(payload: &[u8]) -> String {
    format!("doc-{}", hash::fingerprint(payload))
}

pub fn para_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}.p{ordinal}")
}

pub fn sent_id(para_id: &str, ordinal: usize) -> String {
    format!("{para_id}.s{ordinal}")
}

impl Document {
    /// Segments, tokenises and tags each raw paragraph. Paragraphs that are
    /// blank after trimming are dropped; an empty result is an error.
    pub fn build(
        doc_id: String,
        metadata: Metadata,
        raw: Vec<RawParagraph>,
        tagger: &dyn PosTagger,
    ) -> Result<Self, IngestError> {
        let mut paragraphs = Vec::new();
        for para in raw.into_iter().filter(|p| !p.text.trim().is_empty()) {
            let pid = para_id(&doc_id, paragraphs.len());
            paragraphs.push(Paragraph::build(pid, para.text, para.source_section, tagger));
        }
        if paragraphs.is_empty() {
            return Err(IngestError::EmptyBody);
        }
        Ok(Self {
            doc_id,
            metadata,
            paragraphs,
        })
    }

    pub fn paragraph(&self, para_id: &str) -> Option<&Paragraph> {
        self.paragraphs.iter().find(|p| p.para_id == para_id)
    }

    pub fn sentences(&self) -> impl Iterator<Item = (&Paragraph, &Sentence)> {
        self.paragraphs
            .iter()
            .flat_map(|p| p.sentences.iter().map(move |s| (p, s)))
    }
}

impl Paragraph {
    pub fn build(
        para_id: String,
        text: String,
        source_section: Option<String>,
        tagger: &dyn PosTagger,
    ) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let sentences = segment_chars(&chars)
            .into_iter()
            .enumerate()
            .map(|(ordinal, span)| {
                let slice: String = chars[span.start..span.end].iter().collect();
                let mut tokens: Vec<Token> = tokenize(&slice)
                    .into_iter()
                    .map(|t| {
                        let span = CharSpan::new(t.start + span.start, t.end + span.start);
                        Token {
                            span,
                            surface: chars[span.start..span.end].iter().collect(),
                            pos: None,
                        }
                    })
                    .collect();
                let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
                let tags = tagger.tag(&surfaces);
                for (tok, tag) in tokens.iter_mut().zip(tags) {
                    tok.pos = Some(tag);
                }
                Sentence {
                    sent_id: sent_id(&para_id, ordinal),
                    span,
                    tokens,
                }
            })
            .collect();
        Self {
            para_id,
            text,
            sentences,
            source_section,
        }
    }

    /// Length of the text in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn slice(&self, span: CharSpan) -> Option<&str> {
        char_slice(&self.text, span)
    }

    /// The sentence whose span fully contains `span`.
    pub fn sentence_containing(&self, span: CharSpan) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.span.contains(&span))
    }
}

/// Slices `text` by a character range.
pub fn char_slice(text: &str, span: CharSpan) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(core::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

/// Splits a plain-text payload into paragraphs on blank lines.
pub fn split_plain_paragraphs(text: &str) -> Vec<RawParagraph> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(RawParagraph::new(current.join("\n").trim().to_string()));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(RawParagraph::new(current.join("\n").trim().to_string()));
    }
    out
}

/// Ingests a UTF-8 plain-text payload.
pub fn ingest_plain_text(payload: &[u8], metadata: Metadata, tagger: &dyn PosTagger) -> Result<Document, IngestError> {
    let text = core::str::from_utf8(payload).map_err(|e| IngestError::InvalidUtf8 {
        position: e.valid_up_to(),
    })?;
    Document::build(
        doc_id_for_payload(payload),
        metadata,
        split_plain_paragraphs(text),
        tagger,
    )
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];

/// Rule-based sentence splitter returning character spans.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes/brackets)
/// when followed by whitespace and then an uppercase letter or digit, or at
/// end of text. A period right after a lone capital letter (an initial) does
/// not end a sentence, and a period inside a number never does since it is
/// not followed by whitespace.
pub fn segment_sentences(text: &str) -> Vec<CharSpan> {
    let chars: Vec<char> = text.chars().collect();
    segment_chars(&chars)
}

fn segment_chars(chars: &[char]) -> Vec<CharSpan> {
    let n = chars.len();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        while i < n && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= n {
            break;
        }
        let start = i;
        let mut end = None;
        while i < n {
            let c = chars[i];
            if matches!(c, '.' | '!' | '?') {
                let mut j = i + 1;
                while j < n && CLOSERS.contains(&chars[j]) {
                    j += 1;
                }
                if j < n && chars[j].is_whitespace() && !(c == '.' && is_initial(chars, i)) {
                    let mut k = j;
                    while k < n && chars[k].is_whitespace() {
                        k += 1;
                    }
                    if k < n && (chars[k].is_uppercase() || chars[k].is_ascii_digit()) {
                        end = Some(j);
                        break;
                    }
                }
                i = j;
                continue;
            }
            i += 1;
        }
        let end = end.unwrap_or_else(|| {
            let mut e = n;
            while e > start && chars[e - 1].is_whitespace() {
                e -= 1;
            }
            e
        });
        spans.push(CharSpan::new(start, end));
        i = end;
    }
    spans
}

/// True when the period at `dot` follows a single uppercase letter that is
/// itself preceded by a non-alphanumeric character (e.g. "J. Smith").
fn is_initial(chars: &[char], dot: usize) -> bool {
    if dot == 0 || !chars[dot - 1].is_uppercase() {
        return false;
    }
    dot == 1 || !chars[dot - 2].is_alphanumeric()
}

/// Whitespace tokenizer that peels leading and trailing punctuation into
/// single-character tokens. Returns spans relative to `text`.
pub fn tokenize(text: &str) -> Vec<CharSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < n && !chars[i].is_whitespace() {
            i += 1;
        }
        let chunk_end = i;
        let mut lo = chunk_start;
        let mut hi = chunk_end;
        while lo < hi && !chars[lo].is_alphanumeric() {
            lo += 1;
        }
        while hi > lo && !chars[hi - 1].is_alphanumeric() {
            hi -= 1;
        }
        out.extend((chunk_start..lo).map(|p| CharSpan::new(p, p + 1)));
        if lo < hi {
            out.push(CharSpan::new(lo, hi));
        }
        out.extend((hi.max(lo)..chunk_end).map(|p| CharSpan::new(p, p + 1)));
    }
    out
}

/// Pluggable part-of-speech tagger.
pub trait PosTagger {
    /// One tag per token, in order.
    fn tag(&self, tokens: &[&str]) -> Vec<Pos>;
}

/// Deterministic suffix/lexicon tagger.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicTagger;

const LEXICON: &[(&str, Pos)] = &[
    ("a", Pos::Det),
    ("an", Pos::Det),
    ("the", Pos::Det),
    ("this", Pos::Det),
    ("that", Pos::Det),
    ("these", Pos::Det),
    ("those", Pos::Det),
    ("each", Pos::Det),
    ("every", Pos::Det),
    ("some", Pos::Det),
    ("any", Pos::Det),
    ("no", Pos::Det),
    ("all", Pos::Det),
    ("both", Pos::Det),
    ("i", Pos::Pron),
    ("we", Pos::Pron),
    ("you", Pos::Pron),
    ("he", Pos::Pron),
    ("she", Pos::Pron),
    ("it", Pos::Pron),
    ("they", Pos::Pron),
    ("us", Pos::Pron),
    ("them", Pos::Pron),
    ("its", Pos::Pron),
    ("their", Pos::Pron),
    ("our", Pos::Pron),
    ("which", Pos::Pron),
    ("who", Pos::Pron),
    ("what", Pos::Pron),
    ("of", Pos::Adp),
    ("in", Pos::Adp),
    ("on", Pos::Adp),
    ("at", Pos::Adp),
    ("by", Pos::Adp),
    ("for", Pos::Adp),
    ("with", Pos::Adp),
    ("from", Pos::Adp),
    ("to", Pos::Adp),
    ("into", Pos::Adp),
    ("over", Pos::Adp),
    ("under", Pos::Adp),
    ("between", Pos::Adp),
    ("during", Pos::Adp),
    ("via", Pos::Adp),
    ("as", Pos::Adp),
    ("than", Pos::Adp),
    ("and", Pos::Conj),
    ("or", Pos::Conj),
    ("but", Pos::Conj),
    ("nor", Pos::Conj),
    ("while", Pos::Conj),
    ("whereas", Pos::Conj),
    ("because", Pos::Conj),
    ("if", Pos::Conj),
    ("is", Pos::Verb),
    ("are", Pos::Verb),
    ("was", Pos::Verb),
    ("were", Pos::Verb),
    ("be", Pos::Verb),
    ("been", Pos::Verb),
    ("being", Pos::Verb),
    ("has", Pos::Verb),
    ("have", Pos::Verb),
    ("had", Pos::Verb),
    ("do", Pos::Verb),
    ("does", Pos::Verb),
    ("did", Pos::Verb),
    ("can", Pos::Verb),
    ("could", Pos::Verb),
    ("may", Pos::Verb),
    ("might", Pos::Verb),
    ("will", Pos::Verb),
    ("would", Pos::Verb),
    ("should", Pos::Verb),
    ("must", Pos::Verb),
    ("not", Pos::Adv),
    ("very", Pos::Adv),
    ("also", Pos::Adv),
    ("only", Pos::Adv),
    ("however", Pos::Adv),
    ("thus", Pos::Adv),
];

/// True for words in the tagger's closed-class lexicon (determiners,
/// pronouns, prepositions, conjunctions, auxiliaries, a few adverbs).
pub fn is_closed_class(lower: &str) -> bool {
    lexicon_lookup(lower).is_some()
}

fn lexicon_lookup(lower: &str) -> Option<Pos> {
    LEXICON.iter().find(|(w, _)| *w == lower).map(|(_, p)| *p)
}

impl HeuristicTagger {
    pub fn tag_one(&self, token: &str, initial: bool) -> Pos {
        if token.chars().all(|c| !c.is_alphanumeric()) {
            return Pos::Punct;
        }
        let lower = token.to_lowercase();
        if let Some(pos) = lexicon_lookup(&lower) {
            return pos;
        }
        if token.chars().any(|c| c.is_ascii_digit())
            && token.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ','))
        {
            return Pos::Num;
        }
        let len = lower.chars().count();
        if len > 3 && lower.ends_with("ly") {
            return Pos::Adv;
        }
        if (len > 4 && lower.ends_with("ing")) || (len > 3 && lower.ends_with("ed")) {
            return Pos::Verb;
        }
        if !initial && token.chars().next().is_some_and(char::is_uppercase) {
            return Pos::Propn;
        }
        Pos::Noun
    }
}

impl PosTagger for HeuristicTagger {
    fn tag(&self, tokens: &[&str]) -> Vec<Pos> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| self.tag_one(t, i == 0))
            .collect()
    }
}

/// A set of ingested documents with paragraph lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self { documents }
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn paragraph(&self, para_id: &str) -> Option<&Paragraph> {
        self.paragraphs().find(|p| p.para_id == para_id)
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.documents.iter().flat_map(|d| d.paragraphs.iter())
    }

    /// Inserts or replaces a document by id, keeping first-insertion order.
    pub fn upsert(&mut self, doc: Document) {
        match self.documents.iter_mut().find(|d| d.doc_id == doc.doc_id) {
            Some(slot) => *slot = doc,
            None => self.documents.push(doc),
        }
    }
}
