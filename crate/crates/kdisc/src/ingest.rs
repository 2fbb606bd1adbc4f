//! Document ingestion: TEI XML (as produced by PDF layout tools) and plain
//! UTF-8 text.

use std::path::Path;

use kdisc_core::corpus::{
    doc_id_for_payload, ingest_plain_text, Document, IngestError, Metadata, PosTagger, RawParagraph,
};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    TeiXml,
    PlainText,
}

impl Format {
    /// Guesses from a file name extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xml" | "tei" => Some(Self::TeiXml),
            "txt" | "text" => Some(Self::PlainText),
            _ => None,
        }
    }

    /// Maps an HTTP content type, ignoring parameters.
    pub fn from_content_type(ct: &str) -> Option<Self> {
        let base = ct.split(';').next().unwrap_or_default().trim().to_ascii_lowercase();
        match base.as_str() {
            "application/xml" | "text/xml" | "application/tei+xml" => Some(Self::TeiXml),
            "text/plain" => Some(Self::PlainText),
            _ => None,
        }
    }

    pub fn sniff(payload: &[u8]) -> Self {
        let head = payload.iter().position(|b| !b.is_ascii_whitespace()).map(|i| payload[i]);
        if head == Some(b'<') {
            Self::TeiXml
        } else {
            Self::PlainText
        }
    }
}

pub fn ingest(payload: &[u8], format: Format, tagger: &dyn PosTagger) -> Result<Document, IngestError> {
    match format {
        Format::TeiXml => ingest_tei(payload, tagger),
        Format::PlainText => ingest_plain_text(payload, Metadata::default(), tagger),
    }
}

/// Elements whose text never contributes to body paragraphs.
const EXCLUDED: &[&[u8]] = &[b"figure", b"table", b"note", b"formula", b"listBibl", b"bibl"];

#[derive(Default)]
struct TeiState {
    stack: Vec<Vec<u8>>,
    metadata: Metadata,
    paragraphs: Vec<RawParagraph>,
    /// Section heading per open `div`, outermost first.
    heads: Vec<Option<String>>,
    para: Option<String>,
    head: Option<String>,
    title: Option<String>,
    author: Option<String>,
    in_body: usize,
    excluded: usize,
}

impl TeiState {
    fn inside(&self, name: &[u8]) -> bool {
        self.stack.iter().any(|n| n == name)
    }

    fn section(&self) -> Option<String> {
        let parts: Vec<&str> = self.heads.iter().flatten().map(String::as_str).collect();
        (!parts.is_empty()).then(|| parts.join(" > "))
    }

    fn open(&mut self, e: &BytesStart<'_>) {
        let name = e.local_name().as_ref().as_bytes().to_vec();
        if name == b"body" {
            self.in_body += 1;
        }
        if EXCLUDED.contains(&name.as_slice()) {
            self.excluded += 1;
        }
        let in_text = self.in_body > 0 && self.excluded == 0;
        match name.as_slice() {
            b"div" if in_text => self.heads.push(None),
            b"p" if in_text && self.para.is_none() => self.para = Some(String::new()),
            b"head" if in_text && self.para.is_none() && self.inside(b"div") => self.head = Some(String::new()),
            b"title" if self.inside(b"titleStmt") && self.metadata.title.is_empty() && self.title.is_none() => {
                self.title = Some(String::new());
            }
            b"persName" if self.inside(b"author") && self.inside(b"teiHeader") && self.author.is_none() => {
                self.author = Some(String::new());
            }
            b"date" if self.inside(b"teiHeader") && self.metadata.year.is_none() => {
                if let Some(when) = e.try_get_attribute("when").ok().flatten() {
                    if let Ok(v) = when.normalized_value(quick_xml::XmlVersion::Implicit1_0) {
                        self.metadata.year = parse_year(&v);
                    }
                }
            }
            _ => {}
        }
        self.stack.push(name);
    }

    fn close(&mut self) {
        let Some(name) = self.stack.pop() else { return };
        match name.as_slice() {
            b"p" if self.para.is_some() && !self.inside(b"p") => {
                let text = collapse_whitespace(&self.para.take().unwrap_or_default());
                if !text.is_empty() {
                    self.paragraphs.push(RawParagraph {
                        text,
                        source_section: self.section(),
                    });
                }
            }
            b"head" if self.head.is_some() => {
                let text = collapse_whitespace(&self.head.take().unwrap_or_default());
                if let Some(slot) = self.heads.last_mut() {
                    *slot = (!text.is_empty()).then_some(text);
                }
            }
            b"div" if self.in_body > 0 && self.excluded == 0 => {
                self.heads.pop();
            }
            b"title" if self.title.is_some() => {
                self.metadata.title = collapse_whitespace(&self.title.take().unwrap_or_default());
            }
            b"persName" if self.author.is_some() => {
                let name = collapse_whitespace(&self.author.take().unwrap_or_default());
                if !name.is_empty() {
                    self.metadata.authors.push(name);
                }
            }
            _ => {}
        }
        if EXCLUDED.contains(&name.as_slice()) {
            self.excluded -= 1;
        }
        if name == b"body" {
            self.in_body -= 1;
        }
    }

    fn text(&mut self, s: &str) {
        if self.excluded > 0 && self.in_body > 0 {
            return;
        }
        for buf in [&mut self.para, &mut self.head, &mut self.title, &mut self.author].into_iter().flatten() {
            buf.push_str(s);
        }
        // forename and surname are sibling elements without whitespace
        if let Some(a) = self.author.as_mut() {
            a.push(' ');
        }
    }
}

fn parse_year(s: &str) -> Option<i32> {
    let digits: String = s.chars().take(4).collect();
    (digits.len() == 4 && digits.chars().all(|c| c.is_ascii_digit()))
        .then(|| digits.parse().ok())
        .flatten()
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn malformed(position: u64, message: impl ToString) -> IngestError {
    IngestError::MalformedXml {
        position,
        message: message.to_string(),
    }
}

/// Extracts `<p>` elements under `<body>` in document order, skipping
/// figures, tables, notes, formulas and bibliography. Each paragraph's
/// section is the path of enclosing `div/head` titles.
pub fn ingest_tei(payload: &[u8], tagger: &dyn PosTagger) -> Result<Document, IngestError> {
    let text = std::str::from_utf8(payload).map_err(|e| IngestError::InvalidUtf8 {
        position: e.valid_up_to(),
    })?;
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut st = TeiState::default();
    loop {
        let event = reader.read_event().map_err(|e| malformed(reader.error_position(), e))?;
        match event {
            Event::Start(e) => st.open(&e),
            Event::Empty(e) => {
                st.open(&e);
                st.close();
            }
            Event::End(_) => st.close(),
            Event::Text(t) => st.text(&t.xml10_content()),
            Event::CData(t) => {
                st.text(&t.into_inner());
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => c.to_string(),
                    Ok(None) => {
                        let name = String::from(&*r);
                        quick_xml::escape::resolve_predefined_entity(&name)
                            .map(str::to_string)
                            .ok_or_else(|| malformed(reader.buffer_position(), format!("unknown entity &{name};")))?
                    }
                    Err(e) => return Err(malformed(reader.buffer_position(), e)),
                };
                st.text(&resolved);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = st.stack.last() {
        return Err(malformed(
            reader.buffer_position(),
            format!("unclosed element <{}>", String::from_utf8_lossy(open)),
        ));
    }
    Document::build(doc_id_for_payload(payload), st.metadata, st.paragraphs, tagger)
}
