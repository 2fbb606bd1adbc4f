//! Regular-expression gazetteer rules and rule-based annotation.
//!
//! Rules file: one rule per line, `<type>\t<regex>\t<cs|ci>`. Blank lines
//! and lines starting with `#` are ignored.

use kdisc_core::annotation::AnnotationSet;
use kdisc_core::autoann::{annotations_from_matches, RuleMatch};
use kdisc_core::corpus::{CharSpan, Document};
use kdisc_core::ontology::OntologySchema;
use regex_automata::meta::Regex;
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerRule {
    pub entity_type: String,
    pub pattern: String,
    pub case_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("line {line}: expected <type>\\t<regex>\\t<cs|ci>")]
    Malformed { line: usize },
    #[error("line {line}: case flag must be cs or ci, got {flag:?}")]
    BadFlag { line: usize, flag: String },
    #[error("rule {index}: pattern does not compile: {message}")]
    Pattern { index: usize, message: String },
    #[error("rule {index}: entity type {entity_type:?} is not in the schema")]
    UnknownType { index: usize, entity_type: String },
}

pub fn parse_rules(text: &str) -> Result<Vec<GazetteerRule>, RuleError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split('\t').collect();
        let [ty, pattern, flag] = fields[..] else {
            return Err(RuleError::Malformed { line });
        };
        if ty.is_empty() || pattern.is_empty() {
            return Err(RuleError::Malformed { line });
        }
        let case_sensitive = match flag {
            "cs" => true,
            "ci" => false,
            _ => {
                return Err(RuleError::BadFlag {
                    line,
                    flag: flag.to_string(),
                })
            }
        };
        rules.push(GazetteerRule {
            entity_type: ty.to_string(),
            pattern: pattern.to_string(),
            case_sensitive,
        });
    }
    Ok(rules)
}

pub fn format_rules(rules: &[GazetteerRule]) -> String {
    rules
        .iter()
        .map(|r| format!("{}\t{}\t{}\n", r.entity_type, r.pattern, if r.case_sensitive { "cs" } else { "ci" }))
        .collect()
}

/// Compiled rule: a leftmost-first regex locates the next match start and
/// an anchored all-matches regex extends it to the longest match there.
struct Compiled {
    find_start: Regex,
    longest: Regex,
}

pub struct Gazetteer {
    rules: Vec<GazetteerRule>,
    compiled: Vec<Compiled>,
}

impl Gazetteer {
    pub fn new(rules: Vec<GazetteerRule>) -> Result<Self, RuleError> {
        let compiled = rules
            .iter()
            .enumerate()
            .map(|(index, r)| {
                let syn = syntax::Config::new().case_insensitive(!r.case_sensitive);
                let err = |e: regex_automata::meta::BuildError| RuleError::Pattern {
                    index,
                    message: e.to_string(),
                };
                let find_start = Regex::builder().syntax(syn).build(&r.pattern).map_err(err)?;
                let longest = Regex::builder()
                    .syntax(syn)
                    .configure(Regex::config().match_kind(MatchKind::All))
                    .build(&r.pattern)
                    .map_err(err)?;
                Ok(Compiled { find_start, longest })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules, compiled })
    }

    pub fn rules(&self) -> &[GazetteerRule] {
        &self.rules
    }

    pub fn check_schema(&self, schema: &OntologySchema) -> Result<(), RuleError> {
        match self.rules.iter().enumerate().find(|(_, r)| !schema.has_entity_type(&r.entity_type)) {
            Some((index, r)) => Err(RuleError::UnknownType {
                index,
                entity_type: r.entity_type.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Non-overlapping leftmost-longest matches of one rule, as byte ranges.
    fn rule_matches(&self, index: usize, text: &str) -> Vec<(usize, usize)> {
        let c = &self.compiled[index];
        let mut out = Vec::new();
        let mut pos = 0;
        while pos <= text.len() {
            let Some(m) = c.find_start.find(Input::new(text).range(pos..)) else { break };
            let start = m.start();
            let end = c
                .longest
                .search(&Input::new(text).range(start..).anchored(Anchored::Yes))
                .map_or(m.end(), |l| l.end());
            if end > start {
                out.push((start, end));
                pos = end;
            } else {
                pos = start + text[start..].chars().next().map_or(1, char::len_utf8);
            }
        }
        out
    }

    /// Matches of every rule in one paragraph, before cross-rule resolution.
    pub fn matches(&self, para_id: &str, text: &str) -> Vec<RuleMatch> {
        let boundaries: Vec<usize> = text.char_indices().map(|(b, _)| b).chain([text.len()]).collect();
        let to_char = |b: usize| boundaries.binary_search(&b).unwrap_or_else(|i| i);
        let mut out = Vec::new();
        for (rule_index, rule) in self.rules.iter().enumerate() {
            for (s, e) in self.rule_matches(rule_index, text) {
                out.push(RuleMatch {
                    para_id: para_id.to_string(),
                    span: CharSpan::new(to_char(s), to_char(e)),
                    rule_index,
                    entity_type: rule.entity_type.clone(),
                });
            }
        }
        out
    }

    /// Annotates every paragraph of `doc` with `regex` provenance.
    pub fn annotate(&self, doc: &Document) -> AnnotationSet {
        let matches = doc.paragraphs.iter().flat_map(|p| self.matches(&p.para_id, &p.text)).collect();
        annotations_from_matches(doc, matches)
    }
}
