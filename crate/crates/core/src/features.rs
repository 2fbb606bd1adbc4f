//! Hashed sparse feature templates for spans and entity pairs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::TokenSpan;
use crate::corpus::Pos;
use crate::hash::fnv1a64;

/// log2 of the hashed feature space.
pub const FEATURE_BITS: u32 = 18;
pub const FEATURE_DIM: usize = 1 << FEATURE_BITS;

/// Identifies the feature templates and hashing scheme. Models trained
/// under one id cannot be applied under another.
pub const FEATURE_SPEC_ID: &str = "kdisc-span-pair-fnv18-v1";

/// Sorted, duplicate-free sparse vector with unit L2 norm (or empty).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Hashes feature strings, sums collisions and L2-normalises.
    pub fn from_features<I, S>(features: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut idx: Vec<u32> = features
            .into_iter()
            .map(|f| (fnv1a64(f.as_ref().as_bytes()) & (FEATURE_DIM as u64 - 1)) as u32)
            .collect();
        idx.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(idx.len());
        for i in idx {
            match entries.last_mut() {
                Some((last, v)) if *last == i => *v += 1.0,
                _ => entries.push((i, 1.0)),
            }
        }
        let norm = libm::sqrt(entries.iter().map(|(_, v)| v * v).sum::<f64>());
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i as usize] * v).sum()
    }
}

/// Coarse word shape: `X` upper, `x` lower, `d` digit, other chars kept,
/// truncated to 12 characters.
pub fn word_shape(token: &str) -> String {
    token
        .chars()
        .take(12)
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

/// Shape class: `Xx`, `x`, `X`, `dddd`-style digits collapse to `d`,
/// letters mixed with digits are `mixed`, everything else `other`.
pub fn shape_class(token: &str) -> &'static str {
    let letters = token.chars().any(char::is_alphabetic);
    let digits = token.chars().any(char::is_numeric);
    if letters && digits {
        return "mixed";
    }
    if digits {
        return if token.chars().all(char::is_numeric) { "d" } else { "d+p" };
    }
    if letters {
        let first_upper = token.chars().next().is_some_and(char::is_uppercase);
        let rest_lower = token.chars().skip(1).all(|c| !c.is_uppercase());
        let all_upper = token.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
        return match (first_upper, rest_lower, all_upper) {
            (_, _, true) => "X",
            (true, true, _) => "Xx",
            (false, _, _) if token.chars().filter(|c| c.is_alphabetic()).all(char::is_lowercase) => "x",
            _ => "mixedcase",
        };
    }
    "other"
}

fn length_bucket(len: usize) -> &'static str {
    match len {
        0 => "0",
        1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5..=7 => "5-7",
        _ => "8+",
    }
}

fn lower(token: &str) -> String {
    token.to_lowercase()
}

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// Feature strings for the token range `span` of a sentence.
pub fn span_feature_strings(tokens: &[String], pos: &[Pos], span: TokenSpan) -> Vec<String> {
    let inside = &tokens[span.start..span.end];
    let mut f = Vec::with_capacity(12 + 3 * inside.len());
    f.push(format!("len={}", length_bucket(span.len())));
    for t in inside {
        f.push(format!("in={}", lower(t)));
        f.push(format!("in_shape={}", word_shape(t)));
    }
    let first = &inside[0];
    let last = &inside[inside.len() - 1];
    f.push(format!("first={}", lower(first)));
    f.push(format!("last={}", lower(last)));
    f.push(format!("first_shape={}", word_shape(first)));
    f.push(format!("last_shape={}", word_shape(last)));
    let classes: Vec<&str> = inside.iter().map(|t| shape_class(t)).collect();
    f.push(format!("class_seq={}", classes.join("_")));
    let (left, left_shape) = match span.start.checked_sub(1) {
        Some(i) => (lower(&tokens[i]), shape_class(&tokens[i])),
        None => (String::from(BOS), BOS),
    };
    let (right, right_shape) = match tokens.get(span.end) {
        Some(t) => (lower(t), shape_class(t)),
        None => (String::from(EOS), EOS),
    };
    f.push(format!("left={left}"));
    f.push(format!("right={right}"));
    f.push(format!("left_class={left_shape}"));
    f.push(format!("right_class={right_shape}"));
    if pos.len() == tokens.len() {
        let seq: Vec<&str> = pos[span.start..span.end].iter().map(|p| p.as_str()).collect();
        f.push(format!("pos_seq={}", seq.join("_")));
    }
    f
}

pub fn featurize_span(tokens: &[String], pos: &[Pos], span: TokenSpan) -> SparseVector {
    SparseVector::from_features(span_feature_strings(tokens, pos, span))
}

fn distance_bucket(d: usize) -> &'static str {
    match d {
        0 => "0",
        1 => "1",
        2 => "2",
        3..=4 => "3-4",
        5..=8 => "5-8",
        _ => "9+",
    }
}

/// A typed span as seen by the relation classifier.
#[derive(Debug, Clone, Copy)]
pub struct TypedSpan<'a> {
    pub span: TokenSpan,
    pub label: &'a str,
}

/// Feature strings for the ordered pair (head, tail).
pub fn pair_feature_strings(tokens: &[String], head: TypedSpan<'_>, tail: TypedSpan<'_>) -> Vec<String> {
    let dir = if head.span.end <= tail.span.start {
        "fwd"
    } else if tail.span.end <= head.span.start {
        "bwd"
    } else {
        "overlap"
    };
    let (gap_start, gap_end) = if dir == "fwd" {
        (head.span.end, tail.span.start)
    } else if dir == "bwd" {
        (tail.span.end, head.span.start)
    } else {
        (0, 0)
    };
    let surface = |s: TokenSpan| -> String {
        let parts: Vec<String> = tokens[s.start..s.end].iter().map(|t| lower(t)).collect();
        parts.join(" ")
    };
    let mut f = Vec::new();
    f.push(format!("htype={}", head.label));
    f.push(format!("ttype={}", tail.label));
    f.push(format!("types={}>{}", head.label, tail.label));
    f.push(format!("hsurf={}", surface(head.span)));
    f.push(format!("tsurf={}", surface(tail.span)));
    f.push(format!("dir={dir}"));
    f.push(format!("dist={}", distance_bucket(gap_end - gap_start)));
    f.push(format!("dir_dist={dir}|{}", distance_bucket(gap_end - gap_start)));
    f.push(format!("dir_types={dir}|{}>{}", head.label, tail.label));
    for t in &tokens[gap_start..gap_end] {
        let w = lower(t);
        f.push(format!("between={w}"));
        f.push(format!("between_dir={w}|{dir}"));
    }
    f
}

pub fn featurize_pair(tokens: &[String], head: TypedSpan<'_>, tail: TypedSpan<'_>) -> SparseVector {
    SparseVector::from_features(pair_feature_strings(tokens, head, tail))
}
