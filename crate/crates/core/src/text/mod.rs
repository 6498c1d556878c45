//! Restricted natural-language syntax for PILOT policies.
//!
//! One policy per document:
//!
//! ```text
//! <Entity> may collect data of type <datatype> [if <condition>]
//!     and use it for <purposes> purposes until <DD/MM/YYYY>.
//! This data may be transferred to <Entity> which may use it for
//!     <purposes> purposes until <DD/MM/YYYY> [if <condition>].
//! ```
//!
//! The transfer sentence may repeat. Keywords are case-insensitive; labels
//! are case-sensitive. Purpose lists are separated by `,` and `and`, and
//! `no purposes` denotes the empty set produced by some joins.

mod lexer;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::{parse_condition, parse_document, parse_policy, parse_policy_unchecked};

use crate::policy::{DataCommunicationRule, PilotPolicy};

/// Byte range into the source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("syntax error at {}..{}: {message}", span.start, span.end)]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl SyntaxError {
    pub(crate) fn new(message: impl Into<String>, span: Span) -> Self {
        SyntaxError {
            message: message.into(),
            span,
        }
    }
}

/// Which sentence of a document a span belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "index")]
pub enum RuleRef {
    Collection,
    /// Transfer sentence, numbered in source order.
    Transfer(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Sentence,
    Datatype,
    Entity,
    Condition,
    Purposes,
    Retention,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanEntry {
    pub rule: RuleRef,
    pub part: Part,
    pub span: Span,
}

/// A parsed `.pilot` text with source locations for its components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyDocument {
    pub source: String,
    pub policy: PilotPolicy,
    pub spans: Vec<SpanEntry>,
}

impl PolicyDocument {
    pub fn span_of(&self, rule: RuleRef, part: Part) -> Option<Span> {
        self.spans
            .iter()
            .find(|e| e.rule == rule && e.part == part)
            .map(|e| e.span)
    }
}

pub(crate) const KEYWORDS: &[&str] = &[
    "may",
    "collect",
    "data",
    "of",
    "type",
    "if",
    "and",
    "use",
    "it",
    "for",
    "purposes",
    "until",
    "this",
    "be",
    "transferred",
    "to",
    "which",
    "is",
    "not",
    "true",
    "false",
    "no",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Whether `s` can be written as a string constant without quotes.
pub fn is_bare_string(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(s)
}

/// Whether `s` is usable as an entity, datatype or purpose label.
pub fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(s)
}

/// Whether `s` is usable as a data item name inside conditions.
pub fn is_item_name(s: &str) -> bool {
    is_label(s) && s.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
}

struct Purposes<'a>(&'a std::collections::BTreeSet<String>);

impl fmt::Display for Purposes<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        if n == 0 {
            return f.write_str("no");
        }
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(if k + 1 == n { " and " } else { ", " })?;
            }
            f.write_str(p)?;
        }
        Ok(())
    }
}

fn render_transfer(out: &mut String, tr: &DataCommunicationRule) {
    use fmt::Write;
    let _ = write!(
        out,
        "This data may be transferred to {} which may use it for {} purposes until {}",
        tr.entity,
        Purposes(&tr.dur.purposes),
        tr.dur.retention
    );
    if tr.condition != crate::condition::Condition::True {
        let _ = write!(out, " if {}", tr.condition);
    }
    out.push('.');
}

/// Canonical sentence form of a policy, one sentence per line.
pub fn render_policy(p: &PilotPolicy) -> String {
    use fmt::Write;
    let mut out = String::new();
    let _ = write!(out, "{} may collect data of type {}", p.dcr.entity, p.datatype);
    if p.dcr.condition != crate::condition::Condition::True {
        let _ = write!(out, " if {}", p.dcr.condition);
    }
    let _ = write!(
        out,
        " and use it for {} purposes until {}.",
        Purposes(&p.dcr.dur.purposes),
        p.dcr.dur.retention
    );
    for tr in &p.transfers {
        out.push('\n');
        render_transfer(&mut out, tr);
    }
    out
}
