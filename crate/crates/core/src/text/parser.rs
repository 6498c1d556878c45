use std::collections::BTreeSet;

use crate::condition::{Condition, Predicate, Term, Value};
use crate::error::Result;
use crate::hierarchy::Hierarchies;
use crate::policy::{DataCommunicationRule, DataUsageRule, PilotPolicy};
use crate::timestamp::Timestamp;

use super::lexer::{lex, Tok, Token};
use super::{is_keyword, Part, PolicyDocument, RuleRef, Span, SpanEntry, SyntaxError};

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    src: &'a str,
    spans: Vec<SpanEntry>,
}

type PResult<T> = std::result::Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            src,
            spans: Vec::new(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.toks.get(self.pos + k)
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => Span::new(self.src.len(), self.src.len()),
        }
    }

    fn last_end(&self) -> usize {
        self.pos
            .checked_sub(1)
            .and_then(|p| self.toks.get(p))
            .map_or(0, |t| t.span.end)
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(t) => format!("`{}`", &self.src[t.span.start..t.span.end]),
        }
    }

    fn err<T>(&self, expected: &str) -> PResult<T> {
        Err(SyntaxError::new(
            format!("expected {expected}, found {}", self.describe()),
            self.here(),
        ))
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Some(Token { tok: Tok::Word(w), .. }) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw_at(0, kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn expect_kws(&mut self, kws: &[&str]) -> PResult<()> {
        kws.iter().try_for_each(|k| self.expect_kw(k))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                let span = t.span;
                self.pos += 1;
                Ok(span)
            }
            _ => self.err(what),
        }
    }

    fn label(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) if !is_keyword(w) => {
                let out = (w.clone(), *span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err(what),
        }
    }

    fn date(&mut self) -> PResult<(Timestamp, Span)> {
        match self.peek() {
            Some(Token {
                tok: Tok::Date(t),
                span,
            }) => {
                let out = (*t, *span);
                self.pos += 1;
                Ok(out)
            }
            _ => self.err("a date (DD/MM/YYYY)"),
        }
    }

    fn mark(&mut self, rule: RuleRef, part: Part, span: Span) {
        self.spans.push(SpanEntry { rule, part, span });
    }

    fn purposes(&mut self) -> PResult<(BTreeSet<String>, Span)> {
        let start = self.here().start;
        let mut out = BTreeSet::new();
        if self.eat_kw("no") {
            return Ok((out, Span::new(start, self.last_end())));
        }
        loop {
            let (p, _) = self.label("a purpose")?;
            out.insert(p);
            let sep = matches!(self.peek(), Some(Token { tok: Tok::Comma, .. })) || self.is_kw_at(0, "and");
            if !sep {
                break;
            }
            self.pos += 1;
        }
        Ok((out, Span::new(start, self.last_end())))
    }

    fn usage(&mut self, rule: RuleRef) -> PResult<DataUsageRule> {
        self.expect_kws(&["use", "it", "for"])?;
        let (purposes, pspan) = self.purposes()?;
        self.mark(rule, Part::Purposes, pspan);
        self.expect_kws(&["purposes", "until"])?;
        let (retention, dspan) = self.date()?;
        self.mark(rule, Part::Retention, dspan);
        Ok(DataUsageRule { purposes, retention })
    }

    fn condition(&mut self, rule: RuleRef) -> PResult<Condition> {
        let start = self.here().start;
        let c = self.conjunction()?;
        self.mark(rule, Part::Condition, Span::new(start, self.last_end()));
        Ok(c)
    }

    fn conjunction(&mut self) -> PResult<Condition> {
        let mut c = self.unary()?;
        // `and use` ends the collection condition
        while self.is_kw_at(0, "and") && !self.is_kw_at(1, "use") {
            self.pos += 1;
            let rhs = self.unary()?;
            c = c.and(rhs);
        }
        Ok(c)
    }

    fn unary(&mut self) -> PResult<Condition> {
        if self.eat_kw("not") {
            return Ok(self.unary()?.not());
        }
        if self.eat_kw("true") {
            return Ok(Condition::True);
        }
        if self.eat_kw("false") {
            return Ok(Condition::False);
        }
        if matches!(self.peek(), Some(Token { tok: Tok::LParen, .. })) {
            self.pos += 1;
            let c = self.conjunction()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(c);
        }
        let lhs = self.term()?;
        let op = match self.peek() {
            Some(Token { tok: Tok::Op(op), .. }) => Some(*op),
            _ => None,
        };
        let pred = match op {
            Some(op) => {
                self.pos += 1;
                Predicate::ALL
                    .into_iter()
                    .find(|p| p.symbol() == op)
                    .expect("lexer only produces known operators")
            }
            None if self.eat_kw("is") => Predicate::Eq,
            None => return self.err("a comparison operator or `is`"),
        };
        let rhs = self.term()?;
        Ok(Condition::atom(pred, lhs, rhs))
    }

    fn term(&mut self) -> PResult<Term> {
        let Some(t) = self.peek().cloned() else {
            return self.err("a term");
        };
        match t.tok {
            Tok::Int(i) => {
                self.pos += 1;
                Ok(Term::Const(Value::Int(i)))
            }
            Tok::Date(d) => {
                self.pos += 1;
                Ok(Term::Const(Value::Date(d)))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Term::Const(Value::Str(s)))
            }
            Tok::Word(w) if !is_keyword(&w) => {
                self.pos += 1;
                if matches!(self.peek(), Some(Token { tok: Tok::LParen, .. })) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !matches!(self.peek(), Some(Token { tok: Tok::RParen, .. })) {
                        loop {
                            args.push(self.term()?);
                            if matches!(self.peek(), Some(Token { tok: Tok::Comma, .. })) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Term::Apply(w, args))
                } else if w.starts_with(|c: char| c.is_ascii_uppercase()) {
                    Ok(Term::Const(Value::Str(w)))
                } else {
                    Ok(Term::Item(w))
                }
            }
            _ => self.err("a term"),
        }
    }

    fn collection(&mut self) -> PResult<(String, DataCommunicationRule)> {
        let start = self.here().start;
        let (entity, espan) = self.label("an entity")?;
        self.mark(RuleRef::Collection, Part::Entity, espan);
        self.expect_kws(&["may", "collect", "data", "of", "type"])?;
        let (datatype, tspan) = self.label("a datatype")?;
        self.mark(RuleRef::Collection, Part::Datatype, tspan);
        let condition = if self.eat_kw("if") {
            self.condition(RuleRef::Collection)?
        } else {
            Condition::True
        };
        self.expect_kw("and")?;
        let dur = self.usage(RuleRef::Collection)?;
        self.expect(Tok::Dot, "`.`")?;
        self.mark(RuleRef::Collection, Part::Sentence, Span::new(start, self.last_end()));
        Ok((datatype, DataCommunicationRule { condition, entity, dur }))
    }

    fn transfer(&mut self, index: usize) -> PResult<DataCommunicationRule> {
        let rule = RuleRef::Transfer(index);
        let start = self.here().start;
        self.expect_kws(&["this", "data", "may", "be", "transferred", "to"])?;
        let (entity, espan) = self.label("an entity")?;
        self.mark(rule, Part::Entity, espan);
        self.expect_kws(&["which", "may"])?;
        let dur = self.usage(rule)?;
        let condition = if self.eat_kw("if") {
            self.condition(rule)?
        } else {
            Condition::True
        };
        self.expect(Tok::Dot, "`.`")?;
        self.mark(rule, Part::Sentence, Span::new(start, self.last_end()));
        Ok(DataCommunicationRule { condition, entity, dur })
    }

    fn document(&mut self) -> PResult<PilotPolicy> {
        let (datatype, dcr) = self.collection()?;
        let mut transfers = BTreeSet::new();
        let mut index = 0;
        while self.peek().is_some() {
            transfers.insert(self.transfer(index)?);
            index += 1;
        }
        Ok(PilotPolicy {
            datatype,
            dcr,
            transfers,
        })
    }
}

/// Parses a policy without checking its labels against any hierarchy.
pub fn parse_policy_unchecked(text: &str) -> std::result::Result<PolicyDocument, SyntaxError> {
    let mut p = Parser::new(text)?;
    let policy = p.document()?;
    Ok(PolicyDocument {
        source: text.to_string(),
        policy,
        spans: p.spans,
    })
}

/// Parses a policy and checks every label against `hs`.
pub fn parse_document(text: &str, hs: &Hierarchies) -> Result<PolicyDocument> {
    let doc = parse_policy_unchecked(text)?;
    doc.policy.validate(hs)?;
    Ok(doc)
}

pub fn parse_policy(text: &str, hs: &Hierarchies) -> Result<PilotPolicy> {
    parse_document(text, hs).map(|d| d.policy)
}

pub fn parse_condition(text: &str) -> std::result::Result<Condition, SyntaxError> {
    let mut p = Parser::new(text)?;
    let c = p.conjunction()?;
    if p.peek().is_some() {
        return p.err("end of condition");
    }
    Ok(c)
}
