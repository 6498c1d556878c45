use crate::timestamp::Timestamp;

use super::{Span, SyntaxError};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Word(String),
    Int(i64),
    Date(Timestamp),
    Str(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
    Dot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'.' => {
                i += 1;
                Tok::Dot
            }
            b'=' => {
                i += 1;
                Tok::Op("=")
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::Op("!=")
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                i += if eq { 2 } else { 1 };
                match (c, eq) {
                    (b'<', false) => Tok::Op("<"),
                    (b'<', true) => Tok::Op("<="),
                    (_, false) => Tok::Op(">"),
                    (_, true) => Tok::Op(">="),
                }
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match src[i..].chars().next() {
                        None => {
                            return Err(SyntaxError::new(
                                "unterminated string literal",
                                Span::new(start, src.len()),
                            ))
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let next = src[i + 1..].chars().next().ok_or_else(|| {
                                SyntaxError::new("unterminated string literal", Span::new(start, src.len()))
                            })?;
                            s.push(next);
                            i += 1 + next.len_utf8();
                        }
                        Some(ch) => {
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                Tok::Str(s)
            }
            b'-' | b'0'..=b'9' => {
                let neg = c == b'-';
                let digits_start = if neg { i + 1 } else { i };
                let mut j = digits_start;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j == digits_start {
                    return Err(SyntaxError::new("expected a number after `-`", Span::new(start, j)));
                }
                if !neg && bytes.get(j) == Some(&b'/') {
                    // DD/MM/YYYY
                    let mut k = j;
                    while k < bytes.len() && (bytes[k].is_ascii_digit() || bytes[k] == b'/') {
                        k += 1;
                    }
                    let text = &src[start..k];
                    let t = text
                        .parse::<Timestamp>()
                        .map_err(|_| SyntaxError::new(format!("invalid date `{text}`"), Span::new(start, k)))?;
                    i = k;
                    Tok::Date(t)
                } else {
                    let text = &src[start..j];
                    let n = text
                        .parse::<i64>()
                        .map_err(|_| SyntaxError::new(format!("integer `{text}` out of range"), Span::new(start, j)))?;
                    i = j;
                    Tok::Int(n)
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                i = j;
                Tok::Word(src[start..j].to_string())
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(SyntaxError::new(
                    format!("unexpected character `{ch}`"),
                    Span::new(start, start + ch.len_utf8()),
                ));
            }
        };
        out.push(Token {
            tok,
            span: Span::new(start, i),
        });
    }
    Ok(out)
}
