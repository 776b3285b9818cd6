//! Python literal values and their canonical text.
//!
//! The guest language is Python. Inputs, gold outputs and student answers
//! are all literal text, and equality is decided on a canonical rendering:
//! mapping keys and set members sorted by their own canonical text, floats
//! in shortest round-trip form, strings with normalized quoting. The real
//! harness does this guest-side; this module mirrors the same rules for the
//! in-memory executor and for host-side truthiness checks.
//!
//! Only literal syntax is accepted: numbers, strings, bytes, `True`,
//! `False`, `None`, tuples, lists, dicts, sets, `set()` and unary signs.
//! Any other name or any call is rejected as non-literal.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Num, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    Dict(Vec<(Value, Value)>),
    Set(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LiteralError {
    /// A name other than True/False/None, or a call.
    #[error("non-literal: {0}")]
    NonLiteral(String),
    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unhashable type: '{0}'")]
    Unhashable(&'static str),
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => i.to_i64(),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => i.to_f64(),
            Value::Bool(b) => Some(*b as i64 as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::Bytes(_) => "bytes",
            Value::Tuple(_) => "tuple",
            Value::List(_) => "list",
            Value::Dict(_) => "dict",
            Value::Set(_) => "set",
        }
    }

    /// Python truthiness.
    pub fn is_truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => !i.is_zero(),
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::Bytes(b) => !b.is_empty(),
            Value::Tuple(v) | Value::List(v) | Value::Set(v) => !v.is_empty(),
            Value::Dict(d) => !d.is_empty(),
        }
    }

    fn check_hashable(&self) -> Result<(), LiteralError> {
        match self {
            Value::List(_) => Err(LiteralError::Unhashable("list")),
            Value::Dict(_) => Err(LiteralError::Unhashable("dict")),
            Value::Set(_) => Err(LiteralError::Unhashable("set")),
            Value::Tuple(items) => items.iter().try_for_each(Value::check_hashable),
            _ => Ok(()),
        }
    }

    /// Canonical rendering; structurally equal values render identically.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Value::Float(f) => out.push_str(&float_repr(*f)),
            Value::Str(s) => out.push_str(&str_repr(s)),
            Value::Bytes(b) => out.push_str(&bytes_repr(b)),
            Value::Tuple(items) => {
                out.push('(');
                join_into(out, items.iter().map(Value::canonical));
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::List(items) => {
                out.push('[');
                join_into(out, items.iter().map(Value::canonical));
                out.push(']');
            }
            Value::Dict(entries) => {
                let mut rendered: Vec<(String, String)> =
                    entries.iter().map(|(k, v)| (k.canonical(), v.canonical())).collect();
                // later duplicates win, as in a dict display
                let mut dedup: Vec<(String, String)> = Vec::with_capacity(rendered.len());
                for (k, v) in rendered.drain(..) {
                    match dedup.iter_mut().find(|(existing, _)| *existing == k) {
                        Some(slot) => slot.1 = v,
                        None => dedup.push((k, v)),
                    }
                }
                dedup.sort();
                out.push('{');
                join_into(out, dedup.into_iter().map(|(k, v)| format!("{k}: {v}")));
                out.push('}');
            }
            Value::Set(items) => {
                if items.is_empty() {
                    out.push_str("set()");
                    return;
                }
                let mut rendered: Vec<String> = items.iter().map(Value::canonical).collect();
                rendered.sort();
                rendered.dedup();
                out.push('{');
                join_into(out, rendered.into_iter());
                out.push('}');
            }
        }
    }
}

fn join_into(out: &mut String, parts: impl Iterator<Item = String>) {
    for (i, p) in parts.enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&p);
    }
}

/// Python `repr` of a float: shortest round-trip digits, positional when the
/// decimal exponent is in `-4 < e <= 16`, scientific (`1e-05`) otherwise.
pub fn float_repr(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    let x = x.abs();
    if x == 0.0 {
        return format!("{sign}0.0");
    }
    // `{:e}` yields the shortest round-trip digits, e.g. "1.2345e-5".
    let sci = format!("{x:e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let decpt = exp + 1;
    let n = digits.len() as i32;
    let body = if -4 < decpt && decpt <= 16 {
        if decpt <= 0 {
            format!("0.{}{}", "0".repeat((-decpt) as usize), digits)
        } else if decpt >= n {
            format!("{}{}.0", digits, "0".repeat((decpt - n) as usize))
        } else {
            format!("{}.{}", &digits[..decpt as usize], &digits[decpt as usize..])
        }
    } else {
        let mut m = digits[..1].to_string();
        if n > 1 {
            m.push('.');
            m.push_str(&digits[1..]);
        }
        let e = decpt - 1;
        format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    };
    format!("{sign}{body}")
}

/// Python `repr` of a str.
pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c if is_unprintable(c) => {
                let cp = c as u32;
                if cp <= 0xff {
                    let _ = write!(out, "\\x{cp:02x}");
                } else if cp <= 0xffff {
                    let _ = write!(out, "\\u{cp:04x}");
                } else {
                    let _ = write!(out, "\\U{cp:08x}");
                }
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

// Approximation of Python's str.isprintable for the ranges that show up in
// practice: C1 controls, separators other than space, and surrogates/BOM.
fn is_unprintable(c: char) -> bool {
    matches!(c as u32, 0x80..=0xa0 | 0xad | 0x2028 | 0x2029 | 0xfeff | 0xe000..=0xf8ff)
}

fn bytes_repr(b: &[u8]) -> String {
    let quote = if b.contains(&b'\'') && !b.contains(&b'"') { b'"' } else { b'\'' };
    let mut out = String::from("b");
    out.push(quote as char);
    for &byte in b {
        match byte {
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            b'\t' => out.push_str("\\t"),
            q if q == quote => {
                out.push('\\');
                out.push(q as char);
            }
            0x20..=0x7e => out.push(byte as char),
            _ => {
                let _ = write!(out, "\\x{byte:02x}");
            }
        }
    }
    out.push(quote as char);
    out
}

/// Parses one literal expression, or a bare comma-separated sequence which
/// becomes a tuple (`"1, 2"` is `(1, 2)`; `"5"` is `5`; `"5,"` is `(5,)`).
pub fn parse_literal(text: &str) -> Result<Value, LiteralError> {
    let mut p = Parser::new(text);
    p.skip_ws();
    if p.at_end() {
        return Err(p.syntax("empty literal"));
    }
    let (items, trailing_comma) = p.sequence(None)?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.unexpected());
    }
    if items.len() == 1 && !trailing_comma {
        Ok(items.into_iter().next().expect("one item"))
    } else {
        Ok(Value::Tuple(items))
    }
}

/// Parses an argument list such as `"2, 3"`; the empty string is no arguments.
pub fn parse_args(text: &str) -> Result<Vec<Value>, LiteralError> {
    let mut p = Parser::new(text);
    p.skip_ws();
    if p.at_end() {
        return Ok(Vec::new());
    }
    let (items, _) = p.sequence(None)?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.unexpected());
    }
    Ok(items)
}

/// Canonical text of a literal: `canonical(parse_literal(text))`.
pub fn canonicalize(text: &str) -> Result<String, LiteralError> {
    parse_literal(text).map(|v| v.canonical())
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 200;

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            depth: 0,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map(|&(o, _)| o).unwrap_or(self.src.len())
    }

    fn syntax(&self, msg: impl Into<String>) -> LiteralError {
        LiteralError::Syntax {
            offset: self.offset(),
            msg: msg.into(),
        }
    }

    fn unexpected(&self) -> LiteralError {
        match self.peek() {
            Some(c) => self.syntax(format!("unexpected {c:?}")),
            None => self.syntax("unexpected end of input"),
        }
    }

    // Literal text may span lines freely; backslash-newline is a continuation.
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == '\\' && matches!(self.peek_at(1), Some('\n')) {
                self.pos += 2;
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Comma-separated values up to `close` (or end of input when `None`).
    fn sequence(&mut self, close: Option<char>) -> Result<(Vec<Value>, bool), LiteralError> {
        let mut items = Vec::new();
        let mut trailing = false;
        loop {
            self.skip_ws();
            if self.peek() == close || (close.is_none() && self.at_end()) {
                break;
            }
            items.push(self.value()?);
            self.skip_ws();
            if self.eat(',') {
                trailing = true;
                continue;
            }
            trailing = false;
            break;
        }
        Ok((items, trailing))
    }

    fn value(&mut self) -> Result<Value, LiteralError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("nesting too deep"));
        }
        let v = self.value_inner();
        self.depth -= 1;
        v
    }

    fn value_inner(&mut self) -> Result<Value, LiteralError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(self.syntax("expected a value"));
        };
        match c {
            '-' | '+' => {
                self.pos += 1;
                let inner = self.value()?;
                let negate = c == '-';
                match inner {
                    Value::Int(i) => Ok(Value::Int(if negate { -i } else { i })),
                    Value::Float(f) => Ok(Value::Float(if negate { -f } else { f })),
                    Value::Bool(b) => Ok(Value::Int(BigInt::from(if negate { -(b as i64) } else { b as i64 }))),
                    other => Err(LiteralError::NonLiteral(format!(
                        "unary {c} applied to {}",
                        other.type_name()
                    ))),
                }
            }
            '(' => {
                self.pos += 1;
                let (items, trailing) = self.sequence(Some(')'))?;
                self.skip_ws();
                if !self.eat(')') {
                    return Err(self.unexpected());
                }
                if items.len() == 1 && !trailing {
                    Ok(items.into_iter().next().expect("one item"))
                } else {
                    Ok(Value::Tuple(items))
                }
            }
            '[' => {
                self.pos += 1;
                let (items, _) = self.sequence(Some(']'))?;
                self.skip_ws();
                if !self.eat(']') {
                    return Err(self.unexpected());
                }
                Ok(Value::List(items))
            }
            '{' => self.brace(),
            '0'..='9' | '.' => self.number(),
            '\'' | '"' => self.strings(String::new()),
            c if c.is_alphabetic() || c == '_' => self.name(),
            _ => Err(self.unexpected()),
        }
    }

    fn brace(&mut self) -> Result<Value, LiteralError> {
        self.pos += 1;
        self.skip_ws();
        if self.eat('}') {
            return Ok(Value::Dict(Vec::new()));
        }
        let first = self.value()?;
        self.skip_ws();
        if self.eat(':') {
            first.check_hashable()?;
            let v = self.value()?;
            let mut entries = vec![(first, v)];
            loop {
                self.skip_ws();
                if !self.eat(',') {
                    break;
                }
                self.skip_ws();
                if self.peek() == Some('}') {
                    break;
                }
                let k = self.value()?;
                k.check_hashable()?;
                self.skip_ws();
                if !self.eat(':') {
                    return Err(self.unexpected());
                }
                let v = self.value()?;
                entries.push((k, v));
            }
            self.skip_ws();
            if !self.eat('}') {
                return Err(self.unexpected());
            }
            Ok(Value::Dict(entries))
        } else {
            first.check_hashable()?;
            let mut items = vec![first];
            loop {
                self.skip_ws();
                if !self.eat(',') {
                    break;
                }
                self.skip_ws();
                if self.peek() == Some('}') {
                    break;
                }
                let v = self.value()?;
                v.check_hashable()?;
                items.push(v);
            }
            self.skip_ws();
            if !self.eat('}') {
                return Err(self.unexpected());
            }
            Ok(Value::Set(items))
        }
    }

    fn name(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        // string prefixes: r, b, u, rb, br (any case); f-strings are code
        let lower = word.to_ascii_lowercase();
        if matches!(self.peek(), Some('\'' | '"')) {
            return match lower.as_str() {
                "r" | "u" | "b" | "rb" | "br" => self.prefixed_string(&lower),
                _ => Err(LiteralError::NonLiteral(format!("string prefix {word:?}"))),
            };
        }
        match word.as_str() {
            "True" => Ok(Value::Bool(true)),
            "False" => Ok(Value::Bool(false)),
            "None" => Ok(Value::None),
            "set" => {
                self.skip_ws();
                if self.eat('(') {
                    self.skip_ws();
                    if self.eat(')') {
                        return Ok(Value::Set(Vec::new()));
                    }
                }
                Err(LiteralError::NonLiteral("set".into()))
            }
            _ => Err(LiteralError::NonLiteral(word)),
        }
    }

    fn number(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        let first = self.peek().expect("digit");
        if first == '0' && matches!(self.peek_at(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            let radix = match self.peek_at(1).expect("radix char").to_ascii_lowercase() {
                'x' => 16,
                'o' => 8,
                _ => 2,
            };
            self.pos += 2;
            let ds = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.chars[ds..self.pos].iter().map(|&(_, c)| c).filter(|c| *c != '_').collect();
            return BigInt::from_str_radix(&digits, radix)
                .map(Value::Int)
                .map_err(|_| self.syntax("invalid integer literal"));
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => self.pos += 1,
                '.' => {
                    is_float = true;
                    self.pos += 1;
                }
                'e' | 'E' => {
                    is_float = true;
                    self.pos += 1;
                    if matches!(self.peek(), Some('+' | '-')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        if matches!(self.peek(), Some('j' | 'J')) {
            return Err(LiteralError::NonLiteral("complex numbers are not supported".into()));
        }
        if matches!(self.peek(), Some(c) if c.is_alphanumeric()) {
            return Err(self.unexpected());
        }
        let raw: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        if raw.contains("__") || raw.ends_with('_') || raw.contains("_.") || raw.contains("._") {
            return Err(self.syntax("misplaced underscore in number"));
        }
        let text: String = raw.chars().filter(|c| *c != '_').collect();
        if text == "." {
            return Err(self.syntax("lone '.'"));
        }
        if is_float {
            text.parse::<f64>()
                .map(Value::Float)
                .map_err(|_| self.syntax(format!("invalid float literal {raw:?}")))
        } else {
            if text.len() > 1 && text.starts_with('0') && text.bytes().any(|b| b != b'0') {
                return Err(self.syntax("leading zeros in decimal integer"));
            }
            text.parse::<BigInt>()
                .map(Value::Int)
                .map_err(|_| self.syntax(format!("invalid integer literal {raw:?}")))
        }
    }

    fn prefixed_string(&mut self, prefix: &str) -> Result<Value, LiteralError> {
        let raw = prefix.contains('r');
        let bytes = prefix.contains('b');
        let body = self.string_body(raw, bytes)?;
        if bytes {
            let mut acc = body;
            // adjacent bytes literals concatenate
            loop {
                self.skip_ws();
                let save = self.pos;
                let mut pre = String::new();
                while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) && pre.len() < 2 {
                    pre.push(self.peek().expect("char").to_ascii_lowercase());
                    self.pos += 1;
                }
                if matches!(self.peek(), Some('\'' | '"')) && pre.contains('b') {
                    acc.extend(self.string_body(pre.contains('r'), true)?);
                } else {
                    self.pos = save;
                    break;
                }
            }
            let bytes: Result<Vec<u8>, _> = acc
                .into_iter()
                .map(|c| u8::try_from(c as u32).map_err(|_| self.syntax("non-ASCII character in bytes literal")))
                .collect();
            return Ok(Value::Bytes(bytes?));
        }
        let s: String = body.into_iter().collect();
        self.strings(s)
    }

    /// Parses a string starting at a quote, then any adjacent str literals.
    fn strings(&mut self, mut acc: String) -> Result<Value, LiteralError> {
        if matches!(self.peek(), Some('\'' | '"')) {
            acc.extend(self.string_body(false, false)?);
        }
        loop {
            self.skip_ws();
            match self.peek() {
                Some('\'' | '"') => acc.extend(self.string_body(false, false)?),
                Some(c) if matches!(c, 'r' | 'R' | 'u' | 'U') && matches!(self.peek_at(1), Some('\'' | '"')) => {
                    self.pos += 1;
                    acc.extend(self.string_body(c == 'r' || c == 'R', false)?);
                }
                _ => break,
            }
        }
        Ok(Value::Str(acc))
    }

    fn string_body(&mut self, raw: bool, bytes: bool) -> Result<Vec<char>, LiteralError> {
        let quote = self.peek().expect("quote");
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        let mut out = Vec::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.syntax("unterminated string literal"));
            };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    return Ok(out);
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.pos += 3;
                    return Ok(out);
                }
            }
            if c == '\n' && !triple {
                return Err(self.syntax("unterminated string literal"));
            }
            if c == '\\' {
                let Some(next) = self.peek_at(1) else {
                    return Err(self.syntax("unterminated string literal"));
                };
                if raw {
                    out.push('\\');
                    out.push(next);
                    self.pos += 2;
                    continue;
                }
                self.pos += 2;
                match next {
                    '\n' => {}
                    '\\' => out.push('\\'),
                    '\'' => out.push('\''),
                    '"' => out.push('"'),
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    'a' => out.push('\u{7}'),
                    'b' => out.push('\u{8}'),
                    'f' => out.push('\u{c}'),
                    'v' => out.push('\u{b}'),
                    '0'..='7' => {
                        let mut v = next.to_digit(8).expect("octal");
                        for _ in 0..2 {
                            match self.peek().and_then(|c| c.to_digit(8)) {
                                Some(d) => {
                                    v = v * 8 + d;
                                    self.pos += 1;
                                }
                                None => break,
                            }
                        }
                        out.push(char::from_u32(v).ok_or_else(|| self.syntax("bad octal escape"))?);
                    }
                    'x' => out.push(self.hex_escape(2)?),
                    'u' if !bytes => out.push(self.hex_escape(4)?),
                    'U' if !bytes => out.push(self.hex_escape(8)?),
                    'N' if !bytes => return Err(LiteralError::NonLiteral("named unicode escapes".into())),
                    other => {
                        out.push('\\');
                        out.push(other);
                    }
                }
                continue;
            }
            out.push(c);
            self.pos += 1;
        }
    }

    fn hex_escape(&mut self, n: usize) -> Result<char, LiteralError> {
        let mut v = 0u32;
        for _ in 0..n {
            let d = self
                .peek()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.syntax("truncated hex escape"))?;
            v = v * 16 + d;
            self.pos += 1;
        }
        char::from_u32(v).ok_or_else(|| self.syntax("escape is not a valid code point"))
    }
}
