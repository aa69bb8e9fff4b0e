//! Typed assertions, a renderer for the Postman test-script subset, and a
//! parser for the same subset. Render and parse are exact inverses on the
//! canonical form, which is what lets generated and LLM-produced scripts be
//! validated with one code path.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One step into a JSON body: an object field or an array index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathSegment {
    Field(String),
    Index(u64),
}

/// A path into `pm.response.json()`. Empty path means the whole body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct JsonPath {
    pub segments: Vec<PathSegment>,
}

/// Guard against pathological LLM output.
pub const MAX_PATH_SEGMENTS: usize = 8;

impl JsonPath {
    pub fn root() -> Self {
        JsonPath { segments: Vec::new() }
    }

    pub fn field(mut self, name: &str) -> Self {
        self.segments.push(PathSegment::Field(name.to_string()));
        self
    }

    pub fn index(mut self, i: u64) -> Self {
        self.segments.push(PathSegment::Index(i));
        self
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            match seg {
                PathSegment::Field(name) => write!(f, ".{name}")?,
                PathSegment::Index(i) => write!(f, "[{i}]")?,
            }
        }
        Ok(())
    }
}

/// A JSON scalar literal as it appears in an equality assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JsonScalar {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for JsonScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JsonScalar::Null => write!(f, "null"),
            JsonScalar::Bool(b) => write!(f, "{b}"),
            JsonScalar::Int(i) => write!(f, "{i}"),
            JsonScalar::Float(x) => write!(f, "{x:?}"),
            JsonScalar::Str(s) => write!(f, "\"{}\"", escape(s)),
        }
    }
}

/// One checkable claim about a captured response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Assertion {
    StatusEquals(u16),
    BodyNotEmpty,
    HeaderPresent(String),
    ResponseTimeBelow(u64),
    JsonPathIsNonEmptyArray(JsonPath),
    JsonPathEquals(JsonPath, JsonScalar),
}

/// A named `pm.test` block holding one or more assertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScript {
    pub title: String,
    pub assertions: Vec<Assertion>,
}

impl TestScript {
    pub fn new(title: impl Into<String>, assertions: Vec<Assertion>) -> Self {
        TestScript { title: title.into(), assertions }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.title.is_empty() {
            return Err("test title is empty".into());
        }
        if self.assertions.is_empty() {
            return Err(format!("test \"{}\" has no assertions", self.title));
        }
        for a in &self.assertions {
            validate_assertion(a)?;
        }
        Ok(())
    }
}

fn validate_assertion(a: &Assertion) -> Result<(), String> {
    match a {
        Assertion::StatusEquals(code) => {
            if !(100..=599).contains(code) {
                return Err(format!("status code {code} out of range"));
            }
        }
        Assertion::BodyNotEmpty => {}
        Assertion::HeaderPresent(name) => {
            if name.is_empty() {
                return Err("header name is empty".into());
            }
        }
        Assertion::ResponseTimeBelow(ms) => {
            if *ms == 0 {
                return Err("response time bound must be positive".into());
            }
        }
        Assertion::JsonPathIsNonEmptyArray(path) => validate_path(path)?,
        Assertion::JsonPathEquals(path, lit) => {
            validate_path(path)?;
            if let JsonScalar::Float(x) = lit {
                if !x.is_finite() {
                    return Err("equality literal must be a finite number".into());
                }
            }
        }
    }
    Ok(())
}

fn validate_path(path: &JsonPath) -> Result<(), String> {
    if path.segments.len() > MAX_PATH_SEGMENTS {
        return Err(format!("path has more than {MAX_PATH_SEGMENTS} segments"));
    }
    for seg in &path.segments {
        if let PathSegment::Field(name) = seg {
            if !is_identifier(name) {
                return Err(format!("path field {name:?} is not an identifier"));
            }
        }
    }
    Ok(())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical single-statement form of an assertion, without indentation.
pub fn render_assertion(a: &Assertion) -> String {
    match a {
        Assertion::StatusEquals(code) => format!("pm.response.to.have.status({code});"),
        Assertion::BodyNotEmpty => "pm.expect(pm.response.text()).not.equal('');".to_string(),
        Assertion::HeaderPresent(name) => {
            format!("pm.response.to.have.header(\"{}\");", escape(name))
        }
        Assertion::ResponseTimeBelow(ms) => {
            format!("pm.expect(pm.response.responseTime).to.be.below({ms});")
        }
        Assertion::JsonPathIsNonEmptyArray(path) => format!(
            "pm.expect(pm.response.json(){path}).to.be.an('array').that.is.not.empty;"
        ),
        Assertion::JsonPathEquals(path, lit) => {
            format!("pm.expect(pm.response.json(){path}).to.equal({lit});")
        }
    }
}

fn render_block(script: &TestScript) -> String {
    let mut out = String::new();
    out.push_str(&format!("pm.test(\"{}\", function () {{\n", escape(&script.title)));
    for a in &script.assertions {
        out.push_str("  ");
        out.push_str(&render_assertion(a));
        out.push('\n');
    }
    out.push_str("});");
    out
}

/// Render scripts to canonical test-script text: one `pm.test` block per
/// script, 2-space indent, one blank line between blocks, trailing newline.
/// The empty list renders to the empty string.
pub fn render_script(scripts: &[TestScript]) -> String {
    if scripts.is_empty() {
        return String::new();
    }
    let blocks: Vec<String> = scripts.iter().map(render_block).collect();
    let mut out = blocks.join("\n\n");
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str { value: String, quote: char },
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(s) => format!("number `{s}`"),
            Tok::Str { value, .. } => format!("string {value:?}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Dot => "`.`".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: u32,
    col: u32,
    offset: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: Pos,
    end_offset: usize,
}

/// Errors from [`parse_script`] and [`canonicalize`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DslError {
    #[error("parse error at line {line}, column {col}: expected {}, found {found}", expected.join(" or "))]
    Parse { line: u32, col: u32, expected: Vec<String>, found: String },
    /// The statement lexes cleanly but is outside the supported grammar.
    /// Kept distinct from `Parse` so a repair prompt can quote it.
    #[error("unsupported statement at line {line}, column {col}: {statement}")]
    Unsupported { line: u32, col: u32, statement: String },
}

impl DslError {
    fn expected(pos: Pos, expected: &[&str], found: String) -> Self {
        DslError::Parse {
            line: pos.line,
            col: pos.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, DslError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col, offset: i };
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '(' => {
                toks.push(Spanned { tok: Tok::LParen, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            ')' => {
                toks.push(Spanned { tok: Tok::RParen, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            '{' => {
                toks.push(Spanned { tok: Tok::LBrace, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            '}' => {
                toks.push(Spanned { tok: Tok::RBrace, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            '[' => {
                toks.push(Spanned { tok: Tok::LBracket, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            ']' => {
                toks.push(Spanned { tok: Tok::RBracket, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            ',' => {
                toks.push(Spanned { tok: Tok::Comma, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            ';' => {
                toks.push(Spanned { tok: Tok::Semi, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            '.' => {
                toks.push(Spanned { tok: Tok::Dot, pos, end_offset: i + 1 });
                advance(1, &mut i, &mut col);
            }
            '"' | '\'' => {
                let quote = c;
                let mut value = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    let ch = chars[j];
                    if ch == '\\' {
                        if j + 1 >= chars.len() {
                            break;
                        }
                        let esc = chars[j + 1];
                        value.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        j += 2;
                    } else if ch == quote {
                        closed = true;
                        break;
                    } else if ch == '\n' {
                        break;
                    } else {
                        value.push(ch);
                        j += 1;
                    }
                }
                if !closed {
                    return Err(DslError::expected(
                        pos,
                        &["closing quote"],
                        "unterminated string".into(),
                    ));
                }
                let consumed = j + 1 - i;
                toks.push(Spanned { tok: Tok::Str { value, quote }, pos, end_offset: j + 1 });
                advance(consumed, &mut i, &mut col);
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut j = i;
                if chars[j] == '-' {
                    j += 1;
                }
                let start_digits = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == start_digits {
                    return Err(DslError::expected(pos, &["digit"], format!("`{c}`")));
                }
                if j < chars.len() && chars[j] == '.' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let raw: String = chars[i..j].iter().collect();
                let consumed = j - i;
                toks.push(Spanned { tok: Tok::Num(raw), pos, end_offset: j });
                advance(consumed, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let raw: String = chars[i..j].iter().collect();
                let consumed = j - i;
                toks.push(Spanned { tok: Tok::Ident(raw), pos, end_offset: j });
                advance(consumed, &mut i, &mut col);
            }
            other => {
                return Err(DslError::expected(pos, &["token"], format!("`{other}`")));
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [Spanned],
    src: &'a str,
    idx: usize,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.idx)
    }

    fn next(&mut self) -> Option<&Spanned> {
        let t = self.toks.get(self.idx);
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn eof_pos(&self) -> Pos {
        self.toks
            .last()
            .map(|t| t.pos)
            .unwrap_or(Pos { line: 1, col: 1, offset: 0 })
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), DslError> {
        match self.next() {
            Some(sp) if &sp.tok == want => Ok(()),
            Some(sp) => Err(DslError::expected(sp.pos, &[what], sp.tok.describe())),
            None => Err(DslError::expected(self.eof_pos(), &[what], "end of input".into())),
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<(), DslError> {
        match self.next() {
            Some(sp) => match &sp.tok {
                Tok::Ident(s) if s == name => Ok(()),
                other => Err(DslError::expected(sp.pos, &[&format!("`{name}`")], other.describe())),
            },
            None => Err(DslError::expected(
                self.eof_pos(),
                &[&format!("`{name}`")],
                "end of input".into(),
            )),
        }
    }

    fn parse_scripts(&mut self) -> Result<Vec<TestScript>, DslError> {
        let mut scripts = Vec::new();
        while self.peek().is_some() {
            scripts.push(self.parse_block()?);
        }
        Ok(scripts)
    }

    fn parse_block(&mut self) -> Result<TestScript, DslError> {
        self.expect_ident("pm")?;
        self.expect(&Tok::Dot, "`.`")?;
        self.expect_ident("test")?;
        self.expect(&Tok::LParen, "`(`")?;
        let (title, quote, title_pos) = match self.next() {
            Some(sp) => match &sp.tok {
                Tok::Str { value, quote } => (value.clone(), *quote, sp.pos),
                other => {
                    return Err(DslError::expected(sp.pos, &["test title string"], other.describe()))
                }
            },
            None => {
                return Err(DslError::expected(
                    self.eof_pos(),
                    &["test title string"],
                    "end of input".into(),
                ))
            }
        };
        if quote != '"' {
            self.warnings
                .push(format!("line {}: test title uses single quotes", title_pos.line));
        }
        if title.is_empty() {
            return Err(DslError::expected(title_pos, &["non-empty test title"], "\"\"".into()));
        }
        self.expect(&Tok::Comma, "`,`")?;
        self.expect_ident("function")?;
        self.expect(&Tok::LParen, "`(`")?;
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::LBrace, "`{`")?;
        let mut assertions = Vec::new();
        loop {
            match self.peek() {
                Some(sp) if sp.tok == Tok::RBrace => {
                    self.idx += 1;
                    break;
                }
                Some(_) => assertions.push(self.parse_statement()?),
                None => {
                    return Err(DslError::expected(
                        self.eof_pos(),
                        &["statement", "`}`"],
                        "end of input".into(),
                    ))
                }
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::Semi, "`;`")?;
        if assertions.is_empty() {
            return Err(DslError::expected(
                title_pos,
                &["at least one statement in test block"],
                format!("empty block \"{title}\""),
            ));
        }
        Ok(TestScript { title, assertions })
    }

    /// Collect the token slice up to the terminating `;` (at bracket depth 0),
    /// then match it against the six supported statement shapes.
    fn parse_statement(&mut self) -> Result<Assertion, DslError> {
        let start = self.idx;
        let start_pos = self.toks[start].pos;
        let mut depth: i32 = 0;
        let mut end = None;
        for (off, sp) in self.toks[start..].iter().enumerate() {
            match sp.tok {
                Tok::LParen | Tok::LBracket => depth += 1,
                Tok::RParen | Tok::RBracket => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                Tok::LBrace | Tok::RBrace => break,
                Tok::Semi if depth == 0 => {
                    end = Some(start + off);
                    break;
                }
                _ => {}
            }
        }
        let semi = end.ok_or_else(|| {
            DslError::expected(start_pos, &["`;` terminating statement"], "end of statement".into())
        })?;
        let slice = &self.toks[start..semi];
        self.idx = semi + 1;
        match match_statement(slice, &mut self.warnings) {
            Some(a) => {
                validate_assertion(&a).map_err(|msg| DslError::Parse {
                    line: start_pos.line,
                    col: start_pos.col,
                    expected: vec![msg],
                    found: self.statement_text(start, semi),
                })?;
                Ok(a)
            }
            None => Err(DslError::Unsupported {
                line: start_pos.line,
                col: start_pos.col,
                statement: self.statement_text(start, semi),
            }),
        }
    }

    fn statement_text(&self, start: usize, semi: usize) -> String {
        let from = self.toks[start].pos.offset;
        let to = self.toks.get(semi).map(|t| t.end_offset).unwrap_or(self.src.len());
        let text: String = self.src.chars().skip(from).take(to - from).collect();
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Token-slice matcher for the supported statement shapes. `None` means the
/// statement is well-formed but not in the grammar.
fn match_statement(toks: &[Spanned], warnings: &mut Vec<String>) -> Option<Assertion> {
    let mut m = Matcher { toks, idx: 0, warnings };
    m.try_match()
}

struct Matcher<'a> {
    toks: &'a [Spanned],
    idx: usize,
    warnings: &'a mut Vec<String>,
}

impl<'a> Matcher<'a> {
    fn try_match(&mut self) -> Option<Assertion> {
        self.ident("pm")?;
        self.tok(&Tok::Dot)?;
        if self.peek_ident("response") {
            // pm.response.to.have.status(N); | pm.response.to.have.header("x");
            self.ident("response")?;
            self.dotted(&["to", "have"])?;
            self.tok(&Tok::Dot)?;
            if self.peek_ident("status") {
                self.ident("status")?;
                self.tok(&Tok::LParen)?;
                let code = self.int()?;
                self.tok(&Tok::RParen)?;
                self.done()?;
                return Some(Assertion::StatusEquals(u16::try_from(code).ok()?));
            }
            self.ident("header")?;
            self.tok(&Tok::LParen)?;
            let (name, quote, line) = self.string()?;
            self.tok(&Tok::RParen)?;
            self.done()?;
            if quote != '"' {
                self.warnings.push(format!("line {line}: header name uses single quotes"));
            }
            return Some(Assertion::HeaderPresent(name));
        }
        self.ident("expect")?;
        self.tok(&Tok::LParen)?;
        self.ident("pm")?;
        self.tok(&Tok::Dot)?;
        self.ident("response")?;
        self.tok(&Tok::Dot)?;
        if self.peek_ident("text") {
            // pm.expect(pm.response.text()).not.equal(''); with optional `.to`
            self.ident("text")?;
            self.tok(&Tok::LParen)?;
            self.tok(&Tok::RParen)?;
            self.tok(&Tok::RParen)?;
            self.tok(&Tok::Dot)?;
            if self.peek_ident("to") {
                self.ident("to")?;
                self.tok(&Tok::Dot)?;
                self.warnings.push("`.to.not.equal` accepted; canonical form is `.not.equal`".into());
            }
            self.ident("not")?;
            self.tok(&Tok::Dot)?;
            self.ident("equal")?;
            self.tok(&Tok::LParen)?;
            let (value, quote, line) = self.string()?;
            self.tok(&Tok::RParen)?;
            self.done()?;
            if !value.is_empty() {
                return None;
            }
            if quote != '\'' {
                self.warnings.push(format!("line {line}: empty-string literal uses double quotes"));
            }
            return Some(Assertion::BodyNotEmpty);
        }
        if self.peek_ident("responseTime") {
            self.ident("responseTime")?;
            self.tok(&Tok::RParen)?;
            self.dotted(&["to", "be", "below"])?;
            self.tok(&Tok::LParen)?;
            let ms = self.int()?;
            self.tok(&Tok::RParen)?;
            self.done()?;
            return Some(Assertion::ResponseTimeBelow(u64::try_from(ms).ok()?));
        }
        // pm.expect(pm.response.json()<path>)...
        self.ident("json")?;
        self.tok(&Tok::LParen)?;
        self.tok(&Tok::RParen)?;
        let path = self.path()?;
        self.tok(&Tok::RParen)?;
        self.dotted(&["to"])?;
        self.tok(&Tok::Dot)?;
        if self.peek_ident("be") {
            self.ident("be")?;
            self.dotted(&["an"])?;
            self.tok(&Tok::LParen)?;
            let (ty, quote, line) = self.string()?;
            self.tok(&Tok::RParen)?;
            if ty != "array" {
                return None;
            }
            if quote != '\'' {
                self.warnings.push(format!("line {line}: type name uses double quotes"));
            }
            self.dotted(&["that", "is", "not", "empty"])?;
            self.done()?;
            return Some(Assertion::JsonPathIsNonEmptyArray(path));
        }
        self.ident("equal")?;
        self.tok(&Tok::LParen)?;
        let lit = self.literal()?;
        self.tok(&Tok::RParen)?;
        self.done()?;
        Some(Assertion::JsonPathEquals(path, lit))
    }

    fn peek_ident(&self, name: &str) -> bool {
        matches!(self.toks.get(self.idx), Some(sp) if sp.tok == Tok::Ident(name.to_string()))
    }

    fn ident(&mut self, name: &str) -> Option<()> {
        match self.toks.get(self.idx) {
            Some(sp) if sp.tok == Tok::Ident(name.to_string()) => {
                self.idx += 1;
                Some(())
            }
            _ => None,
        }
    }

    fn tok(&mut self, want: &Tok) -> Option<()> {
        match self.toks.get(self.idx) {
            Some(sp) if &sp.tok == want => {
                self.idx += 1;
                Some(())
            }
            _ => None,
        }
    }

    /// `.a.b.c` where the leading dot is consumed here.
    fn dotted(&mut self, names: &[&str]) -> Option<()> {
        for name in names {
            self.tok(&Tok::Dot)?;
            self.ident(name)?;
        }
        Some(())
    }

    fn int(&mut self) -> Option<i64> {
        match self.toks.get(self.idx) {
            Some(sp) => {
                if let Tok::Num(raw) = &sp.tok {
                    let v: i64 = raw.parse().ok()?;
                    self.idx += 1;
                    Some(v)
                } else {
                    None
                }
            }
            None => None,
        }
    }

    fn string(&mut self) -> Option<(String, char, u32)> {
        match self.toks.get(self.idx) {
            Some(sp) => {
                if let Tok::Str { value, quote } = &sp.tok {
                    let out = (value.clone(), *quote, sp.pos.line);
                    self.idx += 1;
                    Some(out)
                } else {
                    None
                }
            }
            None => None,
        }
    }

    fn path(&mut self) -> Option<JsonPath> {
        let mut path = JsonPath::root();
        loop {
            match self.toks.get(self.idx) {
                Some(sp) if sp.tok == Tok::Dot => {
                    self.idx += 1;
                    match self.toks.get(self.idx) {
                        Some(sp2) => {
                            if let Tok::Ident(name) = &sp2.tok {
                                path.segments.push(PathSegment::Field(name.clone()));
                                self.idx += 1;
                            } else {
                                return None;
                            }
                        }
                        None => return None,
                    }
                }
                Some(sp) if sp.tok == Tok::LBracket => {
                    self.idx += 1;
                    let i = self.int()?;
                    if i < 0 {
                        return None;
                    }
                    self.tok(&Tok::RBracket)?;
                    path.segments.push(PathSegment::Index(i as u64));
                }
                _ => break,
            }
            if path.segments.len() > MAX_PATH_SEGMENTS {
                return None;
            }
        }
        Some(path)
    }

    fn literal(&mut self) -> Option<JsonScalar> {
        match self.toks.get(self.idx) {
            Some(sp) => {
                let lit = match &sp.tok {
                    Tok::Num(raw) => {
                        if raw.contains('.') || raw.contains('e') || raw.contains('E') {
                            JsonScalar::Float(raw.parse().ok()?)
                        } else {
                            JsonScalar::Int(raw.parse().ok()?)
                        }
                    }
                    Tok::Str { value, quote } => {
                        if *quote != '"' {
                            self.warnings
                                .push(format!("line {}: string literal uses single quotes", sp.pos.line));
                        }
                        JsonScalar::Str(value.clone())
                    }
                    Tok::Ident(s) => match s.as_str() {
                        "true" => JsonScalar::Bool(true),
                        "false" => JsonScalar::Bool(false),
                        "null" => JsonScalar::Null,
                        _ => return None,
                    },
                    _ => return None,
                };
                self.idx += 1;
                Some(lit)
            }
            None => None,
        }
    }

    fn done(&mut self) -> Option<()> {
        if self.idx == self.toks.len() {
            Some(())
        } else {
            None
        }
    }
}

/// Parse test-script text into scripts plus non-fatal warnings about accepted
/// but non-canonical spellings.
pub fn parse_script(text: &str) -> Result<(Vec<TestScript>, Vec<String>), DslError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks: &toks, src: text, idx: 0, warnings: Vec::new() };
    let scripts = parser.parse_scripts()?;
    Ok((scripts, parser.warnings))
}

/// Reduce parseable text to canonical form. Idempotent.
pub fn canonicalize(text: &str) -> Result<String, DslError> {
    let (scripts, _) = parse_script(text)?;
    Ok(render_script(&scripts))
}
