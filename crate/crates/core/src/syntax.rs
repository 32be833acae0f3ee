//! Reader and printer for the MDL structured-ASCII model format.
//!
//! A file is a tree of named sections (`Name {` ... `}`) holding
//! `Key value` parameters, child sections and `#` comment lines. The parser
//! keeps the exact lexeme of every value so printer-normal files survive a
//! parse/print cycle byte for byte.
//!
//! Two line shapes are understood:
//!
//! * plain lines, one item per line, where a bare value runs to the end of
//!   the line (`BlockType Sin`, `Position [10, 20, 30, 40]`);
//! * packed lines holding several items (`Model { Name "m" }`), where every
//!   value is a single lexeme. Language-model samples come out in this
//!   shape since tokens are re-joined with single spaces.

use std::fmt;

use thiserror::Error;

/// How the parser reacts to constructs outside the supported grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Fail on the first unrecognized construct.
    #[default]
    Strict,
    /// Skip unrecognized constructs and record a [`Diagnostic`].
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnbalancedBraces,
    UnterminatedString,
    UnterminatedVector,
    MissingValue,
    UnexpectedToken,
    TrailingContent,
    InvalidRoot,
    InvalidUtf8,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::EmptyInput => "empty input",
            ParseErrorKind::UnbalancedBraces => "unbalanced braces",
            ParseErrorKind::UnterminatedString => "unterminated string",
            ParseErrorKind::UnterminatedVector => "unterminated vector literal",
            ParseErrorKind::MissingValue => "parameter without a value",
            ParseErrorKind::UnexpectedToken => "unexpected token",
            ParseErrorKind::TrailingContent => "content after the root section",
            ParseErrorKind::InvalidRoot => "root section is not `Model`",
            ParseErrorKind::InvalidUtf8 => "input is not valid UTF-8",
        };
        f.write_str(s)
    }
}

/// A parse failure, located by byte offset and 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at line {line} (byte {offset}){}", detail_suffix(.detail))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub line: usize,
    pub detail: String,
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(": {detail}")
    }
}

/// Something lenient mode skipped or repaired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub offset: usize,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} (byte {}): {}", self.line, self.offset, self.message)
    }
}

/// The value side of a parameter. Each variant holds the raw lexeme.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParamValue {
    /// Unquoted word(s) or number, e.g. `on`, `2.5`, `Sin`.
    Bare(String),
    /// A double-quoted string including its quotes and escapes.
    Quoted(String),
    /// A bracketed vector literal, e.g. `[1, 2; 3, 4]`.
    Vector(String),
}

impl ParamValue {
    /// Builds a quoted value from unescaped text.
    pub fn quoted(text: &str) -> Self {
        let mut s = String::with_capacity(text.len() + 2);
        s.push('"');
        for c in text.chars() {
            match c {
                '"' => s.push_str("\\\""),
                '\\' => s.push_str("\\\\"),
                '\n' => s.push_str("\\n"),
                _ => s.push(c),
            }
        }
        s.push('"');
        ParamValue::Quoted(s)
    }

    pub fn bare(text: impl Into<String>) -> Self {
        ParamValue::Bare(text.into())
    }

    pub fn lexeme(&self) -> &str {
        match self {
            ParamValue::Bare(s) | ParamValue::Quoted(s) | ParamValue::Vector(s) => s,
        }
    }

    /// The value as text: quoted strings are unescaped, everything else is
    /// returned verbatim.
    pub fn text(&self) -> String {
        match self {
            ParamValue::Quoted(s) => unescape_quoted(s),
            ParamValue::Bare(s) | ParamValue::Vector(s) => s.clone(),
        }
    }
}

fn unescape_quoted(lexeme: &str) -> String {
    let inner = lexeme
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(lexeme);
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            },
            '"' if chars.peek() == Some(&'"') => {
                chars.next();
                out.push('"');
            }
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub key: String,
    pub value: ParamValue,
}

impl Param {
    pub fn new(key: impl Into<String>, value: ParamValue) -> Self {
        Param {
            key: key.into(),
            value,
        }
    }
}

/// One entry of a section body. Parameters, child sections and comments are
/// kept in a single list so their interleaving survives printing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Param(Param),
    Section(Section),
    /// A full-line `#` comment, stored without leading whitespace.
    Comment(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Section {
    pub name: String,
    pub items: Vec<Node>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            items: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.items.push(Node::Param(Param::new(key, value)));
        self
    }

    pub fn with_child(mut self, child: Section) -> Self {
        self.items.push(Node::Section(child));
        self
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.items.iter().filter_map(|n| match n {
            Node::Param(p) => Some(p),
            _ => None,
        })
    }

    pub fn children(&self) -> impl Iterator<Item = &Section> {
        self.items.iter().filter_map(|n| match n {
            Node::Section(s) => Some(s),
            _ => None,
        })
    }

    pub fn children_mut(&mut self) -> impl Iterator<Item = &mut Section> {
        self.items.iter_mut().filter_map(|n| match n {
            Node::Section(s) => Some(s),
            _ => None,
        })
    }

    /// First parameter with the given key (case-sensitive).
    pub fn param(&self, key: &str) -> Option<&ParamValue> {
        self.params().find(|p| p.key == key).map(|p| &p.value)
    }

    pub fn param_text(&self, key: &str) -> Option<String> {
        self.param(key).map(ParamValue::text)
    }

    /// Replaces the first parameter named `key`, or appends one.
    pub fn set_param(&mut self, key: &str, value: ParamValue) {
        for node in &mut self.items {
            if let Node::Param(p) = node {
                if p.key == key {
                    p.value = value;
                    return;
                }
            }
        }
        self.items.push(Node::Param(Param::new(key, value)));
    }

    pub fn child(&self, name: &str) -> Option<&Section> {
        self.children().find(|s| s.name == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut Section> {
        self.children_mut().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyntaxTree {
    pub root: Section,
}

impl SyntaxTree {
    pub fn new(root: Section) -> Self {
        SyntaxTree { root }
    }

    /// The section holding blocks and lines: the root's first `System`
    /// child, or the root itself when there is none.
    pub fn system(&self) -> &Section {
        self.root.child("System").unwrap_or(&self.root)
    }

    pub fn system_mut(&mut self) -> &mut Section {
        if self.root.child("System").is_some() {
            self.root.child_mut("System").unwrap()
        } else {
            &mut self.root
        }
    }
}

/// Result of a successful parse plus whatever lenient mode had to skip.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub tree: SyntaxTree,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn parse(text: &str, mode: ParseMode) -> Result<SyntaxTree, ParseError> {
    parse_with_diagnostics(text, mode).map(|p| p.tree)
}

/// Parses raw bytes. Invalid UTF-8 fails in strict mode; lenient mode
/// substitutes replacement characters and notes it.
pub fn parse_bytes(bytes: &[u8], mode: ParseMode) -> Result<Parsed, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_with_diagnostics(text, mode),
        Err(e) => {
            let offset = e.valid_up_to();
            let line = 1 + bytes[..offset].iter().filter(|&&b| b == b'\n').count();
            if mode == ParseMode::Strict {
                return Err(ParseError {
                    kind: ParseErrorKind::InvalidUtf8,
                    offset,
                    line,
                    detail: String::new(),
                });
            }
            let text = String::from_utf8_lossy(bytes);
            let mut parsed = parse_with_diagnostics(&text, mode)?;
            parsed.diagnostics.insert(
                0,
                Diagnostic {
                    offset,
                    line,
                    message: "invalid UTF-8 replaced lossily".into(),
                },
            );
            Ok(parsed)
        }
    }
}

pub fn parse_with_diagnostics(text: &str, mode: ParseMode) -> Result<Parsed, ParseError> {
    Parser::new(text, mode).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LexKind {
    Open,
    Close,
    Word,
    Quoted,
    Vector,
}

#[derive(Debug, Clone, Copy)]
struct Lexeme {
    kind: LexKind,
    start: usize,
    end: usize,
}

struct Parser<'a> {
    text: &'a str,
    mode: ParseMode,
    diagnostics: Vec<Diagnostic>,
    stack: Vec<Section>,
    root: Option<Section>,
    trailing_reported: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, mode: ParseMode) -> Self {
        Parser {
            text,
            mode,
            diagnostics: Vec::new(),
            stack: Vec::new(),
            root: None,
            trailing_reported: false,
        }
    }

    fn run(mut self) -> Result<Parsed, ParseError> {
        if self.text.trim().is_empty() {
            return Err(ParseError {
                kind: ParseErrorKind::EmptyInput,
                offset: 0,
                line: 1,
                detail: String::new(),
            });
        }
        let mut offset = 0;
        for (idx, raw_line) in self.text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            self.line(line, offset, line_no)?;
            offset += raw_line.len() + 1;
        }
        let end = self.text.len();
        if !self.stack.is_empty() {
            return Err(self.error(
                ParseErrorKind::UnbalancedBraces,
                end,
                format!("{} section(s) left open at end of input", self.stack.len()),
            ));
        }
        let root = match self.root.take() {
            Some(r) => r,
            None => {
                return Err(self.error(
                    ParseErrorKind::EmptyInput,
                    end,
                    "no section found".into(),
                ))
            }
        };
        if root.name != "Model" {
            if self.mode == ParseMode::Strict {
                return Err(self.error(ParseErrorKind::InvalidRoot, 0, root.name.clone()));
            }
            self.note(0, format!("root section is `{}`", root.name));
        }
        Ok(Parsed {
            tree: SyntaxTree { root },
            diagnostics: self.diagnostics,
        })
    }

    fn line_of(&self, offset: usize) -> usize {
        1 + self.text.as_bytes()[..offset.min(self.text.len())]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
    }

    fn error(&self, kind: ParseErrorKind, offset: usize, detail: String) -> ParseError {
        ParseError {
            kind,
            offset,
            line: self.line_of(offset),
            detail,
        }
    }

    fn note(&mut self, offset: usize, message: String) {
        let line = self.line_of(offset);
        self.diagnostics.push(Diagnostic {
            offset,
            line,
            message,
        });
    }

    /// Strict mode turns a skippable problem into an error.
    fn skip_or_fail(
        &mut self,
        kind: ParseErrorKind,
        offset: usize,
        detail: String,
    ) -> Result<(), ParseError> {
        match self.mode {
            ParseMode::Strict => Err(self.error(kind, offset, detail)),
            ParseMode::Lenient => {
                self.note(offset, format!("{kind}: {detail}"));
                Ok(())
            }
        }
    }

    fn lex_line(&mut self, line: &str, base: usize) -> Result<Vec<Lexeme>, ParseError> {
        let bytes = line.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            match c {
                b'{' => {
                    out.push(Lexeme {
                        kind: LexKind::Open,
                        start: base + i,
                        end: base + i + 1,
                    });
                    i += 1;
                }
                b'}' => {
                    out.push(Lexeme {
                        kind: LexKind::Close,
                        start: base + i,
                        end: base + i + 1,
                    });
                    i += 1;
                }
                b'"' => match scan_quoted(bytes, i) {
                    Some(end) => {
                        out.push(Lexeme {
                            kind: LexKind::Quoted,
                            start: base + start,
                            end: base + end,
                        });
                        i = end;
                    }
                    None => {
                        self.skip_or_fail(
                            ParseErrorKind::UnterminatedString,
                            base + start,
                            "no closing quote on this line".into(),
                        )?;
                        let end = scan_word(bytes, i + 1);
                        out.push(Lexeme {
                            kind: LexKind::Word,
                            start: base + start,
                            end: base + end,
                        });
                        i = end;
                    }
                },
                b'[' => match bytes[i..].iter().position(|&b| b == b']') {
                    Some(rel) => {
                        let end = i + rel + 1;
                        out.push(Lexeme {
                            kind: LexKind::Vector,
                            start: base + start,
                            end: base + end,
                        });
                        i = end;
                    }
                    None => {
                        self.skip_or_fail(
                            ParseErrorKind::UnterminatedVector,
                            base + start,
                            "no closing bracket on this line".into(),
                        )?;
                        let end = scan_word(bytes, i + 1);
                        out.push(Lexeme {
                            kind: LexKind::Word,
                            start: base + start,
                            end: base + end,
                        });
                        i = end;
                    }
                },
                _ => {
                    let end = scan_word(bytes, i + 1);
                    out.push(Lexeme {
                        kind: LexKind::Word,
                        start: base + start,
                        end: base + end,
                    });
                    i = end;
                }
            }
        }
        Ok(out)
    }

    fn slice(&self, lx: &Lexeme) -> &'a str {
        &self.text[lx.start..lx.end]
    }

    fn line(&mut self, line: &str, base: usize, _line_no: usize) -> Result<(), ParseError> {
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            return Ok(());
        }
        if trimmed.starts_with('#') {
            let comment = trimmed.trim_end().to_string();
            let at = base + (line.len() - trimmed.len());
            if let Some(top) = self.stack.last_mut() {
                top.items.push(Node::Comment(comment));
            } else if self.root.is_some() {
                self.trailing(at)?;
            } else {
                // comments ahead of the root section carry no structure
                self.note(at, "comment before the root section dropped".into());
            }
            return Ok(());
        }
        let lexemes = self.lex_line(line, base)?;
        if lexemes.is_empty() {
            return Ok(());
        }
        if is_plain(&lexemes) {
            self.plain_line(line, base, &lexemes)
        } else {
            self.packed_line(&lexemes)
        }
    }

    fn plain_line(&mut self, line: &str, base: usize, lx: &[Lexeme]) -> Result<(), ParseError> {
        match (lx[0].kind, lx.len()) {
            (LexKind::Close, _) => self.close(lx[0].start),
            (LexKind::Word, 2) if lx[1].kind == LexKind::Open => {
                let name = self.slice(&lx[0]).to_string();
                self.open(name, lx[0].start)
            }
            (LexKind::Word, 1) => self.skip_or_fail(
                ParseErrorKind::MissingValue,
                lx[0].start,
                self.slice(&lx[0]).to_string(),
            ),
            (LexKind::Word, _) => {
                let key = self.slice(&lx[0]).to_string();
                let first = &lx[1];
                let last = &lx[lx.len() - 1];
                let raw = &line[first.start - base..last.end - base];
                let value = if lx.len() == 2 {
                    match first.kind {
                        LexKind::Quoted => ParamValue::Quoted(raw.to_string()),
                        LexKind::Vector => ParamValue::Vector(raw.to_string()),
                        _ => ParamValue::Bare(raw.to_string()),
                    }
                } else if first.kind == LexKind::Word {
                    ParamValue::Bare(raw.to_string())
                } else {
                    self.skip_or_fail(
                        ParseErrorKind::UnexpectedToken,
                        lx[2].start,
                        format!("extra text after the value of `{key}`"),
                    )?;
                    ParamValue::Bare(raw.to_string())
                };
                self.param(key, value, lx[0].start)
            }
            (LexKind::Quoted, 1) => self.continuation(&lx[0]),
            _ => self.skip_or_fail(
                ParseErrorKind::UnexpectedToken,
                lx[0].start,
                self.slice(&lx[0]).to_string(),
            ),
        }
    }

    fn packed_line(&mut self, lx: &[Lexeme]) -> Result<(), ParseError> {
        let mut i = 0;
        while i < lx.len() {
            let cur = lx[i];
            match cur.kind {
                LexKind::Close => {
                    self.close(cur.start)?;
                    i += 1;
                }
                LexKind::Word => match lx.get(i + 1).map(|l| l.kind) {
                    Some(LexKind::Open) => {
                        let name = self.slice(&cur).to_string();
                        self.open(name, cur.start)?;
                        i += 2;
                    }
                    Some(LexKind::Word) | Some(LexKind::Quoted) | Some(LexKind::Vector) => {
                        let v = lx[i + 1];
                        let raw = self.slice(&v).to_string();
                        let value = match v.kind {
                            LexKind::Quoted => ParamValue::Quoted(raw),
                            LexKind::Vector => ParamValue::Vector(raw),
                            _ => ParamValue::Bare(raw),
                        };
                        let key = self.slice(&cur).to_string();
                        self.param(key, value, cur.start)?;
                        i += 2;
                    }
                    _ => {
                        self.skip_or_fail(
                            ParseErrorKind::MissingValue,
                            cur.start,
                            self.slice(&cur).to_string(),
                        )?;
                        i += 1;
                    }
                },
                LexKind::Open | LexKind::Quoted | LexKind::Vector => {
                    self.skip_or_fail(
                        ParseErrorKind::UnexpectedToken,
                        cur.start,
                        self.slice(&cur).to_string(),
                    )?;
                    i += 1;
                }
            }
        }
        Ok(())
    }

    fn open(&mut self, name: String, at: usize) -> Result<(), ParseError> {
        if self.stack.is_empty() && self.root.is_some() {
            return self.trailing(at);
        }
        self.stack.push(Section::new(name));
        Ok(())
    }

    fn close(&mut self, at: usize) -> Result<(), ParseError> {
        match self.stack.pop() {
            Some(done) => {
                match self.stack.last_mut() {
                    Some(parent) => parent.items.push(Node::Section(done)),
                    None => self.root = Some(done),
                }
                Ok(())
            }
            None if self.root.is_some() => self.trailing(at),
            None => Err(self.error(
                ParseErrorKind::UnbalancedBraces,
                at,
                "`}` without a matching `{`".into(),
            )),
        }
    }

    fn param(&mut self, key: String, value: ParamValue, at: usize) -> Result<(), ParseError> {
        match self.stack.last_mut() {
            Some(top) => {
                top.items.push(Node::Param(Param { key, value }));
                Ok(())
            }
            None if self.root.is_some() => self.trailing(at),
            None => self.skip_or_fail(
                ParseErrorKind::UnexpectedToken,
                at,
                format!("parameter `{key}` outside any section"),
            ),
        }
    }

    /// A lone quoted string continuing the previous quoted value.
    fn continuation(&mut self, lx: &Lexeme) -> Result<(), ParseError> {
        if self.mode == ParseMode::Strict {
            return Err(self.error(
                ParseErrorKind::UnexpectedToken,
                lx.start,
                "string continuation line".into(),
            ));
        }
        let piece = self.slice(lx).to_string();
        let merged = match self.stack.last_mut().and_then(|s| s.items.last_mut()) {
            Some(Node::Param(Param {
                value: ParamValue::Quoted(prev),
                ..
            })) => {
                prev.pop();
                prev.push_str(&piece[1..]);
                true
            }
            _ => false,
        };
        if merged {
            self.note(lx.start, "string continuation merged into previous value".into());
        } else {
            self.note(lx.start, "stray quoted string skipped".into());
        }
        Ok(())
    }

    fn trailing(&mut self, at: usize) -> Result<(), ParseError> {
        if self.mode == ParseMode::Strict {
            return Err(self.error(ParseErrorKind::TrailingContent, at, String::new()));
        }
        if !self.trailing_reported {
            self.trailing_reported = true;
            self.note(at, "content after the root section ignored".into());
        }
        Ok(())
    }
}

/// A plain line: `}`, `Key {`, `Key value...` with no braces, or a lone
/// quoted continuation.
fn is_plain(lx: &[Lexeme]) -> bool {
    let braces = lx
        .iter()
        .filter(|l| matches!(l.kind, LexKind::Open | LexKind::Close))
        .count();
    match braces {
        0 => true,
        1 => {
            (lx.len() == 1 && lx[0].kind == LexKind::Close)
                || (lx.len() == 2 && lx[0].kind == LexKind::Word && lx[1].kind == LexKind::Open)
        }
        _ => false,
    }
}

fn scan_word(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() || b == b'{' || b == b'}' {
            break;
        }
        i += 1;
    }
    i
}

/// Returns the end offset (exclusive) of the quoted string opening at
/// `start`. Backslash escapes and doubled quotes are both honored.
fn scan_quoted(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => {
                // `""` is an escaped quote; `"""x"` starts with one
                if i + 1 < bytes.len() && bytes[i + 1] == b'"' {
                    i += 2;
                } else {
                    return Some(i + 1);
                }
            }
            _ => i += 1,
        }
    }
    None
}

/// Prints a tree in normal form: one item per line, two spaces of indent
/// per depth, trailing newline.
pub fn print(tree: &SyntaxTree) -> String {
    let mut out = String::new();
    print_section(&tree.root, 0, &mut out);
    out
}

pub fn print_section(section: &Section, depth: usize, out: &mut String) {
    indent(depth, out);
    out.push_str(&section.name);
    out.push_str(" {\n");
    for node in &section.items {
        match node {
            Node::Param(p) => {
                indent(depth + 1, out);
                out.push_str(&p.key);
                out.push(' ');
                out.push_str(p.value.lexeme());
                out.push('\n');
            }
            Node::Section(s) => print_section(s, depth + 1, out),
            Node::Comment(c) => {
                indent(depth + 1, out);
                out.push_str(c);
                out.push('\n');
            }
        }
    }
    indent(depth, out);
    out.push_str("}\n");
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// Whitespace-separated tokens with `{` and `}` always split out.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while !rest.is_empty() {
            match rest.find(['{', '}']) {
                Some(0) => {
                    tokens.push(rest[..1].to_string());
                    rest = &rest[1..];
                }
                Some(pos) => {
                    tokens.push(rest[..pos].to_string());
                    rest = &rest[pos..];
                }
                None => {
                    tokens.push(rest.to_string());
                    rest = "";
                }
            }
        }
    }
    TokenSeq(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_model() {
        let t = parse("Model {\n Name \"m\"\n}", ParseMode::Strict).unwrap();
        assert_eq!(t.root.name, "Model");
        assert_eq!(t.root.params().count(), 1);
        assert_eq!(t.root.children().count(), 0);
        assert_eq!(t.root.param("Name"), Some(&ParamValue::Quoted("\"m\"".into())));
        assert_eq!(print(&t), "Model {\n  Name \"m\"\n}\n");
    }

    #[test]
    fn nested_block() {
        let src = "Model {\n Block {\n BlockType Sin\n Name \"a\"\n }\n}";
        let t = parse(src, ParseMode::Strict).unwrap();
        let block: Vec<_> = t.root.children().collect();
        assert_eq!(block.len(), 1);
        assert_eq!(block[0].name, "Block");
        assert_eq!(block[0].params().count(), 2);
        assert_eq!(parse(&print(&t), ParseMode::Strict).unwrap(), t);
    }

    #[test]
    fn unclosed_model_is_unbalanced_at_eof() {
        let src = "Model {";
        let err = parse(src, ParseMode::Strict).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedBraces);
        assert_eq!(err.offset, src.len());
        assert_eq!(err.line, 1);
        let err = parse(src, ParseMode::Lenient).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedBraces);
    }

    #[test]
    fn empty_input() {
        for src in ["", "   \n\t\n"] {
            let err = parse(src, ParseMode::Lenient).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::EmptyInput);
        }
    }

    #[test]
    fn unterminated_string_strict_vs_lenient() {
        let src = "Model {\n  Name \"abc\n}\n";
        let err = parse(src, ParseMode::Strict).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnterminatedString);
        assert_eq!(err.line, 2);
        assert_eq!(err.offset, 15);
        let p = parse_with_diagnostics(src, ParseMode::Lenient).unwrap();
        assert_eq!(p.diagnostics.len(), 1);
        assert_eq!(p.tree.root.param("Name"), Some(&ParamValue::Bare("\"abc".into())));
    }

    #[test]
    fn stray_close_brace() {
        let err = parse("}\n", ParseMode::Lenient).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedBraces);
    }

    #[test]
    fn trailing_content() {
        let src = "Model {\n}\nModel {\n}\n";
        assert_eq!(
            parse(src, ParseMode::Strict).unwrap_err().kind,
            ParseErrorKind::TrailingContent
        );
        let p = parse_with_diagnostics(src, ParseMode::Lenient).unwrap();
        assert_eq!(p.diagnostics.len(), 1);
    }

    #[test]
    fn non_model_root() {
        let src = "Library {\n}\n";
        assert_eq!(
            parse(src, ParseMode::Strict).unwrap_err().kind,
            ParseErrorKind::InvalidRoot
        );
        assert_eq!(parse(src, ParseMode::Lenient).unwrap().root.name, "Library");
    }

    #[test]
    fn packed_single_line() {
        let src = "Model { System { Block { BlockType Sin Name \"a\" Ports [1, 1] } } }";
        let t = parse(src, ParseMode::Strict).unwrap();
        let block = t.system().child("Block").unwrap();
        assert_eq!(block.param("BlockType"), Some(&ParamValue::Bare("Sin".into())));
        assert_eq!(block.param_text("Name").as_deref(), Some("a"));
        assert_eq!(block.param("Ports"), Some(&ParamValue::Vector("[1, 1]".into())));
    }

    #[test]
    fn bare_value_runs_to_end_of_line() {
        let t = parse("Model {\n  Tag  two  words\n}\n", ParseMode::Strict).unwrap();
        assert_eq!(t.root.param("Tag"), Some(&ParamValue::Bare("two  words".into())));
    }

    #[test]
    fn escapes() {
        let t = parse(
            "Model {\n  A \"x\\\"y\"\n  B \"p\"\"q\"\n  C \"\"\n}\n",
            ParseMode::Strict,
        )
        .unwrap();
        assert_eq!(t.root.param_text("A").unwrap(), "x\"y");
        assert_eq!(t.root.param_text("B").unwrap(), "p\"q");
        assert_eq!(t.root.param_text("C").unwrap(), "");
        assert_eq!(ParamValue::quoted("x\"y").text(), "x\"y");
    }

    #[test]
    fn continuation_lines() {
        let src = "Model {\n  Description \"abc\"\n  \"def\"\n}\n";
        assert!(parse(src, ParseMode::Strict).is_err());
        let p = parse_with_diagnostics(src, ParseMode::Lenient).unwrap();
        assert_eq!(p.tree.root.param_text("Description").unwrap(), "abcdef");
        assert_eq!(p.diagnostics.len(), 1);
    }

    #[test]
    fn comments_are_kept() {
        let src = "Model {\n  # note\n  Name \"m\"\n}\n";
        let t = parse(src, ParseMode::Strict).unwrap();
        assert_eq!(t.root.items[0], Node::Comment("# note".into()));
        assert_eq!(print(&t), src);
    }

    #[test]
    fn interleaving_survives() {
        let src = "Model {\n  A 1\n  S {\n  }\n  B 2\n}\n";
        let t = parse(src, ParseMode::Strict).unwrap();
        assert_eq!(print(&t), src);
    }

    #[test]
    fn latin1_bytes() {
        let bytes = b"Model {\n  Name \"caf\xe9\"\n}\n";
        assert_eq!(
            parse_bytes(bytes, ParseMode::Strict).unwrap_err().kind,
            ParseErrorKind::InvalidUtf8
        );
        let p = parse_bytes(bytes, ParseMode::Lenient).unwrap();
        assert_eq!(p.diagnostics.len(), 1);
        assert_eq!(p.tree.root.param_text("Name").unwrap(), "caf\u{fffd}");
    }

    #[test]
    fn missing_value() {
        let src = "Model {\n  Lonely\n}\n";
        assert_eq!(
            parse(src, ParseMode::Strict).unwrap_err().kind,
            ParseErrorKind::MissingValue
        );
        let t = parse(src, ParseMode::Lenient).unwrap();
        assert!(t.root.items.is_empty());
    }

    #[test]
    fn tokenize_examples() {
        let toks = tokenize("Model {\n Name \"m\" }");
        assert_eq!(toks.0, vec!["Model", "{", "Name", "\"m\"", "}"]);
        assert_eq!(toks.len(), 5);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a{b}").0, vec!["a", "{", "b", "}"]);
        assert_eq!(tokenize("{{}}").0, vec!["{", "{", "}", "}"]);
    }

    #[test]
    fn crlf_lines() {
        let t = parse("Model {\r\n  Name \"m\"\r\n}\r\n", ParseMode::Strict).unwrap();
        assert_eq!(t.root.param_text("Name").unwrap(), "m");
    }
}
