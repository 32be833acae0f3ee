use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::restore_tree;
use crate::syntax::{parse_with_diagnostics, ParseMode, Section, SyntaxTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Rule identifiers and what they flag.
pub const RULE_CATALOG: &[(&str, Severity, &str)] = &[
    ("SYSTEM", Severity::Error, "the model has no System section"),
    ("ORDER", Severity::Error, "a Block section appears after a Line section"),
    ("FIELDS", Severity::Error, "a Block lacks Name or BlockType, or a Line lacks a source or any destination"),
    ("REF", Severity::Error, "a line endpoint names a block that does not exist"),
    ("PORT", Severity::Error, "a port index is not an integer of at least 1"),
    ("UNIQ", Severity::Error, "two blocks share a name"),
    ("SYNTAX", Severity::Error, "the text needed lenient repairs to parse"),
    ("SCOPE-PORTS", Severity::Warning, "a non-floating Scope block has the scalar port value 0"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub rule: String,
    pub message: String,
    /// Section path such as `Model/System/Line[2]/Branch[0]`.
    pub location: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at {}: {}", self.severity, self.rule, self.location, self.message)
    }
}

struct Collector {
    out: Vec<Finding>,
}

impl Collector {
    fn push(&mut self, severity: Severity, rule: &str, location: &str, message: String) {
        self.out.push(Finding {
            severity,
            rule: rule.to_string(),
            message,
            location: location.to_string(),
        });
    }

    fn error(&mut self, rule: &str, location: &str, message: String) {
        self.push(Severity::Error, rule, location, message);
    }
}

/// Runs every rule of [`RULE_CATALOG`] except `SYNTAX` over a parsed model.
pub fn static_check(tree: &SyntaxTree) -> Vec<Finding> {
    let mut c = Collector { out: Vec::new() };
    let root = &tree.root;
    let (system, sys_path) = match root.child("System") {
        Some(s) => (s, format!("{}/System", root.name)),
        None => {
            c.error("SYSTEM", &root.name, "no System section".into());
            (root, root.name.clone())
        }
    };

    let mut counters: HashMap<&str, usize> = HashMap::new();
    let mut located = Vec::new();
    for s in system.children() {
        let n = counters.entry(s.name.as_str()).or_default();
        located.push((s, format!("{sys_path}/{}[{n}]", s.name)));
        *n += 1;
    }

    let mut names = HashSet::new();
    for (s, loc) in located.iter().filter(|(s, _)| s.name == "Block") {
        if s.param("BlockType").is_none() {
            c.error("FIELDS", loc, "block has no BlockType".into());
        }
        match s.param_text("Name") {
            None => c.error("FIELDS", loc, "block has no Name".into()),
            Some(name) => {
                if !names.insert(name.clone()) {
                    c.error("UNIQ", loc, format!("block name `{name}` is already defined"));
                }
            }
        }
        check_scope_ports(s, loc, &mut c);
    }

    let mut seen_line = false;
    for (s, loc) in &located {
        match s.name.as_str() {
            "Line" => {
                seen_line = true;
                check_line(s, loc, &names, &mut c);
            }
            "Block" if seen_line => c.error("ORDER", loc, "block defined after a line".into()),
            _ => {}
        }
    }
    c.out
}

fn check_port(sec: &Section, key: &str, loc: &str, c: &mut Collector) {
    match sec.param_text(key) {
        None => c.error("FIELDS", loc, format!("missing {key}")),
        Some(raw) => {
            if !matches!(raw.trim().parse::<u32>(), Ok(p) if p >= 1) {
                c.error("PORT", loc, format!("{key} `{raw}` is not a port index >= 1"));
            }
        }
    }
}

fn check_ref(sec: &Section, key: &str, loc: &str, names: &HashSet<String>, c: &mut Collector) {
    if let Some(name) = sec.param_text(key) {
        if !names.contains(&name) {
            c.error("REF", loc, format!("{key} `{name}` is not a defined block"));
        }
    }
}

fn check_line(line: &Section, loc: &str, names: &HashSet<String>, c: &mut Collector) {
    if line.param("SrcBlock").is_none() {
        c.error("FIELDS", loc, "missing SrcBlock".into());
    }
    check_ref(line, "SrcBlock", loc, names, c);
    check_port(line, "SrcPort", loc, c);
    let destinations = check_destinations(line, loc, names, c);
    if destinations == 0 {
        c.error("FIELDS", loc, "line has no destination".into());
    }
}

fn check_destinations(sec: &Section, loc: &str, names: &HashSet<String>, c: &mut Collector) -> usize {
    let mut count = 0;
    if sec.param("DstBlock").is_some() {
        count += 1;
        check_ref(sec, "DstBlock", loc, names, c);
        check_port(sec, "DstPort", loc, c);
    }
    for (i, b) in sec.children().filter(|s| s.name == "Branch").enumerate() {
        count += check_destinations(b, &format!("{loc}/Branch[{i}]"), names, c);
    }
    count
}

fn check_scope_ports(block: &Section, loc: &str, c: &mut Collector) {
    if block.param_text("BlockType").as_deref() != Some("Scope") {
        return;
    }
    let floating = block.param_text("Floating").is_some_and(|v| v.trim() == "on");
    let scalar_zero = block.param("Ports").is_some_and(|v| v.lexeme().trim() == "0");
    if !floating && scalar_zero {
        c.push(
            Severity::Warning,
            "SCOPE-PORTS",
            loc,
            "non-floating scope with scalar Ports 0 (expected a vector)".into(),
        );
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// A sampled text after lenient parsing, block-order restoration and the
/// static rules. `tree` is `None` when the text could not be parsed at all.
#[derive(Debug, Clone)]
pub struct CheckedSample {
    pub tree: Option<SyntaxTree>,
    pub findings: Vec<Finding>,
    pub parse_error: Option<String>,
}

impl CheckedSample {
    pub fn parsed(&self) -> bool {
        self.tree.is_some()
    }

    pub fn static_valid(&self) -> bool {
        self.tree.is_some() && !has_errors(&self.findings)
    }
}

/// Parses, restores and checks a sample. Every lenient repair becomes a
/// `SYNTAX` error finding.
pub fn check_text(text: &str) -> CheckedSample {
    match parse_with_diagnostics(text, ParseMode::Lenient) {
        Err(e) => CheckedSample {
            tree: None,
            findings: Vec::new(),
            parse_error: Some(e.to_string()),
        },
        Ok(parsed) => {
            let tree = restore_tree(&parsed.tree);
            let mut findings: Vec<Finding> = parsed
                .diagnostics
                .iter()
                .map(|d| Finding {
                    severity: Severity::Error,
                    rule: "SYNTAX".into(),
                    message: d.message.clone(),
                    location: format!("line {}", d.line),
                })
                .collect();
            findings.extend(static_check(&tree));
            CheckedSample {
                tree: Some(tree),
                findings,
                parse_error: None,
            }
        }
    }
}
