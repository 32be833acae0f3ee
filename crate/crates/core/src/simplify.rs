//! Corpus preprocessing: strip layout, defaults and annotation content,
//! filter out non-flat models and rename blocks to short sequential names.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::kv::{self, KvError};
use crate::syntax::{Node, ParamValue, Section, SyntaxTree};

/// Layout and bookkeeping parameters dropped by default.
pub const DEFAULT_PARAM_BLOCKLIST: &[&str] = &[
    // layout
    "Position",
    "ZOrder",
    "Location",
    "Points",
    "Orientation",
    "NamePlacement",
    "ShowName",
    "HideAutomaticName",
    "DropShadow",
    "FontName",
    "FontSize",
    "FontWeight",
    "FontAngle",
    "ForegroundColor",
    "BackgroundColor",
    "ScreenColor",
    "ZoomFactor",
    "ShowPortLabels",
    "Open",
    "PaperOrientation",
    "PaperPositionMode",
    "PaperType",
    "PaperUnits",
    "TiledPaperMargins",
    "TiledPageScale",
    "ShowPageBoundaries",
    "ReportName",
    "ModelBrowserVisibility",
    "ModelBrowserWidth",
    "Labels",
    // authoring metadata and configuration defaults
    "SID",
    "SIDHighWatermark",
    "SIDPrevWatermark",
    "Version",
    "SavedCharacterEncoding",
    "Description",
    "Created",
    "Creator",
    "UpdateHistory",
    "ModifiedByFormat",
    "LastModifiedBy",
    "ModifiedDateFormat",
    "LastModifiedDate",
    "RTWModifiedTimeStamp",
    "ModelVersionFormat",
    "ConfigurationManager",
    "LastSavedArchitecture",
    "HandleVisibility",
    "ExecutionOrder",
    "SampleTimeColors",
    "WideLines",
    "ShowLineDimensions",
    "ShowPortDataTypes",
    "ShowStorageClass",
    "BlockNameDataTip",
    "BlockParametersDataTip",
    "BlockDescriptionStringDataTip",
    "ToolBar",
    "StatusBar",
    "BrowserShowLibraryLinks",
    "BrowserLookUnderMasks",
    "Tag",
];

/// Defaults, configuration-set and annotation sections dropped by default.
pub const DEFAULT_SECTION_BLOCKLIST: &[&str] = &[
    "BlockDefaults",
    "BlockParameterDefaults",
    "AnnotationDefaults",
    "LineDefaults",
    "MaskDefaults",
    "MaskParameterDefaults",
    "BlockDiagramDefaults",
    "SystemDefaults",
    "Array",
    "Simulink.ConfigSet",
    "ConfigurationSet",
    "GraphicalInterface",
    "Annotation",
    "DataDictionary",
    "WindowsInfo",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplifyPolicy {
    pub param_blocklist: BTreeSet<String>,
    pub section_blocklist: BTreeSet<String>,
    pub strip_comments: bool,
    pub collapse_whitespace: bool,
}

impl Default for SimplifyPolicy {
    fn default() -> Self {
        SimplifyPolicy {
            param_blocklist: DEFAULT_PARAM_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            section_blocklist: DEFAULT_SECTION_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            strip_comments: true,
            collapse_whitespace: true,
        }
    }
}

impl SimplifyPolicy {
    /// A policy that changes nothing.
    pub fn keep_everything() -> Self {
        SimplifyPolicy {
            param_blocklist: BTreeSet::new(),
            section_blocklist: BTreeSet::new(),
            strip_comments: false,
            collapse_whitespace: false,
        }
    }

    pub fn keep_param(&mut self, key: &str) {
        self.param_blocklist.remove(key);
    }

    pub fn drop_param(&mut self, key: &str) {
        self.param_blocklist.insert(key.to_string());
    }

    /// Reads `key = value` lines on top of the defaults.
    ///
    /// Recognized keys: `param_blocklist` and `section_blocklist` (replace
    /// the list, comma-separated), `drop_param`, `keep_param`,
    /// `drop_section`, `keep_section` (comma-separated edits),
    /// `strip_comments` and `collapse_whitespace` (`true`/`false`).
    pub fn from_config_str(text: &str) -> Result<Self, KvError> {
        let mut policy = SimplifyPolicy::default();
        for entry in kv::parse(text)? {
            let list = || kv::split_list(&entry.value);
            match entry.key.as_str() {
                "param_blocklist" => policy.param_blocklist = list().collect(),
                "section_blocklist" => policy.section_blocklist = list().collect(),
                "drop_param" => policy.param_blocklist.extend(list()),
                "keep_param" => list().for_each(|k| {
                    policy.param_blocklist.remove(&k);
                }),
                "drop_section" => policy.section_blocklist.extend(list()),
                "keep_section" => list().for_each(|k| {
                    policy.section_blocklist.remove(&k);
                }),
                "strip_comments" => policy.strip_comments = entry.bool_value()?,
                "collapse_whitespace" => policy.collapse_whitespace = entry.bool_value()?,
                _ => return Err(entry.unknown_key()),
            }
        }
        Ok(policy)
    }

    pub fn from_config_file(path: &Path) -> Result<Self, KvError> {
        let text = std::fs::read_to_string(path).map_err(|e| KvError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_config_str(&text)
    }
}

#[derive(Debug, Clone)]
pub struct Simplified {
    pub tree: SyntaxTree,
    pub removed_params: usize,
    pub removed_sections: usize,
    pub removed_comments: usize,
    /// No `Block` section is left in the system section.
    pub empty_after_simplify: bool,
}

pub fn simplify(tree: &SyntaxTree, policy: &SimplifyPolicy) -> Simplified {
    let mut out = Simplified {
        tree: tree.clone(),
        removed_params: 0,
        removed_sections: 0,
        removed_comments: 0,
        empty_after_simplify: false,
    };
    let mut root = std::mem::replace(&mut out.tree.root, Section::new(""));
    strip_section(&mut root, policy, &mut out);
    out.tree.root = root;
    out.empty_after_simplify = !out.tree.system().children().any(|s| s.name == "Block");
    out
}

fn strip_section(section: &mut Section, policy: &SimplifyPolicy, stats: &mut Simplified) {
    section.items.retain(|node| match node {
        Node::Param(p) if policy.param_blocklist.contains(&p.key) => {
            stats.removed_params += 1;
            false
        }
        Node::Section(s) if policy.section_blocklist.contains(&s.name) => {
            stats.removed_sections += 1;
            false
        }
        Node::Comment(_) if policy.strip_comments => {
            stats.removed_comments += 1;
            false
        }
        _ => true,
    });
    for node in &mut section.items {
        match node {
            Node::Section(s) => strip_section(s, policy, stats),
            Node::Param(p) if policy.collapse_whitespace => match &mut p.value {
                ParamValue::Bare(s) | ParamValue::Vector(s) => {
                    *s = s.split_whitespace().collect::<Vec<_>>().join(" ");
                }
                ParamValue::Quoted(_) => {}
            },
            _ => {}
        }
    }
}

/// Bijective base-26 name for a zero-based index: 0 → `a`, 25 → `z`,
/// 26 → `aa`, 701 → `zz`, 702 → `aaa`.
pub fn index_to_name(index: u64) -> String {
    let mut n = index + 1;
    let mut rev = Vec::new();
    while n > 0 {
        n -= 1;
        rev.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    rev.reverse();
    String::from_utf8(rev).expect("ascii")
}

/// Original block name to short name, in renaming order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenameMap {
    pairs: Vec<(String, String)>,
    lookup: HashMap<String, usize>,
}

impl RenameMap {
    pub fn get(&self, original: &str) -> Option<&str> {
        self.lookup.get(original).map(|&i| self.pairs[i].1.as_str())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn push(&mut self, original: String) -> Result<(), SimplifyError> {
        if self.lookup.contains_key(&original) {
            return Err(SimplifyError::DuplicateOriginalName { name: original });
        }
        let short = index_to_name(self.pairs.len() as u64);
        self.lookup.insert(original.clone(), self.pairs.len());
        self.pairs.push((original, short));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimplifyError {
    #[error("block name `{name}` occurs more than once")]
    DuplicateOriginalName { name: String },
}

/// Renames every block to a short sequential name. Names listed in `order`
/// are numbered first; blocks it does not mention follow in file order.
/// `Name` parameters of blocks and `SrcBlock`/`DstBlock` references
/// (branches included) are rewritten together.
pub fn rename_identifiers(tree: &SyntaxTree, order: &[String]) -> Result<(SyntaxTree, RenameMap), SimplifyError> {
    let system = tree.system();
    let mut defined = HashSet::new();
    let mut file_order = Vec::new();
    for block in system.children().filter(|s| s.name == "Block") {
        if let Some(name) = block.param_text("Name") {
            if !defined.insert(name.clone()) {
                return Err(SimplifyError::DuplicateOriginalName { name });
            }
            file_order.push(name);
        }
    }

    let mut map = RenameMap::default();
    for name in order {
        map.push(name.clone())?;
    }
    for name in file_order {
        if map.get(&name).is_none() {
            map.push(name)?;
        }
    }

    let mut renamed = tree.clone();
    for sec in renamed.system_mut().children_mut() {
        match sec.name.as_str() {
            "Block" => rename_param(sec, "Name", &map),
            "Line" => rename_line(sec, &map),
            _ => {}
        }
    }
    Ok((renamed, map))
}

fn rename_param(sec: &mut Section, key: &str, map: &RenameMap) {
    for node in &mut sec.items {
        if let Node::Param(p) = node {
            if p.key == key {
                if let Some(short) = map.get(&p.value.text()) {
                    p.value = ParamValue::quoted(short);
                }
            }
        }
    }
}

fn rename_line(sec: &mut Section, map: &RenameMap) {
    rename_param(sec, "SrcBlock", map);
    rename_param(sec, "DstBlock", map);
    for child in sec.children_mut().filter(|s| s.name == "Branch") {
        rename_line(child, map);
    }
}

/// Block types that make a model hierarchical or depend on external code.
pub const NON_FLAT_BLOCK_TYPES: &[&str] = &[
    "SubSystem",
    "Reference",
    "ModelReference",
    "S-Function",
    "M-S-Function",
];

/// Parameters that link a block to a library.
pub const LIBRARY_LINK_PARAMS: &[&str] = &["SourceBlock", "ReferenceBlock", "LibraryVersion", "LinkData"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flatness {
    pub flat: bool,
    pub reasons: Vec<String>,
}

/// Checks every `Block` in the tree for hierarchy, S-function or library
/// dependencies.
pub fn is_flat_no_deps(tree: &SyntaxTree) -> Flatness {
    let mut reasons = Vec::new();
    visit_blocks(&tree.root, &mut |block| {
        let name = block.param_text("Name").unwrap_or_else(|| "<unnamed>".into());
        if let Some(ty) = block.param_text("BlockType") {
            if NON_FLAT_BLOCK_TYPES.contains(&ty.as_str()) {
                reasons.push(format!("block `{name}` has type {ty}"));
            }
        }
        for key in LIBRARY_LINK_PARAMS {
            if block.param(key).is_some() {
                reasons.push(format!("block `{name}` links a library via {key}"));
            }
        }
    });
    Flatness {
        flat: reasons.is_empty(),
        reasons,
    }
}

fn visit_blocks(section: &Section, f: &mut impl FnMut(&Section)) {
    for child in section.children() {
        if child.name == "Block" {
            f(child);
        }
        visit_blocks(child, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::syntax::{parse, print, tokenize, ParseMode};

    const EXPORT: &str = "Model {
  Name \"demo\"
  # generated
  BlockDefaults {
    ForegroundColor \"black\"
  }
  System {
    Name \"demo\"
    Location [10, 10, 400, 300]
    Block {
      BlockType Sin
      Name \"Sine Wave\"
      Position [100, 50, 130, 80]
      ZOrder 1
    }
    Block {
      BlockType Scope
      Name \"Scope\"
      Position   [200, 50, 230, 80]
    }
    Line {
      SrcBlock \"Sine Wave\"
      SrcPort 1
      DstBlock \"Scope\"
      DstPort 1
    }
    Annotation {
      Name \"note\"
      Position [1, 2, 3, 4]
    }
  }
}
";

    fn tree(src: &str) -> SyntaxTree {
        parse(src, ParseMode::Strict).unwrap()
    }

    #[test]
    fn drops_position() {
        let out = simplify(&tree(EXPORT), &SimplifyPolicy::default());
        let sys = out.tree.system();
        let sine = sys.child("Block").unwrap();
        assert!(sine.param("Position").is_none());
        assert_eq!(sine.param_text("Name").unwrap(), "Sine Wave");
        assert!(sys.child("Annotation").is_none());
        assert!(out.tree.root.child("BlockDefaults").is_none());
        assert_eq!(out.removed_comments, 1);
        assert!(!out.empty_after_simplify);
        let before = build_graph(&tree(EXPORT), ParseMode::Strict).unwrap();
        let after = build_graph(&out.tree, ParseMode::Strict).unwrap();
        assert_eq!(before.edges(), after.edges());
        assert!(tokenize(&print(&out.tree)).len() < tokenize(EXPORT).len());
    }

    #[test]
    fn annotation_only_model_is_empty() {
        let src = "Model {\n  System {\n    Annotation {\n      Name \"x\"\n    }\n  }\n}\n";
        let out = simplify(&tree(src), &SimplifyPolicy::default());
        assert!(out.empty_after_simplify);
        assert_eq!(out.removed_sections, 1);
    }

    #[test]
    fn nothing_to_remove_is_identity() {
        let src = "Model {\n  System {\n    Block {\n      BlockType Gain\n      Name \"g\"\n    }\n  }\n}\n";
        let t = tree(src);
        let out = simplify(&t, &SimplifyPolicy::default());
        assert_eq!(out.tree, t);
        assert_eq!(out.removed_params + out.removed_sections, 0);
    }

    #[test]
    fn collapse_whitespace_in_vectors() {
        let mut policy = SimplifyPolicy::default();
        policy.keep_param("Position");
        let out = simplify(&tree(EXPORT), &policy);
        let scope = out.tree.system().children().nth(1).unwrap();
        assert_eq!(scope.param("Position"), Some(&ParamValue::Vector("[200, 50, 230, 80]".into())));
    }

    #[test]
    fn names() {
        assert_eq!(index_to_name(0), "a");
        assert_eq!(index_to_name(1), "b");
        assert_eq!(index_to_name(25), "z");
        assert_eq!(index_to_name(26), "aa");
        assert_eq!(index_to_name(27), "ab");
        assert_eq!(index_to_name(701), "zz");
        assert_eq!(index_to_name(702), "aaa");
    }

    /// Enumerates a..z, aa..zz, aaa.. by length then lexicographic order.
    fn brute_force_names(limit: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut len = 1;
        while out.len() < limit {
            let total = 26usize.pow(len);
            for mut k in 0..total {
                let mut s = vec![b'a'; len as usize];
                for pos in (0..len as usize).rev() {
                    s[pos] = b'a' + (k % 26) as u8;
                    k /= 26;
                }
                out.push(String::from_utf8(s).unwrap());
                if out.len() == limit {
                    break;
                }
            }
            len += 1;
        }
        out
    }

    #[test]
    fn names_match_enumeration() {
        let expected = brute_force_names(20_000);
        for (i, name) in expected.iter().enumerate() {
            assert_eq!(&index_to_name(i as u64), name);
        }
    }

    #[test]
    fn names_are_injective() {
        let set: HashSet<String> = (0..1_000_000u64).map(index_to_name).collect();
        assert_eq!(set.len(), 1_000_000);
    }

    const XYZ: &str = "Model {
  System {
    Block {
      BlockType Gain
      Name \"Z\"
    }
    Block {
      BlockType Sin
      Name \"X\"
    }
    Block {
      BlockType Scope
      Name \"Y\"
    }
    Line {
      SrcBlock \"X\"
      SrcPort 1
      DstBlock \"Z\"
      DstPort 1
    }
    Line {
      SrcBlock \"Z\"
      SrcPort 1
      Branch {
        DstBlock \"Y\"
        DstPort 1
      }
    }
  }
}
";

    #[test]
    fn rename_in_given_order() {
        let order: Vec<String> = ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        let (renamed, map) = rename_identifiers(&tree(XYZ), &order).unwrap();
        assert_eq!(map.get("X"), Some("a"));
        assert_eq!(map.get("Y"), Some("b"));
        assert_eq!(map.get("Z"), Some("c"));
        let g = build_graph(&renamed, ParseMode::Strict).unwrap();
        let names: Vec<_> = g.blocks().iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["c", "a", "b"]);
        let edges: Vec<_> = g
            .edges()
            .iter()
            .map(|e| (e.src.block.as_str(), e.dst.block.as_str()))
            .collect();
        assert_eq!(edges, [("a", "c"), ("c", "b")]);
    }

    #[test]
    fn single_block_becomes_a() {
        let src = "Model {\n  System {\n    Block {\n      BlockType Gain\n      Name \"Gain1\"\n    }\n  }\n}\n";
        let (renamed, _) = rename_identifiers(&tree(src), &[]).unwrap();
        assert_eq!(renamed.system().child("Block").unwrap().param_text("Name").unwrap(), "a");
    }

    #[test]
    fn duplicate_names_rejected() {
        let src = XYZ.replace("Name \"Y\"", "Name \"X\"");
        assert_eq!(
            rename_identifiers(&tree(&src), &[]).unwrap_err(),
            SimplifyError::DuplicateOriginalName { name: "X".into() }
        );
    }

    #[test]
    fn flatness() {
        assert!(is_flat_no_deps(&tree(XYZ)).flat);
        let sub = XYZ.replace("BlockType Gain", "BlockType SubSystem");
        let f = is_flat_no_deps(&tree(&sub));
        assert!(!f.flat);
        assert_eq!(f.reasons.len(), 1);
        assert!(f.reasons[0].contains("`Z`"));
        let sfun = XYZ.replace("BlockType Gain", "BlockType S-Function");
        assert!(!is_flat_no_deps(&tree(&sfun)).flat);
        let linked = XYZ.replace("BlockType Gain", "BlockType Gain\n      SourceBlock \"lib/Gain\"");
        assert!(!is_flat_no_deps(&tree(&linked)).flat);
    }

    #[test]
    fn policy_file() {
        let p = SimplifyPolicy::from_config_str(
            "# tweak\nkeep_param = Position, ZOrder\ndrop_param = Gain\nstrip_comments = false\n",
        )
        .unwrap();
        assert!(!p.param_blocklist.contains("Position"));
        assert!(!p.param_blocklist.contains("ZOrder"));
        assert!(p.param_blocklist.contains("Gain"));
        assert!(!p.strip_comments);
        assert!(SimplifyPolicy::from_config_str("bogus = 1\n").is_err());
        let p = SimplifyPolicy::from_config_str("param_blocklist = A,B\n").unwrap();
        assert_eq!(p.param_blocklist.len(), 2);
    }
}
