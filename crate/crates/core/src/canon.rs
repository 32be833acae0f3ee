//! Breadth-first rewrite of a model into interleaved block/edge order, and
//! the inverse restoration into the blocks-before-lines order model tools
//! expect.
//!
//! The rewrite keeps two queues: source blocks (in-degree 0) and all other
//! blocks, both in file order. While either is non-empty it takes the next
//! block (sources first) and runs a BFS from it. Visiting a block emits the
//! block, then every not-yet-emitted incident edge (outgoing before
//! incoming, each in file order), then enqueues the blocks on the far side
//! of those edges. Draining the non-source queue covers dangling blocks and
//! cyclic models that have no source at all.

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{build_graph, BlockNode, GraphError, ModelGraph, PortEdge};
use crate::simplify::{rename_identifiers, RenameMap, SimplifyError};
use crate::syntax::{self, Node, ParamValue, ParseError, ParseMode, Section, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Block(BlockNode),
    Edge(PortEdge),
}

/// Blocks and edges in emission order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalDoc {
    pub elements: Vec<Element>,
}

impl CanonicalDoc {
    pub fn block_order(&self) -> Vec<String> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Block(b) => Some(b.name.clone()),
                Element::Edge(_) => None,
            })
            .collect()
    }
}

pub fn bfs_restructure(g: &ModelGraph) -> CanonicalDoc {
    let n = g.blocks().len();
    let mut sources: VecDeque<usize> = (0..n).filter(|&b| g.in_degree(b) == 0).collect();
    let mut others: VecDeque<usize> = (0..n).filter(|&b| g.in_degree(b) != 0).collect();
    let mut block_done = vec![false; n];
    let mut edge_done = vec![false; g.edges().len()];
    let mut out = Vec::with_capacity(n + g.edges().len());

    while !sources.is_empty() || !others.is_empty() {
        let start = match sources.pop_front() {
            Some(b) => b,
            None => others.pop_front().expect("non-empty"),
        };
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            if block_done[cur] {
                continue;
            }
            block_done[cur] = true;
            others.retain(|&b| b != cur);
            out.push(Element::Block(g.blocks()[cur].clone()));

            let incident: Vec<(usize, usize)> = g
                .outgoing(cur)
                .iter()
                .map(|&e| (e, g.edge_endpoints(e).1))
                .chain(g.incoming(cur).iter().map(|&e| (e, g.edge_endpoints(e).0)))
                .collect();
            for &(e, _) in &incident {
                if !edge_done[e] {
                    edge_done[e] = true;
                    out.push(Element::Edge(g.edges()[e].clone()));
                }
            }
            for &(_, nb) in &incident {
                if !block_done[nb] {
                    queue.push_back(nb);
                }
            }
        }
    }
    CanonicalDoc { elements: out }
}

pub fn block_section(b: &BlockNode) -> Section {
    let mut sec = Section::new("Block");
    sec.items.extend(b.params.iter().cloned().map(Node::Param));
    sec.items.extend(b.children.iter().cloned().map(Node::Section));
    sec
}

pub fn line_section(e: &PortEdge) -> Section {
    Section::new("Line")
        .with_param("SrcBlock", ParamValue::quoted(&e.src.block))
        .with_param("SrcPort", ParamValue::bare(e.src.port.to_string()))
        .with_param("DstBlock", ParamValue::quoted(&e.dst.block))
        .with_param("DstPort", ParamValue::bare(e.dst.port.to_string()))
}

/// The document as a `Model { System { ... } }` tree in emission order.
pub fn canonical_tree(doc: &CanonicalDoc) -> SyntaxTree {
    let mut system = Section::new("System");
    for el in &doc.elements {
        let sec = match el {
            Element::Block(b) => block_section(b),
            Element::Edge(e) => line_section(e),
        };
        system.items.push(Node::Section(sec));
    }
    SyntaxTree::new(Section::new("Model").with_child(system))
}

pub fn emit_canonical(doc: &CanonicalDoc) -> String {
    syntax::print(&canonical_tree(doc))
}

#[derive(Debug, Error)]
pub enum CanonError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rename(#[from] SimplifyError),
}

/// Canonical text plus the renaming applied to produce it.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub text: String,
    pub tree: SyntaxTree,
    pub renames: RenameMap,
}

/// BFS-rewrites a (simplified) model and renames its blocks by appearance
/// order in the rewritten file.
pub fn canonicalize(tree: &SyntaxTree, mode: ParseMode, rename: bool) -> Result<Canonical, CanonError> {
    let graph = build_graph(tree, mode)?;
    let doc = bfs_restructure(&graph);
    let mut out = canonical_tree(&doc);
    let mut renames = RenameMap::default();
    if rename {
        let (renamed, map) = rename_identifiers(&out, &doc.block_order())?;
        out = renamed;
        renames = map;
    }
    Ok(Canonical {
        text: syntax::print(&out),
        tree: out,
        renames,
    })
}

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("sample cannot be parsed: {0}")]
    UnparsableSample(#[from] ParseError),
}

/// Parses a (possibly sampled) canonical-order model leniently and moves
/// every block definition ahead of everything else in the system section.
pub fn restore(text: &str) -> Result<SyntaxTree, RestoreError> {
    let tree = syntax::parse(text, ParseMode::Lenient)?;
    Ok(restore_tree(&tree))
}

/// Stable partition of the system section: parameters keep their place
/// relative to each other at the top, then blocks, then everything else
/// in original relative order.
pub fn restore_tree(tree: &SyntaxTree) -> SyntaxTree {
    let mut out = tree.clone();
    let system = out.system_mut();
    let items = std::mem::take(&mut system.items);
    let (mut front, mut blocks, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for node in items {
        match node {
            Node::Section(s) if s.name == "Block" => blocks.push(Node::Section(s)),
            Node::Section(_) => rest.push(node),
            Node::Param(_) | Node::Comment(_) if blocks.is_empty() && rest.is_empty() => front.push(node),
            other => rest.push(other),
        }
    }
    system.items = front;
    system.items.append(&mut blocks);
    system.items.append(&mut rest);
    out
}

/// True when no `Block` section follows a `Line` section in the system
/// section.
pub fn blocks_precede_lines(tree: &SyntaxTree) -> bool {
    let mut seen_line = false;
    for s in tree.system().children() {
        match s.name.as_str() {
            "Line" => seen_line = true,
            "Block" if seen_line => return false,
            _ => {}
        }
    }
    true
}
