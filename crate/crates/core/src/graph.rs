//! Block/edge multigraph extracted from a parsed model, and the four
//! structural metrics used to compare corpora: block count, connected
//! subgraphs, largest subgraph size and longest source-to-sink path.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{Param, ParseMode, Section, SyntaxTree};

/// Default cap on DFS node expansions for the longest-path search.
pub const DEFAULT_PATH_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockNode {
    pub name: String,
    pub block_type: String,
    /// Every parameter of the `Block` section in file order, `Name` and
    /// `BlockType` included.
    pub params: Vec<Param>,
    /// Nested sections of the block (port or mask data), kept verbatim.
    pub children: Vec<Section>,
}

impl BlockNode {
    pub fn new(name: impl Into<String>, block_type: impl Into<String>) -> Self {
        let name = name.into();
        let block_type = block_type.into();
        let params = vec![
            Param::new("BlockType", crate::syntax::ParamValue::bare(block_type.clone())),
            Param::new("Name", crate::syntax::ParamValue::quoted(&name)),
        ];
        BlockNode {
            name,
            block_type,
            params,
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub block: String,
    pub port: u32,
}

impl PortRef {
    pub fn new(block: impl Into<String>, port: u32) -> Self {
        PortRef {
            block: block.into(),
            port,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortEdge {
    pub src: PortRef,
    pub dst: PortRef,
}

impl PortEdge {
    pub fn new(src: (&str, u32), dst: (&str, u32)) -> Self {
        PortEdge {
            src: PortRef::new(src.0, src.1),
            dst: PortRef::new(dst.0, dst.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line references unknown block `{name}`")]
    DanglingReference { name: String },
    #[error("block name `{name}` defined more than once")]
    DuplicateBlockName { name: String },
    #[error("block #{index} has no Name")]
    MissingBlockName { index: usize },
    #[error("line #{index}: {message}")]
    MalformedLine { index: usize, message: String },
    #[error("longest-path search exceeded its budget of {budget} expansions")]
    PathSearchBudgetExceeded { budget: u64 },
}

/// Problems lenient extraction stepped over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFinding {
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ModelGraph {
    blocks: Vec<BlockNode>,
    edges: Vec<PortEdge>,
    index: HashMap<String, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    findings: Vec<GraphFinding>,
}

impl ModelGraph {
    /// Builds a graph from explicit parts. Names must be unique and every
    /// edge endpoint must name a block.
    pub fn new(blocks: Vec<BlockNode>, edges: Vec<PortEdge>) -> Result<Self, GraphError> {
        let mut g = ModelGraph::default();
        for b in blocks {
            g.push_block(b)?;
        }
        for e in edges {
            for end in [&e.src, &e.dst] {
                if !g.index.contains_key(&end.block) {
                    return Err(GraphError::DanglingReference {
                        name: end.block.clone(),
                    });
                }
            }
            g.push_edge(e);
        }
        Ok(g)
    }

    fn push_block(&mut self, b: BlockNode) -> Result<(), GraphError> {
        if self.index.contains_key(&b.name) {
            return Err(GraphError::DuplicateBlockName { name: b.name });
        }
        self.index.insert(b.name.clone(), self.blocks.len());
        self.blocks.push(b);
        self.outgoing.push(Vec::new());
        self.incoming.push(Vec::new());
        Ok(())
    }

    fn push_edge(&mut self, e: PortEdge) {
        let id = self.edges.len();
        let s = self.index[&e.src.block];
        let d = self.index[&e.dst.block];
        self.outgoing[s].push(id);
        self.incoming[d].push(id);
        self.edges.push(e);
    }

    pub fn blocks(&self) -> &[BlockNode] {
        &self.blocks
    }

    pub fn edges(&self) -> &[PortEdge] {
        &self.edges
    }

    pub fn findings(&self) -> &[GraphFinding] {
        &self.findings
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Edge ids leaving block `b`, in file order.
    pub fn outgoing(&self, b: usize) -> &[usize] {
        &self.outgoing[b]
    }

    /// Edge ids entering block `b`, in file order.
    pub fn incoming(&self, b: usize) -> &[usize] {
        &self.incoming[b]
    }

    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        let edge = &self.edges[e];
        (self.index[&edge.src.block], self.index[&edge.dst.block])
    }

    pub fn in_degree(&self, b: usize) -> usize {
        self.incoming[b].len()
    }

    pub fn out_degree(&self, b: usize) -> usize {
        self.outgoing[b].len()
    }

    /// Successor block indices of `b`, deduplicated, in first-edge order.
    fn successors(&self, b: usize) -> Vec<usize> {
        let mut seen = Vec::new();
        for &e in &self.outgoing[b] {
            let d = self.edge_endpoints(e).1;
            if !seen.contains(&d) {
                seen.push(d);
            }
        }
        seen
    }
}

/// Extracts blocks and edges from the model's system section. Each `Line`
/// yields one edge per destination; nested `Branch` sections are expanded
/// recursively and share the line's source port.
pub fn build_graph(tree: &SyntaxTree, mode: ParseMode) -> Result<ModelGraph, GraphError> {
    let system = tree.system();
    let mut g = ModelGraph::default();

    for (i, sec) in system.children().filter(|s| s.name == "Block").enumerate() {
        let Some(name) = sec.param_text("Name") else {
            match mode {
                ParseMode::Strict => return Err(GraphError::MissingBlockName { index: i }),
                ParseMode::Lenient => {
                    g.findings.push(GraphFinding {
                        message: format!("block #{i} has no Name; skipped"),
                    });
                    continue;
                }
            }
        };
        let block = BlockNode {
            block_type: sec.param_text("BlockType").unwrap_or_default(),
            name,
            params: sec.params().cloned().collect(),
            children: sec.children().cloned().collect(),
        };
        match g.push_block(block) {
            Ok(()) => {}
            Err(e) if mode == ParseMode::Lenient => g.findings.push(GraphFinding {
                message: format!("{e}; later definition skipped"),
            }),
            Err(e) => return Err(e),
        }
    }

    for (i, sec) in system.children().filter(|s| s.name == "Line").enumerate() {
        let mut pending = Vec::new();
        if let Err(message) = line_edges(sec, &mut pending) {
            let err = GraphError::MalformedLine { index: i, message };
            match mode {
                ParseMode::Strict => return Err(err),
                ParseMode::Lenient => {
                    g.findings.push(GraphFinding {
                        message: format!("{err}; line skipped"),
                    });
                    continue;
                }
            }
        }
        for e in pending {
            let missing = [&e.src.block, &e.dst.block]
                .into_iter()
                .find(|n| !g.index.contains_key(*n))
                .cloned();
            match missing {
                None => g.push_edge(e),
                Some(name) => match mode {
                    ParseMode::Strict => return Err(GraphError::DanglingReference { name }),
                    ParseMode::Lenient => g.findings.push(GraphFinding {
                        message: format!("line #{i} references unknown block `{name}`; edge dropped"),
                    }),
                },
            }
        }
    }
    Ok(g)
}

fn parse_port(sec: &Section, key: &str) -> Result<u32, String> {
    let raw = sec
        .param_text(key)
        .ok_or_else(|| format!("missing {key}"))?;
    match raw.trim().parse::<u32>() {
        Ok(p) if p >= 1 => Ok(p),
        _ => Err(format!("{key} `{raw}` is not a positive port index")),
    }
}

fn line_edges(line: &Section, out: &mut Vec<PortEdge>) -> Result<(), String> {
    let src_block = line.param_text("SrcBlock").ok_or("missing SrcBlock")?;
    let src = PortRef::new(src_block, parse_port(line, "SrcPort")?);
    let before = out.len();
    collect_destinations(line, &src, out)?;
    if out.len() == before {
        return Err("line has no destination".into());
    }
    Ok(())
}

fn collect_destinations(sec: &Section, src: &PortRef, out: &mut Vec<PortEdge>) -> Result<(), String> {
    if let Some(dst_block) = sec.param_text("DstBlock") {
        let dst = PortRef::new(dst_block, parse_port(sec, "DstPort")?);
        out.push(PortEdge {
            src: src.clone(),
            dst,
        });
    }
    for branch in sec.children().filter(|s| s.name == "Branch") {
        collect_destinations(branch, src, out)?;
    }
    Ok(())
}

/// Weakly connected components with at least two blocks, each sorted by
/// block file order; components are ordered by their first block.
pub fn connected_components(g: &ModelGraph) -> Vec<Vec<String>> {
    let n = g.blocks.len();
    let mut comp = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(b) = stack.pop() {
            let neighbours = g.outgoing[b]
                .iter()
                .map(|&e| g.edge_endpoints(e).1)
                .chain(g.incoming[b].iter().map(|&e| g.edge_endpoints(e).0));
            for nb in neighbours {
                if comp[nb] == usize::MAX {
                    comp[nb] = id;
                    members.push(nb);
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    groups
        .into_iter()
        .filter(|m| m.len() >= 2)
        .map(|m| m.into_iter().map(|i| g.blocks[i].name.clone()).collect())
        .collect()
}

pub fn longest_source_sink_path(g: &ModelGraph) -> Result<usize, GraphError> {
    longest_source_sink_path_with_budget(g, DEFAULT_PATH_BUDGET)
}

/// Number of blocks on the longest simple directed path from an in-degree-0
/// block to an out-degree-0 block. Exhaustive DFS; fails rather than
/// truncating when more than `budget` nodes are expanded.
pub fn longest_source_sink_path_with_budget(g: &ModelGraph, budget: u64) -> Result<usize, GraphError> {
    let n = g.blocks.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|b| g.successors(b)).collect();
    let mut on_path = vec![false; n];
    let mut expansions = 0u64;
    let mut best = 0usize;

    struct Search<'a> {
        succ: &'a [Vec<usize>],
        sink: Vec<bool>,
        on_path: &'a mut [bool],
        expansions: &'a mut u64,
        budget: u64,
        best: &'a mut usize,
    }

    impl Search<'_> {
        fn visit(&mut self, b: usize, depth: usize) -> Result<(), GraphError> {
            *self.expansions += 1;
            if *self.expansions > self.budget {
                return Err(GraphError::PathSearchBudgetExceeded {
                    budget: self.budget,
                });
            }
            if self.sink[b] {
                *self.best = (*self.best).max(depth);
                return Ok(());
            }
            self.on_path[b] = true;
            for i in 0..self.succ[b].len() {
                let next = self.succ[b][i];
                if !self.on_path[next] {
                    self.visit(next, depth + 1)?;
                }
            }
            self.on_path[b] = false;
            Ok(())
        }
    }

    let sink: Vec<bool> = (0..n).map(|b| g.out_degree(b) == 0).collect();
    let mut search = Search {
        succ: &succ,
        sink,
        on_path: &mut on_path,
        expansions: &mut expansions,
        budget,
        best: &mut best,
    };
    for b in (0..n).filter(|&b| g.in_degree(b) == 0) {
        search.visit(b, 1)?;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricsRecord {
    pub blk_count: usize,
    pub n_subgraphs: usize,
    pub max_subgraph_size: usize,
    pub max_src_sink_path: usize,
}

pub fn metrics(g: &ModelGraph) -> Result<MetricsRecord, GraphError> {
    metrics_with_budget(g, DEFAULT_PATH_BUDGET)
}

pub fn metrics_with_budget(g: &ModelGraph, budget: u64) -> Result<MetricsRecord, GraphError> {
    let comps = connected_components(g);
    Ok(MetricsRecord {
        blk_count: g.blocks.len(),
        n_subgraphs: comps.len(),
        max_subgraph_size: comps.iter().map(Vec::len).max().unwrap_or(0),
        max_src_sink_path: longest_source_sink_path_with_budget(g, budget)?,
    })
}

pub const METRICS_CSV_HEADER: &str = "model,blk_count,n_subgraphs,max_subgraph_size,max_src_sink_path";

/// Renders `(model, metrics)` rows as CSV under [`METRICS_CSV_HEADER`].
pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = (&'a str, MetricsRecord)>) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for (model, m) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(model),
            m.blk_count,
            m.n_subgraphs,
            m.max_subgraph_size,
            m.max_src_sink_path
        );
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
