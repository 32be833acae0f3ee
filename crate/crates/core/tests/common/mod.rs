#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use mdlfuzz::canon::{block_section, line_section, Element};
use mdlfuzz::graph::{BlockNode, MetricsRecord, ModelGraph, PortEdge};
use mdlfuzz::syntax::{Node, Param, ParamValue, Section, SyntaxTree};
use proptest::prelude::*;

pub const BLOCK_TYPES: &[&str] = &["Sin", "Gain", "Sum", "Scope", "Constant", "UnitDelay", "Outport"];

// ---------------------------------------------------------------------------
// syntax trees

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => "[A-Za-z][A-Za-z0-9_]{0,9}",
        1 => "[A-Z][a-z]{1,6}\\.[A-Z][A-Za-z]{1,6}",
        1 => "\\$[A-Z][A-Za-z]{1,8}",
    ]
}

fn value() -> impl Strategy<Value = ParamValue> {
    prop_oneof![
        3 => prop::collection::vec("[A-Za-z0-9_.+*%:/<>-]{1,8}", 1..=3)
            .prop_map(|w| ParamValue::Bare(w.join(" "))),
        3 => "[ -~]{0,16}".prop_map(|s| ParamValue::quoted(&s)),
        1 => "([A-Za-z ]{0,4}\"){0,2}[A-Za-z ]{0,4}"
            .prop_map(|s| ParamValue::Quoted(format!("\"{}\"", s.replace('"', "\"\"")))),
        2 => "[0-9 ,;.-]{0,14}".prop_map(|s| ParamValue::Vector(format!("[{s}]"))),
    ]
}

fn leaf_node() -> impl Strategy<Value = Node> {
    prop_oneof![
        6 => (ident(), value()).prop_map(|(k, v)| Node::Param(Param::new(k, v))),
        1 => "#[ -~]{0,20}".prop_map(|c| Node::Comment(c.trim_end().to_string())),
    ]
}

fn section() -> impl Strategy<Value = Section> {
    let leaf = (ident(), prop::collection::vec(leaf_node(), 0..6)).prop_map(|(name, items)| Section { name, items });
    leaf.prop_recursive(3, 48, 6, |inner| {
        (
            ident(),
            prop::collection::vec(prop_oneof![3 => leaf_node(), 2 => inner.prop_map(Node::Section)], 0..6),
        )
            .prop_map(|(name, items)| Section { name, items })
    })
}

/// Random `Model { ... }` trees within the printable grammar.
pub fn syntax_tree() -> impl Strategy<Value = SyntaxTree> {
    prop::collection::vec(prop_oneof![2 => leaf_node(), 1 => section().prop_map(Node::Section)], 0..8)
        .prop_map(|items| SyntaxTree::new(Section {
            name: "Model".into(),
            items,
        }))
}

// ---------------------------------------------------------------------------
// graphs

#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub names: Vec<String>,
    pub types: Vec<usize>,
    /// (src, dst, src port, dst port)
    pub edges: Vec<(usize, usize, u32, u32)>,
}

impl GraphSpec {
    pub fn build(&self) -> ModelGraph {
        let blocks = self
            .names
            .iter()
            .zip(&self.types)
            .map(|(n, &t)| BlockNode::new(n.clone(), BLOCK_TYPES[t]))
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|&(s, d, sp, dp)| PortEdge::new((&self.names[s], sp), (&self.names[d], dp)))
            .collect();
        ModelGraph::new(blocks, edges).expect("spec graphs are well formed")
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.names.len()];
        for &(s, d, _, _) in &self.edges {
            adj[s].push(d);
        }
        adj
    }
}

fn names(n: usize) -> impl Strategy<Value = Vec<String>> {
    prop::sample::select(vec!["B", "Gain ", "blk_", "Sine Wave"])
        .prop_map(move |prefix| (0..n).map(|i| format!("{prefix}{i}")).collect())
}

fn spec_with(n: usize, edges: impl Strategy<Value = Vec<(usize, usize, u32, u32)>>) -> impl Strategy<Value = GraphSpec> {
    (names(n), prop::collection::vec(0..BLOCK_TYPES.len(), n), edges)
        .prop_map(|(names, types, edges)| GraphSpec { names, types, edges })
}

fn random_edges(n: usize, max: usize) -> impl Strategy<Value = Vec<(usize, usize, u32, u32)>> {
    prop::collection::vec((0..n, 0..n, 1u32..=2, 1u32..=3), 0..=max)
}

/// Random graphs with up to `max_blocks` blocks. A share of the cases have
/// no edges at all, or a cycle through every block so nothing is a source.
pub fn graph_spec(max_blocks: usize) -> impl Strategy<Value = GraphSpec> {
    let random = (1..=max_blocks).prop_flat_map(|n| spec_with(n, random_edges(n, 2 * n)));
    let dangling = (1..=max_blocks).prop_flat_map(|n| spec_with(n, Just(Vec::new())));
    let sourceless = (2..=max_blocks).prop_flat_map(|n| {
        let ring: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1, 1)).collect();
        let extra = random_edges(n, n);
        spec_with(
            n,
            extra.prop_map(move |mut e| {
                e.extend(ring.iter().copied());
                e
            }),
        )
    });
    prop_oneof![6 => random, 1 => dangling, 1 => sourceless]
}

/// The graph written as a model file in file order: blocks, then lines.
pub fn graph_tree(g: &ModelGraph) -> SyntaxTree {
    let mut system = Section::new("System");
    for b in g.blocks() {
        system = system.with_child(block_section(b));
    }
    for e in g.edges() {
        system = system.with_child(line_section(e));
    }
    SyntaxTree::new(Section::new("Model").with_child(system))
}

pub fn edge_multiset(edges: &[PortEdge], rename: impl Fn(&str) -> String) -> BTreeMap<(String, u32, String, u32), usize> {
    let mut m = BTreeMap::new();
    for e in edges {
        *m.entry((rename(&e.src.block), e.src.port, rename(&e.dst.block), e.dst.port))
            .or_default() += 1;
    }
    m
}

/// Same blocks (name, type, parameters) and the same edge multiset once
/// `rename` maps names of `b` back to names of `a`.
pub fn isomorphic(a: &ModelGraph, b: &ModelGraph, rename: impl Fn(&str) -> String) -> bool {
    let key = |blk: &BlockNode, r: &dyn Fn(&str) -> String| {
        let params: Vec<_> = blk
            .params
            .iter()
            .filter(|p| p.key != "Name")
            .map(|p| (p.key.clone(), p.value.lexeme().to_string()))
            .collect();
        (r(&blk.name), blk.block_type.clone(), params)
    };
    let id = |s: &str| s.to_string();
    let mut ka: Vec<_> = a.blocks().iter().map(|x| key(x, &id)).collect();
    let mut kb: Vec<_> = b.blocks().iter().map(|x| key(x, &rename)).collect();
    ka.sort();
    kb.sort();
    ka == kb && edge_multiset(a.edges(), id) == edge_multiset(b.edges(), &rename)
}

// ---------------------------------------------------------------------------
// oracles

/// Straight transcription of the breadth-first rewrite over a plain edge
/// list: sources queue and remaining-blocks queue, run while either is
/// non-empty, sources first.
pub fn reference_bfs(spec: &GraphSpec) -> Vec<Element> {
    let g = spec.build();
    let n = spec.names.len();
    let indeg: Vec<usize> = (0..n)
        .map(|b| spec.edges.iter().filter(|e| e.1 == b).count())
        .collect();
    let mut s: VecDeque<usize> = (0..n).filter(|&b| indeg[b] == 0).collect();
    let mut rest: VecDeque<usize> = (0..n).filter(|&b| indeg[b] > 0).collect();
    let mut seen_b = HashSet::new();
    let mut seen_e = HashSet::new();
    let mut out = Vec::new();
    while !s.is_empty() || !rest.is_empty() {
        let start = s.pop_front().or_else(|| rest.pop_front()).unwrap();
        if seen_b.contains(&start) {
            continue;
        }
        let mut q = VecDeque::from([start]);
        while let Some(cur) = q.pop_front() {
            if !seen_b.insert(cur) {
                continue;
            }
            out.push(Element::Block(g.blocks()[cur].clone()));
            let mut nbrs = Vec::new();
            let outgoing = spec.edges.iter().enumerate().filter(|(_, e)| e.0 == cur).map(|(i, e)| (i, e.1));
            let incoming = spec.edges.iter().enumerate().filter(|(_, e)| e.1 == cur).map(|(i, e)| (i, e.0));
            for (i, other) in outgoing.chain(incoming) {
                if seen_e.insert(i) {
                    out.push(Element::Edge(g.edges()[i].clone()));
                }
                nbrs.push(other);
            }
            for nb in nbrs {
                if !seen_b.contains(&nb) {
                    q.push_back(nb);
                }
            }
        }
    }
    out
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Union-find components and an all-simple-paths enumeration over subsets
/// of blocks (bitmask dynamic programming, at most 16 blocks).
pub fn brute_metrics(spec: &GraphSpec) -> MetricsRecord {
    let n = spec.names.len();
    assert!(n <= 16);
    let mut parent: Vec<usize> = (0..n).collect();
    for &(s, d, _, _) in &spec.edges {
        let (a, b) = (find(&mut parent, s), find(&mut parent, d));
        parent[a] = b;
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for b in 0..n {
        *sizes.entry(find(&mut parent, b)).or_default() += 1;
    }
    let comps: Vec<usize> = sizes.into_values().filter(|&s| s >= 2).collect();

    let adj = spec.adjacency();
    let indeg: Vec<usize> = (0..n).map(|b| spec.edges.iter().filter(|e| e.1 == b).count()).collect();
    let sink: Vec<bool> = (0..n).map(|b| adj[b].is_empty()).collect();
    // reach[mask] has bit v set when some simple path from a source visits
    // exactly `mask` and ends at v
    let mut reach = vec![0u32; 1 << n];
    for b in (0..n).filter(|&b| indeg[b] == 0) {
        reach[1 << b] |= 1 << b;
    }
    let mut best = 0;
    for mask in 1usize..(1 << n) {
        let ends = reach[mask];
        if ends == 0 {
            continue;
        }
        for v in (0..n).filter(|v| ends >> v & 1 == 1) {
            if sink[v] {
                best = best.max(mask.count_ones() as usize);
            }
            for &w in &adj[v] {
                if mask >> w & 1 == 0 {
                    reach[mask | 1 << w] |= 1 << w;
                }
            }
        }
    }
    MetricsRecord {
        blk_count: n,
        n_subgraphs: comps.len(),
        max_subgraph_size: comps.iter().copied().max().unwrap_or(0),
        max_src_sink_path: best,
    }
}

/// Checks the structural rewrite properties; `Err` names the first broken
/// one.
pub fn check_bfs_properties(spec: &GraphSpec, doc: &[Element]) -> Result<(), String> {
    let g = spec.build();
    let mut block_count: HashMap<&str, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut emitted = HashSet::new();
    for el in doc {
        match el {
            Element::Block(b) => {
                *block_count.entry(&b.name).or_default() += 1;
                emitted.insert(b.name.clone());
            }
            Element::Edge(e) => {
                if !emitted.contains(&e.src.block) && !emitted.contains(&e.dst.block) {
                    return Err(format!("edge {e:?} precedes both endpoints"));
                }
                edges.push(e.clone());
            }
        }
    }
    if block_count.len() != g.blocks().len() || block_count.values().any(|&c| c != 1) {
        return Err("blocks not emitted exactly once".into());
    }
    let id = |s: &str| s.to_string();
    if edge_multiset(&edges, id) != edge_multiset(g.edges(), id) {
        return Err("edges not emitted exactly once".into());
    }
    let has_source = (0..g.blocks().len()).any(|b| g.in_degree(b) == 0);
    if has_source {
        match doc.first() {
            Some(Element::Block(b)) if g.in_degree(g.block_index(&b.name).unwrap()) == 0 => {}
            other => return Err(format!("first element {other:?} is not a source")),
        }
    }
    Ok(())
}
