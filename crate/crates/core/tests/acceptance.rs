//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::*;
use mdlfuzz::canon::{
    bfs_restructure, blocks_precede_lines, canonicalize, emit_canonical, restore, restore_tree, Element,
};
use mdlfuzz::graph::{build_graph, metrics, BlockNode, ModelGraph, PortEdge};
use mdlfuzz::harness::{
    fuzz_campaign, retriage, run_validator, CampaignConfig, CampaignReport, OutcomeKind, Triage,
};
use mdlfuzz::pipeline::{run_pipeline, PipelineConfig, Stage};
use mdlfuzz::sampler::{
    apply_temperature, generate, nucleus_filter, sample_token, NGramModel, SamplerConfig, ScriptedBackend,
    TokenDistribution, DEFAULT_EOT,
};
use mdlfuzz::simplify::{simplify, SimplifyPolicy};
use mdlfuzz::syntax::{parse, print, tokenize, ParseMode, SyntaxTree, TokenSeq};
use proptest::test_runner::{Config, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))
}

fn mdl_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mdl"))
        .collect();
    v.sort();
    v
}

// ---------------------------------------------------------------------------

fn parser_round_trip() -> Outcome {
    let start = Instant::now();
    runner(1000)
        .run(&syntax_tree(), |t| {
            let back = parse(&print(&t), ParseMode::Strict).map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
            proptest::prop_assert_eq!(back, t);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut fixtures = mdl_files(&corpus_dir().join("synthetic"));
    fixtures.extend(mdl_files(&corpus_dir().join("fixtures")));
    let mut byte_exact = 0;
    for f in &fixtures {
        let text = fs::read_to_string(f).unwrap();
        let tree = parse(&text, ParseMode::Strict).map_err(|e| format!("{}: {e}", f.display()))?;
        let printed = print(&tree);
        ensure(parse(&printed, ParseMode::Strict).as_ref() == Ok(&tree), || {
            format!("{} does not round-trip", f.display())
        })?;
        if !f.ends_with("handwritten.mdl") {
            ensure(printed == text, || format!("{} is not byte-identical", f.display()))?;
            byte_exact += 1;
        }
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "1000 random trees, {} fixtures, {byte_exact} byte-exact, {:.2?}",
        fixtures.len(),
        start.elapsed()
    ))
}

fn edge(a: &str, b: &str) -> PortEdge {
    PortEdge::new((a, 1), (b, 1))
}

fn graph(blocks: &[&str], edges: &[(&str, &str)]) -> ModelGraph {
    ModelGraph::new(
        blocks.iter().map(|b| BlockNode::new(*b, "Gain")).collect(),
        edges.iter().map(|(a, b)| edge(a, b)).collect(),
    )
    .unwrap()
}

fn labels(els: &[Element]) -> Vec<String> {
    els.iter()
        .map(|e| match e {
            Element::Block(b) => b.name.clone(),
            Element::Edge(e) => format!("{}>{}", e.src.block, e.dst.block),
        })
        .collect()
}

fn bfs_properties() -> Outcome {
    let start = Instant::now();
    let mut kinds = [0usize; 3];
    let mut runner = runner(1000);
    let strategy = graph_spec(50);
    for _ in 0..1000 {
        use proptest::strategy::{Strategy, ValueTree};
        let spec = strategy.new_tree(&mut runner).unwrap().current();
        let g = spec.build();
        let has_source = (0..g.blocks().len()).any(|b| g.in_degree(b) == 0);
        kinds[if spec.edges.is_empty() { 0 } else if has_source { 1 } else { 2 }] += 1;
        let doc = bfs_restructure(&g);
        check_bfs_properties(&spec, &doc.elements)?;
        ensure(doc.elements == reference_bfs(&spec), || format!("differs from reference on {spec:?}"))?;
    }
    ensure(kinds[0] > 0 && kinds[2] > 0, || format!("sweep lacked edge cases: {kinds:?}"))?;

    let cycle = bfs_restructure(&graph(&["a", "b"], &[("a", "b"), ("b", "a")]));
    ensure(labels(&cycle.elements) == ["a", "a>b", "b>a", "b"], || {
        format!("2-cycle gave {:?}", labels(&cycle.elements))
    })?;
    let chain = bfs_restructure(&graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]));
    ensure(labels(&chain.elements) == ["a", "a>b", "b", "b>c", "c"], || {
        format!("chain gave {:?}", labels(&chain.elements))
    })?;
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "1000 graphs ({} edgeless, {} with sources, {} sourceless), regressions ok, {:.2?}",
        kinds[0],
        kinds[1],
        kinds[2],
        start.elapsed()
    ))
}

fn restore_contract() -> Outcome {
    let start = Instant::now();
    runner(1000)
        .run(&graph_spec(30), |spec| {
            let g = spec.build();
            let doc = bfs_restructure(&g);
            let restored = restore(&emit_canonical(&doc)).unwrap();
            proptest::prop_assert!(blocks_precede_lines(&restored));
            proptest::prop_assert_eq!(restore_tree(&restored), restored.clone());
            let back = build_graph(&restored, ParseMode::Strict).unwrap();
            let before = labels(&doc.elements);
            let block_names: Vec<String> = back.blocks().iter().map(|b| b.name.clone()).collect();
            let expected_blocks: Vec<String> = doc.block_order();
            proptest::prop_assert_eq!(block_names, expected_blocks);
            let edge_labels: Vec<String> = back
                .edges()
                .iter()
                .map(|e| format!("{}>{}", e.src.block, e.dst.block))
                .collect();
            let expected_edges: Vec<String> = before.into_iter().filter(|l| l.contains('>')).collect();
            proptest::prop_assert_eq!(edge_labels, expected_edges);
            proptest::prop_assert!(isomorphic(&g, &back, |s| s.to_string()));
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let interleaved = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
    let doc = bfs_restructure(&interleaved);
    let r = restore(&emit_canonical(&doc)).unwrap();
    let order: Vec<String> = r.system().children().map(|s| s.name.clone()).collect();
    ensure(order == ["Block", "Block", "Block", "Line", "Line"], || format!("{order:?}"))?;
    Ok(format!("1000 canonical documents, {:.2?}", start.elapsed()))
}

fn all_small_graphs(n: usize) -> Vec<GraphSpec> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    (0u32..1 << pairs.len())
        .map(|mask| GraphSpec {
            names: (0..n).map(|i| format!("n{i}")).collect(),
            types: vec![0; n],
            edges: pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &(a, b))| (a, b, 1, 1))
                .collect(),
        })
        .collect()
}

fn metrics_oracle() -> Outcome {
    let start = Instant::now();
    let mut exhaustive = 0;
    for n in 1..=3 {
        for spec in all_small_graphs(n) {
            let got = metrics(&spec.build()).map_err(|e| e.to_string())?;
            ensure(got == brute_metrics(&spec), || format!("{spec:?}: {got:?} vs {:?}", brute_metrics(&spec)))?;
            exhaustive += 1;
        }
    }
    runner(5000)
        .run(&graph_spec(8), |spec| {
            proptest::prop_assert_eq!(metrics(&spec.build()).unwrap(), brute_metrics(&spec));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "{exhaustive} exhaustive (all digraphs up to 3 blocks) + 5000 random up to 8 blocks, {:.2?}",
        start.elapsed()
    ))
}

fn dist(w: &[(&str, f64)]) -> TokenDistribution {
    TokenDistribution::from_weights(w.iter().map(|&(t, p)| (t, p))).unwrap()
}

fn ulps_apart(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn sampler_math() -> Outcome {
    let worked = dist(&[("a", 0.5), ("b", 0.3), ("c", 0.15), ("d", 0.05)]);
    for n in [0.7, 0.5] {
        let kept = nucleus_filter(&worked, n).map_err(|e| e.to_string())?;
        let tokens: Vec<&str> = kept.entries().iter().map(|e| e.0.as_str()).collect();
        ensure(tokens == ["a", "b"], || format!("N={n}: kept {tokens:?}"))?;
        ensure(ulps_apart(kept.prob("a"), 0.625) <= 1 && ulps_apart(kept.prob("b"), 0.375) <= 1, || {
            format!("N={n}: {:?}", kept.entries())
        })?;
    }
    ensure(nucleus_filter(&worked, 1.0).unwrap().len() == 4, || "N=1 dropped tokens".into())?;

    let hot = apply_temperature(&dist(&[("x", 0.8), ("y", 0.2)]), 0.5).unwrap();
    ensure((hot.prob("x") - 0.64 / 0.68).abs() < 1e-12, || format!("T=0.5 gave {:?}", hot.entries()))?;

    // empirical draws against the filtered pmf
    let target = nucleus_filter(&worked, 0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    let draws = 100_000;
    let mut counts: HashMap<String, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sample_token(&target, &mut rng).unwrap()).or_default() += 1;
    }
    let mut l1 = 0.0;
    let mut chi2 = 0.0;
    for (tok, p) in target.entries() {
        let observed = *counts.get(tok).unwrap_or(&0) as f64;
        let expected = p * draws as f64;
        l1 += (observed / draws as f64 - p).abs();
        chi2 += (observed - expected).powi(2) / expected;
    }
    ensure(counts.len() == 2, || format!("drew tokens outside the nucleus: {counts:?}"))?;
    ensure(l1 <= 0.02, || format!("L1 distance {l1}"))?;
    // one degree of freedom, p = 0.001
    ensure(chi2 < 10.828, || format!("chi-square {chi2}"))?;

    runner(1000)
        .run(
            &(proptest::collection::vec(1e-6f64..1.0, 1..16), 0.01f64..50.0),
            |(w, t)| {
                let named: Vec<(String, f64)> = w.iter().enumerate().map(|(i, &p)| (format!("t{i:02}"), p)).collect();
                let p = TokenDistribution::from_weights(named.clone()).unwrap();
                let q = apply_temperature(&p, t).unwrap();
                proptest::prop_assert_eq!(q.argmax(), p.argmax());
                for a in p.entries() {
                    for b in p.entries() {
                        if a.1 > b.1 {
                            proptest::prop_assert!(q.prob(&a.0) >= q.prob(&b.0));
                        }
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())?;

    let docs: Vec<_> = mdl_files(&corpus_dir().join("synthetic"))
        .iter()
        .take(10)
        .map(|p| {
            let t = parse(&fs::read_to_string(p).unwrap(), ParseMode::Strict).unwrap();
            let s = simplify(&t, &SimplifyPolicy::default()).tree;
            tokenize(&canonicalize(&s, ParseMode::Strict, true).unwrap().text)
        })
        .collect();
    let model = NGramModel::train(&docs, 5, DEFAULT_EOT).unwrap();
    let cfg = SamplerConfig {
        rng_seed: 99,
        ..SamplerConfig::default()
    };
    let a = generate(&model, &cfg).unwrap();
    let b = generate(&model, &cfg).unwrap();
    ensure(a == b && a.text.as_bytes() == b.text.as_bytes(), || "same seed, different output".into())?;
    Ok(format!(
        "nucleus cases exact to 1 ulp, L1 {l1:.4}, chi-square {chi2:.2}, ranking over 1000 pmfs, determinism ok"
    ))
}

fn memorize(doc: &TokenSeq) -> Result<(), String> {
    let model = NGramModel::train(std::slice::from_ref(doc), 5, DEFAULT_EOT).unwrap();
    let cfg = SamplerConfig {
        temperature: 1e-6,
        max_tokens: 10 * doc.len(),
        ..SamplerConfig::default()
    };
    let out = generate(&model, &cfg).map_err(|e| e.to_string())?;
    ensure(out.completed, || "terminator never drawn".into())?;
    ensure(out.text == doc.join(), || format!("regenerated {:?}", out.text))
}

// verbatim recall needs every 4-token context to have one successor
fn unambiguous(doc: &TokenSeq, k: usize) -> bool {
    let mut padded: Vec<&str> = doc.tokens().iter().map(String::as_str).collect();
    padded.push(DEFAULT_EOT);
    let mut next: HashMap<&[&str], &str> = HashMap::new();
    (k - 1..padded.len()).all(|i| *next.entry(&padded[i + 1 - k..i]).or_insert(padded[i]) == padded[i])
}

fn ngram_memorization() -> Outcome {
    let doc = tokenize(
        "Model { System { Block { BlockType Sin Name \"a\" } Line { SrcBlock \"a\" SrcPort 1 \
         DstBlock \"b\" DstPort 1 } Block { BlockType Scope Name \"b\" } } }",
    );
    memorize(&doc)?;
    let mut eligible = 0;
    let mut runner = runner(1);
    let strategy = graph_spec(4);
    for _ in 0..2000 {
        use proptest::strategy::{Strategy, ValueTree};
        let spec = strategy.new_tree(&mut runner).unwrap().current();
        let d = tokenize(&canonicalize(&graph_tree(&spec.build()), ParseMode::Strict, true).unwrap().text);
        if unambiguous(&d, 5) {
            eligible += 1;
            memorize(&d).map_err(|e| format!("{spec:?}: {e}"))?;
        }
    }
    let total = 2000;
    Ok(format!(
        "{}-token document regenerated verbatim with terminator; {eligible} of {total} random graphs \
         meet the unique-successor precondition and all regenerate",
        doc.len()
    ))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        corpus_dir: corpus_dir().join("synthetic"),
        output_dir: out.path().to_path_buf(),
        ngram_order: 5,
        samples: 100,
        sampler: SamplerConfig {
            temperature: 1.0,
            nucleus: 0.9,
            ..SamplerConfig::default()
        },
        ..PipelineConfig::default()
    };
    let stages = [
        Stage::Ingest,
        Stage::Simplify,
        Stage::Canon,
        Stage::Train,
        Stage::Sample,
        Stage::Restore,
        Stage::Check,
    ];
    run_pipeline(&cfg, &stages).map_err(|e| e.to_string())?;
    let report = retriage(&out.path().join(Stage::Check.dir_name())).map_err(|e| e.to_string())?;
    let rate = report.static_valid_rate();
    let detail = format!(
        "{} samples, {} parsed, {} static-valid ({:.1}%), {:.2?}",
        report.generated,
        report.parse_ok,
        report.static_valid,
        100.0 * rate,
        start.elapsed()
    );
    ensure(report.generated == 100, || detail.clone())?;
    ensure(report.parse_ok >= 1, || detail.clone())?;
    ensure(rate >= 0.30, || format!("{detail}; need at least 30% static-valid"))?;
    within(Duration::from_secs(300), start)?;
    Ok(detail)
}

fn simplification_reduction() -> Outcome {
    let text = fs::read_to_string(corpus_dir().join("fixtures/export_style.mdl")).unwrap();
    let tree: SyntaxTree = parse(&text, ParseMode::Strict).unwrap();
    let before = tokenize(&text).len();
    let simplified = simplify(&tree, &SimplifyPolicy::default()).tree;
    let after = tokenize(&print(&simplified)).len();
    let canonical = tokenize(&canonicalize(&simplified, ParseMode::Strict, true).unwrap().text).len();
    let cut = 1.0 - after as f64 / before as f64;
    let detail = format!(
        "{before} -> {after} tokens ({:.1}% fewer); {canonical} after canonical renaming",
        100.0 * cut
    );
    ensure(cut >= 0.5, || detail.clone())?;
    Ok(detail)
}

const VALID_MODEL: &str = "Model { System { Block { BlockType Sin Name \"a\" Ports [0, 1] } \
Line { SrcBlock \"a\" SrcPort 1 DstBlock \"b\" DstPort 1 } Block { BlockType Scope Name \"b\" Ports [1] } } }";

fn campaign(dir: &Path, count: u64, validator: &str) -> CampaignReport {
    let backend = ScriptedBackend::completing("Model {", VALID_MODEL, DEFAULT_EOT);
    let mut cfg = CampaignConfig::new(dir, SamplerConfig::default());
    cfg.budget_count = Some(count);
    cfg.validator = Some(validator.into());
    cfg.timeout = Duration::from_millis(300);
    cfg.jobs = 4;
    fuzz_campaign(&backend, &cfg).unwrap()
}

#[cfg(unix)]
fn fuzz_classification() -> Outcome {
    let model = Path::new("/tmp/some dir/m.mdl");
    let t = Duration::from_millis(300);
    let stubs = [
        ("sh -c 'exit 0' {model}", OutcomeKind::Valid),
        ("sh -c 'echo \"Error: bad\" >&2; exit 1' {model}", OutcomeKind::Rejected),
        ("sh -c 'echo \"Assertion failed\" >&2; kill -ABRT $$' {model}", OutcomeKind::Crash),
        ("sh -c 'sleep 5' {model}", OutcomeKind::Timeout),
    ];
    for (cmd, want) in stubs {
        let o = run_validator(model, cmd, t).map_err(|e| e.to_string())?;
        ensure(o.kind == want, || format!("`{cmd}` gave {:?}, want {want:?}", o.kind))?;
    }

    let tmp = tempfile::tempdir().unwrap();
    let crashing = campaign(
        &tmp.path().join("crash"),
        8,
        "sh -c 'echo \"Assertion failed while loading $0 at 0x7ff3a\" >&2; kill -ABRT $$' {model}",
    );
    ensure(crashing.crashes == 8 && crashing.buckets.len() == 1, || {
        format!("{} crashes in {} buckets", crashing.crashes, crashing.buckets.len())
    })?;

    let mixed = campaign(
        &tmp.path().join("mixed"),
        12,
        "sh -c 'case \"$0\" in *[048].mdl) exit 0;; *[159].mdl) echo \"Error: x\" >&2; exit 1;; \
         *[26].mdl) echo \"Assertion failed in $0\" >&2; kill -ABRT $$;; *) sleep 5;; esac' {model}",
    );
    let summary = format!(
        "valid {} rejected {} crash {} timeout {}",
        mixed.validator_valid, mixed.rejected, mixed.crashes, mixed.timeouts
    );
    ensure(
        (mixed.validator_valid, mixed.rejected, mixed.crashes, mixed.timeouts) == (4, 4, 2, 2),
        || summary.clone(),
    )?;
    ensure(mixed.buckets.len() == 2, || format!("{} buckets", mixed.buckets.len()))?;

    let mut triage = Triage::default();
    for (i, path) in ["/a/x.mdl", "/b/c/y.mdl"].iter().enumerate() {
        let o = run_validator(
            Path::new(path),
            "sh -c 'echo \"abort in $0\" >&2; kill -ABRT $$' {model}",
            Duration::from_secs(5),
        )
        .unwrap();
        let sig = mdlfuzz::harness::crash_signature(&o).unwrap();
        triage.add(&sig, o.kind, &o.excerpt, path, i as u64);
    }
    ensure(triage.buckets().len() == 1, || "path-only differences split a bucket".into())?;

    for (name, r) in [("crash", &crashing), ("mixed", &mixed)] {
        ensure(r.is_conserved(), || format!("{name} campaign is not conserved: {r:?}"))?;
        let again = retriage(&tmp.path().join(name)).map_err(|e| e.to_string())?;
        ensure(again == *r, || format!("{name} campaign re-triage differs"))?;
    }
    Ok(format!("four stubs classified; one bucket for 8 path-varying crashes; mixed {summary}; conserved"))
}

#[cfg(not(unix))]
fn fuzz_classification() -> Outcome {
    Err("needs a POSIX shell for the stub validators".into())
}

fn main() {
    let criteria: &[Criterion] = &[
        ("parser round-trip", parser_round_trip),
        ("breadth-first rewrite properties", bfs_properties),
        ("restore contract", restore_contract),
        ("metrics oracle", metrics_oracle),
        ("sampler math", sampler_math),
        ("n-gram memorization", ngram_memorization),
        ("end-to-end static validity", end_to_end),
        ("simplification reduction", simplification_reduction),
        ("fuzz harness classification", fuzz_classification),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
