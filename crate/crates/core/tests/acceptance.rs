//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits non-zero if any fails.
//!
//! Run a subset with `cargo test -p hybrid-ann --test acceptance -- 4 5`.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_ann::bench::{
    read_csv, robustness_suite, sweep, w_sensitivity_suite, with_random_attributes, write_csv,
    BiasMode, FeatureSet, GraphCache, RunLabel, RunRecord, SuiteConfig,
};
use hybrid_ann::dataio::{
    generate_synthetic, read_fvecs, read_ivecs, synthetic_features, write_vecs, SyntheticSpec,
};
use hybrid_ann::graph::{load, save};
use hybrid_ann::metrics::attribute_distance_from_mapping;
use hybrid_ann::strategies::{exact_fused_topk, ground_truth};
use hybrid_ann::{
    attribute_distance, fused_distance, hamming_attribute_distance, manhattan_distance, AttrMetric,
    CompositeGraph, FeatureMetric, FusionParams, GraphMetric, GraphParams, Indexes, PointRef,
    Strategy,
};

const SEED: u64 = 42;
const BASE_COUNT: usize = 50_000;
const QUERY_COUNT: usize = 1_000;
const DIM: usize = 32;
const K: usize = 10;
const DEFAULT_BIAS: f64 = 4.3219;

type Outcome = Result<String, String>;

struct Desk {
    base: Vec<Vec<f32>>,
    queries: Vec<Vec<f32>>,
    cache: GraphCache,
    /// Pre-filter recall from every configuration measured so far.
    pre_filter: Vec<(String, f64)>,
}

impl Desk {
    fn new() -> Self {
        Self {
            base: synthetic_features(&SyntheticSpec::new(BASE_COUNT, DIM, 1, 1, SEED)),
            queries: synthetic_features(
                &SyntheticSpec::new(QUERY_COUNT, DIM, 1, 1, SEED).queries(),
            ),
            cache: GraphCache::new(),
            pre_filter: Vec::new(),
        }
    }

    fn features(&self) -> FeatureSet<'_> {
        FeatureSet {
            base: &self.base,
            queries: &self.queries,
            metric: FeatureMetric::IP,
        }
    }

    fn config(&self, budgets: Vec<usize>) -> SuiteConfig {
        SuiteConfig {
            budgets,
            ..SuiteConfig::new("synthetic-50k")
        }
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close_rel(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE)
}

// 1. Metric values against hand evaluation; monotonicity and symmetry on 1e5 pairs.
fn metric_unit_suite(_: &mut Desk) -> Outcome {
    let p = FusionParams::default();
    let inv = 1.0 / 2f64.log10();
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        let ok = if want == 0.0 {
            got == 0.0
        } else {
            close_rel(got, want, 1e-6)
        };
        if !ok {
            failures.push(format!("{name}: got {got}, want {want}"));
        }
    };
    expect(
        "f(v,v)",
        attribute_distance(&p, &[5, 2], &[5, 2]).unwrap(),
        0.0,
    );
    expect(
        "f(e=1)",
        attribute_distance(&p, &[0], &[1]).unwrap(),
        DEFAULT_BIAS - inv,
    );
    expect(
        "f(e=9)",
        attribute_distance(&p, &[0, 0], &[4, 5]).unwrap(),
        DEFAULT_BIAS - 1.0,
    );
    let x = [1.0f32, 0.0];
    let y = [0.6f32, 0.8];
    let g_xy = 1.0 - f64::from(0.6f32);
    expect(
        "fused same attrs",
        fused_distance(
            &p,
            FeatureMetric::IP,
            PointRef {
                feature: &x,
                attrs: &[3],
            },
            PointRef {
                feature: &y,
                attrs: &[3],
            },
        )
        .unwrap(),
        0.25 * g_xy,
    );
    expect(
        "fused identical",
        fused_distance(
            &p,
            FeatureMetric::IP,
            PointRef {
                feature: &x,
                attrs: &[3],
            },
            PointRef {
                feature: &x,
                attrs: &[3],
            },
        )
        .unwrap(),
        0.0,
    );
    expect(
        "fused e=1 g=1",
        fused_distance(
            &p,
            FeatureMetric::IP,
            PointRef {
                feature: &x,
                attrs: &[3],
            },
            PointRef {
                feature: &[0.0, 1.0],
                attrs: &[4],
            },
        )
        .unwrap(),
        0.25 + DEFAULT_BIAS - inv,
    );
    expect(
        "manhattan",
        manhattan_distance(&[1, 3], &[2, 5]).unwrap() as f64,
        3.0,
    );
    expect(
        "hamming",
        hamming_attribute_distance(&[1, 3], &[2, 5]).unwrap() as f64,
        2.0,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mono = 0;
    let mut asym = 0;
    const PAIRS: usize = 100_000;
    for _ in 0..PAIRS {
        let e1: u64 = rng.random_range(1..1_000_000);
        let e2: u64 = rng.random_range(1..1_000_000);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        if lo < hi
            && attribute_distance_from_mapping(DEFAULT_BIAS, lo)
                >= attribute_distance_from_mapping(DEFAULT_BIAS, hi)
        {
            mono += 1;
        }
        let v: Vec<i32> = (0..3).map(|_| rng.random_range(-50..50)).collect();
        let u: Vec<i32> = (0..3).map(|_| rng.random_range(-50..50)).collect();
        let a: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pa = PointRef {
            feature: &a,
            attrs: &v,
        };
        let pb = PointRef {
            feature: &b,
            attrs: &u,
        };
        if attribute_distance(&p, &v, &u).unwrap() != attribute_distance(&p, &u, &v).unwrap()
            || fused_distance(&p, FeatureMetric::L2, pa, pb).unwrap()
                != fused_distance(&p, FeatureMetric::L2, pb, pa).unwrap()
            || fused_distance(&p, FeatureMetric::IP, pa, pb).unwrap()
                != fused_distance(&p, FeatureMetric::IP, pb, pa).unwrap()
        {
            asym += 1;
        }
    }
    let detail = format!(
        "{} hand values off, {mono} monotonicity and {asym} symmetry violations over {PAIRS} pairs{}",
        failures.len(),
        if failures.is_empty() { String::new() } else { format!(" ({})", failures.join("; ")) }
    );
    check(failures.is_empty() && mono == 0 && asym == 0, detail)
}

// 2. Every exact attribute match sorts before every mismatch.
fn dominance(_: &mut Desk) -> Outcome {
    let p = FusionParams::default();
    let mut violations = 0usize;
    let mut queries_checked = 0usize;
    let mut tightest_gap = f64::INFINITY;
    for trial in 0..100u64 {
        let categories = [2u32, 5, 10, 50][trial as usize % 4];
        let n = 1 + trial as usize % 3;
        let spec = SyntheticSpec::new(1_000, 16, categories, n, 1_000 + trial);
        let ds = generate_synthetic(&spec).unwrap();
        let qs = generate_synthetic(&spec.queries().with_count(50)).unwrap();
        for qi in 0..qs.len() {
            let q = qs.point(qi);
            let mut worst_match = f64::NEG_INFINITY;
            let mut best_mismatch = f64::INFINITY;
            let mut any_match = false;
            for i in 0..ds.len() {
                let d = fused_distance(&p, FeatureMetric::IP, q, ds.point(i)).unwrap();
                if ds.attrs(i) == q.attrs {
                    any_match = true;
                    worst_match = worst_match.max(d);
                } else {
                    best_mismatch = best_mismatch.min(d);
                }
            }
            if !any_match {
                continue;
            }
            queries_checked += 1;
            if worst_match >= best_mismatch {
                violations += 1;
            }
            tightest_gap = tightest_gap.min(best_mismatch - worst_match);
        }
    }
    check(
        violations == 0 && queries_checked > 0,
        format!("{violations} violations over {queries_checked} queries with a match; smallest gap {tightest_gap:.4}"),
    )
}

// 3. Exhaustive-budget graph search equals the fused brute-force oracle.
fn oracle_equivalence(_: &mut Desk) -> Outcome {
    let spec = SyntheticSpec::new(2_000, DIM, 20, 1, 7);
    let ds = Arc::new(generate_synthetic(&spec).unwrap());
    let qs = generate_synthetic(&spec.queries().with_count(200)).unwrap();
    let fusion = FusionParams::default();
    let g = CompositeGraph::build(
        Arc::clone(&ds),
        GraphMetric::Fused(fusion),
        GraphParams::default(),
    )
    .unwrap();
    let connected = g.is_connected_at_level0();
    let mut total = 0.0;
    for qi in 0..qs.len() {
        let q = qs.point(qi);
        let got: Vec<usize> = g
            .search_point(q, K, ds.len())
            .unwrap()
            .iter()
            .map(|h| h.id)
            .collect();
        let want: Vec<usize> = exact_fused_topk(&ds, &fusion, q, K)
            .unwrap()
            .iter()
            .map(|h| h.id)
            .collect();
        total += want.iter().filter(|id| got.contains(id)).count() as f64 / K as f64;
    }
    let recall = total / qs.len() as f64;
    let need = if connected { 1.0 } else { 0.99 };
    check(
        recall >= need,
        format!("recall {recall:.4} (need >= {need}, level-0 connected: {connected})"),
    )
}

fn fusion_recall_at(records: &[RunRecord], budget: usize) -> f64 {
    records
        .iter()
        .find(|r| r.budget == budget)
        .map_or(f64::NAN, |r| r.recall)
}

// 4. Fusion reaches Recall@10 >= 0.95 with ef_search <= 160 at C = 100.
fn scaled_recall(desk: &mut Desk) -> Outcome {
    let budgets = vec![10, 20, 40, 80, 160];
    let cfg = desk.config(budgets.clone());
    let features = FeatureSet {
        base: &desk.base,
        queries: &desk.queries,
        metric: FeatureMetric::IP,
    };
    let cache = &mut desk.cache;
    let rows = robustness_suite(features, &[100], &[Strategy::Fusion], &cfg, cache);
    let rows = rows.map_err(|e| e.to_string())?;
    let curve: Vec<String> = budgets
        .iter()
        .map(|&b| format!("ef{b}={:.4}", fusion_recall_at(&rows, b)))
        .collect();
    let first = rows.iter().find(|r| r.recall >= 0.95).map(|r| r.budget);
    check(
        first.is_some_and(|b| b <= 160),
        format!("first ef reaching 0.95: {first:?}; {}", curve.join(" ")),
    )
}

fn rows_for<'a>(rows: &'a [RunRecord], strategy: &str, c: u32) -> &'a RunRecord {
    rows.iter()
        .find(|r| r.strategy == strategy && r.categories == c)
        .unwrap_or_else(|| panic!("missing row {strategy} C={c}"))
}

// 5. Recall and latency as attribute cardinality grows, ef_search = 80.
fn robustness(desk: &mut Desk) -> Outcome {
    let cs = [10u32, 100, 500, 1000];
    let strategies = [
        Strategy::Fusion,
        Strategy::SearchThenFilter { expansion: 100 },
        Strategy::FilterThenSearch,
    ];
    let cfg = desk.config(vec![80]);
    let features = FeatureSet {
        base: &desk.base,
        queries: &desk.queries,
        metric: FeatureMetric::IP,
    };
    let cache = &mut desk.cache;
    let rows = robustness_suite(features, &cs, &strategies, &cfg, cache);
    let rows = rows.map_err(|e| e.to_string())?;
    for r in rows.iter().filter(|r| r.strategy == "pre-filter") {
        desk.pre_filter
            .push((format!("robustness C={}", r.categories), r.recall));
    }

    let fusion: Vec<f64> = cs
        .iter()
        .map(|&c| rows_for(&rows, "fusion", c).recall)
        .collect();
    let spread = fusion.iter().cloned().fold(f64::MIN, f64::max)
        - fusion.iter().cloned().fold(f64::MAX, f64::min);
    let min = fusion.iter().cloned().fold(f64::MAX, f64::min);
    let a = spread <= 0.02 && min >= 0.93;

    let post10 = rows_for(&rows, "post-filter(F=100)", 10).recall;
    let post1000 = rows_for(&rows, "post-filter(F=100)", 1000).recall;
    let b = post10 - post1000 >= 0.05;

    let lat10 = rows_for(&rows, "fusion", 10).p50_us;
    let lat1000 = rows_for(&rows, "fusion", 1000).p50_us;
    let c = lat1000 <= 1.2 * lat10;

    let post: Vec<String> = cs
        .iter()
        .map(|&c| format!("{:.4}", rows_for(&rows, "post-filter(F=100)", c).recall))
        .collect();
    let detail = format!(
        "(a) fusion recall {fusion:.4?} spread {spread:.4} min {min:.4} [{}]; \
         (b) post-filter recall {} drop {:.4} [{}]; \
         (c) fusion p50 {lat10:.1}us@C10 -> {lat1000:.1}us@C1000 ratio {:.3} [{}]",
        pf(a),
        post.join("/"),
        post10 - post1000,
        pf(b),
        lat1000 / lat10,
        pf(c)
    );
    check(a && b && c, detail)
}

fn pf(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

// 6. Scale-factor sensitivity with the bias pinned at 4.3219.
fn sensitivity(desk: &mut Desk) -> Outcome {
    let ws = [1.0, 0.5, 0.25, 0.1];
    let cfg = desk.config(vec![80]);
    let features = FeatureSet {
        base: &desk.base,
        queries: &desk.queries,
        metric: FeatureMetric::IP,
    };
    let cache = &mut desk.cache;
    let high = w_sensitivity_suite(
        features,
        2000,
        &ws,
        BiasMode::Fixed(DEFAULT_BIAS),
        &cfg,
        cache,
    );
    let low = w_sensitivity_suite(
        features,
        10,
        &ws,
        BiasMode::Fixed(DEFAULT_BIAS),
        &cfg,
        cache,
    );
    // pre-filter at the high-cardinality configuration for criterion 9
    let pre = robustness_suite(
        features,
        &[2000],
        &[Strategy::FilterThenSearch],
        &cfg,
        cache,
    );
    let (high, low, pre) = (
        high.map_err(|e| e.to_string())?,
        low.map_err(|e| e.to_string())?,
        pre.map_err(|e| e.to_string())?,
    );
    desk.pre_filter.push(("C=2000".into(), pre[0].recall));
    let at = |rows: &[RunRecord], w: f64| rows.iter().find(|r| r.w == w).expect("row per w").recall;
    let h: Vec<f64> = ws.iter().map(|&w| at(&high, w)).collect();
    let l: Vec<f64> = ws.iter().map(|&w| at(&low, w)).collect();
    let gain = h[2] >= h[0];
    let plateau = h[3] >= h[2] - 0.01;
    let spread =
        l.iter().cloned().fold(f64::MIN, f64::max) - l.iter().cloned().fold(f64::MAX, f64::min);
    let control = spread <= 0.02;
    check(
        gain && plateau && control,
        format!(
            "C=2000 recall w=1/.5/.25/.1: {h:.4?} (w.25>=w1 [{}], w.1>=w.25-0.01 [{}]); C=10 recall {l:.4?} spread {spread:.4} [{}]",
            pf(gain),
            pf(plateau),
            pf(control)
        ),
    )
}

// 7. Hamming attribute mapping vs Manhattan on three 10-valued attributes,
// over the default graph and two lighter ones.
fn hamming_degradation(desk: &mut Desk) -> Outcome {
    let reference = [0, 0, 0];
    let (near, far) = ([1, 0, 0], [9, 0, 0]);
    let witness = hamming_attribute_distance(&near, &reference).unwrap()
        == hamming_attribute_distance(&far, &reference).unwrap()
        && manhattan_distance(&near, &reference).unwrap()
            != manhattan_distance(&far, &reference).unwrap();

    let budgets = vec![10, 20, 40, 80];
    let graphs = [(32, 512), (16, 128), (8, 64)];
    let features = FeatureSet {
        base: &desk.base,
        queries: &desk.queries,
        metric: FeatureMetric::IP,
    };
    let cache = &mut desk.cache;
    let mut best_margin = f64::MIN;
    let mut curve = Vec::new();
    for (i, &(m, efc)) in graphs.iter().enumerate() {
        let mut cfg = SuiteConfig {
            budgets: budgets.clone(),
            attr_dims: 3,
            graph: GraphParams::new(m, efc, SEED).map_err(|e| e.to_string())?,
            ..SuiteConfig::new("synthetic-50k")
        };
        let strategies: &[Strategy] = if i == 0 {
            &[Strategy::Fusion, Strategy::FilterThenSearch]
        } else {
            &[Strategy::Fusion]
        };
        let manhattan = robustness_suite(features, &[10], strategies, &cfg, cache)
            .map_err(|e| e.to_string())?;
        cfg.fusion = cfg.fusion.with_attr_metric(AttrMetric::Hamming);
        let hamming = robustness_suite(features, &[10], &[Strategy::Fusion], &cfg, cache)
            .map_err(|e| e.to_string())?;
        for r in manhattan.iter().filter(|r| r.strategy == "pre-filter") {
            desk.pre_filter
                .push((format!("n=3 ef={}", r.budget), r.recall));
        }
        let fused_m = manhattan.iter().filter(|r| r.strategy == "fusion");
        let mut cells = Vec::new();
        for (mr, hr) in fused_m.zip(&hamming) {
            assert_eq!(mr.budget, hr.budget);
            best_margin = best_margin.max(mr.recall - hr.recall);
            cells.push(format!("ef{} {:.4}/{:.4}", mr.budget, mr.recall, hr.recall));
        }
        curve.push(format!("M={m} efc={efc}: {}", cells.join(" ")));
    }
    check(
        witness && best_margin >= 0.03,
        format!(
            "collapse witness [{}]; manhattan/hamming recall {}; best margin {best_margin:.4}",
            pf(witness),
            curve.join("; ")
        ),
    )
}

fn recall_column(csv: &[u8]) -> Vec<u8> {
    let text = std::str::from_utf8(csv).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "recall").unwrap();
    lines
        .flat_map(|l| {
            let mut v = l.split(',').nth(col).unwrap().as_bytes().to_vec();
            v.push(b'\n');
            v
        })
        .collect()
}

fn one_run(seed: u64) -> Vec<u8> {
    let spec = SyntheticSpec::new(5_000, 16, 20, 1, seed);
    let ds = Arc::new(generate_synthetic(&spec).unwrap());
    let qs = generate_synthetic(&spec.queries().with_count(200)).unwrap();
    let gt = ground_truth(&ds, &qs, K).unwrap();
    let gp = GraphParams::new(16, 128, seed).unwrap();
    let fusion = FusionParams::default();
    let g = CompositeGraph::build(Arc::clone(&ds), GraphMetric::Fused(fusion), gp).unwrap();
    let label = RunLabel::for_graph("det", 20, &fusion, &gp);
    let rows = sweep(
        &Indexes::new(&ds).with_fused(&g),
        Strategy::Fusion,
        &qs,
        &gt,
        K,
        &[10, 20, 40],
        1,
        &label,
    )
    .unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &format!("seed={seed}"), &rows).unwrap();
    buf
}

// 8. Same seed, one thread: identical recall; index and vecs round trips.
fn determinism_and_persistence(desk: &mut Desk) -> Outcome {
    let first = one_run(SEED);
    let second = one_run(SEED);
    let same_recall = recall_column(&first) == recall_column(&second);
    let parsed = read_csv(first.as_slice())
        .map(|r| r.len() == 3)
        .unwrap_or(false);

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSpec::new(3_000, 16, 30, 2, 3);
    let ds = Arc::new(generate_synthetic(&spec).unwrap());
    let g = CompositeGraph::build(
        Arc::clone(&ds),
        GraphMetric::Fused(FusionParams::default()),
        GraphParams::new(12, 100, 5).unwrap(),
    )
    .unwrap();
    let path = dir.path().join("index.hqan");
    save(&g, &path).map_err(|e| e.to_string())?;
    let loaded = load(&path, Arc::clone(&ds)).map_err(|e| e.to_string())?;
    let index_ok = loaded == g;

    let fpath = dir.path().join("base.fvecs");
    write_vecs(&fpath, &desk.base).map_err(|e| e.to_string())?;
    let (back, dim) = read_fvecs(&fpath).map_err(|e| e.to_string())?;
    let fvecs_ok = dim == DIM
        && back.len() == desk.base.len()
        && back
            .iter()
            .flatten()
            .zip(desk.base.iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    let attrs: Vec<Vec<i32>> = (0..ds.len()).map(|i| ds.attrs(i).to_vec()).collect();
    let ipath = dir.path().join("attrs.ivecs");
    write_vecs(&ipath, &attrs).map_err(|e| e.to_string())?;
    let ivecs_ok = read_ivecs(&ipath).map_err(|e| e.to_string())?.0 == attrs;
    check(
        same_recall && parsed && index_ok && fvecs_ok && ivecs_ok,
        format!(
            "recall columns identical [{}], csv parses [{}], index round trip [{}], fvecs [{}], ivecs [{}]",
            pf(same_recall),
            pf(parsed),
            pf(index_ok),
            pf(fvecs_ok),
            pf(ivecs_ok)
        ),
    )
}

// 9. Pre-filter is exact everywhere; post-filter recall grows with F.
fn baseline_sanity(desk: &mut Desk) -> Outcome {
    let cfg = desk.config(vec![80]);
    let (base, queries) =
        with_random_attributes(desk.features(), 100, 1, cfg.seed).map_err(|e| e.to_string())?;
    let gt = ground_truth(&base, &queries, K).map_err(|e| e.to_string())?;
    let feature = desk
        .cache
        .get_or_build(&base, GraphMetric::FeatureOnly, cfg.graph)
        .map_err(|e| e.to_string())?;
    let idx = Indexes::new(&base).with_feature(&feature);
    let label = RunLabel::for_graph("synthetic-50k", 100, &cfg.fusion, &cfg.graph);
    let mut post = Vec::new();
    for f in [1, 10, 100] {
        let r = sweep(
            &idx,
            Strategy::SearchThenFilter { expansion: f },
            &queries,
            &gt,
            K,
            &[80],
            1,
            &label,
        )
        .map_err(|e| e.to_string())?;
        post.push(r[0].recall);
    }
    let pre = sweep(
        &idx,
        Strategy::FilterThenSearch,
        &queries,
        &gt,
        K,
        &[K],
        1,
        &label,
    )
    .map_err(|e| e.to_string())?;
    desk.pre_filter.push(("C=100".into(), pre[0].recall));
    let monotone = post.windows(2).all(|w| w[1] >= w[0]);
    let bad: Vec<String> = desk
        .pre_filter
        .iter()
        .filter(|(_, r)| *r != 1.0)
        .map(|(name, r)| format!("{name}={r}"))
        .collect();
    check(
        monotone && bad.is_empty(),
        format!(
            "pre-filter recall 1.0 on {} configurations ({} off{}); post-filter recall F=1/10/100: {post:.4?} [{}]",
            desk.pre_filter.len(),
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(": {}", bad.join(", ")) },
            pf(monotone)
        ),
    )
}

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Duration,
    run: fn(&mut Desk) -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: "1",
            name: "metric unit suite",
            limit: Duration::from_secs(5),
            run: metric_unit_suite,
        },
        Criterion {
            id: "2",
            name: "dominance",
            limit: Duration::from_secs(60),
            run: dominance,
        },
        Criterion {
            id: "3",
            name: "oracle equivalence",
            limit: Duration::from_secs(60),
            run: oracle_equivalence,
        },
        Criterion {
            id: "4",
            name: "scaled recall (C=100)",
            limit: Duration::from_secs(600),
            run: scaled_recall,
        },
        Criterion {
            id: "5",
            name: "robustness over C",
            limit: Duration::from_secs(900),
            run: robustness,
        },
        Criterion {
            id: "6",
            name: "w sensitivity",
            limit: Duration::from_secs(1200),
            run: sensitivity,
        },
        Criterion {
            id: "7",
            name: "hamming degradation",
            limit: Duration::from_secs(1200),
            run: hamming_degradation,
        },
        Criterion {
            id: "8",
            name: "determinism and persistence",
            limit: Duration::from_secs(600),
            run: determinism_and_persistence,
        },
        Criterion {
            id: "9",
            name: "baseline sanity",
            limit: Duration::from_secs(600),
            run: baseline_sanity,
        },
    ];
    let selected: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut desk = Desk::new();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| selected.is_empty() || selected.iter().any(|s| s == c.id))
    {
        let start = Instant::now();
        let outcome = (c.run)(&mut desk);
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {} {}: {} ({:.1}s, limit {}s{})",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("{} graphs built", desk.cache.builds());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
