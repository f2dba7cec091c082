//! Recall/throughput measurement and the parameter sweeps built on it.

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataio::{random_attributes, Role};
use crate::error::BenchError;
use crate::graph::{dataset_checksum, CompositeGraph, DatasetChecksum, GraphParams};
use crate::metrics::GraphMetric;
use crate::strategies::{
    ground_truth, run_strategy_point, GroundTruth, Indexes, Strategy, SENTINEL,
};
use crate::types::{AttrMetric, FeatureMetric, FusionParams, HybridDataset, INV_LOG10_2};

/// One measurement row; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub strategy: String,
    #[serde(rename = "C")]
    pub categories: u32,
    pub w: f64,
    pub bias: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub ef_construction: usize,
    /// ef_search for graph strategies.
    pub budget: usize,
    pub k: usize,
    pub threads: usize,
    pub recall: f64,
    pub qps: f64,
    pub p50_us: f64,
    pub p99_us: f64,
}

pub const CSV_HEADER: &str =
    "dataset,strategy,C,w,bias,M,ef_construction,budget,k,threads,recall,qps,p50_us,p99_us";

/// Columns of a [`RunRecord`] that describe the setup rather than the measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLabel {
    pub dataset: String,
    pub categories: u32,
    pub w: f64,
    pub bias: f64,
    pub m: usize,
    pub ef_construction: usize,
}

impl RunLabel {
    pub fn for_graph(
        dataset: &str,
        categories: u32,
        fusion: &FusionParams,
        graph: &GraphParams,
    ) -> Self {
        Self {
            dataset: dataset.to_string(),
            categories,
            w: fusion.w(),
            bias: fusion.bias(),
            m: graph.m,
            ef_construction: graph.ef_construction,
        }
    }
}

/// Mean over queries of `|returned ∩ truth| / |truth|`, ignoring sentinel ids
/// and skipping queries whose ground truth is empty. Returns 1.0 when every
/// query was skipped.
pub fn recall_at_k(results: &[Vec<usize>], gt: &GroundTruth, k: usize) -> Result<f64, BenchError> {
    if results.len() != gt.rows.len() {
        return Err(BenchError::LengthMismatch {
            results: results.len(),
            truth: gt.rows.len(),
        });
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (returned, truth) in results.iter().zip(&gt.rows) {
        let truth: Vec<usize> = truth
            .iter()
            .take(k)
            .filter(|&&id| id != SENTINEL)
            .map(|&id| id as usize)
            .collect();
        if truth.is_empty() {
            continue;
        }
        let returned = &returned[..returned.len().min(k)];
        let hit = truth.iter().filter(|id| returned.contains(id)).count();
        sum += hit as f64 / truth.len() as f64;
        counted += 1;
    }
    Ok(if counted == 0 {
        1.0
    } else {
        sum / counted as f64
    })
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[Duration], p: f64) -> Duration {
    if sorted.is_empty() {
        return Duration::ZERO;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

struct Timed {
    ids: Vec<Vec<usize>>,
    latencies: Vec<Duration>,
    wall: Duration,
}

fn run_pass(
    indexes: &Indexes<'_>,
    strategy: Strategy,
    queries: &HybridDataset,
    k: usize,
    budget: usize,
    threads: usize,
) -> Result<Timed, BenchError> {
    let n = queries.len();
    let threads = threads.max(1).min(n.max(1));
    let one = |i: usize| -> Result<(Vec<usize>, Duration), BenchError> {
        let start = Instant::now();
        let hits = run_strategy_point(strategy, indexes, queries.point(i), k, budget)?;
        let elapsed = start.elapsed();
        Ok((hits.into_iter().map(|h| h.id).collect(), elapsed))
    };

    let start = Instant::now();
    let mut out: Vec<(Vec<usize>, Duration)> = Vec::with_capacity(n);
    if threads == 1 {
        for i in 0..n {
            out.push(one(i)?);
        }
    } else {
        let next = AtomicUsize::new(0);
        let failure: Mutex<Option<BenchError>> = Mutex::new(None);
        let per_worker: Vec<Vec<(usize, Vec<usize>, Duration)>> = std::thread::scope(|s| {
            let workers: Vec<_> = (0..threads)
                .map(|_| {
                    s.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n {
                                break;
                            }
                            match one(i) {
                                Ok((ids, lat)) => local.push((i, ids, lat)),
                                Err(e) => {
                                    *failure.lock().unwrap() = Some(e);
                                    next.store(n, Ordering::Relaxed);
                                    break;
                                }
                            }
                        }
                        local
                    })
                })
                .collect();
            workers
                .into_iter()
                .map(|w| w.join().expect("worker panicked"))
                .collect()
        });
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let mut merged: Vec<Option<(Vec<usize>, Duration)>> = vec![None; n];
        for (i, ids, lat) in per_worker.into_iter().flatten() {
            merged[i] = Some((ids, lat));
        }
        out = merged
            .into_iter()
            .map(|x| x.expect("every query ran"))
            .collect();
    }
    let wall = start.elapsed();
    let (ids, latencies) = out.into_iter().unzip();
    Ok(Timed {
        ids,
        latencies,
        wall,
    })
}

/// Runs `queries` once per budget: one untimed warm-up pass, then a timed pass.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    indexes: &Indexes<'_>,
    strategy: Strategy,
    queries: &HybridDataset,
    gt: &GroundTruth,
    k: usize,
    budgets: &[usize],
    threads: usize,
    label: &RunLabel,
) -> Result<Vec<RunRecord>, BenchError> {
    if gt.rows.len() != queries.len() {
        return Err(BenchError::LengthMismatch {
            results: queries.len(),
            truth: gt.rows.len(),
        });
    }
    let threads = threads.max(1);
    let mut records = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        run_pass(indexes, strategy, queries, k, budget, threads)?;
        let timed = run_pass(indexes, strategy, queries, k, budget, threads)?;
        let recall = recall_at_k(&timed.ids, gt, k)?;
        let mut lat = timed.latencies;
        lat.sort_unstable();
        let secs = timed.wall.as_secs_f64();
        records.push(RunRecord {
            dataset: label.dataset.clone(),
            strategy: strategy.to_string(),
            categories: label.categories,
            w: label.w,
            bias: label.bias,
            m: label.m,
            ef_construction: label.ef_construction,
            budget,
            k,
            threads,
            recall,
            qps: if secs > 0.0 {
                queries.len() as f64 / secs
            } else {
                f64::INFINITY
            },
            p50_us: percentile(&lat, 50.0).as_secs_f64() * 1e6,
            p99_us: percentile(&lat, 99.0).as_secs_f64() * 1e6,
        });
    }
    Ok(records)
}

/// Writes a provenance comment line, the fixed header and one row per record.
pub fn write_csv(
    mut w: impl Write,
    provenance: &str,
    records: &[RunRecord],
) -> std::io::Result<()> {
    writeln!(w, "# {}", provenance.replace('\n', " "))?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    csv.write_record(CSV_HEADER.split(','))?;
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush()
}

pub fn read_csv(r: impl std::io::Read) -> Result<Vec<RunRecord>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(r)
        .deserialize()
        .collect()
}

/// Memoizes built graphs by (metric, build params, dataset fingerprint).
#[derive(Default)]
pub struct GraphCache {
    graphs: HashMap<GraphKey, Arc<CompositeGraph>>,
    /// Feature-only graphs by feature fingerprint, reusable across attribute tables.
    feature_only: HashMap<(u64, usize, usize, u64), Arc<CompositeGraph>>,
    builds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct GraphKey {
    metric: (u8, u64, u64, u64),
    params: (usize, usize, u64, u64),
    dataset: (u32, u16, u16, u64),
}

impl GraphKey {
    fn new(metric: &GraphMetric, params: &GraphParams, ds: &DatasetChecksum) -> Self {
        let metric = match metric {
            GraphMetric::Fused(f) => (
                match f.attr_metric() {
                    AttrMetric::ManhattanLog => 0,
                    AttrMetric::Hamming => 1,
                },
                f.w().to_bits(),
                f.bias().to_bits(),
                f.g_max().to_bits(),
            ),
            GraphMetric::FeatureOnly => (2, 0, 0, 0),
        };
        Self {
            metric,
            params: (
                params.m,
                params.ef_construction,
                params.level_norm.to_bits(),
                params.seed,
            ),
            dataset: (ds.count, ds.m, ds.n, ds.fold),
        }
    }
}

fn feature_fingerprint(ds: &HybridDataset) -> (u64, usize, usize, u64) {
    let fold = ds.raw_features().chunks(2).fold(0u64, |acc, c| {
        let lo = c[0].to_bits() as u64;
        let hi = c.get(1).map_or(0, |x| x.to_bits() as u64);
        acc.rotate_left(1) ^ (lo | hi << 32)
    });
    let metric = match ds.metric() {
        FeatureMetric::L2 => 0,
        FeatureMetric::IP => 1,
    };
    (metric, ds.len(), ds.feature_dim(), fold)
}

impl GraphCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of graphs actually built (cache misses).
    pub fn builds(&self) -> usize {
        self.builds
    }

    pub fn get_or_build(
        &mut self,
        dataset: &Arc<HybridDataset>,
        metric: GraphMetric,
        params: GraphParams,
    ) -> Result<Arc<CompositeGraph>, BenchError> {
        let key = GraphKey::new(&metric, &params, &dataset_checksum(dataset));
        if let Some(g) = self.graphs.get(&key) {
            return Ok(Arc::clone(g));
        }
        let graph = if metric == GraphMetric::FeatureOnly {
            let fkey = feature_fingerprint(dataset);
            match self.feature_only.get(&fkey) {
                Some(g) if *g.params() == params => g.rebind_attributes(Arc::clone(dataset)),
                _ => None,
            }
        } else {
            None
        };
        let graph = match graph {
            Some(g) => Arc::new(g),
            None => {
                self.builds += 1;
                let g = Arc::new(CompositeGraph::build(Arc::clone(dataset), metric, params)?);
                if metric == GraphMetric::FeatureOnly {
                    self.feature_only
                        .insert(feature_fingerprint(dataset), Arc::clone(&g));
                }
                g
            }
        };
        self.graphs.insert(key, Arc::clone(&graph));
        Ok(graph)
    }
}

/// Settings shared by the suites.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub dataset_name: String,
    pub k: usize,
    /// ef_search values; the robustness suite defaults to a single 80.
    pub budgets: Vec<usize>,
    pub threads: usize,
    pub graph: GraphParams,
    pub fusion: FusionParams,
    /// Attribute dimensions per point.
    pub attr_dims: usize,
    /// Seed of the attribute streams.
    pub seed: u64,
}

impl SuiteConfig {
    pub const DEFAULT_EF_SEARCH: usize = 80;
    pub const DEFAULT_K: usize = 10;

    pub fn new(dataset_name: impl Into<String>) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            k: Self::DEFAULT_K,
            budgets: vec![Self::DEFAULT_EF_SEARCH],
            threads: 1,
            graph: GraphParams::default(),
            fusion: FusionParams::default(),
            attr_dims: 1,
            seed: GraphParams::DEFAULT_SEED,
        }
    }
}

/// Base and query features that stay fixed while attributes are regenerated.
#[derive(Debug, Clone, Copy)]
pub struct FeatureSet<'a> {
    pub base: &'a [Vec<f32>],
    pub queries: &'a [Vec<f32>],
    pub metric: FeatureMetric,
}

/// Base and query datasets with freshly drawn attributes in `0..categories`.
pub fn with_random_attributes(
    features: FeatureSet<'_>,
    categories: u32,
    attr_dims: usize,
    seed: u64,
) -> Result<(Arc<HybridDataset>, HybridDataset), BenchError> {
    let base_attrs =
        random_attributes(features.base.len(), categories, attr_dims, seed, Role::Base);
    let query_attrs = random_attributes(
        features.queries.len(),
        categories,
        attr_dims,
        seed,
        Role::Query,
    );
    let base = HybridDataset::from_rows(features.base, &base_attrs, features.metric)?;
    let queries = HybridDataset::from_rows(features.queries, &query_attrs, features.metric)?;
    Ok((Arc::new(base), queries))
}

#[allow(clippy::too_many_arguments)]
fn measure(
    cache: &mut GraphCache,
    base: &Arc<HybridDataset>,
    queries: &HybridDataset,
    gt: &GroundTruth,
    strategy: Strategy,
    fusion: FusionParams,
    categories: u32,
    cfg: &SuiteConfig,
) -> Result<Vec<RunRecord>, BenchError> {
    let mut indexes = Indexes::new(base);
    let held;
    match strategy {
        Strategy::Fusion => {
            held = cache.get_or_build(base, GraphMetric::Fused(fusion), cfg.graph)?;
            indexes = indexes.with_fused(&held);
        }
        Strategy::SearchThenFilter { .. } => {
            held = cache.get_or_build(base, GraphMetric::FeatureOnly, cfg.graph)?;
            indexes = indexes.with_feature(&held);
        }
        Strategy::FilterThenSearch => {}
    }
    let label = RunLabel::for_graph(&cfg.dataset_name, categories, &fusion, &cfg.graph);
    sweep(
        &indexes,
        strategy,
        queries,
        gt,
        cfg.k,
        &cfg.budgets,
        cfg.threads,
        &label,
    )
}

/// Re-runs every strategy while the attribute cardinality grows.
///
/// Features are fixed; for each `C` the attributes are redrawn from the same
/// seed and the indexes that depend on them are rebuilt.
pub fn robustness_suite(
    features: FeatureSet<'_>,
    categories: &[u32],
    strategies: &[Strategy],
    cfg: &SuiteConfig,
    cache: &mut GraphCache,
) -> Result<Vec<RunRecord>, BenchError> {
    let mut records = Vec::new();
    for &c in categories {
        let (base, queries) = with_random_attributes(features, c, cfg.attr_dims, cfg.seed)?;
        let gt = ground_truth(&base, &queries, cfg.k)?;
        for &s in strategies {
            records.extend(measure(cache, &base, &queries, &gt, s, cfg.fusion, c, cfg)?);
        }
    }
    Ok(records)
}

/// How the sensitivity suite picks `bias` for each `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasMode {
    /// Same bias for every `w`, even where it no longer clears `w * g_max + 1/log10(2)`.
    Fixed(f64),
    /// `w * g_max + 1/log10(2) + margin`.
    Derived { margin: f64 },
}

/// Fusion recall across scale factors `w` at fixed attribute cardinality.
pub fn w_sensitivity_suite(
    features: FeatureSet<'_>,
    categories: u32,
    w_list: &[f64],
    bias: BiasMode,
    cfg: &SuiteConfig,
    cache: &mut GraphCache,
) -> Result<Vec<RunRecord>, BenchError> {
    let (base, queries) = with_random_attributes(features, categories, cfg.attr_dims, cfg.seed)?;
    let gt = ground_truth(&base, &queries, cfg.k)?;
    let g_max = cfg.fusion.g_max();
    let mut records = Vec::new();
    for &w in w_list {
        let b = match bias {
            BiasMode::Fixed(b) => b,
            BiasMode::Derived { margin } => w * g_max + INV_LOG10_2 + margin,
        };
        let fusion = FusionParams::new_unchecked(w, b, g_max, cfg.fusion.attr_metric())?;
        records.extend(measure(
            cache,
            &base,
            &queries,
            &gt,
            Strategy::Fusion,
            fusion,
            categories,
            cfg,
        )?);
    }
    Ok(records)
}
