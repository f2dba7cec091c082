use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use hybrid_ann::bench::{
    robustness_suite, sweep, w_sensitivity_suite, write_csv, BiasMode, FeatureSet, GraphCache,
    RunLabel, RunRecord, SuiteConfig,
};
use hybrid_ann::dataio::{generate_synthetic, read_ivecs, save_dataset, write_vecs, SyntheticSpec};
use hybrid_ann::graph::{load, save};
use hybrid_ann::strategies::{ground_truth, run_strategy_point};
use hybrid_ann::{
    CompositeGraph, FusionParams, GraphMetric, GraphParams, GroundTruth, HybridDataset, Indexes,
    ParamError, Strategy,
};

use crate::data::{
    metric_name, DataDir, Manifest, BASE_ATTRS, BASE_FEATURES, MANIFEST, QUERY_ATTRS,
    QUERY_FEATURES,
};
use crate::{
    BenchArgs, BuildArgs, FusionArgs, GenArgs, GraphArgs, GraphKind, GtArgs, RobustnessArgs,
    SearchArgs, SensitivityArgs, SuiteArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or refused overwrite; exit code 2.
    Usage(String),
    /// Failure while doing the work; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn runtime<E: Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn refuse_existing(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::usage(format!(
            "{} already exists, pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn threads_or_default(threads: Option<usize>) -> Result<usize, CliError> {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(t) => Ok(t),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn check_budgets(ef: &[usize], k: usize) -> Result<(), CliError> {
    if ef.is_empty() {
        return Err(CliError::usage("--ef needs at least one value"));
    }
    match ef.iter().find(|&&e| e < k) {
        Some(e) => Err(CliError::usage(format!("--ef {e} is smaller than k {k}"))),
        None => Ok(()),
    }
}

fn fusion_params(f: &FusionArgs) -> Result<FusionParams, CliError> {
    Ok(FusionParams::new(
        f.w,
        f.bias,
        f.g_max,
        f.attr_metric.into(),
    )?)
}

fn graph_params(g: &GraphArgs) -> Result<GraphParams, CliError> {
    Ok(GraphParams::new(g.m, g.ef_construction, g.seed)?)
}

fn graph_metric(kind: GraphKind, fusion: FusionParams) -> GraphMetric {
    match kind {
        GraphKind::Fused => GraphMetric::Fused(fusion),
        GraphKind::Feature => GraphMetric::FeatureOnly,
    }
}

fn write_records(path: &Path, provenance: &str, records: &[RunRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(runtime(&path.display().to_string()))?;
    write_csv(BufWriter::new(file), provenance, records)
        .map_err(runtime(&path.display().to_string()))
}

pub fn gen(a: &GenArgs) -> Result<(), CliError> {
    refuse_existing(&a.out, a.force)?;
    let mut spec = SyntheticSpec::new(
        a.count as usize,
        a.dim as usize,
        a.categories,
        a.attr_dims as usize,
        a.seed,
    );
    spec.normalized = a.metric == crate::MetricArg::Ip;
    spec.validate().map_err(CliError::Usage)?;
    let base = generate_synthetic(&spec).map_err(runtime("generate"))?;
    let queries = generate_synthetic(&spec.queries().with_count(a.queries as usize))
        .map_err(runtime("generate"))?;

    fs::create_dir_all(&a.out).map_err(runtime(&a.out.display().to_string()))?;
    save_dataset(&base, a.out.join(BASE_FEATURES), a.out.join(BASE_ATTRS))
        .map_err(runtime("write base"))?;
    save_dataset(
        &queries,
        a.out.join(QUERY_FEATURES),
        a.out.join(QUERY_ATTRS),
    )
    .map_err(runtime("write queries"))?;

    let mut manifest = Manifest::default();
    manifest.set("metric", metric_name(spec.metric()));
    manifest.set("dim", spec.m);
    manifest.set("categories", spec.categories);
    manifest.set("attr_dims", spec.n);
    manifest.set("seed", spec.seed);
    manifest.set("base_count", base.len());
    manifest.set("query_count", queries.len());
    fs::write(a.out.join(MANIFEST), manifest.render()).map_err(runtime("write manifest"))?;

    let mut out = io::stdout().lock();
    let lines = [
        (BASE_FEATURES, base.len(), spec.m),
        (BASE_ATTRS, base.len(), spec.n),
        (QUERY_FEATURES, queries.len(), spec.m),
        (QUERY_ATTRS, queries.len(), spec.n),
    ];
    for (file, rows, dim) in lines {
        writeln!(
            out,
            "{}\trows={rows}\tdim={dim}\tmetric={}\tC={}\tseed={}",
            a.out.join(file).display(),
            metric_name(spec.metric()),
            spec.categories,
            spec.seed
        )
        .map_err(runtime("stdout"))?;
    }
    Ok(())
}

pub fn build(a: &BuildArgs) -> Result<(), CliError> {
    refuse_existing(&a.out, a.force)?;
    let metric = graph_metric(a.graph, fusion_params(&a.fusion)?);
    let params = graph_params(&a.params)?;
    let data = DataDir::open(&a.data)?;
    let base = data.base()?;
    let graph = CompositeGraph::build(base, metric, params).map_err(runtime("build"))?;
    save(&graph, &a.out).map_err(runtime(&a.out.display().to_string()))?;
    eprintln!(
        "built {} graph over {} points: {} levels, entry point {}",
        match a.graph {
            GraphKind::Fused => "fused",
            GraphKind::Feature => "feature-only",
        },
        graph.len(),
        graph.max_level() + 1,
        graph.entry_point()
    );
    Ok(())
}

pub fn gt(a: &GtArgs) -> Result<(), CliError> {
    refuse_existing(&a.out, a.force)?;
    let data = DataDir::open(&a.data)?;
    let base = data.base()?;
    let queries = data.queries(&a.queries)?;
    let truth = ground_truth(&base, &queries, a.k as usize).map_err(runtime("ground truth"))?;
    write_vecs(&a.out, &truth.rows).map_err(runtime(&a.out.display().to_string()))
}

fn load_index(path: &Path, base: &Arc<HybridDataset>) -> Result<CompositeGraph, CliError> {
    load(path, Arc::clone(base)).map_err(runtime(&path.display().to_string()))
}

/// Attaches `graph` to the slot `strategy` reads, rejecting the wrong kind.
fn indexes_for<'a>(
    base: &'a HybridDataset,
    strategy: Strategy,
    graph: Option<&'a CompositeGraph>,
) -> Result<Indexes<'a>, CliError> {
    let idx = Indexes::new(base);
    match (strategy, graph) {
        (Strategy::FilterThenSearch, _) => Ok(idx),
        (Strategy::Fusion, Some(g)) if matches!(g.metric(), GraphMetric::Fused(_)) => {
            Ok(idx.with_fused(g))
        }
        (Strategy::SearchThenFilter { .. }, Some(g)) if *g.metric() == GraphMetric::FeatureOnly => {
            Ok(idx.with_feature(g))
        }
        (Strategy::Fusion, Some(_)) => Err(CliError::usage(
            "fusion needs an index built with --graph fused",
        )),
        (_, Some(_)) => Err(CliError::usage(
            "post-filter needs an index built with --graph feature",
        )),
        (s, None) => Err(CliError::usage(format!("{} needs --index", s.name()))),
    }
}

pub fn search(a: &SearchArgs) -> Result<(), CliError> {
    let k = a.k as usize;
    check_budgets(&[a.ef], k)?;
    let data = DataDir::open(&a.data)?;
    let base = data.base()?;
    let queries = data.queries(&a.queries)?;
    let graph = a
        .index
        .as_deref()
        .map(|p| load_index(p, &base))
        .transpose()?;
    let idx = indexes_for(&base, a.strategy, graph.as_ref())?;
    let mut out = BufWriter::new(io::stdout().lock());
    for qi in 0..queries.len() {
        let hits = run_strategy_point(a.strategy, &idx, queries.point(qi), k, a.ef)
            .map_err(|e| CliError::runtime(format!("query {qi}: {e}")))?;
        let line: Vec<String> = hits
            .iter()
            .map(|h| format!("{}\t{}", h.id, h.fused_dist))
            .collect();
        writeln!(out, "{}", line.join("\t")).map_err(runtime("stdout"))?;
    }
    out.flush().map_err(runtime("stdout"))
}

fn read_truth(path: &Path, queries: usize, k: usize) -> Result<GroundTruth, CliError> {
    let (rows, dim) = read_ivecs(path).map_err(runtime(&path.display().to_string()))?;
    if rows.len() != queries {
        return Err(CliError::usage(format!(
            "{} has {} rows for {queries} queries",
            path.display(),
            rows.len()
        )));
    }
    if !rows.is_empty() && dim != k {
        return Err(CliError::usage(format!(
            "{} was computed for k={dim}, not k={k}",
            path.display()
        )));
    }
    Ok(GroundTruth { k, rows })
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    refuse_existing(&a.out, a.force)?;
    let k = a.k as usize;
    check_budgets(&a.ef, k)?;
    let threads = threads_or_default(a.threads)?;
    let fusion = fusion_params(&a.fusion)?;
    let params = graph_params(&a.params)?;
    let data = DataDir::open(&a.data)?;
    let base = data.base()?;
    let queries = data.queries(&a.queries)?;
    let truth = match &a.gt {
        Some(p) => read_truth(p, queries.len(), k)?,
        None => ground_truth(&base, &queries, k).map_err(runtime("ground truth"))?,
    };
    let graph = match (&a.index, a.strategy) {
        (Some(p), _) => Some(load_index(p, &base)?),
        (None, Strategy::FilterThenSearch) => None,
        (None, s) => {
            let kind = if s == Strategy::Fusion {
                GraphKind::Fused
            } else {
                GraphKind::Feature
            };
            let g = CompositeGraph::build(Arc::clone(&base), graph_metric(kind, fusion), params)
                .map_err(runtime("build"))?;
            Some(g)
        }
    };
    // A loaded index carries its own build parameters.
    let (fusion, params) = match &graph {
        Some(g) => (g.metric().fusion().copied().unwrap_or(fusion), *g.params()),
        None => (fusion, params),
    };
    let idx = indexes_for(&base, a.strategy, graph.as_ref())?;
    let label = RunLabel::for_graph(&data.name(), data.categories(), &fusion, &params);
    let records = sweep(
        &idx, a.strategy, &queries, &truth, k, &a.ef, threads, &label,
    )
    .map_err(runtime("bench"))?;
    let provenance = format!(
        "hybrid-ann bench data={} metric={} strategy={} w={} bias={} attr_metric={} M={} ef_construction={} seed={} ef={:?} k={k} threads={threads}",
        data.dir.display(),
        metric_name(data.metric),
        a.strategy,
        fusion.w(),
        fusion.bias(),
        fusion.attr_metric().name(),
        params.m,
        params.ef_construction,
        params.seed,
        a.ef,
    );
    write_records(&a.out, &provenance, &records)
}

struct Suite {
    data: DataDir,
    base: Vec<Vec<f32>>,
    queries: Vec<Vec<f32>>,
    cfg: SuiteConfig,
}

impl Suite {
    fn open(s: &SuiteArgs) -> Result<Self, CliError> {
        refuse_existing(&s.out, s.force)?;
        let k = s.k as usize;
        check_budgets(&s.ef, k)?;
        let data = DataDir::open(&s.data)?;
        let mut cfg = SuiteConfig::new(data.name());
        cfg.k = k;
        cfg.budgets = s.ef.clone();
        cfg.threads = threads_or_default(s.threads)?;
        cfg.graph = graph_params(&s.params)?;
        cfg.fusion = FusionParams::new_unchecked(
            s.fusion.w,
            s.fusion.bias,
            s.fusion.g_max,
            s.fusion.attr_metric.into(),
        )?;
        cfg.attr_dims = s.attr_dims as usize;
        cfg.seed = s.attr_seed;
        let base = data.features(BASE_FEATURES)?;
        let queries = data.features(QUERY_FEATURES)?;
        Ok(Self {
            data,
            base,
            queries,
            cfg,
        })
    }

    fn features(&self) -> FeatureSet<'_> {
        FeatureSet {
            base: &self.base,
            queries: &self.queries,
            metric: self.data.metric,
        }
    }

    fn provenance(&self, command: &str, extra: &str) -> String {
        let c = &self.cfg;
        format!(
            "hybrid-ann {command} data={} metric={} {extra} attr_metric={} g_max={} M={} ef_construction={} seed={} attr_dims={} attr_seed={} ef={:?} k={} threads={}",
            self.data.dir.display(),
            metric_name(self.data.metric),
            c.fusion.attr_metric().name(),
            c.fusion.g_max(),
            c.graph.m,
            c.graph.ef_construction,
            c.graph.seed,
            c.attr_dims,
            c.seed,
            c.budgets,
            c.k,
            c.threads,
        )
    }
}

pub fn robustness(a: &RobustnessArgs) -> Result<(), CliError> {
    let suite = Suite::open(&a.suite)?;
    if !suite.cfg.fusion.is_dominant() {
        let f = &suite.cfg.fusion;
        return Err(CliError::usage(format!(
            "bias {} too small, must exceed {}",
            f.bias(),
            FusionParams::min_bias(f.w(), f.g_max())
        )));
    }
    if a.categories.contains(&0) {
        return Err(CliError::usage("--categories values must be at least 1"));
    }
    let mut cache = GraphCache::new();
    let records = robustness_suite(
        suite.features(),
        &a.categories,
        &a.strategies,
        &suite.cfg,
        &mut cache,
    )
    .map_err(runtime("robustness"))?;
    let names: Vec<String> = a.strategies.iter().map(ToString::to_string).collect();
    let extra = format!(
        "categories={:?} strategies={} w={} bias={}",
        a.categories,
        names.join("+"),
        suite.cfg.fusion.w(),
        suite.cfg.fusion.bias()
    );
    write_records(
        &a.suite.out,
        &suite.provenance("robustness", &extra),
        &records,
    )
}

pub fn sensitivity(a: &SensitivityArgs) -> Result<(), CliError> {
    let suite = Suite::open(&a.suite)?;
    if a.w_list.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(CliError::usage(
            "--w-list values must be positive and finite",
        ));
    }
    let mode = match a.bias_margin {
        Some(margin) if margin > 0.0 => BiasMode::Derived { margin },
        Some(margin) => {
            return Err(CliError::usage(format!(
                "--bias-margin must be positive, got {margin}"
            )))
        }
        None => BiasMode::Fixed(suite.cfg.fusion.bias()),
    };
    let mut cache = GraphCache::new();
    let records = w_sensitivity_suite(
        suite.features(),
        a.categories,
        &a.w_list,
        mode,
        &suite.cfg,
        &mut cache,
    )
    .map_err(runtime("sensitivity"))?;
    let bias = match mode {
        BiasMode::Fixed(b) => format!("bias={b}"),
        BiasMode::Derived { margin } => format!("bias_margin={margin}"),
    };
    let extra = format!("categories={} w_list={:?} {bias}", a.categories, a.w_list);
    write_records(
        &a.suite.out,
        &suite.provenance("sensitivity", &extra),
        &records,
    )
}
