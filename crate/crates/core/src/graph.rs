//! Hierarchical navigable proximity graph over a pluggable point distance.
//!
//! Built under [`GraphMetric::Fused`], points with equal attributes end up
//! linked to each other first, and the remaining slots go to points with
//! the nearest differing attributes. A query then descends the hierarchy and
//! runs an ordinary best-first beam search at level 0; it reaches the region
//! of its own attribute value because that is where the fused distance is
//! smallest, then ranks that region by feature distance.
//!
//! Construction is single-threaded and deterministic for a given seed.
//! Search takes `&self` and may run from any number of threads.

mod persist;

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use persist::{dataset_checksum, load, save, DatasetChecksum, INDEX_MAGIC, INDEX_VERSION};

use crate::error::{ParamError, SearchError};
use crate::metrics::{GraphMetric, Kernel};
use crate::types::{HybridDataset, HybridQuery, PointRef, SearchHit};

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    /// Max neighbors per node on levels >= 1; level 0 allows `2 * m`.
    pub m: usize,
    pub ef_construction: usize,
    /// Level sampling multiplier; `floor(-ln(U) * level_norm)`.
    pub level_norm: f64,
    pub seed: u64,
}

impl GraphParams {
    pub const DEFAULT_M: usize = 32;
    pub const DEFAULT_EF_CONSTRUCTION: usize = 512;
    pub const DEFAULT_SEED: u64 = 42;

    pub fn new(m: usize, ef_construction: usize, seed: u64) -> Result<Self, ParamError> {
        let p = Self {
            m,
            ef_construction,
            level_norm: 1.0 / (m as f64).ln(),
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.m < 2 {
            return Err(ParamError::InvalidGraph(format!(
                "M must be >= 2, got {}",
                self.m
            )));
        }
        if self.ef_construction < self.m {
            return Err(ParamError::InvalidGraph(format!(
                "ef_construction {} must be >= M {}",
                self.ef_construction, self.m
            )));
        }
        if !(self.level_norm >= 0.0 && self.level_norm.is_finite()) {
            return Err(ParamError::InvalidGraph(format!(
                "level_norm must be finite and non-negative, got {}",
                self.level_norm
            )));
        }
        Ok(())
    }

    pub fn max_degree(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

impl Default for GraphParams {
    fn default() -> Self {
        Self::new(
            Self::DEFAULT_M,
            Self::DEFAULT_EF_CONSTRUCTION,
            Self::DEFAULT_SEED,
        )
        .expect("default graph params are valid")
    }
}

/// Heap entry ordered by `(distance, id)`.
#[derive(Debug, Clone, Copy)]
struct Cand {
    dist: f64,
    id: u32,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

/// Generation-stamped visited set, reused across searches.
#[derive(Debug, Default)]
struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn reset(&mut self, n: usize) {
        if self.marks.len() < n {
            self.marks.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Marks `id`; returns true if it was not yet visited.
    #[inline]
    fn insert(&mut self, id: u32) -> bool {
        let slot = &mut self.marks[id as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

thread_local! {
    static VISITED: RefCell<Visited> = RefCell::new(Visited::default());
}

/// Multilayer proximity graph plus the dataset it indexes.
#[derive(Debug, Clone)]
pub struct CompositeGraph {
    params: GraphParams,
    metric: GraphMetric,
    dataset: Arc<HybridDataset>,
    kernel: Kernel,
    /// `links[node][level]`, for levels `0..=level_of(node)`.
    links: Vec<Vec<Vec<u32>>>,
    entry_point: usize,
    max_level: usize,
}

impl PartialEq for CompositeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.metric == other.metric
            && self.entry_point == other.entry_point
            && self.max_level == other.max_level
            && self.links == other.links
            && (Arc::ptr_eq(&self.dataset, &other.dataset) || self.dataset == other.dataset)
    }
}

impl CompositeGraph {
    /// Builds the graph by inserting points in id order.
    pub fn build(
        dataset: Arc<HybridDataset>,
        metric: GraphMetric,
        params: GraphParams,
    ) -> Result<Self, SearchError> {
        Self::build_observed(dataset, metric, params, |_, _| {})
    }

    /// Like [`build`](Self::build), calling `observe(graph, id)` after each insertion.
    pub fn build_observed(
        dataset: Arc<HybridDataset>,
        metric: GraphMetric,
        params: GraphParams,
        mut observe: impl FnMut(&CompositeGraph, usize),
    ) -> Result<Self, SearchError> {
        if dataset.is_empty() {
            return Err(SearchError::EmptyDataset);
        }
        assert!(
            dataset.len() <= u32::MAX as usize,
            "node ids are stored as u32"
        );
        let kernel = Kernel::new(dataset.metric(), metric);
        let mut graph = Self {
            params,
            metric,
            dataset,
            kernel,
            links: Vec::new(),
            entry_point: 0,
            max_level: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut visited = Visited::default();
        for id in 0..graph.dataset.len() {
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = (-u.ln() * params.level_norm).floor() as usize;
            graph.insert(id, level, &mut visited);
            observe(&graph, id);
        }
        Ok(graph)
    }

    pub(crate) fn from_parts(
        dataset: Arc<HybridDataset>,
        metric: GraphMetric,
        params: GraphParams,
        links: Vec<Vec<Vec<u32>>>,
        entry_point: usize,
    ) -> Self {
        let max_level = links[entry_point].len() - 1;
        Self {
            kernel: Kernel::new(dataset.metric(), metric),
            params,
            metric,
            dataset,
            links,
            entry_point,
            max_level,
        }
    }

    /// Reuses a feature-only graph for a dataset with the same features but
    /// different attributes. Returns `None` when the graph depends on
    /// attributes or the features differ.
    pub fn rebind_attributes(&self, dataset: Arc<HybridDataset>) -> Option<Self> {
        if self.metric != GraphMetric::FeatureOnly
            || dataset.metric() != self.dataset.metric()
            || dataset.feature_dim() != self.dataset.feature_dim()
            || dataset.raw_features() != self.dataset.raw_features()
        {
            return None;
        }
        Some(Self {
            dataset,
            ..self.clone()
        })
    }

    fn insert(&mut self, id: usize, level: usize, visited: &mut Visited) {
        self.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            self.entry_point = 0;
            self.max_level = level;
            return;
        }
        let ds = Arc::clone(&self.dataset);
        let q = ds.point(id);
        let mut ep = Cand {
            dist: self.kernel.distance(q, ds.point(self.entry_point)),
            id: self.entry_point as u32,
        };
        for lc in ((level + 1)..=self.max_level).rev() {
            ep = self.greedy_closest(q, ep, lc);
        }
        let mut entries = vec![ep];
        for lc in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(q, &entries, self.params.ef_construction, lc, visited);
            let selected = self.select_neighbors(&found, self.params.m, Some(id as u32));
            for &nb in &selected {
                self.add_link(nb.id as usize, id as u32, lc);
            }
            self.links[id][lc] = selected.iter().map(|c| c.id).collect();
            entries = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry_point = id;
        }
    }

    /// Appends `new` to `node`'s list, re-running the selection when full.
    fn add_link(&mut self, node: usize, new: u32, level: usize) {
        let cap = self.params.max_degree(level);
        if self.links[node][level].len() < cap {
            self.links[node][level].push(new);
            return;
        }
        let base = self.dataset.point(node);
        let mut cands: Vec<Cand> = self.links[node][level]
            .iter()
            .chain(std::iter::once(&new))
            .map(|&id| Cand {
                dist: self.kernel.distance(base, self.dataset.point(id as usize)),
                id,
            })
            .collect();
        cands.sort_unstable();
        let kept = self.select_neighbors(&cands, cap, None);
        self.links[node][level] = kept.iter().map(|c| c.id).collect();
    }

    /// Diversity heuristic: walk `sorted` ascending and keep a candidate only
    /// if it is not closer to an already kept neighbor than to the base point.
    fn select_neighbors(&self, sorted: &[Cand], limit: usize, skip: Option<u32>) -> Vec<Cand> {
        let mut kept: Vec<Cand> = Vec::with_capacity(limit);
        for &c in sorted {
            if kept.len() >= limit {
                break;
            }
            if Some(c.id) == skip {
                continue;
            }
            let cp = self.dataset.point(c.id as usize);
            let diverse = kept
                .iter()
                .all(|s| self.kernel.distance(cp, self.dataset.point(s.id as usize)) >= c.dist);
            if diverse {
                kept.push(c);
            }
        }
        kept
    }

    fn greedy_closest(&self, q: PointRef<'_>, mut best: Cand, level: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in &self.links[best.id as usize][level] {
                let c = Cand {
                    dist: self.kernel.distance(q, self.dataset.point(nb as usize)),
                    id: nb,
                };
                if c < best {
                    best = c;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Best-first beam search on one level; returns up to `ef` candidates ascending.
    fn search_layer(
        &self,
        q: PointRef<'_>,
        entries: &[Cand],
        ef: usize,
        level: usize,
        visited: &mut Visited,
    ) -> Vec<Cand> {
        visited.reset(self.links.len());
        let mut frontier: BinaryHeap<Reverse<Cand>> = BinaryHeap::with_capacity(ef * 2);
        let mut best: BinaryHeap<Cand> = BinaryHeap::with_capacity(ef + 1);
        for &e in entries {
            if visited.insert(e.id) {
                frontier.push(Reverse(e));
                best.push(e);
                if best.len() > ef {
                    best.pop();
                }
            }
        }
        while let Some(Reverse(c)) = frontier.pop() {
            if best.len() >= ef && c > *best.peek().expect("non-empty") {
                break;
            }
            for &nb in &self.links[c.id as usize][level] {
                if !visited.insert(nb) {
                    continue;
                }
                let cand = Cand {
                    dist: self.kernel.distance(q, self.dataset.point(nb as usize)),
                    id: nb,
                };
                if best.len() < ef || cand < *best.peek().expect("non-empty") {
                    frontier.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    fn check_query(&self, q: PointRef<'_>, k: usize, ef_search: usize) -> Result<(), SearchError> {
        if q.feature.len() != self.dataset.feature_dim() {
            return Err(SearchError::DimensionMismatch {
                what: "feature",
                expected: self.dataset.feature_dim(),
                found: q.feature.len(),
            });
        }
        if q.attrs.len() != self.dataset.attr_dim() {
            return Err(SearchError::DimensionMismatch {
                what: "attrs",
                expected: self.dataset.attr_dim(),
                found: q.attrs.len(),
            });
        }
        if k == 0 {
            return Err(SearchError::ZeroK);
        }
        if ef_search < k {
            return Err(SearchError::BudgetTooSmall { ef_search, k });
        }
        Ok(())
    }

    /// Top-`query.k` hits by graph distance, ascending, ties by id.
    pub fn search(&self, query: &HybridQuery) -> Result<Vec<SearchHit>, SearchError> {
        self.search_point(query.as_point(), query.k, query.ef_search)
    }

    pub fn search_point(
        &self,
        q: PointRef<'_>,
        k: usize,
        ef_search: usize,
    ) -> Result<Vec<SearchHit>, SearchError> {
        self.check_query(q, k, ef_search)?;
        let mut ep = Cand {
            dist: self
                .kernel
                .distance(q, self.dataset.point(self.entry_point)),
            id: self.entry_point as u32,
        };
        for lc in (1..=self.max_level).rev() {
            ep = self.greedy_closest(q, ep, lc);
        }
        let found =
            VISITED.with(|v| self.search_layer(q, &[ep], ef_search, 0, &mut v.borrow_mut()));
        Ok(found
            .into_iter()
            .take(k)
            .map(|c| {
                let p = self.dataset.point(c.id as usize);
                let (fused_dist, feature_dist) = self.kernel.parts(q, p);
                SearchHit {
                    id: c.id as usize,
                    fused_dist,
                    feature_dist,
                    attrs_match: p.attrs == q.attrs,
                }
            })
            .collect())
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn metric(&self) -> &GraphMetric {
        &self.metric
    }

    pub fn dataset(&self) -> &Arc<HybridDataset> {
        &self.dataset
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn entry_point(&self) -> usize {
        self.entry_point
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Highest level `node` appears on.
    pub fn level_of(&self, node: usize) -> usize {
        self.links[node].len() - 1
    }

    pub fn neighbors(&self, node: usize, level: usize) -> &[u32] {
        self.links[node].get(level).map_or(&[], Vec::as_slice)
    }

    /// Number of nodes reachable from the entry point along level-0 links.
    pub fn reachable_at_level0(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.entry_point];
        seen[self.entry_point] = true;
        let mut count = 0;
        while let Some(u) = stack.pop() {
            count += 1;
            for &v in self.neighbors(u, 0) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v as usize);
                }
            }
        }
        count
    }

    pub fn is_connected_at_level0(&self) -> bool {
        self.reachable_at_level0() == self.len()
    }

    /// Checks degree bounds, link validity and the entry-point level.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (node, levels) in self.links.iter().enumerate() {
            if levels.is_empty() {
                return Err(format!("node {node} has no levels"));
            }
            if levels.len() - 1 > self.max_level {
                return Err(format!("node {node} is above the entry point level"));
            }
            for (level, list) in levels.iter().enumerate() {
                if list.len() > self.params.max_degree(level) {
                    return Err(format!(
                        "node {node} level {level}: degree {} over {}",
                        list.len(),
                        self.params.max_degree(level)
                    ));
                }
                let mut sorted = list.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != list.len() {
                    return Err(format!("node {node} level {level}: duplicate neighbor"));
                }
                for &nb in list {
                    let nb = nb as usize;
                    if nb == node {
                        return Err(format!("node {node} level {level}: self link"));
                    }
                    if nb >= self.links.len() || self.links[nb].len() <= level {
                        return Err(format!("node {node} level {level}: invalid neighbor {nb}"));
                    }
                }
            }
        }
        if self.links[self.entry_point].len() - 1 != self.max_level {
            return Err("entry point is not on the top level".into());
        }
        Ok(())
    }
}
