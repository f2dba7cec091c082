//! Hybrid query strategies and the exact oracles used as ground truth.
//!
//! * [`Strategy::Fusion`]: one traversal of a graph built under the fused metric.
//! * [`Strategy::SearchThenFilter`]: fetch `expansion * k` feature neighbors
//!   from a feature-only graph, drop attribute mismatches, keep the first `k`.
//! * [`Strategy::FilterThenSearch`]: exact scan of the points whose attributes
//!   match, ranked by feature distance.

use std::fmt;
use std::str::FromStr;

use crate::error::SearchError;
use crate::graph::CompositeGraph;
use crate::metrics::{feature_distance_raw, fused_distance};
use crate::types::{FusionParams, HybridDataset, HybridQuery, PointRef, SearchHit};

/// Ground-truth padding for queries with fewer than `k` attribute matches.
pub const SENTINEL: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Fusion,
    SearchThenFilter { expansion: usize },
    FilterThenSearch,
}

impl Strategy {
    pub const DEFAULT_EXPANSION: usize = 100;

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Fusion => "fusion",
            Strategy::SearchThenFilter { .. } => "post-filter",
            Strategy::FilterThenSearch => "pre-filter",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::SearchThenFilter { expansion } => write!(f, "post-filter(F={expansion})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    /// Accepts `fusion`, `pre-filter`, `post-filter` (F = 100) and `post-filter:<F>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fusion" => Ok(Strategy::Fusion),
            "pre-filter" | "filter-then-search" => Ok(Strategy::FilterThenSearch),
            "post-filter" | "search-then-filter" => Ok(Strategy::SearchThenFilter {
                expansion: Self::DEFAULT_EXPANSION,
            }),
            other => {
                let f = other
                    .strip_prefix("post-filter:")
                    .ok_or_else(|| format!("unknown strategy '{other}'"))?;
                let expansion: usize = f.parse().map_err(|_| format!("bad expansion '{f}'"))?;
                if expansion == 0 {
                    return Err("expansion must be >= 1".into());
                }
                Ok(Strategy::SearchThenFilter { expansion })
            }
        }
    }
}

/// Indexes available to [`run_strategy`]; each strategy needs a different one.
#[derive(Debug, Clone, Copy)]
pub struct Indexes<'a> {
    pub dataset: &'a HybridDataset,
    /// Graph built under the fused metric.
    pub fused: Option<&'a CompositeGraph>,
    /// Graph built under the feature metric alone.
    pub feature: Option<&'a CompositeGraph>,
}

impl<'a> Indexes<'a> {
    pub fn new(dataset: &'a HybridDataset) -> Self {
        Self {
            dataset,
            fused: None,
            feature: None,
        }
    }

    pub fn with_fused(mut self, g: &'a CompositeGraph) -> Self {
        self.fused = Some(g);
        self
    }

    pub fn with_feature(mut self, g: &'a CompositeGraph) -> Self {
        self.feature = Some(g);
        self
    }
}

/// Per-query ground-truth id lists, padded with [`SENTINEL`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub k: usize,
    pub rows: Vec<Vec<i32>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn check_dims(ds: &HybridDataset, q: PointRef<'_>) -> Result<(), SearchError> {
    if q.feature.len() != ds.feature_dim() {
        return Err(SearchError::DimensionMismatch {
            what: "feature",
            expected: ds.feature_dim(),
            found: q.feature.len(),
        });
    }
    if q.attrs.len() != ds.attr_dim() {
        return Err(SearchError::DimensionMismatch {
            what: "attrs",
            expected: ds.attr_dim(),
            found: q.attrs.len(),
        });
    }
    Ok(())
}

fn top_k(mut hits: Vec<SearchHit>, k: usize) -> Vec<SearchHit> {
    if hits.len() > k {
        hits.select_nth_unstable_by(k, SearchHit::rank_cmp);
        hits.truncate(k);
    }
    hits.sort_unstable_by(SearchHit::rank_cmp);
    hits
}

/// Brute-force top-`k` under the fused distance.
pub fn exact_fused_topk(
    ds: &HybridDataset,
    fusion: &FusionParams,
    q: PointRef<'_>,
    k: usize,
) -> Result<Vec<SearchHit>, SearchError> {
    check_dims(ds, q)?;
    let metric = ds.metric();
    let hits = (0..ds.len())
        .map(|id| {
            let p = ds.point(id);
            let fused_dist = fused_distance(fusion, metric, q, p).expect("dims checked");
            SearchHit {
                id,
                fused_dist,
                feature_dist: feature_distance_raw(metric, q.feature, p.feature),
                attrs_match: p.attrs == q.attrs,
            }
        })
        .collect();
    Ok(top_k(hits, k))
}

/// Exact top-`k` by feature distance among points whose attributes equal the query's.
fn filtered_hits(
    ds: &HybridDataset,
    q: PointRef<'_>,
    k: usize,
) -> Result<Vec<SearchHit>, SearchError> {
    check_dims(ds, q)?;
    let metric = ds.metric();
    let hits = (0..ds.len())
        .filter(|&id| ds.attrs(id) == q.attrs)
        .map(|id| {
            let g = feature_distance_raw(metric, q.feature, ds.feature(id));
            SearchHit {
                id,
                fused_dist: g,
                feature_dist: g,
                attrs_match: true,
            }
        })
        .collect();
    Ok(top_k(hits, k))
}

/// One ground-truth row: exact attribute match, then feature kNN; padded to `k`.
pub fn exact_filtered_topk(
    ds: &HybridDataset,
    q: PointRef<'_>,
    k: usize,
) -> Result<Vec<i32>, SearchError> {
    let mut row: Vec<i32> = filtered_hits(ds, q, k)?
        .into_iter()
        .map(|h| h.id as i32)
        .collect();
    row.resize(k, SENTINEL);
    Ok(row)
}

/// Ground truth for every row of `queries`.
pub fn ground_truth(
    ds: &HybridDataset,
    queries: &HybridDataset,
    k: usize,
) -> Result<GroundTruth, SearchError> {
    let rows = (0..queries.len())
        .map(|i| exact_filtered_topk(ds, queries.point(i), k))
        .collect::<Result<_, _>>()?;
    Ok(GroundTruth { k, rows })
}

pub fn run_strategy(
    strategy: Strategy,
    indexes: &Indexes<'_>,
    query: &HybridQuery,
) -> Result<Vec<SearchHit>, SearchError> {
    run_strategy_point(
        strategy,
        indexes,
        query.as_point(),
        query.k,
        query.ef_search,
    )
}

/// [`run_strategy`] on a borrowed query.
pub fn run_strategy_point(
    strategy: Strategy,
    indexes: &Indexes<'_>,
    q: PointRef<'_>,
    k: usize,
    ef_search: usize,
) -> Result<Vec<SearchHit>, SearchError> {
    if k == 0 {
        return Err(SearchError::ZeroK);
    }
    match strategy {
        Strategy::Fusion => indexes
            .fused
            .ok_or(SearchError::MissingIndex("fusion"))?
            .search_point(q, k, ef_search),
        Strategy::SearchThenFilter { expansion } => {
            let graph = indexes
                .feature
                .ok_or(SearchError::MissingIndex("post-filter"))?;
            if ef_search < k {
                return Err(SearchError::BudgetTooSmall { ef_search, k });
            }
            let fetch = expansion.max(1) * k;
            let mut hits = graph.search_point(q, fetch, ef_search.max(fetch))?;
            hits.retain(|h| h.attrs_match);
            hits.truncate(k);
            Ok(hits)
        }
        Strategy::FilterThenSearch => filtered_hits(indexes.dataset, q, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticSpec};
    use crate::graph::GraphParams;
    use crate::metrics::GraphMetric;
    use crate::types::{FeatureMetric, HybridPoint};
    use std::sync::Arc;

    fn five_points() -> HybridDataset {
        let p = |id, f: [f32; 2], a| HybridPoint {
            id,
            feature: f.to_vec(),
            attrs: vec![a],
        };
        HybridDataset::from_points(
            vec![
                p(0, [1.0, 0.0], 0),
                p(1, [0.0, 1.0], 0),
                p(2, [0.6, 0.8], 1),
                p(3, [0.8, 0.6], 3),
                p(4, [-1.0, 0.0], 0),
            ],
            2,
            1,
            FeatureMetric::IP,
        )
        .unwrap()
    }

    #[test]
    fn fused_oracle_matches_hand_evaluation() {
        // Query (1, 0) with attr 0, defaults w = 0.25, bias = 4.3219.
        //   0: g = 0,   e = 0 -> 0
        //   1: g = 1,   e = 0 -> 0.25
        //   4: g = 2,   e = 0 -> 0.5
        //   2: g = 0.4, e = 1 -> 0.1 + (4.3219 - 1/log10 2)  = 1.09997...
        //   3: g = 0.2, e = 3 -> 0.05 + (4.3219 - 1/log10 4) = 2.71093...
        let ds = five_points();
        let q = PointRef {
            feature: &[1.0, 0.0],
            attrs: &[0],
        };
        let hits = exact_fused_topk(&ds, &FusionParams::default(), q, 5).unwrap();
        let ids: Vec<usize> = hits.iter().map(|h| h.id).collect();
        assert_eq!(ids, [0, 1, 4, 2, 3]);
        let want = [0.0, 0.25, 0.5, 1.099_971_899_2, 2.710_935_949_6];
        for (h, w) in hits.iter().zip(want) {
            assert!((h.fused_dist - w).abs() < 1e-6, "{} vs {w}", h.fused_dist);
        }
        assert_eq!(
            exact_filtered_topk(&ds, q, 5).unwrap(),
            vec![0, 1, 4, SENTINEL, SENTINEL]
        );
    }

    #[test]
    fn no_match_gives_all_sentinels() {
        let ds = five_points();
        let q = PointRef {
            feature: &[1.0, 0.0],
            attrs: &[9],
        };
        assert_eq!(exact_filtered_topk(&ds, q, 3).unwrap(), vec![SENTINEL; 3]);
    }

    #[test]
    fn full_k_sorts_everything() {
        let ds = generate_synthetic(&SyntheticSpec::new(60, 4, 3, 1, 2)).unwrap();
        let hits = exact_fused_topk(&ds, &FusionParams::default(), ds.point(5), 60).unwrap();
        assert_eq!(hits.len(), 60);
        assert_eq!(hits[0].id, 5);
        assert!(hits.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_lt()));
    }

    #[test]
    fn single_category_filter_is_plain_knn() {
        let ds = generate_synthetic(&SyntheticSpec::new(80, 4, 1, 1, 2)).unwrap();
        let q = PointRef {
            feature: ds.feature(0),
            attrs: &[0],
        };
        let row = exact_filtered_topk(&ds, q, 10).unwrap();
        let mut all: Vec<(f64, usize)> = (0..80)
            .map(|i| {
                (
                    feature_distance_raw(FeatureMetric::IP, q.feature, ds.feature(i)),
                    i,
                )
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<i32> = all[..10].iter().map(|x| x.1 as i32).collect();
        assert_eq!(row, want);
    }

    #[test]
    fn strategy_names_parse() {
        for s in ["fusion", "pre-filter", "post-filter", "post-filter:7"] {
            let parsed: Strategy = s.parse().unwrap();
            assert!(s.starts_with(parsed.name()));
        }
        assert!("post-filter:0".parse::<Strategy>().is_err());
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn post_filter_with_unit_expansion_can_come_back_short() {
        // Two far clusters: the attribute-0 query sits on top of the attribute-1 cluster.
        let mut pts = Vec::new();
        for i in 0..20 {
            let (f, a) = if i < 10 {
                (vec![1.0, 0.001 * i as f32], 1)
            } else {
                (vec![-1.0, 0.001 * i as f32], 0)
            };
            pts.push(HybridPoint {
                id: i,
                feature: f,
                attrs: vec![a],
            });
        }
        let ds = Arc::new(HybridDataset::from_points(pts, 2, 1, FeatureMetric::L2).unwrap());
        let feature = CompositeGraph::build(
            Arc::clone(&ds),
            GraphMetric::FeatureOnly,
            GraphParams::new(4, 16, 1).unwrap(),
        )
        .unwrap();
        let idx = Indexes::new(&ds).with_feature(&feature);
        let q = HybridQuery::new(vec![1.0, 0.0], vec![0], 5, 5);
        let hits = run_strategy(Strategy::SearchThenFilter { expansion: 1 }, &idx, &q).unwrap();
        assert!(hits.len() < 5);
        let wide = run_strategy(Strategy::SearchThenFilter { expansion: 4 }, &idx, &q).unwrap();
        assert_eq!(wide.len(), 5);
        assert!(wide.iter().all(|h| h.attrs_match));
    }

    #[test]
    fn missing_index_reported() {
        let ds = five_points();
        let idx = Indexes::new(&ds);
        let q = HybridQuery::new(vec![1.0, 0.0], vec![0], 1, 1);
        assert_eq!(
            run_strategy(Strategy::Fusion, &idx, &q).unwrap_err(),
            SearchError::MissingIndex("fusion")
        );
        let hits = run_strategy(Strategy::FilterThenSearch, &idx, &q).unwrap();
        assert_eq!(hits[0].id, 0);
    }
}
