//! Hybrid nearest-neighbor search: feature-vector similarity under exact
//! attribute constraints, answered by a single proximity-graph traversal.
//!
//! Attributes are folded into the graph's distance so that any point with
//! the query's exact attribute vector is closer than every point without it:
//!
//! ```text
//! d(a, b) = w * g(x_a, x_b) + f(v_a, v_b)
//! f(v, u) = 0                          if v == u
//!         = bias - 1 / log10(e(v, u) + 1)  otherwise, e = Manhattan distance
//! ```
//!
//! With `bias > w * max(g) + 1/log10(2)` the attribute term dominates. The
//! crate also ships the two classic baselines (search-then-filter and
//! filter-then-search), exact oracles, vecs file I/O and a benchmark harness.

pub mod bench;
pub mod dataio;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod strategies;
pub mod types;

pub use error::{
    BenchError, DatasetError, DimensionMismatch, ParamError, PersistError, SearchError, VecsError,
};
pub use graph::{CompositeGraph, GraphParams};
pub use metrics::{
    attribute_distance, feature_distance, fused_distance, hamming_attribute_distance,
    manhattan_distance, GraphMetric,
};
pub use strategies::{
    exact_filtered_topk, exact_fused_topk, run_strategy, GroundTruth, Indexes, Strategy,
};
pub use types::{
    validate_points, AttrMetric, FeatureMetric, FusionParams, HybridDataset, HybridPoint,
    HybridQuery, PointRef, SearchHit,
};
