//! Domain types shared by every other module.
//!
//! Datasets are validated once at construction and are immutable afterwards,
//! so they can be shared freely between index builders and query workers.

use std::cmp::Ordering;
use std::f64::consts::LOG2_10;

use serde::{Deserialize, Serialize};

use crate::error::{DatasetError, ParamError};

/// Tolerance on `|norm - 1|` for inner-product datasets.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// `1 / log10(2)`, the largest value the log fine-tuning term can subtract.
pub const INV_LOG10_2: f64 = LOG2_10;

/// Distance used between feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMetric {
    /// Rooted Euclidean distance.
    L2,
    /// `1 - <x, y>` on unit-norm vectors.
    IP,
}

impl FeatureMetric {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMetric::L2 => "l2",
            FeatureMetric::IP => "ip",
        }
    }
}

/// Mapping from a pair of attribute vectors to an integer difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttrMetric {
    /// Sum of absolute per-dimension differences, then the log wrapper.
    ManhattanLog,
    /// Number of differing dimensions, then the same log wrapper.
    Hamming,
}

impl AttrMetric {
    pub fn name(self) -> &'static str {
        match self {
            AttrMetric::ManhattanLog => "manhattan",
            AttrMetric::Hamming => "hamming",
        }
    }
}

/// Configuration of the fused distance `w * g(x, y) + f(v, u)`.
///
/// Instances built through [`FusionParams::new`] always satisfy
/// `bias > w * g_max + 1/log10(2)`, which makes every exact attribute match
/// rank ahead of every mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    w: f64,
    bias: f64,
    g_max: f64,
    attr_metric: AttrMetric,
}

impl FusionParams {
    pub const DEFAULT_W: f64 = 0.25;
    pub const DEFAULT_BIAS: f64 = 4.3219;
    pub const DEFAULT_G_MAX: f64 = 1.0;

    pub fn new(w: f64, bias: f64, g_max: f64, attr_metric: AttrMetric) -> Result<Self, ParamError> {
        let params = Self::new_unchecked(w, bias, g_max, attr_metric)?;
        let min = Self::min_bias(w, g_max);
        if bias.is_nan() || bias <= min {
            return Err(ParamError::BiasTooSmall { bias, min });
        }
        Ok(params)
    }

    /// Builds parameters without the bias inequality.
    ///
    /// Only meant for sensitivity experiments that deliberately shrink the
    /// margin (for instance `w = 1` with a fixed bias of 4.3219); the
    /// attribute-first ordering guarantee does not hold for these.
    pub fn new_unchecked(
        w: f64,
        bias: f64,
        g_max: f64,
        attr_metric: AttrMetric,
    ) -> Result<Self, ParamError> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(ParamError::InvalidWeight(w));
        }
        if !(g_max > 0.0 && g_max.is_finite()) {
            return Err(ParamError::InvalidGMax(g_max));
        }
        Ok(Self {
            w,
            bias,
            g_max,
            attr_metric,
        })
    }

    /// Smallest bias that is still rejected: `w * g_max + 1/log10(2)`.
    pub fn min_bias(w: f64, g_max: f64) -> f64 {
        w * g_max + INV_LOG10_2
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn attr_metric(&self) -> AttrMetric {
        self.attr_metric
    }

    pub fn with_attr_metric(mut self, attr_metric: AttrMetric) -> Self {
        self.attr_metric = attr_metric;
        self
    }

    /// True when the bias inequality holds.
    pub fn is_dominant(&self) -> bool {
        self.bias > Self::min_bias(self.w, self.g_max)
    }
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            w: Self::DEFAULT_W,
            bias: Self::DEFAULT_BIAS,
            g_max: Self::DEFAULT_G_MAX,
            attr_metric: AttrMetric::ManhattanLog,
        }
    }
}

/// One owned datapoint: a feature vector plus an integer attribute vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPoint {
    pub id: usize,
    pub feature: Vec<f32>,
    pub attrs: Vec<i32>,
}

/// Borrowed view of a datapoint or query.
#[derive(Debug, Clone, Copy)]
pub struct PointRef<'a> {
    pub feature: &'a [f32],
    pub attrs: &'a [i32],
}

/// Checks every point/dataset invariant, reporting the first violation.
pub fn validate_points(
    points: &[HybridPoint],
    m: usize,
    n: usize,
    metric: FeatureMetric,
) -> Result<(), DatasetError> {
    for (position, p) in points.iter().enumerate() {
        if p.id != position {
            return Err(DatasetError::NonContiguousIds { position, id: p.id });
        }
        check_point(p.id, &p.feature, &p.attrs, m, n, metric)?;
    }
    Ok(())
}

fn check_point(
    id: usize,
    feature: &[f32],
    attrs: &[i32],
    m: usize,
    n: usize,
    metric: FeatureMetric,
) -> Result<(), DatasetError> {
    if feature.len() != m {
        return Err(DatasetError::DimensionMismatch {
            id,
            what: "feature",
            expected: m,
            found: feature.len(),
        });
    }
    if attrs.len() != n {
        return Err(DatasetError::DimensionMismatch {
            id,
            what: "attrs",
            expected: n,
            found: attrs.len(),
        });
    }
    if metric == FeatureMetric::IP {
        let norm = feature
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(DatasetError::NotNormalized { id, norm });
        }
    }
    Ok(())
}

/// A validated, immutable collection of hybrid points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridDataset {
    m: usize,
    n: usize,
    metric: FeatureMetric,
    features: Vec<f32>,
    attrs: Vec<i32>,
}

impl HybridDataset {
    pub fn from_points(
        points: Vec<HybridPoint>,
        m: usize,
        n: usize,
        metric: FeatureMetric,
    ) -> Result<Self, DatasetError> {
        validate_points(&points, m, n, metric)?;
        let mut features = Vec::with_capacity(points.len() * m);
        let mut attrs = Vec::with_capacity(points.len() * n);
        for p in points {
            features.extend_from_slice(&p.feature);
            attrs.extend_from_slice(&p.attrs);
        }
        Ok(Self {
            m,
            n,
            metric,
            features,
            attrs,
        })
    }

    /// Pairs row `i` of `features` with row `i` of `attrs`; ids are row indices.
    pub fn from_rows(
        features: &[Vec<f32>],
        attrs: &[Vec<i32>],
        metric: FeatureMetric,
    ) -> Result<Self, DatasetError> {
        let m = features.first().map_or(0, Vec::len);
        let n = attrs.first().map_or(0, Vec::len);
        if features.len() != attrs.len() {
            let id = features.len().min(attrs.len());
            return Err(DatasetError::DimensionMismatch {
                id,
                what: if features.len() < attrs.len() {
                    "feature"
                } else {
                    "attrs"
                },
                expected: if features.len() < attrs.len() { m } else { n },
                found: 0,
            });
        }
        let mut flat_features = Vec::with_capacity(features.len() * m);
        let mut flat_attrs = Vec::with_capacity(attrs.len() * n);
        for (id, (f, a)) in features.iter().zip(attrs).enumerate() {
            check_point(id, f, a, m, n, metric)?;
            flat_features.extend_from_slice(f);
            flat_attrs.extend_from_slice(a);
        }
        Ok(Self {
            m,
            n,
            metric,
            features: flat_features,
            attrs: flat_attrs,
        })
    }

    pub fn len(&self) -> usize {
        self.features
            .len()
            .checked_div(self.m)
            .or_else(|| self.attrs.len().checked_div(self.n))
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.m
    }

    pub fn attr_dim(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> FeatureMetric {
        self.metric
    }

    #[inline]
    pub fn feature(&self, id: usize) -> &[f32] {
        &self.features[id * self.m..(id + 1) * self.m]
    }

    #[inline]
    pub fn attrs(&self, id: usize) -> &[i32] {
        &self.attrs[id * self.n..(id + 1) * self.n]
    }

    #[inline]
    pub fn point(&self, id: usize) -> PointRef<'_> {
        PointRef {
            feature: self.feature(id),
            attrs: self.attrs(id),
        }
    }

    pub fn to_point(&self, id: usize) -> HybridPoint {
        HybridPoint {
            id,
            feature: self.feature(id).to_vec(),
            attrs: self.attrs(id).to_vec(),
        }
    }

    pub fn raw_features(&self) -> &[f32] {
        &self.features
    }

    pub fn raw_attrs(&self) -> &[i32] {
        &self.attrs
    }

    /// Same features with a different attribute table.
    pub fn with_attrs(&self, attrs: &[Vec<i32>]) -> Result<Self, DatasetError> {
        let rows: Vec<Vec<f32>> = (0..self.len()).map(|i| self.feature(i).to_vec()).collect();
        Self::from_rows(&rows, attrs, self.metric)
    }
}

/// A hybrid query: nearest features among points whose attributes equal `attrs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridQuery {
    pub feature: Vec<f32>,
    pub attrs: Vec<i32>,
    pub k: usize,
    pub ef_search: usize,
}

impl HybridQuery {
    pub fn new(feature: Vec<f32>, attrs: Vec<i32>, k: usize, ef_search: usize) -> Self {
        Self {
            feature,
            attrs,
            k,
            ef_search,
        }
    }

    pub fn as_point(&self) -> PointRef<'_> {
        PointRef {
            feature: &self.feature,
            attrs: &self.attrs,
        }
    }
}

/// One search result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub id: usize,
    pub fused_dist: f64,
    pub feature_dist: f64,
    pub attrs_match: bool,
}

impl SearchHit {
    /// Ascending by fused distance, then by id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.fused_dist
            .total_cmp(&other.fused_dist)
            .then(self.id.cmp(&other.id))
    }
}
