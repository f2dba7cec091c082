//! Distance functions.
//!
//! The fused distance is `w * g(x, y) + f(v, u)` where `g` is the feature
//! metric and `f` is zero for identical attribute vectors and
//! `bias - 1 / log10(e(v, u) + 1)` otherwise. `e` is the Manhattan distance
//! (or, for the degraded baseline, the Hamming count). All arithmetic is done
//! in `f64` even though vectors are stored as `f32`.

use crate::error::DimensionMismatch;
use crate::types::{AttrMetric, FeatureMetric, FusionParams, PointRef};

fn check_len(a: usize, b: usize) -> Result<(), DimensionMismatch> {
    if a == b {
        Ok(())
    } else {
        Err(DimensionMismatch { left: a, right: b })
    }
}

#[inline]
pub(crate) fn dot(x: &[f32], y: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        for j in 0..4 {
            acc[j] += f64::from(a[j]) * f64::from(b[j]);
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += f64::from(*a) * f64::from(*b);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn squared_l2(x: &[f32], y: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xs = x.chunks_exact(4);
    let ys = y.chunks_exact(4);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        for j in 0..4 {
            let d = f64::from(a[j]) - f64::from(b[j]);
            acc[j] += d * d;
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        let d = f64::from(*a) - f64::from(*b);
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn feature_distance_raw(metric: FeatureMetric, x: &[f32], y: &[f32]) -> f64 {
    match metric {
        FeatureMetric::IP => 1.0 - dot(x, y),
        FeatureMetric::L2 => squared_l2(x, y).sqrt(),
    }
}

/// `g(x, y)`: `1 - <x, y>` for IP, rooted Euclidean for L2.
pub fn feature_distance(
    metric: FeatureMetric,
    x: &[f32],
    y: &[f32],
) -> Result<f64, DimensionMismatch> {
    check_len(x.len(), y.len())?;
    Ok(feature_distance_raw(metric, x, y))
}

#[inline]
pub(crate) fn manhattan_raw(v: &[i32], u: &[i32]) -> u64 {
    v.iter()
        .zip(u)
        .map(|(&a, &b)| (i64::from(a) - i64::from(b)).unsigned_abs())
        .sum()
}

#[inline]
pub(crate) fn hamming_raw(v: &[i32], u: &[i32]) -> u64 {
    v.iter().zip(u).filter(|(a, b)| a != b).count() as u64
}

/// Exact `sum |v[k] - u[k]|`.
pub fn manhattan_distance(v: &[i32], u: &[i32]) -> Result<u64, DimensionMismatch> {
    check_len(v.len(), u.len())?;
    Ok(manhattan_raw(v, u))
}

/// Number of dimensions where the two vectors differ (xor-and-sum).
pub fn hamming_attribute_distance(v: &[i32], u: &[i32]) -> Result<u64, DimensionMismatch> {
    check_len(v.len(), u.len())?;
    Ok(hamming_raw(v, u))
}

/// Log wrapper shared by both attribute mappings; `e` must be at least 1.
#[inline]
pub fn attribute_distance_from_mapping(bias: f64, e: u64) -> f64 {
    bias - 1.0 / ((e + 1) as f64).log10()
}

#[inline]
fn attribute_mapping(metric: AttrMetric, v: &[i32], u: &[i32]) -> u64 {
    match metric {
        AttrMetric::ManhattanLog => manhattan_raw(v, u),
        AttrMetric::Hamming => hamming_raw(v, u),
    }
}

/// `f(v, u)`: zero on exact equality, otherwise `bias - 1/log10(e + 1)`.
pub fn attribute_distance(
    params: &FusionParams,
    v: &[i32],
    u: &[i32],
) -> Result<f64, DimensionMismatch> {
    check_len(v.len(), u.len())?;
    if v == u {
        return Ok(0.0);
    }
    let e = attribute_mapping(params.attr_metric(), v, u);
    Ok(attribute_distance_from_mapping(params.bias(), e))
}

/// `w * g + f` between a query (or point) and a point.
pub fn fused_distance(
    params: &FusionParams,
    metric: FeatureMetric,
    a: PointRef<'_>,
    b: PointRef<'_>,
) -> Result<f64, DimensionMismatch> {
    let g = feature_distance(metric, a.feature, b.feature)?;
    let f = attribute_distance(params, a.attrs, b.attrs)?;
    Ok(params.w() * g + f)
}

/// Which distance a proximity graph is built and searched under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphMetric {
    /// The fused attribute-dominant metric.
    Fused(FusionParams),
    /// Feature distance only; attributes are ignored.
    FeatureOnly,
}

impl GraphMetric {
    pub fn fusion(&self) -> Option<&FusionParams> {
        match self {
            GraphMetric::Fused(p) => Some(p),
            GraphMetric::FeatureOnly => None,
        }
    }
}

const TABLE_LEN: usize = 4096;

/// Hot-path evaluator used by the graph.
///
/// Memoizes the log wrapper for small mapping values; the table is filled
/// with the same expression as [`attribute_distance_from_mapping`], so
/// results are bit-identical to the checked functions.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    feature: FeatureMetric,
    metric: GraphMetric,
    table: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(feature: FeatureMetric, metric: GraphMetric) -> Self {
        let table = match metric {
            GraphMetric::Fused(p) => (0..TABLE_LEN as u64)
                .map(|e| {
                    if e == 0 {
                        0.0
                    } else {
                        attribute_distance_from_mapping(p.bias(), e)
                    }
                })
                .collect(),
            GraphMetric::FeatureOnly => Vec::new(),
        };
        Self {
            feature,
            metric,
            table,
        }
    }

    #[inline]
    fn attr_part(&self, p: &FusionParams, v: &[i32], u: &[i32]) -> f64 {
        if v == u {
            return 0.0;
        }
        let e = attribute_mapping(p.attr_metric(), v, u);
        match self.table.get(e as usize) {
            Some(&d) => d,
            None => attribute_distance_from_mapping(p.bias(), e),
        }
    }

    /// Graph distance between two points.
    #[inline]
    pub(crate) fn distance(&self, a: PointRef<'_>, b: PointRef<'_>) -> f64 {
        let g = feature_distance_raw(self.feature, a.feature, b.feature);
        match &self.metric {
            GraphMetric::Fused(p) => p.w() * g + self.attr_part(p, a.attrs, b.attrs),
            GraphMetric::FeatureOnly => g,
        }
    }

    /// `(graph distance, feature distance)`.
    #[inline]
    pub(crate) fn parts(&self, a: PointRef<'_>, b: PointRef<'_>) -> (f64, f64) {
        let g = feature_distance_raw(self.feature, a.feature, b.feature);
        let d = match &self.metric {
            GraphMetric::Fused(p) => p.w() * g + self.attr_part(p, a.attrs, b.attrs),
            GraphMetric::FeatureOnly => g,
        };
        (d, g)
    }
}
