//! fvecs/ivecs/bvecs I/O and seeded synthetic data.
//!
//! Every vecs record is a little-endian `i32` dimension `d` followed by `d`
//! little-endian elements; all records in one file share `d`.
//!
//! Synthetic data uses ChaCha8 (`rand_chacha`). Each point draws from its
//! own generator seeded with `splitmix64(seed) ^ id`, on a stream chosen by role
//! (base/query) and by what is being drawn (features/attributes), so the
//! features of a dataset never depend on its attribute cardinality.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DatasetError, VecsError};
use crate::types::{FeatureMetric, HybridDataset};

/// Element type of a vecs file.
pub trait VecsElement: Copy {
    const WIDTH: usize;
    fn decode(bytes: &[u8]) -> Self;
    fn encode(self, out: &mut Vec<u8>);
}

impl VecsElement for f32 {
    const WIDTH: usize = 4;
    fn decode(b: &[u8]) -> Self {
        f32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl VecsElement for i32 {
    const WIDTH: usize = 4;
    fn decode(b: &[u8]) -> Self {
        i32::from_le_bytes([b[0], b[1], b[2], b[3]])
    }
    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl VecsElement for u8 {
    const WIDTH: usize = 1;
    fn decode(b: &[u8]) -> Self {
        b[0]
    }
    fn encode(self, out: &mut Vec<u8>) {
        out.push(self);
    }
}

/// Fills `buf` completely, or reports how many bytes were available before EOF.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads every record; returns the rows and their shared dimension (0 when empty).
pub fn read_vecs_from<T: VecsElement>(mut r: impl Read) -> Result<(Vec<Vec<T>>, usize), VecsError> {
    let mut rows = Vec::new();
    let mut dim = None;
    let mut buf = Vec::new();
    loop {
        let record = rows.len();
        let mut header = [0u8; 4];
        match read_full(&mut r, &mut header)? {
            0 => break,
            4 => {}
            _ => return Err(VecsError::TruncatedRecord(record)),
        }
        let d = i32::from_le_bytes(header);
        if d < 0 {
            return Err(VecsError::NegativeDim { record, dim: d });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => return Err(VecsError::RaggedDims(record)),
            Some(_) => {}
        }
        buf.resize(d * T::WIDTH, 0);
        if read_full(&mut r, &mut buf)? != buf.len() {
            return Err(VecsError::TruncatedRecord(record));
        }
        rows.push(buf.chunks_exact(T::WIDTH).map(T::decode).collect());
    }
    Ok((rows, dim.unwrap_or(0)))
}

pub fn read_vecs<T: VecsElement>(
    path: impl AsRef<Path>,
) -> Result<(Vec<Vec<T>>, usize), VecsError> {
    read_vecs_from(BufReader::new(File::open(path)?))
}

pub fn write_vecs_to<T: VecsElement>(mut w: impl Write, rows: &[Vec<T>]) -> Result<(), VecsError> {
    let dim = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
        return Err(VecsError::RaggedDims(bad));
    }
    let mut buf = Vec::with_capacity(4 + dim * T::WIDTH);
    for row in rows {
        buf.clear();
        buf.extend_from_slice(&(dim as i32).to_le_bytes());
        row.iter().for_each(|&x| x.encode(&mut buf));
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vecs<T: VecsElement>(
    path: impl AsRef<Path>,
    rows: &[Vec<T>],
) -> Result<(), VecsError> {
    write_vecs_to(BufWriter::new(File::create(path)?), rows)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<(Vec<Vec<f32>>, usize), VecsError> {
    read_vecs(path)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<(Vec<Vec<i32>>, usize), VecsError> {
    read_vecs(path)
}

pub fn read_bvecs(path: impl AsRef<Path>) -> Result<(Vec<Vec<u8>>, usize), VecsError> {
    read_vecs(path)
}

/// Whether generated rows are indexed points or queries; each role has its own streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Base,
    Query,
}

impl Role {
    fn feature_stream(self) -> u64 {
        match self {
            Role::Base => 0,
            Role::Query => 2,
        }
    }

    fn attr_stream(self) -> u64 {
        self.feature_stream() + 1
    }
}

/// SplitMix64 finalizer. Without it, seeds differing in low bits would
/// yield the same points in a permuted order.
fn mix(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn point_rng(seed: u64, id: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed) ^ id as u64);
    rng.set_stream(stream);
    rng
}

/// Parameters of a synthetic hybrid dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub m: usize,
    /// Values per attribute dimension, drawn uniformly from `0..categories`.
    pub categories: u32,
    pub n: usize,
    pub seed: u64,
    /// Unit-norm features with the IP metric; otherwise raw Gaussians with L2.
    pub normalized: bool,
    pub role: Role,
}

impl SyntheticSpec {
    pub fn new(count: usize, m: usize, categories: u32, n: usize, seed: u64) -> Self {
        Self {
            count,
            m,
            categories,
            n,
            seed,
            normalized: true,
            role: Role::Base,
        }
    }

    /// The same spec, drawing from the query streams.
    pub fn queries(mut self) -> Self {
        self.role = Role::Query;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn metric(&self) -> FeatureMetric {
        if self.normalized {
            FeatureMetric::IP
        } else {
            FeatureMetric::L2
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.count == 0 {
            return Err("count must be positive".into());
        }
        if self.m == 0 {
            return Err("feature dimension must be positive".into());
        }
        if self.categories == 0 {
            return Err("categories must be positive".into());
        }
        if self.n == 0 {
            return Err("attribute dimension must be positive".into());
        }
        Ok(())
    }
}

/// I.i.d. standard normal coordinates, optionally scaled to unit length.
pub fn synthetic_features(spec: &SyntheticSpec) -> Vec<Vec<f32>> {
    (0..spec.count)
        .map(|id| {
            let mut rng = point_rng(spec.seed, id, spec.role.feature_stream());
            let raw: Vec<f64> = (0..spec.m).map(|_| rng.sample(StandardNormal)).collect();
            let scale = if spec.normalized {
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    1.0
                }
            } else {
                1.0
            };
            raw.into_iter().map(|x| (x * scale) as f32).collect()
        })
        .collect()
}

/// Per-dimension uniform categorical attributes in `0..categories`.
pub fn random_attributes(
    count: usize,
    categories: u32,
    n: usize,
    seed: u64,
    role: Role,
) -> Vec<Vec<i32>> {
    (0..count)
        .map(|id| {
            let mut rng = point_rng(seed, id, role.attr_stream());
            (0..n)
                .map(|_| rng.random_range(0..categories) as i32)
                .collect()
        })
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<HybridDataset, DatasetError> {
    let features = synthetic_features(spec);
    let attrs = random_attributes(spec.count, spec.categories, spec.n, spec.seed, spec.role);
    let ds = HybridDataset::from_rows(&features, &attrs, spec.metric())?;
    Ok(ds)
}

/// Attaches random attributes (base streams) to externally loaded features.
pub fn attach_attributes(
    features: &[Vec<f32>],
    categories: u32,
    n: usize,
    seed: u64,
    metric: FeatureMetric,
) -> Result<HybridDataset, DatasetError> {
    let attrs = random_attributes(features.len(), categories, n, seed, Role::Base);
    HybridDataset::from_rows(features, &attrs, metric)
}

/// Reads paired feature/attribute files into a validated dataset.
pub fn load_dataset(
    features: impl AsRef<Path>,
    attrs: impl AsRef<Path>,
    metric: FeatureMetric,
) -> Result<HybridDataset, LoadError> {
    let (f, _) = read_fvecs(features)?;
    let (a, _) = read_ivecs(attrs)?;
    if f.len() != a.len() {
        return Err(LoadError::RowCount {
            features: f.len(),
            attrs: a.len(),
        });
    }
    Ok(HybridDataset::from_rows(&f, &a, metric)?)
}

/// Writes a dataset as a feature fvecs file and an attribute ivecs file.
pub fn save_dataset(
    ds: &HybridDataset,
    features: impl AsRef<Path>,
    attrs: impl AsRef<Path>,
) -> Result<(), VecsError> {
    let f: Vec<Vec<f32>> = (0..ds.len()).map(|i| ds.feature(i).to_vec()).collect();
    let a: Vec<Vec<i32>> = (0..ds.len()).map(|i| ds.attrs(i).to_vec()).collect();
    write_vecs(features, &f)?;
    write_vecs(attrs, &a)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Vecs(#[from] VecsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{features} feature rows but {attrs} attribute rows")]
    RowCount { features: usize, attrs: usize },
}
