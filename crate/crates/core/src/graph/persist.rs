//! Binary index format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "HQAN" | version u32 = 1 | flags u32 | M u32 | ef_construction u32
//! w f64 | bias f64 | g_max f64 | attr_metric u8 | feature_metric u8
//! point count u64 | entry point u64 | max level u32
//! dataset checksum: count u32 | m u16 | n u16 | xor-fold u64
//! [flags & 1] level_norm f64 | seed u64
//! per node: level u32, then for each level 0..=level: count u32, ids u32[count]
//! ```
//!
//! Vectors and attributes are not stored; the dataset files are authoritative
//! and the checksum ties an index to the dataset it was built from.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{CompositeGraph, GraphParams};
use crate::error::PersistError;
use crate::metrics::GraphMetric;
use crate::types::{AttrMetric, FeatureMetric, FusionParams, HybridDataset};

pub const INDEX_MAGIC: [u8; 4] = *b"HQAN";
pub const INDEX_VERSION: u32 = 1;

const FLAG_BUILD_PARAMS: u32 = 1;

const ATTR_MANHATTAN: u8 = 0;
const ATTR_HAMMING: u8 = 1;
const ATTR_NONE: u8 = 2;

const FEATURE_L2: u8 = 0;
const FEATURE_IP: u8 = 1;

/// 16-byte dataset fingerprint stored in the index header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetChecksum {
    pub count: u32,
    pub m: u16,
    pub n: u16,
    pub fold: u64,
}

impl DatasetChecksum {
    fn to_bytes(self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[0..4].copy_from_slice(&self.count.to_le_bytes());
        out[4..6].copy_from_slice(&self.m.to_le_bytes());
        out[6..8].copy_from_slice(&self.n.to_le_bytes());
        out[8..16].copy_from_slice(&self.fold.to_le_bytes());
        out
    }

    fn from_bytes(b: [u8; 16]) -> Self {
        Self {
            count: u32::from_le_bytes(b[0..4].try_into().unwrap()),
            m: u16::from_le_bytes(b[4..6].try_into().unwrap()),
            n: u16::from_le_bytes(b[6..8].try_into().unwrap()),
            fold: u64::from_le_bytes(b[8..16].try_into().unwrap()),
        }
    }
}

/// XOR of the little-endian feature bytes followed by attribute bytes,
/// taken as 8-byte words (last word zero padded).
pub fn dataset_checksum(ds: &HybridDataset) -> DatasetChecksum {
    let mut fold = 0u64;
    let mut word = [0u8; 8];
    let mut fill = 0usize;
    let bytes = ds
        .raw_features()
        .iter()
        .flat_map(|f| f.to_le_bytes())
        .chain(ds.raw_attrs().iter().flat_map(|a| a.to_le_bytes()));
    for b in bytes {
        word[fill] = b;
        fill += 1;
        if fill == 8 {
            fold ^= u64::from_le_bytes(word);
            fill = 0;
        }
    }
    if fill > 0 {
        word[fill..].iter_mut().for_each(|b| *b = 0);
        fold ^= u64::from_le_bytes(word);
    }
    DatasetChecksum {
        count: ds.len() as u32,
        m: ds.feature_dim() as u16,
        n: ds.attr_dim() as u16,
        fold,
    }
}

pub fn save(graph: &CompositeGraph, path: impl AsRef<Path>) -> Result<(), PersistError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(graph, &mut w)?;
    w.flush()?;
    Ok(())
}

fn write_to(g: &CompositeGraph, w: &mut impl Write) -> Result<(), PersistError> {
    let p = g.params();
    w.write_all(&INDEX_MAGIC)?;
    w.write_all(&INDEX_VERSION.to_le_bytes())?;
    w.write_all(&FLAG_BUILD_PARAMS.to_le_bytes())?;
    w.write_all(&(p.m as u32).to_le_bytes())?;
    w.write_all(&(p.ef_construction as u32).to_le_bytes())?;
    let (fw, bias, g_max, attr) = match g.metric() {
        GraphMetric::Fused(f) => (
            f.w(),
            f.bias(),
            f.g_max(),
            match f.attr_metric() {
                AttrMetric::ManhattanLog => ATTR_MANHATTAN,
                AttrMetric::Hamming => ATTR_HAMMING,
            },
        ),
        GraphMetric::FeatureOnly => (1.0, 0.0, 0.0, ATTR_NONE),
    };
    w.write_all(&fw.to_le_bytes())?;
    w.write_all(&bias.to_le_bytes())?;
    w.write_all(&g_max.to_le_bytes())?;
    w.write_all(&[attr])?;
    let feature = match g.dataset().metric() {
        FeatureMetric::L2 => FEATURE_L2,
        FeatureMetric::IP => FEATURE_IP,
    };
    w.write_all(&[feature])?;
    w.write_all(&(g.len() as u64).to_le_bytes())?;
    w.write_all(&(g.entry_point() as u64).to_le_bytes())?;
    w.write_all(&(g.max_level() as u32).to_le_bytes())?;
    w.write_all(&dataset_checksum(g.dataset()).to_bytes())?;
    w.write_all(&p.level_norm.to_le_bytes())?;
    w.write_all(&p.seed.to_le_bytes())?;
    for levels in &g.links {
        w.write_all(&((levels.len() - 1) as u32).to_le_bytes())?;
        for list in levels {
            w.write_all(&(list.len() as u32).to_le_bytes())?;
            for id in list {
                w.write_all(&id.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                PersistError::Format("unexpected end of file".into())
            } else {
                PersistError::Io(e)
            }
        })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn load(
    path: impl AsRef<Path>,
    dataset: Arc<HybridDataset>,
) -> Result<CompositeGraph, PersistError> {
    let r = BufReader::new(File::open(path)?);
    read_from(r, dataset)
}

fn read_from(
    inner: impl Read,
    dataset: Arc<HybridDataset>,
) -> Result<CompositeGraph, PersistError> {
    let mut r = Reader { inner };
    let magic: [u8; 4] = r.bytes()?;
    if magic != INDEX_MAGIC {
        return Err(PersistError::Format(format!("bad magic {magic:02x?}")));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(PersistError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let flags = r.u32()?;
    let m = r.u32()? as usize;
    let ef_construction = r.u32()? as usize;
    let w = r.f64()?;
    let bias = r.f64()?;
    let g_max = r.f64()?;
    let attr = r.u8()?;
    let feature = r.u8()?;
    let count = r.u64()? as usize;
    let entry_point = r.u64()? as usize;
    let max_level = r.u32()? as usize;
    let checksum = DatasetChecksum::from_bytes(r.bytes()?);

    let metric = match attr {
        ATTR_NONE => GraphMetric::FeatureOnly,
        ATTR_MANHATTAN | ATTR_HAMMING => {
            let am = if attr == ATTR_MANHATTAN {
                AttrMetric::ManhattanLog
            } else {
                AttrMetric::Hamming
            };
            let fp = FusionParams::new_unchecked(w, bias, g_max, am)
                .map_err(|e| PersistError::Format(e.to_string()))?;
            GraphMetric::Fused(fp)
        }
        other => {
            return Err(PersistError::Format(format!(
                "unknown attribute metric {other}"
            )))
        }
    };
    let feature_metric = match feature {
        FEATURE_L2 => FeatureMetric::L2,
        FEATURE_IP => FeatureMetric::IP,
        other => {
            return Err(PersistError::Format(format!(
                "unknown feature metric {other}"
            )))
        }
    };

    if count != dataset.len() {
        return Err(PersistError::DatasetMismatch(format!(
            "index has {count} points, dataset has {}",
            dataset.len()
        )));
    }
    if feature_metric != dataset.metric() {
        return Err(PersistError::DatasetMismatch(format!(
            "index feature metric {}, dataset {}",
            feature_metric.name(),
            dataset.metric().name()
        )));
    }
    let actual = dataset_checksum(&dataset);
    if checksum.m != actual.m || checksum.n != actual.n {
        return Err(PersistError::DatasetMismatch(format!(
            "index dims m={} n={}, dataset m={} n={}",
            checksum.m, checksum.n, actual.m, actual.n
        )));
    }
    if checksum != actual {
        return Err(PersistError::DatasetMismatch(
            "dataset checksum differs".into(),
        ));
    }

    let mut params = GraphParams {
        m,
        ef_construction,
        level_norm: 1.0 / (m as f64).ln(),
        seed: 0,
    };
    if flags & FLAG_BUILD_PARAMS != 0 {
        params.level_norm = r.f64()?;
        params.seed = r.u64()?;
    }
    params
        .validate()
        .map_err(|e| PersistError::Format(e.to_string()))?;

    let mut links = Vec::with_capacity(count);
    for node in 0..count {
        let level = r.u32()? as usize;
        if level > max_level {
            return Err(PersistError::Format(format!(
                "node {node} level {level} above max {max_level}"
            )));
        }
        let mut levels = Vec::with_capacity(level + 1);
        for l in 0..=level {
            let len = r.u32()? as usize;
            if len > params.max_degree(l) {
                return Err(PersistError::Format(format!(
                    "node {node} level {l}: degree {len}"
                )));
            }
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let id = r.u32()?;
                if id as usize >= count {
                    return Err(PersistError::Format(format!(
                        "node {node}: neighbor {id} out of range"
                    )));
                }
                list.push(id);
            }
            levels.push(list);
        }
        links.push(levels);
    }
    if count == 0 || entry_point >= count || links[entry_point].len() != max_level + 1 {
        return Err(PersistError::Format(
            "entry point inconsistent with levels".into(),
        ));
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(PersistError::Format("trailing bytes".into()));
    }
    Ok(CompositeGraph::from_parts(
        dataset,
        metric,
        params,
        links,
        entry_point,
    ))
}
