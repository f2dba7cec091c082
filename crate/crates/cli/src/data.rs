//! Dataset directory layout shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hybrid_ann::dataio::{load_dataset, read_fvecs};
use hybrid_ann::{FeatureMetric, HybridDataset};

use crate::commands::CliError;
use crate::{DataArgs, MetricArg, QueryArgs};

pub const BASE_FEATURES: &str = "base.fvecs";
pub const BASE_ATTRS: &str = "attrs.ivecs";
pub const QUERY_FEATURES: &str = "query.fvecs";
pub const QUERY_ATTRS: &str = "query_attrs.ivecs";
pub const MANIFEST: &str = "manifest.txt";

/// `key=value` lines describing how a directory was generated.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Manifest(pub BTreeMap<String, String>);

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect(),
        )
    }

    /// Missing manifests are allowed; the caller then needs `--metric`.
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        match fs::read_to_string(dir.join(MANIFEST)) {
            Ok(text) => Ok(Self::parse(&text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(CliError::runtime(format!(
                "{}: {e}",
                dir.join(MANIFEST).display()
            ))),
        }
    }
}

pub fn metric_name(m: FeatureMetric) -> &'static str {
    match m {
        FeatureMetric::IP => "ip",
        FeatureMetric::L2 => "l2",
    }
}

pub struct DataDir {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub metric: FeatureMetric,
}

impl DataDir {
    pub fn open(args: &DataArgs) -> Result<Self, CliError> {
        if !args.data.is_dir() {
            return Err(CliError::usage(format!(
                "{} is not a directory",
                args.data.display()
            )));
        }
        let manifest = Manifest::read(&args.data)?;
        let metric = match (args.metric, manifest.get("metric")) {
            (Some(m), _) => m.into(),
            (None, Some("ip")) => MetricArg::Ip.into(),
            (None, Some("l2")) => MetricArg::L2.into(),
            (None, Some(other)) => {
                return Err(CliError::usage(format!(
                    "manifest names unknown metric '{other}'"
                )))
            }
            (None, None) => {
                return Err(CliError::usage(
                    "no manifest in data directory, pass --metric",
                ))
            }
        };
        Ok(Self {
            dir: args.data.clone(),
            manifest,
            metric,
        })
    }

    pub fn name(&self) -> String {
        self.dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    /// C as recorded by `gen`, 0 when unknown.
    pub fn categories(&self) -> u32 {
        self.manifest
            .get("categories")
            .and_then(|c| c.parse().ok())
            .unwrap_or(0)
    }

    pub fn base(&self) -> Result<Arc<HybridDataset>, CliError> {
        let ds = load_dataset(
            self.dir.join(BASE_FEATURES),
            self.dir.join(BASE_ATTRS),
            self.metric,
        )
        .map_err(|e| CliError::runtime(format!("base dataset: {e}")))?;
        Ok(Arc::new(ds))
    }

    pub fn queries(&self, q: &QueryArgs) -> Result<HybridDataset, CliError> {
        let f = q
            .query_features
            .clone()
            .unwrap_or_else(|| self.dir.join(QUERY_FEATURES));
        let a = q
            .query_attrs
            .clone()
            .unwrap_or_else(|| self.dir.join(QUERY_ATTRS));
        load_dataset(f, a, self.metric).map_err(|e| CliError::runtime(format!("queries: {e}")))
    }

    pub fn features(&self, file: &str) -> Result<Vec<Vec<f32>>, CliError> {
        let path = self.dir.join(file);
        read_fvecs(&path)
            .map(|(rows, _)| rows)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }
}
