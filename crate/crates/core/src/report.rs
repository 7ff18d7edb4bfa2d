//! Run reports and the reproducibility manifest embedded in every output.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::{BuildStats, DemandPoint, NormScheme};
use crate::hub_optimizer::{BaselineSummary, OptimizationReport};
use crate::road_graph::{RoadClass, SnapPolicy};
use crate::scalar::Scalar;

/// One input file with its content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> std::io::Result<InputDigest> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestInputs {
    pub edges: InputDigest,
    pub deliveries: InputDigest,
    pub hubs: InputDigest,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub population: Option<InputDigest>,
}

/// Echo of the effective run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub alpha: f64,
    pub norm: NormScheme,
    pub grid_res_m: f64,
    pub cutoff_m: f64,
    pub max_iter: usize,
    pub max_snap_m: f64,
    pub exclude_classes: Vec<RoadClass>,
    pub snap_policy: SnapPolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub inputs: ManifestInputs,
    pub config: ManifestConfig,
}

/// Per-demand echo joined with its final cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandEcho<T> {
    pub id: usize,
    pub lon: T,
    pub lat: T,
    pub node: usize,
    pub count: u64,
    pub weight: T,
    pub cluster: Option<usize>,
}

/// The full optimize-run report written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub manifest: RunManifest,
    pub demand_stats: BuildStats,
    pub report: OptimizationReport<T>,
    pub demand: Vec<DemandEcho<T>>,
}

impl<T: Scalar> RunReport<T> {
    pub fn new(
        manifest: RunManifest,
        demand_stats: BuildStats,
        report: OptimizationReport<T>,
        demand: &[DemandPoint<T>],
    ) -> Self {
        let demand = demand
            .iter()
            .map(|d| DemandEcho {
                id: d.id,
                lon: d.pos.lon,
                lat: d.pos.lat,
                node: d.node,
                count: d.count,
                weight: d.weight,
                cluster: report.final_assignment[d.id],
            })
            .collect();
        Self {
            manifest,
            demand_stats,
            report,
            demand,
        }
    }
}

/// The baseline report written to `baseline.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFile<T> {
    pub manifest: RunManifest,
    pub demand_stats: BuildStats,
    pub baseline: BaselineSummary<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn digest_changes_iff_bytes_change() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("input.csv");

        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"lon,lat\n1,2\n").unwrap();
        drop(f);
        let a = digest_file(&path).unwrap();
        let b = digest_file(&path).unwrap();
        assert_eq!(a, b);

        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"lon,lat\n1,3\n").unwrap();
        drop(f);
        let c = digest_file(&path).unwrap();
        assert_ne!(a.sha256, c.sha256);
    }
}
