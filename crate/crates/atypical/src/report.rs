//! Versioned JSON reports.
//!
//! Floats are written by `serde_json` as shortest round-trip decimals, so a
//! report parses back to an identical value and equal runs produce equal
//! bytes. Reports carry no timing; wall time goes to standard error.

use atypical_core::scanner::{InclusionReport, TCheckReport};
use atypical_core::{RhoSpec, ScanConfig, ValueCluster};
use serde::{Deserialize, Serialize};

use crate::mapfile::LoadedMap;

pub const SCHEMA: &str = "atypical/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub name: String,
    /// SHA-256 of the canonical map file.
    pub hash: String,
    pub n: usize,
    pub p: usize,
}

impl MapInfo {
    pub fn of(m: &LoadedMap) -> Self {
        MapInfo { name: m.canonical.name.clone(), hash: m.hash.clone(), n: m.map.n(), p: m.map.p() }
    }
}

/// Everything needed to reproduce a run; the thread count is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub scan: ScanConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Kos,
    Milnor,
    Tcheck,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Clusters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kos: Option<Vec<ValueCluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milnor: Option<Vec<ValueCluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular: Option<Vec<ValueCluster>>,
}

/// Outcome of checking that every Milnor cluster is matched by KOS evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionVerdict {
    pub passed: bool,
    pub violations: Vec<Vec<f64>>,
}

impl From<&InclusionReport> for InclusionVerdict {
    fn from(r: &InclusionReport) -> Self {
        InclusionVerdict { passed: r.passed, violations: r.violations.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: String,
    pub tool_version: String,
    pub command: Command,
    pub map: MapInfo,
    pub config: ConfigEcho,
    pub clusters: Clusters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<InclusionVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcheck: Option<TCheckReport>,
}

impl ScanReport {
    pub fn new(command: Command, map: &LoadedMap, config: ConfigEcho) -> Self {
        ScanReport {
            schema: SCHEMA.into(),
            tool_version: TOOL_VERSION.into(),
            command,
            map: MapInfo::of(map),
            config,
            clusters: Clusters::default(),
            inclusion: None,
            tcheck: None,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports contain only finite floats");
    s.push('\n');
    s
}
