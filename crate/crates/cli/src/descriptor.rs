//! Design- and mapping-descriptor documents.
//!
//! Descriptors replace the HDL generation step: structured JSON carrying the
//! chosen configuration, its performance report, and a run manifest. The
//! manifest's result digest covers the document without the manifest itself,
//! so identical inputs, flags and seed reproduce the file byte for byte.

use serde::Serialize;
use sha2::{Digest, Sha256};

use streamflow_core::design::DesignPoint;
use streamflow_core::ir::NetworkGraph;
use streamflow_core::multi::{
    CostBreakdown, MemoryTransferSchedule, MultiCnnMapping, MultiCnnWorkload,
};
use streamflow_core::perf::{PerfReport, ResourceVector};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub inputs_sha256: Vec<InputDigest>,
    pub seed: u64,
    pub objective: String,
    pub result_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(inputs: &[(&str, &str)], seed: u64, objective: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs_sha256: inputs
                .iter()
                .map(|(file, content)| InputDigest {
                    file: file.to_string(),
                    sha256: sha256_hex(content.as_bytes()),
                })
                .collect(),
            seed,
            objective: objective.to_string(),
            result_sha256: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageDescriptor {
    pub layer: String,
    pub kind: String,
    pub coarse: u64,
    pub fine: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignDescriptor {
    pub schema_version: u32,
    pub network: String,
    pub device: String,
    pub mode: String,
    pub partitions: Vec<[usize; 2]>,
    pub stages: Vec<StageDescriptor>,
    pub report: PerfReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

fn stage_descriptors(design: &DesignPoint, network: &NetworkGraph) -> Vec<StageDescriptor> {
    network
        .layers
        .iter()
        .zip(design.stage_configs.iter())
        .map(|(layer, cfg)| StageDescriptor {
            layer: layer.name.clone(),
            kind: layer.kind.label().to_string(),
            coarse: cfg.coarse,
            fine: cfg.fine,
        })
        .collect()
}

impl DesignDescriptor {
    pub fn new(
        network_name: &str,
        device_name: &str,
        design: &DesignPoint,
        network: &NetworkGraph,
        report: PerfReport,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            network: network_name.to_string(),
            device: device_name.to_string(),
            mode: design.mode.to_string(),
            partitions: design.partitions.iter().map(|&(s, e)| [s, e]).collect(),
            stages: stage_descriptors(design, network),
            report,
            manifest: None,
        }
    }

    /// Renders the final document: digests the manifest-free body, embeds the
    /// completed manifest, and pretty-prints.
    pub fn render(mut self, mut manifest: RunManifest) -> String {
        let body = serde_json::to_string_pretty(&self).expect("descriptor serializes");
        manifest.result_sha256 = sha256_hex(body.as_bytes());
        self.manifest = Some(manifest);
        let mut out = serde_json::to_string_pretty(&self).expect("descriptor serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CnnMappingDescriptor {
    pub cnn: usize,
    pub network: String,
    pub weight: f64,
    pub target_latency_s: f64,
    pub achieved_latency_s: f64,
    pub share: f64,
    pub budget: ResourceVector,
    pub mode: String,
    pub partitions: Vec<[usize; 2]>,
    pub stages: Vec<StageDescriptor>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingDescriptor {
    pub schema_version: u32,
    pub device: String,
    pub cnns: Vec<CnnMappingDescriptor>,
    pub schedule: MemoryTransferSchedule,
    pub cost: CostSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostSummary {
    pub total: f64,
    pub deadline_term: f64,
    pub headroom_term: f64,
}

impl MappingDescriptor {
    pub fn new(
        device_name: &str,
        workload: &MultiCnnWorkload,
        network_names: &[String],
        mapping: &MultiCnnMapping,
    ) -> Self {
        let CostBreakdown {
            total,
            deadline_term,
            headroom_term,
            latencies_s,
        } = &mapping.cost;
        let cnns = mapping
            .designs
            .iter()
            .enumerate()
            .map(|(j, design)| CnnMappingDescriptor {
                cnn: j,
                network: network_names[j].clone(),
                weight: workload.entries[j].weight,
                target_latency_s: workload.entries[j].target_latency_s,
                achieved_latency_s: latencies_s[j],
                share: mapping.shares[j],
                budget: mapping.budgets[j],
                mode: design.mode.to_string(),
                partitions: design.partitions.iter().map(|&(s, e)| [s, e]).collect(),
                stages: stage_descriptors(design, &workload.entries[j].network),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            device: device_name.to_string(),
            cnns,
            schedule: mapping.schedule.clone(),
            cost: CostSummary {
                total: *total,
                deadline_term: *deadline_term,
                headroom_term: *headroom_term,
            },
            manifest: None,
        }
    }

    pub fn render(mut self, mut manifest: RunManifest) -> String {
        let body = serde_json::to_string_pretty(&self).expect("descriptor serializes");
        manifest.result_sha256 = sha256_hex(body.as_bytes());
        self.manifest = Some(manifest);
        let mut out = serde_json::to_string_pretty(&self).expect("descriptor serializes");
        out.push('\n');
        out
    }
}
