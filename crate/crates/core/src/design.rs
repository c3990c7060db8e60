//! Design points and the algebraic moves over them.
//!
//! A `DesignPoint` is one candidate accelerator: per-layer folding factors,
//! a partitioning of the layer chain, and an execution mode. All moves are
//! pure; they return a new design and leave the input untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{LayerKind, NetworkGraph};

/// Parallelism of one pipeline stage.
///
/// `coarse` replicates the layer's processing unit (across output channels for
/// Conv/FC, across channels for Pool/ReLU); `fine` unrolls the dot product
/// inside one unit (Conv/FC only, fixed at 1 otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageConfig {
    pub coarse: u64,
    pub fine: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self { coarse: 1, fine: 1 }
    }
}

impl StageConfig {
    pub fn parallelism(&self) -> u64 {
        self.coarse * self.fine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Each partition is a standalone accelerator; the device is reconfigured
    /// between partitions and batches amortize the reconfiguration cost.
    Throughput,
    /// One flexible architecture executes partitions back-to-back per input,
    /// streaming each partition's weights in; no device reconfiguration.
    Latency,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Throughput => write!(f, "throughput"),
            Mode::Latency => write!(f, "latency"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldingAxis {
    Coarse,
    Fine,
}

impl std::fmt::Display for FoldingAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FoldingAxis::Coarse => write!(f, "coarse"),
            FoldingAxis::Fine => write!(f, "fine"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("layer {layer}: {axis} folding {value} out of range 1..={cap}")]
    FoldingOutOfRange {
        layer: usize,
        axis: FoldingAxis,
        value: u64,
        cap: u64,
    },
    #[error("invalid cut point {cut}")]
    InvalidCutPoint { cut: usize },
    #[error("partitioning with reconfiguration requires throughput mode")]
    ModeMismatch,
}

/// One candidate accelerator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub stage_configs: Vec<StageConfig>,
    pub mode: Mode,
    /// Contiguous half-open layer ranges covering `[0, n)` in order.
    pub partitions: Vec<(usize, usize)>,
}

impl DesignPoint {
    /// The all-serial baseline: every folding factor 1, a single partition,
    /// throughput mode.
    pub fn serial(layer_count: usize) -> Self {
        Self {
            stage_configs: vec![StageConfig::default(); layer_count],
            mode: Mode::Throughput,
            partitions: vec![(0, layer_count)],
        }
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    /// Interior cut points, i.e. the start of every partition but the first.
    pub fn cut_points(&self) -> Vec<usize> {
        self.partitions
            .iter()
            .skip(1)
            .map(|&(start, _)| start)
            .collect()
    }

    /// Index of the partition containing layer `i`.
    pub fn partition_of(&self, layer: usize) -> usize {
        self.partitions
            .iter()
            .position(|&(s, e)| layer >= s && layer < e)
            .expect("layer inside partition cover")
    }

    /// Checks folding caps and partition-cover invariants against a network.
    pub fn validate(&self, network: &NetworkGraph) -> Result<(), DesignError> {
        let n = network.len();
        for (layer, cfg) in self.stage_configs.iter().enumerate() {
            let (coarse_cap, fine_cap) = folding_caps(network, layer);
            if cfg.coarse < 1 || cfg.coarse > coarse_cap {
                return Err(DesignError::FoldingOutOfRange {
                    layer,
                    axis: FoldingAxis::Coarse,
                    value: cfg.coarse,
                    cap: coarse_cap,
                });
            }
            if cfg.fine < 1 || cfg.fine > fine_cap {
                return Err(DesignError::FoldingOutOfRange {
                    layer,
                    axis: FoldingAxis::Fine,
                    value: cfg.fine,
                    cap: fine_cap,
                });
            }
        }
        let mut expected_start = 0usize;
        for &(start, end) in &self.partitions {
            if start != expected_start || end <= start {
                return Err(DesignError::InvalidCutPoint { cut: start });
            }
            expected_start = end;
        }
        if expected_start != n || self.stage_configs.len() != n {
            return Err(DesignError::InvalidCutPoint {
                cut: expected_start,
            });
        }
        Ok(())
    }

    /// Returns a copy with layer `layer`'s coarse folding set to `c`.
    pub fn with_coarse(
        &self,
        network: &NetworkGraph,
        layer: usize,
        c: u64,
    ) -> Result<Self, DesignError> {
        let (cap, _) = folding_caps(network, layer);
        if c < 1 || c > cap {
            return Err(DesignError::FoldingOutOfRange {
                layer,
                axis: FoldingAxis::Coarse,
                value: c,
                cap,
            });
        }
        let mut next = self.clone();
        next.stage_configs[layer].coarse = c;
        Ok(next)
    }

    /// Returns a copy with layer `layer`'s fine folding set to `m`.
    pub fn with_fine(
        &self,
        network: &NetworkGraph,
        layer: usize,
        m: u64,
    ) -> Result<Self, DesignError> {
        let (_, cap) = folding_caps(network, layer);
        if m < 1 || m > cap {
            return Err(DesignError::FoldingOutOfRange {
                layer,
                axis: FoldingAxis::Fine,
                value: m,
                cap,
            });
        }
        let mut next = self.clone();
        next.stage_configs[layer].fine = m;
        Ok(next)
    }

    /// Re-partitions a throughput-mode design at the given cut points.
    ///
    /// Each partition becomes a standalone accelerator; the device is
    /// reconfigured between them. Errors with `ModeMismatch` on latency-mode
    /// designs, whose cuts are weight-reload boundaries instead.
    pub fn with_partitions(
        &self,
        network: &NetworkGraph,
        cut_points: &[usize],
    ) -> Result<Self, DesignError> {
        if self.mode != Mode::Throughput {
            return Err(DesignError::ModeMismatch);
        }
        let partitions = partitions_from_cuts(network.len(), cut_points)?;
        let mut next = self.clone();
        next.partitions = partitions;
        Ok(next)
    }

    /// Re-partitions at the given cut points and switches to latency mode:
    /// one flexible architecture executes the partitions back-to-back,
    /// streaming each next partition's weights in at memory bandwidth.
    pub fn with_weights_reloading(
        &self,
        network: &NetworkGraph,
        cut_points: &[usize],
    ) -> Result<Self, DesignError> {
        let partitions = partitions_from_cuts(network.len(), cut_points)?;
        let mut next = self.clone();
        next.partitions = partitions;
        next.mode = Mode::Latency;
        Ok(next)
    }

    /// Returns a copy in the given mode, partitioning unchanged.
    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut next = self.clone();
        next.mode = mode;
        next
    }

    /// Canonical encoding used as a total order for deterministic tie-breaks:
    /// mode, then cut points, then folding factors in layer order.
    pub fn encoding(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(2 + self.partitions.len() + 2 * self.stage_configs.len());
        key.push(match self.mode {
            Mode::Throughput => 0,
            Mode::Latency => 1,
        });
        key.push(self.partitions.len() as u64);
        for cut in self.cut_points() {
            key.push(cut as u64);
        }
        for cfg in &self.stage_configs {
            key.push(cfg.coarse);
            key.push(cfg.fine);
        }
        key
    }
}

/// Maximum legal (coarse, fine) folding for a layer.
///
/// Conv: (out channels, in channels * kernel^2); FC: (out channels, flattened
/// input size); Pool/ReLU: (channels, 1).
pub fn folding_caps(network: &NetworkGraph, layer: usize) -> (u64, u64) {
    let in_shape = network.in_shape(layer);
    match &network.layers[layer].kind {
        LayerKind::Conv {
            kernel,
            out_channels,
            ..
        } => (
            *out_channels as u64,
            in_shape.channels as u64 * (*kernel as u64).pow(2),
        ),
        LayerKind::Fc { out_channels } => (*out_channels as u64, in_shape.elements()),
        LayerKind::Pool { .. } | LayerKind::Relu => (in_shape.channels as u64, 1),
    }
}

/// Derives the partition ranges `[0, c1), [c1, c2), ..., [ck, n)` from cut
/// points, which must be strictly increasing interior indices.
pub fn partitions_from_cuts(
    layer_count: usize,
    cut_points: &[usize],
) -> Result<Vec<(usize, usize)>, DesignError> {
    let mut prev = 0usize;
    let mut partitions = Vec::with_capacity(cut_points.len() + 1);
    for &cut in cut_points {
        if cut <= prev || cut >= layer_count {
            return Err(DesignError::InvalidCutPoint { cut });
        }
        partitions.push((prev, cut));
        prev = cut;
    }
    partitions.push((prev, layer_count));
    Ok(partitions)
}
