//! Analytical cycle, latency, throughput, resource and bandwidth models.
//!
//! Cycle arithmetic is exact integer math; conversion to seconds is the only
//! floating-point step. The model is compute-bound: off-chip bandwidth enters
//! through weight reloads and a per-partition feature-map traffic check, not
//! through a memory micro-model.

use serde::{Deserialize, Serialize};

use crate::design::{DesignPoint, Mode, StageConfig};
use crate::ir::{
    layer_ops, layer_weights, LayerKind, NetworkGraph, ParseError, ParseErrorKind, TensorShape,
};
use crate::sim::simulate_stage_pipeline;

/// Bits per BRAM block.
pub const BRAM_BITS: u64 = 18_432;

pub const DEFAULT_LUT_ALPHA: f64 = 300.0;
pub const DEFAULT_LUT_BETA: f64 = 40.0;

/// Target device capacities and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub name: String,
    pub dsp_capacity: u64,
    pub bram_capacity: u64,
    pub lut_capacity: u64,
    pub clock_mhz: f64,
    pub mem_bandwidth_gbps: f64,
    pub reconfig_ms: f64,
    pub word_bits: u32,
    /// Per-stage LUT base cost; calibration-driven placeholder.
    pub lut_alpha: f64,
    /// Per-stage LUT cost per multiplier; calibration-driven placeholder.
    pub lut_beta: f64,
}

impl DeviceDescriptor {
    pub fn clock_hz(&self) -> f64 {
        self.clock_mhz * 1e6
    }

    pub fn bandwidth_bps(&self) -> f64 {
        self.mem_bandwidth_gbps * 1e9
    }

    pub fn reconfig_s(&self) -> f64 {
        self.reconfig_ms * 1e-3
    }

    /// Off-chip transfer rate in bits per clock cycle.
    pub fn bits_per_cycle(&self) -> f64 {
        self.bandwidth_bps() / self.clock_hz()
    }

    pub fn capacities(&self) -> ResourceVector {
        ResourceVector {
            dsp: self.dsp_capacity,
            bram: self.bram_capacity,
            lut: self.lut_capacity,
        }
    }

    /// Parses the line-oriented device file format:
    ///
    /// ```text
    /// device name=<id>
    /// dsp <int>
    /// bram <int>
    /// lut <int>
    /// clock_mhz <num>
    /// bandwidth_gbps <num>
    /// reconfig_ms <num>
    /// word_bits <int>
    /// lut_alpha <num>    # optional
    /// lut_beta <num>     # optional
    /// ```
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let malformed = |line: usize, detail: String| ParseError {
            line,
            kind: ParseErrorKind::Malformed(detail),
        };
        let mut name: Option<String> = None;
        let mut fields: Vec<(String, f64, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().expect("non-empty line");
            if name.is_none() {
                if head != "device" {
                    return Err(malformed(lineno, "expected `device name=<id>`".into()));
                }
                let rest: Vec<&str> = tokens.collect();
                let id = rest
                    .first()
                    .and_then(|tok| tok.strip_prefix("name="))
                    .ok_or_else(|| malformed(lineno, "expected `device name=<id>`".into()))?;
                if id.is_empty() || rest.len() != 1 {
                    return Err(malformed(lineno, "expected `device name=<id>`".into()));
                }
                name = Some(id.to_string());
                continue;
            }
            let value_tok = tokens.next().ok_or_else(|| ParseError {
                line: lineno,
                kind: ParseErrorKind::MissingField(head.into()),
            })?;
            if tokens.next().is_some() {
                return Err(malformed(lineno, format!("trailing tokens after `{head}`")));
            }
            let value: f64 = value_tok.parse().map_err(|_| {
                malformed(
                    lineno,
                    format!("`{head}` must be numeric, got `{value_tok}`"),
                )
            })?;
            if fields.iter().any(|(k, _, _)| k == head) {
                return Err(malformed(lineno, format!("duplicate field `{head}`")));
            }
            fields.push((head.to_string(), value, lineno));
        }
        let name = name.ok_or_else(|| malformed(1, "expected `device name=<id>`".into()))?;

        let known = [
            "dsp",
            "bram",
            "lut",
            "clock_mhz",
            "bandwidth_gbps",
            "reconfig_ms",
            "word_bits",
            "lut_alpha",
            "lut_beta",
        ];
        for (key, _, lineno) in &fields {
            if !known.contains(&key.as_str()) {
                return Err(malformed(*lineno, format!("unknown field `{key}`")));
            }
        }
        let get = |key: &str| -> Result<(f64, usize), ParseError> {
            fields
                .iter()
                .find(|(k, _, _)| k == key)
                .map(|(_, v, l)| (*v, *l))
                .ok_or_else(|| ParseError {
                    line: text.lines().count().max(1),
                    kind: ParseErrorKind::MissingField(key.into()),
                })
        };
        let int_cap = |key: &str| -> Result<u64, ParseError> {
            let (v, lineno) = get(key)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(ParseError {
                    line: lineno,
                    kind: ParseErrorKind::NonPositiveDimension(format!(
                        "`{key}` must be a non-negative integer, got {v}"
                    )),
                });
            }
            Ok(v as u64)
        };
        let positive = |key: &str| -> Result<f64, ParseError> {
            let (v, lineno) = get(key)?;
            if v <= 0.0 {
                return Err(ParseError {
                    line: lineno,
                    kind: ParseErrorKind::NonPositiveDimension(format!(
                        "`{key}` must be positive, got {v}"
                    )),
                });
            }
            Ok(v)
        };
        let (reconfig_ms, reconfig_line) = get("reconfig_ms")?;
        if reconfig_ms < 0.0 {
            return Err(ParseError {
                line: reconfig_line,
                kind: ParseErrorKind::NonPositiveDimension(format!(
                    "`reconfig_ms` must be non-negative, got {reconfig_ms}"
                )),
            });
        }
        let word_bits = int_cap("word_bits")? as u32;
        if ![8, 16, 32].contains(&word_bits) {
            let (_, lineno) = get("word_bits")?;
            return Err(malformed(
                lineno,
                format!("word_bits must be 8, 16 or 32, got {word_bits}"),
            ));
        }
        let optional = |key: &str, default: f64| -> f64 {
            fields
                .iter()
                .find(|(k, _, _)| k == key)
                .map(|(_, v, _)| *v)
                .unwrap_or(default)
        };
        Ok(Self {
            name,
            dsp_capacity: int_cap("dsp")?,
            bram_capacity: int_cap("bram")?,
            lut_capacity: int_cap("lut")?,
            clock_mhz: positive("clock_mhz")?,
            mem_bandwidth_gbps: positive("bandwidth_gbps")?,
            reconfig_ms,
            word_bits,
            lut_alpha: optional("lut_alpha", DEFAULT_LUT_ALPHA),
            lut_beta: optional("lut_beta", DEFAULT_LUT_BETA),
        })
    }
}

/// Componentwise-comparable resource usage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    pub dsp: u64,
    pub bram: u64,
    pub lut: u64,
}

impl ResourceVector {
    pub fn add(&self, other: &Self) -> Self {
        Self {
            dsp: self.dsp + other.dsp,
            bram: self.bram + other.bram,
            lut: self.lut + other.lut,
        }
    }

    pub fn max(&self, other: &Self) -> Self {
        Self {
            dsp: self.dsp.max(other.dsp),
            bram: self.bram.max(other.bram),
            lut: self.lut.max(other.lut),
        }
    }

    pub fn fits(&self, capacities: &Self) -> bool {
        self.dsp <= capacities.dsp && self.bram <= capacities.bram && self.lut <= capacities.lut
    }
}

/// Feasibility verdict of a resource vector against device capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub feasible: bool,
    pub violations: Vec<String>,
}

/// Componentwise capacity check; violations name the exceeded component.
pub fn check_fit(resources: &ResourceVector, device: &DeviceDescriptor) -> FitReport {
    let mut violations = Vec::new();
    let caps = device.capacities();
    for (label, used, cap) in [
        ("dsp", resources.dsp, caps.dsp),
        ("bram", resources.bram, caps.bram),
        ("lut", resources.lut, caps.lut),
    ] {
        if used > cap {
            violations.push(format!("{label} {used} > {cap}"));
        }
    }
    FitReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Performance and feasibility summary of one design on one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    /// Batch size the throughput figure is stated at.
    pub batch: u64,
    pub throughput_ips: f64,
    /// Single-input (batch = 1) latency in seconds.
    pub latency_s: f64,
    /// Max over partitions in throughput mode; flexible-architecture envelope
    /// in latency mode.
    pub resources: ResourceVector,
    pub bandwidth_demand_gbps: f64,
    pub feasible: bool,
    pub violations: Vec<String>,
}

/// Active cycles of one stage per network input.
///
/// Conv/FC divide the layer's MACs over `coarse * fine` multipliers; Pool and
/// ReLU divide their elementwise work over `coarse` units.
pub fn stage_cycles(
    kind: &LayerKind,
    in_shape: TensorShape,
    out_shape: TensorShape,
    config: &StageConfig,
) -> u64 {
    let ops = layer_ops(kind, in_shape, out_shape);
    let divisor = match kind {
        LayerKind::Conv { .. } | LayerKind::Fc { .. } => config.coarse * config.fine,
        LayerKind::Pool { .. } | LayerKind::Relu => config.coarse,
    };
    ops.div_ceil(divisor)
}

/// Resource cost of one stage.
///
/// DSP: one multiplier per `coarse * fine` for Conv/FC. BRAM: line buffer of
/// `(kernel - 1)` input rows for windowed layers plus resident weights, each
/// rounded up to whole blocks. LUT: `alpha + beta * coarse * fine`.
pub fn stage_resources(
    kind: &LayerKind,
    in_shape: TensorShape,
    config: &StageConfig,
    device: &DeviceDescriptor,
) -> ResourceVector {
    let wb = device.word_bits as u64;
    let blocks = |bits: u64| bits.div_ceil(BRAM_BITS);
    let line_buffer_bits =
        |kernel: u32| (kernel as u64 - 1) * in_shape.width as u64 * in_shape.channels as u64 * wb;
    let (dsp, bram) = match kind {
        LayerKind::Conv { kernel, .. } => {
            let weight_bits = layer_weights(kind, in_shape) * wb;
            (
                config.parallelism(),
                blocks(line_buffer_bits(*kernel)) + blocks(weight_bits),
            )
        }
        LayerKind::Fc { .. } => {
            let weight_bits = layer_weights(kind, in_shape) * wb;
            (config.parallelism(), blocks(weight_bits))
        }
        LayerKind::Pool { kernel, .. } => (0, blocks(line_buffer_bits(*kernel))),
        LayerKind::Relu => (0, 0),
    };
    let lut = (device.lut_alpha + device.lut_beta * config.parallelism() as f64).ceil() as u64;
    ResourceVector { dsp, bram, lut }
}

/// Per-layer stage cycles of the whole chain under a design's folding.
pub fn design_cycles(design: &DesignPoint, network: &NetworkGraph) -> Vec<u64> {
    (0..network.len())
        .map(|i| {
            stage_cycles(
                &network.layers[i].kind,
                network.in_shape(i),
                network.out_shape(i),
                &design.stage_configs[i],
            )
        })
        .collect()
}

fn partition_weight_bits(
    network: &NetworkGraph,
    span: (usize, usize),
    device: &DeviceDescriptor,
) -> u64 {
    (span.0..span.1)
        .map(|i| network.layer_weights(i))
        .sum::<u64>()
        * device.word_bits as u64
}

/// Resource usage of the design.
///
/// Throughput mode occupies the device with one partition at a time, so the
/// design cost is the componentwise max over per-partition sums. Latency mode
/// sizes one flexible architecture as the per-stage-position envelope: stage
/// slot `j` must host the largest stage any partition places at position `j`.
pub fn estimate_resources(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
) -> ResourceVector {
    let stage = |i: usize| {
        stage_resources(
            &network.layers[i].kind,
            network.in_shape(i),
            &design.stage_configs[i],
            device,
        )
    };
    match design.mode {
        Mode::Throughput => design
            .partitions
            .iter()
            .map(|&(s, e)| {
                (s..e)
                    .map(stage)
                    .fold(ResourceVector::default(), |acc, r| acc.add(&r))
            })
            .fold(ResourceVector::default(), |acc, r| acc.max(&r)),
        Mode::Latency => {
            let max_len = design
                .partitions
                .iter()
                .map(|&(s, e)| e - s)
                .max()
                .unwrap_or(0);
            let mut total = ResourceVector::default();
            for pos in 0..max_len {
                let envelope = design
                    .partitions
                    .iter()
                    .filter(|&&(s, e)| s + pos < e)
                    .map(|&(s, _)| stage(s + pos))
                    .fold(ResourceVector::default(), |acc, r| acc.max(&r));
                total = total.add(&envelope);
            }
            total
        }
    }
}

/// Single-input latency in seconds.
///
/// All partitions execute sequentially on one input. Latency mode streams in
/// the weights of every partition after the first (the first is resident);
/// throughput mode pays one device reconfiguration per partition switch.
pub fn estimate_latency(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
) -> f64 {
    let cycles = design_cycles(design, network);
    let compute_s: f64 = cycles.iter().map(|&c| c as f64).sum::<f64>() / device.clock_hz();
    match design.mode {
        Mode::Latency => {
            let reload_s: f64 = design
                .partitions
                .iter()
                .skip(1)
                .map(|&span| {
                    partition_weight_bits(network, span, device) as f64 / device.bandwidth_bps()
                })
                .sum();
            compute_s + reload_s
        }
        Mode::Throughput => {
            compute_s + (design.partition_count() as f64 - 1.0) * device.reconfig_s()
        }
    }
}

/// Sustained rate in inputs per second at batch size `batch`.
///
/// Throughput mode pipelines the batch through each partition (fill plus
/// `batch - 1` initiation intervals) and reconfigures between partitions once
/// per batch. Latency mode has no cross-input pipelining: after the first
/// input each further input pays the full chain plus a reload of every
/// partition's weights, including the cyclic return to the first partition.
pub fn estimate_throughput(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
    batch: u64,
) -> f64 {
    assert!(batch >= 1, "batch must be at least 1");
    let cycles = design_cycles(design, network);
    let total_s = match design.mode {
        Mode::Throughput => {
            let mut time_s = 0.0;
            for &(s, e) in &design.partitions {
                let fill: u64 = cycles[s..e].iter().sum();
                let ii: u64 = cycles[s..e].iter().copied().max().unwrap_or(0);
                time_s += (fill + (batch - 1) * ii) as f64 / device.clock_hz();
            }
            time_s + (design.partition_count() as f64 - 1.0) * device.reconfig_s()
        }
        Mode::Latency => {
            let first = estimate_latency(design, network, device);
            let compute_s: f64 = cycles.iter().map(|&c| c as f64).sum::<f64>() / device.clock_hz();
            let steady_reload_s: f64 = if design.partition_count() == 1 {
                0.0
            } else {
                design
                    .partitions
                    .iter()
                    .map(|&span| {
                        partition_weight_bits(network, span, device) as f64 / device.bandwidth_bps()
                    })
                    .sum()
            };
            first + (batch - 1) as f64 * (compute_s + steady_reload_s)
        }
    };
    batch as f64 / total_s
}

/// Peak off-chip feature-map traffic rate over partitions, in Gbit/s.
///
/// Each partition must stream its input and output feature maps within the
/// window one input occupies it: the steady-state initiation interval in
/// throughput mode, the full partition execution in latency mode.
pub fn bandwidth_demand(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
) -> f64 {
    let cycles = design_cycles(design, network);
    let wb = device.word_bits as u64;
    let mut peak_bps: f64 = 0.0;
    for &(s, e) in &design.partitions {
        let io_bits = (network.in_shape(s).elements() + network.out_shape(e - 1).elements()) * wb;
        let window_cycles: u64 = match design.mode {
            Mode::Throughput => cycles[s..e].iter().copied().max().unwrap_or(1),
            Mode::Latency => cycles[s..e].iter().sum(),
        };
        let window_s = window_cycles.max(1) as f64 / device.clock_hz();
        peak_bps = peak_bps.max(io_bits as f64 / window_s);
    }
    peak_bps / 1e9
}

/// Full evaluation of a design: latency, throughput at `batch`, resources,
/// bandwidth demand and the feasibility verdict.
pub fn evaluate(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
    batch: u64,
) -> PerfReport {
    let resources = estimate_resources(design, network, device);
    let fit = check_fit(&resources, device);
    let demand = bandwidth_demand(design, network, device);
    let mut violations = fit.violations;
    if demand > device.mem_bandwidth_gbps {
        violations.push(format!(
            "bandwidth {demand} > {}",
            device.mem_bandwidth_gbps
        ));
    }
    PerfReport {
        batch,
        throughput_ips: estimate_throughput(design, network, device, batch),
        latency_s: estimate_latency(design, network, device),
        resources,
        bandwidth_demand_gbps: demand,
        feasible: violations.is_empty(),
        violations,
    }
}

/// Discrete-event oracle for the analytic makespan formula.
///
/// Simulates the design's single partition as a linear pipeline with depth-1
/// inter-stage buffers and blocking hand-off, and returns the batch makespan
/// in cycles. Panics if the design has more than one partition.
pub fn simulate_pipeline(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
    batch: u64,
) -> u64 {
    let _ = device;
    assert_eq!(
        design.partition_count(),
        1,
        "pipeline oracle models a single partition"
    );
    assert!(batch <= 10_000, "oracle batch capped at 10^4");
    simulate_stage_pipeline(&design_cycles(design, network), batch)
}
