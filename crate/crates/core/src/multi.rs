//! Joint mapping of multiple CNNs onto one device: resource partitioning,
//! deterministic time-division scheduling of competing memory transfers, and
//! a multiobjective cost over per-model latency targets.
//!
//! Per-CNN designs stay single-partition here: the architectures are resident
//! in parallel, so device reconfiguration is off the table.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{folding_caps, DesignPoint, Mode};
use crate::dse::{anneal, OptimizerConfig};
use crate::ir::NetworkGraph;
use crate::perf::{
    check_fit, design_cycles, estimate_latency, estimate_resources, DeviceDescriptor,
    ResourceVector,
};
use crate::util::divisors;

/// Resource-share grid step for the outer search.
pub const SHARE_STEP: f64 = 0.05;
const SHARE_STEPS_TOTAL: u32 = 20;

/// Default weight of the latency-headroom term in the cost function.
pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadEntry {
    pub network: NetworkGraph,
    /// Application-level importance; normalized to sum 1 at ingestion.
    pub weight: f64,
    pub target_latency_s: f64,
}

/// Two or more CNNs with importance weights and latency targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCnnWorkload {
    pub entries: Vec<WorkloadEntry>,
}

impl MultiCnnWorkload {
    pub fn new(entries: Vec<WorkloadEntry>) -> Result<Self, MultiError> {
        if entries.len() < 2 {
            return Err(MultiError::TooFewEntries { got: entries.len() });
        }
        for (index, entry) in entries.iter().enumerate() {
            if !entry.weight.is_finite() || entry.weight <= 0.0 {
                return Err(MultiError::NonPositiveWeight { index });
            }
            if !entry.target_latency_s.is_finite() || entry.target_latency_s <= 0.0 {
                return Err(MultiError::NonPositiveTarget { index });
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        let entries = entries
            .into_iter()
            .map(|mut e| {
                e.weight /= total;
                e
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn networks(&self) -> Vec<&NetworkGraph> {
        self.entries.iter().map(|e| &e.network).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiError {
    #[error("a multi-CNN workload needs at least 2 entries, got {got}")]
    TooFewEntries { got: usize },
    #[error("entry {index}: weight must be positive")]
    NonPositiveWeight { index: usize },
    #[error("entry {index}: target latency must be positive")]
    NonPositiveTarget { index: usize },
    #[error("resource shares sum to {sum}, over 1")]
    ShareSumExceedsOne { sum: f64 },
    #[error("share {index} is {value}, outside (0, 1]")]
    InvalidShare { index: usize, value: f64 },
    #[error("expected {expected} shares, got {got}")]
    ShareCountMismatch { expected: usize, got: usize },
    #[error(
        "aggregate transfer demand {demand_bits} bits per period exceeds capacity {capacity_bits}"
    )]
    BandwidthInfeasible {
        demand_bits: u128,
        capacity_bits: u128,
    },
    #[error("no feasible mapping: the all-serial, minimum-share configuration does not fit")]
    NoFeasibleMapping,
}

/// One line of a multi-CNN workload file, before the referenced network is
/// loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadEntrySpec {
    pub file: String,
    pub weight: f64,
    pub target_ms: f64,
}

/// Parses the workload file format: one `cnn file=<path> weight=<num>
/// target_ms=<num>` block per line, `#` starting a comment line.
pub fn parse_workload_manifest(
    text: &str,
) -> Result<Vec<WorkloadEntrySpec>, crate::ir::ParseError> {
    use crate::ir::{ParseError, ParseErrorKind};
    let malformed = |line: usize, detail: String| ParseError {
        line,
        kind: ParseErrorKind::Malformed(detail),
    };
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().expect("non-empty line");
        if head != "cnn" {
            return Err(malformed(
                lineno,
                format!("expected `cnn ...`, got `{head}`"),
            ));
        }
        let mut file = None;
        let mut weight = None;
        let mut target_ms = None;
        for tok in tokens {
            let (key, value) = tok.split_once('=').ok_or_else(|| {
                malformed(lineno, format!("expected key=value token, got `{tok}`"))
            })?;
            match key {
                "file" => file = Some(value.to_string()),
                "weight" => {
                    weight = Some(value.parse::<f64>().map_err(|_| {
                        malformed(lineno, format!("`weight` must be numeric, got `{value}`"))
                    })?)
                }
                "target_ms" => {
                    target_ms = Some(value.parse::<f64>().map_err(|_| {
                        malformed(
                            lineno,
                            format!("`target_ms` must be numeric, got `{value}`"),
                        )
                    })?)
                }
                other => return Err(malformed(lineno, format!("unknown key `{other}`"))),
            }
        }
        let missing = |field: &str| ParseError {
            line: lineno,
            kind: ParseErrorKind::MissingField(field.into()),
        };
        let weight = weight.ok_or_else(|| missing("weight"))?;
        let target_ms = target_ms.ok_or_else(|| missing("target_ms"))?;
        if weight <= 0.0 || target_ms <= 0.0 {
            return Err(ParseError {
                line: lineno,
                kind: ParseErrorKind::NonPositiveDimension(
                    "weight and target_ms must be positive".into(),
                ),
            });
        }
        entries.push(WorkloadEntrySpec {
            file: file.ok_or_else(|| missing("file"))?,
            weight,
            target_ms,
        });
    }
    Ok(entries)
}

/// Scales each capacity component of the device by a CNN's share, flooring.
/// Clock, reconfiguration time and word width are inherited; bandwidth is not
/// split here, it is arbitrated by the transfer schedule.
pub fn allocate_resources(
    workload: &MultiCnnWorkload,
    device: &DeviceDescriptor,
    shares: &[f64],
) -> Result<Vec<DeviceDescriptor>, MultiError> {
    if shares.len() != workload.len() {
        return Err(MultiError::ShareCountMismatch {
            expected: workload.len(),
            got: shares.len(),
        });
    }
    for (index, &value) in shares.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(MultiError::InvalidShare { index, value });
        }
    }
    let sum: f64 = shares.iter().sum();
    if sum > 1.0 + 1e-9 {
        return Err(MultiError::ShareSumExceedsOne { sum });
    }
    Ok(shares
        .iter()
        .enumerate()
        .map(|(j, &share)| DeviceDescriptor {
            name: format!("{}#{j}", device.name),
            dsp_capacity: (device.dsp_capacity as f64 * share).floor() as u64,
            bram_capacity: (device.bram_capacity as f64 * share).floor() as u64,
            lut_capacity: (device.lut_capacity as f64 * share).floor() as u64,
            ..device.clone()
        })
        .collect())
}

/// One bus grant in the periodic transfer schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferSlot {
    pub cnn: usize,
    pub start: u64,
    pub duration: u64,
    pub bits: u64,
}

/// Periodic TDM schedule of the shared memory bus. Slots never overlap and
/// per-slot rate never exceeds the device bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTransferSchedule {
    pub period: u64,
    pub slots: Vec<TransferSlot>,
}

/// Per-input off-chip traffic of one mapped CNN in bits: input and output
/// feature maps, plus weight reloads for multi-partition latency-mode designs
/// (one full cycle of partitions in steady state).
pub fn offchip_bits_per_input(
    design: &DesignPoint,
    network: &NetworkGraph,
    device: &DeviceDescriptor,
) -> u64 {
    let wb = device.word_bits as u64;
    let io =
        (network.input_shape.elements() + network.out_shape(network.len() - 1).elements()) * wb;
    let reload = match design.mode {
        Mode::Latency if design.partition_count() > 1 => network.total_weights() * wb,
        _ => 0,
    };
    io + reload
}

/// Traffic requirement of one CNN per schedule period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferDemand {
    pub bits: u64,
    /// The CNN's per-input execution cycles; doubles as its EDF deadline.
    pub exec_cycles: u64,
}

/// Greedy earliest-deadline-first slot assignment over one period.
///
/// The period is the slowest CNN's per-input execution time; every CNN's
/// per-input traffic must fit inside it back-to-back at full bus rate.
pub fn schedule_from_demands(
    demands: &[TransferDemand],
    device: &DeviceDescriptor,
) -> Result<MemoryTransferSchedule, MultiError> {
    let period = demands
        .iter()
        .map(|d| d.exec_cycles)
        .max()
        .unwrap_or(0)
        .max(1);
    let bits_per_cycle = device.bits_per_cycle();

    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by_key(|&j| (demands[j].exec_cycles, j));

    let mut slots = Vec::new();
    let mut cursor = 0u64;
    for j in order {
        let bits = demands[j].bits;
        if bits == 0 {
            continue;
        }
        let mut duration = (bits as f64 / bits_per_cycle).ceil() as u64;
        while (duration as f64) * bits_per_cycle < bits as f64 {
            duration += 1;
        }
        slots.push(TransferSlot {
            cnn: j,
            start: cursor,
            duration,
            bits,
        });
        cursor += duration;
    }
    if cursor > period {
        let total: u128 = demands.iter().map(|d| d.bits as u128).sum();
        return Err(MultiError::BandwidthInfeasible {
            demand_bits: total,
            capacity_bits: (period as f64 * bits_per_cycle) as u128,
        });
    }
    Ok(MemoryTransferSchedule { period, slots })
}

/// Builds the TDM schedule for a set of mapped CNNs.
pub fn schedule_transfers(
    designs: &[DesignPoint],
    networks: &[&NetworkGraph],
    device: &DeviceDescriptor,
) -> Result<MemoryTransferSchedule, MultiError> {
    let demands: Vec<TransferDemand> = designs
        .iter()
        .zip(networks.iter())
        .map(|(design, network)| TransferDemand {
            bits: offchip_bits_per_input(design, network, device),
            exec_cycles: design_cycles(design, network).iter().sum(),
        })
        .collect();
    schedule_from_demands(&demands, device)
}

/// Independent schedule validator: non-overlap, per-slot rate, containment in
/// the period, and coverage of each CNN's recomputed traffic requirement.
/// Deliberately re-derives everything rather than trusting the constructor.
pub fn validate_schedule(
    schedule: &MemoryTransferSchedule,
    designs: &[DesignPoint],
    networks: &[&NetworkGraph],
    device: &DeviceDescriptor,
) -> Result<(), String> {
    let bits_per_cycle = device.bits_per_cycle();
    for (i, a) in schedule.slots.iter().enumerate() {
        let a_end = a
            .start
            .checked_add(a.duration)
            .ok_or("slot end overflows")?;
        if a_end > schedule.period {
            return Err(format!(
                "slot {i} ends at {a_end}, past the period {}",
                schedule.period
            ));
        }
        if a.bits as f64 > a.duration as f64 * bits_per_cycle {
            return Err(format!(
                "slot {i} moves {} bits in {} cycles, over bandwidth",
                a.bits, a.duration
            ));
        }
        for (k, b) in schedule.slots.iter().enumerate().skip(i + 1) {
            let b_end = b.start + b.duration;
            if a.start < b_end && b.start < a_end {
                return Err(format!("slots {i} and {k} overlap"));
            }
        }
    }
    for (j, (design, network)) in designs.iter().zip(networks.iter()).enumerate() {
        let required = offchip_bits_per_input(design, network, device);
        let granted: u64 = schedule
            .slots
            .iter()
            .filter(|s| s.cnn == j)
            .map(|s| s.bits)
            .sum();
        if granted < required {
            return Err(format!(
                "cnn {j} granted {granted} bits per period, needs {required}"
            ));
        }
    }
    Ok(())
}

/// Deadline-miss hinge plus weighted normalized latency:
/// `sum_j w_j * max(0, (lat_j - L_j) / L_j) + lambda * sum_j w_j * lat_j / L_j`.
pub fn multi_objective_cost(latencies: &[f64], workload: &MultiCnnWorkload, lambda: f64) -> f64 {
    cost_breakdown(latencies, workload, lambda).total
}

/// Cost with its per-term decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub deadline_term: f64,
    pub headroom_term: f64,
    pub latencies_s: Vec<f64>,
}

pub fn cost_breakdown(
    latencies: &[f64],
    workload: &MultiCnnWorkload,
    lambda: f64,
) -> CostBreakdown {
    assert_eq!(
        latencies.len(),
        workload.len(),
        "one latency per workload entry"
    );
    let mut deadline_term = 0.0;
    let mut headroom_term = 0.0;
    for (lat, entry) in latencies.iter().zip(workload.entries.iter()) {
        let ratio = lat / entry.target_latency_s;
        deadline_term += entry.weight * (ratio - 1.0).max(0.0);
        headroom_term += lambda * entry.weight * ratio;
    }
    CostBreakdown {
        total: deadline_term + headroom_term,
        deadline_term,
        headroom_term,
        latencies_s: latencies.to_vec(),
    }
}

/// A joint mapping: per-CNN designs and budgets, the transfer schedule, and
/// the cost it was selected under.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCnnMapping {
    pub designs: Vec<DesignPoint>,
    pub shares: Vec<f64>,
    pub budgets: Vec<ResourceVector>,
    pub schedule: MemoryTransferSchedule,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
struct MultiState {
    share_steps: Vec<u32>,
    designs: Vec<DesignPoint>,
}

impl MultiState {
    fn shares(&self) -> Vec<f64> {
        self.share_steps
            .iter()
            .map(|&s| s as f64 * SHARE_STEP)
            .collect()
    }

    fn encoding(&self) -> Vec<u64> {
        let mut key: Vec<u64> = self.share_steps.iter().map(|&s| s as u64).collect();
        for design in &self.designs {
            key.extend(design.encoding());
        }
        key
    }
}

/// Evaluates one joint state; `None` when any design misses its budget or the
/// transfer schedule fails.
fn evaluate_state(
    state: &MultiState,
    workload: &MultiCnnWorkload,
    device: &DeviceDescriptor,
    lambda: f64,
) -> Option<(CostBreakdown, Vec<DeviceDescriptor>, MemoryTransferSchedule)> {
    let budgets = allocate_resources(workload, device, &state.shares()).ok()?;
    let networks = workload.networks();
    for ((design, network), budget) in state
        .designs
        .iter()
        .zip(networks.iter())
        .zip(budgets.iter())
    {
        let resources = estimate_resources(design, network, budget);
        if !check_fit(&resources, budget).feasible {
            return None;
        }
    }
    let schedule = schedule_transfers(&state.designs, &networks, device).ok()?;
    let latencies: Vec<f64> = state
        .designs
        .iter()
        .zip(networks.iter())
        .zip(budgets.iter())
        .map(|((design, network), budget)| estimate_latency(design, network, budget))
        .collect();
    Some((
        cost_breakdown(&latencies, workload, lambda),
        budgets,
        schedule,
    ))
}

/// Smallest grid share for each CNN under which its all-serial design fits.
fn min_shares(
    workload: &MultiCnnWorkload,
    device: &DeviceDescriptor,
) -> Result<Vec<u32>, MultiError> {
    let mut steps = Vec::with_capacity(workload.len());
    for entry in &workload.entries {
        let serial = DesignPoint::serial(entry.network.len());
        let need = estimate_resources(&serial, &entry.network, device);
        let fits = |step: u32| {
            let share = step as f64 * SHARE_STEP;
            let budget = ResourceVector {
                dsp: (device.dsp_capacity as f64 * share).floor() as u64,
                bram: (device.bram_capacity as f64 * share).floor() as u64,
                lut: (device.lut_capacity as f64 * share).floor() as u64,
            };
            need.fits(&budget)
        };
        let step = (1..=SHARE_STEPS_TOTAL)
            .find(|&s| fits(s))
            .ok_or(MultiError::NoFeasibleMapping)?;
        steps.push(step);
    }
    if steps.iter().sum::<u32>() > SHARE_STEPS_TOTAL {
        return Err(MultiError::NoFeasibleMapping);
    }
    Ok(steps)
}

/// Outer annealing over share vectors (5% grid) and per-CNN folding.
///
/// Moves: shift one share step between two CNNs, grow one share from the
/// unallocated slack, or bump one folding factor of one CNN's design. A
/// candidate is valid only when every design fits its budget and the transfer
/// schedule succeeds. Deterministic for a given seed.
pub fn optimize_multi(
    workload: &MultiCnnWorkload,
    device: &DeviceDescriptor,
    cfg: &OptimizerConfig,
) -> Result<MultiCnnMapping, MultiError> {
    optimize_multi_with_lambda(workload, device, cfg, DEFAULT_LAMBDA)
}

pub fn optimize_multi_with_lambda(
    workload: &MultiCnnWorkload,
    device: &DeviceDescriptor,
    cfg: &OptimizerConfig,
    lambda: f64,
) -> Result<MultiCnnMapping, MultiError> {
    cfg.validate().expect("optimizer config must be valid");
    let initial = MultiState {
        share_steps: min_shares(workload, device)?,
        designs: workload
            .entries
            .iter()
            .map(|e| DesignPoint::serial(e.network.len()))
            .collect(),
    };
    let initial_cost = match evaluate_state(&initial, workload, device, lambda) {
        Some((breakdown, _, _)) => breakdown.total,
        None => return Err(MultiError::NoFeasibleMapping),
    };

    let w = cfg.weights;
    let p_design = w.folding + w.mode_flip;
    let p_shift = w.cut_move + w.cut_remove;
    let p_grow = w.cut_add;
    let total = p_design + p_shift + p_grow;

    let (best, _, _) = anneal(
        initial,
        initial_cost,
        cfg,
        |state, rng| {
            for _ in 0..32 {
                let pick = rng.gen::<f64>() * total;
                let candidate = if pick < p_design {
                    bump_one_design(state, workload, rng)
                } else if pick < p_design + p_shift {
                    shift_share(state, rng)
                } else {
                    grow_share(state, rng)
                };
                if candidate.is_some() {
                    return candidate;
                }
            }
            None
        },
        |state| evaluate_state(state, workload, device, lambda).map(|(b, _, _)| b.total),
        MultiState::encoding,
    );

    let (cost, budget_devices, schedule) = evaluate_state(&best, workload, device, lambda)
        .expect("best state was feasible when visited");
    Ok(MultiCnnMapping {
        designs: best.designs,
        shares: best
            .share_steps
            .iter()
            .map(|&s| s as f64 * SHARE_STEP)
            .collect(),
        budgets: budget_devices.iter().map(|d| d.capacities()).collect(),
        schedule,
        cost,
    })
}

fn bump_one_design(
    state: &MultiState,
    workload: &MultiCnnWorkload,
    rng: &mut rand_xoshiro::Xoshiro256PlusPlus,
) -> Option<MultiState> {
    let j = rng.gen_range(0..state.designs.len());
    let network = &workload.entries[j].network;
    let design = &state.designs[j];
    let layer = rng.gen_range(0..network.len());
    let (coarse_cap, fine_cap) = folding_caps(network, layer);
    let coarse_axis = rng.gen::<bool>();
    let (cap, current) = if coarse_axis {
        (coarse_cap, design.stage_configs[layer].coarse)
    } else {
        (fine_cap, design.stage_configs[layer].fine)
    };
    let ladder = divisors(cap);
    if ladder.len() <= 1 {
        return None;
    }
    let pos = ladder
        .binary_search(&current)
        .expect("folding stays on the divisor ladder");
    let next_pos = if rng.gen::<bool>() {
        if pos + 1 >= ladder.len() {
            return None;
        }
        pos + 1
    } else {
        pos.checked_sub(1)?
    };
    let bumped = if coarse_axis {
        design.with_coarse(network, layer, ladder[next_pos]).ok()?
    } else {
        design.with_fine(network, layer, ladder[next_pos]).ok()?
    };
    let mut next = state.clone();
    next.designs[j] = bumped;
    Some(next)
}

fn shift_share(
    state: &MultiState,
    rng: &mut rand_xoshiro::Xoshiro256PlusPlus,
) -> Option<MultiState> {
    let count = state.share_steps.len();
    let from = rng.gen_range(0..count);
    let to = rng.gen_range(0..count);
    if from == to || state.share_steps[from] <= 1 {
        return None;
    }
    let mut next = state.clone();
    next.share_steps[from] -= 1;
    next.share_steps[to] += 1;
    Some(next)
}

fn grow_share(
    state: &MultiState,
    rng: &mut rand_xoshiro::Xoshiro256PlusPlus,
) -> Option<MultiState> {
    if state.share_steps.iter().sum::<u32>() >= SHARE_STEPS_TOTAL {
        return None;
    }
    let j = rng.gen_range(0..state.share_steps.len());
    let mut next = state.clone();
    next.share_steps[j] += 1;
    Some(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_network;

    fn device() -> DeviceDescriptor {
        DeviceDescriptor {
            name: "test".into(),
            dsp_capacity: 220,
            bram_capacity: 280,
            lut_capacity: 530_000,
            clock_mhz: 100.0,
            mem_bandwidth_gbps: 4.0,
            reconfig_ms: 80.0,
            word_bits: 16,
            lut_alpha: 300.0,
            lut_beta: 40.0,
        }
    }

    fn tiny_net(out: u32) -> NetworkGraph {
        parse_network(&format!("input 1 8 8\nconv name=c k=3 s=1 p=1 out={out}")).unwrap()
    }

    fn workload2() -> MultiCnnWorkload {
        MultiCnnWorkload::new(vec![
            WorkloadEntry {
                network: tiny_net(4),
                weight: 1.0,
                target_latency_s: 1e-5,
            },
            WorkloadEntry {
                network: tiny_net(2),
                weight: 1.0,
                target_latency_s: 1e-5,
            },
        ])
        .unwrap()
    }

    #[test]
    fn workload_normalizes_weights_and_rejects_singletons() {
        let w = workload2();
        let total: f64 = w.entries.iter().map(|e| e.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((w.entries[0].weight - 0.5).abs() < 1e-12);

        let err = MultiCnnWorkload::new(vec![WorkloadEntry {
            network: tiny_net(4),
            weight: 1.0,
            target_latency_s: 1e-5,
        }])
        .unwrap_err();
        assert_eq!(err, MultiError::TooFewEntries { got: 1 });
    }

    #[test]
    fn allocate_halves_with_floor() {
        let w = workload2();
        let budgets = allocate_resources(&w, &device(), &[0.5, 0.5]).unwrap();
        assert_eq!(budgets[0].dsp_capacity, 110);
        assert_eq!(budgets[1].dsp_capacity, 110);
        assert_eq!(budgets[0].clock_mhz, 100.0);
        assert_eq!(budgets[0].mem_bandwidth_gbps, 4.0);

        let err = allocate_resources(&w, &device(), &[0.6, 0.5]).unwrap_err();
        assert!(matches!(err, MultiError::ShareSumExceedsOne { .. }));
    }

    #[test]
    fn cost_at_exact_deadlines_is_lambda() {
        let w = workload2();
        let cost = multi_objective_cost(&[1e-5, 1e-5], &w, DEFAULT_LAMBDA);
        assert!((cost - 0.1).abs() < 1e-12, "{cost}");
    }

    #[test]
    fn cost_hinge_counts_misses() {
        let w = workload2();
        // first CNN at twice its deadline with normalized weight 0.5
        let b = cost_breakdown(&[2e-5, 1e-5], &w, DEFAULT_LAMBDA);
        assert!((b.deadline_term - 0.5).abs() < 1e-12);
        // doubling lambda doubles only the headroom term
        let b2 = cost_breakdown(&[2e-5, 1e-5], &w, 2.0 * DEFAULT_LAMBDA);
        assert!((b2.headroom_term - 2.0 * b.headroom_term).abs() < 1e-12);
        assert!((b2.deadline_term - b.deadline_term).abs() < 1e-12);
    }

    #[test]
    fn cost_argmin_invariant_under_weight_rescaling() {
        let nets = [tiny_net(4), tiny_net(2)];
        let candidate_latencies = [[1e-5, 3e-5], [2e-5, 2e-5], [3e-5, 1e-5], [1.5e-5, 2.5e-5]];
        let argmin = |scale: f64| {
            let w = MultiCnnWorkload::new(vec![
                WorkloadEntry {
                    network: nets[0].clone(),
                    weight: 0.9 * scale,
                    target_latency_s: 2e-5,
                },
                WorkloadEntry {
                    network: nets[1].clone(),
                    weight: 0.1 * scale,
                    target_latency_s: 2e-5,
                },
            ])
            .unwrap();
            candidate_latencies
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    multi_objective_cost(*a, &w, DEFAULT_LAMBDA)
                        .partial_cmp(&multi_objective_cost(*b, &w, DEFAULT_LAMBDA))
                        .unwrap()
                })
                .map(|(i, _)| i)
                .unwrap()
        };
        assert_eq!(argmin(1.0), argmin(7.5));
    }

    #[test]
    fn edf_schedule_is_valid_for_two_cnns() {
        let w = workload2();
        let designs: Vec<DesignPoint> = w
            .entries
            .iter()
            .map(|e| DesignPoint::serial(e.network.len()))
            .collect();
        let networks = w.networks();
        let schedule = schedule_transfers(&designs, &networks, &device()).unwrap();
        assert!(!schedule.slots.is_empty());
        validate_schedule(&schedule, &designs, &networks, &device()).unwrap();
    }

    #[test]
    fn quarter_bandwidth_demands_get_disjoint_slots() {
        let dev = device();
        let period = 1000u64;
        let quarter = (period as f64 * dev.bits_per_cycle() * 0.25) as u64;
        let schedule = schedule_from_demands(
            &[
                TransferDemand { bits: quarter, exec_cycles: period },
                TransferDemand { bits: quarter, exec_cycles: period },
            ],
            &dev,
        )
        .unwrap();
        assert_eq!(schedule.slots.len(), 2);
        let (a, b) = (&schedule.slots[0], &schedule.slots[1]);
        assert!(a.start + a.duration <= b.start || b.start + b.duration <= a.start);
        assert!(a.start + a.duration <= period && b.start + b.duration <= period);
    }

    #[test]
    fn zero_traffic_demand_gets_no_slot() {
        let schedule = schedule_from_demands(
            &[TransferDemand {
                bits: 0,
                exec_cycles: 100,
            }],
            &device(),
        )
        .unwrap();
        assert!(schedule.slots.is_empty());
        assert_eq!(schedule.period, 100);
    }

    #[test]
    fn aggregate_demand_over_capacity_is_infeasible() {
        let dev = device();
        // 1.2x the bits the bus can move in the period
        let period = 1000u64;
        let capacity = (period as f64 * dev.bits_per_cycle()) as u64;
        let err = schedule_from_demands(
            &[
                TransferDemand {
                    bits: capacity * 6 / 10,
                    exec_cycles: period,
                },
                TransferDemand {
                    bits: capacity * 6 / 10,
                    exec_cycles: period,
                },
            ],
            &dev,
        )
        .unwrap_err();
        assert!(matches!(err, MultiError::BandwidthInfeasible { .. }));
    }

    #[test]
    fn optimize_two_identical_cnns_is_mirror_symmetric() {
        let w = MultiCnnWorkload::new(vec![
            WorkloadEntry {
                network: tiny_net(4),
                weight: 1.0,
                target_latency_s: 1e-5,
            },
            WorkloadEntry {
                network: tiny_net(4),
                weight: 1.0,
                target_latency_s: 1e-5,
            },
        ])
        .unwrap();
        let cfg = OptimizerConfig {
            iterations_per_temperature: 20,
            ..OptimizerConfig::with_seed(11)
        };
        let mapping = optimize_multi(&w, &device(), &cfg).unwrap();
        validate_schedule(
            &mapping.schedule,
            &mapping.designs,
            &w.networks(),
            &device(),
        )
        .unwrap();
        // mirroring the allocation across an identical pair costs the same
        let mirrored = multi_objective_cost(
            &[mapping.cost.latencies_s[1], mapping.cost.latencies_s[0]],
            &w,
            DEFAULT_LAMBDA,
        );
        assert!((mapping.cost.total - mirrored).abs() < 1e-12);
    }

    #[test]
    fn optimize_multi_is_deterministic() {
        let w = workload2();
        let cfg = OptimizerConfig {
            iterations_per_temperature: 20,
            ..OptimizerConfig::with_seed(5)
        };
        let m1 = optimize_multi(&w, &device(), &cfg).unwrap();
        let m2 = optimize_multi(&w, &device(), &cfg).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn oversized_workload_has_no_mapping() {
        // each fc needs more bram than the whole device offers
        let big = parse_network("input 512 4 4\nfc name=f out=4096").unwrap();
        let w = MultiCnnWorkload::new(vec![
            WorkloadEntry {
                network: big.clone(),
                weight: 1.0,
                target_latency_s: 1.0,
            },
            WorkloadEntry {
                network: big,
                weight: 1.0,
                target_latency_s: 1.0,
            },
        ])
        .unwrap();
        let err = optimize_multi(&w, &device(), &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, MultiError::NoFeasibleMapping);
    }

    #[test]
    fn three_cnns_that_cannot_cofit_have_no_mapping() {
        // each net fits the device alone (112 of 280 bram blocks) but three
        // minimal shares sum past the whole device
        let net = parse_network("input 512 2 2\nfc name=f out=63").unwrap();
        let serial = DesignPoint::serial(net.len());
        let need = estimate_resources(&serial, &net, &device());
        assert!(need.fits(&device().capacities()));
        let entries = (0..3)
            .map(|_| WorkloadEntry {
                network: net.clone(),
                weight: 1.0,
                target_latency_s: 1.0,
            })
            .collect();
        let w = MultiCnnWorkload::new(entries).unwrap();
        let err = optimize_multi(&w, &device(), &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, MultiError::NoFeasibleMapping);
    }

    #[test]
    fn budgets_fit_device_and_designs_fit_budgets() {
        let w = workload2();
        let cfg = OptimizerConfig {
            iterations_per_temperature: 20,
            ..OptimizerConfig::with_seed(2)
        };
        let mapping = optimize_multi(&w, &device(), &cfg).unwrap();
        let total = mapping
            .budgets
            .iter()
            .fold(ResourceVector::default(), |acc, b| acc.add(b));
        assert!(total.fits(&device().capacities()));
        for ((design, network), budget) in mapping
            .designs
            .iter()
            .zip(w.networks().iter())
            .zip(mapping.budgets.iter())
        {
            let mut budget_device = device();
            budget_device.dsp_capacity = budget.dsp;
            budget_device.bram_capacity = budget.bram;
            budget_device.lut_capacity = budget.lut;
            let used = estimate_resources(design, network, &budget_device);
            assert!(used.fits(budget));
            assert_eq!(design.partition_count(), 1);
        }
    }
}
