//! Design selection as mathematical optimization: objectives, an exhaustive
//! enumerator over the divisor-restricted folding grid, a seeded simulated
//! annealer, and Pareto-front extraction.
//!
//! Folding values are restricted to divisors of each cap: under the ceiling
//! cycle model with linear DSP cost, a non-divisor is never better than the
//! next divisor down at the same ceiling.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{folding_caps, DesignPoint, Mode};
use crate::ir::NetworkGraph;
use crate::perf::{evaluate, DeviceDescriptor, PerfReport};
use crate::util::divisors;

/// Optimization target. Infeasible candidates are rejected outright rather
/// than penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    MaxThroughput { batch: u64 },
    MinLatency,
}

impl Objective {
    /// Batch size reports are evaluated at under this objective.
    pub fn batch(&self) -> u64 {
        match self {
            Objective::MaxThroughput { batch } => *batch,
            Objective::MinLatency => 1,
        }
    }

    /// Scalar cost to minimize: latency, or negated throughput.
    pub fn cost(&self, report: &PerfReport) -> f64 {
        match self {
            Objective::MaxThroughput { .. } => -report.throughput_ips,
            Objective::MinLatency => report.latency_s,
        }
    }

    /// Mode of the all-serial starting design.
    fn initial_mode(&self) -> Mode {
        match self {
            Objective::MaxThroughput { .. } => Mode::Throughput,
            Objective::MinLatency => Mode::Latency,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::MaxThroughput { batch } => write!(f, "throughput:{batch}"),
            Objective::MinLatency => write!(f, "latency"),
        }
    }
}

/// Relative probability of each neighborhood move kind. Must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodWeights {
    /// Bump one folding factor to the adjacent divisor, up or down.
    pub folding: f64,
    pub cut_add: f64,
    pub cut_remove: f64,
    pub cut_move: f64,
    pub mode_flip: f64,
}

impl Default for NeighborhoodWeights {
    fn default() -> Self {
        Self {
            folding: 0.6,
            cut_add: 0.1,
            cut_remove: 0.1,
            cut_move: 0.1,
            mode_flip: 0.1,
        }
    }
}

impl NeighborhoodWeights {
    pub fn sum(&self) -> f64 {
        self.folding + self.cut_add + self.cut_remove + self.cut_move + self.mode_flip
    }
}

/// Simulated-annealing knobs. Defaults: geometric cooling from 1.0 at rate
/// 0.95 down to 1e-3, 100 iterations per temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub iterations_per_temperature: u32,
    pub temperature_floor: f64,
    pub weights: NeighborhoodWeights,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            initial_temperature: 1.0,
            cooling_rate: 0.95,
            iterations_per_temperature: 100,
            temperature_floor: 1e-3,
            weights: NeighborhoodWeights::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.initial_temperature <= 0.0 {
            return Err("initial_temperature must be positive".into());
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err("cooling_rate must lie in (0, 1)".into());
        }
        if self.iterations_per_temperature == 0 {
            return Err("iterations_per_temperature must be positive".into());
        }
        if self.temperature_floor <= 0.0 {
            return Err("temperature_floor must be positive".into());
        }
        let w = self.weights;
        for (name, v) in [
            ("folding", w.folding),
            ("cut_add", w.cut_add),
            ("cut_remove", w.cut_remove),
            ("cut_move", w.cut_move),
            ("mode_flip", w.mode_flip),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("neighborhood weight {name} must lie in [0, 1]"));
            }
        }
        if (w.sum() - 1.0).abs() > 1e-9 {
            return Err(format!(
                "neighborhood weights must sum to 1, got {}",
                w.sum()
            ));
        }
        Ok(())
    }

    /// Parses a `key value` / `key=value` optimizer config file mirroring the
    /// struct fields (`seed`, `initial_temperature`, `cooling_rate`,
    /// `iterations_per_temperature`, `temperature_floor`, `w_folding`,
    /// `w_cut_add`, `w_cut_remove`, `w_cut_move`, `w_mode_flip`).
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(char::is_whitespace))
                .ok_or_else(|| format!("line {}: expected `key value`", idx + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_f64 = || {
                value
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: `{key}` must be numeric", idx + 1))
            };
            match key {
                "seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|_| format!("line {}: `seed` must be a u64", idx + 1))?
                }
                "initial_temperature" => cfg.initial_temperature = parse_f64()?,
                "cooling_rate" => cfg.cooling_rate = parse_f64()?,
                "iterations_per_temperature" => {
                    cfg.iterations_per_temperature = value.parse::<u32>().map_err(|_| {
                        format!(
                            "line {}: `iterations_per_temperature` must be an integer",
                            idx + 1
                        )
                    })?
                }
                "temperature_floor" => cfg.temperature_floor = parse_f64()?,
                "w_folding" => cfg.weights.folding = parse_f64()?,
                "w_cut_add" => cfg.weights.cut_add = parse_f64()?,
                "w_cut_remove" => cfg.weights.cut_remove = parse_f64()?,
                "w_cut_move" => cfg.weights.cut_move = parse_f64()?,
                "w_mode_flip" => cfg.weights.mode_flip = parse_f64()?,
                other => return Err(format!("line {}: unknown key `{other}`", idx + 1)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One annealer step as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub candidate_cost: f64,
    pub accepted: bool,
    pub best_cost: f64,
}

pub type DseTrace = Vec<TraceEntry>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DseError {
    #[error("design space has an estimated {0} points, over the enumeration bound")]
    SpaceTooLarge(u128),
    #[error("no feasible design: even the all-serial, fully partitioned baseline does not fit")]
    NoFeasibleDesign,
    #[error("empty input")]
    EmptyInput,
}

/// Enumeration caps: the total-point bound, the maximum partition count
/// explored, and the batch size reports are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_points: u64,
    pub max_partitions: usize,
    pub report_batch: u64,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_points: 1_000_000,
            max_partitions: 4,
            report_batch: 1,
        }
    }
}

/// Folding axes of the enumeration grid: divisor values per layer, coarse
/// then fine.
fn folding_axes(network: &NetworkGraph) -> Vec<Vec<u64>> {
    let mut axes = Vec::with_capacity(2 * network.len());
    for layer in 0..network.len() {
        let (coarse_cap, fine_cap) = folding_caps(network, layer);
        axes.push(divisors(coarse_cap));
        axes.push(divisors(fine_cap));
    }
    axes
}

/// Cut-point sets of size below `max_partitions`, in lexicographic order
/// starting with the empty set.
fn cut_sets(layer_count: usize, max_partitions: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &[usize], layer_count: usize, max_cuts: usize, sets: &mut Vec<Vec<usize>>) {
        if prefix.len() == max_cuts {
            return;
        }
        let from = prefix.last().map(|&c| c + 1).unwrap_or(1);
        for next in from..layer_count {
            let mut cuts = prefix.to_vec();
            cuts.push(next);
            sets.push(cuts.clone());
            extend(&cuts, layer_count, max_cuts, sets);
        }
    }
    let mut sets = vec![Vec::new()];
    extend(
        &[],
        layer_count,
        max_partitions.saturating_sub(1),
        &mut sets,
    );
    sets
}

/// Estimated size of the enumerated space.
pub fn space_size(network: &NetworkGraph, limits: &EnumerationLimits) -> u128 {
    let folding: u128 = folding_axes(network)
        .iter()
        .map(|axis| axis.len() as u128)
        .fold(1u128, |acc, n| acc.saturating_mul(n));
    let cut_mode_count: u128 = cut_sets(network.len(), limits.max_partitions)
        .iter()
        .map(|cuts| if cuts.is_empty() { 1u128 } else { 2u128 })
        .sum();
    folding.saturating_mul(cut_mode_count)
}

/// Enumerates every design point on the divisor grid, in deterministic
/// order: cut sets lexicographically, throughput before latency mode, then
/// folding values layer by layer with the rightmost axis varying fastest.
///
/// Single-partition designs appear in throughput mode only: with no cuts
/// there is nothing to reload or reconfigure, and the two modes describe the
/// same accelerator.
pub fn enumerate_design_points<'a>(
    network: &'a NetworkGraph,
    limits: &EnumerationLimits,
) -> Result<impl Iterator<Item = DesignPoint> + 'a, DseError> {
    let size = space_size(network, limits);
    if size > limits.max_points as u128 {
        return Err(DseError::SpaceTooLarge(size));
    }
    let axes = folding_axes(network);
    let sets = cut_sets(network.len(), limits.max_partitions);

    let mut variants: Vec<(Vec<usize>, Mode)> = Vec::new();
    for cuts in sets {
        if cuts.is_empty() {
            variants.push((cuts, Mode::Throughput));
        } else {
            variants.push((cuts.clone(), Mode::Throughput));
            variants.push((cuts, Mode::Latency));
        }
    }

    let mut variant_idx = 0usize;
    let mut odometer: Vec<usize> = vec![0; axes.len()];
    let mut exhausted = variants.is_empty() || axes.iter().any(|a| a.is_empty());

    Ok(std::iter::from_fn(move || {
        if exhausted {
            return None;
        }
        let (cuts, mode) = &variants[variant_idx];
        let mut design = DesignPoint::serial(network.len());
        for (layer, cfg) in design.stage_configs.iter_mut().enumerate() {
            cfg.coarse = axes[2 * layer][odometer[2 * layer]];
            cfg.fine = axes[2 * layer + 1][odometer[2 * layer + 1]];
        }
        design = match mode {
            Mode::Throughput => design.with_partitions(network, cuts),
            Mode::Latency => design.with_weights_reloading(network, cuts),
        }
        .expect("enumerated cut set is valid");

        // advance odometer; on wrap, move to the next cut/mode variant
        let mut pos = axes.len();
        loop {
            if pos == 0 {
                odometer.iter_mut().for_each(|i| *i = 0);
                variant_idx += 1;
                if variant_idx == variants.len() {
                    exhausted = true;
                }
                break;
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < axes[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
        Some(design)
    }))
}

/// [`enumerate_design_points`] with each point evaluated on the device at the
/// limits' report batch.
pub fn enumerate_designs<'a>(
    network: &'a NetworkGraph,
    device: &'a DeviceDescriptor,
    limits: &EnumerationLimits,
) -> Result<impl Iterator<Item = (DesignPoint, PerfReport)> + 'a, DseError> {
    let batch = limits.report_batch;
    Ok(
        enumerate_design_points(network, limits)?.map(move |design| {
            let report = evaluate(&design, network, device, batch);
            (design, report)
        }),
    )
}

/// Generic seeded annealing loop shared by the single- and multi-CNN
/// optimizers. `cost` returns `None` for infeasible candidates, which are
/// rejected outright. Deltas are normalized by the initial cost's magnitude.
pub(crate) fn anneal<S: Clone>(
    initial: S,
    initial_cost: f64,
    cfg: &OptimizerConfig,
    mut propose: impl FnMut(&S, &mut Xoshiro256PlusPlus) -> Option<S>,
    mut cost: impl FnMut(&S) -> Option<f64>,
    key: impl Fn(&S) -> Vec<u64>,
) -> (S, f64, DseTrace) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let norm = initial_cost.abs().max(f64::MIN_POSITIVE);
    let mut current = initial.clone();
    let mut current_cost = initial_cost;
    let mut best = initial;
    let mut best_cost = initial_cost;
    let mut best_key = key(&best);
    let mut trace = Vec::new();

    let mut temperature = cfg.initial_temperature;
    let mut iteration = 0u64;
    while temperature > cfg.temperature_floor {
        for _ in 0..cfg.iterations_per_temperature {
            let (candidate_cost, accepted) = match propose(&current, &mut rng) {
                Some(candidate) => match cost(&candidate) {
                    Some(c) => {
                        let delta = (c - current_cost) / norm;
                        let accept =
                            delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp();
                        if accept {
                            current = candidate.clone();
                            current_cost = c;
                        }
                        let candidate_key = key(&candidate);
                        if c < best_cost || (c == best_cost && candidate_key < best_key) {
                            best = candidate;
                            best_cost = c;
                            best_key = candidate_key;
                        }
                        (c, accept)
                    }
                    None => (f64::INFINITY, false),
                },
                None => (current_cost, false),
            };
            trace.push(TraceEntry {
                iteration,
                candidate_cost,
                accepted,
                best_cost,
            });
            iteration += 1;
        }
        temperature *= cfg.cooling_rate;
    }
    (best, best_cost, trace)
}

const PROPOSE_RETRIES: usize = 32;

/// Draws one neighbor of `design`: a folding bump to the adjacent divisor, a
/// cut-point add/remove/move, or a mode flip, weighted per the config.
fn propose_neighbor(
    design: &DesignPoint,
    network: &NetworkGraph,
    weights: &NeighborhoodWeights,
    rng: &mut Xoshiro256PlusPlus,
) -> Option<DesignPoint> {
    let n = network.len();
    for _ in 0..PROPOSE_RETRIES {
        let mut pick = rng.gen::<f64>() * weights.sum();
        let mut kind = 4usize;
        for (idx, w) in [
            weights.folding,
            weights.cut_add,
            weights.cut_remove,
            weights.cut_move,
            weights.mode_flip,
        ]
        .into_iter()
        .enumerate()
        {
            if pick < w {
                kind = idx;
                break;
            }
            pick -= w;
        }
        let candidate = match kind {
            0 => bump_folding(design, network, rng),
            1 => {
                let cuts = design.cut_points();
                let available: Vec<usize> = (1..n).filter(|c| !cuts.contains(c)).collect();
                if available.is_empty() {
                    None
                } else {
                    let mut next = cuts.clone();
                    next.push(available[rng.gen_range(0..available.len())]);
                    next.sort_unstable();
                    recut(design, network, &next)
                }
            }
            2 => {
                let mut cuts = design.cut_points();
                if cuts.is_empty() {
                    None
                } else {
                    cuts.remove(rng.gen_range(0..cuts.len()));
                    recut(design, network, &cuts)
                }
            }
            3 => {
                let mut cuts = design.cut_points();
                if cuts.is_empty() {
                    None
                } else {
                    let idx = rng.gen_range(0..cuts.len());
                    let shifted = if rng.gen::<bool>() {
                        cuts[idx] + 1
                    } else {
                        cuts[idx].wrapping_sub(1)
                    };
                    if shifted == 0 || shifted >= n || cuts.contains(&shifted) {
                        None
                    } else {
                        cuts[idx] = shifted;
                        cuts.sort_unstable();
                        recut(design, network, &cuts)
                    }
                }
            }
            _ => {
                let flipped = match design.mode {
                    Mode::Throughput => Mode::Latency,
                    Mode::Latency => Mode::Throughput,
                };
                Some(design.with_mode(flipped))
            }
        };
        if candidate.is_some() {
            return candidate;
        }
    }
    None
}

fn recut(design: &DesignPoint, network: &NetworkGraph, cuts: &[usize]) -> Option<DesignPoint> {
    match design.mode {
        Mode::Throughput => design.with_partitions(network, cuts).ok(),
        Mode::Latency => design.with_weights_reloading(network, cuts).ok(),
    }
}

/// Moves one folding factor of one layer to the adjacent divisor value.
fn bump_folding(
    design: &DesignPoint,
    network: &NetworkGraph,
    rng: &mut Xoshiro256PlusPlus,
) -> Option<DesignPoint> {
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
        .expect("current folding is a divisor of its cap");
    let up = rng.gen::<bool>();
    let next_pos = if up {
        if pos + 1 >= ladder.len() {
            return None;
        }
        pos + 1
    } else {
        pos.checked_sub(1)?
    };
    let value = ladder[next_pos];
    if coarse_axis {
        design.with_coarse(network, layer, value).ok()
    } else {
        design.with_fine(network, layer, value).ok()
    }
}

/// The all-serial, maximally partitioned baseline whose feasibility gates the
/// search: folding 1 everywhere, one layer per partition, mode chosen by the
/// objective.
pub fn baseline_design(network: &NetworkGraph, objective: &Objective) -> DesignPoint {
    let n = network.len();
    let cuts: Vec<usize> = (1..n).collect();
    let serial = DesignPoint::serial(n);
    match objective.initial_mode() {
        Mode::Throughput => serial.with_partitions(network, &cuts),
        Mode::Latency => serial.with_weights_reloading(network, &cuts),
    }
    .expect("interior cuts are valid")
}

/// Simulated-annealing search for the objective's best feasible design.
///
/// Fully deterministic for a given seed: candidate generation consumes a
/// single pseudo-random stream and equal-cost ties resolve to the
/// lexicographically smaller design encoding.
pub fn optimize_sa(
    network: &NetworkGraph,
    device: &DeviceDescriptor,
    objective: Objective,
    cfg: &OptimizerConfig,
) -> Result<(DesignPoint, PerfReport, DseTrace), DseError> {
    cfg.validate().expect("optimizer config must be valid");
    let initial = baseline_design(network, &objective);
    let initial_report = evaluate(&initial, network, device, objective.batch());
    if !initial_report.feasible {
        return Err(DseError::NoFeasibleDesign);
    }
    let initial_cost = objective.cost(&initial_report);

    let (best, _, trace) = anneal(
        initial,
        initial_cost,
        cfg,
        |design, rng| propose_neighbor(design, network, &cfg.weights, rng),
        |design| {
            let report = evaluate(design, network, device, objective.batch());
            report.feasible.then(|| objective.cost(&report))
        },
        DesignPoint::encoding,
    );
    let report = evaluate(&best, network, device, objective.batch());
    Ok((best, report, trace))
}

/// Axes of a Pareto front: one performance metric and one resource component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoAxes {
    pub metric: PerfMetric,
    pub norm: ResourceNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfMetric {
    /// Single-input latency; lower is better.
    Latency,
    /// Throughput at the report's batch; higher is better.
    Throughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceNorm {
    Dsp,
    Bram,
    Lut,
}

impl ResourceNorm {
    fn of(&self, report: &PerfReport) -> u64 {
        match self {
            ResourceNorm::Dsp => report.resources.dsp,
            ResourceNorm::Bram => report.resources.bram,
            ResourceNorm::Lut => report.resources.lut,
        }
    }
}

/// Indices of the non-dominated reports, best metric first.
///
/// A report dominates another when it is better-or-equal on both axes and
/// strictly better on at least one. All reports must be feasible.
pub fn pareto_front(reports: &[PerfReport], axes: ParetoAxes) -> Result<Vec<usize>, DseError> {
    if reports.is_empty() {
        return Err(DseError::EmptyInput);
    }
    // metric mapped so that lower is always better
    let metric = |r: &PerfReport| match axes.metric {
        PerfMetric::Latency => r.latency_s,
        PerfMetric::Throughput => -r.throughput_ips,
    };
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        metric(&reports[a])
            .partial_cmp(&metric(&reports[b]))
            .expect("metrics are finite")
            .then(axes.norm.of(&reports[a]).cmp(&axes.norm.of(&reports[b])))
            .then(a.cmp(&b))
    });

    let mut front = Vec::new();
    let mut best_prev_norm = u64::MAX; // min norm among strictly better metric groups
    let mut i = 0;
    while i < order.len() {
        // group of equal metric values
        let mut j = i;
        while j < order.len() && metric(&reports[order[j]]) == metric(&reports[order[i]]) {
            j += 1;
        }
        let group_min = order[i..j]
            .iter()
            .map(|&k| axes.norm.of(&reports[k]))
            .min()
            .unwrap();
        if group_min < best_prev_norm {
            for &k in &order[i..j] {
                if axes.norm.of(&reports[k]) == group_min {
                    front.push(k);
                }
            }
            best_prev_norm = group_min;
        }
        i = j;
    }
    Ok(front)
}

/// Ratio of the throughput-optimized design's single-input latency to the
/// latency-optimized design's, both found by annealing with the same config.
pub fn latency_throughput_gap(
    network: &NetworkGraph,
    device: &DeviceDescriptor,
    cfg: &OptimizerConfig,
    batch: u64,
) -> Result<f64, DseError> {
    let (_, latency_report, _) = optimize_sa(network, device, Objective::MinLatency, cfg)?;
    let (_, throughput_report, _) =
        optimize_sa(network, device, Objective::MaxThroughput { batch }, cfg)?;
    Ok(throughput_report.latency_s / latency_report.latency_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_network;
    use crate::perf::ResourceVector;

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

    fn one_conv() -> NetworkGraph {
        parse_network("input 1 8 8\nconv name=c k=3 s=1 p=1 out=4").unwrap()
    }

    #[test]
    fn enumerate_one_conv_grid() {
        let net = one_conv();
        let dev = device();
        let points: Vec<_> = enumerate_designs(&net, &dev, &EnumerationLimits::default())
            .unwrap()
            .collect();
        assert_eq!(points.len(), 9);
        let coarse: Vec<u64> = points
            .iter()
            .map(|(d, _)| d.stage_configs[0].coarse)
            .collect();
        let fine: Vec<u64> = points
            .iter()
            .map(|(d, _)| d.stage_configs[0].fine)
            .collect();
        assert_eq!(coarse, vec![1, 1, 1, 2, 2, 2, 4, 4, 4]);
        assert_eq!(fine, vec![1, 3, 9, 1, 3, 9, 1, 3, 9]);
        assert!(points.iter().all(|(d, _)| d.partition_count() == 1));
    }

    #[test]
    fn enumerate_two_layer_cut_sets() {
        let net = parse_network("input 1 8 8\nconv name=c k=3 s=1 p=1 out=2\nrelu name=r").unwrap();
        let dev = device();
        let limits = EnumerationLimits {
            max_partitions: 2,
            ..Default::default()
        };
        let points: Vec<_> = enumerate_designs(&net, &dev, &limits).unwrap().collect();
        let mut cut_mode: Vec<(Vec<usize>, Mode)> = points
            .iter()
            .map(|(d, _)| (d.cut_points(), d.mode))
            .collect();
        cut_mode.dedup();
        assert_eq!(
            cut_mode,
            vec![
                (vec![], Mode::Throughput),
                (vec![1], Mode::Throughput),
                (vec![1], Mode::Latency),
            ]
        );
    }

    #[test]
    fn space_too_large_is_reported() {
        let net = parse_network("input 64 64 64\nconv name=c k=3 s=1 p=1 out=512").unwrap();
        let dev = device();
        let limits = EnumerationLimits {
            max_points: 10,
            ..Default::default()
        };
        let err = enumerate_designs(&net, &dev, &limits)
            .map(|_| ())
            .unwrap_err();
        match err {
            DseError::SpaceTooLarge(size) => assert!(size > 10),
            other => panic!("expected SpaceTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn sa_finds_exhaustive_optimum_on_tiny_space() {
        let net = one_conv();
        let dev = device();
        let best_exhaustive = enumerate_designs(&net, &dev, &EnumerationLimits::default())
            .unwrap()
            .filter(|(_, r)| r.feasible)
            .map(|(_, r)| r.latency_s)
            .fold(f64::INFINITY, f64::min);
        let (_, report, _) = optimize_sa(
            &net,
            &dev,
            Objective::MinLatency,
            &OptimizerConfig::with_seed(7),
        )
        .unwrap();
        assert!(report.feasible);
        assert!((report.latency_s - best_exhaustive).abs() <= 1e-12 * best_exhaustive.abs());
    }

    #[test]
    fn no_feasible_design_without_dsp() {
        let net = one_conv();
        let mut dev = device();
        dev.dsp_capacity = 0;
        let err = optimize_sa(
            &net,
            &dev,
            Objective::MinLatency,
            &OptimizerConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, DseError::NoFeasibleDesign);
    }

    #[test]
    fn identical_seed_identical_run() {
        let net = parse_network(
            "input 2 8 8\nconv name=c k=3 s=1 p=1 out=8\nrelu name=r\nfc name=f out=10",
        )
        .unwrap();
        let dev = device();
        let cfg = OptimizerConfig::with_seed(42);
        let (d1, r1, t1) = optimize_sa(&net, &dev, Objective::MinLatency, &cfg).unwrap();
        let (d2, r2, t2) = optimize_sa(&net, &dev, Objective::MinLatency, &cfg).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(r1, r2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn trace_best_is_monotone_and_bounded_by_initial() {
        let net = parse_network(
            "input 2 8 8\nconv name=c k=3 s=1 p=1 out=8\nrelu name=r\nfc name=f out=10",
        )
        .unwrap();
        let dev = device();
        let objective = Objective::MinLatency;
        let initial = baseline_design(&net, &objective);
        let initial_cost = objective.cost(&evaluate(&initial, &net, &dev, 1));
        let (_, report, trace) =
            optimize_sa(&net, &dev, objective, &OptimizerConfig::with_seed(3)).unwrap();
        assert!(objective.cost(&report) <= initial_cost);
        let mut prev = f64::INFINITY;
        for entry in &trace {
            assert!(entry.best_cost <= prev);
            prev = entry.best_cost;
        }
    }

    fn report_with(latency_s: f64, dsp: u64) -> PerfReport {
        PerfReport {
            batch: 1,
            throughput_ips: 1.0 / latency_s,
            latency_s,
            resources: ResourceVector {
                dsp,
                bram: 0,
                lut: 0,
            },
            bandwidth_demand_gbps: 0.0,
            feasible: true,
            violations: vec![],
        }
    }

    #[test]
    fn pareto_front_drops_dominated_points() {
        // (perf 10, dsp 100) dominates (perf 8, dsp 120) on a throughput axis
        let reports = vec![
            PerfReport {
                throughput_ips: 10.0,
                ..report_with(0.1, 100)
            },
            PerfReport {
                throughput_ips: 8.0,
                ..report_with(0.125, 120)
            },
        ];
        let axes = ParetoAxes {
            metric: PerfMetric::Throughput,
            norm: ResourceNorm::Dsp,
        };
        assert_eq!(pareto_front(&reports, axes).unwrap(), vec![0]);
    }

    #[test]
    fn pareto_single_point_and_empty() {
        let axes = ParetoAxes {
            metric: PerfMetric::Latency,
            norm: ResourceNorm::Dsp,
        };
        let reports = vec![report_with(0.5, 10)];
        assert_eq!(pareto_front(&reports, axes).unwrap(), vec![0]);
        assert_eq!(pareto_front(&[], axes).unwrap_err(), DseError::EmptyInput);
    }

    fn brute_force_front(reports: &[PerfReport], axes: ParetoAxes) -> Vec<usize> {
        let metric = |r: &PerfReport| match axes.metric {
            PerfMetric::Latency => r.latency_s,
            PerfMetric::Throughput => -r.throughput_ips,
        };
        let mut front: Vec<usize> = (0..reports.len())
            .filter(|&i| {
                !(0..reports.len()).any(|j| {
                    let better_metric = metric(&reports[j]) <= metric(&reports[i]);
                    let better_norm = axes.norm.of(&reports[j]) <= axes.norm.of(&reports[i]);
                    let strict = metric(&reports[j]) < metric(&reports[i])
                        || axes.norm.of(&reports[j]) < axes.norm.of(&reports[i]);
                    better_metric && better_norm && strict
                })
            })
            .collect();
        front.sort_by(|&a, &b| {
            metric(&reports[a])
                .partial_cmp(&metric(&reports[b]))
                .unwrap()
                .then(axes.norm.of(&reports[a]).cmp(&axes.norm.of(&reports[b])))
                .then(a.cmp(&b))
        });
        front
    }

    #[test]
    fn pareto_matches_quadratic_oracle_on_conv_space() {
        let net = one_conv();
        let dev = device();
        let reports: Vec<PerfReport> = enumerate_designs(&net, &dev, &EnumerationLimits::default())
            .unwrap()
            .filter(|(_, r)| r.feasible)
            .map(|(_, r)| r)
            .collect();
        let axes = ParetoAxes {
            metric: PerfMetric::Latency,
            norm: ResourceNorm::Dsp,
        };
        assert_eq!(
            pareto_front(&reports, axes).unwrap(),
            brute_force_front(&reports, axes)
        );
    }

    #[test]
    fn pareto_keeps_duplicate_optima() {
        let reports = vec![
            report_with(0.5, 10),
            report_with(0.5, 10),
            report_with(0.6, 9),
        ];
        let axes = ParetoAxes {
            metric: PerfMetric::Latency,
            norm: ResourceNorm::Dsp,
        };
        assert_eq!(
            pareto_front(&reports, axes).unwrap(),
            brute_force_front(&reports, axes)
        );
        assert_eq!(pareto_front(&reports, axes).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn gap_is_one_when_one_design_wins_both() {
        let net = one_conv();
        let dev = device();
        let cfg = OptimizerConfig::with_seed(5);
        let gap = latency_throughput_gap(&net, &dev, &cfg, 256).unwrap();
        assert!((gap - 1.0).abs() < 1e-9, "{gap}");
    }

    #[test]
    fn gap_grows_when_reconfiguration_dominates_reloads() {
        // two FC layers whose resident weights cannot share the device force
        // a split; the throughput design then pays an 80 ms reconfiguration
        // at batch 1 while the latency design streams weights in microseconds
        let net = parse_network("input 64 4 4\nfc name=f1 out=64\nfc name=f2 out=1000").unwrap();
        let mut dev = device();
        dev.bram_capacity = 60;
        let single = DesignPoint::serial(net.len());
        assert!(!crate::perf::evaluate(&single, &net, &dev, 1).feasible);
        let gap = latency_throughput_gap(&net, &dev, &OptimizerConfig::with_seed(1), 256).unwrap();
        assert!(gap > 10.0, "expected a large latency gap, got {gap}");
    }

    #[test]
    fn config_file_round_trip() {
        let text = "seed 9\ninitial_temperature 2.0\ncooling_rate 0.9\niterations_per_temperature 50\ntemperature_floor 0.01\nw_folding 0.5\nw_cut_add 0.2\nw_cut_remove 0.1\nw_cut_move 0.1\nw_mode_flip 0.1\n";
        let cfg = OptimizerConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.iterations_per_temperature, 50);
        assert!(OptimizerConfig::parse("bogus 1\n").is_err());
        assert!(OptimizerConfig::parse("w_folding 0.9\n").is_err()); // weights no longer sum to 1
    }
}
