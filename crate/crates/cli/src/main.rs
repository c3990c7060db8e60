//! `streamflow` — map CNN workloads onto streaming accelerator designs.
//!
//! Subcommands: `parse`, `optimize`, `pareto`, `multi`. Exit codes: 0 on
//! success, 2 on usage or input-format errors, 3 when no feasible design or
//! mapping exists (or the enumeration space is over the bound), 4 on I/O
//! errors. All randomness is seeded; identical inputs, flags and seed yield
//! byte-identical output.

mod descriptor;

use std::time::Instant;

use streamflow_core::dse::{
    enumerate_design_points, optimize_sa, pareto_front, EnumerationLimits, Objective,
    OptimizerConfig, ParetoAxes, PerfMetric, ResourceNorm,
};
use streamflow_core::ir::NetworkGraph;
use streamflow_core::multi::{
    optimize_multi, parse_workload_manifest, MultiCnnWorkload, MultiError, WorkloadEntry,
};
use streamflow_core::perf::{evaluate, DeviceDescriptor};
use streamflow_core::util::parallel_map;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_INFEASIBLE: i32 = 3;
const EXIT_IO: i32 = 4;

const PARETO_BATCH: u64 = 256;

const USAGE: &str = "\
streamflow - CNN-to-accelerator design space exploration

USAGE:
    streamflow parse <network-file>
    streamflow optimize <network-file> <device-file> --objective=<throughput:<B>|latency>
                        [--seed=<u64>] [--out=<path>] [--opt-config=<path>]
    streamflow pareto <network-file> <device-file> [--limit=<max-points>]
    streamflow multi <workload-file> <device-file> [--seed=<u64>] [--out=<path>]
                     [--opt-config=<path>]

The pareto command prints the latency/DSP Pareto front as CSV, with
throughput reported at batch 256. The STREAMFLOW_THREADS environment
variable caps worker parallelism (default: hardware concurrency).
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return EXIT_USAGE;
    };
    match command.as_str() {
        "parse" => cmd_parse(&args[1..]),
        "optimize" => cmd_optimize(&args[1..]),
        "pareto" => cmd_pareto(&args[1..]),
        "multi" => cmd_multi(&args[1..]),
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            EXIT_OK
        }
        other => {
            eprintln!("unknown command `{other}`");
            eprint!("{USAGE}");
            EXIT_USAGE
        }
    }
}

/// Positional arguments and `--key=value` / `--key value` flags.
struct ParsedArgs {
    positional: Vec<String>,
    flags: Vec<(String, String)>,
}

fn split_args(args: &[String], expect_value: &[&str]) -> Result<ParsedArgs, String> {
    let mut positional = Vec::new();
    let mut flags = Vec::new();
    let mut iter = args.iter().peekable();
    while let Some(arg) = iter.next() {
        if let Some(stripped) = arg.strip_prefix("--") {
            let (key, value) = match stripped.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    if !expect_value.contains(&stripped) {
                        return Err(format!("unknown flag `--{stripped}`"));
                    }
                    let value = iter
                        .next()
                        .ok_or_else(|| format!("flag `--{stripped}` needs a value"))?;
                    (stripped.to_string(), value.clone())
                }
            };
            if !expect_value.contains(&key.as_str()) {
                return Err(format!("unknown flag `--{key}`"));
            }
            if flags.iter().any(|(k, _)| *k == key) {
                return Err(format!("duplicate flag `--{key}`"));
            }
            flags.push((key, value));
        } else {
            positional.push(arg.clone());
        }
    }
    Ok(ParsedArgs { positional, flags })
}

impl ParsedArgs {
    fn flag(&self, key: &str) -> Option<&str> {
        self.flags
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn usage_error(message: &str) -> i32 {
    eprintln!("{message}");
    eprint!("{USAGE}");
    EXIT_USAGE
}

/// Writes the requested artifact to stdout, treating a closed pipe as a
/// normal early exit.
fn write_stdout(content: &str) -> i32 {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    match handle
        .write_all(content.as_bytes())
        .and_then(|_| handle.flush())
    {
        Ok(()) => EXIT_OK,
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("cannot write to stdout: {e}");
            EXIT_IO
        }
    }
}

fn read_input(path: &str) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read `{path}`: {e}");
        EXIT_IO
    })
}

fn load_network(path: &str) -> Result<(String, NetworkGraph), i32> {
    let text = read_input(path)?;
    let network = NetworkGraph::parse(&text).map_err(|e| {
        eprintln!("{path}: {e}");
        EXIT_USAGE
    })?;
    Ok((text, network))
}

fn load_device(path: &str) -> Result<(String, DeviceDescriptor), i32> {
    let text = read_input(path)?;
    let device = DeviceDescriptor::parse(&text).map_err(|e| {
        eprintln!("{path}: {e}");
        EXIT_USAGE
    })?;
    Ok((text, device))
}

fn emit(out_path: Option<&str>, content: &str) -> i32 {
    match out_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, content) {
                eprintln!("cannot write `{path}`: {e}");
                return EXIT_IO;
            }
            EXIT_OK
        }
        None => write_stdout(content),
    }
}

fn parse_seed(parsed: &ParsedArgs) -> Result<Option<u64>, i32> {
    match parsed.flag("seed") {
        None => Ok(None),
        Some(raw) => raw
            .parse::<u64>()
            .map(Some)
            .map_err(|_| usage_error(&format!("`--seed` must be a u64, got `{raw}`"))),
    }
}

fn build_optimizer_config(parsed: &ParsedArgs) -> Result<OptimizerConfig, i32> {
    let mut cfg = match parsed.flag("opt-config") {
        Some(path) => {
            let text = read_input(path)?;
            OptimizerConfig::parse(&text).map_err(|e| {
                eprintln!("{path}: {e}");
                EXIT_USAGE
            })?
        }
        None => OptimizerConfig::default(),
    };
    if let Some(seed) = parse_seed(parsed)? {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_parse(args: &[String]) -> i32 {
    let parsed = match split_args(args, &[]) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let [net_path] = parsed.positional.as_slice() else {
        return usage_error("parse takes exactly one network file");
    };
    let (_, network) = match load_network(net_path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let mut table = format!(
        "{:<14} {:<6} {:>14} {:>14} {:>12}\n",
        "layer", "kind", "output", "ops", "weights"
    );
    for i in 0..network.len() {
        table.push_str(&format!(
            "{:<14} {:<6} {:>14} {:>14} {:>12}\n",
            network.layers[i].name,
            network.layers[i].kind.label(),
            network.out_shape(i).to_string(),
            network.layer_ops(i),
            network.layer_weights(i),
        ));
    }
    table.push_str(&format!(
        "{:<14} {:<6} {:>14} {:>14} {:>12}\n",
        "total",
        "-",
        "-",
        network.total_ops(),
        network.total_weights()
    ));
    write_stdout(&table)
}

fn parse_objective(raw: &str) -> Result<Objective, String> {
    if raw == "latency" {
        return Ok(Objective::MinLatency);
    }
    if let Some(batch) = raw.strip_prefix("throughput:") {
        let batch: u64 = batch
            .parse()
            .map_err(|_| format!("objective batch must be an integer, got `{batch}`"))?;
        if batch == 0 {
            return Err("objective batch must be at least 1".into());
        }
        return Ok(Objective::MaxThroughput { batch });
    }
    Err(format!(
        "unknown objective `{raw}`; expected `latency` or `throughput:<B>`"
    ))
}

fn cmd_optimize(args: &[String]) -> i32 {
    let parsed = match split_args(args, &["objective", "seed", "out", "opt-config"]) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let [net_path, dev_path] = parsed.positional.as_slice() else {
        return usage_error("optimize takes a network file and a device file");
    };
    let Some(objective_raw) = parsed.flag("objective") else {
        return usage_error("optimize requires --objective=<throughput:<B>|latency>");
    };
    let objective = match parse_objective(objective_raw) {
        Ok(o) => o,
        Err(e) => return usage_error(&e),
    };
    let cfg = match build_optimizer_config(&parsed) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (net_text, network) = match load_network(net_path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let (dev_text, device) = match load_device(dev_path) {
        Ok(v) => v,
        Err(code) => return code,
    };

    let started = Instant::now();
    let (design, report, _trace) = match optimize_sa(&network, &device, objective, &cfg) {
        Ok(result) => result,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_INFEASIBLE;
        }
    };
    let wall = started.elapsed().as_secs_f64();

    let manifest = descriptor::RunManifest::new(
        &[
            (net_path.as_str(), net_text.as_str()),
            (dev_path.as_str(), dev_text.as_str()),
        ],
        cfg.seed,
        &objective.to_string(),
    );
    let doc = descriptor::DesignDescriptor::new(net_path, &device.name, &design, &network, report)
        .render(manifest);
    eprintln!(
        "optimize: objective={objective} seed={} wall_clock_s={wall:.3}",
        cfg.seed
    );
    emit(parsed.flag("out"), &doc)
}

struct ParetoRow {
    design_id: u64,
    latency_s: f64,
    throughput_ips: f64,
    dsp: u64,
    bram: u64,
    lut: u64,
    mode: String,
    partitions: usize,
}

fn cmd_pareto(args: &[String]) -> i32 {
    let parsed = match split_args(args, &["limit"]) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let [net_path, dev_path] = parsed.positional.as_slice() else {
        return usage_error("pareto takes a network file and a device file");
    };
    let mut limits = EnumerationLimits {
        report_batch: PARETO_BATCH,
        ..EnumerationLimits::default()
    };
    if let Some(raw) = parsed.flag("limit") {
        match raw.parse::<u64>() {
            Ok(v) if v >= 1 => limits.max_points = v,
            _ => {
                return usage_error(&format!(
                    "`--limit` must be a positive integer, got `{raw}`"
                ))
            }
        }
    }
    let (_, network) = match load_network(net_path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let (_, device) = match load_device(dev_path) {
        Ok(v) => v,
        Err(code) => return code,
    };

    let points = match enumerate_design_points(&network, &limits) {
        Ok(iter) => iter,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_INFEASIBLE;
        }
    };

    // evaluate in deterministic enumeration order, fanning chunks out to
    // worker threads; keep only feasible rows
    let mut rows: Vec<ParetoRow> = Vec::new();
    let mut reports = Vec::new();
    let mut design_id = 0u64;
    let mut points = points.peekable();
    while points.peek().is_some() {
        let chunk: Vec<_> = points.by_ref().take(8192).collect();
        let evaluated = parallel_map(chunk, |design| {
            (
                evaluate(design, &network, &device, PARETO_BATCH),
                design.clone(),
            )
        });
        for (report, design) in evaluated {
            if report.feasible {
                rows.push(ParetoRow {
                    design_id,
                    latency_s: report.latency_s,
                    throughput_ips: report.throughput_ips,
                    dsp: report.resources.dsp,
                    bram: report.resources.bram,
                    lut: report.resources.lut,
                    mode: design.mode.to_string(),
                    partitions: design.partition_count(),
                });
                reports.push(report);
            }
            design_id += 1;
        }
    }

    let mut csv = String::from("design_id,latency_s,throughput_ips,dsp,bram,lut,mode,partitions\n");
    if !rows.is_empty() {
        let axes = ParetoAxes {
            metric: PerfMetric::Latency,
            norm: ResourceNorm::Dsp,
        };
        let front = pareto_front(&reports, axes).expect("rows are non-empty");
        for idx in front {
            let row = &rows[idx];
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.design_id,
                row.latency_s,
                row.throughput_ips,
                row.dsp,
                row.bram,
                row.lut,
                row.mode,
                row.partitions
            ));
        }
    }
    write_stdout(&csv)
}

fn cmd_multi(args: &[String]) -> i32 {
    let parsed = match split_args(args, &["seed", "out", "opt-config"]) {
        Ok(p) => p,
        Err(e) => return usage_error(&e),
    };
    let [workload_path, dev_path] = parsed.positional.as_slice() else {
        return usage_error("multi takes a workload file and a device file");
    };
    let cfg = match build_optimizer_config(&parsed) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let workload_text = match read_input(workload_path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let specs = match parse_workload_manifest(&workload_text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{workload_path}: {e}");
            return EXIT_USAGE;
        }
    };
    if specs.len() < 2 {
        return usage_error(&format!(
            "{workload_path}: a multi-CNN workload needs at least 2 entries, got {}",
            specs.len()
        ));
    }
    let (dev_text, device) = match load_device(dev_path) {
        Ok(v) => v,
        Err(code) => return code,
    };

    // network paths resolve relative to the workload file
    let base = std::path::Path::new(workload_path)
        .parent()
        .map(|p| p.to_path_buf());
    let mut entries = Vec::new();
    let mut inputs: Vec<(String, String)> = vec![
        (workload_path.clone(), workload_text.clone()),
        (dev_path.clone(), dev_text.clone()),
    ];
    let mut network_names = Vec::new();
    for spec in &specs {
        let resolved = match &base {
            Some(dir) if !std::path::Path::new(&spec.file).is_absolute() => {
                dir.join(&spec.file).to_string_lossy().into_owned()
            }
            _ => spec.file.clone(),
        };
        let (text, network) = match load_network(&resolved) {
            Ok(v) => v,
            Err(code) => return code,
        };
        inputs.push((resolved.clone(), text));
        network_names.push(spec.file.clone());
        entries.push(WorkloadEntry {
            network,
            weight: spec.weight,
            target_latency_s: spec.target_ms * 1e-3,
        });
    }
    let workload = match MultiCnnWorkload::new(entries) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("{workload_path}: {e}");
            return EXIT_USAGE;
        }
    };

    let started = Instant::now();
    let mapping = match optimize_multi(&workload, &device, &cfg) {
        Ok(m) => m,
        Err(err @ (MultiError::NoFeasibleMapping | MultiError::BandwidthInfeasible { .. })) => {
            eprintln!("{err}");
            return EXIT_INFEASIBLE;
        }
        Err(other) => {
            eprintln!("{other}");
            return EXIT_USAGE;
        }
    };
    let wall = started.elapsed().as_secs_f64();

    let input_refs: Vec<(&str, &str)> = inputs
        .iter()
        .map(|(f, t)| (f.as_str(), t.as_str()))
        .collect();
    let manifest = descriptor::RunManifest::new(&input_refs, cfg.seed, "multi");
    let doc = descriptor::MappingDescriptor::new(&device.name, &workload, &network_names, &mapping)
        .render(manifest);
    eprintln!("multi: seed={} wall_clock_s={wall:.3}", cfg.seed);
    emit(parsed.flag("out"), &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_strings() {
        assert_eq!(parse_objective("latency").unwrap(), Objective::MinLatency);
        assert_eq!(
            parse_objective("throughput:256").unwrap(),
            Objective::MaxThroughput { batch: 256 }
        );
        assert!(parse_objective("throughput:").is_err());
        assert!(parse_objective("throughput:0").is_err());
        assert!(parse_objective("speed").is_err());
    }

    #[test]
    fn flag_splitting() {
        let args: Vec<String> = ["a.net", "--seed=4", "--out", "x.json"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let parsed = split_args(&args, &["seed", "out"]).unwrap();
        assert_eq!(parsed.positional, vec!["a.net"]);
        assert_eq!(parsed.flag("seed"), Some("4"));
        assert_eq!(parsed.flag("out"), Some("x.json"));
        assert!(split_args(&args, &["seed"]).is_err());
    }
}
