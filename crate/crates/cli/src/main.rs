mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bitcompose::cost::{calibrate, default_anchors, dse_sweep, CostParams};
use bitcompose::sim::{geomean, simulate_network, AcceleratorConfig, ComparisonRow, MemorySpec, SimReport, Style};
use bitcompose::workloads::{bundled_names, bundled_source, parse_network, to_homogeneous, BitwidthMode, NetworkSpec};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "bitcompose", version, about = "Composable bit-sliced vector units: cost sweeps and accelerator simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-MAC power and area over slice widths and vector lengths.
    Dse(DseArgs),
    /// Simulate one network on one accelerator.
    Simulate(SimulateArgs),
    /// Runtime and energy ratios of several accelerators, against the first.
    Compare(CompareArgs),
    /// Fit cost constants to the built-in anchors and print them as TOML.
    Calibrate(CalibrateArgs),
    /// List the bundled benchmark networks.
    Networks(OutArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DseArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    slices: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    lanes: Vec<usize>,
    /// Cost parameter file (TOML); defaults to the shipped calibration.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AcceleratorArgs {
    /// Core power budget in mW.
    #[arg(long, default_value_t = 250.0)]
    budget: f64,
    /// Per-unit weight scratchpad in bytes (default: 512 KiB split across units).
    #[arg(long)]
    weight_scratchpad: Option<usize>,
    #[arg(long)]
    input_buffer: Option<usize>,
    #[arg(long)]
    output_buffer: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Network file, or the name of a bundled network.
    #[arg(long)]
    network: String,
    #[arg(long, default_value = "vector")]
    style: Style,
    /// ddr4, hbm2 or custom.
    #[arg(long, default_value = "ddr4")]
    memory: String,
    /// Off-chip bandwidth in GB/s (required for custom memory).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Off-chip access energy (required for custom memory).
    #[arg(long)]
    pj_per_bit: Option<f64>,
    /// Run every layer at 8 bits.
    #[arg(long)]
    homogeneous: bool,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Also write the text summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    acc: AcceleratorArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Networks to run (files or bundled names); defaults to the bundled suite.
    #[arg(long)]
    network: Vec<String>,
    /// Accelerator group such as `style=vector,memory=hbm2`; keys: style,
    /// memory, bandwidth (GB/s), pj_per_bit, budget (mW). Give at least two.
    #[arg(long = "config")]
    configs: Vec<String>,
    #[arg(long)]
    homogeneous: bool,
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Dse(a) => cmd_dse(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Networks(a) => cmd_networks(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Input(err) => eprintln!("error: {err:#}"),
                CliError::Internal(err) => eprintln!("internal error: {err:#}"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn emit(manifest: &RunManifest, body: &str, out: &OutArgs) -> CliResult<()> {
    let text = format!("{}{}", manifest.render(), body);
    match &out.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(input)?,
        None => print!("{text}"),
    }
    eprintln!("manifest sha256: {}", manifest.digest());
    Ok(())
}

fn load_params(path: Option<&Path>, manifest: &mut RunManifest) -> CliResult<CostParams> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading cost parameters {}", p.display()))
                .map_err(input)?;
            manifest.input("params", text.as_bytes());
            CostParams::from_toml(&text)
                .with_context(|| format!("in {}", p.display()))
                .map_err(input)
        }
        None => {
            let p = CostParams::default_calibrated();
            manifest.input("params", p.to_toml().as_bytes());
            Ok(p)
        }
    }
}

fn load_network(spec: &str, manifest: &mut RunManifest) -> CliResult<NetworkSpec> {
    let path = Path::new(spec);
    let text = if path.exists() {
        std::fs::read_to_string(path)
            .with_context(|| format!("reading network {spec}"))
            .map_err(input)?
    } else if let Some(src) = bundled_source(spec) {
        src.to_string()
    } else {
        return Err(input(anyhow!(
            "network '{spec}' is neither a file nor a bundled network ({})",
            bundled_names().join(", ")
        )));
    };
    manifest.input(&format!("network:{spec}"), text.as_bytes());
    parse_network(&text).with_context(|| format!("in network {spec}")).map_err(input)
}

fn memory_spec(name: &str, bandwidth_gbs: Option<f64>, pj_per_bit: Option<f64>) -> CliResult<MemorySpec> {
    let mut mem = match name {
        "custom" => match (bandwidth_gbs, pj_per_bit) {
            (Some(_), Some(_)) => MemorySpec::custom(0.0, 0.0),
            _ => return Err(CliError::Usage("custom memory needs --bandwidth and --pj-per-bit".into())),
        },
        other => MemorySpec::by_name(other)
            .ok_or_else(|| CliError::Usage(format!("unknown memory '{other}' (ddr4, hbm2 or custom)")))?,
    };
    if let Some(b) = bandwidth_gbs {
        mem.bandwidth_bytes_per_sec = b * 1e9;
    }
    if let Some(e) = pj_per_bit {
        mem.pj_per_bit = e;
    }
    mem.validate().map_err(input)?;
    Ok(mem)
}

fn accelerator(style: Style, params: &CostParams, a: &AcceleratorArgs) -> CliResult<AcceleratorConfig> {
    let mut acc = AcceleratorConfig::iso_power(style, params, a.budget).map_err(input)?;
    if let Some(v) = a.weight_scratchpad {
        acc.weight_scratchpad_bytes = v;
    }
    if let Some(v) = a.input_buffer {
        acc.input_buffer_bytes = v;
    }
    if let Some(v) = a.output_buffer {
        acc.output_buffer_bytes = v;
    }
    acc.validate().map_err(input)?;
    Ok(acc)
}

fn warn_conventional(style: Style, net: &NetworkSpec) {
    if style == Style::Conventional && net.bitwidth_mode == BitwidthMode::Heterogeneous {
        eprintln!(
            "warning: conventional style runs every layer of '{}' at 8 bits",
            net.name
        );
    }
}

fn cmd_dse(a: DseArgs) -> CliResult<()> {
    let mut m = RunManifest::new("dse");
    let join = |v: &[String]| v.join(",");
    m.param("slices", join(&a.slices.iter().map(u8::to_string).collect::<Vec<_>>()))
        .param("lanes", join(&a.lanes.iter().map(usize::to_string).collect::<Vec<_>>()));
    let params = load_params(a.params.as_deref(), &mut m)?;
    let points = dse_sweep(&a.slices, &a.lanes, &params).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut body = String::from(
        "slice_width,L,power_norm,area_norm,multiply_power,multiply_area,add_power,add_area,shift_power,shift_area,register_power,register_area\n",
    );
    for p in &points {
        let _ = write!(body, "{},{},{:.6},{:.6}", p.slice_width, p.lanes, p.power_norm, p.area_norm);
        for (_, c) in p.breakdown.categories() {
            let _ = write!(body, ",{:.6},{:.6}", c.energy, c.area);
        }
        body.push('\n');
    }
    emit(&m, &body, &a.out)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let mut m = RunManifest::new("simulate");
    let params = load_params(a.params.as_deref(), &mut m)?;
    let mut net = load_network(&a.network, &mut m)?;
    if a.homogeneous {
        net = to_homogeneous(&net);
    }
    let mem = memory_spec(&a.memory, a.bandwidth, a.pj_per_bit)?;
    let acc = accelerator(a.style, &params, &a.acc)?;
    warn_conventional(a.style, &net);
    m.param("network", &a.network)
        .param("style", a.style)
        .param("homogeneous", a.homogeneous)
        .param("memory", &mem.name)
        .param("bandwidth_bytes_per_sec", mem.bandwidth_bytes_per_sec)
        .param("pj_per_bit", mem.pj_per_bit)
        .param("budget_mw", a.acc.budget)
        .param("rows", acc.rows)
        .param("cols", acc.cols)
        .param("lanes", acc.cvu.lanes())
        .param("weight_scratchpad_bytes", acc.weight_scratchpad_bytes)
        .param("input_buffer_bytes", acc.input_buffer_bytes)
        .param("output_buffer_bytes", acc.output_buffer_bytes)
        .param("overlap", "double-buffered");
    let report = simulate_network(&net, &acc, &mem, &params).map_err(input)?;
    check_report(&report)?;
    let summary = report.summary();
    eprint!("{summary}");
    if let Some(p) = &a.summary {
        std::fs::write(p, format!("{}{summary}", m.render()))
            .with_context(|| format!("writing {}", p.display()))
            .map_err(input)?;
    }
    emit(&m, &report.to_csv(), &a.out)
}

fn check_report(r: &SimReport) -> CliResult<()> {
    let sum: u64 = r.layers.iter().map(|l| l.total_cycles).sum();
    let e = r.energy;
    if sum != r.total_cycles || e.compute < 0.0 || e.on_chip_sram < 0.0 || e.off_chip < 0.0 {
        return Err(CliError::Internal(anyhow!("report totals do not close for {}", r.network)));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct ConfigGroup {
    label: String,
    style: Style,
    memory: MemorySpec,
    budget: f64,
}

fn parse_group(text: &str) -> CliResult<ConfigGroup> {
    let mut style = None;
    let mut memory = "ddr4".to_string();
    let mut bandwidth = None;
    let mut pj = None;
    let mut budget = 250.0;
    let num = |k: &str, v: &str| {
        v.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("config '{text}': {k} must be a number")))
    };
    for kv in text.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config '{text}': expected key=value, got '{kv}'")))?;
        match k.trim() {
            "style" => style = Some(v.trim().parse::<Style>().map_err(CliError::Usage)?),
            "memory" => memory = v.trim().to_string(),
            "bandwidth" => bandwidth = Some(num(k, v)?),
            "pj_per_bit" => pj = Some(num(k, v)?),
            "budget" => budget = num(k, v)?,
            other => return Err(CliError::Usage(format!("config '{text}': unknown key '{other}'"))),
        }
    }
    let style = style.ok_or_else(|| CliError::Usage(format!("config '{text}' has no style")))?;
    let memory = memory_spec(&memory, bandwidth, pj)?;
    Ok(ConfigGroup {
        label: format!("{}+{}", style, memory.name),
        style,
        memory,
        budget,
    })
}

fn cmd_compare(a: CompareArgs) -> CliResult<()> {
    if a.configs.len() < 2 {
        return Err(CliError::Usage(format!(
            "compare needs at least 2 --config groups, got {}",
            a.configs.len()
        )));
    }
    let groups = a.configs.iter().map(|c| parse_group(c)).collect::<CliResult<Vec<_>>>()?;
    let mut m = RunManifest::new("compare");
    let params = load_params(a.params.as_deref(), &mut m)?;
    let names: Vec<String> = if a.network.is_empty() {
        bundled_names().into_iter().map(String::from).collect()
    } else {
        a.network.clone()
    };
    let mut nets = Vec::with_capacity(names.len());
    for n in &names {
        let net = load_network(n, &mut m)?;
        nets.push(if a.homogeneous { to_homogeneous(&net) } else { net });
    }
    m.param("networks", names.join(","))
        .param("homogeneous", a.homogeneous)
        .param("mean", "geometric")
        .param("overlap", "double-buffered");
    for (i, g) in groups.iter().enumerate() {
        m.param(
            &format!("config{i}"),
            format!(
                "style={},memory={},bandwidth_bytes_per_sec={},pj_per_bit={},budget_mw={}",
                g.style, g.memory.name, g.memory.bandwidth_bytes_per_sec, g.memory.pj_per_bit, g.budget
            ),
        );
    }
    let accs = groups
        .iter()
        .map(|g| {
            AcceleratorConfig::iso_power(g.style, &params, g.budget)
                .with_context(|| format!("config {}", g.label))
                .map_err(input)
        })
        .collect::<CliResult<Vec<_>>>()?;
    for g in &groups {
        for net in &nets {
            warn_conventional(g.style, net);
        }
    }

    let jobs: Vec<(usize, usize)> = (0..nets.len())
        .flat_map(|n| (0..groups.len()).map(move |g| (n, g)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(n, g)| {
            simulate_network(&nets[n], &accs[g], &groups[g].memory, &params)
                .with_context(|| format!("{} on {}", nets[n].name, groups[g].label))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;

    let mut body = String::from("network,config,style,memory,runtime_s,energy_pj,speedup,energy_reduction\n");
    let mut speedups = vec![Vec::new(); groups.len()];
    let mut reductions = vec![Vec::new(); groups.len()];
    for (n, chunk) in reports.chunks(groups.len()).enumerate() {
        for (g, row) in ComparisonRow::against_first(chunk).iter().enumerate() {
            let _ = writeln!(
                body,
                "{},{},{},{},{:.9e},{:.9e},{:.6},{:.6}",
                nets[n].name,
                g,
                row.style,
                row.memory,
                row.runtime_s,
                row.energy_pj,
                row.speedup,
                row.energy_reduction
            );
            speedups[g].push(row.speedup);
            reductions[g].push(row.energy_reduction);
        }
    }
    for (g, group) in groups.iter().enumerate() {
        let _ = writeln!(
            body,
            "geomean,{},{},{},,,{:.6},{:.6}",
            g,
            group.style,
            group.memory.name,
            geomean(&speedups[g]),
            geomean(&reductions[g])
        );
    }
    emit(&m, &body, &a.out)
}

fn cmd_calibrate(a: CalibrateArgs) -> CliResult<()> {
    let mut m = RunManifest::new("calibrate");
    let anchors = default_anchors();
    for (i, an) in anchors.iter().enumerate() {
        m.param(&format!("anchor{i}"), format!("{an:?}"));
    }
    let cal = calibrate(&anchors).map_err(|e| CliError::Internal(e.into()))?;
    eprintln!("power residuals: {:?}", cal.power_residuals);
    eprintln!("area residuals: {:?}", cal.area_residuals);
    emit(&m, &cal.params.to_toml(), &a.out)
}

fn cmd_networks(a: OutArgs) -> CliResult<()> {
    let mut m = RunManifest::new("networks");
    let mut body = String::from("network,layers,macs,weights,weight_bytes\n");
    for name in bundled_names() {
        let net = load_network(name, &mut m)?;
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            net.name,
            net.layers.len(),
            net.macs(),
            net.weight_count(),
            net.weight_bytes()
        );
    }
    emit(&m, &body, &a)
}
