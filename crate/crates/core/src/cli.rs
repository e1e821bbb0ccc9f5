//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::channel::{Alphabets, Builtin, ChannelError, GmacChannel};
use crate::closed_form::{figure_trace, ClosedFormError, FigureRequest};
use crate::regions::{
    admits_inner_two, degraded_region, fig8_case, inner_region_one, linear_grid, mac_pentagon, mi_bundle_two_message,
    outer_region_one, positive_secrecy_possible, secrecy_capacity_region_one, secrecy_rate_region_two, secrecy_subregions_two,
    two_message_inner_bound, Axis, DistributionGrid, GridConfig, Kernel, RegionError, RegionTrace, TwoMessageDist, TwoMessageMi,
};
use crate::sim::{measure_equivocation, simulate, Codebook, DecoderMode, Encoder, InputDist, SimConfig, SimError, SimStats};
use crate::verify::{random_two_message_dist, verify_thm8};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const INVARIANT: i32 = 2;
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Invariant(_) => exit::INVARIANT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}
validation_from!(ChannelError, ClosedFormError, RegionError, std::io::Error);

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Enumeration { .. } => CliError::Validation(format!("enumeration budget exceeded: {e}")),
            e => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gmacsec", version, about = "Secrecy regions for generalized multiple-access channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Evaluate a rate-equivocation or secrecy region over a distribution grid.
    Region(RegionArgs),
    /// Tabulate figure data.
    Figure(FigureArgs),
    /// Monte Carlo run of the binning scheme.
    Simulate(SimulateArgs),
    /// Compare the explicit and union forms of the two-message equivocation set.
    VerifyThm8(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct ChannelArgs {
    /// Channel JSON document.
    #[arg(long, conflicts_with = "builtin")]
    channel: Option<PathBuf>,
    /// multiplier_bias | degraded_binary | random
    #[arg(long)]
    builtin: Option<String>,
    /// Crossover probability(ies); comma separated where a list is accepted.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
enum Format {
    Csv,
    Doc,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OutputArgs {
    /// Output file (stdout when absent).
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum Theorem {
    Inner1,
    #[value(name = "outer1-eval")]
    Outer1Eval,
    Secrecy1,
    Degraded,
    Inner2,
    Secrecy2,
}

#[derive(Debug, Args, Serialize)]
struct RegionArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// start:stop:step
    #[arg(long, default_value = "0:1:0.05")]
    r0_grid: String,
    /// Lattice step for kernel entries, e.g. 1/16.
    #[arg(long, default_value = "1/16")]
    grid_step: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum FigureId {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

#[derive(Debug, Args, Serialize)]
struct FigureArgs {
    #[arg(long, value_enum)]
    figure: FigureId,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long = "P1")]
    p1: Option<f64>,
    #[arg(long = "P2")]
    p2: Option<f64>,
    #[arg(long = "N")]
    n: Option<f64>,
    /// Eavesdropper noise variance(s); `inf` allowed.
    #[arg(long = "N2", value_delimiter = ',')]
    n2: Vec<f64>,
    #[arg(long)]
    r0_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum DecoderArg {
    Map,
    Typicality,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Use the two-word corner codebook on the multiplier channel.
    #[arg(long)]
    corner: bool,
    /// Input law as JSON `{q, x1_given_q, x2_given_q}`; binary channels default to the superposition law.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    r0: f64,
    #[arg(long)]
    r1_prime: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    r1: f64,
    #[arg(long)]
    r2_prime: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    r2: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = DecoderArg::Map)]
    decoder: DecoderArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Membership grid points per axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// A table cell.
#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{}", v + 0.0),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v + 0.0),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Result of one command, ready for serialization.
struct Output {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    /// Grid resolutions, recorded in the footer.
    resolution: String,
    /// Extra structured fields for the document format.
    extra: Value,
    summary: Vec<String>,
    warnings: Vec<String>,
}

fn config_hash(cmd: &Command) -> String {
    let text = serde_json::to_string(cmd).expect("command arguments serialize");
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn render(out: &Output, format: Format, cmd: &Command) -> String {
    let hash = config_hash(cmd);
    match format {
        Format::Csv => {
            let mut s = out.columns.join(",");
            s.push('\n');
            for row in &out.rows {
                s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            let _ = writeln!(s, "# config_hash={hash} resolution={} version={VERSION}", out.resolution);
            s
        }
        Format::Doc => {
            let rows: Vec<Value> = out.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            let doc = json!({
                "config": cmd,
                "config_hash": hash,
                "resolution": out.resolution,
                "version": VERSION,
                "columns": out.columns,
                "rows": rows,
                "details": out.extra,
                "warnings": out.warnings,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
            s.push('\n');
            s
        }
    }
}

fn parse_r0_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Validation(format!("--r0-grid expects start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(start >= 0.0 && stop >= start && step > 0.0 && stop.is_finite()) {
        return Err(bad());
    }
    Ok(linear_grid(start, stop, step))
}

fn parse_grid_step(spec: &str) -> Result<usize, CliError> {
    let bad = || CliError::Validation(format!("--grid-step expects 1/k or a decimal step, got {spec:?}"));
    let step = match spec.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
        None => spec.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if !(step > 0.0 && step <= 1.0) {
        return Err(bad());
    }
    let k = (1.0 / step).round();
    if (k * step - 1.0).abs() > 1e-9 {
        return Err(CliError::Validation(format!("--grid-step {spec} is not of the form 1/k")));
    }
    Ok(k as usize)
}

fn load_channel(args: &ChannelArgs, seed: u64) -> Result<GmacChannel, CliError> {
    match (&args.channel, &args.builtin) {
        (Some(path), None) => Ok(GmacChannel::load(path)?),
        (None, Some(name)) => {
            let single_p = || match args.p.as_slice() {
                [p] => Ok(*p),
                _ => Err(CliError::Validation(format!("builtin {name} needs exactly one --p"))),
            };
            match name.as_str() {
                "multiplier_bias" => Ok(GmacChannel::builtin(Builtin::MultiplierBias)?),
                "degraded_binary" => Ok(GmacChannel::builtin(Builtin::DegradedBinary { p: single_p()? })?),
                "random" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let a = Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 };
                    Ok(GmacChannel::random(a, &mut rng))
                }
                other => Err(ChannelError::UnknownBuiltin(other.to_string()).into()),
            }
        }
        _ => Err(CliError::Validation("exactly one of --channel or --builtin is required".into())),
    }
}

fn trace_rows(trace: &RegionTrace) -> Vec<Vec<Cell>> {
    trace
        .points
        .iter()
        .map(|t| {
            let p = t.point;
            vec![
                Cell::Num(p.r0),
                Cell::Num(p.r1),
                Cell::Num(p.r2),
                Cell::Num(p.r1e),
                Cell::Num(p.r2e),
                Cell::Int(t.grid_point as u64),
            ]
        })
        .collect()
}

const TRACE_COLUMNS: [&str; 6] = ["r0", "r1", "r2", "r1e", "r2e", "grid_point"];

fn cmd_region(args: &RegionArgs) -> Result<Output, CliError> {
    let ch = load_channel(&args.channel, args.seed)?;
    let r0s = parse_r0_grid(&args.r0_grid)?;
    let k = parse_grid_step(&args.grid_step)?;
    let cfg = GridConfig { lattice_k: k, seed: args.seed, ..GridConfig::default() };
    let mut summary = Vec::new();
    let trace = match args.theorem {
        Theorem::Inner1 => inner_region_one(&ch, &DistributionGrid::Lattice(cfg.clone()), &r0s)?,
        Theorem::Outer1Eval => outer_region_one(&ch, &DistributionGrid::Lattice(cfg.clone()), &r0s)?,
        Theorem::Secrecy1 => secrecy_capacity_region_one(&ch, &DistributionGrid::Lattice(cfg.clone()))?,
        Theorem::Degraded => degraded_region(&ch, &DistributionGrid::Lattice(cfg.clone()), &r0s)?,
        Theorem::Inner2 => {
            let a = ch.alphabets();
            let d = TwoMessageDist::direct(Kernel::pmf(vec![1.0])?, Kernel::uniform(1, a.x1), Kernel::uniform(1, a.x2))?;
            let mi = mi_bundle_two_message(&ch, &d)?;
            // Ten steps per private-rate axis.
            let mut triples = Vec::new();
            for &r0 in &r0s {
                for r1 in linear_grid(0.0, mi.u_y, mi.u_y / 10.0) {
                    for r2 in linear_grid(0.0, mi.v_y, mi.v_y / 10.0) {
                        triples.push((r0, r1, r2));
                    }
                }
            }
            let trace = two_message_inner_bound(&ch, &d, &triples)?;
            if let Some(bad) = trace.points.iter().find(|t| !admits_inner_two(&mi, &t.point, 1e-9)) {
                return Err(CliError::Invariant(format!("emitted point {:?} fails the inner-bound inequalities", bad.point)));
            }
            summary.push(format!("self-check: all {} points satisfy the inner-bound inequalities", trace.points.len()));
            trace
        }
        Theorem::Secrecy2 => secrecy_rate_region_two(&ch, &DistributionGrid::Lattice(cfg.clone()), &r0s)?,
    };
    if trace.points.is_empty() {
        summary.push("region is empty on this grid".into());
    } else {
        let best1 = trace.maximize(Axis::R1e, &[])?.unwrap_or(0.0);
        summary.push(format!("max secrecy rate user 1: {}", best1 + 0.0));
        if matches!(args.theorem, Theorem::Inner2 | Theorem::Secrecy2) {
            let best2 = trace.maximize(Axis::R2e, &[])?.unwrap_or(0.0);
            summary.push(format!("max secrecy rate user 2: {}", best2 + 0.0));
        }
    }
    let mut extra = json!({ "grid": trace.grid, "provenance": trace.provenance.to_string() });
    if matches!(args.theorem, Theorem::Secrecy2 | Theorem::Inner2) {
        let flags = positive_secrecy_possible(&ch, &DistributionGrid::Lattice(cfg.clone()))?;
        summary.push(format!("positive secrecy possible: user1={} user2={}", flags.user1, flags.user2));
        extra["positive_secrecy"] = json!(flags);
    }
    let g = &trace.grid;
    Ok(Output {
        columns: TRACE_COLUMNS.to_vec(),
        rows: trace_rows(&trace),
        resolution: format!(
            "lattice_k={}/{} grid_points={} refined={} r0_points={}",
            g.lattice_k_used,
            g.lattice_k_requested,
            g.grid_points,
            g.refined_points,
            r0s.len()
        ),
        extra,
        summary,
        warnings: trace.warnings.clone(),
    })
}

fn cmd_figure(args: &FigureArgs) -> Result<Output, CliError> {
    if args.figure == FigureId::Fig8 {
        return cmd_fig8(args);
    }
    let default_grid = match args.figure {
        FigureId::Fig7 => "0:3:0.01",
        _ => "0:1:0.001",
    };
    let r0s = parse_r0_grid(args.r0_grid.as_deref().unwrap_or(default_grid))?;
    let req = match args.figure {
        FigureId::Fig5 if args.channel.p.is_empty() => FigureRequest::fig5_default(),
        FigureId::Fig5 => FigureRequest::Fig5 { ps: args.channel.p.clone() },
        FigureId::Fig6 => match args.channel.p.as_slice() {
            [] => FigureRequest::fig6_default(),
            [p] => FigureRequest::Fig6 { p: *p },
            _ => return Err(CliError::Validation("fig6 takes a single --p".into())),
        },
        _ => {
            let FigureRequest::Fig7 { p1, p2, n, n2s } = FigureRequest::fig7_default() else { unreachable!() };
            FigureRequest::Fig7 {
                p1: args.p1.unwrap_or(p1),
                p2: args.p2.unwrap_or(p2),
                n: args.n.unwrap_or(n),
                n2s: if args.n2.is_empty() { n2s } else { args.n2.clone() },
            }
        }
    };
    let table = figure_trace(&req, &r0s)?;
    let rows = table
        .series
        .iter()
        .flat_map(|s| {
            table
                .r0
                .iter()
                .zip(&s.values)
                .map(|(&r0, &v)| vec![Cell::Text(s.label.clone()), Cell::Num(r0), Cell::Num(v)])
        })
        .collect();
    Ok(Output {
        columns: vec!["series", "r0", "value"],
        rows,
        resolution: format!("r0_points={}", r0s.len()),
        extra: json!({ "figure": table.figure }),
        summary: vec![format!("{} series over {} common rates", table.series.len(), r0s.len())],
        warnings: table.warnings,
    })
}

/// Four case-labelled datasets: the first seeded random distribution found in
/// each case, with its secrecy sub-regions and MAC pentagon per common rate.
/// Without a channel argument every draw also samples a random binary channel.
fn cmd_fig8(args: &FigureArgs) -> Result<Output, CliError> {
    let fixed = match (&args.channel.channel, &args.channel.builtin) {
        (None, None) => None,
        _ => Some(load_channel(&args.channel, args.seed)?),
    };
    let r0s = parse_r0_grid(args.r0_grid.as_deref().unwrap_or("0:1:0.1"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut found: [Option<(usize, TwoMessageMi)>; 4] = [None; 4];
    const ATTEMPTS: usize = 5000;
    for attempt in 0..ATTEMPTS {
        let ch = match &fixed {
            Some(ch) => ch.clone(),
            None => GmacChannel::random(Alphabets { x1: 2, x2: 2, y: 2, y1: 2, y2: 2 }, &mut rng),
        };
        let d = random_two_message_dist(&ch, 1 + attempt % 2, 2, 2, &mut rng)?;
        let mi = mi_bundle_two_message(&ch, &d)?;
        let slot = &mut found[fig8_case(&mi).number() as usize - 1];
        if slot.is_none() {
            *slot = Some((attempt, mi));
        }
        if found.iter().all(Option::is_some) {
            break;
        }
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (c, slot) in found.iter().enumerate() {
        let label = format!("case{}", c + 1);
        let Some((_, mi)) = slot else {
            warnings.push(format!("no distribution in {label} among {ATTEMPTS} draws"));
            continue;
        };
        for &r0 in &r0s {
            let sub = secrecy_subregions_two(mi, r0);
            let parts = [
                ("joint", sub.joint.clone()),
                ("user1_only", sub.user1_only.into_iter().collect()),
                ("user2_only", sub.user2_only.into_iter().collect()),
                ("mac", mac_pentagon(mi, r0)),
            ];
            for (part, pts) in parts {
                for p in pts {
                    rows.push(vec![Cell::Text(label.clone()), Cell::Text(part.into()), Cell::Num(r0), Cell::Num(p.r1), Cell::Num(p.r2)]);
                }
            }
        }
    }
    let cases: Vec<Value> = found
        .iter()
        .enumerate()
        .map(|(c, s)| json!({ "case": c + 1, "draw": s.map(|(i, _)| i), "bundle": s.map(|(_, m)| m) }))
        .collect();
    let labels: Vec<String> = found.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(c, _)| (c + 1).to_string()).collect();
    Ok(Output {
        columns: vec!["case", "subregion", "r0", "r1", "r2"],
        rows,
        resolution: format!("r0_points={} draws<={ATTEMPTS}", r0s.len()),
        extra: json!({ "figure": "fig8", "cases": cases }),
        summary: vec![format!("cases found: {}", labels.join(" "))],
        warnings,
    })
}

fn load_input(args: &SimulateArgs) -> Result<InputDist, CliError> {
    match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let raw: InputDist = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("input law: {e}")))?;
            let k = |k: &Kernel| Kernel::new(k.rows, k.cols, k.data.clone());
            Ok(InputDist::new(k(&raw.q)?, k(&raw.x1_given_q)?, k(&raw.x2_given_q)?)?)
        }
        None => Ok(InputDist::binary_superposition(args.alpha)?),
    }
}

fn stats_rows(s: &SimStats) -> Vec<Vec<Cell>> {
    let mut rows = vec![
        ("seed", Cell::Int(s.seed)),
        ("n", Cell::Int(s.n as u64)),
        ("trials", Cell::Int(s.trials as u64)),
        ("codebook_i", Cell::Int(s.sizes.i as u64)),
        ("codebook_a", Cell::Int(s.sizes.a as u64)),
        ("codebook_b", Cell::Int(s.sizes.b as u64)),
        ("codebook_s", Cell::Int(s.sizes.s as u64)),
        ("codebook_t", Cell::Int(s.sizes.t as u64)),
        ("r0", Cell::Num(s.realized_rates[0])),
        ("r1_prime", Cell::Num(s.realized_rates[1])),
        ("r2_prime", Cell::Num(s.realized_rates[2])),
        ("r1", Cell::Num(s.message_rates[0])),
        ("r2", Cell::Num(s.message_rates[1])),
        ("regime1", Cell::Text(format!("{:?}", s.regime1))),
        ("regime2", Cell::Text(format!("{:?}", s.regime2))),
        ("lambda", Cell::Num(s.lambda.mean)),
        ("lambda_half_width", Cell::Num(s.lambda.half_width)),
    ];
    for (name, est) in [("lambda1", s.lambda1), ("lambda2", s.lambda2)] {
        if let Some(e) = est {
            rows.push((name, Cell::Num(e.mean)));
        }
    }
    rows.extend([
        ("equivocation1", Cell::Num(s.equivocation1.mean)),
        ("equivocation1_half_width", Cell::Num(s.equivocation1.half_width)),
        ("equivocation2", Cell::Num(s.equivocation2.mean)),
        ("equivocation2_half_width", Cell::Num(s.equivocation2.half_width)),
        ("equivocation1_target", Cell::Num(s.equivocation1_target)),
        ("max_posterior_deviation1", Cell::Num(s.max_posterior_deviation1)),
    ]);
    rows.into_iter().map(|(k, v)| vec![Cell::Text(k.into()), v]).collect()
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let mode = match args.decoder {
        DecoderArg::Map => DecoderMode::Map,
        DecoderArg::Typicality => DecoderMode::Typicality { eps: args.eps.unwrap_or_else(|| crate::sim::default_eps(args.n)) },
    };
    let stats = if args.corner {
        let ch = match (&args.channel.channel, &args.channel.builtin) {
            (None, None) => GmacChannel::builtin(Builtin::MultiplierBias)?,
            _ => load_channel(&args.channel, args.seed)?,
        };
        let cb = Codebook::multiplier_corner(&ch)?;
        let enc = Encoder::new(&cb, 1.0, 0.0)?;
        measure_equivocation(&cb, &enc, &ch, args.trials, args.seed, mode)?
    } else {
        let ch = load_channel(&args.channel, args.seed)?;
        let input = load_input(args)?;
        let cfg = SimConfig {
            n: args.n,
            r0: args.r0,
            r1_prime: args.r1_prime.unwrap_or(args.r1),
            r1: args.r1,
            r2_prime: args.r2_prime.unwrap_or(args.r2),
            r2: args.r2,
            eps: args.eps,
            seed: args.seed,
            trials: args.trials,
            decoder: mode,
        };
        simulate(&ch, &input, &cfg)?
    };
    stats.check_invariants().map_err(CliError::Invariant)?;
    Ok(Output {
        columns: vec!["metric", "value"],
        rows: stats_rows(&stats),
        resolution: format!("n={} trials={}", stats.n, stats.trials),
        extra: json!({ "stats": stats }),
        summary: vec![format!(
            "lambda = {:.6}, equivocation1 = {:.6} bits/symbol",
            stats.lambda.mean, stats.equivocation1.mean
        )],
        warnings: vec![],
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<Output, CliError> {
    let report = verify_thm8(args.instances, args.grid, args.seed)?;
    let rows = report
        .counterexamples
        .iter()
        .map(|c| {
            vec![
                Cell::Int(c.instance as u64),
                Cell::Num(c.rates.0),
                Cell::Num(c.rates.1),
                Cell::Num(c.rates.2),
                Cell::Num(c.r1e),
                Cell::Num(c.r2e),
                Cell::Text(c.explicit.to_string()),
                Cell::Text(c.union_form.to_string()),
            ]
        })
        .collect();
    let summary = vec![format!(
        "{} instances, {} cells, {} disagreements",
        report.instances, report.cells_checked, report.disagreements
    )];
    if report.disagreements > 0 {
        return Err(CliError::Invariant(format!(
            "{} disagreements; first: {}",
            report.disagreements,
            serde_json::to_string(&report.counterexamples[0]).unwrap_or_default()
        )));
    }
    Ok(Output {
        columns: vec!["instance", "r0", "r1", "r2", "r1e", "r2e", "explicit", "union_form"],
        rows,
        resolution: format!("membership_grid={}x{}", report.grid, report.grid),
        extra: json!({ "report": report }),
        summary,
        warnings: vec![],
    })
}

fn execute(cmd: &Command) -> Result<(Output, &OutputArgs), CliError> {
    Ok(match cmd {
        Command::Region(a) => (cmd_region(a)?, &a.output),
        Command::Figure(a) => (cmd_figure(a)?, &a.output),
        Command::Simulate(a) => (cmd_simulate(a)?, &a.output),
        Command::VerifyThm8(a) => (cmd_verify(a)?, &a.output),
    })
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
        }
    };
    match execute(&cli.command) {
        Ok((out, dest)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for s in &out.summary {
                eprintln!("{s}");
            }
            let text = render(&out, dest.format, &cli.command);
            let written = match &dest.out {
                Some(path) => std::fs::write(path, text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            match written {
                Ok(()) => exit::SUCCESS,
                Err(e) => {
                    eprintln!("error: writing output: {e}");
                    exit::VALIDATION
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.code()
        }
    }
}
