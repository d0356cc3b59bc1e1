//! `mevhas`: encode, run bitrate ladders, and compute Bjøntegaard and
//! complexity metrics.
//!
//! Exit status is 0 on success, 1 when processing fails and 2 on usage errors.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mevhas_core::codec::{encode_sequence, EncoderConfig};
use mevhas_core::ladder::{
    compare_reports, plan_ladder, run_ladder, LadderMode, LadderReport, MapReuse,
};
use mevhas_core::media::{read_y4m, write_y4m, Chroma, VideoSequence};
use mevhas_core::metrics::{
    bd_rate, bd_time, complexity_features, format_bd_summary, read_curve_csv, read_rate_time_csv,
    sequence_psnr, MetricsError,
};
use mevhas_core::partition::{extract_map, interpolate_2x, map_file_name, PartitionMap};
use mevhas_core::policy::{GatingPolicy, MapPolicy};

#[derive(Parser)]
#[command(name = "mevhas", version, about = "Multi-resolution encoding testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one representation, optionally gated by a partition map.
    Encode(EncodeArgs),
    /// Encode a bitrate ladder in baseline and/or map-gated mode.
    Ladder(LadderArgs),
    /// Bjøntegaard delta between two curves.
    Bd(BdArgs),
    /// Spatial energy E and temporal change h of a clip.
    Complexity(ComplexityArgs),
    /// Partition map utilities.
    #[command(subcommand)]
    Map(MapCommand),
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=51))]
    qp: u8,
    /// MEVHASMAP file sized to the padded input; enables gating.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    out_stats: Option<PathBuf>,
    /// Final CUs as JSON lines.
    #[arg(long)]
    out_record: Option<PathBuf>,
    /// Reconstruction as 4:2:0 Y4M with gray chroma.
    #[arg(long)]
    out_recon: Option<PathBuf>,
    /// Writes `<stem>.f<i>.mevhasmap` per frame.
    #[arg(long)]
    out_map: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Both,
    Baseline,
    Mevhas,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapReuseArg {
    FirstFrame,
    PerFrame,
}

#[derive(Args)]
struct LadderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "27,32,37,42",
          value_parser = clap::value_parser!(u8).range(0..=51))]
    qps: Vec<u8>,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    /// Concurrent dependent encodes.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[arg(long, value_enum, default_value = "first-frame")]
    map_reuse: MapReuseArg,
    /// `QP=FILE`: gate the dependent at QP with this map instead of its reference's.
    #[arg(long = "map-override", value_parser = parse_override)]
    map_overrides: Vec<(u8, PathBuf)>,
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

fn parse_override(s: &str) -> Result<(u8, PathBuf), String> {
    let (qp, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected QP=FILE, got {s:?}"))?;
    let qp: u8 = qp.parse().map_err(|_| format!("bad QP {qp:?}"))?;
    if qp > 51 {
        return Err(format!("QP {qp} out of range 0..=51"));
    }
    Ok((qp, PathBuf::from(path)))
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BdKind {
    Rate,
    Time,
    /// Three-column `rate,seconds,psnr` files; prints the BDT/BDBR summary.
    Both,
}

#[derive(Args)]
struct BdArgs {
    #[arg(long)]
    anchor: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value = "rate")]
    kind: BdKind,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Subcommand)]
enum MapCommand {
    /// Double a reference map and fit it to a frame of the given size.
    Interpolate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Canonical record of a ladder run, written as `experiment.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ExperimentConfig {
    input: PathBuf,
    qps: Vec<u8>,
    mode: String,
    out: PathBuf,
    deterministic: bool,
    map_reuse: String,
    map_overrides: BTreeMap<u8, PathBuf>,
}

enum Failure {
    Usage(String),
    Processing(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Processing(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Ladder(a) => cmd_ladder(a),
        Command::Bd(a) => cmd_bd(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::Map(m) => cmd_map(m),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Processing(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_y4m(path: &Path) -> anyhow::Result<VideoSequence> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_y4m(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct EncodeSummary {
    input: String,
    width: usize,
    height: usize,
    frames: usize,
    qp: u8,
    gated: bool,
    mode_evals: u64,
    nodes: u64,
    bits: u64,
    sse: u64,
    psnr_db: Option<f64>,
    fallbacks: u64,
    wall_time: f64,
}

fn cmd_encode(a: EncodeArgs) -> CmdResult {
    let seq = load_y4m(&a.input)?;
    let policy = match &a.map {
        Some(p) => {
            let map = PartitionMap::read_from(p)
                .with_context(|| format!("reading map {}", p.display()))?;
            Some(MapPolicy::new(Arc::new(map)))
        }
        None => None,
    };
    let config = EncoderConfig::new(a.qp);
    let enc = encode_sequence(&seq, &config, |_| {
        policy.as_ref().map(|p| p as &dyn GatingPolicy)
    })
    .map_err(|e| anyhow!(e))?;
    let psnr = sequence_psnr(&seq, &enc.recon).map_err(|e| anyhow!(e))?;
    let summary = EncodeSummary {
        input: a.input.display().to_string(),
        width: seq.width(),
        height: seq.height(),
        frames: seq.len(),
        qp: a.qp,
        gated: policy.is_some(),
        mode_evals: enc.stats.mode_evaluations,
        nodes: enc.stats.nodes_visited,
        bits: enc.stats.total_bits,
        sse: enc.stats.sse,
        psnr_db: (!psnr.is_lossless()).then(|| psnr.value()),
        fallbacks: enc.stats.fallbacks,
        wall_time: enc.stats.wall_time,
    };
    let json = serde_json::to_string_pretty(&summary).expect("plain data") + "\n";
    match &a.out_stats {
        Some(p) => write_file(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(p) = &a.out_record {
        let lines: String = enc
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| f.record.to_json_lines(i))
            .collect();
        write_file(p, &lines)?;
    }
    if let Some(p) = &a.out_recon {
        let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_y4m(&enc.recon, Chroma::C420, BufWriter::new(file)).map_err(|e| anyhow!(e))?;
    }
    if let Some(stem) = &a.out_map {
        for (i, f) in enc.frames.iter().enumerate() {
            let map = extract_map(&f.record, f.padded_width, f.padded_height, a.qp)
                .map_err(|e| anyhow!(e))?;
            let path = PathBuf::from(map_file_name(&stem.display().to_string(), i));
            map.write_to(&path).map_err(|e| anyhow!(e))?;
        }
    }
    Ok(())
}

fn run_mode(
    source: &Arc<VideoSequence>,
    qps: &[u8],
    mode: LadderMode,
    reuse: MapReuse,
    overrides: &BTreeMap<u8, Arc<PartitionMap>>,
    jobs: usize,
) -> anyhow::Result<LadderReport> {
    let mut plan = plan_ladder(source.clone(), qps, mode)?;
    plan.map_reuse = reuse;
    if mode == LadderMode::Mevhas {
        plan.map_overrides = overrides.clone();
    }
    Ok(run_ladder(&plan, jobs)?)
}

fn cmd_ladder(a: LadderArgs) -> CmdResult {
    let mut overrides = BTreeMap::new();
    for (qp, path) in &a.map_overrides {
        if !a.qps.contains(qp) {
            return Err(Failure::Usage(format!(
                "--map-override names QP {qp}, which is not in --qps"
            )));
        }
        let map = PartitionMap::read_from(path)
            .with_context(|| format!("reading map {}", path.display()))?;
        overrides.insert(*qp, Arc::new(map));
    }
    let config = ExperimentConfig {
        input: a.input.clone(),
        qps: a.qps.clone(),
        mode: value_name(a.mode),
        out: a.out.clone(),
        deterministic: true,
        map_reuse: value_name(a.map_reuse),
        map_overrides: a.map_overrides.iter().cloned().collect(),
    };
    let reuse = match a.map_reuse {
        MapReuseArg::FirstFrame => MapReuse::FirstFrame,
        MapReuseArg::PerFrame => MapReuse::PerFrame,
    };
    let source = Arc::new(load_y4m(&a.input)?);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_file(
        &a.out.join("experiment.json"),
        &(serde_json::to_string_pretty(&config).expect("plain data") + "\n"),
    )?;

    let modes: &[LadderMode] = match a.mode {
        ModeArg::Both => &[LadderMode::Baseline, LadderMode::Mevhas],
        ModeArg::Baseline => &[LadderMode::Baseline],
        ModeArg::Mevhas => &[LadderMode::Mevhas],
    };
    let jobs = a.jobs as usize;
    let mut reports = Vec::new();
    for &mode in modes {
        let report = run_mode(&source, &a.qps, mode, reuse, &overrides, jobs)?;
        write_file(&a.out.join(format!("{mode}.csv")), &report.to_csv())?;
        write_file(
            &a.out.join(format!("{mode}.json")),
            &(report.to_json() + "\n"),
        )?;
        for (id, maps) in &report.maps {
            for (i, m) in maps.iter().enumerate() {
                let path = a.out.join("maps").join(map_file_name(id, i));
                write_file(&path, &mevhas_core::partition::serialize_map(m))?;
            }
        }
        println!(
            "{mode}: {} representations, dependent mode evaluations {}, total {:.3} s",
            report.rows.len(),
            report.totals.dependent_mode_evaluations,
            report.totals.wall_s
        );
        reports.push(report);
    }
    if let [baseline, mevhas] = &reports[..] {
        let cmp = compare_reports(baseline, mevhas).map_err(|e| anyhow!(e))?;
        write_file(&a.out.join("comparison.csv"), &cmp.to_csv())?;
        write_file(&a.out.join("comparison.json"), &(cmp.to_json() + "\n"))?;
        println!("{}", cmp.bd.summary);
    }
    Ok(())
}

fn csv_failure(path: &Path, e: MetricsError) -> Failure {
    match e {
        MetricsError::Csv(msg) => Failure::Usage(format!("{}: {msg}", path.display())),
        other => Failure::Processing(anyhow!("{}: {other}", path.display())),
    }
}

fn open_csv(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Processing(anyhow!("opening {}: {e}", path.display())))
}

fn cmd_bd(a: BdArgs) -> CmdResult {
    let bd = |e: MetricsError| Failure::Processing(anyhow!(e));
    match a.kind {
        BdKind::Rate | BdKind::Time => {
            let anchor =
                read_curve_csv(open_csv(&a.anchor)?).map_err(|e| csv_failure(&a.anchor, e))?;
            let test = read_curve_csv(open_csv(&a.test)?).map_err(|e| csv_failure(&a.test, e))?;
            let (name, value) = if a.kind == BdKind::Rate {
                ("bd_rate", bd_rate(&anchor, &test).map_err(bd)?)
            } else {
                ("bd_time", bd_time(&anchor, &test).map_err(bd)?)
            };
            println!("{}", mevhas_core::metrics::fixed2(value));
            println!("{}", serde_json::json!({ name: value }));
        }
        BdKind::Both => {
            let (ar, at) =
                read_rate_time_csv(open_csv(&a.anchor)?).map_err(|e| csv_failure(&a.anchor, e))?;
            let (tr, tt) =
                read_rate_time_csv(open_csv(&a.test)?).map_err(|e| csv_failure(&a.test, e))?;
            let bdbr = bd_rate(&ar, &tr).map_err(bd)?;
            let bdt = bd_time(&at, &tt).map_err(bd)?;
            println!("{}", format_bd_summary(bdt, bdbr));
            let ratio = mevhas_core::metrics::efficiency_ratio(bdbr, bdt).ok();
            println!(
                "{}",
                serde_json::json!({ "bd_rate": bdbr, "bd_time": bdt, "efficiency_ratio": ratio })
            );
        }
    }
    Ok(())
}

fn cmd_complexity(a: ComplexityArgs) -> CmdResult {
    let seq = load_y4m(&a.input)?;
    let f = complexity_features(&seq);
    println!("E {:.4}", f.e);
    println!("h {:.4}", f.h);
    println!("{}", serde_json::to_string(&f).expect("plain data"));
    Ok(())
}

fn cmd_map(m: MapCommand) -> CmdResult {
    match m {
        MapCommand::Interpolate {
            input,
            width,
            height,
            out,
        } => {
            let low = PartitionMap::read_from(&input).map_err(|e| anyhow!(e))?;
            let (pw, ph) = EncoderConfig::new(0).padded_dims(width, height);
            let high = interpolate_2x(&low)
                .fit_to(pw, ph)
                .map_err(|e| anyhow!(e))?;
            high.write_to(&out).map_err(|e| anyhow!(e))?;
            let mut stdout = std::io::stdout();
            writeln!(
                stdout,
                "{}x{} -> {}x{}",
                low.frame_width(),
                low.frame_height(),
                pw,
                ph
            )
            .map_err(|e| anyhow!(e))?;
        }
    }
    Ok(())
}
