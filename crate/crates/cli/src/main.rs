//! `s2i` — batch pipelines for skeleton-to-image encoding.
//!
//! Exit codes: 0 on success, 1 when a batch partially failed or an
//! inspected file violates its invariants, 2 on usage or configuration
//! errors.

mod inspect;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use s2i_core::encoder::decode;
use s2i_core::format::{load_format, FormatRegistry};
use s2i_core::image_io::{import_f32raw, import_png8, ExportMode, Sidecar};
use s2i_core::ingest::serialize_generic_json;
use s2i_core::masking::{generate_mask, mask_to_json, MaskStrategy, PatchGrid};
use s2i_core::objectives::build_schedule;
use s2i_core::stats::{stats_from_json, stats_to_json, DatasetManifest};
use s2i_core::streams::Stream;

use pipeline::{accumulate_stats, run_batch, BatchItem, PipelineOptions};

#[derive(Parser)]
#[command(name = "s2i", version, about = "Skeleton-to-image encoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode skeleton files into image representations
    Encode(EncodeArgs),
    /// Generate a patch mask file
    Mask(MaskArgs),
    /// Accumulate channel statistics over a manifest
    Stats(StatsArgs),
    /// Reconstruct a skeleton sequence from an exported image
    Decode(DecodeArgs),
    /// Print and validate file headers and metadata
    Inspect(InspectArgs),
    /// Export the diffusion variance schedule
    Schedule(ScheduleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    F32raw,
    Png8,
}

impl From<ModeArg> for ExportMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::F32raw => ExportMode::F32Raw,
            ModeArg::Png8 => ExportMode::Png8,
        }
    }
}

fn parse_size(text: &str) -> Result<(usize, usize), String> {
    let parse_one = |s: &str| s.parse::<usize>().map_err(|e| format!("bad size '{s}': {e}"));
    let (h, w) = match text.split_once(['x', 'X']) {
        Some((h, w)) => (parse_one(h)?, parse_one(w)?),
        None => {
            let side = parse_one(text)?;
            (side, side)
        }
    };
    if h == 0 || w == 0 {
        return Err("size must be at least 1x1".to_string());
    }
    Ok((h, w))
}

fn parse_grid(text: &str) -> Result<(usize, usize), String> {
    parse_size(text)
}

fn parse_ratio(text: &str) -> Result<f64, String> {
    let ratio: f64 = text.parse().map_err(|e| format!("bad ratio '{text}': {e}"))?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(format!("ratio {ratio} outside [0, 1]"));
    }
    Ok(ratio)
}

#[derive(Args)]
struct EncodeArgs {
    /// Input files: .skeleton (NTU layout) or .json (generic interchange)
    inputs: Vec<PathBuf>,
    /// Encode the entries of a manifest instead of positional inputs
    #[arg(long, conflicts_with = "inputs")]
    manifest: Option<PathBuf>,
    /// Skeleton format: builtin id (ntu25|ucla20|toyota13) or a format file
    #[arg(long)]
    format: Option<String>,
    /// Skeleton modality to encode
    #[arg(long, default_value = "joint")]
    stream: Stream,
    /// Target image size, SIDE or HxW
    #[arg(long, default_value = "224x224", value_parser = parse_size)]
    size: (usize, usize),
    /// Normalize with a stats file before export
    #[arg(long)]
    normalize: Option<PathBuf>,
    /// Export mode
    #[arg(long, value_enum, default_value_t = ModeArg::F32raw)]
    mode: ModeArg,
    /// Output directory
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Stop scheduling new files after the first failure
    #[arg(long)]
    fail_fast: bool,
    /// Keep frames whose coordinates are all exactly zero
    #[arg(long)]
    keep_zero_frames: bool,
    /// Skip the first-frame reference translation
    #[arg(long)]
    no_translate: bool,
}

#[derive(Args)]
struct MaskArgs {
    /// Sampling strategy
    #[arg(long)]
    strategy: MaskStrategy,
    /// Fraction of patches to mask
    #[arg(long, default_value = "0.75", value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Patch grid, SIDE or HxW
    #[arg(long, default_value = "14x14", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    /// Output file (stdout when omitted)
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Manifest of inputs to accumulate over
    #[arg(long)]
    manifest: PathBuf,
    /// Output stats file
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Format file(s) to register beyond the builtins
    #[arg(long)]
    format: Vec<String>,
    /// Target image size, SIDE or HxW
    #[arg(long, default_value = "224x224", value_parser = parse_size)]
    size: (usize, usize),
    /// Stream for entries that do not declare one
    #[arg(long, default_value = "joint")]
    stream: Stream,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    keep_zero_frames: bool,
    #[arg(long)]
    no_translate: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Exported image payload (.s2i or .png)
    input: PathBuf,
    /// Sidecar path (default: payload path + .json)
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Frames to reconstruct (default: the sidecar's original count)
    #[arg(long)]
    frames: Option<usize>,
    /// Joints to reconstruct (default: the sidecar's original count)
    #[arg(long)]
    joints: Option<usize>,
    /// Output file (stdout when omitted)
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Number of diffusion steps
    #[arg(long = "t", default_value_t = 1000)]
    t_diff: usize,
    /// Noise-level exponent applied to each beta
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Output file (stdout when omitted)
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Encode(args) => cmd_encode(args),
        Command::Mask(args) => cmd_mask(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Schedule(args) => cmd_schedule(args),
    }
}

fn configure_jobs(jobs: usize) -> Result<()> {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

/// Resolve a format spec (builtin id, registered id, or file path) to a
/// registered id.
fn resolve_format(registry: &mut FormatRegistry, spec: &str) -> Result<String> {
    if registry.get(spec).is_ok() {
        return Ok(spec.to_string());
    }
    let path = Path::new(spec);
    if path.exists() {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let format = load_format(&text).with_context(|| format!("loading {}", path.display()))?;
        let id = format.format_id().to_string();
        registry.register(format);
        return Ok(id);
    }
    bail!("unknown format '{spec}': not a builtin and not a readable file");
}

fn unique_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".to_string())
}

fn cmd_encode(args: EncodeArgs) -> Result<ExitCode> {
    configure_jobs(args.jobs)?;
    let mut registry = FormatRegistry::new();

    let stats = match &args.normalize {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(stats_from_json(&text)?)
        }
        None => None,
    };
    let opts = PipelineOptions {
        stream: args.stream,
        size: args.size,
        keep_zero_frames: args.keep_zero_frames,
        translate: !args.no_translate,
        mode: args.mode.into(),
        stats,
    };

    // Resolve every format before borrowing them for the batch.
    struct PendingItem {
        path: PathBuf,
        format_id: String,
        stem: String,
        stream: Option<Stream>,
    }
    let mut pending = Vec::new();

    if let Some(manifest_path) = &args.manifest {
        let text = fs::read_to_string(manifest_path)
            .with_context(|| format!("reading {}", manifest_path.display()))?;
        let manifest = DatasetManifest::from_jsonl(&text)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        if let Some(spec) = &args.format {
            resolve_format(&mut registry, spec)?;
        }
        for entry in &manifest.entries {
            let format_id = resolve_format(&mut registry, &entry.format_id)?;
            let stream = entry
                .stream
                .as_deref()
                .map(|s| s.parse::<Stream>().map_err(anyhow::Error::msg))
                .transpose()?;
            pending.push(PendingItem {
                path: base.join(&entry.path),
                format_id,
                stem: entry.sample_id.clone(),
                stream,
            });
        }
    } else {
        if args.inputs.is_empty() {
            bail!("no inputs: pass files or --manifest");
        }
        let spec = args
            .format
            .as_deref()
            .ok_or_else(|| anyhow::anyhow!("--format is required with positional inputs"))?;
        let format_id = resolve_format(&mut registry, spec)?;
        for path in &args.inputs {
            pending.push(PendingItem {
                path: path.clone(),
                format_id: format_id.clone(),
                stem: unique_stem(path),
                stream: None,
            });
        }
    }

    let items: Vec<BatchItem<'_>> = pending
        .iter()
        .map(|p| {
            Ok(BatchItem {
                path: p.path.clone(),
                format: registry.get(&p.format_id)?,
                stem: p.stem.clone(),
                stream: p.stream,
            })
        })
        .collect::<Result<_, s2i_core::FormatError>>()?;

    let outcome = run_batch(&items, &opts, &args.out, args.fail_fast)?;
    for path in &outcome.written {
        println!("ok {}", path.display());
    }
    for (path, msg) in &outcome.failures {
        eprintln!("failed {}: {msg}", path.display());
    }
    eprintln!(
        "encoded {} of {} inputs",
        outcome.written.len(),
        items.len()
    );
    Ok(if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_mask(args: MaskArgs) -> Result<ExitCode> {
    let (grid_h, grid_w) = args.grid;
    let grid = PatchGrid::new(
        grid_h * args.patch_size,
        grid_w * args.patch_size,
        args.patch_size,
    )?;
    let mask = generate_mask(args.strategy, grid, args.ratio, args.seed);
    let json = mask_to_json(&mask);
    match &args.out {
        Some(path) => {
            fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "wrote {} ({} of {} patches masked)",
                path.display(),
                mask.count(),
                grid.n_patches()
            );
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode> {
    configure_jobs(args.jobs)?;
    let mut registry = FormatRegistry::new();
    for spec in &args.format {
        resolve_format(&mut registry, spec)?;
    }

    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest = DatasetManifest::from_jsonl(&text)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));

    let mut resolved = Vec::new();
    for entry in &manifest.entries {
        let format_id = resolve_format(&mut registry, &entry.format_id)?;
        let stream = entry
            .stream
            .as_deref()
            .map(|s| s.parse::<Stream>().map_err(anyhow::Error::msg))
            .transpose()?;
        resolved.push((base.join(&entry.path), format_id, entry.sample_id.clone(), stream));
    }
    let items: Vec<BatchItem<'_>> = resolved
        .iter()
        .map(|(path, format_id, stem, stream)| {
            Ok(BatchItem {
                path: path.clone(),
                format: registry.get(format_id)?,
                stem: stem.clone(),
                stream: *stream,
            })
        })
        .collect::<Result<_, s2i_core::FormatError>>()?;

    let opts = PipelineOptions {
        stream: args.stream,
        size: args.size,
        keep_zero_frames: args.keep_zero_frames,
        translate: !args.no_translate,
        ..PipelineOptions::default()
    };
    let (stats, failures) = accumulate_stats(&items, &opts)?;
    for (path, msg) in &failures {
        eprintln!("failed {}: {msg}", path.display());
    }
    if stats.count == 0 {
        bail!("no images accumulated");
    }
    fs::write(&args.out, stats_to_json(&stats)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "accumulated {} pixels from {} of {} entries into {}",
        stats.count,
        items.len() - failures.len(),
        items.len(),
        args.out.display()
    );
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_decode(args: DecodeArgs) -> Result<ExitCode> {
    let sidecar_path = args.sidecar.clone().unwrap_or_else(|| {
        let mut name = args.input.file_name().unwrap_or_default().to_os_string();
        name.push(".json");
        args.input.with_file_name(name)
    });
    let sidecar_text = fs::read_to_string(&sidecar_path)
        .with_context(|| format!("reading sidecar {}", sidecar_path.display()))?;
    let sidecar = Sidecar::from_json(&sidecar_text)?;
    let bytes =
        fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;

    let img = if bytes.starts_with(b"S2I1") {
        import_f32raw(&bytes, &sidecar)?
    } else {
        import_png8(&bytes, &sidecar)?
    };
    let frames = args.frames.unwrap_or(img.meta().original_t);
    let joints = args.joints.unwrap_or(img.meta().original_j);
    let seq = decode(&img, frames, joints);
    let doc = serialize_generic_json(&seq);
    match &args.out {
        Some(path) => {
            fs::write(path, &doc).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("decoded {} frames x {} joints to {}", frames, joints, path.display());
        }
        None => println!("{doc}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(args: InspectArgs) -> Result<ExitCode> {
    if args.files.is_empty() {
        bail!("no files to inspect");
    }
    let mut violations = 0usize;
    for path in &args.files {
        match inspect::inspect_file(path) {
            Ok(report) => println!("{}: {report}", path.display()),
            Err(violation) => {
                eprintln!("{}: INVALID: {violation}", path.display());
                violations += 1;
            }
        }
    }
    Ok(if violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_schedule(args: ScheduleArgs) -> Result<ExitCode> {
    if args.t_diff == 0 {
        bail!("--t must be at least 1");
    }
    if args.rho <= 0.0 {
        bail!("--rho must be positive");
    }
    let schedule = build_schedule(args.t_diff, args.rho);
    let json = schedule.to_json();
    match &args.out {
        Some(path) => {
            fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote schedule with {} steps to {}", args.t_diff, path.display());
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
