use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shadescan_core::pipeline::{
    emit_report, mask_report, render_table, BackendKind, Pipeline, ReportFormat, RunnerKind,
};
use shadescan_core::pom::{scan_pom, PomScan, PrevalenceRecord};
use shadescan_core::registry::{Cache, Gav};

mod config;

use config::{merge, FileConfig, ScanOverrides};

const CACHE_ENV: &str = "SHADESCAN_CACHE_DIR";

#[derive(Parser)]
#[command(name = "shadescan", version, about = "Find vulnerable clones and shaded copies of Maven artifacts")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the registry for clones of a vulnerable artifact and confirm them with a POV.
    Scan(ScanArgs),
    /// Count shade plugin and relocation usage in a set of poms.
    Prevalence(PrevalenceArgs),
    /// Inspect or clear the response cache.
    Cache(CacheArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Fixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunnerArg {
    Auto,
    Maven,
    Stub,
}

#[derive(Args)]
struct ScanArgs {
    /// Vulnerable artifact as G:A:V.
    #[arg(long)]
    original: Option<Gav>,
    /// CVE identifier, e.g. CVE-2022-38751.
    #[arg(long)]
    cve: Option<String>,
    /// POV project directory; without it the scan stops after clone detection.
    #[arg(long)]
    pov: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Fixture registry root (implies --backend fixture).
    #[arg(long)]
    fixture_root: Option<PathBuf>,
    /// Result pages fetched per query class.
    #[arg(long)]
    pages: Option<usize>,
    #[arg(long)]
    page_size: Option<usize>,
    /// Number of query classes selected from the original.
    #[arg(long)]
    classes: Option<usize>,
    /// Query with this class name instead of selecting (repeatable).
    #[arg(long = "query-class")]
    query_classes: Vec<String>,
    /// Result sets a candidate must appear in.
    #[arg(long)]
    threshold: Option<usize>,
    /// Cloned classes needed to call a candidate a clone.
    #[arg(long)]
    min_cloned: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    build_workers: Option<usize>,
    #[arg(long, value_enum)]
    runner: Option<RunnerArg>,
    /// Stub runner script (default: stub-runner.json in the fixture root).
    #[arg(long)]
    stub_script: Option<PathBuf>,
    /// Seconds allowed per build phase.
    #[arg(long)]
    build_timeout: Option<u64>,
    /// Where POV instances are materialized (default: a temporary directory).
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    /// Disable the response cache.
    #[arg(long, conflicts_with = "cache_dir")]
    no_cache: bool,
    /// Replace candidate coordinates with hashes in all output.
    #[arg(long)]
    mask: bool,
    #[arg(long)]
    report_json: Option<PathBuf>,
    #[arg(long)]
    report_table: Option<PathBuf>,
    /// TOML file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PrevalenceArgs {
    /// Glob selecting pom files, e.g. 'corpus/**/*.pom'.
    #[arg(long)]
    poms: String,
    /// Also list the classification of every file.
    #[arg(long)]
    files: bool,
}

#[derive(Args)]
struct CacheArgs {
    #[arg(long, group = "action", required_unless_present = "stats")]
    clear: bool,
    #[arg(long, group = "action")]
    stats: bool,
    #[arg(long, env = CACHE_ENV, hide = true)]
    cache_dir: Option<PathBuf>,
}

fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .map(|d| d.join("shadescan"))
}

fn scan(args: ScanArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?.resolve_paths(path.parent().unwrap_or(Path::new("."))),
        None => FileConfig::default(),
    };
    let flags = ScanOverrides {
        original: args.original,
        cve: args.cve,
        pov: args.pov,
        classes: args.classes,
        query_classes: args.query_classes,
        page_size: args.page_size,
        pages: args.pages,
        threshold: args.threshold,
        min_cloned: args.min_cloned,
        workers: args.workers,
        build_workers: args.build_workers,
        backend: args.backend.map(|b| match b {
            BackendArg::Live => BackendKind::Live,
            BackendArg::Fixture => BackendKind::Fixture,
        }),
        fixture_root: args.fixture_root,
        cache_dir: args.cache_dir,
        no_cache: args.no_cache,
        runner: args.runner.map(|r| match r {
            RunnerArg::Auto => RunnerKind::Auto,
            RunnerArg::Maven => RunnerKind::Maven,
            RunnerArg::Stub => RunnerKind::Stub,
        }),
        stub_script: args.stub_script,
        build_timeout: args.build_timeout,
        work_dir: args.work_dir,
        mask: args.mask,
    };
    let (config, mask) = merge(flags, file, default_cache_dir())?;
    let pipeline = Pipeline::from_config(config)?;
    let mut report = pipeline.run()?;
    if mask {
        report = mask_report(&report);
    }
    let mut outputs = Vec::new();
    if let Some(path) = &args.report_json {
        outputs.push((ReportFormat::Json, path.as_path()));
    }
    if let Some(path) = &args.report_table {
        outputs.push((ReportFormat::TextTable, path.as_path()));
    }
    emit_report(&report, &outputs).context("writing reports")?;
    if args.report_table.is_none() {
        print!("{}", render_table(&report));
    }
    Ok(())
}

#[derive(Serialize)]
struct PrevalenceOutput {
    #[serde(flatten)]
    record: PrevalenceRecord,
    shade_ratio: f64,
    relocation_ratio: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    files: Vec<FileMatch>,
}

#[derive(Serialize)]
struct FileMatch {
    path: String,
    #[serde(flatten)]
    scan: PomScan,
}

fn prevalence(args: PrevalenceArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(&args.poms)
        .with_context(|| format!("bad pattern {:?}", args.poms))?
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    if paths.is_empty() {
        bail!("no files match {:?}", args.poms);
    }
    let mut record = PrevalenceRecord::default();
    let mut files = Vec::new();
    for path in paths {
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let scan = scan_pom(&bytes);
        record.record(scan);
        if args.files {
            files.push(FileMatch {
                path: path.display().to_string(),
                scan,
            });
        }
    }
    let output = PrevalenceOutput {
        record,
        shade_ratio: record.shade_ratio(),
        relocation_ratio: record.relocation_ratio(),
        files,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn cache(args: CacheArgs) -> Result<()> {
    let dir = args
        .cache_dir
        .or_else(default_cache_dir)
        .context("no cache directory; set --cache-dir or SHADESCAN_CACHE_DIR")?;
    let cache = Cache::open(&dir)?;
    if args.clear {
        cache.clear()?;
        eprintln!("cleared {}", dir.display());
    } else {
        println!("{}", serde_json::to_string_pretty(&cache.stats()?)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Scan(args) => scan(args),
        Command::Prevalence(args) => prevalence(args),
        Command::Cache(args) => cache(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
