//! The `hipose` command line.
//!
//! Exit codes: 0 success, 1 usage, parse or I/O error, 2 data invariant
//! violation (malformed encoding, code length mismatch), 3 solver failure.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::bench::{
    generate_scenario, load_ground_truth, run_benchmark, save_scenario, summarize, write_precision_csv, write_rows_csv,
    write_sweep_csv, BenchError, BenchFile, BenchObject, Preset, ScenarioConfig, SolverSummary,
};
use crate::correspondence::{read_correspondences, CorrespondenceError};
use crate::encoding::{load_encoding, EncodingError, SurfaceEncoding, MAX_BITS};
use crate::mesh::{load_mesh, upsample_mesh, MeshError, TriangleMesh};
use crate::solver::{
    hierarchical_solve, plain_kabsch_report, ransac_kabsch_report, InlierRule, RansacParams, SolveError, SolveReport,
    SolverConfig,
};

#[derive(Debug, Parser)]
#[command(name = "hipose", version, about = "Hierarchical surface encoding and pose solving")]
struct Cli {
    /// Seed for encoding, scenario generation and RANSAC.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "HIPOSE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upsample a mesh to 2^bits vertices and write its encoding.
    Encode(EncodeArgs),
    /// Write a synthetic correspondence set and its ground truth.
    Generate(GenerateArgs),
    /// Estimate the pose of a correspondence set.
    Solve(SolveArgs),
    /// Run a benchmark preset over many seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// ASCII PLY or OBJ mesh, millimeters.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=MAX_BITS as i64))]
    bits: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    encoding: PathBuf,
    /// Correspondence output (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth output; defaults to the output path with `.gt.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// TOML scenario settings; values here override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    outlier_fraction: Option<f64>,
    #[arg(long)]
    point_noise: Option<f64>,
    #[arg(long)]
    drop_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Hierarchical,
    Plain,
    Ransac,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    encoding: PathBuf,
    /// Correspondences (JSON lines).
    #[arg(long)]
    corrs: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverChoice::Hierarchical)]
    solver: SolverChoice,
    /// TOML solver settings; values here override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Ground truth to score the estimate against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    m_default: Option<u32>,
    /// Pruning multiplier.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    trust_margin: Option<f64>,
    #[arg(long, value_parser = ["median", "mean"])]
    inlier_rule: Option<String>,
    #[arg(long)]
    min_inliers: Option<usize>,
    /// Keep per-iteration distances in the report.
    #[arg(long)]
    record_distances: bool,
    #[arg(long)]
    ransac_iterations: Option<usize>,
    #[arg(long)]
    inlier_distance: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    preset: PresetChoice,
    /// Object mesh; defaults to a 120 x 80 x 50 mm box.
    #[arg(long, conflicts_with = "encoding")]
    mesh: Option<PathBuf>,
    /// Prebuilt encoding instead of a mesh.
    #[arg(long)]
    encoding: Option<PathBuf>,
    /// Bit depth when encoding `--mesh` or the default object.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=MAX_BITS as i64))]
    bits: u32,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// TOML overrides: seeds, first_seed, [scenario] and [[solver]] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-run CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Per-step precision CSV (table2).
    #[arg(long)]
    precision_out: Option<PathBuf>,
    /// Wide per-seed ADD CSV with one column per solver.
    #[arg(long)]
    sweep_out: Option<PathBuf>,
    /// Write 0 in the time column so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetChoice {
    Table3,
    Table2,
    Fig4,
    Noise,
    Beta,
}

impl From<PresetChoice> for Preset {
    fn from(p: PresetChoice) -> Self {
        match p {
            PresetChoice::Table3 => Preset::Table3,
            PresetChoice::Table2 => Preset::Table2,
            PresetChoice::Fig4 => Preset::Fig4,
            PresetChoice::Noise => Preset::Noise,
            PresetChoice::Beta => Preset::Beta,
        }
    }
}

/// An error with its process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e)
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        Failure::usage(e)
    }
}

impl From<EncodingError> for Failure {
    fn from(e: EncodingError) -> Self {
        let code = match e {
            EncodingError::VertexCount { .. } | EncodingError::PrefixTooLong { .. } | EncodingError::Format(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<CorrespondenceError> for Failure {
    fn from(e: CorrespondenceError) -> Self {
        Failure::usage(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::CodeLength { .. } => 2,
            SolveError::InvalidConfig(_) => 1,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Mesh(e) => e.into(),
            BenchError::Encoding(e) => e.into(),
            BenchError::Correspondence(e) => e.into(),
            BenchError::MissingTruth(_) => Failure {
                code: 2,
                message: e.to_string(),
            },
            other => Failure::usage(other),
        }
    }
}

impl From<toml::de::Error> for Failure {
    fn from(e: toml::de::Error) -> Self {
        Failure::usage(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e)
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(Failure::usage(e)),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let out = Outputs {
        dir: cli.output_dir.clone(),
    };
    match &cli.command {
        Command::Encode(args) => encode(args, cli.seed, &out),
        Command::Generate(args) => generate(args, cli.seed, &out),
        Command::Solve(args) => solve(args, cli.seed, &out),
        Command::Bench(args) => bench(args, cli.seed, &out),
    }
}

struct Outputs {
    dir: Option<PathBuf>,
}

impl Outputs {
    fn path(&self, p: &Path) -> Result<PathBuf, Failure> {
        let full = match &self.dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(full)
    }

    fn create(&self, p: &Path) -> Result<BufWriter<File>, Failure> {
        Ok(BufWriter::new(File::create(self.path(p)?)?))
    }
}

fn encode(args: &EncodeArgs, seed: u64, out: &Outputs) -> Result<(), Failure> {
    let mesh = load_mesh(&args.mesh)?;
    info!(
        "loaded {} vertices, {} faces",
        mesh.vertices().len(),
        mesh.faces().len()
    );
    let start = Instant::now();
    let up = upsample_mesh(&mesh, args.bits)?;
    let enc = SurfaceEncoding::build(up.into_vertices(), args.bits, seed)?;
    let elapsed = start.elapsed();
    enc.save(out.path(&args.out)?)?;
    println!("bits {}", enc.bits());
    println!("vertices {}", enc.len());
    println!("diameter_mm {:.6}", mesh.diameter());
    println!("build_ms {:.1}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

/// Flag values as a TOML table, overlaid by the optional config file.
fn merged_table(flags: toml::Table, config: Option<&Path>) -> Result<toml::Table, Failure> {
    let mut table = flags;
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)?;
        let file: toml::Table = text.parse()?;
        table.extend(file);
    }
    Ok(table)
}

fn put<V: Into<toml::Value>>(table: &mut toml::Table, key: &str, value: Option<V>) {
    if let Some(v) = value {
        table.insert(key.into(), v.into());
    }
}

fn generate(args: &GenerateArgs, seed: u64, out: &Outputs) -> Result<(), Failure> {
    let enc = load_encoding(&args.encoding)?;
    let mut flags = toml::Table::new();
    flags.insert("seed".into(), toml::Value::Integer(seed as i64));
    put(&mut flags, "n_points", args.points.map(|n| n as i64));
    put(&mut flags, "outlier_fraction", args.outlier_fraction);
    put(&mut flags, "point_noise", args.point_noise);
    put(&mut flags, "drop_fraction", args.drop_fraction);
    let cfg: ScenarioConfig = merged_table(flags, args.config.as_deref())?.try_into()?;

    let object = BenchObject::from_encoding(enc);
    let scenario = generate_scenario(&object.encoding, object.diameter, &cfg)?;
    let truth = match &args.truth {
        Some(p) => p.clone(),
        None => args.out.with_extension("gt.json"),
    };
    save_scenario(&scenario, out.path(&args.out)?, out.path(&truth)?)?;
    println!("correspondences {}", scenario.correspondences.len());
    print_pose(&scenario.pose);
    Ok(())
}

fn solve(args: &SolveArgs, seed: u64, out: &Outputs) -> Result<(), Failure> {
    let enc = load_encoding(&args.encoding)?;
    let corrs = read_correspondences(BufReader::new(File::open(&args.corrs)?))?;

    let mut flags = toml::Table::new();
    let report: SolveReport = match args.solver {
        SolverChoice::Hierarchical => {
            put(&mut flags, "m_default", args.m_default.map(i64::from));
            put(&mut flags, "inlier_multiplier", args.beta);
            put(&mut flags, "trust_margin", args.trust_margin);
            put(&mut flags, "inlier_rule", args.inlier_rule.clone());
            put(&mut flags, "min_inliers", args.min_inliers.map(|n| n as i64));
            if args.record_distances {
                flags.insert("record_distances".into(), true.into());
            }
            let mut cfg: SolverConfig = merged_table(flags, args.config.as_deref())?.try_into()?;
            if args.m_default.is_none() && cfg.m_default > enc.bits() && args.config.is_none() {
                cfg.m_default = enc.bits();
            }
            info!(
                "hierarchical: m_default {} beta {} rule {}",
                cfg.m_default,
                cfg.inlier_multiplier,
                match cfg.inlier_rule {
                    InlierRule::Median => "median",
                    InlierRule::Mean => "mean",
                }
            );
            hierarchical_solve(&enc, &corrs, &cfg)?
        }
        SolverChoice::Plain => plain_kabsch_report(&enc, &corrs)?,
        SolverChoice::Ransac => {
            flags.insert("seed".into(), toml::Value::Integer(seed as i64));
            put(&mut flags, "iterations", args.ransac_iterations.map(|n| n as i64));
            put(&mut flags, "inlier_distance", args.inlier_distance);
            put(&mut flags, "min_inliers", args.min_inliers.map(|n| n as i64));
            let params: RansacParams = merged_table(flags, args.config.as_deref())?.try_into()?;
            ransac_kabsch_report(&enc, &corrs, &params)?
        }
    };

    print_pose(&report.pose);
    println!("step stage inliers median_mm threshold_mm");
    for rec in &report.iterations {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{} {} {} {} {}",
            rec.step,
            serde_json::to_value(rec.stage)?.as_str().unwrap_or("?"),
            rec.inliers,
            fmt(rec.median_distance),
            fmt(rec.threshold)
        );
    }
    if let Some(path) = &args.truth {
        let truth = load_ground_truth(path)?;
        let object = BenchObject::from_encoding(enc);
        println!(
            "rotation_error_deg {:.6}",
            report.pose.rotation_error(&truth.pose).to_degrees()
        );
        println!("translation_error_mm {:.6}", report.pose.translation_error(&truth.pose));
        println!("add_mm {:.6}", object.model.add(&report.pose, &truth.pose));
        println!("add_s_mm {:.6}", object.model.add_s(&report.pose, &truth.pose));
    }
    if let Some(path) = &args.report {
        let mut w = out.create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn print_pose(pose: &crate::solver::Pose) {
    for r in 0..3 {
        println!(
            "R {:.9} {:.9} {:.9}",
            pose.rotation[(r, 0)],
            pose.rotation[(r, 1)],
            pose.rotation[(r, 2)]
        );
    }
    println!(
        "t {:.6} {:.6} {:.6}",
        pose.translation.x, pose.translation.y, pose.translation.z
    );
}

fn bench(args: &BenchArgs, seed: u64, out: &Outputs) -> Result<(), Failure> {
    let object = match (&args.mesh, &args.encoding) {
        (_, Some(path)) => BenchObject::from_encoding(load_encoding(path)?),
        (Some(path), None) => BenchObject::from_mesh(&load_mesh(path)?, args.bits, seed)?,
        (None, None) => BenchObject::from_mesh(&TriangleMesh::cuboid(120.0, 80.0, 50.0)?, args.bits, seed)?,
    };
    info!(
        "object: {} vertices, {} bits, diameter {:.3} mm",
        object.encoding.len(),
        object.encoding.bits(),
        object.diameter
    );

    let preset = Preset::from(args.preset);
    let mut plan = preset.plan(args.seeds);
    if let Some(path) = &args.config {
        BenchFile::parse(&std::fs::read_to_string(path)?)?.apply(&mut plan)?;
    }
    for spec in &plan.solvers {
        if let crate::bench::SolverKind::Hierarchical(cfg) = &spec.kind {
            cfg.validate(object.encoding.bits())?;
        }
    }

    let start = Instant::now();
    let rows = run_benchmark(&object, &plan)?;
    info!("{} runs in {:.1} s", rows.len(), start.elapsed().as_secs_f64());

    let mut w = out.create(&args.out)?;
    write_rows_csv(&mut w, &rows, !args.no_timing)?;
    w.flush()?;
    if let Some(path) = &args.precision_out {
        let mut w = out.create(path)?;
        write_precision_csv(&mut w, &rows)?;
        w.flush()?;
    }
    if let Some(path) = &args.sweep_out {
        let mut w = out.create(path)?;
        write_sweep_csv(&mut w, &rows)?;
        w.flush()?;
    }

    let summary = summarize(&rows, object.diameter);
    print_summary(&summary, !args.no_timing);
    if !rows.is_empty() && rows.iter().all(|r| r.error.is_some()) {
        return Err(Failure {
            code: 3,
            message: format!(
                "all {} runs failed; first: {}",
                rows.len(),
                rows[0].error.as_deref().unwrap_or("")
            ),
        });
    }
    Ok(())
}

fn print_summary(summary: &[SolverSummary], timing: bool) {
    println!(
        "{:<24} {:>5} {:>5} {:>8} {:>8} {:>8} {:>10}",
        "solver", "runs", "fail", "ADD%", "ADD-S%", "AUC%", "ms"
    );
    for s in summary {
        println!(
            "{:<24} {:>5} {:>5} {:>8.2} {:>8.2} {:>8.2} {:>10.2}",
            s.solver,
            s.runs,
            s.failures,
            s.add_recall,
            s.add_s_recall,
            s.auc,
            if timing { s.mean_time_ms } else { 0.0 }
        );
    }
    for s in summary {
        if let Some(p) = &s.median_precision {
            let cells: Vec<String> = p.iter().map(|v| format!("{:.2}", 100.0 * v)).collect();
            println!("precision% {} {}", s.solver, cells.join(" "));
        }
    }
}
