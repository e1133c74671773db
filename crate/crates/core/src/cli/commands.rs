use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::RunConfig;
use super::persist::{
    self, load_pair, read_dataset_records, read_manifest, read_report_csv, unix_now,
    Manifest, ReportRow, RunWriter, DATASET, REPORT_CSV,
};
use super::targets::{generate_targets, load_targets, write_targets, DEFAULT_TARGET_POINTS};
use super::CliError;
use crate::augment::{diversify, expand, shorten, AugmentConfig, VariantKind};
use crate::dsl::Program;
use crate::geometry::io::{read_cloud, write_xyz};
use crate::geometry::{execute, normalize_unit_box, occupancy_grid, surface_sample, MembershipOracle};
use crate::metrics::{chamfer, iou};
use crate::selftrain::{self, replay_updates, IterationReport, TrainingPair, DEFAULT_SAMPLE_POINTS};

#[derive(Debug, Parser)]
#[command(name = "cadforge", version, about = "Self-training program synthesis for sketch-extrude CAD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentMode {
    Expand,
    Shorten,
    Diversify,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the self-training loop described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the last completed iteration in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many iterations in this invocation.
        #[arg(long, value_name = "N")]
        stop_after: Option<usize>,
    },
    /// Write synthetic target clouds and their answer programs.
    GenTargets {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_POINTS)]
        points: usize,
    },
    /// Execute a program and write a surface sample as XYZ.
    Execute {
        program: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chamfer distance between two clouds, optionally IoU between two programs.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, num_args = 2, value_names = ["PA", "PB"])]
        programs: Option<Vec<PathBuf>>,
        #[arg(long, default_value_t = selftrain::IOU_RESOLUTION)]
        grid: usize,
        /// Normalize both clouds to the unit box first.
        #[arg(long)]
        normalize: bool,
    },
    /// Print or write augmented variants of a program.
    Augment {
        program: PathBuf,
        #[arg(long, value_enum)]
        mode: AugmentMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS)]
        points: usize,
    },
    /// Summarize a report CSV.
    Report { csv: PathBuf },
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            resume,
            stop_after,
        } => {
            let cfg = RunConfig::load(&config)?;
            run_pipeline(&cfg, resume, stop_after, true).map(|_| ())
        }
        Command::GenTargets {
            count,
            seed,
            out,
            points,
        } => cmd_gen_targets(count, seed, &out, points),
        Command::Execute {
            program,
            points,
            seed,
            out,
        } => cmd_execute(&program, points, seed, &out),
        Command::Metrics {
            a,
            b,
            programs,
            grid,
            normalize,
        } => cmd_metrics(&a, &b, programs.as_deref(), grid, normalize),
        Command::Augment {
            program,
            mode,
            seed,
            out,
            points,
        } => cmd_augment(&program, mode, seed, out.as_deref(), points),
        Command::Report { csv } => cmd_report(&csv),
    }
}

fn read_program(path: &Path) -> Result<Program, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<Program>()
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

pub fn cmd_gen_targets(count: usize, seed: u64, out: &Path, points: usize) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Config("--count must be at least 1".into()));
    }
    let targets = generate_targets(count, seed, points)?;
    write_targets(out, &targets)?;
    println!("wrote {count} targets to {}", out.display());
    Ok(())
}

pub fn cmd_execute(program: &Path, points: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let p = read_program(program)?;
    let oracle = execute(&p)?;
    let cloud = surface_sample(&oracle, points, seed)?;
    write_xyz(out, &cloud)?;
    Ok(())
}

/// Oracle of `p` in the frame of its own normalized sample.
fn normalized_oracle(p: &Program) -> Result<MembershipOracle, CliError> {
    let oracle = execute(p)?;
    let sample = surface_sample(&oracle, DEFAULT_SAMPLE_POINTS, 0)?;
    let (_, t) = normalize_unit_box(&sample)?;
    Ok(oracle.transformed(t))
}

pub fn cmd_metrics(a: &Path, b: &Path, programs: Option<&[PathBuf]>, grid: usize, normalize: bool) -> Result<(), CliError> {
    let mut ca = read_cloud(a)?;
    let mut cb = read_cloud(b)?;
    if normalize {
        ca = normalize_unit_box(&ca)?.0;
        cb = normalize_unit_box(&cb)?.0;
    }
    let r = chamfer(&ca, &cb)?;
    println!("cd={:.6}", r.value);
    println!("cd_ab={:.6}", r.direction_ab);
    println!("cd_ba={:.6}", r.direction_ba);
    if let Some([pa, pb]) = programs {
        let oa = normalized_oracle(&read_program(pa)?)?;
        let ob = normalized_oracle(&read_program(pb)?)?;
        let frame = match (oa.bbox(), ob.bbox()) {
            (Some(x), Some(y)) => x.union(&y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => crate::geometry::Aabb::unit(),
        };
        let ga = occupancy_grid(&oa, grid, frame)?;
        let gb = occupancy_grid(&ob, grid, frame)?;
        println!("iou={:.3}", iou(&ga, &gb)?);
    }
    Ok(())
}

fn kind_name(kind: VariantKind) -> &'static str {
    match kind {
        VariantKind::Original => "original",
        VariantKind::Expand => "expand",
        VariantKind::Shorten => "shorten",
    }
}

pub fn cmd_augment(program: &Path, mode: AugmentMode, seed: u64, out: Option<&Path>, points: usize) -> Result<(), CliError> {
    let p = read_program(program)?;
    let cfg = AugmentConfig::default();
    let variants: Vec<(VariantKind, Program, Option<crate::geometry::PointCloud>)> = match mode {
        AugmentMode::Expand => {
            execute(&p)?;
            expand(&p, &cfg, seed).into_iter().map(|v| (VariantKind::Expand, v, None)).collect()
        }
        AugmentMode::Shorten => shorten(&p).into_iter().map(|v| (VariantKind::Shorten, v, None)).collect(),
        AugmentMode::Diversify => diversify(&p, &cfg, points, seed)?
            .into_iter()
            .map(|v| (v.kind, v.program, Some(v.cloud)))
            .collect(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    for (i, (kind, program, cloud)) in variants.iter().enumerate() {
        println!("--- variant {i} ({}) ---", kind_name(*kind));
        println!("{program}");
        if let Some(dir) = out {
            let path = dir.join(format!("variant_{i:02}.cad"));
            crate::geometry::io::atomic_write(&path, program.to_text().as_bytes()).map_err(|e| CliError::io(&path, e))?;
            if let Some(c) = cloud {
                write_xyz(&dir.join(format!("variant_{i:02}.xyz")), c)?;
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

pub fn cmd_report(csv: &Path) -> Result<(), CliError> {
    let rows = read_report_csv(csv)?;
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Err(CliError::EmptyReport(csv.to_path_buf()));
    };
    println!(
        "{:>4}  {:>10} {:>10} {:>10}  {:>6}  {:>6} {:>8} {:>6}  {:>6} {:>7}",
        "iter", "cd_best10", "cd_mean", "cd_worst10", "iou", "len_lo", "len_mean", "len_hi", "pairs", "dropped"
    );
    for r in &rows {
        println!(
            "{:>4}  {:>10.4} {:>10.4} {:>10.4}  {:>6}  {:>6} {:>8.2} {:>6}  {:>6} {:>7}",
            r.iteration,
            r.cd_best10,
            r.cd_mean,
            r.cd_worst10,
            fmt_opt(r.iou_mean, 3),
            r.len_min,
            r.len_mean,
            r.len_max,
            r.pairs_emitted,
            r.proposals_dropped
        );
    }
    println!("cd_best10 delta: {:.4}", last.cd_best10 - first.cd_best10);
    println!("cd_mean delta: {:.4}", last.cd_mean - first.cd_mean);
    println!("cd_worst10 delta: {:.4}", last.cd_worst10 - first.cd_worst10);
    match (first.iou_mean, last.iou_mean) {
        (Some(a), Some(b)) => println!("iou_mean delta: {:.4}", b - a),
        _ => println!("iou_mean delta: -"),
    }
    println!("len_mean delta: {:.4}", last.len_mean - first.len_mean);
    println!("len_max delta: {}", last.len_max as i64 - first.len_max as i64);
    Ok(())
}

/// Runs (or resumes) the loop for `cfg`, persisting after every iteration.
/// Returns the reports of every completed iteration, including resumed ones.
pub fn run_pipeline(
    cfg: &RunConfig,
    resume: bool,
    stop_after: Option<usize>,
    verbose: bool,
) -> Result<Vec<IterationReport>, CliError> {
    let targets = load_targets(&cfg.targets)?;
    if targets.is_empty() {
        return Err(CliError::Config(format!("no .xyz or .ply files in {}", cfg.targets.display())));
    }
    let mut proposer = cfg.proposer.build(&cfg.pipeline)?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let mut dataset: Vec<TrainingPair> = Vec::new();
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut records = Vec::new();
    let mut reports: Vec<IterationReport> = Vec::new();
    let manifest = if resume {
        let m = read_manifest(&dir)?;
        if m.config != cfg.to_json() {
            return Err(CliError::Config(format!(
                "config differs from the one recorded in {}",
                dir.join(persist::MANIFEST).display()
            )));
        }
        let done = m.completed_iterations;
        records = read_dataset_records(&dir.join(DATASET))?
            .into_iter()
            .filter(|r| r.iteration < done)
            .collect();
        for r in &records {
            dataset.push(load_pair(&dir, r)?);
        }
        rows = read_report_csv(&dir.join(REPORT_CSV))?
            .into_iter()
            .filter(|r| r.iteration < done)
            .collect();
        for path in m.reports.iter().take(done) {
            let p = dir.join(path);
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            reports.push(serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?);
        }
        replay_updates(proposer.as_mut(), &dataset, done);
        Manifest {
            reports: m.reports.into_iter().take(done).collect(),
            finished_unix: None,
            ..m
        }
    } else {
        Manifest {
            config: cfg.to_json(),
            seed: cfg.pipeline.seed,
            proposer: proposer.name().to_string(),
            started_unix: unix_now(),
            finished_unix: None,
            completed_iterations: 0,
            report_csv: REPORT_CSV.into(),
            dataset: DATASET.into(),
            reports: Vec::new(),
        }
    };
    let start = manifest.completed_iterations;
    let mut writer = RunWriter {
        dir: dir.clone(),
        manifest,
        rows,
        records,
        progress: verbose.then(|| {
            Box::new(|r: &IterationReport| {
                println!(
                    "iteration {}: cd_mean={:.4} cd_best10={:.4} len_max={} pairs={}",
                    r.iteration, r.cd_mean, r.cd_best10, r.len_max, r.pairs_emitted
                )
            }) as Box<dyn FnMut(&IterationReport)>
        }),
    };
    if !resume {
        writer.write_manifest()?;
    }
    let mut pipeline = cfg.pipeline.clone();
    if let Some(n) = stop_after {
        pipeline.iterations = pipeline.iterations.min(start + n);
    }
    if start < pipeline.iterations {
        reports.extend(selftrain::run(&pipeline, &targets, proposer.as_mut(), &mut dataset, start, &mut writer)?);
    }
    if writer.manifest.completed_iterations >= cfg.pipeline.iterations {
        writer.manifest.finished_unix = Some(unix_now());
        writer.write_manifest()?;
    }
    Ok(reports)
}
