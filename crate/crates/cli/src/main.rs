//! `isac`: scenes, Monte Carlo sweeps and technique demos.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver contract
//! violation, 4 I/O error, 1 anything else.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use isac_core::config::{ExperimentKind, RunConfig, Technique};
use isac_core::experiments::{run_case_a, run_case_b, run_demo, setup_seed, setup_seeds, sweep_energy_vs_antennas, sweep_infeasibility};
use isac_core::output::{beampattern_csv, case_a_csv, case_b_csv, scene_csv, trace_csv, write_table, Manifest};
use isac_core::scene::dump_json;
use isac_core::solvers::SolveReport;
use isac_core::{IsacError, Result};

#[derive(Parser, Debug)]
#[command(name = "isac", version, about = "Interference mitigation experiments for network-level ISAC")]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write solver iteration traces.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw setup 0 of the configured scenario and dump it.
    GenerateScene,
    /// Execute the configured experiment.
    Run,
    /// Run the configured Monte Carlo sweep (case A or case B).
    Sweep,
    /// Run one technique on setup 0.
    DemoTechnique {
        #[arg(value_parser = ["cmt", "ia", "hdbf", "ts", "sa"])]
        name: String,
    },
}

fn exit_code(e: &IsacError) -> u8 {
    match e {
        IsacError::ConfigParse { .. } | IsacError::ConfigField { .. } => 2,
        IsacError::ContractViolation(_) => 3,
        IsacError::Io(_) | IsacError::Csv(_) | IsacError::Json(_) => 4,
        _ => 1,
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str, written: &mut Vec<String>) -> Result<BufWriter<File>> {
    written.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn finish(cfg: &RunConfig, command: &str, seeds: &[u64], written: Vec<String>) -> Result<()> {
    Manifest::new(command, cfg, cfg.seed, seeds, written).write(&cfg.out_dir.join("manifest.json"))
}

fn write_traces(dir: &Path, solves: &[(String, SolveReport<f64>)], written: &mut Vec<String>) -> Result<()> {
    let refs: Vec<(String, &SolveReport<f64>)> = solves.iter().map(|(n, r)| (n.clone(), r)).collect();
    trace_csv(create(dir, "trace.csv", written)?, &refs)
}

fn generate_scene(cfg: &RunConfig) -> Result<()> {
    let seed = setup_seed(cfg.seed, 0);
    let (scene, json) = match cfg.experiment {
        ExperimentKind::CaseB => {
            let n = cfg.sweep.antennas[0];
            let set = cfg.case_b().setup(seed, n)?;
            let json = dump_json(&set.scene, &set.channels)?;
            (set.scene, json)
        }
        _ => {
            let (scene, ch) = cfg.case_a().setup(seed)?;
            let json = dump_json(&scene, &ch)?;
            (scene, json)
        }
    };
    let mut written = Vec::new();
    scene_csv(create(&cfg.out_dir, "scene.csv", &mut written)?, &scene, None)?;
    written.push("scene.json".into());
    std::fs::write(cfg.out_dir.join("scene.json"), json)?;
    finish(cfg, "generate-scene", &[seed], written)
}

fn sweep(cfg: &RunConfig, trace: bool) -> Result<()> {
    let mut written = Vec::new();
    let seeds = setup_seeds(cfg.seed, cfg.n_setups);
    let mut solves = Vec::new();
    match cfg.experiment {
        ExperimentKind::CaseA => {
            let schemes = cfg.cmt_schemes()?;
            let sw = sweep_infeasibility(&cfg.case_a(), &cfg.sweep.gamma_db, cfg.n_setups, &schemes, cfg.seed)?;
            case_a_csv(create(&cfg.out_dir, "case_a.csv", &mut written)?, &sw.rows())?;
            serde_json::to_writer(create(&cfg.out_dir, "case_a_setups.json", &mut written)?, &sw)?;
            if trace {
                for &g in &cfg.sweep.gamma_db {
                    for &s in &schemes {
                        let d = run_case_a(&cfg.case_a(), seeds[0], s, g)?;
                        solves.push((format!("{}@{g}dB", s.name()), d.report));
                    }
                }
            }
        }
        ExperimentKind::CaseB => {
            let schemes = cfg.ts_schemes()?;
            let sw = sweep_energy_vs_antennas(&cfg.case_b(), &cfg.sweep.antennas, cfg.n_setups, &schemes, cfg.seed)?;
            case_b_csv(create(&cfg.out_dir, "case_b.csv", &mut written)?, &sw.rows())?;
            serde_json::to_writer(create(&cfg.out_dir, "case_b_setups.json", &mut written)?, &sw)?;
            if trace {
                for &n in &cfg.sweep.antennas {
                    for &s in &schemes {
                        let d = run_case_b(&cfg.case_b(), seeds[0], s, n)?;
                        solves.push((format!("{}@{n}", s.name()), d.report));
                    }
                }
            }
        }
        ExperimentKind::Demo => {
            return Err(IsacError::ConfigField { field: "experiment".into(), message: "sweeps need case_a or case_b".into() });
        }
    }
    if trace {
        write_traces(&cfg.out_dir, &solves, &mut written)?;
    }
    finish(cfg, "sweep", &seeds, written)
}

fn demo(cfg: &RunConfig, technique: Technique, trace: bool) -> Result<()> {
    let out = run_demo(cfg, technique)?;
    let mut written = Vec::new();
    let rows: Vec<Vec<String>> = out
        .metrics
        .iter()
        .map(|(s, m, v)| vec![technique.name().to_string(), s.clone(), m.clone(), v.to_string()])
        .collect();
    write_table(create(&cfg.out_dir, "demo.csv", &mut written)?, "isac-demo/v1", &["technique", "subject", "metric", "value"], &rows)?;
    if let Some((scene, assignment)) = &out.scene {
        scene_csv(create(&cfg.out_dir, "scene.csv", &mut written)?, scene, assignment.as_ref())?;
    }
    if let Some((theta, gain, ideal)) = &out.beampattern {
        beampattern_csv(create(&cfg.out_dir, "beampattern.csv", &mut written)?, theta, gain, ideal)?;
    }
    if trace {
        write_traces(&cfg.out_dir, &out.traces, &mut written)?;
    }
    finish(cfg, &format!("demo-technique {}", technique.name()), &[setup_seed(cfg.seed, 0)], written)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    info!("writing to {}", cfg.out_dir.display());
    match &cli.command {
        Command::GenerateScene => generate_scene(&cfg),
        Command::Sweep => sweep(&cfg, cli.trace),
        Command::Run => match cfg.experiment {
            ExperimentKind::Demo => demo(&cfg, cfg.demo.technique, cli.trace),
            _ => sweep(&cfg, cli.trace),
        },
        Command::DemoTechnique { name } => demo(&cfg, name.parse()?, cli.trace),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
