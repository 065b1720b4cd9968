//! The `ymb` batch front end: flags, config loading, scenario dispatch,
//! artifact and manifest writing, exit codes.
//!
//! Exit codes: 0 all checks pass, 1 a tolerance check failed, 2 configuration
//! error, 3 solver failure.

pub mod commands;
pub mod config;

use crate::error::YmbError;
use crate::reduced::MomentReport;
use clap::{Parser, Subcommand};
use commands::{all_pass, Check};
use config::{RunConfig, ToleranceProfile, Tolerances};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ymb",
    version,
    about = "Instanton gluing and reduced-functional studies on the unit 4-ball"
)]
pub struct Cli {
    /// JSON run config, or a manifest written by an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replaces the config's tolerances with a named profile.
    #[arg(long, global = true, value_enum)]
    pub tolerance_profile: Option<ToleranceProfile>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Action, self-duality and gluing-relation checks of the 1-instanton.
    InstantonCheck,
    /// Scan `G` over the bubble center and classify its critical points.
    Landscape,
    /// `J_ε` and its expansion over the ε list.
    ExpansionStudy,
    /// Hessian positivity and gradient envelope at the glued connection.
    Probe,
    /// Picard small solutions and their O(ε) rate.
    SmallSolution,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::InstantonCheck => "instanton-check",
            Command::Landscape => "landscape",
            Command::ExpansionStudy => "expansion-study",
            Command::Probe => "probe",
            Command::SmallSolution => "small-solution",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        [
            Command::InstantonCheck,
            Command::Landscape,
            Command::ExpansionStudy,
            Command::Probe,
            Command::SmallSolution,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

pub fn exit_code(e: &YmbError) -> i32 {
    match e {
        YmbError::InvalidParams(_) | YmbError::Cache(_) | YmbError::Io(_) | YmbError::GridMismatch(..) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    config_hash: String,
    seed: u64,
    threads: usize,
    versions: BTreeMap<&'static str, &'static str>,
    grid_hashes: &'a BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    pass: bool,
}

fn sha_file(path: &Path) -> std::io::Result<String> {
    Ok(format!("{:x}", Sha256::digest(std::fs::read(path)?)))
}

/// Collects the files a command writes and finishes with the manifest.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> crate::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: vec![],
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> crate::Result<()> {
        let s = serde_json::to_string_pretty(v).map_err(|e| YmbError::Cache(e.to_string()))?;
        std::fs::write(self.dir.join(name), s + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn csv<R: AsRef<[f64]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> crate::Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(|e| YmbError::Cache(e.to_string()))?;
        let io = |e: csv::Error| YmbError::Cache(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            // `{:?}` prints the shortest representation that round-trips exactly.
            w.write_record(r.as_ref().iter().map(|v| format!("{v:?}")))
                .map_err(io)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn finish(
        self,
        command: Command,
        cfg: &RunConfig,
        hashes: &BTreeMap<String, String>,
        pass: bool,
    ) -> crate::Result<PathBuf> {
        let mut outputs = BTreeMap::new();
        for f in &self.files {
            outputs.insert(f.clone(), sha_file(&self.dir.join(f))?);
        }
        let m = Manifest {
            manifest_version: 1,
            command: command.name(),
            config: cfg,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            versions: BTreeMap::from([("ymb-core", env!("CARGO_PKG_VERSION"))]),
            grid_hashes: hashes,
            outputs,
            pass,
        };
        let path = self.dir.join("manifest.json");
        let s = serde_json::to_string_pretty(&m).map_err(|e| YmbError::Cache(e.to_string()))?;
        std::fs::write(&path, s + "\n")?;
        Ok(path)
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "{:<4} {:<32} {:>14.6e}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.rule
        );
    }
}

/// Runs one subcommand with an already resolved config; returns `pass`.
pub fn execute(command: Command, cfg: &RunConfig) -> crate::Result<bool> {
    let mut art = Artifacts::new(&cfg.out)?;
    let (checks, hashes) = match command {
        Command::InstantonCheck => {
            let s = commands::instanton_check(cfg)?;
            art.json("instanton.json", &s)?;
            (s.checks, s.grid_hashes)
        }
        Command::Landscape => {
            let setup = commands::Setup::new(cfg)?;
            let s = commands::landscape(cfg, &setup)?;
            let header = MomentReport::csv_header();
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<f64>> = s.rows.iter().map(|r| r.csv_row()).collect();
            art.csv("landscape.csv", &header, &rows)?;
            art.json("critical.json", &s)?;
            println!(
                "{} grid points, {} critical points, {} exits, degenerate: {}",
                s.rows.len(),
                s.critical.len(),
                s.exits.len(),
                s.degenerate
            );
            for e in &s.errors {
                eprintln!("point error: {e}");
            }
            (vec![], setup.grid_hashes())
        }
        Command::ExpansionStudy => {
            let setup = commands::Setup::new(cfg)?;
            let s = commands::expansion_study(cfg, &setup)?;
            art.csv("expansion.csv", &commands::ExpansionStudy::csv_header(), &s.csv_rows())?;
            art.json("expansion.json", &s)?;
            (s.checks, s.grid_hashes)
        }
        Command::Probe => {
            let setup = commands::Setup::new(cfg)?;
            let s = commands::probe(cfg, &setup)?;
            art.json("probe.json", &s)?;
            println!("informational:");
            print_checks(&s.informational);
            (s.checks, s.grid_hashes)
        }
        Command::SmallSolution => {
            let setup = commands::Setup::new(cfg)?;
            let s = commands::small_solution(cfg, &setup)?;
            let rows: Vec<[f64; 3]> = s.rows.iter().map(|r| [r.eps, r.iterations as f64, r.l21]).collect();
            art.csv("small_solution.csv", &["eps", "iterations", "l21"], &rows)?;
            art.json("small_solution.json", &s)?;
            (s.checks, s.grid_hashes)
        }
    };
    print_checks(&checks);
    let pass = all_pass(&checks);
    let m = art.finish(command, cfg, &hashes, pass)?;
    println!("manifest: {}", m.display());
    Ok(pass)
}

pub fn resolve_config(cli: &Cli) -> crate::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tolerance_profile {
        cfg.tolerances = Tolerances::profile(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    }
    match execute(cli.command, &cfg) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_TOLERANCE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
