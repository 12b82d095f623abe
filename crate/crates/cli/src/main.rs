//! `geowl`: fingerprints, distinguishability verdicts, symmetry scans,
//! counterexample generation and reconstruction on point cloud files.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geowl_core::counterexamples::{AugmentMode, PolyhedronKind};
use geowl_core::{Model, SymmetryGroup};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "geowl", version, about = "Invariant refinement fingerprints for 3D point clouds")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (capped by GEOWL_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct RefineArgs {
    #[arg(long)]
    n_in: Option<usize>,
    #[arg(long)]
    n_out: Option<usize>,
    /// Subgraph radius (`inf` for unbounded).
    #[arg(long)]
    r_sub: Option<f64>,
    /// Interaction cutoff (`inf` for unbounded).
    #[arg(long)]
    r_cutoff: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Distance quantization decimals.
    #[arg(long)]
    decimals: Option<u32>,
}

impl RefineArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.n_in {
            cfg.n_in = v;
        }
        if let Some(v) = self.n_out {
            cfg.n_out = v;
        }
        if let Some(v) = self.r_sub {
            cfg.r_sub = Some(v);
        }
        if let Some(v) = self.r_cutoff {
            cfg.r_cutoff = Some(v);
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = Some(v);
        }
        if let Some(v) = self.decimals {
            cfg.decimals = v;
        }
    }
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse::<Model>().map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<PolyhedronKind, String> {
    s.parse::<PolyhedronKind>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<AugmentMode, String> {
    s.parse::<AugmentMode>().map_err(|e| e.to_string())
}

fn parse_group(s: &str) -> Result<SymmetryGroup, String> {
    match s.to_ascii_lowercase().as_str() {
        "e3" => Ok(SymmetryGroup::E3),
        "se3" => Ok(SymmetryGroup::SE3),
        _ => Err(format!("unknown group {s:?}; expected e3 or se3")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fingerprint every cloud in a file.
    Fingerprint {
        #[arg(long, value_parser = parse_model)]
        model: Model,
        #[command(flatten)]
        refine: RefineArgs,
        file: PathBuf,
    },
    /// Decide whether a model separates two clouds (exit 0) or not (exit 3).
    Distinguish {
        #[arg(long, value_parser = parse_model)]
        model: Model,
        #[command(flatten)]
        refine: RefineArgs,
        /// Two single-cloud files, or one file holding a pair or two frames.
        #[arg(num_args = 1..=2, required = true)]
        files: Vec<PathBuf>,
    },
    /// Center-coincidence symmetry of every cloud in a file.
    Symmetry {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        decimals: Option<u32>,
        file: PathBuf,
    },
    /// Proportion of symmetric clouds at each tolerance.
    Scan {
        #[arg(long = "eps-grid", visible_alias = "eps", value_delimiter = ',')]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, visible_alias = "r")]
        decimals: Option<u32>,
        /// Emit the table as CSV instead of a JSON report.
        #[arg(long)]
        csv: bool,
        /// A cloud file or a directory of `.xyz` / `.json` files.
        path: PathBuf,
    },
    /// Search polyhedral vertex subsets for pairs that distance refinement cannot separate.
    GenCounterexamples {
        #[arg(long, value_parser = parse_kind)]
        kind: PolyhedronKind,
        /// Add a concentric inner polyhedron to the vertex space.
        #[arg(long, value_parser = parse_kind)]
        inner_kind: Option<PolyhedronKind>,
        /// Inner circumradius relative to the outer one.
        #[arg(long, requires = "inner_kind")]
        ratio: Option<f64>,
        #[arg(long)]
        subset_size: usize,
        /// Maximum number of subsets to enumerate.
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Nest each pair into concentric copies: origin, complementary or all.
        #[arg(long, value_parser = parse_mode)]
        augment: Option<AugmentMode>,
        #[arg(long, default_value_t = 2, requires = "augment")]
        copies: usize,
        /// Write each pair to its own JSON file in this directory.
        #[arg(long)]
        emit_dir: Option<PathBuf>,
        #[command(flatten)]
        refine: RefineArgs,
    },
    /// Recover coordinates from two-anchor distances and report a canonical form.
    Reconstruct {
        #[arg(long, value_parser = parse_group, default_value = "e3")]
        group: SymmetryGroup,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        decimals: Option<u32>,
        file: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let common = &cli.common;
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    match &cli.command {
        Command::Fingerprint { refine, .. } | Command::Distinguish { refine, .. } => refine.apply(&mut cfg),
        Command::GenCounterexamples { refine, seed, .. } => {
            refine.apply(&mut cfg);
            if let Some(s) = seed {
                cfg.seed = Some(*s);
            }
        }
        Command::Symmetry { eps, decimals, .. } | Command::Reconstruct { eps, decimals, .. } => {
            if let Some(e) = eps {
                cfg.eps = *e;
            }
            if let Some(d) = decimals {
                cfg.decimals = *d;
            }
        }
        Command::Scan { eps_grid, decimals, .. } => {
            if let Some(g) = eps_grid {
                cfg.eps_grid = g.clone();
            }
            if let Some(d) = decimals {
                cfg.scan_decimals = *d;
            }
        }
    }
    cfg.validate()?;
    if let Some(n) = cfg.effective_threads()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Fingerprint { model, file, .. } => commands::fingerprint(&cfg, model, &file),
        Command::Distinguish { model, files, .. } => commands::distinguish(&cfg, model, &files),
        Command::Symmetry { file, .. } => commands::symmetry(&cfg, &file),
        Command::Scan { csv, path, .. } => commands::scan(&cfg, &path, csv),
        Command::GenCounterexamples { kind, inner_kind, ratio, subset_size, budget, augment, copies, emit_dir, .. } => {
            let opts = commands::GenOptions { kind, inner_kind, ratio, subset_size, budget, augment, copies, emit_dir };
            commands::gen_counterexamples(&cfg, &opts)
        }
        Command::Reconstruct { group, file, .. } => commands::reconstruct(&cfg, group, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
