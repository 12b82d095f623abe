//! Run configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use geowl_core::symmetry::{DEFAULT_EPS_GRID, DEFAULT_SCAN_DECIMALS};
use geowl_core::{Quantizer, RefineConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Every field may be omitted from the file; the defaults are listed per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Inner rounds of the nested engines. Default 5.
    pub n_in: usize,
    /// Outer rounds of the nested engines. Default 1.
    pub n_out: usize,
    /// Subgraph radius. Default unbounded; `inf` in the file also means unbounded.
    pub r_sub: Option<f64>,
    /// Interaction cutoff. Default unbounded.
    pub r_cutoff: Option<f64>,
    /// Stabilization cap. Default `2n + 4` (node engines) or `2n + 6` (edge engines).
    pub max_iters: Option<usize>,
    /// Distance quantization decimals for refinement and symmetry. Default 9.
    pub decimals: u32,
    /// Center coincidence tolerance. Default 1e-6.
    pub eps: f64,
    /// Seed for randomized commands. No default; `gen-counterexamples` requires it.
    pub seed: Option<u64>,
    /// Worker threads. Default: all cores, capped by `GEOWL_THREADS`.
    pub threads: Option<usize>,
    /// Report path. Default stdout.
    pub out: Option<PathBuf>,
    /// Quantization decimals used by `scan`. Default 2.
    pub scan_decimals: u32,
    /// Tolerances used by `scan`. Default 1e-6, 1e-5, ..., 1e-1.
    pub eps_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = RefineConfig::default();
        RunConfig {
            n_in: r.n_in,
            n_out: r.n_out,
            r_sub: r.r_sub,
            r_cutoff: r.r_cutoff,
            max_iters: r.max_iters,
            decimals: r.quantizer.decimals(),
            eps: 1e-6,
            seed: None,
            threads: None,
            out: None,
            scan_decimals: DEFAULT_SCAN_DECIMALS,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
        }
    }
}

fn finite_radius(r: Option<f64>) -> Option<f64> {
    r.filter(|x| !(x.is_infinite() && *x > 0.0))
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_path_buf(), reason: e.to_string() })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        cfg.r_sub = finite_radius(cfg.r_sub);
        cfg.r_cutoff = finite_radius(cfg.r_cutoff);
        Ok(cfg)
    }

    pub fn quantizer(&self) -> Result<Quantizer, CliError> {
        Ok(Quantizer::new(self.decimals)?)
    }

    pub fn refine(&self) -> Result<RefineConfig, CliError> {
        let cfg = RefineConfig {
            n_in: self.n_in,
            n_out: self.n_out,
            r_sub: finite_radius(self.r_sub),
            r_cutoff: finite_radius(self.r_cutoff),
            max_iters: self.max_iters,
            quantizer: self.quantizer()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.refine()?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(CliError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Quantizer::new(self.scan_decimals)?;
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(CliError::Config("eps_grid must be a non-empty list of positive tolerances".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Thread count after applying the `GEOWL_THREADS` cap; `None` leaves the rayon default.
    pub fn effective_threads(&self) -> Result<Option<usize>, CliError> {
        let cap = match std::env::var("GEOWL_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| CliError::Config(format!("GEOWL_THREADS must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        };
        Ok(match (self.threads, cap) {
            (Some(t), Some(c)) => Some(t.min(c)),
            (t, c) => t.or(c),
        })
    }
}
