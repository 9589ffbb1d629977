//! Flags, the optional TOML config and their resolution. An explicit flag
//! wins over `ISOGAUSS_OUT` (for the output directory), which wins over the
//! config file, which wins over the built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "isogauss", version, about = "Gaussian fermion channels and isometric tensor network states")]
pub struct Cli {
    /// TOML file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the manifest [default: isogauss-out].
    #[arg(long, global = true, env = "ISOGAUSS_OUT")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check antisymmetry and CPTP of a channel file.
    ValidateChannel { file: Option<PathBuf> },
    /// Preserved/dissipative split, steady state and convergence rate.
    SteadyState {
        file: Option<PathBuf>,
        /// Initial correlation matrix [default: maximally mixed].
        #[arg(long)]
        boundary: Option<PathBuf>,
        /// Steps for the convergence fit [default: 2000].
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Bulk entanglement spectrum of a brick-wall circuit of a two-site channel.
    BrickwallSpectrum {
        file: Option<PathBuf>,
        /// Momentum grid size [default: 256].
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Real-space correlation decay of a brick-wall steady state against 1/ln(1/r).
    Decay {
        file: Option<PathBuf>,
        /// Momentum grid size [default: 1024].
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Validate a tensor and analyse the channel it defines.
    TensorAudit {
        file: Option<PathBuf>,
        /// Momentum grid size for light-like tensors [default: 256].
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Cut entanglement spectrum of the p+ip ground state on a cylinder.
    PipSpectrum {
        #[arg(long)]
        lx: Option<usize>,
        #[arg(long)]
        ly: Option<usize>,
        #[arg(long)]
        ycut: Option<usize>,
        /// Chemical potential [default: 2].
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Chern number and edge-mode count of `pip` or a model file.
    Chern {
        #[arg(long)]
        model: Option<String>,
        /// Chemical potential for `pip` [default: 2].
        #[arg(long)]
        mu: Option<f64>,
        /// Brillouin-zone grid for ν [default: 24].
        #[arg(long)]
        grid: Option<usize>,
        /// Strip rows for ν_edge [default: 24].
        #[arg(long)]
        ly: Option<usize>,
        /// Initial q_x grid for ν_edge [default: 96].
        #[arg(long)]
        nq: Option<usize>,
    },
    /// Random tiny circuits checked against the channel-state isospectral relation.
    OracleCheck {
        #[arg(long)]
        seed: Option<u64>,
        /// Number of circuits [default: 25].
        #[arg(long)]
        circuits: Option<usize>,
    },
}

/// Every key is optional; unknown keys are rejected so typos surface.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
    pub t_max: Option<usize>,
    pub grid: Option<usize>,
    pub lx: Option<usize>,
    pub ly: Option<usize>,
    pub ycut: Option<usize>,
    pub mu: Option<f64>,
    pub model: Option<String>,
    pub nq: Option<usize>,
    pub seed: Option<u64>,
    pub circuits: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn input(flag: &Option<PathBuf>, config: &FileConfig) -> Result<PathBuf, Failure> {
    flag.clone()
        .or_else(|| config.input.clone())
        .ok_or_else(|| Failure::Usage("no input file given (positional argument or `input` in the config)".into()))
}

pub fn out_dir(cli: &Cli, config: &FileConfig) -> PathBuf {
    pick(cli.out.clone(), config.out.clone(), PathBuf::from("isogauss-out"))
}
