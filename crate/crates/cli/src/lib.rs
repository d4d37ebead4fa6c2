//! Command-line front end: ray-casting, alignment, batch evaluation,
//! equivariance audits and fixture generation.

pub mod commands;
pub mod config;
pub mod eval;

use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};

/// How a command finished when it did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The alignment is ambiguous; reported with exit code 1.
    Degenerate,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Degenerate => 1,
        }
    }
}

/// Exit code for input and runtime errors.
pub const ERROR_EXIT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sphalign",
    version,
    about = "Spherical signal alignment toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Full,
    Linear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ray-cast a mesh (OFF or OBJ) to a spherical signal file.
    Raycast {
        mesh: PathBuf,
        #[arg(long, short, default_value_t = 32)]
        bandwidth: usize,
        #[arg(long, short)]
        out: PathBuf,
        /// Rays per cell along each axis.
        #[arg(long, default_value_t = 1)]
        supersample: usize,
    },
    /// Estimate R with B ≈ Λ_R A. Inputs are signal files (.s2sg) or meshes.
    Align {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 4)]
        upsample: usize,
        #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = ArgAction::Set)]
        refine: bool,
        /// Fold the error against --expect for half-turn symmetric objects.
        #[arg(long)]
        sym: bool,
        /// Known rotation as ZYZ Euler degrees "alpha,beta,gamma".
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<String>,
        /// Bandwidth used when ray-casting mesh inputs.
        #[arg(long, default_value_t = 32)]
        bandwidth: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run the pose-estimation protocol described by a TOML config.
    Eval {
        config: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Fold errors for half-turn symmetry regardless of the config.
        #[arg(long)]
        sym: bool,
    },
    /// Monte-Carlo equivariance error of a network at each tap.
    EquivAudit {
        weights: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Bandlimit of the random inputs.
        #[arg(long, default_value_t = 32)]
        bandwidth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to these taps (repeatable).
        #[arg(long)]
        tap: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Write procedural watertight meshes as OFF files, one directory per shape.
    GenMeshes {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated shapes among sphere, box, ellipsoid, cylinder.
        #[arg(long, default_value = "sphere,box,ellipsoid")]
        shapes: String,
        #[arg(long, default_value_t = 4)]
        subdivisions: u32,
    },
    /// Write a random-weight network in the S2CW container.
    GenWeights {
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ArchArg::Full)]
        arch: ArchArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    use commands::*;
    match cli.command {
        Command::Raycast {
            mesh,
            bandwidth,
            out,
            supersample,
        } => raycast(&mesh, bandwidth, &out, supersample),
        Command::Align {
            a,
            b,
            upsample,
            refine,
            sym,
            expect,
            bandwidth,
            json,
        } => align(&AlignArgs {
            a,
            b,
            upsample,
            refine,
            sym,
            expect,
            bandwidth,
            json,
        }),
        Command::Eval {
            config,
            workers,
            sym,
        } => eval_command(&config, workers, sym),
        Command::EquivAudit {
            weights,
            trials,
            bandwidth,
            seed,
            tap,
            json,
        } => equiv_audit(&weights, trials, bandwidth, seed, &tap, json),
        Command::GenMeshes {
            out_dir,
            count,
            seed,
            shapes,
            subdivisions,
        } => gen_meshes(&out_dir, count, seed, &shapes, subdivisions),
        Command::GenWeights { out, arch, seed } => gen_weights(&out, arch, seed),
    }
}
