//! Evaluation config files (TOML).
//!
//! ```toml
//! [experiment]
//! seed = 7
//! bandwidth = 32
//! upsample = 1
//! refine = true
//! symmetry = false
//! dof = 3
//! rotations_per_mesh = 3
//! mode = "instance"
//!
//! [input]
//! meshes = ["meshes/**/*.off"]
//!
//! [output]
//! csv = "results.csv"
//! json = "results.json"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// Each mesh against rotated copies of itself.
    Instance,
    /// Each mesh against rotated copies of the next mesh in its category.
    Category,
}

impl PairMode {
    pub fn name(self) -> &'static str {
        match self {
            PairMode::Instance => "instance",
            PairMode::Category => "category",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub seed: u64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    #[serde(default = "default_upsample")]
    pub upsample: usize,
    #[serde(default = "default_true")]
    pub refine: bool,
    #[serde(default)]
    pub symmetry: bool,
    #[serde(default = "default_dof")]
    pub dof: u8,
    #[serde(default = "default_rotations")]
    pub rotations_per_mesh: usize,
    #[serde(default = "default_mode")]
    pub mode: PairMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Input {
    pub meshes: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub input: Input,
    #[serde(default)]
    pub output: Output,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_bandwidth() -> usize {
    32
}
fn default_upsample() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_dof() -> u8 {
    3
}
fn default_rotations() -> usize {
    3
}
fn default_mode() -> PairMode {
    PairMode::Instance
}

pub const MAX_BANDWIDTH: usize = 128;
pub const MAX_UPSAMPLE: usize = 8;

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).context("invalid config")?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if !(1..=MAX_BANDWIDTH).contains(&e.bandwidth) {
            bail!(
                "bandwidth must be in 1..={MAX_BANDWIDTH}, got {}",
                e.bandwidth
            );
        }
        if !(1..=MAX_UPSAMPLE).contains(&e.upsample) {
            bail!("upsample must be in 1..={MAX_UPSAMPLE}, got {}", e.upsample);
        }
        if e.bandwidth * e.upsample > MAX_BANDWIDTH {
            bail!("bandwidth × upsample must not exceed {MAX_BANDWIDTH}");
        }
        if !matches!(e.dof, 2 | 3) {
            bail!("dof must be 2 or 3, got {}", e.dof);
        }
        if e.rotations_per_mesh == 0 {
            bail!("rotations_per_mesh must be positive");
        }
        if self.input.meshes.is_empty() {
            bail!("input.meshes lists no patterns");
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Matching mesh files, sorted and deduplicated.
    pub fn mesh_paths(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for pattern in &self.input.meshes {
            let full = self.resolve(Path::new(pattern));
            let full = full.to_string_lossy();
            for entry in glob::glob(&full).with_context(|| format!("bad pattern {pattern:?}"))? {
                out.push(entry?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]\nseed = 1\n[input]\nmeshes = [\"*.off\"]\n";

    #[test]
    fn defaults() {
        let c = ExperimentConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        let e = &c.experiment;
        assert_eq!(
            (e.bandwidth, e.upsample, e.dof, e.rotations_per_mesh),
            (32, 1, 3, 3)
        );
        assert!(e.refine && !e.symmetry);
        assert_eq!(e.mode, PairMode::Instance);
        assert_eq!(c.resolve(Path::new("x.csv")), Path::new("/data/x.csv"));
    }

    #[test]
    fn rejects_bad_values() {
        let no_seed = "[experiment]\n[input]\nmeshes = [\"a\"]\n";
        assert!(ExperimentConfig::parse(no_seed, Path::new(".")).is_err());
        for bad in [
            "dof = 4",
            "bandwidth = 0",
            "upsample = 0",
            "rotations_per_mesh = 0",
            "colour = 1",
        ] {
            let text = MINIMAL.replace("seed = 1", &format!("seed = 1\n{bad}"));
            assert!(
                ExperimentConfig::parse(&text, Path::new(".")).is_err(),
                "{bad}"
            );
        }
    }
}
