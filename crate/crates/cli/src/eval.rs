//! Batch pose-estimation protocol over a mesh collection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sphalign_core::{
    estimate_relative_pose, geodesic_distance, load_mesh, normalize_mesh, pose_stats, ray_cast,
    rotate_mesh, AlignOptions, Rotation, SphericalGrid, TriMesh,
};

use crate::config::{ExperimentConfig, PairMode};

pub const CSV_HEADER: &str = "category,mode,dof,median_deg,acc15,acc30,n";

#[derive(Debug, Clone, Serialize)]
pub struct PairResult {
    pub mesh: String,
    pub partner: String,
    pub category: String,
    pub rotation_index: usize,
    pub truth_euler_deg: [f64; 3],
    pub estimate_euler_deg: [f64; 3],
    pub error_deg: f64,
    pub degenerate: bool,
    #[serde(skip)]
    error_rad: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsRow {
    pub category: String,
    pub mode: String,
    pub dof: u8,
    pub median_deg: f64,
    pub acc15: f64,
    pub acc30: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    /// One row per category in name order, then an `all` row.
    pub rows: Vec<StatsRow>,
    pub pairs: Vec<PairResult>,
}

impl EvalReport {
    pub fn csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.4},{:.4},{:.4},{}",
                r.category, r.mode, r.dof, r.median_deg, r.acc15, r.acc30, r.n
            );
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:<9} {:>3} {:>9} {:>7} {:>7} {:>5}",
            "category", "mode", "dof", "med(deg)", "a@15", "a@30", "n"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:<9} {:>3} {:>9.2} {:>7.3} {:>7.3} {:>5}",
                r.category, r.mode, r.dof, r.median_deg, r.acc15, r.acc30, r.n
            );
        }
        s
    }
}

/// Category of a mesh file: the name of its parent directory.
pub fn category_of(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "uncategorized".to_string())
}

fn load_normalized(path: &Path) -> Result<TriMesh> {
    let mesh = load_mesh(path, None).with_context(|| format!("cannot load {}", path.display()))?;
    Ok(normalize_mesh(&mesh))
}

/// Runs the protocol. `workers = None` uses every available core.
pub fn run_eval(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
    force_symmetry: bool,
) -> Result<EvalReport> {
    let paths = cfg.mesh_paths()?;
    if paths.is_empty() {
        bail!("no meshes match {:?}", cfg.input.meshes);
    }
    let partners = partner_indices(&paths, cfg.experiment.mode);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            bail!("workers must be positive");
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    let per_mesh: Vec<Vec<PairResult>> = pool.install(|| {
        (0..paths.len())
            .into_par_iter()
            .map(|i| eval_mesh(cfg, &paths, i, partners[i]))
            .collect::<Result<Vec<_>>>()
    })?;
    let pairs: Vec<PairResult> = per_mesh.into_iter().flatten().collect();

    let symmetry = cfg.experiment.symmetry || force_symmetry;
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in &pairs {
        groups.entry(&p.category).or_default().push(p.error_rad);
    }
    let all: Vec<f64> = pairs.iter().map(|p| p.error_rad).collect();
    let mut rows = Vec::new();
    for (name, errs) in groups.iter().map(|(k, v)| (*k, v)).chain([("all", &all)]) {
        let s = pose_stats(errs, symmetry)?;
        rows.push(StatsRow {
            category: name.to_string(),
            mode: cfg.experiment.mode.name().to_string(),
            dof: cfg.experiment.dof,
            median_deg: s.median_deg,
            acc15: s.acc_at_15,
            acc30: s.acc_at_30,
            n: s.count,
        });
    }
    Ok(EvalReport { rows, pairs })
}

fn partner_indices(paths: &[PathBuf], mode: PairMode) -> Vec<usize> {
    match mode {
        PairMode::Instance => (0..paths.len()).collect(),
        PairMode::Category => {
            let mut by_cat: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, p) in paths.iter().enumerate() {
                by_cat.entry(category_of(p)).or_default().push(i);
            }
            let mut out = vec![0; paths.len()];
            for members in by_cat.values() {
                for (k, &i) in members.iter().enumerate() {
                    out[i] = members[(k + 1) % members.len()];
                }
            }
            out
        }
    }
}

fn eval_mesh(
    cfg: &ExperimentConfig,
    paths: &[PathBuf],
    index: usize,
    partner: usize,
) -> Result<Vec<PairResult>> {
    let e = &cfg.experiment;
    let grid = SphericalGrid::shared(e.bandwidth)?;
    let options = AlignOptions {
        upsample_factor: e.upsample,
        refine: e.refine,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
    rng.set_stream(index as u64);

    let source = load_normalized(&paths[index])?;
    let target = if partner == index {
        source.clone()
    } else {
        load_normalized(&paths[partner])?
    };
    let f1 = ray_cast(&source, &grid)?;
    let deg = |r: &Rotation| {
        let a = r.euler();
        [
            a.alpha.to_degrees(),
            a.beta.to_degrees(),
            a.gamma.to_degrees(),
        ]
    };
    (0..e.rotations_per_mesh)
        .map(|k| {
            let truth = if e.dof == 3 {
                Rotation::random(&mut rng)
            } else {
                Rotation::random_two_dof(&mut rng)
            };
            let f2 = ray_cast(&rotate_mesh(&target, &truth), &grid)?;
            let est = estimate_relative_pose(&f1, &f2, &options)?;
            let err = geodesic_distance(&est.rotation, &truth)?;
            Ok(PairResult {
                mesh: paths[index].display().to_string(),
                partner: paths[partner].display().to_string(),
                category: category_of(&paths[index]),
                rotation_index: k,
                truth_euler_deg: deg(&truth),
                estimate_euler_deg: deg(&est.rotation),
                error_deg: err.to_degrees(),
                degenerate: est.degenerate,
                error_rad: err,
            })
        })
        .collect()
}
