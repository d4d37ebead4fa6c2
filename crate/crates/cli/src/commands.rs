use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sphalign_core::cnn::{equivariance_error, load_weights, save_weights, Architecture};
use sphalign_core::mesh::synth::{random_shape, Shape};
use sphalign_core::mesh::{ray_cast_with, write_off, RayCastOptions};
use sphalign_core::sht::synthesize;
use sphalign_core::{
    estimate_relative_pose, geodesic_distance, load_mesh, load_signal, normalize_mesh, save_signal,
    symmetry_error, AlignOptions, HarmonicCoeffs, Rotation, SphericalGrid, SphericalSignal,
    TriMesh,
};

use crate::config::ExperimentConfig;
use crate::eval::run_eval;
use crate::{ArchArg, Outcome};

fn is_signal_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s2sg"))
}

fn read_mesh(path: &Path) -> Result<TriMesh> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    load_mesh(path, None).with_context(|| format!("cannot load mesh {}", path.display()))
}

/// Loads a signal file, or ray-casts a mesh. Meshes that already fit the
/// unit sphere are used as-is so that pre-aligned pairs keep their frame.
pub fn load_input(path: &Path, bandwidth: usize) -> Result<SphericalSignal> {
    if is_signal_file(path) {
        if !path.exists() {
            bail!("{} does not exist", path.display());
        }
        return load_signal(path).with_context(|| format!("cannot read signal {}", path.display()));
    }
    let mut mesh = read_mesh(path)?;
    if mesh.max_radius() > 1.0 {
        mesh = normalize_mesh(&mesh);
    }
    let grid = SphericalGrid::shared(bandwidth)?;
    Ok(sphalign_core::ray_cast(&mesh, &grid)?)
}

pub fn raycast(mesh: &Path, bandwidth: usize, out: &Path, supersample: usize) -> Result<Outcome> {
    let m = normalize_mesh(&read_mesh(mesh)?);
    let grid = SphericalGrid::shared(bandwidth)?;
    let sig = ray_cast_with(&m, &grid, &RayCastOptions { supersample })?;
    save_signal(&sig, out).with_context(|| format!("cannot write {}", out.display()))?;
    let v = sig.values();
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "bandwidth {bandwidth}, grid {n}x{n}, 1 channel, {} triangles",
        m.faces().len(),
        n = grid.resolution()
    );
    println!("ray length min {lo:.6} max {hi:.6} mean {mean:.6}");
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}

pub struct AlignArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub upsample: usize,
    pub refine: bool,
    pub sym: bool,
    pub expect: Option<String>,
    pub bandwidth: usize,
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct AlignReport {
    euler_zyz_deg: [f64; 3],
    matrix: [[f64; 3]; 3],
    peak_value: f64,
    peak_margin: f64,
    degenerate: bool,
    upsample: usize,
    refine: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_deg: Option<f64>,
}

fn parse_euler_deg(s: &str) -> Result<Rotation> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--expect wants \"alpha,beta,gamma\" in degrees, got {s:?}"))?;
    let [a, b, c] = parts[..] else {
        bail!("--expect wants three angles, got {}", parts.len());
    };
    Ok(Rotation::from_euler(
        a.to_radians(),
        b.to_radians(),
        c.to_radians(),
    ))
}

pub fn align(args: &AlignArgs) -> Result<Outcome> {
    let expect = args.expect.as_deref().map(parse_euler_deg).transpose()?;
    let f1 = load_input(&args.a, args.bandwidth)?;
    let f2 = load_input(&args.b, args.bandwidth)?;
    if f1.resolution() != f2.resolution() || f1.channels() != f2.channels() {
        bail!(
            "incompatible inputs: {n}x{n}x{k} vs {m}x{m}x{j}",
            n = f1.resolution(),
            k = f1.channels(),
            m = f2.resolution(),
            j = f2.channels()
        );
    }
    let options = AlignOptions {
        upsample_factor: args.upsample,
        refine: args.refine,
        ..Default::default()
    };
    let est = estimate_relative_pose(&f1, &f2, &options)?;
    let e = est.rotation.euler();
    let m = est.rotation.matrix();
    let error_deg = match expect {
        Some(truth) => {
            let err = geodesic_distance(&est.rotation, &truth)?;
            let err = if args.sym { symmetry_error(err)? } else { err };
            Some(err.to_degrees())
        }
        None => None,
    };
    let report = AlignReport {
        euler_zyz_deg: [
            e.alpha.to_degrees(),
            e.beta.to_degrees(),
            e.gamma.to_degrees(),
        ],
        matrix: [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]),
        peak_value: est.peak.value,
        peak_margin: est.peak.margin,
        degenerate: est.degenerate,
        upsample: args.upsample,
        refine: args.refine,
        error_deg,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        let [a, b, c] = report.euler_zyz_deg;
        println!("euler_zyz_deg {a:.4} {b:.4} {c:.4}");
        println!("matrix");
        for row in &report.matrix {
            println!("  {:>10.6} {:>10.6} {:>10.6}", row[0], row[1], row[2]);
        }
        println!(
            "peak {:.6e} margin {:.4}",
            report.peak_value, report.peak_margin
        );
        println!(
            "degenerate {}",
            if report.degenerate { "yes" } else { "no" }
        );
        if let Some(err) = report.error_deg {
            println!(
                "error_deg {err:.4}{}",
                if args.sym { " (symmetric)" } else { "" }
            );
        }
    }
    Ok(if est.degenerate {
        Outcome::Degenerate
    } else {
        Outcome::Success
    })
}

pub fn eval_command(config: &Path, workers: Option<usize>, sym: bool) -> Result<Outcome> {
    let cfg = ExperimentConfig::load(config)?;
    let report = run_eval(&cfg, workers, sym)?;
    let csv = report.csv();
    print!("{}", report.table());
    if let Some(p) = &cfg.output.csv {
        let p = cfg.resolve(p);
        fs::write(&p, &csv).with_context(|| format!("cannot write {}", p.display()))?;
        println!("wrote {}", p.display());
    } else {
        print!("\n{csv}");
    }
    if let Some(p) = &cfg.output.json {
        let p = cfg.resolve(p);
        fs::write(&p, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("cannot write {}", p.display()))?;
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
pub struct TapSummary {
    pub tap: String,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    pub trials: usize,
}

/// Lower-rounded median and nearest-rank 95th percentile.
fn summarize(tap: &str, mut errs: Vec<f64>) -> TapSummary {
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    let rank95 = ((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1;
    TapSummary {
        tap: tap.to_string(),
        median: errs[(n - 1) / 2],
        p95: errs[rank95],
        max: errs[n - 1],
        trials: n,
    }
}

/// Equivariance error statistics per tap over random bandlimited inputs and
/// Haar-random rotations.
pub fn audit(
    weights: &Path,
    trials: usize,
    bandwidth: usize,
    seed: u64,
    taps: &[String],
) -> Result<Vec<TapSummary>> {
    if trials == 0 {
        bail!("invalid argument: trials must be positive");
    }
    let net =
        load_weights(weights).with_context(|| format!("cannot load {}", weights.display()))?;
    let grid_b = net.input_resolution() / 2;
    if bandwidth == 0 || bandwidth > grid_b {
        bail!("invalid argument: bandwidth must be in 1..={grid_b} for this network");
    }
    let names: Vec<String> = if taps.is_empty() {
        net.taps().iter().map(|t| t.name.clone()).collect()
    } else {
        taps.to_vec()
    };
    if names.is_empty() {
        bail!("the network declares no taps");
    }
    let grid = SphericalGrid::shared(grid_b)?;
    let mut errs = vec![Vec::with_capacity(trials); names.len()];
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let c = HarmonicCoeffs::random_real(
            &mut rng,
            grid.bandwidth(),
            net.input_channels(),
            bandwidth,
            1.0,
        );
        let x = synthesize(&c)?;
        let r = Rotation::random(&mut rng);
        for (name, out) in names.iter().zip(errs.iter_mut()) {
            out.push(equivariance_error(&net, &x, &r, name)?);
        }
    }
    Ok(names
        .iter()
        .zip(errs)
        .map(|(n, e)| summarize(n, e))
        .collect())
}

pub fn equiv_audit(
    weights: &Path,
    trials: usize,
    bandwidth: usize,
    seed: u64,
    taps: &[String],
    json: bool,
) -> Result<Outcome> {
    let rows = audit(weights, trials, bandwidth, seed, taps)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!(
            "{:<12} {:>12} {:>12} {:>12} {:>7}",
            "tap", "median", "p95", "max", "trials"
        );
        for r in &rows {
            println!(
                "{:<12} {:>12.4e} {:>12.4e} {:>12.4e} {:>7}",
                r.tap, r.median, r.p95, r.max, r.trials
            );
        }
    }
    Ok(Outcome::Success)
}

fn parse_shape(s: &str) -> Result<Shape> {
    Shape::ALL
        .into_iter()
        .find(|sh| sh.name() == s)
        .with_context(|| format!("unknown shape {s:?}"))
}

pub fn gen_meshes(
    dir: &Path,
    count: usize,
    seed: u64,
    shapes: &str,
    subdivisions: u32,
) -> Result<Outcome> {
    let shapes: Vec<Shape> = shapes
        .split(',')
        .map(|s| parse_shape(s.trim()))
        .collect::<Result<_>>()?;
    if shapes.is_empty() || count == 0 {
        bail!("nothing to generate");
    }
    if subdivisions > 6 {
        bail!("subdivisions must be at most 6");
    }
    for k in 0..count {
        let shape = shapes[k % shapes.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mesh = random_shape(shape, &mut rng, subdivisions);
        let sub = dir.join(shape.name());
        fs::create_dir_all(&sub).with_context(|| format!("cannot create {}", sub.display()))?;
        let path = sub.join(format!("{}_{k:03}.off", shape.name()));
        fs::write(&path, write_off(&mesh))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!("wrote {count} meshes under {}", dir.display());
    Ok(Outcome::Success)
}

pub fn gen_weights(out: &Path, arch: ArchArg, seed: u64) -> Result<Outcome> {
    let arch = match arch {
        ArchArg::Full => Architecture::Full,
        ArchArg::Linear => Architecture::Linear,
    };
    let net = arch.random(seed)?;
    save_weights(&net, out).with_context(|| format!("cannot write {}", out.display()))?;
    let params: usize = net
        .layers()
        .iter()
        .flat_map(|l| &l.tensors)
        .map(|t| t.data.len())
        .sum();
    println!(
        "{} network: {} layers, {params} parameters, taps {}",
        arch.name(),
        net.layers().len(),
        net.taps()
            .iter()
            .map(|t| t.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", out.display());
    Ok(Outcome::Success)
}
