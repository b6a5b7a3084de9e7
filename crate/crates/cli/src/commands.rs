use std::fs::{self, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dvcm::distlike::{bbox_diagonal, bounding_box, grid_eval, DistanceKind, DistanceLike, DistanceLikeSpec, WeightedPointCloud};
use dvcm::estimators::{estimate_all, orient_normals, EstimatorParams, Orientation, SiteEstimate};
use dvcm::geom::{PolyBallModel, Vec3};
use dvcm::io::{
    read_cloud, write_cloud, write_estimates_csv_to, write_estimates_to, CloudFile, Length, QualityMode, RunConfig,
};
use dvcm::synth::{
    apply_noise, completed_keys, format_tiers, run_sweep, NoiseModel, NoiseSetting, ParamSetting, SweepConfig,
    SWEEP_HEADER,
};
use dvcm::vcm::{compute_field_with, mc_oracle_vcm_with, ProbeKernel};
use dvcm::Execution;

use crate::args::{outlier_list, Command, EstimateArgs, LevelsetArgs, OracleArgs, Orient, SweepArgs, SynthArgs};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_K: usize = 30;
const DEFAULT_RADIUS: Length = Length::Diameter(0.04);

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Normals(a) => estimate(a, Task::Normals),
        Command::Curvature(a) => estimate(a, Task::Curvature),
        Command::Features(a) => estimate(a, Task::Features),
        Command::Levelset(a) => levelset(a),
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Run(dvcm::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Config file values under explicit flags.
fn layered(config: Option<&Path>, flags: RunConfig) -> Result<RunConfig> {
    let base = match config {
        Some(p) => RunConfig::read(p).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    Ok(base.merge(flags))
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot start {n} threads: {e}")))?;
    }
    Ok(())
}

fn load_points(cfg: &RunConfig) -> Result<(PathBuf, Vec<Vec3>)> {
    let input = cfg.input.clone().ok_or_else(|| usage("no input cloud; pass --input or set `input` in --config"))?;
    let cloud = read_cloud(&input)?;
    if cloud.points.is_empty() {
        return Err(CliError::Run(dvcm::Error::EmptyCloud));
    }
    info!("read {} points from {}", cloud.points.len(), input.display());
    Ok((input, cloud.points))
}

/// Standard output when `path` is `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(out: &mut dyn Write, path: Option<&Path>) -> Result<()> {
    out.flush().map_err(|e| io_error(path.unwrap_or(Path::new("<stdout>")), e))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Task {
    Normals,
    Curvature,
    Features,
}

fn estimate(args: EstimateArgs, task: Task) -> Result<()> {
    let mut flags = args.common.to_config();
    flags.threshold = args.threshold;
    let cfg = layered(args.common.config.as_deref(), flags)?;
    let threshold = match (task, cfg.threshold) {
        (_, Some(t)) => t,
        (Task::Features, None) => return Err(usage("features needs --threshold (or `threshold` in --config)")),
        (_, None) => 1.0,
    };
    let (_, points) = load_points(&cfg)?;
    set_threads(cfg.threads)?;
    let diameter = bbox_diagonal(&points);
    let params = EstimatorParams::new(
        cfg.big_r.unwrap_or(DEFAULT_RADIUS).resolve(diameter),
        cfg.r.unwrap_or(DEFAULT_RADIUS).resolve(diameter),
    )
    .with_distance(cfg.distance.unwrap_or(DistanceKind::Witnessed), cfg.k.unwrap_or(DEFAULT_K))
    .with_polyball(cfg.polyball.unwrap_or_default())
    .with_threshold(threshold)
    .with_execution(Execution::Parallel);
    params.validate()?;
    info!(
        "{} distance, k = {}, R = {}, r = {}, diameter {diameter}",
        params.distance, params.k, params.big_r, params.r
    );
    let start = Instant::now();
    let mut est = estimate_all(&points, &params)?;
    info!("estimated in {:.2} s", start.elapsed().as_secs_f64());
    if args.orient == Orient::Outward {
        orient_normals(&mut est, Orientation::OutwardFromCentroid);
    }
    let invalid = est.iter().filter(|e| !e.valid).count();
    if invalid > 0 {
        log::warn!("{invalid} of {} points have no site within r; written with quality -1", est.len());
    }
    if task == Task::Features {
        let flagged = est.iter().filter(|e| e.is_feature).count();
        eprintln!("{flagged} of {} points flagged as features (threshold {threshold})", est.len());
    }
    let mode = cfg.quality.unwrap_or(match task {
        Task::Features => QualityMode::Feature,
        _ => QualityMode::Curvature,
    });
    write_estimate_file(cfg.output.as_deref(), &est, mode)
}

fn write_estimate_file(path: Option<&Path>, est: &[SiteEstimate], mode: QualityMode) -> Result<()> {
    let csv = path
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut out = sink(path)?;
    let label = path.unwrap_or(Path::new("<stdout>"));
    if csv {
        write_estimates_csv_to(&mut out, est)
    } else {
        write_estimates_to(&mut out, est, mode)
    }
    .map_err(|e| io_error(label, e))?;
    finish(&mut out, path)
}

fn levelset(args: LevelsetArgs) -> Result<()> {
    let cfg = layered(args.common.config.as_deref(), args.common.to_config())?;
    let (_, points) = load_points(&cfg)?;
    set_threads(cfg.threads)?;
    if args.dims == 0 {
        return Err(usage("--dims must be at least 1"));
    }
    if !(args.margin >= 0.0 && args.margin.is_finite()) {
        return Err(usage("--margin must be non-negative"));
    }
    let kind = cfg.distance.unwrap_or(DistanceKind::Witnessed);
    let k = if kind == DistanceKind::Plain { 1 } else { cfg.k.unwrap_or(DEFAULT_K) };
    let f = DistanceLike::build(DistanceLikeSpec::new(kind, k), &points)?;
    let (lo, hi) = bounding_box(&points).expect("cloud is nonempty");
    let pad = Vec3::splat(args.margin * bbox_diagonal(&points));
    let grid = grid_eval(&f, lo - pad, hi + pad, [args.dims; 3], Execution::Parallel)?;
    let mut out = sink(cfg.output.as_deref())?;
    grid.write_csv(&mut out)
        .map_err(|e| io_error(cfg.output.as_deref().unwrap_or(Path::new("<stdout>")), e))?;
    finish(&mut out, cfg.output.as_deref())
}

fn synth(args: SynthArgs) -> Result<()> {
    let flags = RunConfig {
        output: args.output.clone(),
        seed: args.seed,
        epsilon: args.epsilon,
        outliers: args.outliers.as_deref().map(dvcm::synth::parse_tiers).transpose()?,
        ..RunConfig::default()
    };
    let cfg = layered(args.config.as_deref(), flags)?;
    let shape = match args.diameter {
        Some(d) if d > 0.0 && d.is_finite() => args.shape.with_diameter(d),
        Some(d) => return Err(usage(format!("--diameter must be positive, got {d}"))),
        None => args.shape,
    };
    let seed = cfg.seed.unwrap_or(0);
    let sample = shape.sample(args.n, seed, args.sampler)?;
    let model = NoiseModel {
        epsilon: cfg.epsilon.unwrap_or(0.0),
        tiers: cfg.outliers.clone().unwrap_or_default(),
        seed,
    };
    let noisy = apply_noise(&sample.points, &model, shape.diameter())?;
    eprintln!(
        "{} points on {shape} (diameter {}), {} outliers ({})",
        args.n,
        shape.diameter(),
        noisy.outlier_count(),
        format_tiers(&model.tiers)
    );
    let cloud = CloudFile {
        points: noisy.points,
        normals: Some(sample.normals),
        quality: None,
    };
    match &cfg.output {
        Some(p) => write_cloud(p, &cloud)?,
        None => {
            let mut out = sink(None)?;
            dvcm::io::write_cloud_to(&mut out, &cloud, dvcm::io::CloudFormat::Xyz)
                .map_err(|e| io_error(Path::new("<stdout>"), e))?;
            finish(&mut out, None)?;
        }
    }
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("bad --seeds `{s}` (expected e.g. 1,2,3 or 1..5)"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn parse_fraction(s: &str) -> Result<f64> {
    let t = s.trim();
    let t = t.strip_suffix(['D', 'd']).unwrap_or(t);
    t.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or_else(|| usage(format!("bad radius `{s}` (expected a positive fraction of the diameter)")))
}

fn sweep(args: SweepArgs) -> Result<()> {
    set_threads(args.threads)?;
    let mut noise = Vec::new();
    for &epsilon in &args.epsilon {
        for tiers in outlier_list(&args.outliers)? {
            noise.push(NoiseSetting { epsilon, tiers });
        }
    }
    let radii = |v: &[String]| v.iter().map(|s| parse_fraction(s)).collect::<Result<Vec<f64>>>();
    let (big_rs, rs) = (radii(&args.big_r)?, radii(&args.r)?);
    let mut params: Vec<ParamSetting> = Vec::new();
    for &distance in &args.distance {
        for &k in &args.k {
            // k does not apply to the plain distance
            let k = if distance == DistanceKind::Plain { 1 } else { k };
            for &big_r in &big_rs {
                for &r in &rs {
                    let p = ParamSetting { distance, k, big_r, r };
                    if !params.contains(&p) {
                        params.push(p);
                    }
                }
            }
        }
    }
    let config = SweepConfig {
        shape: args.shape,
        n: args.n,
        sampler: args.sampler,
        seeds: parse_seeds(&args.seeds)?,
        noise,
        params,
        polyball: args.polyball,
        execution: Execution::Parallel,
    };
    let path = &args.output;
    let existing = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_error(path, e)),
    };
    let done = completed_keys(&existing);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    let write_err = |e: io::Error| dvcm::Error::Io {
        path: path.clone(),
        source: e,
    };
    if existing.trim().is_empty() {
        writeln!(out, "{SWEEP_HEADER}").map_err(write_err)?;
    } else if !existing.ends_with('\n') {
        writeln!(out).map_err(write_err)?;
    }
    let rows = run_sweep(&config, &done, |row| {
        writeln!(out, "{}", row.to_csv())
            .and_then(|_| out.flush())
            .map_err(write_err)?;
        info!("{}", row.to_csv());
        Ok(())
    })?;
    eprintln!("{} rows written, {} already present", rows.len(), done.len());
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    set_threads(args.threads)?;
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let r2 = args.big_r * args.big_r;
    let sites: Vec<Vec3> = (0..args.n)
        .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
        .collect();
    let weights: Vec<f64> = (0..args.n).map(|_| rng.random_range(0.0..=1.2 * r2)).collect();
    let center = rng.random_range(0..args.n);
    let cloud = WeightedPointCloud::new(sites.clone(), weights)?;
    let chi = ProbeKernel::ball(sites[center], args.r)?;
    let field = compute_field_with(cloud.clone(), args.big_r, args.polyball, Execution::Parallel)?;
    let fast = field.convolve(&chi);
    let mc = mc_oracle_vcm_with(&cloud, args.big_r, &chi, args.samples, args.seed, Execution::Parallel)?;
    let err = (fast - mc.tensor).frobenius_norm();
    let trace = mc.tensor.trace();
    let allowed = (3.0 * mc.frobenius_std_err()).max(0.02 * trace);
    let inscribed = matches!(args.polyball, PolyBallModel::Icosphere(_));
    println!(
        "{} sites, R = {}, probe radius {} around site {center}, polyball {}{}",
        args.n,
        args.big_r,
        args.r,
        args.polyball,
        if inscribed { " (inscribed)" } else { " (circumscribed)" }
    );
    println!("fast trace      {:.6e}", fast.trace());
    println!(
        "oracle trace    {trace:.6e} +- {:.1e} ({} samples, {} accepted)",
        mc.trace_std_err, mc.samples, mc.accepted
    );
    println!("frobenius error {err:.3e} (3 sigma {:.3e})", 3.0 * mc.frobenius_std_err());
    println!("relative error  {:.3e}", if trace > 0.0 { err / trace } else { 0.0 });
    println!("within max(3 sigma, 2% of trace): {}", if err <= allowed { "yes" } else { "no" });
    Ok(())
}

