use std::collections::HashSet;
use std::time::Instant;

use super::noise::{apply_noise, format_tiers, NoiseModel, OutlierTier};
use super::shapes::{Sampler, Shape};
use super::{angle_error, SurfaceSample};
use crate::distlike::DistanceKind;
use crate::error::{Error, Result};
use crate::estimators::{estimate_all, EstimatorParams};
use crate::exec::Execution;
use crate::geom::PolyBallModel;

pub const SWEEP_HEADER: &str =
    "shape,n,seed,noise_eps,outlier_spec,distance,k,R,r,mean_angle_deg,max_angle_deg,invalid_count,runtime_ms";

/// Noise amplitude (fraction of the diameter) and outlier tiers.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSetting {
    pub epsilon: f64,
    pub tiers: Vec<OutlierTier>,
}

/// Estimator settings; `big_r` and `r` are fractions of the diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSetting {
    pub distance: DistanceKind,
    pub k: usize,
    pub big_r: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub shape: Shape,
    pub n: usize,
    pub sampler: Sampler,
    pub seeds: Vec<u64>,
    pub noise: Vec<NoiseSetting>,
    pub params: Vec<ParamSetting>,
    pub polyball: PolyBallModel,
    pub execution: Execution,
}

/// One result line. `big_r` and `r` are absolute lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub shape: String,
    pub n: usize,
    pub seed: u64,
    pub noise_eps: f64,
    pub outlier_spec: String,
    pub distance: DistanceKind,
    pub k: usize,
    pub big_r: f64,
    pub r: f64,
    /// NaN when no inlier received a valid estimate.
    pub mean_angle_deg: f64,
    pub max_angle_deg: f64,
    pub invalid_count: usize,
    pub runtime_ms: u128,
}

impl SweepRow {
    /// The configuration columns, identifying the row for resumption.
    pub fn key(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.shape, self.n, self.seed, self.noise_eps, self.outlier_spec, self.distance, self.k, self.big_r, self.r
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.key(),
            self.mean_angle_deg,
            self.max_angle_deg,
            self.invalid_count,
            self.runtime_ms
        )
    }
}

/// Keys of the rows already present in a sweep CSV.
pub fn completed_keys(csv: &str) -> HashSet<String> {
    csv.lines()
        .filter(|l| !l.trim().is_empty() && *l != SWEEP_HEADER)
        .filter_map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            (fields.len() == 13).then(|| fields[..9].join(","))
        })
        .collect()
}

fn stream_seed(seed: u64, noise_index: usize) -> u64 {
    // splitmix64 of the pair, so every (seed, noise) cell gets its own stream
    let mut z = seed ^ (noise_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every (noise, parameter, seed) combination whose key is not in
/// `skip`, passing each finished row to `sink` in a fixed order.
///
/// All parameter settings see the same noisy cloud for a given seed and
/// noise setting. Errors are scored over the points that were not turned
/// into outliers.
pub fn run_sweep<F>(config: &SweepConfig, skip: &HashSet<String>, mut sink: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    if config.seeds.is_empty() || config.noise.is_empty() || config.params.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    let d = config.shape.diameter();
    let mut rows = Vec::new();
    for (ni, noise) in config.noise.iter().enumerate() {
        for &seed in &config.seeds {
            let mut cloud: Option<(SurfaceSample, super::NoisyCloud)> = None;
            for ps in &config.params {
                let mut row = SweepRow {
                    shape: config.shape.name().to_string(),
                    n: config.n,
                    seed,
                    noise_eps: noise.epsilon,
                    outlier_spec: format_tiers(&noise.tiers),
                    distance: ps.distance,
                    k: ps.k,
                    big_r: ps.big_r * d,
                    r: ps.r * d,
                    mean_angle_deg: f64::NAN,
                    max_angle_deg: f64::NAN,
                    invalid_count: 0,
                    runtime_ms: 0,
                };
                if skip.contains(&row.key()) {
                    continue;
                }
                if cloud.is_none() {
                    let clean = config.shape.sample(config.n, seed, config.sampler)?;
                    let model = NoiseModel {
                        epsilon: noise.epsilon,
                        tiers: noise.tiers.clone(),
                        seed: stream_seed(seed, ni),
                    };
                    let noisy = apply_noise(&clean.points, &model, d)?;
                    cloud = Some((clean, noisy));
                }
                let (clean, noisy) = cloud.as_ref().unwrap();
                let params = EstimatorParams::new(row.big_r, row.r)
                    .with_distance(ps.distance, ps.k)
                    .with_polyball(config.polyball)
                    .with_execution(config.execution);
                let start = Instant::now();
                let result = estimate_all(&noisy.points, &params);
                row.runtime_ms = start.elapsed().as_millis();
                match result {
                    Ok(est) => {
                        let (e, t): (Vec<_>, Vec<_>) = est
                            .into_iter()
                            .zip(&clean.normals)
                            .zip(&noisy.outlier)
                            .filter(|(_, o)| !**o)
                            .map(|((e, t), _)| (e, *t))
                            .unzip();
                        row.invalid_count = e.iter().filter(|x| !x.valid).count();
                        match angle_error(&e, &t) {
                            Ok(s) => {
                                row.mean_angle_deg = s.mean;
                                row.max_angle_deg = s.max;
                            }
                            Err(Error::NoValidEstimates) => {}
                            Err(err) => return Err(err),
                        }
                    }
                    Err(Error::DegenerateField) => row.invalid_count = config.n - noisy.outlier_count(),
                    Err(err) => return Err(err),
                }
                sink(&row)?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
