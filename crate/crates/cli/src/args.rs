use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dvcm::distlike::DistanceKind;
use dvcm::geom::PolyBallModel;
use dvcm::io::{Length, RunConfig};
use dvcm::synth::{OutlierTier, Sampler, Shape};

#[derive(Debug, Parser)]
#[command(name = "dvcm", version, about = "Normals, curvature and sharp features of noisy point clouds")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a normal at every input point.
    Normals(EstimateArgs),
    /// Estimate principal directions and mean absolute curvature.
    Curvature(EstimateArgs),
    /// Score and flag sharp-feature points (needs --threshold).
    Features(EstimateArgs),
    /// Sample a distance-like function of the cloud on a regular grid.
    Levelset(LevelsetArgs),
    /// Sample a synthetic shape, optionally with noise and outliers.
    Synth(SynthArgs),
    /// Score normal estimates over a grid of noise and parameter settings.
    Sweep(SweepArgs),
    /// Compare the fast VCM with a Monte-Carlo estimate on a random cloud.
    Oracle(OracleArgs),
}

/// Flags shared by the commands that read a cloud. Anything left unset
/// falls back to `--config`, then to the built-in default.
#[derive(Debug, Args)]
pub struct Common {
    /// Point cloud (.xyz, .ply or .obj).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Distance-like function: plain, witnessed or median (levelset also
    /// takes kdist and full-k).
    #[arg(long, value_parser = parse_any_distance)]
    pub distance: Option<DistanceKind>,
    /// Number of neighbors of the witnessed and median distances.
    #[arg(long)]
    pub k: Option<usize>,
    /// Offset radius, absolute or as a fraction of the diameter (`0.04D`).
    #[arg(long = "R", value_name = "R")]
    pub big_r: Option<Length>,
    /// Probe radius, absolute or as a fraction of the diameter (`0.04D`).
    #[arg(long = "r", value_name = "r")]
    pub r: Option<Length>,
    /// Polyhedral ball: dodeca or ico0..ico5.
    #[arg(long)]
    pub polyball: Option<PolyBallModel>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all available cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    /// `key = value` file with defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            output: self.output.clone(),
            distance: self.distance,
            k: self.k,
            big_r: self.big_r,
            r: self.r,
            polyball: self.polyball,
            seed: self.seed,
            threads: self.threads,
            ..RunConfig::default()
        }
    }
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    match s.parse::<DistanceKind>() {
        Ok(k @ (DistanceKind::Plain | DistanceKind::Witnessed | DistanceKind::Median)) => Ok(k),
        Ok(_) => Err(format!("`{s}` has no power-diagram sites; use plain, witnessed or median")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_any_distance(s: &str) -> Result<DistanceKind, String> {
    s.parse::<DistanceKind>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Orient {
    /// Point away from the centroid of the cloud.
    Outward,
    /// Keep the solver's arbitrary signs.
    None,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Feature threshold on λ1 / (λ0 + λ1 + λ2), in [0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = Orient::Outward)]
    pub orient: Orient,
}

#[derive(Debug, Args)]
pub struct LevelsetArgs {
    #[command(flatten)]
    pub common: Common,
    /// Nodes per axis.
    #[arg(long, default_value_t = 64)]
    pub dims: usize,
    /// Padding around the bounding box, as a fraction of the diameter.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// sphere[:ρ], ellipsoid[:a,b,c], plane[:hx,hy], wedge[:L,W] or cube[:h].
    #[arg(long)]
    pub shape: Shape,
    #[arg(long)]
    pub n: usize,
    /// Rescale the shape to this bounding-box diagonal.
    #[arg(long)]
    pub diameter: Option<f64>,
    #[arg(long, default_value = "random")]
    pub sampler: Sampler,
    /// Noise amplitude as a fraction of the diameter.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Outlier tiers: none, box:F, shell:F:MIN:MAX, joined by `+`.
    #[arg(long)]
    pub outliers: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output cloud; the format follows the extension.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub shape: Shape,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "random")]
    pub sampler: Sampler,
    /// Seeds, e.g. `1,2,3` or `1..5`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    /// Noise amplitudes (fractions of the diameter).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub epsilon: Vec<f64>,
    /// Outlier settings separated by `;`, each as accepted by `synth`.
    #[arg(long, default_value = "none")]
    pub outliers: String,
    #[arg(long, value_delimiter = ',', value_parser = parse_distance, default_value = "witnessed")]
    pub distance: Vec<DistanceKind>,
    #[arg(long, value_delimiter = ',', default_value = "30")]
    pub k: Vec<usize>,
    /// Offset radii as fractions of the diameter (the `D` suffix is optional).
    #[arg(long = "R", value_name = "R", value_delimiter = ',', default_value = "0.1")]
    pub big_r: Vec<String>,
    /// Probe radii as fractions of the diameter.
    #[arg(long = "r", value_name = "r", value_delimiter = ',', default_value = "0.1")]
    pub r: Vec<String>,
    #[arg(long, default_value = "dodeca")]
    pub polyball: PolyBallModel,
    #[arg(long)]
    pub threads: Option<usize>,
    /// CSV table; rows already present are skipped and new ones appended.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Number of random sites in the unit cube.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "R", value_name = "R", default_value_t = 0.25)]
    pub big_r: f64,
    /// Probe radius around a random site.
    #[arg(long = "r", value_name = "r", default_value_t = 0.4)]
    pub r: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value = "ico3")]
    pub polyball: PolyBallModel,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parses `--outliers` for `synth` and each `;`-separated item of `sweep`.
pub fn outlier_list(s: &str) -> dvcm::Result<Vec<Vec<OutlierTier>>> {
    s.split(';').map(dvcm::synth::parse_tiers).collect()
}
