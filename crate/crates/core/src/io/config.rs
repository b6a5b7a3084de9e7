use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::QualityMode;
use crate::distlike::DistanceKind;
use crate::error::{Error, Result};
use crate::geom::PolyBallModel;
use crate::synth::{parse_tiers, OutlierTier};

/// A length given either absolutely or as a multiple of the cloud diameter
/// (`0.04D`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Length {
    Absolute(f64),
    Diameter(f64),
}

impl Length {
    pub fn resolve(self, diameter: f64) -> f64 {
        match self {
            Length::Absolute(v) => v,
            Length::Diameter(f) => f * diameter,
        }
    }

    pub fn is_relative(self) -> bool {
        matches!(self, Length::Diameter(_))
    }
}

impl FromStr for Length {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, rel) = match s.strip_suffix(['D', 'd']) {
            Some(n) => (n, true),
            None => (s, false),
        };
        let v: f64 = num
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| *v > 0.0 && v.is_finite())
            .ok_or_else(|| Error::InvalidParameter(format!("bad length `{s}` (expected e.g. 0.04 or 0.04D)")))?;
        Ok(if rel { Length::Diameter(v) } else { Length::Absolute(v) })
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Length::Absolute(v) => write!(f, "{v}"),
            Length::Diameter(v) => write!(f, "{v}D"),
        }
    }
}

/// Settings read from a `key = value` file. Every field is optional so a
/// config can be layered under command-line flags with [`RunConfig::merge`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub distance: Option<DistanceKind>,
    pub k: Option<usize>,
    pub big_r: Option<Length>,
    pub r: Option<Length>,
    pub threshold: Option<f64>,
    pub polyball: Option<PolyBallModel>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub epsilon: Option<f64>,
    pub outliers: Option<Vec<OutlierTier>>,
    pub quality: Option<QualityMode>,
}

impl RunConfig {
    pub const KEYS: [&'static str; 13] = [
        "input", "output", "distance", "k", "R", "r", "threshold", "polyball", "seed", "threads", "epsilon", "outliers",
        "quality",
    ];

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Blank lines and `#` comments are skipped; unknown or repeated keys
    /// and malformed values are errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(path, i + 1, m);
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Parse { .. } => e,
                other => err(other.to_string()),
            })?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidParameter(format!("`{key}` expects a number, found `{v}`")))
        }
        match key {
            "input" => self.input = Some(value.into()),
            "output" => self.output = Some(value.into()),
            "distance" => self.distance = Some(value.parse()?),
            "k" => self.k = Some(num(key, value)?),
            "R" => self.big_r = Some(value.parse()?),
            "r" => self.r = Some(value.parse()?),
            "threshold" => self.threshold = Some(num(key, value)?),
            "polyball" => self.polyball = Some(value.parse()?),
            "seed" => self.seed = Some(num(key, value)?),
            "threads" => self.threads = Some(num(key, value)?),
            "epsilon" => self.epsilon = Some(num(key, value)?),
            "outliers" => self.outliers = Some(parse_tiers(value)?),
            "quality" => self.quality = Some(value.parse()?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown key `{key}` (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        RunConfig {
            input: over.input.or(self.input),
            output: over.output.or(self.output),
            distance: over.distance.or(self.distance),
            k: over.k.or(self.k),
            big_r: over.big_r.or(self.big_r),
            r: over.r.or(self.r),
            threshold: over.threshold.or(self.threshold),
            polyball: over.polyball.or(self.polyball),
            seed: over.seed.or(self.seed),
            threads: over.threads.or(self.threads),
            epsilon: over.epsilon.or(self.epsilon),
            outliers: over.outliers.or(self.outliers),
            quality: over.quality.or(self.quality),
        }
    }
}
