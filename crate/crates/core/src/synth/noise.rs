use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::shapes::unit_vector;
use crate::distlike::bounding_box;
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// A group of outliers. Displacements are fractions of the shape diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutlierTier {
    /// Displaced in a uniform direction by a distance uniform in `[min, max]`.
    Shell { fraction: f64, min: f64, max: f64 },
    /// Replaced by a uniform point of the cloud's bounding box.
    BoundingBox { fraction: f64 },
}

impl OutlierTier {
    pub fn fraction(&self) -> f64 {
        match *self {
            OutlierTier::Shell { fraction, .. } | OutlierTier::BoundingBox { fraction } => fraction,
        }
    }
}

impl fmt::Display for OutlierTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OutlierTier::Shell { fraction, min, max } => write!(f, "shell:{fraction}:{min}:{max}"),
            OutlierTier::BoundingBox { fraction } => write!(f, "box:{fraction}"),
        }
    }
}

impl FromStr for OutlierTier {
    type Err = Error;

    /// `box:F` or `shell:F:MIN:MAX`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad outlier tier `{s}` (expected box:F or shell:F:MIN:MAX)"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["box", f] => Ok(OutlierTier::BoundingBox { fraction: num(f)? }),
            ["shell", f, lo, hi] => Ok(OutlierTier::Shell {
                fraction: num(f)?,
                min: num(lo)?,
                max: num(hi)?,
            }),
            _ => Err(bad()),
        }
    }
}

/// `none` or tiers joined by `+`.
pub fn format_tiers(tiers: &[OutlierTier]) -> String {
    if tiers.is_empty() {
        return "none".into();
    }
    tiers.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("+")
}

pub fn parse_tiers(s: &str) -> Result<Vec<OutlierTier>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split('+').map(str::parse).collect()
}

/// Bounded noise on every point plus optional outlier tiers.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Largest displacement of regular points, as a fraction of the diameter.
    pub epsilon: f64,
    pub tiers: Vec<OutlierTier>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            epsilon: 0.0,
            tiers: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("noise epsilon must be non-negative, got {}", self.epsilon));
        }
        let mut total = 0.0;
        for t in &self.tiers {
            let f = t.fraction();
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("outlier fraction {f} outside [0, 1]"));
            }
            if let OutlierTier::Shell { min, max, .. } = *t {
                if !(min >= 0.0 && max >= min && max.is_finite()) {
                    return bad(format!("outlier displacement range [{min}, {max}] is invalid"));
                }
            }
            total += f;
        }
        if total > 1.0 + 1e-12 {
            return bad(format!("outlier fractions sum to {total} > 1"));
        }
        Ok(())
    }
}

/// Noisy points and which of them were made outliers.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyCloud {
    pub points: Vec<Vec3>,
    pub outlier: Vec<bool>,
}

impl NoisyCloud {
    pub fn outlier_count(&self) -> usize {
        self.outlier.iter().filter(|&&o| o).count()
    }
}

/// Applies `model` to `points`, with displacements scaled by `diameter`.
///
/// A seeded shuffle assigns the first `⌊f₁ n⌋` points to the first tier, the
/// next `⌊f₂ n⌋` to the second, and so on; the rest move by a uniform
/// direction times a radius uniform in `[0, ε · diameter]`.
pub fn apply_noise(points: &[Vec3], model: &NoiseModel, diameter: f64) -> Result<NoisyCloud> {
    model.validate()?;
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut tier_of = vec![usize::MAX; n];
    let mut next = 0;
    for (t, tier) in model.tiers.iter().enumerate() {
        let count = ((tier.fraction() * n as f64).floor() as usize).min(n - next);
        for &i in &order[next..next + count] {
            tier_of[i] = t;
        }
        next += count;
    }
    let (lo, hi) = bounding_box(points).unwrap_or((Vec3::ZERO, Vec3::ZERO));
    let eps = model.epsilon * diameter;
    let mut out = Vec::with_capacity(n);
    for (i, &p) in points.iter().enumerate() {
        let q = match model.tiers.get(tier_of[i]) {
            None if eps == 0.0 => p,
            None => p + unit_vector(&mut rng) * (eps * rng.random::<f64>()),
            Some(&OutlierTier::Shell { min, max, .. }) => {
                let d = if max > min { rng.random_range(min..=max) } else { min };
                p + unit_vector(&mut rng) * (d * diameter)
            }
            Some(OutlierTier::BoundingBox { .. }) => Vec3::new(
                lo.x + (hi.x - lo.x) * rng.random::<f64>(),
                lo.y + (hi.y - lo.y) * rng.random::<f64>(),
                lo.z + (hi.z - lo.z) * rng.random::<f64>(),
            ),
        };
        out.push(q);
    }
    Ok(NoisyCloud {
        points: out,
        outlier: tier_of.into_iter().map(|t| t != usize::MAX).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Sampler, Shape};

    fn cloud() -> (Vec<Vec3>, f64) {
        let shape = Shape::Ellipsoid { a: 2.0, b: 1.5, c: 1.0 };
        (shape.sample(5000, 1, Sampler::Random).unwrap().points, shape.diameter())
    }

    #[test]
    fn zero_noise_is_identity() {
        let (p, d) = cloud();
        let out = apply_noise(&p, &NoiseModel::none(), d).unwrap();
        assert_eq!(out.points, p);
        assert_eq!(out.outlier_count(), 0);
    }

    #[test]
    fn displacement_bounded_by_epsilon() {
        let (p, d) = cloud();
        let model = NoiseModel {
            epsilon: 0.1,
            tiers: Vec::new(),
            seed: 3,
        };
        let out = apply_noise(&p, &model, d).unwrap();
        let max = p.iter().zip(&out.points).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max);
        assert!(max <= 0.1 * d);
        assert!(max > 0.09 * d);
    }

    #[test]
    fn tier_counts() {
        let (p, d) = cloud();
        let model = NoiseModel {
            epsilon: 0.0,
            tiers: vec![
                OutlierTier::Shell {
                    fraction: 0.9,
                    min: 0.0,
                    max: 0.02,
                },
                OutlierTier::BoundingBox { fraction: 0.1 },
            ],
            seed: 4,
        };
        let out = apply_noise(&p, &model, d).unwrap();
        assert_eq!(out.outlier_count(), 5000);
        let (lo, hi) = bounding_box(&p).unwrap();
        let moved_far = p
            .iter()
            .zip(&out.points)
            .filter(|(a, b)| a.distance(**b) > 0.02 * d + 1e-12)
            .count();
        assert!(moved_far <= 500);
        let in_box = out
            .points
            .iter()
            .filter(|q| q.x >= lo.x && q.x <= hi.x && q.y >= lo.y && q.y <= hi.y && q.z >= lo.z && q.z <= hi.z)
            .count();
        assert!(in_box >= 500);
        // exactly ⌊0.1 n⌋ points land outside the shell tier's reach
        let shell = p
            .iter()
            .zip(&out.points)
            .filter(|(a, b)| a.distance(**b) <= 0.02 * d + 1e-12)
            .count();
        assert!(shell >= 4500);
    }

    #[test]
    fn box_tier_count_is_exact() {
        let (p, d) = cloud();
        for f in [0.1, 0.333, 0.02] {
            let model = NoiseModel {
                epsilon: 0.05,
                tiers: vec![OutlierTier::BoundingBox { fraction: f }],
                seed: 5,
            };
            let out = apply_noise(&p, &model, d).unwrap();
            assert_eq!(out.outlier_count(), (f * 5000.0f64).floor() as usize);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (p, d) = cloud();
        let m = NoiseModel {
            epsilon: 0.02,
            tiers: vec![OutlierTier::BoundingBox { fraction: 0.1 }],
            seed: 6,
        };
        assert_eq!(apply_noise(&p, &m, d).unwrap(), apply_noise(&p, &m, d).unwrap());
        let m2 = NoiseModel { seed: 7, ..m.clone() };
        assert_ne!(apply_noise(&p, &m, d).unwrap(), apply_noise(&p, &m2, d).unwrap());
    }

    #[test]
    fn invalid_models() {
        let bad = NoiseModel {
            epsilon: 0.0,
            tiers: vec![
                OutlierTier::BoundingBox { fraction: 0.6 },
                OutlierTier::BoundingBox { fraction: 0.6 },
            ],
            seed: 0,
        };
        assert!(apply_noise(&[Vec3::ZERO], &bad, 1.0).is_err());
        let neg = NoiseModel {
            epsilon: -0.1,
            ..NoiseModel::none()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn tier_strings() {
        let tiers = vec![
            OutlierTier::Shell {
                fraction: 0.02,
                min: 0.02,
                max: 0.1,
            },
            OutlierTier::BoundingBox { fraction: 0.1 },
        ];
        let s = format_tiers(&tiers);
        assert_eq!(s, "shell:0.02:0.02:0.1+box:0.1");
        assert_eq!(parse_tiers(&s).unwrap(), tiers);
        assert_eq!(parse_tiers("none").unwrap(), vec![]);
        assert!(parse_tiers("ring:0.1").is_err());
    }
}
