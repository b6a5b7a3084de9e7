//! Synthetic shapes, noise models, normal-error scoring and parameter sweeps.

mod noise;
mod shapes;
mod sweep;

pub use noise::{apply_noise, format_tiers, parse_tiers, NoiseModel, NoisyCloud, OutlierTier};
pub use shapes::{random_rotation, unit_vector, Sampler, Shape, SurfaceSample};
pub use sweep::{completed_keys, run_sweep, NoiseSetting, ParamSetting, SweepConfig, SweepRow, SWEEP_HEADER};

use crate::error::{Error, Result};
use crate::estimators::SiteEstimate;
use crate::geom::Vec3;

/// Width in degrees of each [`AngleStats::histogram`] bin.
pub const HISTOGRAM_BIN_DEG: f64 = 5.0;

/// Unsigned normal deviations in degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleStats {
    pub mean: f64,
    pub max: f64,
    /// Counts per 5° bin over `[0, 90]`.
    pub histogram: Vec<usize>,
    pub valid: usize,
    pub invalid: usize,
}

/// Angle in degrees between two lines, ignoring orientation.
pub fn line_angle_deg(a: Vec3, b: Vec3) -> f64 {
    let c = a.dot(b).abs() / (a.norm() * b.norm());
    c.min(1.0).acos().to_degrees()
}

/// Compares estimated normals with the true ones; invalid estimates are
/// counted and skipped.
pub fn angle_error(estimates: &[SiteEstimate], truth: &[Vec3]) -> Result<AngleStats> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} estimates but {} reference normals",
            estimates.len(),
            truth.len()
        )));
    }
    let bins = (90.0 / HISTOGRAM_BIN_DEG) as usize;
    let mut histogram = vec![0; bins];
    let (mut sum, mut max, mut valid) = (0.0, 0.0f64, 0usize);
    for (e, t) in estimates.iter().zip(truth) {
        if !e.valid {
            continue;
        }
        let a = line_angle_deg(e.normal, *t);
        sum += a;
        max = max.max(a);
        valid += 1;
        histogram[((a / HISTOGRAM_BIN_DEG) as usize).min(bins - 1)] += 1;
    }
    if valid == 0 {
        return Err(Error::NoValidEstimates);
    }
    Ok(AngleStats {
        mean: sum / valid as f64,
        max,
        histogram,
        valid,
        invalid: estimates.len() - valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mat3;

    fn estimate(normal: Vec3, valid: bool) -> SiteEstimate {
        let u = if valid { normal.any_orthonormal() } else { Vec3::ZERO };
        SiteEstimate {
            point: Vec3::ZERO,
            eigenvalues: [1.0, 0.0, 0.0],
            normal,
            dir_min: u,
            dir_max: normal.cross(u),
            mean_abs_curvature: 0.0,
            feature_score: 0.0,
            is_feature: false,
            valid,
        }
    }

    fn truth() -> Vec<Vec3> {
        vec![Vec3::X, Vec3::new(0.0, 0.6, 0.8), Vec3::new(1.0, 1.0, 1.0).normalize()]
    }

    #[test]
    fn identical_and_antipodal() {
        let t = truth();
        for sign in [1.0, -1.0] {
            let e: Vec<_> = t.iter().map(|n| estimate(*n * sign, true)).collect();
            let s = angle_error(&e, &t).unwrap();
            assert!(s.mean < 1e-6 && s.max < 1e-6);
            assert_eq!(s.histogram[0], 3);
        }
    }

    #[test]
    fn perpendicular_is_ninety() {
        let t = truth();
        let e: Vec<_> = t.iter().map(|n| estimate(n.any_orthonormal(), true)).collect();
        let s = angle_error(&e, &t).unwrap();
        assert!((s.mean - 90.0).abs() < 1e-9);
        assert_eq!(s.histogram[17], 3);
    }

    #[test]
    fn invalid_counted_and_required() {
        let t = truth();
        let mut e: Vec<_> = t.iter().map(|n| estimate(*n, true)).collect();
        e[1] = estimate(Vec3::ZERO, false);
        let s = angle_error(&e, &t).unwrap();
        assert_eq!((s.valid, s.invalid), (2, 1));
        let none: Vec<_> = t.iter().map(|_| estimate(Vec3::ZERO, false)).collect();
        assert!(matches!(angle_error(&none, &t), Err(Error::NoValidEstimates)));
        assert!(angle_error(&e[..2], &t).is_err());
    }

    #[test]
    fn rotation_invariant() {
        let t = truth();
        let e: Vec<_> = [Vec3::new(1.0, 0.2, 0.0), Vec3::Y, Vec3::Z]
            .iter()
            .map(|n| estimate(n.normalize(), true))
            .collect();
        let q = Mat3::rotation(Vec3::new(0.3, -0.5, 0.8).normalize(), 1.234);
        let er: Vec<_> = e.iter().map(|x| estimate(q.apply(x.normal), true)).collect();
        let tr: Vec<_> = t.iter().map(|n| q.apply(*n)).collect();
        let (a, b) = (angle_error(&e, &t).unwrap(), angle_error(&er, &tr).unwrap());
        assert!((a.mean - b.mean).abs() < 1e-9);
        assert!((a.max - b.max).abs() < 1e-9);
    }
}
