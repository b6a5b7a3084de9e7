//! Normals, principal directions, curvature and sharp-feature scores from
//! probe-convolved VCM tensors.

use crate::distlike::{DistanceKind, DistanceLikeSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{PolyBallModel, SymTensor3, Vec3};
use crate::vcm::{compute_field_with, ProbeKernel, VcmField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorParams {
    /// Offset radius of the distance-like function.
    pub big_r: f64,
    /// Probe radius.
    pub r: f64,
    pub k: usize,
    pub distance: DistanceKind,
    /// Feature threshold on `λ1 / (λ0 + λ1 + λ2)`.
    pub threshold: f64,
    pub polyball: PolyBallModel,
    pub execution: Execution,
}

impl EstimatorParams {
    /// Witnessed distance with `k = 30`, the dodecahedral polyball and a
    /// threshold of 1 (nothing flagged).
    pub fn new(big_r: f64, r: f64) -> Self {
        EstimatorParams {
            big_r,
            r,
            k: 30,
            distance: DistanceKind::Witnessed,
            threshold: 1.0,
            polyball: PolyBallModel::Dodecahedron,
            execution: Execution::default(),
        }
    }

    pub fn with_distance(mut self, distance: DistanceKind, k: usize) -> Self {
        self.distance = distance;
        self.k = k;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_polyball(mut self, polyball: PolyBallModel) -> Self {
        self.polyball = polyball;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.big_r > 0.0 && self.big_r.is_finite()) {
            return bad(format!("R must be positive, got {}", self.big_r));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r must be positive, got {}", self.r));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.distance == DistanceKind::KDistance {
            return bad("the exact k-distance has no site set; use witnessed or median".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteEstimate {
    pub point: Vec3,
    /// `λ0 >= λ1 >= λ2`.
    pub eigenvalues: [f64; 3],
    /// Eigenvector of `λ0`.
    pub normal: Vec3,
    /// Eigenvector of `λ1`.
    pub dir_min: Vec3,
    /// Eigenvector of `λ2`.
    pub dir_max: Vec3,
    /// `λ1 + λ2`, proportional to the mean absolute curvature.
    pub mean_abs_curvature: f64,
    /// `λ1 / (λ0 + λ1 + λ2)`.
    pub feature_score: f64,
    pub is_feature: bool,
    /// False when no site fell inside the probe; all numbers are then zero.
    pub valid: bool,
}

impl SiteEstimate {
    fn invalid(point: Vec3) -> Self {
        SiteEstimate {
            point,
            eigenvalues: [0.0; 3],
            normal: Vec3::ZERO,
            dir_min: Vec3::ZERO,
            dir_max: Vec3::ZERO,
            mean_abs_curvature: 0.0,
            feature_score: 0.0,
            is_feature: false,
            valid: false,
        }
    }

    /// Reads the estimate off a convolved tensor.
    pub fn from_tensor(point: Vec3, m: &SymTensor3, threshold: f64) -> Self {
        if m.is_zero() || !m.is_finite() {
            return SiteEstimate::invalid(point);
        }
        let e = m.eigen();
        let [l0, l1, l2] = e.values;
        let sum = l0 + l1 + l2;
        let feature_score = if sum > 0.0 { (l1 / sum).clamp(0.0, 1.0) } else { 0.0 };
        SiteEstimate {
            point,
            eigenvalues: e.values,
            normal: e.vectors[0],
            dir_min: e.vectors[1],
            dir_max: e.vectors[2],
            mean_abs_curvature: l1 + l2,
            feature_score,
            is_feature: feature_score >= threshold,
            valid: true,
        }
    }
}

/// Builds the site set, its VCM field and one estimate per input point.
pub fn estimate_all(points: &[Vec3], params: &EstimatorParams) -> Result<Vec<SiteEstimate>> {
    let field = build_field(points, params)?;
    estimate_from_field(&field, points, params)
}

/// The VCM field of the distance-like function selected by `params`.
pub fn build_field(points: &[Vec3], params: &EstimatorParams) -> Result<VcmField> {
    params.validate()?;
    let cloud = DistanceLikeSpec::new(params.distance, params.k)
        .sites(points)?
        .expect("validated distance kind has sites");
    let field = compute_field_with(cloud, params.big_r, params.polyball, params.execution)?;
    if field.tensors().iter().all(SymTensor3::is_zero) {
        return Err(Error::DegenerateField);
    }
    Ok(field)
}

/// Probes `field` with the ball of radius `params.r` around each query point.
pub fn estimate_from_field(field: &VcmField, queries: &[Vec3], params: &EstimatorParams) -> Result<Vec<SiteEstimate>> {
    params.validate()?;
    let r = params.r;
    let threshold = params.threshold;
    Ok(params.execution.map_range_with(queries.len(), Vec::new, |scratch, i| {
        let q = queries[i];
        let chi = ProbeKernel::BallIndicator { center: q, radius: r };
        SiteEstimate::from_tensor(q, &field.convolve_into(&chi, scratch), threshold)
    }))
}

/// Reference used to pick a consistent sign for the normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Orientation {
    /// `n · (p − centroid) >= 0`, with the centroid of the valid points.
    OutwardFromCentroid,
    /// `n · (viewpoint − p) >= 0`.
    Viewpoint(Vec3),
    /// Keep the eigen solver's sign convention.
    None,
}

pub fn orient_normals(estimates: &mut [SiteEstimate], orientation: Orientation) {
    let flip_if = |e: &mut SiteEstimate, toward: Vec3| {
        if e.normal.dot(toward) < 0.0 {
            e.normal = -e.normal;
        }
    };
    match orientation {
        Orientation::None => {}
        Orientation::OutwardFromCentroid => {
            let valid: Vec<Vec3> = estimates.iter().filter(|e| e.valid).map(|e| e.point).collect();
            if valid.is_empty() {
                return;
            }
            let c = valid.iter().fold(Vec3::ZERO, |s, p| s + *p) / valid.len() as f64;
            for e in estimates.iter_mut().filter(|e| e.valid) {
                let d = e.point - c;
                flip_if(e, d);
            }
        }
        Orientation::Viewpoint(v) => {
            for e in estimates.iter_mut().filter(|e| e.valid) {
                let d = v - e.point;
                flip_if(e, d);
            }
        }
    }
}

/// `feature_score >= threshold` for valid estimates.
pub fn detect_features(estimates: &[SiteEstimate], threshold: f64) -> Vec<bool> {
    estimates
        .iter()
        .map(|e| e.valid && e.feature_score >= threshold)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mat3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn angle_deg(a: Vec3, b: Vec3) -> f64 {
        a.dot(b).abs().min(1.0).acos().to_degrees()
    }

    /// Unsigned angle between two lines, accurate near zero.
    fn line_angle(a: Vec3, b: Vec3) -> f64 {
        a.cross(b).norm().atan2(a.dot(b).abs())
    }

    fn plane_grid(n: usize, h: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Vec3::new(i as f64 * h, j as f64 * h, 0.0));
            }
        }
        pts
    }

    fn random_sphere(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| loop {
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let l = v.norm();
                if l > 0.1 && l <= 1.0 {
                    break v / l;
                }
            })
            .collect()
    }

    #[test]
    fn plane_normals_and_isotropy() {
        let pts = plane_grid(40, 0.025);
        let params = EstimatorParams::new(0.1, 0.12).with_distance(DistanceKind::Plain, 1);
        let est = estimate_all(&pts, &params).unwrap();
        let center = Vec3::new(0.4875, 0.4875, 0.0);
        for e in est.iter().filter(|e| e.point.distance(center) < 0.2) {
            assert!(e.valid);
            assert!(angle_deg(e.normal, Vec3::Z) < 2.0);
            let [l0, l1, l2] = e.eigenvalues;
            assert!((l1 - l2).abs() / l0 <= 0.05);
        }
    }

    #[test]
    fn plane_with_witnessed_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pts: Vec<Vec3> = (0..3000)
            .map(|_| Vec3::new(rng.random(), rng.random(), 0.0))
            .collect();
        for kind in [DistanceKind::Witnessed, DistanceKind::Median] {
            let params = EstimatorParams::new(0.1, 0.1).with_distance(kind, 10);
            let est = estimate_all(&pts, &params).unwrap();
            for e in est.iter().filter(|e| e.point.distance(Vec3::new(0.5, 0.5, 0.0)) < 0.3) {
                assert!(angle_deg(e.normal, Vec3::Z) < 2.0);
            }
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = random_sphere(&mut rng, 4000);
        let params = EstimatorParams::new(0.2, 0.2).with_distance(DistanceKind::Plain, 1);
        let mut est = estimate_all(&pts, &params).unwrap();
        orient_normals(&mut est, Orientation::OutwardFromCentroid);
        let mean: f64 = est.iter().map(|e| angle_deg(e.normal, e.point)).sum::<f64>() / est.len() as f64;
        assert!(mean < 3.0, "mean angle {mean}");
        for e in &est {
            assert!(e.normal.dot(e.point) > 0.0);
        }
    }

    #[test]
    fn frame_is_orthonormal_and_score_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pts = random_sphere(&mut rng, 1000);
        let params = EstimatorParams::new(0.3, 0.25).with_distance(DistanceKind::Witnessed, 8);
        let field = build_field(&pts, &params).unwrap();
        let est = estimate_from_field(&field, &pts, &params).unwrap();
        for (e, q) in est.iter().zip(&pts) {
            let f = [e.normal, e.dir_min, e.dir_max];
            for a in 0..3 {
                assert!((f[a].norm() - 1.0).abs() < 1e-9);
                for b in a + 1..3 {
                    assert!(f[a].dot(f[b]).abs() < 1e-9);
                }
            }
            assert!((0.0..=1.0).contains(&e.feature_score));
            let m = field.convolve(&ProbeKernel::ball(*q, 0.25).unwrap());
            let s: f64 = e.eigenvalues.iter().sum();
            assert!((s - m.trace()).abs() <= 1e-9 * m.trace());
        }
    }

    #[test]
    fn far_outlier_is_invalid() {
        let mut pts = plane_grid(20, 0.05);
        pts.push(Vec3::new(0.5, 0.5, 50.0));
        let params = EstimatorParams::new(0.2, 0.1).with_distance(DistanceKind::Witnessed, 10);
        let est = estimate_all(&pts, &params).unwrap();
        let last = est.last().unwrap();
        assert!(!last.valid);
        assert!(last.eigenvalues.iter().all(|l| *l == 0.0));
        assert!(!last.feature_score.is_nan());
        assert!(est[..est.len() - 1].iter().all(|e| e.valid));
    }

    #[test]
    fn degenerate_field_is_an_error() {
        let pts = plane_grid(5, 1.0);
        let params = EstimatorParams::new(0.1, 0.1).with_distance(DistanceKind::Witnessed, 25);
        assert!(matches!(estimate_all(&pts, &params), Err(Error::DegenerateField)));
        let bad = EstimatorParams::new(0.1, 0.1).with_threshold(2.0);
        assert!(estimate_all(&pts, &bad).is_err());
        let k = EstimatorParams::new(0.1, 0.1).with_distance(DistanceKind::Witnessed, 26);
        assert!(matches!(estimate_all(&pts, &k), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn scaling_behavior() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let pts = random_sphere(&mut rng, 600);
        let params = EstimatorParams::new(0.3, 0.3).with_distance(DistanceKind::Witnessed, 5);
        let base = estimate_all(&pts, &params).unwrap();
        let s = 2.5;
        let scaled: Vec<Vec3> = pts.iter().map(|p| *p * s).collect();
        let params_s = EstimatorParams::new(0.3 * s, 0.3 * s).with_distance(DistanceKind::Witnessed, 5);
        let est = estimate_all(&scaled, &params_s).unwrap();
        let s5 = s.powi(5);
        for (a, b) in base.iter().zip(&est) {
            for (la, lb) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((la * s5 - lb).abs() <= 1e-9 * a.eigenvalues[0] * s5);
            }
            assert!(line_angle(a.normal, b.normal) < 1e-6);
            assert!((a.feature_score - b.feature_score).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let pts: Vec<Vec3> = random_sphere(&mut rng, 800)
            .into_iter()
            .map(|p| Vec3::new(p.x * 1.5, p.y, p.z * 0.7))
            .collect();
        let q = Mat3::rotation(Vec3::splat(1.0).normalize(), 2.0 * PI / 3.0);
        let rotated: Vec<Vec3> = pts.iter().map(|p| q.apply(*p)).collect();
        let params = EstimatorParams::new(0.3, 0.3).with_distance(DistanceKind::Witnessed, 6);
        let a = estimate_all(&pts, &params).unwrap();
        let b = estimate_all(&rotated, &params).unwrap();
        for (ea, eb) in a.iter().zip(&b) {
            let gap = ea.eigenvalues[0] - ea.eigenvalues[1];
            if gap > 1e-6 * ea.eigenvalues[0] {
                assert!(line_angle(q.apply(ea.normal), eb.normal) < 1e-6);
            }
            assert!((ea.feature_score - eb.feature_score).abs() < 1e-9);
        }
    }

    #[test]
    fn orientation_modes() {
        let pts = plane_grid(20, 0.05);
        let params = EstimatorParams::new(0.15, 0.1).with_distance(DistanceKind::Plain, 1);
        let est = estimate_all(&pts, &params).unwrap();
        let mut same = est.clone();
        orient_normals(&mut same, Orientation::None);
        assert_eq!(same, est);
        let mut up = est.clone();
        orient_normals(&mut up, Orientation::Viewpoint(Vec3::new(0.5, 0.5, 10.0)));
        assert!(up.iter().all(|e| e.normal.z > 0.0));
        let mut down = est;
        orient_normals(&mut down, Orientation::Viewpoint(Vec3::new(0.5, 0.5, -10.0)));
        assert!(down.iter().all(|e| e.normal.z < 0.0));
    }

    #[test]
    fn feature_mask_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let pts = random_sphere(&mut rng, 500);
        let params = EstimatorParams::new(0.3, 0.3).with_distance(DistanceKind::Witnessed, 5);
        let est = estimate_all(&pts, &params).unwrap();
        assert!(detect_features(&est, 0.0).iter().all(|&f| f));
        assert!(detect_features(&est, 1.0).iter().all(|&f| !f));
        let mut prev = usize::MAX;
        for t in 0..=20 {
            let count = detect_features(&est, t as f64 / 20.0).iter().filter(|&&f| f).count();
            assert!(count <= prev);
            prev = count;
        }
    }

    #[test]
    fn cube_edge_scores_exceed_faces() {
        // two faces of a cube meeting along the edge x = z = 0
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let pts: Vec<Vec3> = (0..8000)
            .map(|i| {
                let (u, y) = (rng.random::<f64>(), rng.random::<f64>());
                if i % 2 == 0 {
                    Vec3::new(-u, y, 0.0)
                } else {
                    Vec3::new(0.0, y, -u)
                }
            })
            .collect();
        let r = 0.05;
        let params = EstimatorParams::new(0.1, r).with_distance(DistanceKind::Witnessed, 10);
        let est = estimate_all(&pts, &params).unwrap();
        let inner = |p: Vec3| p.y > 0.2 && p.y < 0.8;
        let (mut edge, mut face) = (Vec::new(), Vec::new());
        for e in est.iter().filter(|e| inner(e.point)) {
            let d_edge = e.point.x.abs().max(e.point.z.abs());
            if d_edge <= r {
                edge.push(e.feature_score);
            } else if d_edge > 3.0 * r && d_edge < 0.8 {
                face.push(e.feature_score);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&edge) > mean(&face));
    }
}
