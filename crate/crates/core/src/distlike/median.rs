use crate::geom::Vec3;

use super::bbox_diagonal;

const MAX_ITERATIONS: usize = 200;
const MAX_RESTARTS: usize = 8;
const STEP_REL_TOL: f64 = 1e-9;
const COINCIDENT_REL_TOL: f64 = 1e-12;
const RESTART_REL_STEP: f64 = 1e-6;

/// Point minimizing `Σ ‖b − pᵢ‖` (Weiszfeld iteration from the barycenter).
///
/// Two points give their midpoint. At every iterate the closest input point
/// is tested against the subgradient optimality condition
/// `‖Σ_{pⱼ ≠ p} (p − pⱼ)/‖p − pⱼ‖‖ <= multiplicity(p)`; an input point that
/// passes is returned exactly. Landing on a non-optimal input point restarts
/// from a point nudged along the descent direction.
///
/// Panics on an empty slice.
pub fn geometric_median(points: &[Vec3]) -> Vec3 {
    assert!(!points.is_empty(), "geometric median of an empty set");
    if points.len() == 1 {
        return points[0];
    }
    if points.len() == 2 {
        return (points[0] + points[1]) * 0.5;
    }
    let diam = bbox_diagonal(points);
    if diam == 0.0 {
        return points[0];
    }
    let step_tol = STEP_REL_TOL * diam;
    let coincident = COINCIDENT_REL_TOL * diam;

    let mut y = barycenter(points);
    let mut restarts = 0;
    for _ in 0..MAX_ITERATIONS {
        let (j, dj) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(y)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });

        // optimality of the closest input point
        let pj = points[j];
        let mut grad = Vec3::ZERO;
        let mut multiplicity = 0.0;
        for p in points {
            let d = pj.distance(*p);
            if d <= coincident {
                multiplicity += 1.0;
            } else {
                grad += (pj - *p) / d;
            }
        }
        let gnorm = grad.norm();
        if gnorm <= multiplicity {
            return pj;
        }
        if dj <= coincident {
            if restarts == MAX_RESTARTS {
                return pj;
            }
            restarts += 1;
            y = pj - grad / gnorm * (RESTART_REL_STEP * diam);
            continue;
        }

        let mut num = Vec3::ZERO;
        let mut den = 0.0;
        for p in points {
            let w = 1.0 / p.distance(y);
            num += *p * w;
            den += w;
        }
        let next = num / den;
        let step = next.distance(y);
        y = next;
        if step < step_tol {
            break;
        }
    }
    y
}

fn barycenter(points: &[Vec3]) -> Vec3 {
    let mut s = Vec3::ZERO;
    for p in points {
        s += *p;
    }
    s / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cost(m: Vec3, pts: &[Vec3]) -> f64 {
        pts.iter().map(|p| p.distance(m)).sum()
    }

    #[test]
    fn single_point() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(geometric_median(&[p]), p);
    }

    #[test]
    fn two_points_midpoint() {
        assert_eq!(
            geometric_median(&[Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)]),
            Vec3::X
        );
    }

    #[test]
    fn square_corners() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(geometric_median(&pts).distance(Vec3::new(0.5, 0.5, 0.0)) < 1e-12);
    }

    #[test]
    fn collinear_median_is_middle_point() {
        let pts = [Vec3::ZERO, Vec3::X, Vec3::X * 10.0];
        assert_eq!(geometric_median(&pts), Vec3::X);
    }

    #[test]
    fn equilateral_triangle_centroid() {
        let s = 3f64.sqrt() / 2.0;
        let pts = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(-0.5, s, 0.0), Vec3::new(-0.5, -s, 0.0)];
        assert!(geometric_median(&pts).norm() < 1e-12);
    }

    #[test]
    fn dominant_duplicate_point() {
        let p = Vec3::new(0.3, 0.3, 0.3);
        let pts = [p, p, p, Vec3::ZERO, Vec3::X];
        assert_eq!(geometric_median(&pts), p);
    }

    #[test]
    fn optimality_against_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..200 {
            let k = rng.random_range(3..40);
            let pts: Vec<Vec3> = (0..k)
                .map(|_| {
                    let mut v = Vec3::new(rng.random(), rng.random(), rng.random());
                    if trial % 4 == 0 {
                        v.z = 0.0; // planar groups
                    }
                    v
                })
                .collect();
            let diam = bbox_diagonal(&pts);
            let m = geometric_median(&pts);
            let fm = cost(m, &pts);
            let c = pts.iter().fold(Vec3::ZERO, |s, p| s + *p) / k as f64;
            assert!(fm <= cost(c, &pts) + 1e-7 * diam);
            for _ in 0..100 {
                let scale = 10f64.powi(-rng.random_range(1..6)) * diam;
                let d = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ) * scale;
                assert!(fm <= cost(m + d, &pts) + 1e-7 * diam);
            }
        }
    }
}
