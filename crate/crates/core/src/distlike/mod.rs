//! Distance-like functions: power distances, the k-distance, and the
//! witnessed / median site sets whose power distance approximates it.

mod grid;
mod median;
mod witness;

pub use grid::{grid_eval, DistanceKind, DistanceLike, DistanceLikeSpec, ScalarGrid, MAX_GRID_NODES};
pub use median::geometric_median;
pub use witness::{full_k_sites, median_sites, witnessed_sites, SiteConstruction, FULL_K_MAX_K, FULL_K_MAX_N};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::spatial::{KdTree, PowerIndex};

/// Relative tolerance (times the cloud diameter) under which sites are merged.
pub const DEDUP_REL_TOL: f64 = 1e-12;

/// Sites with non-negative weights defining the power distance
/// `δ(x) = min_p sqrt(‖x − p‖² + ω_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPointCloud {
    sites: Vec<Vec3>,
    weights: Vec<f64>,
}

impl WeightedPointCloud {
    /// Validates the input and merges sites closer than `1e-12` times the
    /// larger of the diameter and the coordinate magnitude, keeping the
    /// earliest position and the smallest weight.
    pub fn new(sites: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if sites.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} sites but {} weights",
                sites.len(),
                weights.len()
            )));
        }
        if let Some(p) = sites.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite site {p}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight {w} is not a finite non-negative number")));
        }
        Ok(Self::dedup(sites, weights))
    }

    pub fn unweighted(points: &[Vec3]) -> Result<Self> {
        Self::new(points.to_vec(), vec![0.0; points.len()])
    }

    fn dedup(sites: Vec<Vec3>, mut weights: Vec<f64>) -> Self {
        let magnitude = sites
            .iter()
            .map(|p| p.x.abs().max(p.y.abs()).max(p.z.abs()))
            .fold(0.0, f64::max);
        let tol = DEDUP_REL_TOL * bbox_diagonal(&sites).max(magnitude);
        let tree = KdTree::new(&sites);
        let mut merged = vec![false; sites.len()];
        let mut any = false;
        for i in 0..sites.len() {
            if merged[i] {
                continue;
            }
            for j in tree.within_radius(sites[i], tol) {
                if j > i && !merged[j] {
                    merged[j] = true;
                    weights[i] = weights[i].min(weights[j]);
                    any = true;
                }
            }
        }
        if !any {
            return WeightedPointCloud { sites, weights };
        }
        let (sites, weights) = sites
            .into_iter()
            .zip(weights)
            .zip(merged)
            .filter(|(_, m)| !m)
            .map(|(sw, _)| sw)
            .unzip();
        WeightedPointCloud { sites, weights }
    }

    pub fn sites(&self) -> &[Vec3] {
        &self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        bbox_diagonal(&self.sites)
    }

    pub fn power_index(&self) -> PowerIndex {
        PowerIndex::new(&self.sites, &self.weights)
    }
}

/// Bounding-box diagonal of a point set (0 when empty).
pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    bounding_box(points).map_or(0.0, |(lo, hi)| (hi - lo).norm())
}

pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(
        points
            .iter()
            .fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p))),
    )
}

/// `min_p sqrt(‖x − p‖² + ω_p)` and the minimizing site (lowest index on ties).
pub fn power_distance(cloud: &WeightedPointCloud, x: Vec3) -> Result<(f64, usize)> {
    let mut best = (f64::INFINITY, usize::MAX);
    for (i, (p, w)) in cloud.sites.iter().zip(&cloud.weights).enumerate() {
        let v = x.distance_squared(*p) + w;
        if v < best.0 {
            best = (v, i);
        }
    }
    if best.1 == usize::MAX {
        return Err(Error::EmptyCloud);
    }
    Ok((best.0.sqrt(), best.1))
}

/// Root mean squared distance from `x` to its `k` nearest points of `points`.
pub fn k_distance(points: &[Vec3], k: usize, x: Vec3) -> Result<f64> {
    check_k(k, points.len())?;
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.distance_squared(x), i))
        .collect();
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok((d.iter().map(|e| e.0).sum::<f64>() / k as f64).sqrt())
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(())
}

/// Indexed evaluator for the k-distance of a fixed point set.
#[derive(Clone, Debug)]
pub struct KDistance {
    tree: KdTree,
    k: usize,
}

impl KDistance {
    pub fn new(points: &[Vec3], k: usize) -> Result<Self> {
        check_k(k, points.len())?;
        Ok(KDistance {
            tree: KdTree::new(points),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Squared k-distance: mean squared distance to the k nearest points.
    pub fn eval_squared(&self, x: Vec3) -> f64 {
        self.tree
            .nearest_k(x, self.k)
            .iter()
            .map(|n| n.dist2)
            .sum::<f64>()
            / self.k as f64
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        self.eval_squared(x).sqrt()
    }
}
