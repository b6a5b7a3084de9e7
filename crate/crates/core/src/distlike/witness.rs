use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::Vec3;
use crate::spatial::KdTree;

use super::{check_k, geometric_median, WeightedPointCloud};

/// Largest cloud accepted by [`full_k_sites`].
pub const FULL_K_MAX_N: usize = 14;
/// Largest `k` accepted by [`full_k_sites`].
pub const FULL_K_MAX_K: usize = 4;

/// A derived site set together with diagnostics from its construction.
#[derive(Clone, Debug)]
pub struct SiteConstruction {
    pub cloud: WeightedPointCloud,
    /// Witnesses whose own k nearest neighbors differ from the group that
    /// produced them.
    pub neighbor_mismatches: usize,
}

/// Barycenters of each point with its `k − 1` nearest other points,
/// weighted by the squared k-distance at the barycenter.
pub fn witnessed_sites(points: &[Vec3], k: usize) -> Result<SiteConstruction> {
    witnessed_sites_with(points, k, Execution::default())
}

pub fn witnessed_sites_with(points: &[Vec3], k: usize, exec: Execution) -> Result<SiteConstruction> {
    build_sites(points, k, exec, |group| {
        let s = group.iter().fold(Vec3::ZERO, |s, p| s + *p);
        s / group.len() as f64
    })
}

/// Same grouping as [`witnessed_sites`] with the geometric median of each
/// group as the site.
pub fn median_sites(points: &[Vec3], k: usize) -> Result<SiteConstruction> {
    median_sites_with(points, k, Execution::default())
}

pub fn median_sites_with(points: &[Vec3], k: usize, exec: Execution) -> Result<SiteConstruction> {
    build_sites(points, k, exec, geometric_median)
}

fn build_sites<F>(points: &[Vec3], k: usize, exec: Execution, site_of: F) -> Result<SiteConstruction>
where
    F: Fn(&[Vec3]) -> Vec3 + Sync + Send,
{
    check_k(k, points.len())?;
    if k == 1 {
        return Ok(SiteConstruction {
            cloud: WeightedPointCloud::unweighted(points)?,
            neighbor_mismatches: 0,
        });
    }
    let tree = KdTree::new(points);
    let rows = exec.map_range_with(
        points.len(),
        || (Vec::with_capacity(k), Vec::with_capacity(k)),
        |(group, ids): &mut (Vec<Vec3>, Vec<usize>), i| {
            group.clear();
            ids.clear();
            group.push(points[i]);
            ids.push(i);
            for n in tree.nearest_k(points[i], k) {
                if n.index != i && ids.len() < k {
                    group.push(points[n.index]);
                    ids.push(n.index);
                }
            }
            let b = site_of(group);
            let nb = tree.nearest_k(b, k);
            let weight = nb.iter().map(|n| n.dist2).sum::<f64>() / k as f64;
            ids.sort_unstable();
            let mut own: Vec<usize> = nb.iter().map(|n| n.index).collect();
            own.sort_unstable();
            (b, weight, own != *ids)
        },
    );
    let neighbor_mismatches = rows.iter().filter(|r| r.2).count();
    if neighbor_mismatches > 0 {
        log::debug!(
            "{neighbor_mismatches} of {} witnesses have a different k-neighborhood than their group",
            rows.len()
        );
    }
    let (sites, weights) = rows.into_iter().map(|(b, w, _)| (b, w)).unzip();
    Ok(SiteConstruction {
        cloud: WeightedPointCloud::new(sites, weights)?,
        neighbor_mismatches,
    })
}

/// Barycenters of every `k`-subset of a tiny cloud, each weighted by the
/// mean squared distance of its subset to the barycenter. The power
/// distance to this set is exactly the k-distance.
pub fn full_k_sites(points: &[Vec3], k: usize) -> Result<WeightedPointCloud> {
    let n = points.len();
    if n > FULL_K_MAX_N || k > FULL_K_MAX_K {
        return Err(Error::EnumerationTooLarge { n, k });
    }
    check_k(k, n)?;
    let mut sites = Vec::new();
    let mut weights = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let b = idx.iter().fold(Vec3::ZERO, |s, &i| s + points[i]) / k as f64;
        let w = idx.iter().map(|&i| points[i].distance_squared(b)).sum::<f64>() / k as f64;
        sites.push(b);
        weights.push(w);
        // next combination in lexicographic order
        let Some(pos) = (0..k).rev().find(|&j| idx[j] < n - k + j) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    WeightedPointCloud::new(sites, weights)
}
