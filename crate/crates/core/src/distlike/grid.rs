use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::Vec3;
use crate::spatial::PowerIndex;

use super::{full_k_sites, median_sites, witnessed_sites, KDistance, WeightedPointCloud};

/// Largest number of nodes [`grid_eval`] will allocate.
pub const MAX_GRID_NODES: u64 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Euclidean distance to the cloud.
    Plain,
    Witnessed,
    Median,
    /// Exact k-distance evaluated by nearest-neighbor search.
    KDistance,
    /// Power distance over every k-subset barycenter (tiny clouds only).
    FullK,
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DistanceKind::Plain),
            "witnessed" => Ok(DistanceKind::Witnessed),
            "median" => Ok(DistanceKind::Median),
            "kdist" | "k-distance" => Ok(DistanceKind::KDistance),
            "full-k" | "fullk" => Ok(DistanceKind::FullK),
            _ => Err(Error::InvalidParameter(format!("unknown distance kind `{s}`"))),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Plain => "plain",
            DistanceKind::Witnessed => "witnessed",
            DistanceKind::Median => "median",
            DistanceKind::KDistance => "kdist",
            DistanceKind::FullK => "full-k",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DistanceLikeSpec {
    pub kind: DistanceKind,
    pub k: usize,
}

impl DistanceLikeSpec {
    pub fn new(kind: DistanceKind, k: usize) -> Self {
        DistanceLikeSpec { kind, k }
    }

    pub fn plain() -> Self {
        DistanceLikeSpec::new(DistanceKind::Plain, 1)
    }

    /// Weighted sites whose power distance realizes this function.
    /// `None` for [`DistanceKind::KDistance`], which has no tractable site set.
    pub fn sites(&self, points: &[Vec3]) -> Result<Option<WeightedPointCloud>> {
        Ok(Some(match self.kind {
            DistanceKind::Plain => {
                super::check_k(1, points.len())?;
                WeightedPointCloud::unweighted(points)?
            }
            DistanceKind::Witnessed => witnessed_sites(points, self.k)?.cloud,
            DistanceKind::Median => median_sites(points, self.k)?.cloud,
            DistanceKind::FullK => full_k_sites(points, self.k)?,
            DistanceKind::KDistance => return Ok(None),
        }))
    }
}

/// A distance-like function ready for pointwise evaluation.
#[derive(Clone, Debug)]
pub enum DistanceLike {
    Power(PowerIndex),
    KDistance(KDistance),
}

impl DistanceLike {
    pub fn build(spec: DistanceLikeSpec, points: &[Vec3]) -> Result<Self> {
        match spec.sites(points)? {
            Some(cloud) => Ok(DistanceLike::Power(cloud.power_index())),
            None => Ok(DistanceLike::KDistance(KDistance::new(points, spec.k)?)),
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        match self {
            DistanceLike::Power(idx) => idx.nearest(x).map_or(f64::INFINITY, |(v, _)| v.sqrt()),
            DistanceLike::KDistance(kd) => kd.eval(x),
        }
    }
}

/// Values on a regular grid, stored with x outermost and z innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub lo: Vec3,
    pub hi: Vec3,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let t = |idx: usize, n: usize, lo: f64, hi: f64| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * idx as f64 / (n - 1) as f64
            }
        };
        Vec3::new(
            t(i, self.dims[0], self.lo.x, self.hi.x),
            t(j, self.dims[1], self.lo.y, self.hi.y),
            t(k, self.dims[2], self.lo.z, self.hi.z),
        )
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    /// CSV with header `x,y,z,value`, one row per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,z,value")?;
        let [nx, ny, nz] = self.dims;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let p = self.node(i, j, k);
                    writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{:.16e}",
                        p.x,
                        p.y,
                        p.z,
                        self.value(i, j, k)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Samples `f` on the `dims` lattice spanning `[lo, hi]`.
pub fn grid_eval(f: &DistanceLike, lo: Vec3, hi: Vec3, dims: [usize; 3], exec: Execution) -> Result<ScalarGrid> {
    let total = dims.iter().map(|&d| d as u64).try_fold(1u64, |a, d| a.checked_mul(d));
    let total = match total {
        Some(t) if t <= MAX_GRID_NODES => t as usize,
        Some(t) => return Err(Error::GridTooLarge(t)),
        None => return Err(Error::GridTooLarge(u64::MAX)),
    };
    if total == 0 {
        return Err(Error::InvalidParameter("grid resolution must be at least 1 per axis".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter("grid bounds must be finite".into()));
    }
    let mut grid = ScalarGrid {
        lo,
        hi,
        dims,
        values: Vec::new(),
    };
    let (ny, nz) = (dims[1], dims[2]);
    grid.values = exec.map_range(total, |n| {
        let (i, j, k) = (n / (ny * nz), (n / nz) % ny, n % nz);
        f.eval(grid.node(i, j, k))
    });
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> (Vec3, Vec3) {
        (Vec3::splat(-1.0), Vec3::splat(1.0))
    }

    #[test]
    fn plain_single_point_is_radial() {
        let f = DistanceLike::build(DistanceLikeSpec::plain(), &[Vec3::ZERO]).unwrap();
        let (lo, hi) = cube();
        let g = grid_eval(&f, lo, hi, [3, 3, 3], Execution::Sequential).unwrap();
        assert_eq!(g.values.len(), 27);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((g.value(i, j, k) - g.node(i, j, k).norm()).abs() < 1e-15);
                }
            }
        }
        assert_eq!(g.value(1, 1, 1), 0.0);
        assert_eq!(g.node(0, 0, 2), Vec3::new(-1.0, -1.0, 1.0));
    }

    #[test]
    fn witnessed_k1_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p: Vec<Vec3> = (0..40)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let (lo, hi) = cube();
        let a = DistanceLike::build(DistanceLikeSpec::plain(), &p).unwrap();
        let b = DistanceLike::build(DistanceLikeSpec::new(DistanceKind::Witnessed, 1), &p).unwrap();
        let ga = grid_eval(&a, lo, hi, [7, 5, 6], Execution::Sequential).unwrap();
        let gb = grid_eval(&b, lo, hi, [7, 5, 6], Execution::Parallel).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn k_distance_grid_matches_full_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p: Vec<Vec3> = (0..10)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let (lo, hi) = cube();
        let a = DistanceLike::build(DistanceLikeSpec::new(DistanceKind::KDistance, 2), &p).unwrap();
        let b = DistanceLike::build(DistanceLikeSpec::new(DistanceKind::FullK, 2), &p).unwrap();
        let ga = grid_eval(&a, lo, hi, [9, 9, 9], Execution::Sequential).unwrap();
        let gb = grid_eval(&b, lo, hi, [9, 9, 9], Execution::Sequential).unwrap();
        for (x, y) in ga.values.iter().zip(&gb.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_guard() {
        let f = DistanceLike::build(DistanceLikeSpec::plain(), &[Vec3::ZERO]).unwrap();
        let (lo, hi) = cube();
        assert!(matches!(
            grid_eval(&f, lo, hi, [1025, 1024, 1024], Execution::Sequential),
            Err(Error::GridTooLarge(_))
        ));
        assert!(grid_eval(&f, lo, hi, [0, 4, 4], Execution::Sequential).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = DistanceLike::build(DistanceLikeSpec::plain(), &[Vec3::ZERO]).unwrap();
        let g = grid_eval(&f, Vec3::ZERO, Vec3::X, [2, 1, 1], Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "x,y,z,value");
        let last: Vec<f64> = lines[2].split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn kind_parsing() {
        for k in [
            DistanceKind::Plain,
            DistanceKind::Witnessed,
            DistanceKind::Median,
            DistanceKind::KDistance,
            DistanceKind::FullK,
        ] {
            assert_eq!(k.to_string().parse::<DistanceKind>().unwrap(), k);
        }
        assert!("euclid".parse::<DistanceKind>().is_err());
    }
}
