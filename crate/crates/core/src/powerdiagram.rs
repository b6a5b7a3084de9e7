//! Power cells of a weighted point cloud, each intersected with a scaled
//! polyball around its site.
//!
//! A cell is built by clipping `p + r_p · B`, `r_p = sqrt(R² − ω_p)`, with
//! the bisector of every other site in increasing distance. The nearest
//! sites are clipped first; the rest are gathered by a kd-tree walk that
//! discards every node whose power distance to each cell vertex exceeds the
//! vertex's own, then clipped in the same order. A bisector whose offset
//! is at least the cell's farthest vertex distance is skipped as well.
//! The skipped clips are exact no-ops, so the result is bit-identical to
//! clipping against every site.

use std::io::{self, Write};

use crate::distlike::WeightedPointCloud;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{ClipOutcome, Clipper, ConvexPolytope, HalfSpace, PolyBall, Vec3};
use crate::spatial::{box_dist2, Neighbor, PowerIndex};

const FIRST_BATCH: usize = 32;
const PRUNE_TOL: f64 = 1e-10;

struct Sweep {
    slack: f64,
    rho: f64,
}

enum Step {
    Next,
    Done,
    Emptied,
}

/// The side of the radical plane between two weighted sites that belongs to
/// the first one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bisector {
    Plane(HalfSpace),
    /// Coincident sites where the first one wins everywhere.
    Whole,
    /// Coincident sites where the first one wins nowhere.
    Empty,
}

/// `{x : ‖x − p‖² + ω_p <= ‖x − q‖² + ω_q}`. Coincident sites with equal
/// weights give [`Bisector::Whole`]; the caller breaks that tie.
pub fn bisector(p: Vec3, wp: f64, q: Vec3, wq: f64) -> Bisector {
    match local_bisector(q - p, wp, wq) {
        Bisector::Plane(h) => Bisector::Plane(h.translated(p)),
        b => b,
    }
}

/// Bisector in coordinates centered at `p`, with `dq = q − p`.
#[inline]
fn local_bisector(dq: Vec3, wp: f64, wq: f64) -> Bisector {
    let d2 = dq.norm_squared();
    if d2 == 0.0 {
        return if wp <= wq { Bisector::Whole } else { Bisector::Empty };
    }
    let d = d2.sqrt();
    Bisector::Plane(HalfSpace {
        normal: dq / d,
        offset: (d2 + wq - wp) / (2.0 * d),
    })
}

/// Builds cells of one cloud against a shared spatial index.
#[derive(Clone, Debug)]
pub struct CellBuilder<'a> {
    cloud: &'a WeightedPointCloud,
    ball: &'a PolyBall,
    big_r: f64,
    index: PowerIndex,
    min_weight: f64,
}

impl<'a> CellBuilder<'a> {
    pub fn new(cloud: &'a WeightedPointCloud, big_r: f64, ball: &'a PolyBall) -> Result<Self> {
        check_radius(big_r)?;
        Ok(CellBuilder {
            cloud,
            ball,
            big_r,
            index: PowerIndex::new(cloud.sites(), cloud.weights()),
            min_weight: cloud.min_weight(),
        })
    }

    pub fn cloud(&self) -> &WeightedPointCloud {
        self.cloud
    }

    pub fn radius(&self) -> f64 {
        self.big_r
    }

    /// Starting polytope `r_p · B` around the origin, or `None` when the
    /// offset ball of site `i` is empty.
    fn initial(&self, i: usize) -> Option<ConvexPolytope> {
        let r2 = self.big_r * self.big_r - self.cloud.weights()[i];
        if !(r2 > 0.0) {
            return None;
        }
        let mut poly = self.ball.polytope().clone();
        poly.scale(r2.sqrt());
        Some(poly)
    }

    /// Clips `poly` by the bisector between `i` and `j`. Returns false when
    /// the cell became empty.
    #[inline]
    fn clip_against(&self, clipper: &mut Clipper, poly: &mut ConvexPolytope, i: usize, j: usize) -> bool {
        let (sites, w) = (self.cloud.sites(), self.cloud.weights());
        match local_bisector(sites[j] - sites[i], w[i], w[j]) {
            Bisector::Plane(h) => clipper.clip(poly, &h) != ClipOutcome::Empty,
            Bisector::Whole if j < i && w[i] == w[j] => false,
            Bisector::Whole => true,
            Bisector::Empty => false,
        }
    }

    /// Cell of site `i` in coordinates centered at the site.
    pub fn local_cell(&self, i: usize, clipper: &mut Clipper) -> ConvexPolytope {
        let Some(mut poly) = self.initial(i) else {
            return ConvexPolytope::empty();
        };
        let sites = self.cloud.sites();
        let p = sites[i];
        let wp = self.cloud.weights()[i];
        let mut state = Sweep {
            slack: (wp - self.min_weight).max(0.0),
            rho: poly.max_distance_from(Vec3::ZERO),
        };
        let first = self.index.tree().nearest_k(p, FIRST_BATCH);
        for nb in &first {
            match self.step(&mut state, clipper, &mut poly, i, nb) {
                Step::Next => {}
                Step::Done => return poly,
                Step::Emptied => return ConvexPolytope::empty(),
            }
        }
        let Some(&last) = first.last() else {
            return poly;
        };
        if first.len() == self.cloud.len() {
            return poly;
        }

        // Remaining sites whose power ball reaches some vertex of the
        // current cell; any other site cannot cut it.
        let pi: Vec<f64> = poly.vertices().iter().map(|y| y.norm_squared() + wp).collect();
        let world: Vec<Vec3> = poly.vertices().iter().map(|y| *y + p).collect();
        // slack in length units, so a dropped site stays clear of every
        // vertex by a margin well above rounding
        let margin = PRUNE_TOL * (self.big_r + p.norm());
        let round = 1e-14 * p.norm_squared();
        let weights = self.cloud.weights();
        let mut rest = Vec::new();
        self.index.visit(
            |lo, hi, wmin| {
                let far = (p - lo).abs().max((hi - p).abs()).norm();
                let tol = 2.0 * far * margin + round;
                world.iter().zip(&pi).all(|(y, s)| box_dist2(*y, lo, hi) + wmin - s > tol)
            },
            |j| {
                let nb = Neighbor {
                    index: j,
                    dist2: sites[j].distance_squared(p),
                };
                if nb <= last {
                    return;
                }
                let v = sites[j] - p;
                let base = nb.dist2 + weights[j] - wp;
                let tol = 2.0 * nb.dist2.sqrt() * margin;
                if poly.vertices().iter().any(|y| base - 2.0 * v.dot(*y) <= tol) {
                    rest.push(nb);
                }
            },
        );
        rest.sort_unstable();
        for nb in &rest {
            match self.step(&mut state, clipper, &mut poly, i, nb) {
                Step::Next => {}
                Step::Done => return poly,
                Step::Emptied => return ConvexPolytope::empty(),
            }
        }
        poly
    }

    #[inline]
    fn step(&self, state: &mut Sweep, clipper: &mut Clipper, poly: &mut ConvexPolytope, i: usize, nb: &Neighbor) -> Step {
        let j = nb.index;
        if j == i {
            return Step::Next;
        }
        let d = nb.dist2.sqrt();
        // lower bound on the bisector offset of this and every farther site
        if d > 0.0 && (nb.dist2 - state.slack) / (2.0 * d) >= state.rho {
            return Step::Done;
        }
        let (wp, wj) = (self.cloud.weights()[i], self.cloud.weights()[j]);
        if d > 0.0 && (nb.dist2 + wj - wp) / (2.0 * d) >= state.rho {
            return Step::Next;
        }
        if !self.clip_against(clipper, poly, i, j) {
            return Step::Emptied;
        }
        state.rho = poly.max_distance_from(Vec3::ZERO);
        Step::Next
    }

    /// Cell of site `i` in world coordinates.
    pub fn cell(&self, i: usize) -> ConvexPolytope {
        let mut poly = self.local_cell(i, &mut Clipper::default());
        poly.translate(self.cloud.sites()[i]);
        poly
    }

    /// Reference construction clipping against every other site in the
    /// same order, centered at the site.
    pub fn local_cell_brute_force(&self, i: usize) -> ConvexPolytope {
        let Some(mut poly) = self.initial(i) else {
            return ConvexPolytope::empty();
        };
        let sites = self.cloud.sites();
        let p = sites[i];
        let mut order: Vec<(f64, usize)> = (0..sites.len())
            .filter(|&j| j != i)
            .map(|j| (sites[j].distance_squared(p), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut clipper = Clipper::default();
        for (_, j) in order {
            if !self.clip_against(&mut clipper, &mut poly, i, j) {
                return ConvexPolytope::empty();
            }
        }
        poly
    }
}

fn check_radius(big_r: f64) -> Result<()> {
    if big_r > 0.0 && big_r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("offset radius R must be positive, got {big_r}")))
    }
}

/// Cell of one site, in world coordinates.
pub fn build_cell(cloud: &WeightedPointCloud, index: usize, big_r: f64, ball: &PolyBall) -> Result<ConvexPolytope> {
    check_index(cloud, index)?;
    Ok(CellBuilder::new(cloud, big_r, ball)?.cell(index))
}

/// Cell of one site clipped against every other site, in world coordinates.
pub fn build_cell_brute_force(
    cloud: &WeightedPointCloud,
    index: usize,
    big_r: f64,
    ball: &PolyBall,
) -> Result<ConvexPolytope> {
    check_index(cloud, index)?;
    let mut poly = CellBuilder::new(cloud, big_r, ball)?.local_cell_brute_force(index);
    poly.translate(cloud.sites()[index]);
    Ok(poly)
}

fn check_index(cloud: &WeightedPointCloud, index: usize) -> Result<()> {
    if index < cloud.len() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "site index {index} out of range for {} sites",
            cloud.len()
        )))
    }
}

/// One cell per site, in site order, in world coordinates.
pub fn build_all_cells(
    cloud: &WeightedPointCloud,
    big_r: f64,
    ball: &PolyBall,
    exec: Execution,
) -> Result<Vec<ConvexPolytope>> {
    let builder = CellBuilder::new(cloud, big_r, ball)?;
    Ok(exec.map_range_with(cloud.len(), Clipper::default, |clipper, i| {
        let mut poly = builder.local_cell(i, clipper);
        poly.translate(cloud.sites()[i]);
        poly
    }))
}

/// Writes the cells as an OBJ polygon soup with one object per nonempty cell.
pub fn write_cells_obj<W: Write>(cells: &[ConvexPolytope], mut out: W) -> io::Result<()> {
    let mut next = 1;
    for (i, c) in cells.iter().enumerate() {
        if !c.is_empty() {
            next += c.write_obj(&format!("cell_{i}"), next, &mut out)?;
        }
    }
    Ok(())
}
