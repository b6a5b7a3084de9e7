//! Voronoi covariance measure of a power distance.
//!
//! Each site `p` carries the tensor `M_p = ∫ (x − p) ⊗ (x − p) dx` over its
//! bounded power cell. Convolving with a probe `χ` gives `Σ_p χ(p) M_p`.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distlike::WeightedPointCloud;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{Clipper, PolyBall, PolyBallModel, SymTensor3, Vec3};
use crate::powerdiagram::CellBuilder;
use crate::spatial::KdTree;

/// Fraction of empty cells above which [`compute_field`] logs a warning.
pub const EMPTY_CELL_WARN_FRACTION: f64 = 0.1;

const FIELD_MAGIC: &[u8; 4] = b"VCMF";
const FIELD_VERSION: u32 = 1;

/// Non-negative probe function, evaluated at site positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeKernel {
    /// `1` on the closed ball, `0` outside.
    BallIndicator { center: Vec3, radius: f64 },
    /// `max(0, 1 − ‖x − center‖ / radius)`.
    LipschitzHat { center: Vec3, radius: f64 },
}

impl ProbeKernel {
    pub fn ball(center: Vec3, radius: f64) -> Result<Self> {
        check_probe_radius(radius)?;
        Ok(ProbeKernel::BallIndicator { center, radius })
    }

    pub fn hat(center: Vec3, radius: f64) -> Result<Self> {
        check_probe_radius(radius)?;
        Ok(ProbeKernel::LipschitzHat { center, radius })
    }

    pub fn center(&self) -> Vec3 {
        match *self {
            ProbeKernel::BallIndicator { center, .. } | ProbeKernel::LipschitzHat { center, .. } => center,
        }
    }

    /// Radius of the support.
    pub fn radius(&self) -> f64 {
        match *self {
            ProbeKernel::BallIndicator { radius, .. } | ProbeKernel::LipschitzHat { radius, .. } => radius,
        }
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        match *self {
            ProbeKernel::BallIndicator { center, radius } => {
                if x.distance_squared(center) <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            ProbeKernel::LipschitzHat { center, radius } => (1.0 - x.distance(center) / radius).max(0.0),
        }
    }
}

fn check_probe_radius(r: f64) -> Result<()> {
    if r > 0.0 && !r.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("probe radius must be positive, got {r}")))
    }
}

/// Per-site covariance tensors of a weighted cloud at offset radius `R`.
#[derive(Clone, Debug)]
pub struct VcmField {
    cloud: WeightedPointCloud,
    radius: f64,
    model: PolyBallModel,
    tensors: Vec<SymTensor3>,
    empty_cells: usize,
    tree: KdTree,
}

/// [`compute_field_with`] using the default execution mode.
pub fn compute_field(cloud: WeightedPointCloud, big_r: f64, model: PolyBallModel) -> Result<VcmField> {
    compute_field_with(cloud, big_r, model, Execution::default())
}

pub fn compute_field_with(
    cloud: WeightedPointCloud,
    big_r: f64,
    model: PolyBallModel,
    exec: Execution,
) -> Result<VcmField> {
    let ball = PolyBall::new(model)?;
    let builder = CellBuilder::new(&cloud, big_r, &ball)?;
    let cells = exec.map_range_with(cloud.len(), Clipper::default, |clipper, i| {
        let cell = builder.local_cell(i, clipper);
        (cell.second_moment(Vec3::ZERO), cell.is_empty())
    });
    let empty_cells = cells.iter().filter(|c| c.1).count();
    if empty_cells as f64 > EMPTY_CELL_WARN_FRACTION * cloud.len() as f64 {
        log::warn!(
            "{empty_cells} of {} cells are empty: their site weight exceeds R² = {}",
            cloud.len(),
            big_r * big_r
        );
    }
    let tensors = cells.into_iter().map(|c| c.0).collect();
    let tree = KdTree::new(cloud.sites());
    Ok(VcmField {
        cloud,
        radius: big_r,
        model,
        tensors,
        empty_cells,
        tree,
    })
}

impl VcmField {
    pub fn cloud(&self) -> &WeightedPointCloud {
        &self.cloud
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn model(&self) -> PolyBallModel {
        self.model
    }

    pub fn tensors(&self) -> &[SymTensor3] {
        &self.tensors
    }

    pub fn empty_cells(&self) -> usize {
        self.empty_cells
    }

    /// `Σ_p χ(p) M_p` over the sites in the probe support, summed pairwise in
    /// ascending site order.
    pub fn convolve(&self, chi: &ProbeKernel) -> SymTensor3 {
        let mut terms = Vec::new();
        self.convolve_into(chi, &mut terms)
    }

    /// [`convolve`](Self::convolve) reusing a scratch buffer.
    pub fn convolve_into(&self, chi: &ProbeKernel, terms: &mut Vec<SymTensor3>) -> SymTensor3 {
        terms.clear();
        let sites = self.cloud.sites();
        for i in self.tree.within_radius(chi.center(), chi.radius()) {
            let w = chi.eval(sites[i]);
            if w > 0.0 {
                terms.push(if w == 1.0 { self.tensors[i] } else { self.tensors[i] * w });
            }
        }
        SymTensor3::pairwise_sum(terms)
    }

    /// Sum of every tensor.
    pub fn total(&self) -> SymTensor3 {
        SymTensor3::pairwise_sum(&self.tensors)
    }

    /// CSV with header `site_index,x,y,z,m11,m12,m13,m22,m23,m33`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "site_index,x,y,z,m11,m12,m13,m22,m23,m33")?;
        for (i, (p, m)) in self.cloud.sites().iter().zip(&self.tensors).enumerate() {
            write!(out, "{i},{:.17e},{:.17e},{:.17e}", p.x, p.y, p.z)?;
            for e in m.to_array() {
                write!(out, ",{e:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Little-endian binary: magic `VCMF`, `u32` version, `u64` row count,
    /// `f64` radius, then per site ten `f64` (index, x, y, z, six tensor
    /// entries).
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(FIELD_MAGIC)?;
        out.write_all(&FIELD_VERSION.to_le_bytes())?;
        out.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        out.write_all(&self.radius.to_le_bytes())?;
        for (i, (p, m)) in self.cloud.sites().iter().zip(&self.tensors).enumerate() {
            out.write_all(&(i as f64).to_le_bytes())?;
            for e in p.to_array().into_iter().chain(m.to_array()) {
                out.write_all(&e.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn records(&self) -> Vec<FieldRecord> {
        self.cloud
            .sites()
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(index, (&site, &tensor))| FieldRecord { index, site, tensor })
            .collect()
    }
}

/// One serialized row of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRecord {
    pub index: usize,
    pub site: Vec3,
    pub tensor: SymTensor3,
}

/// Reads the output of [`VcmField::write_binary`], returning the radius and rows.
pub fn read_field_binary<R: Read>(mut input: R) -> io::Result<(f64, Vec<FieldRecord>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(bad("not a VCM field file"));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != FIELD_VERSION {
        return Err(bad("unsupported VCM field version"));
    }
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8);
    input.read_exact(&mut b8)?;
    let radius = f64::from_le_bytes(b8);
    let mut rows = Vec::new();
    for _ in 0..count {
        let mut v = [0.0; 10];
        for e in &mut v {
            input.read_exact(&mut b8)?;
            *e = f64::from_le_bytes(b8);
        }
        rows.push(FieldRecord {
            index: v[0] as usize,
            site: Vec3::new(v[1], v[2], v[3]),
            tensor: SymTensor3::from_array([v[4], v[5], v[6], v[7], v[8], v[9]]),
        });
    }
    Ok((radius, rows))
}

/// Reads the output of [`VcmField::write_csv`].
pub fn read_field_csv<R: Read>(mut input: R) -> io::Result<Vec<FieldRecord>> {
    let bad = |line: usize, m: &str| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {m}"));
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "site_index,x,y,z,m11,m12,m13,m22,m23,m33" => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(n + 1, "expected 10 columns"));
        }
        let index = f[0].trim().parse().map_err(|_| bad(n + 1, "bad site index"))?;
        let mut v = [0.0; 9];
        for (e, t) in v.iter_mut().zip(&f[1..]) {
            *e = t.trim().parse().map_err(|_| bad(n + 1, "bad number"))?;
        }
        rows.push(FieldRecord {
            index,
            site: Vec3::new(v[0], v[1], v[2]),
            tensor: SymTensor3::from_array([v[3], v[4], v[5], v[6], v[7], v[8]]),
        });
    }
    Ok(rows)
}

/// Monte-Carlo estimate of a convolved VCM with per-entry standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub tensor: SymTensor3,
    /// Standard error of each tensor entry.
    pub std_err: SymTensor3,
    pub trace_std_err: f64,
    pub samples: usize,
    pub accepted: usize,
}

impl McEstimate {
    /// Standard error of the Frobenius norm of the estimate's error,
    /// treating entries as independent.
    pub fn frobenius_std_err(&self) -> f64 {
        let s = self.std_err;
        (s.xx * s.xx + s.yy * s.yy + s.zz * s.zz + 2.0 * (s.xy * s.xy + s.xz * s.xz + s.yz * s.yz)).sqrt()
    }
}

/// Smallest sample count accepted by [`mc_oracle_vcm`].
pub const MC_MIN_SAMPLES: usize = 10_000;
const MC_CHUNK: usize = 1 << 16;

/// Estimates `∫ (x − p(x)) ⊗ (x − p(x)) χ(p(x)) dx` over `{δ <= R}`, where
/// `p(x)` is the power-nearest site, by uniform sampling of the bounding box
/// of the balls `B(p, sqrt(R² − ω_p))`.
pub fn mc_oracle_vcm(
    cloud: &WeightedPointCloud,
    big_r: f64,
    chi: &ProbeKernel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_oracle_vcm_with(cloud, big_r, chi, n_samples, seed, Execution::default())
}

pub fn mc_oracle_vcm_with(
    cloud: &WeightedPointCloud,
    big_r: f64,
    chi: &ProbeKernel,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte-Carlo oracle needs at least {MC_MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    if !(big_r > 0.0 && big_r.is_finite()) {
        return Err(Error::InvalidParameter(format!("offset radius R must be positive, got {big_r}")));
    }
    let r2 = big_r * big_r;
    let mut bounds: Option<(Vec3, Vec3)> = None;
    for (p, w) in cloud.sites().iter().zip(cloud.weights()) {
        if r2 - w > 0.0 {
            let e = Vec3::splat((r2 - w).sqrt());
            bounds = Some(match bounds {
                None => (*p - e, *p + e),
                Some((lo, hi)) => (lo.min(*p - e), hi.max(*p + e)),
            });
        }
    }
    let Some((lo, hi)) = bounds else {
        return Err(Error::NoAcceptedSamples);
    };
    let ext = hi - lo;
    let box_volume = ext.x * ext.y * ext.z;
    let index = cloud.power_index();
    let sites = cloud.sites();

    let chunks = n_samples.div_ceil(MC_CHUNK);
    // per chunk: accepted count, Σf and Σf² for the six entries and the trace
    let partial = exec.map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
        let mut acc = 0usize;
        let mut sum = [0.0f64; 7];
        let mut sq = [0.0f64; 7];
        for _ in 0..count {
            let x = Vec3::new(
                lo.x + ext.x * rng.random::<f64>(),
                lo.y + ext.y * rng.random::<f64>(),
                lo.z + ext.z * rng.random::<f64>(),
            );
            let (v, j) = index.nearest(x).expect("nonempty cloud");
            if v > r2 {
                continue;
            }
            acc += 1;
            let w = chi.eval(sites[j]);
            if w == 0.0 {
                continue;
            }
            let m = SymTensor3::outer(x - sites[j]) * w;
            let a = m.to_array();
            for k in 0..6 {
                sum[k] += a[k];
                sq[k] += a[k] * a[k];
            }
            let t = m.trace();
            sum[6] += t;
            sq[6] += t * t;
        }
        (acc, sum, sq)
    });
    let mut accepted = 0;
    let mut sum = [0.0f64; 7];
    let mut sq = [0.0f64; 7];
    for (a, s, q) in partial {
        accepted += a;
        for k in 0..7 {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    if accepted == 0 {
        return Err(Error::NoAcceptedSamples);
    }
    let n = n_samples as f64;
    let mut mean = [0.0; 7];
    let mut se = [0.0; 7];
    for k in 0..7 {
        let m = sum[k] / n;
        let var = (sq[k] / n - m * m).max(0.0);
        mean[k] = m * box_volume;
        se[k] = (var / n).sqrt() * box_volume;
    }
    Ok(McEstimate {
        tensor: SymTensor3::from_array([mean[0], mean[1], mean[2], mean[3], mean[4], mean[5]]),
        std_err: SymTensor3::from_array([se[0], se[1], se[2], se[3], se[4], se[5]]),
        trace_std_err: se[6],
        samples: n_samples,
        accepted,
    })
}
