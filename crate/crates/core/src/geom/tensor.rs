use std::ops::{Add, AddAssign, Mul, Sub};

use super::vec3::{Mat3, Vec3};

/// Symmetric 3x3 matrix stored by its six independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: SymTensor3 = SymTensor3::diag(1.0, 1.0, 1.0);

    /// Entries in the order m11, m12, m13, m22, m23, m33.
    pub const fn new(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64, zz: f64) -> Self {
        SymTensor3 { xx, xy, xz, yy, yz, zz }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        SymTensor3::new(a, 0.0, 0.0, b, 0.0, c)
    }

    /// `v ⊗ v`.
    #[inline]
    pub fn outer(v: Vec3) -> Self {
        SymTensor3::new(
            v.x * v.x,
            v.x * v.y,
            v.x * v.z,
            v.y * v.y,
            v.y * v.z,
            v.z * v.z,
        )
    }

    /// Symmetric part of `v ⊗ w`.
    pub fn sym_outer(v: Vec3, w: Vec3) -> Self {
        SymTensor3::new(
            v.x * w.x,
            0.5 * (v.x * w.y + v.y * w.x),
            0.5 * (v.x * w.z + v.z * w.x),
            v.y * w.y,
            0.5 * (v.y * w.z + v.z * w.y),
            v.z * w.z,
        )
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        SymTensor3::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    /// Symmetric part of a general matrix.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        SymTensor3::new(
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.to_matrix()[i][j]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn frobenius_norm(&self) -> f64 {
        let off = self.xy * self.xy + self.xz * self.xz + self.yz * self.yz;
        (self.xx * self.xx + self.yy * self.yy + self.zz * self.zz + 2.0 * off).sqrt()
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    /// `Q · M · Qᵀ`.
    pub fn rotate(&self, q: &Mat3) -> SymTensor3 {
        let m = Mat3(self.to_matrix());
        SymTensor3::from_matrix(&q.matmul(&m).matmul(&q.transpose()).0)
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&e| e == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|e| e.is_finite())
    }

    pub fn max_abs_diff(&self, o: &SymTensor3) -> f64 {
        (*self - *o).to_array().iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Sum with pairwise (tree) reduction; the association depends only on
    /// the slice length, never on scheduling.
    pub fn pairwise_sum(items: &[SymTensor3]) -> SymTensor3 {
        const LEAF: usize = 8;
        if items.len() <= LEAF {
            let mut acc = SymTensor3::ZERO;
            for t in items {
                acc += *t;
            }
            return acc;
        }
        let mid = items.len() / 2;
        Self::pairwise_sum(&items[..mid]) + Self::pairwise_sum(&items[mid..])
    }

    /// Eigen-decomposition, see [`sym_eigen`].
    pub fn eigen(&self) -> SymEigen {
        sym_eigen(self)
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    #[inline]
    fn add(self, o: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self.xx + o.xx,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yy + o.yy,
            self.yz + o.yz,
            self.zz + o.zz,
        )
    }
}

impl AddAssign for SymTensor3 {
    #[inline]
    fn add_assign(&mut self, o: SymTensor3) {
        *self = *self + o;
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    #[inline]
    fn sub(self, o: SymTensor3) -> SymTensor3 {
        self + o * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = SymTensor3;
    #[inline]
    fn mul(self, s: f64) -> SymTensor3 {
        SymTensor3::new(
            self.xx * s,
            self.xy * s,
            self.xz * s,
            self.yy * s,
            self.yz * s,
            self.zz * s,
        )
    }
}

/// Eigenpairs of a symmetric tensor, sorted so that `values[0] >= values[1] >= values[2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

impl SymEigen {
    /// `Σ λᵢ vᵢ ⊗ vᵢ`.
    pub fn reconstruct(&self) -> SymTensor3 {
        let mut t = SymTensor3::ZERO;
        for (l, v) in self.values.iter().zip(&self.vectors) {
            t += SymTensor3::outer(*v) * *l;
        }
        t
    }
}

/// Flips `v` so that its component of largest magnitude is non-negative.
/// Components within a relative 1e-12 of the maximum count as tied and the
/// lowest index among them decides.
fn canonical_sign(v: Vec3) -> Vec3 {
    let a = v.to_array();
    let m = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let lead = a
        .iter()
        .copied()
        .find(|c| c.abs() >= m * (1.0 - 1e-12))
        .unwrap_or(0.0);
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

/// Eigen-decomposition of a symmetric 3x3 tensor by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted in decreasing order; every eigenvector has its
/// largest-magnitude component non-negative, so the output is a pure
/// function of the input bits.
pub fn sym_eigen(t: &SymTensor3) -> SymEigen {
    let mut a = t.to_matrix();
    let mut v = Mat3::IDENTITY.0;
    let scale = t.frobenius_norm();

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off == 0.0 || off.sqrt() <= 1e-17 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let tan = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (tan * tan + 1.0).sqrt();
            let s = tan * c;
            // A <- Jᵀ A J with J the (p, q) Givens rotation.
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for row in v.iter_mut() {
                let (vkp, vkq) = (row[p], row[q]);
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }

    let mut pairs: Vec<(f64, Vec3)> = (0..3)
        .map(|j| (a[j][j], Vec3::new(v[0][j], v[1][j], v[2][j])))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    SymEigen {
        values: [pairs[0].0, pairs[1].0, pairs[2].0],
        vectors: [
            canonical_sign(pairs[0].1),
            canonical_sign(pairs[1].1),
            canonical_sign(pairs[2].1),
        ],
    }
}
