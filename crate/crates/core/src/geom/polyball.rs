use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::polytope::{ConvexPolytope, HalfSpace};
use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Largest icosphere subdivision level.
pub const MAX_ICOSPHERE_LEVEL: u8 = 5;

/// Polyhedral stand-in for the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolyBallModel {
    /// Regular dodecahedron whose 12 faces are tangent to the unit sphere.
    Dodecahedron,
    /// Subdivided icosahedron with vertices on the unit sphere
    /// (`20 · 4^level` faces). Nested across levels.
    Icosphere(u8),
}

impl Default for PolyBallModel {
    fn default() -> Self {
        PolyBallModel::Dodecahedron
    }
}

impl FromStr for PolyBallModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dodeca" | "dodecahedron" => Ok(PolyBallModel::Dodecahedron),
            _ => {
                let level = s
                    .strip_prefix("ico")
                    .and_then(|l| l.parse::<u8>().ok())
                    .ok_or_else(|| Error::UnknownPolyBall(s.to_string()))?;
                if level > MAX_ICOSPHERE_LEVEL {
                    return Err(Error::UnknownPolyBall(s.to_string()));
                }
                Ok(PolyBallModel::Icosphere(level))
            }
        }
    }
}

impl fmt::Display for PolyBallModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyBallModel::Dodecahedron => write!(f, "dodeca"),
            PolyBallModel::Icosphere(l) => write!(f, "ico{l}"),
        }
    }
}

/// A unit polyball: its half-spaces and the polytope they bound.
#[derive(Clone, Debug)]
pub struct PolyBall {
    model: PolyBallModel,
    polytope: ConvexPolytope,
    circumradius: f64,
}

impl PolyBall {
    pub fn new(model: PolyBallModel) -> Result<Self> {
        let polytope = match model {
            PolyBallModel::Dodecahedron => {
                let planes: Vec<HalfSpace> = icosahedron_vertices()
                    .into_iter()
                    .map(|n| HalfSpace::new(n, 1.0))
                    .collect();
                ConvexPolytope::from_half_spaces(&planes, Vec3::splat(-2.0), Vec3::splat(2.0))
            }
            PolyBallModel::Icosphere(level) => {
                if level > MAX_ICOSPHERE_LEVEL {
                    return Err(Error::UnknownPolyBall(model.to_string()));
                }
                icosphere(level)
            }
        };
        let circumradius = polytope.max_distance_from(Vec3::ZERO);
        Ok(PolyBall {
            model,
            polytope,
            circumradius,
        })
    }

    pub fn model(&self) -> PolyBallModel {
        self.model
    }

    /// The unit polytope, centered at the origin.
    pub fn polytope(&self) -> &ConvexPolytope {
        &self.polytope
    }

    pub fn unit_half_spaces(&self) -> &[HalfSpace] {
        self.polytope.planes()
    }

    /// Largest vertex norm of the unit polytope (1 for the icospheres).
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Half-spaces of `center + radius · B`.
    pub fn half_spaces(&self, radius: f64, center: Vec3) -> Vec<HalfSpace> {
        self.unit_half_spaces()
            .iter()
            .map(|h| h.scaled(radius).translated(center))
            .collect()
    }
}

/// Half-spaces of the polyball `center + radius · B`.
pub fn make_polyball(model: PolyBallModel, radius: f64, center: Vec3) -> Result<Vec<HalfSpace>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("polyball radius must be positive, got {radius}")));
    }
    Ok(PolyBall::new(model)?.half_spaces(radius, center))
}

/// The 12 unit vectors (0, ±1, ±φ) and cyclic permutations.
fn icosahedron_vertices() -> Vec<Vec3> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::with_capacity(12);
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            v.push(Vec3::new(0.0, s1, s2 * phi));
            v.push(Vec3::new(s1, s2 * phi, 0.0));
            v.push(Vec3::new(s2 * phi, 0.0, s1));
        }
    }
    v.into_iter().map(Vec3::normalize).collect()
}

fn icosphere(level: u8) -> ConvexPolytope {
    let mut vertices = icosahedron_vertices();
    // The 20 faces are the vertex triples at mutual minimal distance.
    let edge2 = (0..12)
        .flat_map(|i| (i + 1..12).map(move |j| (i, j)))
        .map(|(i, j)| vertices[i].distance_squared(vertices[j]))
        .fold(f64::INFINITY, f64::min);
    let adjacent = |a: Vec3, b: Vec3| a.distance_squared(b) < edge2 * 1.01;
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                let (a, b, c) = (vertices[i], vertices[j], vertices[k]);
                if adjacent(a, b) && adjacent(b, c) && adjacent(a, c) {
                    let n = (b - a).cross(c - a);
                    faces.push(if n.dot(a) > 0.0 { [i, j, k] } else { [i, k, j] });
                }
            }
        }
    }

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    let planes = faces
        .iter()
        .map(|&[a, b, c]| {
            let n = (vertices[b] - vertices[a])
                .cross(vertices[c] - vertices[a])
                .normalize();
            let offset = (n.dot(vertices[a]) + n.dot(vertices[b]) + n.dot(vertices[c])) / 3.0;
            HalfSpace { normal: n, offset }
        })
        .collect();
    let rings: Vec<Vec<usize>> = faces.iter().map(|f| f.to_vec()).collect();
    ConvexPolytope::from_parts(vertices, &rings, planes)
}
