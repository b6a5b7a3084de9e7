use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

/// Analytic test surfaces with known normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// The rectangle `[−half_x, half_x] × [−half_y, half_y]` in the plane `z = 0`.
    Plane { half_x: f64, half_y: f64 },
    /// Two perpendicular half-planes meeting along the y axis:
    /// `z = 0, x ∈ [−length, 0]` and `x = 0, z ∈ [−length, 0]`, both with
    /// `y ∈ [−half_width, half_width]`.
    Wedge { length: f64, half_width: f64 },
    /// Surface of the cube `[−half, half]³`.
    Cube { half: f64 },
}

/// How sample positions are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampler {
    /// Independent area-uniform samples.
    #[default]
    Random,
    /// Fibonacci spiral under a seeded random rotation (spheres only).
    Fibonacci,
}

/// Points on a surface with their exact normals.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSample {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        let valid = match *self {
            Shape::Sphere { radius } => ok(&[radius]),
            Shape::Ellipsoid { a, b, c } => ok(&[a, b, c]),
            Shape::Plane { half_x, half_y } => ok(&[half_x, half_y]),
            Shape::Wedge { length, half_width } => ok(&[length, half_width]),
            Shape::Cube { half } => ok(&[half]),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("shape dimensions must be positive: {self}")))
        }
    }

    /// Axis-aligned bounding box of the surface.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match *self {
            Shape::Sphere { radius } => (Vec3::splat(-radius), Vec3::splat(radius)),
            Shape::Ellipsoid { a, b, c } => (Vec3::new(-a, -b, -c), Vec3::new(a, b, c)),
            Shape::Plane { half_x, half_y } => (Vec3::new(-half_x, -half_y, 0.0), Vec3::new(half_x, half_y, 0.0)),
            Shape::Wedge { length, half_width } => (
                Vec3::new(-length, -half_width, -length),
                Vec3::new(0.0, half_width, 0.0),
            ),
            Shape::Cube { half } => (Vec3::splat(-half), Vec3::splat(half)),
        }
    }

    /// Bounding-box diagonal `D`.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// The same shape uniformly scaled.
    pub fn scaled(&self, s: f64) -> Shape {
        match *self {
            Shape::Sphere { radius } => Shape::Sphere { radius: radius * s },
            Shape::Ellipsoid { a, b, c } => Shape::Ellipsoid {
                a: a * s,
                b: b * s,
                c: c * s,
            },
            Shape::Plane { half_x, half_y } => Shape::Plane {
                half_x: half_x * s,
                half_y: half_y * s,
            },
            Shape::Wedge { length, half_width } => Shape::Wedge {
                length: length * s,
                half_width: half_width * s,
            },
            Shape::Cube { half } => Shape::Cube { half: half * s },
        }
    }

    /// The same shape scaled so that its diameter is `d`.
    pub fn with_diameter(&self, d: f64) -> Shape {
        self.scaled(d / self.diameter())
    }

    /// `n` area-uniform samples, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64, sampler: Sampler) -> Result<SurfaceSample> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if sampler == Sampler::Fibonacci {
            let Shape::Sphere { radius } = *self else {
                return Err(Error::InvalidParameter(format!("Fibonacci sampling needs a sphere, got {self}")));
            };
            let q = random_rotation(&mut rng);
            let golden = PI * (3.0 - 5f64.sqrt());
            let normals: Vec<Vec3> = (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    q.apply(Vec3::new(s * phi.cos(), s * phi.sin(), z))
                })
                .collect();
            let points = normals.iter().map(|u| *u * radius).collect();
            return Ok(SurfaceSample { points, normals });
        }
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for _ in 0..n {
            let (p, nrm) = self.draw(&mut rng);
            points.push(p);
            normals.push(nrm);
        }
        Ok(SurfaceSample { points, normals })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
        match *self {
            Shape::Sphere { radius } => {
                let u = unit_vector(rng);
                (u * radius, u)
            }
            Shape::Ellipsoid { a, b, c } => {
                // map the sphere and accept by the relative area element
                let max = 1.0 / a.min(b).min(c);
                loop {
                    let u = unit_vector(rng);
                    let g = Vec3::new(u.x / a, u.y / b, u.z / c);
                    if rng.random::<f64>() * max <= g.norm() {
                        return (Vec3::new(a * u.x, b * u.y, c * u.z), g.normalize());
                    }
                }
            }
            Shape::Plane { half_x, half_y } => (
                Vec3::new(
                    rng.random_range(-half_x..=half_x),
                    rng.random_range(-half_y..=half_y),
                    0.0,
                ),
                Vec3::Z,
            ),
            Shape::Wedge { length, half_width } => {
                let u = rng.random_range(-length..=0.0);
                let y = rng.random_range(-half_width..=half_width);
                if rng.random::<bool>() {
                    (Vec3::new(u, y, 0.0), Vec3::Z)
                } else {
                    (Vec3::new(0.0, y, u), Vec3::X)
                }
            }
            Shape::Cube { half } => {
                let face = rng.random_range(0..6usize);
                let axis = face / 2;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let mut p = [
                    rng.random_range(-half..=half),
                    rng.random_range(-half..=half),
                    rng.random_range(-half..=half),
                ];
                p[axis] = sign * half;
                let mut nrm = [0.0; 3];
                nrm[axis] = sign;
                (Vec3::from(p), Vec3::from(nrm))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Ellipsoid { .. } => "ellipsoid",
            Shape::Plane { .. } => "plane",
            Shape::Wedge { .. } => "wedge",
            Shape::Cube { .. } => "cube",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Sphere { radius } => write!(f, "sphere({radius})"),
            Shape::Ellipsoid { a, b, c } => write!(f, "ellipsoid({a},{b},{c})"),
            Shape::Plane { half_x, half_y } => write!(f, "plane({half_x},{half_y})"),
            Shape::Wedge { length, half_width } => write!(f, "wedge({length},{half_width})"),
            Shape::Cube { half } => write!(f, "cube({half})"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// `name`, `name:a,b,...` or `name(a,b,...)`; a bare name uses unit
    /// parameters, except the ellipsoid which defaults to `(2, 1.5, 1)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |m: &str| Error::InvalidParameter(format!("bad shape `{s}`: {m}"));
        let (name, args) = match s.find([':', '(']) {
            Some(i) => (&s[..i], s[i + 1..].trim_end_matches(')')),
            None => (s, ""),
        };
        let v: Vec<f64> = args
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| a.parse::<f64>().map_err(|_| bad("parameters must be numbers")))
            .collect::<Result<_>>()?;
        let arity = |n: usize| -> Result<()> {
            if v.is_empty() || v.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("expected {n} parameters")))
            }
        };
        let get = |i: usize, d: f64| v.get(i).copied().unwrap_or(d);
        let shape = match name {
            "sphere" => {
                arity(1)?;
                Shape::Sphere { radius: get(0, 1.0) }
            }
            "ellipsoid" => {
                arity(3)?;
                Shape::Ellipsoid {
                    a: get(0, 2.0),
                    b: get(1, 1.5),
                    c: get(2, 1.0),
                }
            }
            "plane" => {
                arity(2)?;
                Shape::Plane {
                    half_x: get(0, 1.0),
                    half_y: get(1, 1.0),
                }
            }
            "wedge" => {
                arity(2)?;
                Shape::Wedge {
                    length: get(0, 1.0),
                    half_width: get(1, 1.0),
                }
            }
            "cube" => {
                arity(1)?;
                Shape::Cube { half: get(0, 1.0) }
            }
            _ => return Err(bad("expected sphere, ellipsoid, plane, wedge or cube")),
        };
        shape.validate()?;
        Ok(shape)
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Sampler::Random),
            "fibonacci" => Ok(Sampler::Fibonacci),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sampler `{s}` (expected random or fibonacci)"
            ))),
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Uniformly distributed rotation (random unit quaternion).
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y, z, w) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    Mat3([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_strings() {
        let cases = [
            ("sphere", Shape::Sphere { radius: 1.0 }),
            ("sphere:2.5", Shape::Sphere { radius: 2.5 }),
            ("ellipsoid", Shape::Ellipsoid { a: 2.0, b: 1.5, c: 1.0 }),
            ("wedge:1,0.5", Shape::Wedge { length: 1.0, half_width: 0.5 }),
            ("plane(3,4)", Shape::Plane { half_x: 3.0, half_y: 4.0 }),
        ];
        for (text, shape) in cases {
            assert_eq!(text.parse::<Shape>().unwrap(), shape);
            assert_eq!(shape.to_string().parse::<Shape>().unwrap(), shape);
        }
        for bad in ["torus", "sphere:1,2", "cube:-1", "wedge:a,b"] {
            assert!(bad.parse::<Shape>().is_err(), "{bad}");
        }
        assert_eq!("fibonacci".parse::<Sampler>().unwrap(), Sampler::Fibonacci);
        assert!("grid".parse::<Sampler>().is_err());
    }

    #[test]
    fn sphere_samples_on_surface() {
        for sampler in [Sampler::Random, Sampler::Fibonacci] {
            let s = Shape::Sphere { radius: 2.0 }.sample(500, 3, sampler).unwrap();
            for (p, n) in s.points.iter().zip(&s.normals) {
                assert!((p.norm() - 2.0).abs() < 1e-12);
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(p.normalize().distance(*n) < 1e-12);
            }
        }
    }

    #[test]
    fn plane_normals() {
        let s = Shape::Plane { half_x: 1.0, half_y: 2.0 }.sample(100, 1, Sampler::Random).unwrap();
        assert!(s.normals.iter().all(|n| *n == Vec3::Z));
        assert!(s.points.iter().all(|p| p.z == 0.0 && p.x.abs() <= 1.0 && p.y.abs() <= 2.0));
    }

    #[test]
    fn unit_ellipsoid_matches_sphere() {
        let e = Shape::Ellipsoid { a: 1.0, b: 1.0, c: 1.0 }.sample(20_000, 5, Sampler::Random).unwrap();
        assert!(e.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        // area-uniform: the mean of z² on the unit sphere is 1/3
        let mz2 = e.points.iter().map(|p| p.z * p.z).sum::<f64>() / 20_000.0;
        assert!((mz2 - 1.0 / 3.0).abs() < 0.01);
        let mz = e.points.iter().map(|p| p.z).sum::<f64>() / 20_000.0;
        assert!(mz.abs() < 0.015);
    }

    #[test]
    fn ellipsoid_on_surface_with_normals() {
        let shape = Shape::Ellipsoid { a: 2.0, b: 1.5, c: 1.0 };
        let s = shape.sample(2000, 6, Sampler::Random).unwrap();
        for (p, n) in s.points.iter().zip(&s.normals) {
            let f = (p.x / 2.0).powi(2) + (p.y / 1.5).powi(2) + p.z * p.z;
            assert!((f - 1.0).abs() < 1e-12);
            let g = Vec3::new(p.x / 4.0, p.y / 2.25, p.z).normalize();
            assert!(g.distance(*n) < 1e-12);
        }
        assert!((shape.with_diameter(2.0).diameter() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn wedge_and_cube_surfaces() {
        let s = Shape::Wedge { length: 1.0, half_width: 1.0 }.sample(1000, 2, Sampler::Random).unwrap();
        for (p, n) in s.points.iter().zip(&s.normals) {
            if *n == Vec3::Z {
                assert!(p.z == 0.0 && p.x <= 0.0);
            } else {
                assert!(*n == Vec3::X && p.x == 0.0 && p.z <= 0.0);
            }
        }
        let c = Shape::Cube { half: 0.5 }.sample(600, 2, Sampler::Random).unwrap();
        for (p, n) in c.points.iter().zip(&c.normals) {
            assert!((p.dot(*n) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let shape = Shape::Cube { half: 1.0 };
        assert_eq!(shape.sample(50, 9, Sampler::Random).unwrap(), shape.sample(50, 9, Sampler::Random).unwrap());
        assert_ne!(shape.sample(50, 9, Sampler::Random).unwrap(), shape.sample(50, 10, Sampler::Random).unwrap());
        assert!(Shape::Sphere { radius: -1.0 }.sample(5, 0, Sampler::Random).is_err());
        assert!(shape.sample(5, 0, Sampler::Fibonacci).is_err());
        assert!(shape.sample(0, 0, Sampler::Random).is_err());
    }

    #[test]
    fn random_rotation_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let q = random_rotation(&mut rng);
            let p = q.transpose().matmul(&q);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((p.0[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            let det = q.apply(Vec3::X).cross(q.apply(Vec3::Y)).dot(q.apply(Vec3::Z));
            assert!((det - 1.0).abs() < 1e-12);
        }
    }
}
