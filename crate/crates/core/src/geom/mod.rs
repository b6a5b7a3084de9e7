//! Exact low-level geometry: vectors, symmetric tensors, convex polytopes
//! and the polyhedral unit-ball models.

mod polyball;
mod polytope;
mod tensor;
mod vec3;

pub use polyball::{make_polyball, PolyBall, PolyBallModel, MAX_ICOSPHERE_LEVEL};
pub use polytope::{
    polytope_second_moment, signed_tetra_volume, tetra_second_moment, ClipOutcome, Clipper,
    ConvexPolytope, HalfSpace, REL_TOL,
};
pub use tensor::{sym_eigen, SymEigen, SymTensor3};
pub use vec3::{Mat3, Vec3};
