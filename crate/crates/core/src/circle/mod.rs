//! Scalar functions on the circle and circle diffeomorphisms.

mod diffeo;
mod jet;
mod periodic;

pub use diffeo::CircleDiffeo;
pub use jet::Jet;
pub use periodic::{uniform_grid, PeriodicFunction};
