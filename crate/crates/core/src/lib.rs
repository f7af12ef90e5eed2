//! Cantor sets with flattened discrete logarithmic potential.
//!
//! Points are generated generation by generation from a word coding; each
//! generation's spacing coefficients are chosen so that the sibling
//! contribution cancels the parent's deviation from the running minimum of
//! the potential. Verification tools compare the result against Green
//! function estimates and walk-on-spheres harmonic measure.

pub mod calibrate;
pub mod coord;
pub mod error;
pub mod feasibility;
pub mod hier;
pub mod kernel;
pub mod level;
pub mod par;
pub mod params;
pub mod potential;
pub mod quad;
pub mod spec;
pub mod sum;
pub mod verify;
pub mod word;

pub use coord::{Dd, Point, Vec2};
pub use error::{Error, Result};
pub use kernel::{log_kernel, ring_kernel, KernelSpec, RingKernel};
pub use level::{cell_separation_bounds, point_of_word, Level};
pub use par::Execution;
pub use params::{ParamDocument, ParamTree};
pub use potential::{
    potential_at, potential_profile, sibling_increment, PotentialProfile, SumMethod,
};
pub use spec::{Alphabet, GeneratorSpec};
pub use word::{word_distance, Word};
