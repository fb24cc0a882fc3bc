//! Sharp constants, optimizer profiles and numerical verification for
//! weighted Caffarelli–Kohn–Nirenberg inequalities
//!
//! ```text
//! (∫|u|^r |x|^{-s})^{1/r} ≤ C (∫|∇u|^p |x|^{-μ})^{a/p} (∫|u|^q |x|^{-θ})^{(1-a)/q}
//! ```
//!
//! restricted to radial (or gauge-radial) profiles u(x) = g(|x|).

pub mod constants;
pub mod error;
pub mod functionals;
pub mod gauge;
pub mod params;
pub mod profiles;
pub mod quadrature;
pub mod search;
pub mod special;
pub mod transform;
pub mod verify;

pub use error::{CknError, Result};
