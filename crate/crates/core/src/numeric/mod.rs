//! Small numerical kernels used by the physics modules.

pub mod linalg;
pub mod quad;
pub mod roots;
pub mod simplex;
pub mod spline;
