//! Small numerical kernels shared by the construction and analysis code.

pub mod interp;
pub mod quad;
pub mod roots;

pub use interp::MonotoneCubic;
pub use quad::{integrate, QuadOptions};
pub use roots::{find_root, golden_max, RootOptions};
