pub mod complex;
pub mod dense;

pub use complex::{kron, CMatrix};
pub use dense::Mat;
