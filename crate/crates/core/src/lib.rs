//! Resistance-form calculus on finite networks, BL^κ and Hausdorff-type
//! distances between finite measured metric spaces, and convergence-rate
//! experiments on Sierpinski gasket graphs, the one-dimensional Bouchaud trap
//! model and real trees coded by excursions.

pub mod btm;
pub mod error;
pub mod exponents;
pub mod line;
pub mod linalg;
pub mod lp;
pub mod metric;
pub mod network;
pub mod realtree;
pub mod rng;
pub mod sierpinski;
pub mod stats;

pub use error::{Error, Result};
