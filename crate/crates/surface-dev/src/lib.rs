//! Matrix surface development of piecewise-linear and sampled surfaces.
//!
//! The crate computes developments ("surface holonomy") of 2D surfaces into
//! matrix double groups built from crossed modules of invertible chain maps
//! and chain homotopies. Linear and triangulated cells are solved exactly
//! through matrix exponentials; whole grids compose cells through the
//! double-group operations; sampled surfaces in the Young regularity regime
//! go through the area process and 2D Young sums. On top of the
//! developments sit characteristic-function estimates and pseudometrics for
//! ensembles of random surfaces such as fractional Brownian sheets.

pub mod connection;
pub mod crossed;
pub mod double;
pub mod error;
pub mod grid;
pub mod matrix;
pub mod metric;
pub mod path;
pub mod random;
pub mod surface;
pub mod verify;
pub mod young;

pub use connection::Matrix2Connection;
pub use crossed::{GL0Element, GL1Element, Gl0Element, Gl1Element, ModuleDims};
pub use double::Square;
pub use error::{Error, Result};
pub use grid::GridSurface;
pub use matrix::DenseMatrix;
pub use metric::{DistanceVariant, Ensemble, MetricConfig};
pub use path::{PLPath, Sig2};
