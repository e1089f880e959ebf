//! Multiscale combinatorial grouping: hierarchical segmentation from
//! downsampled normalized cuts and aligned multiscale ultrametric contour
//! maps, followed by combinatorial object proposals learned on a Pareto
//! front and ranked by a regression forest.

pub mod affinity;
pub mod align;
pub mod config;
pub mod contour;
pub mod dncuts;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod forest;
pub mod grid;
pub mod grouping;
pub mod hierarchy;
pub mod image;
pub mod io;
pub mod mask;
pub mod pipeline;
pub mod pareto;
pub mod rank;
pub mod regiontree;
pub mod sparse;
pub mod synth;

pub use error::{McgError, Result};
