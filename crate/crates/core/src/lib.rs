//! Two-dimensional fast multipole summation on a balanced, median-split
//! quad pyramid with the symmetric θ-criterion for well-separated boxes.
//!
//! ```
//! use fmm2d::{evaluate, FmmConfig, Source};
//!
//! let sources = [Source::new(0.0, 0.0, 1.0), Source::new(1.0, 0.0, 1.0)];
//! let field = evaluate(&sources, &FmmConfig::default()).unwrap();
//! assert_eq!(field.potentials[0].re, 1.0);
//! ```

pub mod connectivity;
pub mod driver;
pub mod error;
pub mod expansion;
pub mod kernel;
pub mod oracle;
pub mod tree;

pub use connectivity::{Connectivity, ConversionPair, LevelConnectivity, OptimizationFlags};
pub use driver::{
    estimate_work, evaluate, evaluate_direct, FieldResult, FieldStats, FmmConfig, WorkEstimate,
};
pub use error::{FmmError, Result};
pub use expansion::{Expansion, ExpansionKind};
pub use kernel::{optimal_theta, predicted_error_bound, well_separated, Disc, Kernel, Theta};
pub use oracle::Distribution;
pub use tree::{BoxNode, Pyramid, Source, SplitPolicy};
