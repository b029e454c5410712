//! Sequential minimal optimization for epsilon-SVR under a MAPE loss.
//!
//! Dividing the epsilon-insensitive loss by the target gives every training
//! point its own box `0 <= alpha_k, alpha_star_k <= 100 C / y_k`. The solver
//! handles those bounds directly, with maximal-violating-pair selection,
//! shrinking, and an optional even/odd symmetric kernel.
//!
//! ```
//! use mape_smo::{solve, Features, Hyperparams, KernelSpec, TrainingSet};
//!
//! let x = Features::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
//! let train = TrainingSet::new(x, vec![1.0, 2.0, 4.0]).unwrap();
//! let spec = KernelSpec::rbf(0.5).unwrap();
//! let result = solve(&train, &spec, &Hyperparams::default()).unwrap();
//! assert!(result.delta_full <= result.threshold);
//! ```

pub mod data;
pub mod dualprob;
pub mod error;
pub mod kernel;
pub mod model;
pub mod refqp;
pub mod shrink;
pub mod smo;
pub mod validation;

pub use data::{generate, SyntheticConfig};
pub use dualprob::{Bounds, DualState, Hyperparams, TrainingSet};
pub use error::{Error, Result};
pub use kernel::{build_gram, Features, KernelColumns, KernelGram, KernelSpec, Symmetry};
pub use model::{mape, BiasMethod, TrainedModel};
pub use refqp::{solve_reference, RefOptions, RefSolution};
pub use smo::{solve, solve_gram, SolveResult, Status, TraceEvent, TraceRecord};
