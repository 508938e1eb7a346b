//! Bayesian regression of a scalar response on vector and tensor covariates
//! under the multiway Dirichlet generalized double Pareto (M-DGDP) prior.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] dense D-way tensors, parafac/Tucker assembly and margin contractions
//! * [`random`] seeded random streams and the variate generators the sampler needs,
//!   including a generalized inverse Gaussian sampler
//! * [`prior`] hyperparameter defaults, prior draws, variance bounds, induced quantiles
//! * [`sampler`] data standardization and the blocked Gibbs sampler
//! * [`simgen`] simulation scenarios (low-rank 2D, mask images, 3D sin/cos cases)
//! * [`metrics`] RMSE and interval coverage scoring
//! * [`lasso`] the vectorized Lasso comparator
//! * [`pgm`] portable graymap reading and writing

pub mod error;
pub mod lasso;
pub mod metrics;
pub mod pgm;
pub mod prior;
pub mod random;
pub mod sampler;
pub mod simgen;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
pub use prior::{MdgdpHyper, MdgdpState};
pub use random::{GigParams, RngStream};
pub use sampler::{ChainState, FitConfig, PosteriorOutput, RegressionData};
pub use tensor::{DenseTensor, ParafacFactors, TensorShape, TuckerModel};
