//! Landmark density maps: the analytic Gaussian target and the learned predictor.

pub mod kernel;
pub mod predictor;

pub use kernel::{build_gaussian_kernel, make_probability_map, GaussianKernel, MapSource, ProbabilityMap};
pub use predictor::{predict_map, predictor_loss, predictor_objective, Predictor, PredictorConfig};
