//! M-estimation from released data: optimizers, the oracle / naive / SL /
//! DRCL / sDRCL estimators, sandwich inference and the closed-form
//! asymptotic variances of the linear model.

mod estimator;
mod linear;
mod optim;
mod sandwich;

pub use estimator::{estimate, EstimateOptions, EstimateReport, EstimationData, Method};
pub use linear::{linear_asyvar, linear_v_matrix, LinearModelSpec};
pub use optim::{minimize, Diagnostics, Minimum, Objective, OptimMethod, OptimOptions};
pub use sandwich::{sandwich_covariance, sandwich_parts, SandwichParts};
