//! Trade-off functions of the ZIL mechanism.
//!
//! `T_{d,c}` is the trade-off between `SL_d(I)` and `c e₁ + SL_d(I)`; the
//! ZIL mechanism shrinks it by the zero mass δ. As `d → ∞` it converges to
//! `β_c`, the trade-off of the scalar likelihood-ratio pair
//! `cX/√W ∓ c²/(2W)`, whose CDF under the null is `F_c`.

mod analytic;
mod curve;
mod empirical;
mod profile;

pub use analytic::{
    beta_c, beta_c_closed_form, beta_c_curve, beta_c_delta, beta_c_delta_curve, f_eps_delta, fc,
    fc_inverse, fc_survival, fc_upper_quantile, t1c_closed_form,
};
pub use curve::{alpha_grid, tradeoff_shrink, PrivacyBudget, TradeoffCurve, GRID_POINTS};
pub use empirical::{
    chunk_plan, empirical_tradeoff, lr_statistics_chunk, roc_from_statistics, Hypothesis, SIM_CHUNK,
};
pub use profile::{calibrate, delta_profile, delta_profile_zil, Calibration, PrivacyMode};
