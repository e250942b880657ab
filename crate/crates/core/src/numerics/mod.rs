//! Shared numerical kernels.

mod owens_t;
mod quadrature;
mod rng;
mod root;
pub mod special;

pub use owens_t::owens_t;
pub use quadrature::{
    integrate_real_line, integrate_real_line_array, integrate_real_line_vec, QuadratureRule,
    QUADRATURE_ABS_TOL, RANGE_HALFWIDTH,
};
pub use rng::RngStream;
pub use root::find_root;
pub use special::{
    chi2_cdf, chi2_quantile, chi2_sf, inv_mills, log_norm_cdf, noncentral_chi2_sf, norm_cdf,
    norm_pdf, norm_sf,
};
