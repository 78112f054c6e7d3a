//! Special functions: parabolic cylinder functions of negative order and the
//! integrals and polygamma functions that appear in their parameter
//! derivatives.
//!
//! All parabolic-cylinder quantities are returned in log-scaled form or as
//! ratios, so they stay finite far into the tails where `D_{-r}(ζ)` itself
//! over- or underflows.

mod gamma;
mod pcf;
pub mod quad;

pub use gamma::{digamma, erf, erfc, erfcx, ln_erfc, log_gamma, norm_cdf, norm_sf, trigamma};
pub use pcf::{
    a_integrals, pcf_d, pcf_d_prime, pcf_log_derivatives, pcf_ratio, pcf_ratio_dr, pcf_ratio_dzeta, AIntegrals,
    PcfEval, PcfLogDerivatives, SignedLog,
};
