//! Multiprecision arithmetic substrate: reals and complexes over MPFR,
//! `arcsinh` branches, adaptive quadrature, residues and root finding.

mod branch;
mod complex;
mod quad;
mod real;
mod residue;
mod roots;

pub use branch::{arcsinh_branch, Branch, BranchStatus};
pub use complex::Complex;
pub use quad::{
    quad_finite, quad_finite_real, quad_semi_infinite, Direction, GaussLegendre, QuadOptions, QuadratureResult,
};
pub use real::{cancellation_prec, Real, DEFAULT_PREC, MIN_PREC};
pub use residue::{double_pole, local_series, residue_double_pole, DoublePole, LocalSeries, SERIES_DEGREE};
pub use roots::{find_root, find_root_bracketed};

/// Version string of the linked MPFR library.
pub fn mpfr_version() -> String {
    // SAFETY: MPFR returns a pointer to a static NUL-terminated string.
    unsafe { std::ffi::CStr::from_ptr(gmp_mpfr_sys::mpfr::get_version()) }.to_string_lossy().into_owned()
}
