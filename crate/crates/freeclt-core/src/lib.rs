//! Numerical toolkit for operator-valued free probability.
//!
//! The crate computes matrix-valued Cauchy transforms of free central-limit
//! partial sums and of their semicircular limits, solves the operator-valued
//! semicircular fixed-point equation `bw = 1 + eta(w)w` with a certified
//! contraction domain, linearizes noncommutative polynomials into pencils,
//! recovers spectral densities by Stieltjes inversion, and measures
//! convergence rates of the form `C / sqrt(n)` at desk scale.
//!
//! Modules:
//! - [`matlin`]: dense complex matrix kernel and well-conditioned domains,
//! - [`freemoments`]: noncrossing-partition combinatorics for moments and
//!   free cumulants,
//! - [`opmodel`]: operator-valued models `a0 ⊗ 1 + Σ a_k ⊗ x_k` and their
//!   truncated Cauchy-transform series,
//! - [`scsolver`]: the semicircular fixed-point solver,
//! - [`linpoly`]: noncommutative polynomials and linearization pencils,
//! - [`cltlab`]: rate experiments and the random-matrix Monte Carlo oracle,
//! - [`spectra`]: density/CDF recovery and the Kolmogorov distance.

pub mod cltlab;
pub mod freemoments;
pub mod linpoly;
pub mod matlin;
pub mod opmodel;
pub mod scsolver;
pub mod spectra;

pub use num_complex::Complex64;
