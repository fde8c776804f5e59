//! Poisson microstructure prelimit of the rough Bergomi model.
//!
//! The crate simulates the event-driven price/log-volatility pair driven by
//! marked Poisson arrivals at rate `n`, samples the Gaussian limit and
//! approximate models exactly on a grid, evaluates integer price moments
//! through the I/J word expansion, and measures the kernel error
//! functionals that govern the weak convergence rate.
//!
//! Module map:
//! - [`kernels`]: kernel families, derivatives, assumption audit
//! - [`marks`]: bivariate jump mark laws
//! - [`microsim`]: prelimit paths and the Poisson exponential functional
//! - [`refsim`]: joint Gaussian sampling and Euler pricing
//! - [`moments`]: word combinatorics and the moment engine
//! - [`functionals`]: covariance `C_n`, error functionals, rate fits
//! - [`harness`]: weak-error experiments and confidence bands

pub mod config;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod kernels;
pub mod marks;
pub mod microsim;
pub mod moments;
pub mod quad;
pub mod refsim;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use functionals::{
    covariance_cn, error_functionals, fit_rate, lower_bound_scan, ErrorFunctionals, PreZero,
    RateFit,
};
pub use harness::{
    confidence_bands, run_weak_error, BandPoint, BenchmarkMethod, ExperimentConfig,
    ExperimentReport, FitStatus,
};
pub use kernels::{c1_constant, KernelSpec, KernelVariant};
pub use marks::{Mark, MarkFamily, MarkLaw};
pub use microsim::{simulate_events, EventStream, PathGrid};
pub use moments::{
    enumerate_words, expand_word, gaussian_exp_moment, hermite4, moment_value, MomentModel,
    MomentTerm, Word,
};
pub use refsim::{GaussianModelSpec, GaussianVariant};
pub use rng::SeedStream;
