//! Construction and recovery of sequences that are determined by every
//! m-th sample.
//!
//! Any square-summable sequence can be approximated arbitrarily well by one
//! whose auxiliary branches carry narrow spectral notches at interleaved
//! families of frequencies. Such a sequence is recoverable from its
//! decimated samples alone: each missing value is the value of some branch
//! at a lattice point, and that branch is extrapolable by a sparse linear
//! predictor because of its notch. The crate provides:
//!
//! - [`spectral`]: sequences, grid spectra, degeneracy points, masks, and
//!   disjoint mask plans;
//! - [`branching`]: branch families, the representative branch, spectral
//!   surgery, and the approximation driver;
//! - [`predictor`]: the extrapolation transfer function, kernel extraction,
//!   and gamma tuning;
//! - [`recovery`]: decimation, per-target recovery, holdout tuning, and
//!   the noise robustness sweep;
//! - [`ctsampling`]: the continuous-time bridge through the cardinal
//!   series.

pub mod branching;
pub mod cli;
pub mod ctsampling;
pub mod io;
pub mod predictor;
pub mod recovery;
pub mod spectral;
