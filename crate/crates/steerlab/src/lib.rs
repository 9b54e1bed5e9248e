//! Quantum toolbox for a family of rank-2 mixed states shared by up to
//! twelve parties.
//!
//! The crate covers four jobs:
//!
//! * [`states`] builds the state families: two superposed product branches
//!   mixed with weights `nu1`, `nu2 = 1 - nu1`, plus the separable-tail and
//!   two-phase variants used by the steering analysis.
//! * [`steering`] certifies that every party can steer the rest of the
//!   system into two distinct pure states, and computes the steered-branch
//!   determinants behind that argument.
//! * [`bell`] evaluates multipartite Bell functionals (correlator and
//!   joint-probability terms) against any density matrix, carries the
//!   closed-form values and reference settings for the built-in functional
//!   catalog, and optimizes measurement settings numerically. [`lhv`]
//!   independently certifies every classical bound by enumerating all
//!   deterministic local strategies.
//! * [`protocols`] simulates two measurement protocols on these states (a
//!   three-party key distribution with a scrambling third party, and a
//!   certificate-authorization handshake with an optional intercept-resend
//!   eavesdropper), with reproducible per-run randomness and JSON-lines
//!   transcripts.
//!
//! # Parallelism
//!
//! The `parallel` feature (on by default) runs strategy enumeration,
//! steering sweeps, and protocol batches on a rayon pool. Every such entry
//! point has a `*_seq` twin that always runs on the calling thread; with the
//! feature disabled the plain entry points fall back to the sequential path.
//! Results are identical either way, including tie-breaking.
//!
//! # Conventions
//!
//! Qubits are numbered from 1 and stored big-endian: qubit 1 is the most
//! significant bit of a computational-basis index. A measurement direction
//! is a Bloch unit vector `(theta, phi)`; outcome 0 projects onto the `+n`
//! eigenstate. Angles are radians everywhere.

pub mod bell;
pub mod lhv;
pub mod protocols;
pub mod qcore;
pub mod states;
pub mod steering;

mod error;
mod exec;

pub use error::{Error, Result};

/// Sizes the global thread pool used by the parallel entry points.
///
/// Call once, before any parallel work. Fails if the pool already exists.
/// Without the `parallel` feature this is a no-op.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool already configured: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    Ok(())
}
