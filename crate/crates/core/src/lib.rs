//! Compatibility-aware entity alignment.
//!
//! A similarity-producing alignment model (the *neural module*) is wrapped by
//! a factor-graph *compatibility model* built from reasoning rules. The two
//! are trained jointly with variational EM:
//!
//! * [`normalizer`] turns raw similarities into candidate distributions;
//! * [`compatibility`] scores label assignments with PARIS or
//!   conflict-avoidance rules and exposes Markov-blanket conditionals;
//! * [`inference`] runs the E-step, the pseudo-likelihood M-step and the
//!   outer training loop;
//! * [`eval`] holds ranking metrics and compatibility diagnostics.
//!
//! [`kg`], [`stats`] and [`similarity`] provide the graph model, the relation
//! statistics the PARIS rule needs, and a translational baseline encoder.

pub mod compatibility;
pub mod error;
pub mod eval;
pub mod inference;
pub mod kg;
pub mod normalizer;
pub mod rng;
pub mod similarity;
pub mod stats;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};

pub(crate) mod par {
    //! Order-preserving parallel map over `0..n`.

    #[cfg(feature = "parallel")]
    pub fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn map<T, F>(n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }
}
