//! GAN-based synthesis of relational tables.
//!
//! The crate is organised around a three-phase pipeline:
//!
//! 1. **Transform** — fit a reversible, per-attribute encoding that maps
//!    records to fixed-width numeric samples (`table`, `transform`).
//! 2. **Train** — fit a generator against a discriminator with one of four
//!    adversarial training algorithms (`autodiff`, `models`, `training`).
//! 3. **Generate & evaluate** — sample the generator, invert the encoding,
//!    and score the synthetic table for machine-learning utility, query
//!    accuracy and disclosure risk (`eval`).
//!
//! `simdata` produces controlled simulated datasets with tunable attribute
//! correlation and label skew, `config`/`pipeline` wire everything into the
//! runnable command-line verbs, and `crates/tabsynth/examples/` shows one
//! end-to-end program per capability.

pub mod autodiff;
pub mod config;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod simdata;
pub mod table;
pub mod training;
pub mod transform;
