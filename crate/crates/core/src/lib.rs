//! Good Policy Identification (GPI) in tabular episodic MDPs.
//!
//! Given a reward threshold `mu0` and a confidence level `delta`, a GPI
//! algorithm must either output a policy whose expected episode reward is at
//! least `mu0` (if one exists) or declare that no such policy exists, and be
//! correct with probability at least `1 - delta` while using as few episodes
//! as possible. This crate provides:
//!
//! * [`mdp`]: ground-truth tabular MDPs, exact policy evaluation, optimal
//!   planning and seeded episode simulation;
//! * [`confidence`]: exploration statistics, the KL exploration bonus, and a
//!   dual-bisection solver for linear objectives over KL confidence balls;
//! * [`planner`]: optimistic and pessimistic backward induction plus the
//!   stopping predicates;
//! * [`algo`]: the phased BEE-GPI algorithm and its early-stopping
//!   exploration oracle;
//! * [`baseline`]: the oracle-epsilon BPI-UCRL comparator;
//! * [`instances`]: chain, uniform and tree benchmark families plus the
//!   action-permutation operator;
//! * [`harness`], [`plot`], [`verify`]: batch experiment runner, SVG plots
//!   and the brute-force verification suite behind the `gpi` CLI.

pub mod algo;
pub mod baseline;
pub mod confidence;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mdp;
pub mod planner;
pub mod plot;
pub mod verify;

pub use error::Error;
