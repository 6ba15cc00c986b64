//! Slotted-time simulation and exact verification for crosspoint-buffered
//! (CICQ) switch scheduling.
//!
//! The crate has two halves that share one set of types:
//!
//! * **Simulation** — a three-phase slot engine ([`switch`]) that drives any
//!   scheduler over virtual output queues and unit crosspoint buffers. The
//!   schedulers are DISQUO ([`disquo`]), a Glauber-dynamics scheduler that
//!   signals through buffer occupancy, and classical baselines ([`baselines`]):
//!   maximum-weight matching, RR-RR, LQF-RR, and an output-queued reference.
//!   Traffic generation ([`traffic`]) covers Bernoulli and truncated-Pareto
//!   bursty arrivals over uniform, lin-diagonal, and hot-spot rate matrices.
//!
//! * **Verification** — exact finite-state machinery ([`chain`]) for the
//!   schedule Markov chain on small ports: state enumeration, the multi-update
//!   Glauber transition matrix, its product-form stationary distribution,
//!   detailed balance, spectral gap, conductance, mixing bounds, and free
//!   energy. [`verify`] bundles these into named pass/fail checks.
//!
//! Everything is deterministic: all randomness is counter-based ([`rng`]), so
//! a (seed, slot) pair fully determines every coin flip and permutation, and
//! identical configurations replay bit-identically.

pub mod baselines;
pub mod chain;
pub mod disquo;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod metrics;
pub mod rng;
pub mod switch;
pub mod traffic;
pub mod verify;

pub use error::Error;
pub use matching::Matching;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
