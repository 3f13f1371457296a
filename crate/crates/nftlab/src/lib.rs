//! A desk-scale laboratory for verifier-driven policy optimization.
//!
//! The crate implements a family of fine-tuning objectives (NFT, RFT, GRPO,
//! Dr. GRPO, importance-sampled policy gradient, InfoNCA) on tabular
//! autoregressive policies over finite answer spaces with deterministic
//! binary verifiers. Because every answer space is exactly enumerable, all
//! the usual hand-waving quantities — correctness rates, Bayes-restricted
//! target policies, KL divergences, loss gradients — have brute-force
//! ground truth, and the theory (gradient identities, on-policy
//! equivalences, convergence of implicit negative-policy training) becomes
//! directly testable.
//!
//! Module map:
//! - [`taskenv`]: synthetic tasks, verifiers, answer enumeration
//! - [`policy`]: tabular softmax policies, sampling, analytic gradients
//! - [`rollout`]: group sampling, prompt filtering, mini-batching
//! - [`objectives`]: per-token losses and gradients for the objective zoo
//! - [`oracle`]: brute-force targets, finite differences, equivalence checks
//! - [`trainer`]: the outer training loop, optimizers, metrics
//! - [`config`] / [`cli`]: plain-text configuration and the command front end

pub mod cli;
pub mod config;
pub mod objectives;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod taskenv;
pub mod trainer;

mod error;

pub use error::{Error, Result};
