//! Physics-informed neural networks for nonlinear PDEs, trained either by
//! plain residual minimization or adversarially with PGD-perturbed
//! collocation, boundary and initial points whose labels are recomputed at
//! the perturbed coordinates.
//!
//! - [`tape`]: scalar reverse-mode autodiff
//! - [`jet`]: truncated Taylor arithmetic on tape variables
//! - [`network`]: the tanh MLP and its checkpoint format
//! - [`problems`]: Kuramoto-Sivashinsky, Sawada-Kotera and Allen-Cahn benchmarks
//! - [`sampling`]: Latin hypercube point sets
//! - [`training`]: losses, Adam, Gaussian smoothing, PGD and the training loop
//! - [`harness`]: experiment configs, runs, comparisons and table reproduction

pub mod error;
pub mod harness;
pub mod jet;
pub mod network;
pub mod problems;
pub mod sampling;
pub mod tape;
pub mod training;

pub use error::{Error, LeafRole, Result};
pub use jet::Jet;
pub use network::Mlp;
pub use problems::ProblemSpec;
pub use tape::{Adjoints, Tape, Var};
