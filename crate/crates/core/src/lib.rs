//! Multi-source domain adaptation under target shift with entropic optimal
//! transport.
//!
//! The crate estimates the unknown class proportions of an unlabeled target
//! domain jointly with one transport plan per labeled source domain, then
//! decodes target labels from those plans.
//!
//! * [`ot`]: cost matrices, Gibbs kernels, Sinkhorn and an exact small-LP reference
//! * [`class_ops`]: mass ↔ class-proportion operators
//! * [`jcpot`]: the joint proportion / coupling solver
//! * [`adaptation`]: label propagation, barycentric mapping and the plain OT baseline
//! * [`datagen`]: seeded synthetic target-shift scenarios
//! * [`harness`]: CSV I/O, metrics, the proportion grid oracle and benchmarks
//!
//! Runnable walkthroughs live in `examples/`.

pub mod adaptation;
pub mod class_ops;
pub mod data;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod jcpot;
pub mod ot;

pub use class_ops::{ClassOperators, ProportionVector};
pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use jcpot::{jcpot_fit, JcpotProblem, JcpotSolution};
