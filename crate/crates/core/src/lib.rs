//! Proportional feedback control of one-dimensional maps under bounded noise.
//!
//! The crate designs a control gain `nu` that stabilises a prescribed
//! `k`-cycle of a map `f` when `x -> f(nu x)` is applied every `k`-th step,
//! computes how much multiplicative or additive noise the design tolerates
//! together with the corridors the noisy cycle stays in, simulates the
//! controlled recursions, and checks trajectories against those corridors.
//!
//! ```
//! use pfcycle::{calculus::{IterateChain, PsiFunction}, design::ControlDesign, maps::MapDef};
//!
//! let f = MapDef::ricker(2.8).unwrap();
//! let psi = PsiFunction::new(IterateChain::build(&f, 1.0 / 2.8, 3).unwrap()).unwrap();
//! let d = ControlDesign::for_target(&psi, 1.2).unwrap();
//! assert!((d.g(1.2).unwrap() - 1.2).abs() < 1e-8);
//! ```

pub mod analysis;
pub mod calculus;
pub mod config;
pub mod design;
pub mod error;
pub mod maps;
pub mod noise;
pub mod report;
pub mod roots;
pub mod sim;

pub use error::{Error, Result};
