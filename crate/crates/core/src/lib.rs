//! Numerical machinery for doubly-characteristic semiclassical operators:
//! complex quadratic forms and their singular spaces, complex symplectic
//! linear algebra and FBI phases, complex-time Hamiltonian weight evolution
//! with good-time searches, discretized FBI transforms on Bargmann spaces,
//! and model Schrödinger operators with L^p scaling experiments.

pub mod error;
pub mod linalg;
pub mod quadform;
pub mod symplectic;
pub mod eikonal;
pub mod fbi;
pub mod spectra;

pub use error::{Error, Result};
