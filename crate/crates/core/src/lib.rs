//! Fidelity of density elements in finite-dimensional tracial C*-algebras,
//! with channel certificates, the predual matrix order, a CAR tower and a
//! randomized property harness.

pub mod acceptance;
pub mod algebra;
pub mod car;
pub mod channel;
pub mod config;
pub mod error;
pub mod fidelity;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod predual;
pub mod random;
