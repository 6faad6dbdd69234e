//! Mueller matrices as Lorentz transformations of Stokes vectors: the complex
//! four-parameter representation, closed-form solution families for a single
//! measurement, reconstruction of a device from two, four or six
//! measurements, analysis of the quadratic constraint, and stabilizers of a
//! Stokes vector.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod json;
pub mod littlegroup;
pub mod lorentz;
pub mod oracle;
pub mod quadform;
pub mod solver3;
pub mod solver4;
pub mod stokes;
pub mod tol;

pub use error::{Error, Result};
pub use lorentz::{
    apply, gibbs_of, is_lorentz, k_from_nm, mueller_from_k, nm_from_k, ComplexParameter, GibbsVector, LorentzReport,
    MuellerMatrix, RealParameter,
};
pub use stokes::{invariant, pair_geometry, MeasurementPair, PairGeometry, StokesVector};
pub use tol::Tolerances;
