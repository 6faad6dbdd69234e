//! Default numerical tolerances.
//!
//! All values are relative unless the name says otherwise. Every solver takes a
//! [`Tolerances`] so the CLI can override them.

/// Invariant agreement between input and output Stokes vectors.
pub const TOL_INV: f64 = 1e-9;
/// Unit condition on the complex parameter and its real split.
pub const TOL_K: f64 = 1e-10;
/// Lorentz membership and transitivity residuals.
pub const TOL_L: f64 = 1e-9;
/// Imaginary residue of the factor product.
pub const TOL_IM: f64 = 1e-10;
/// Smallest |k0| accepted as a divisor.
pub const TOL_DIV: f64 = 1e-12;
/// Cross-checks between algebraically equal routes.
pub const TOL_CONS: f64 = 1e-8;
/// Geometric degeneracy (vanishing denominators).
pub const TOL_DEG: f64 = 1e-12;
/// Largest condition number accepted for the lifted 6x6 system.
pub const COND_MAX: f64 = 1e10;
/// Rank-one consistency of the lifted unknowns.
pub const TOL_R1: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub inv: f64,
    pub k: f64,
    pub lorentz: f64,
    pub im: f64,
    pub div: f64,
    pub cons: f64,
    pub deg: f64,
    pub cond_max: f64,
    pub rank1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            inv: TOL_INV,
            k: TOL_K,
            lorentz: TOL_L,
            im: TOL_IM,
            div: TOL_DIV,
            cons: TOL_CONS,
            deg: TOL_DEG,
            cond_max: COND_MAX,
            rank1: TOL_R1,
        }
    }
}
