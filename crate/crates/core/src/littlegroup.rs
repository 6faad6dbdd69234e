//! Mueller matrices that leave a given Stokes vector unchanged.
//!
//! With `p = S / S0`, the elements have `m0 = 0`, `m = n x p` and
//! `n0 = sqrt(1 - n^2 (1 - p^2) - (n.p)^2)`; for fully polarized light
//! (`p^2 = 1`) the root reduces to `sqrt(1 - (n.p)^2)`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lorentz::{k_from_nm, ComplexParameter, MuellerMatrix, RealParameter};
use crate::stokes::StokesVector;
use crate::tol::{TOL_IM, TOL_K};

/// Relative invariant below which a Stokes vector is treated as null.
pub const TOL_NULL: f64 = 1e-12;
/// Floor on `1 - p^2` for the sampling box of nearly polarized light.
const BOX_EPS: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LittleKind {
    /// `Sigma^2 > 0`
    PartlyPolarized,
    /// `Sigma^2 = 0`
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LittleGroupElement {
    pub k: ComplexParameter,
    pub source: StokesVector,
    pub kind: LittleKind,
}

impl LittleGroupElement {
    pub fn mueller(&self) -> MuellerMatrix {
        crate::lorentz::mueller_from_k_unit(&self.k, TOL_IM).expect("unit parameter gives a real product")
    }

    /// `|L S - S|_inf / S0`.
    pub fn residual(&self) -> f64 {
        self.mueller().transitivity_residual(&self.source, &self.source)
    }
}

pub fn kind_of(s: &StokesVector) -> LittleKind {
    if s.is_fully_polarized(TOL_NULL) {
        LittleKind::Null
    } else {
        LittleKind::PartlyPolarized
    }
}

/// `n0^2` as a function of the requested `n`.
pub fn n0_squared(s: &StokesVector, n: &Vector3<f64>) -> f64 {
    let p = s.reduced();
    let np = n.dot(&p);
    match kind_of(s) {
        LittleKind::PartlyPolarized => 1.0 - n.norm_squared() * (1.0 - p.norm_squared()) - np * np,
        LittleKind::Null => 1.0 - np * np,
    }
}

/// The stabilizer element of `s` with rotation part `n`.
pub fn little_element(s: &StokesVector, n: Vector3<f64>) -> Result<LittleGroupElement> {
    let n0sq = n0_squared(s, &n);
    if n0sq < -TOL_K {
        return Err(Error::OutOfDomain(n0sq));
    }
    let p = s.reduced();
    let r = RealParameter::new(n0sq.max(0.0).sqrt(), n, 0.0, n.cross(&p));
    Ok(LittleGroupElement {
        k: k_from_nm(&r)?,
        source: *s,
        kind: kind_of(s),
    })
}

/// Unit vector along the beam, or the third axis for unpolarized light.
fn beam_axis(s: &StokesVector) -> Vector3<f64> {
    s.direction().unwrap_or_else(Vector3::z)
}

/// `count` deterministic samples. Element 0 is a rotation about the beam axis;
/// the rest draw `n` uniformly from a box around the admissible region and
/// reject points outside it. Element `i` depends only on `(seed, i)`.
pub fn sample_little(s: &StokesVector, count: usize, seed: u64) -> Vec<LittleGroupElement> {
    let p2 = s.reduced().norm_squared();
    let half = 1.0 / (1.0 - p2).max(BOX_EPS).sqrt();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            if i == 0 {
                let t = rng.random_range(-1.0..=1.0);
                return little_element(s, t * beam_axis(s)).expect("beam-axis rotations are admissible");
            }
            loop {
                let n = Vector3::from_fn(|_, _| rng.random_range(-half..=half));
                if n0_squared(s, &n) >= 0.0 {
                    if let Ok(el) = little_element(s, n) {
                        return el;
                    }
                }
            }
        })
        .collect()
}
