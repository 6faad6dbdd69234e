//! Stokes 4-vectors and the sum/difference geometry of a measurement pair.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{PairJson, StokesJson};
use crate::tol::{TOL_DEG, TOL_INV};

/// A Stokes vector `(S0, S)`.
///
/// Physical vectors satisfy `S0 > 0` and `S0 >= |S|`. [`StokesVector::new`]
/// enforces this; [`StokesVector::new_unchecked`] skips the check so oracle
/// tests can feed slightly perturbed data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StokesJson", into = "StokesJson")]
pub struct StokesVector {
    s0: f64,
    s: Vector3<f64>,
}

impl StokesVector {
    pub fn new(s0: f64, s: Vector3<f64>) -> Result<Self> {
        if !s0.is_finite() || s.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidStokes("non-finite component".into()));
        }
        if s0 <= 0.0 {
            return Err(Error::InvalidStokes(format!("s0 = {s0} must be positive")));
        }
        let norm = s.norm();
        if norm > s0 * (1.0 + TOL_INV) {
            return Err(Error::InvalidStokes(format!("|s| = {norm} exceeds s0 = {s0}")));
        }
        Ok(Self { s0, s })
    }

    pub fn new_unchecked(s0: f64, s: Vector3<f64>) -> Self {
        Self { s0, s }
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], Vector3::new(v[1], v[2], v[3]))
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn s(&self) -> &Vector3<f64> {
        &self.s
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.s0, self.s.x, self.s.y, self.s.z]
    }

    /// Lorentz invariant `S0^2 - |S|^2`; zero for fully polarized light.
    pub fn invariant(&self) -> f64 {
        self.s0 * self.s0 - self.s.norm_squared()
    }

    /// Degree of polarization `|S| / S0`.
    pub fn degree_of_polarization(&self) -> f64 {
        self.s.norm() / self.s0
    }

    /// Reduced polarization vector `S / S0`.
    pub fn reduced(&self) -> Vector3<f64> {
        self.s / self.s0
    }

    /// Unit direction of the polarization vector, if it has one.
    pub fn direction(&self) -> Option<Vector3<f64>> {
        let n = self.s.norm();
        (n > 0.0).then(|| self.s / n)
    }

    /// Whether the invariant vanishes to within `tol` relative to `S0^2`.
    pub fn is_fully_polarized(&self, tol: f64) -> bool {
        self.invariant().abs() <= tol * self.s0 * self.s0
    }
}

/// Free function form used throughout the solvers.
pub fn invariant(v: &StokesVector) -> f64 {
    v.invariant()
}

/// One polarization measurement: a device maps `input` to `output`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairJson", into = "PairJson")]
pub struct MeasurementPair {
    pub input: StokesVector,
    pub output: StokesVector,
}

impl MeasurementPair {
    /// Builds a pair, rejecting it when the two invariants differ by more than
    /// `TOL_INV * max(1, inv(input))`.
    pub fn new(input: StokesVector, output: StokesVector) -> Result<Self> {
        Self::with_tolerance(input, output, TOL_INV)
    }

    pub fn with_tolerance(input: StokesVector, output: StokesVector, tol_inv: f64) -> Result<Self> {
        let (si, so) = (input.invariant(), output.invariant());
        if (si - so).abs() > tol_inv * si.abs().max(1.0) {
            return Err(Error::InvariantMismatch { input: si, output: so });
        }
        Ok(Self { input, output })
    }

    pub fn new_unchecked(input: StokesVector, output: StokesVector) -> Self {
        Self { input, output }
    }

    pub fn geometry(&self) -> PairGeometry {
        PairGeometry::new(self)
    }
}

/// Sums and differences of a measurement pair together with their cached
/// dot and cross products.
///
/// `a = S0 + S0'`, `b = S0 - S0'`, `avec = S + S'`, `bvec = S - S'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub a: f64,
    pub b: f64,
    pub avec: Vector3<f64>,
    pub bvec: Vector3<f64>,
    pub a2: f64,
    pub b2: f64,
    pub ab: f64,
    pub cross: Vector3<f64>,
}

impl PairGeometry {
    pub fn new(p: &MeasurementPair) -> Self {
        let a = p.input.s0 + p.output.s0;
        let b = p.input.s0 - p.output.s0;
        let avec = p.input.s + p.output.s;
        let bvec = p.input.s - p.output.s;
        Self {
            a,
            b,
            avec,
            bvec,
            a2: avec.norm_squared(),
            b2: bvec.norm_squared(),
            ab: avec.dot(&bvec),
            cross: avec.cross(&bvec),
        }
    }

    /// `A B - avec.bvec`, the difference of the two invariants. Zero for any
    /// pair related by a Lorentz matrix.
    pub fn identity_residual(&self) -> f64 {
        self.a * self.b - self.ab
    }

    /// `|avec x bvec|^2`, which equals `avec^2 bvec^2 - (A B)^2` on valid pairs.
    pub fn cross_norm_squared(&self) -> f64 {
        self.cross.norm_squared()
    }

    /// Denominator shared by the expansion projections: `avec^2 bvec^2 - A^2 B^2`.
    pub fn projection_denominator(&self) -> f64 {
        self.a2 * self.b2 - self.a * self.a * self.b * self.b
    }

    /// True when `avec` and `bvec` fail to span a plane, so the basis
    /// `{avec, bvec, avec x bvec}` is unusable.
    pub fn is_collinear(&self) -> bool {
        let scale = self.a2 * self.b2;
        scale == 0.0 || self.cross_norm_squared() < 1e-12 * scale
    }
}

/// Computes the pair geometry and checks the invariant identity `A B = avec.bvec`.
pub fn pair_geometry(p: &MeasurementPair) -> Result<PairGeometry> {
    pair_geometry_with(p, TOL_INV)
}

pub fn pair_geometry_with(p: &MeasurementPair, tol_inv: f64) -> Result<PairGeometry> {
    let g = PairGeometry::new(p);
    let scale = (g.a * g.b).abs().max(1.0);
    if g.identity_residual().abs() > tol_inv * scale {
        return Err(Error::InvariantMismatch {
            input: p.input.invariant(),
            output: p.output.invariant(),
        });
    }
    Ok(g)
}

/// Rejects pairs whose expansion basis is collinear.
pub(crate) fn require_basis(g: &PairGeometry) -> Result<()> {
    if g.is_collinear() || g.projection_denominator().abs() <= TOL_DEG * (g.a2 * g.b2) {
        return Err(Error::DegenerateGeometry(
            "avec and bvec are collinear; the expansion basis is singular".into(),
        ));
    }
    Ok(())
}
