//! Complex four-parameter representation of proper orthochronous Lorentz
//! matrices acting on Stokes vectors.
//!
//! A parameter `k = (k0, k1, k2, k3)` with `k0^2 - k.k = 1` defines the complex
//! factor `A(k)`; the Mueller matrix is the real product `A(k) A*(k)`, where
//! `A*` is the entrywise conjugate of `A`. The real split
//! `k0 = n0 + i m0`, `kj = -i nj + mj` separates the rotation-like part
//! `(n0, n)` from the boost-like part `(m0, m)`.

use std::fmt;

use nalgebra::{Matrix4, Vector3, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stokes::StokesVector;
use crate::tol::{TOL_DIV, TOL_IM, TOL_K, TOL_L};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Metric `diag(+1, -1, -1, -1)`.
pub fn metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexParameter {
    k: [Complex64; 4],
}

impl ComplexParameter {
    /// Checks `k0^2 - k.k = 1` within `TOL_K * max(1, sum |ka|^2)`.
    pub fn new(k: [Complex64; 4]) -> Result<Self> {
        let p = Self { k };
        p.check_unit(TOL_K)?;
        Ok(p)
    }

    pub fn new_unchecked(k: [Complex64; 4]) -> Self {
        Self { k }
    }

    pub fn identity() -> Self {
        Self::new_unchecked([
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
    }

    pub fn components(&self) -> [Complex64; 4] {
        self.k
    }

    pub fn k0(&self) -> Complex64 {
        self.k[0]
    }

    pub fn vector(&self) -> [Complex64; 3] {
        [self.k[1], self.k[2], self.k[3]]
    }

    /// `k0^2 - k.k - 1`, complex.
    pub fn unit_residual(&self) -> Complex64 {
        let [k0, k1, k2, k3] = self.k;
        k0 * k0 - (k1 * k1 + k2 * k2 + k3 * k3) - 1.0
    }

    fn magnitude(&self) -> f64 {
        self.k.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_unit(&self, tol: f64) -> Result<()> {
        let r = self.unit_residual().norm();
        if !(r <= tol * self.magnitude().max(1.0)) {
            return Err(Error::ConstraintViolation {
                what: "k0^2 - k.k = 1",
                residual: r,
            });
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        Self::new_unchecked(self.k.map(|z| -z))
    }

    /// Largest componentwise distance to `other`, minimized over the sign
    /// ambiguity `k ~ -k`.
    pub fn distance_up_to_sign(&self, other: &Self) -> f64 {
        let d = |s: f64| {
            self.k
                .iter()
                .zip(other.k.iter())
                .map(|(a, b)| (a - b * s).norm())
                .fold(0.0, f64::max)
        };
        d(1.0).min(d(-1.0))
    }
}

/// The real split `(n0, n, m0, m)` of a complex parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealParameter {
    pub n0: f64,
    pub n: Vector3<f64>,
    pub m0: f64,
    pub m: Vector3<f64>,
}

impl RealParameter {
    pub fn new(n0: f64, n: Vector3<f64>, m0: f64, m: Vector3<f64>) -> Self {
        Self { n0, n, m0, m }
    }

    pub fn rotation(n0: f64, n: Vector3<f64>) -> Self {
        Self::new(n0, n, 0.0, Vector3::zeros())
    }

    /// `n0^2 + n^2 - m0^2 - m^2 - 1`.
    pub fn normalization_residual(&self) -> f64 {
        self.n0 * self.n0 + self.n.norm_squared() - self.m0 * self.m0 - self.m.norm_squared() - 1.0
    }

    /// `n0 m0 + n.m`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.n0 * self.m0 + self.n.dot(&self.m)
    }

    pub fn magnitude(&self) -> f64 {
        self.n0 * self.n0 + self.n.norm_squared() + self.m0 * self.m0 + self.m.norm_squared()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let scale = self.magnitude().max(1.0);
        let norm = self.normalization_residual();
        if !(norm.abs() <= tol * scale) {
            return Err(Error::ConstraintViolation {
                what: "n0^2 + n^2 - m0^2 - m^2 = 1",
                residual: norm,
            });
        }
        let orth = self.orthogonality_residual();
        if !(orth.abs() <= tol * scale) {
            return Err(Error::ConstraintViolation {
                what: "n0 m0 + n.m = 0",
                residual: orth,
            });
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = (self.n0 - other.n0).abs().max((self.m0 - other.m0).abs());
        for i in 0..3 {
            d = d
                .max((self.n[i] - other.n[i]).abs())
                .max((self.m[i] - other.m[i]).abs());
        }
        d
    }
}

/// `k0 = n0 + i m0`, `kj = -i nj + mj`.
pub fn k_from_nm(r: &RealParameter) -> Result<ComplexParameter> {
    r.check(TOL_K)?;
    Ok(k_from_nm_unchecked(r))
}

pub(crate) fn k_from_nm_unchecked(r: &RealParameter) -> ComplexParameter {
    ComplexParameter::new_unchecked([
        Complex64::new(r.n0, r.m0),
        Complex64::new(r.m.x, -r.n.x),
        Complex64::new(r.m.y, -r.n.y),
        Complex64::new(r.m.z, -r.n.z),
    ])
}

pub fn nm_from_k(k: &ComplexParameter) -> RealParameter {
    let [k0, k1, k2, k3] = k.k;
    RealParameter {
        n0: k0.re,
        n: Vector3::new(-k1.im, -k2.im, -k3.im),
        m0: k0.im,
        m: Vector3::new(k1.re, k2.re, k3.re),
    }
}

/// The complex factor `A(k)`.
pub fn factor(k: &ComplexParameter) -> Matrix4<Complex64> {
    let [k0, k1, k2, k3] = k.k;
    #[rustfmt::skip]
    let a = Matrix4::new(
         k0,     -k1,     -k2,     -k3,
        -k1,      k0, -I * k3,  I * k2,
        -k2,  I * k3,      k0, -I * k1,
        -k3, -I * k2,  I * k1,      k0,
    );
    a
}

/// Entrywise conjugate of [`factor`].
pub fn factor_conj(k: &ComplexParameter) -> Matrix4<Complex64> {
    factor(k).map(|z| z.conj())
}

/// A real 4x4 matrix acting on Stokes vectors.
#[derive(Clone, Copy, PartialEq)]
pub struct MuellerMatrix(pub Matrix4<f64>);

impl fmt::Debug for MuellerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MuellerMatrix{:?}", self.to_row_major())
    }
}

impl MuellerMatrix {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_row_major(v: &[f64; 16]) -> Self {
        Self(Matrix4::from_row_slice(v))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[(r, c)]
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).amax()
    }

    /// Matrix-vector product on raw components (no physicality check).
    pub fn apply_raw(&self, v: &[f64; 4]) -> [f64; 4] {
        let r = self.0 * Vector4::from(*v);
        [r[0], r[1], r[2], r[3]]
    }

    pub fn apply(&self, v: &StokesVector) -> StokesVector {
        apply(self, v)
    }

    /// Largest component of `L S - S'`, relative to `max(1, |S'|_inf)`.
    pub fn transitivity_residual(&self, input: &StokesVector, output: &StokesVector) -> f64 {
        let got = self.apply_raw(&input.to_array());
        let want = output.to_array();
        let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        got.iter()
            .zip(want.iter())
            .map(|(g, w)| (g - w).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// `L v`. The result is not re-validated: a Lorentz matrix keeps physical
/// vectors physical, and arbitrary matrices are allowed here.
pub fn apply(l: &MuellerMatrix, v: &StokesVector) -> StokesVector {
    let r = l.apply_raw(&v.to_array());
    StokesVector::new_unchecked(r[0], Vector3::new(r[1], r[2], r[3]))
}

/// Builds `A(k) A*(k)` and returns its real part.
pub fn mueller_from_k(k: &ComplexParameter) -> Result<MuellerMatrix> {
    k.check_unit(TOL_K)?;
    mueller_from_k_unit(k, TOL_IM)
}

pub(crate) fn mueller_from_k_unit(k: &ComplexParameter, tol_im: f64) -> Result<MuellerMatrix> {
    let product = factor(k) * factor_conj(k);
    let max_imag = product.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_imag >= tol_im * k.magnitude().max(1.0) {
        return Err(Error::NonRealProduct { max_imag });
    }
    Ok(MuellerMatrix(product.map(|z| z.re)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzReport {
    pub is_lorentz: bool,
    /// `|M^T G M - G|_inf`
    pub metric_residual: f64,
    pub m00: f64,
    /// `|det M - 1|`
    pub det_residual: f64,
}

pub fn is_lorentz(l: &MuellerMatrix) -> LorentzReport {
    is_lorentz_with(l, TOL_L)
}

pub fn is_lorentz_with(l: &MuellerMatrix, tol: f64) -> LorentzReport {
    let g = metric();
    let metric_residual = (l.0.transpose() * g * l.0 - g).amax();
    let det_residual = (l.0.determinant() - 1.0).abs();
    let m00 = l.0[(0, 0)];
    LorentzReport {
        is_lorentz: metric_residual <= tol && m00 > 0.0 && det_residual <= tol,
        metric_residual,
        m00,
        det_residual,
    }
}

/// `q = k / k0`. For pure rotations `i q` is the real Gibbs vector `n / n0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsVector {
    pub q: [Complex64; 3],
}

impl GibbsVector {
    /// `i q`, returned only when its imaginary part is negligible.
    pub fn rotation_vector(&self, tol: f64) -> Option<Vector3<f64>> {
        let c = self.q.map(|z| I * z);
        let scale = c.iter().fold(1.0f64, |m, z| m.max(z.re.abs()));
        c.iter()
            .all(|z| z.im.abs() <= tol * scale)
            .then(|| Vector3::new(c[0].re, c[1].re, c[2].re))
    }
}

pub fn gibbs_of(k: &ComplexParameter) -> Result<GibbsVector> {
    let k0 = k.k0();
    if k0.norm() <= TOL_DIV {
        return Err(Error::DivisionByZero(k0.norm()));
    }
    Ok(GibbsVector {
        q: k.vector().map(|kj| kj / k0),
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Reference product written out with explicit loops and an independent
    /// transcription of the factor layout.
    fn brute_force_mueller(k: [Complex64; 4]) -> [[f64; 4]; 4] {
        let [k0, k1, k2, k3] = k;
        let i = c(0.0, 1.0);
        let a = [
            [k0, -k1, -k2, -k3],
            [-k1, k0, -i * k3, i * k2],
            [-k2, i * k3, k0, -i * k1],
            [-k3, -i * k2, i * k1, k0],
        ];
        let mut out = [[0.0; 4]; 4];
        for r in 0..4 {
            for col in 0..4 {
                let mut s = c(0.0, 0.0);
                for j in 0..4 {
                    s += a[r][j] * a[j][col].conj();
                }
                assert!(s.im.abs() < 1e-14);
                out[r][col] = s.re;
            }
        }
        out
    }

    #[test]
    fn k_from_nm_examples() {
        let id = k_from_nm(&RealParameter::rotation(1.0, Vector3::zeros())).unwrap();
        assert_eq!(id, ComplexParameter::identity());

        let th = 0.7f64;
        let k = k_from_nm(&RealParameter::rotation(th.cos(), Vector3::new(0.0, 0.0, th.sin()))).unwrap();
        assert_eq!(
            k.components(),
            [c(th.cos(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -th.sin())]
        );

        let chi = 0.9f64;
        let r = RealParameter::new(chi.cosh(), Vector3::zeros(), 0.0, Vector3::new(chi.sinh(), 0.0, 0.0));
        let k = k_from_nm(&r).unwrap();
        assert_eq!(k.components()[1], c(chi.sinh(), 0.0));
        assert!(k.unit_residual().norm() < 1e-14);
        assert_eq!(nm_from_k(&k), r);
    }

    #[test]
    fn k_from_nm_rejects_invalid() {
        let r = RealParameter::rotation(1.0, Vector3::new(0.5, 0.0, 0.0));
        assert!(matches!(k_from_nm(&r), Err(Error::ConstraintViolation { .. })));
    }

    #[test]
    fn identity_matrix() {
        let l = mueller_from_k(&ComplexParameter::identity()).unwrap();
        assert_eq!(l, MuellerMatrix::identity());
        let rep = is_lorentz(&l);
        assert!(rep.is_lorentz);
        assert_eq!(rep.metric_residual, 0.0);
        assert_eq!(rep.det_residual, 0.0);
    }

    #[test]
    fn rotation_about_third_axis() {
        let th = PI / 3.0;
        let k = [
            c((th / 2.0).cos(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, -(th / 2.0).sin()),
        ];
        let expected = brute_force_mueller(k);
        // block structure: rotation by th in the (S1, S2) plane
        assert!((expected[1][1] - th.cos()).abs() < 1e-15);
        assert!((expected[2][1] - th.sin()).abs() < 1e-15);
        assert!((expected[1][2] + th.sin()).abs() < 1e-15);
        assert!((expected[0][0] - 1.0).abs() < 1e-15 && (expected[3][3] - 1.0).abs() < 1e-15);
        let l = mueller_from_k(&ComplexParameter::new(k).unwrap()).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                assert!((l.get(r, col) - expected[r][col]).abs() < 1e-15);
            }
        }
        let v = StokesVector::new(1.0, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let out = apply(&l, &v);
        assert!((out.s() - Vector3::new(th.cos(), th.sin(), 0.0)).amax() < 1e-15);
        assert!((out.s0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boost_along_first_axis() {
        let chi = 1.0f64;
        let k = [
            c((chi / 2.0).cosh(), 0.0),
            c((chi / 2.0).sinh(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ];
        let expected = brute_force_mueller(k);
        assert!((expected[0][0] - chi.cosh()).abs() < 1e-14);
        assert!((expected[1][1] - chi.cosh()).abs() < 1e-14);
        // under A A* a positive m1 boosts toward -S1
        assert!((expected[0][1] + chi.sinh()).abs() < 1e-14);
        assert!((expected[1][0] + chi.sinh()).abs() < 1e-14);
        assert!((expected[2][2] - 1.0).abs() < 1e-14);
        assert!((expected[3][3] - 1.0).abs() < 1e-14);
        let l = mueller_from_k(&ComplexParameter::new(k).unwrap()).unwrap();
        let out = apply(&l, &StokesVector::new(1.0, Vector3::zeros()).unwrap());
        assert!((out.s0() - chi.cosh()).abs() < 1e-14);
        assert!((out.s().x + chi.sinh()).abs() < 1e-14);

        // the opposite parameter boosts toward +S1
        let k = [
            c((chi / 2.0).cosh(), 0.0),
            c(-(chi / 2.0).sinh(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ];
        let l = mueller_from_k(&ComplexParameter::new(k).unwrap()).unwrap();
        let out = apply(&l, &StokesVector::new(1.0, Vector3::zeros()).unwrap());
        assert!((out.s().x - chi.sinh()).abs() < 1e-14);
    }

    #[test]
    fn reflection_is_not_lorentz() {
        let mut m = Matrix4::identity();
        m[(3, 3)] = -1.0;
        let rep = is_lorentz(&MuellerMatrix(m));
        assert!(!rep.is_lorentz);
        assert!((rep.det_residual - 2.0).abs() < 1e-15);
        assert_eq!(rep.metric_residual, 0.0);
    }

    #[test]
    fn bad_k_rejected() {
        let k = ComplexParameter::new_unchecked([c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(mueller_from_k(&k), Err(Error::ConstraintViolation { .. })));
        // the product itself is real, only the unit check catches it
        assert!(mueller_from_k_unit(&k, TOL_IM).is_ok());
    }

    #[test]
    fn gibbs_examples() {
        let g = gibbs_of(&ComplexParameter::identity()).unwrap();
        assert!(g.q.iter().all(|z| z.norm() == 0.0));

        let th = 0.4f64;
        let k = ComplexParameter::new([c(th.cos(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -th.sin())]).unwrap();
        let cvec = gibbs_of(&k).unwrap().rotation_vector(1e-12).unwrap();
        assert!((cvec - Vector3::new(0.0, 0.0, th.tan())).amax() < 1e-15);

        let half_turn = ComplexParameter::new([c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(gibbs_of(&half_turn), Err(Error::DivisionByZero(_))));
        // still a valid matrix
        assert!(is_lorentz(&mueller_from_k(&half_turn).unwrap()).is_lorentz);
    }
}
