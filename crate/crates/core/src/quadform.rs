//! Diagonalization and signature of the two 2x2 blocks of the constraint form.
//!
//! A block `a x^2 + 2 b x y + c y^2` is rotated by
//! `x = cos(phi) X + sin(phi) Y`, `y = -sin(phi) X + cos(phi) Y` into
//! `F X^2 + G Y^2` with `tan(2 phi) = 2b / (c - a)` and
//! `F, G = (a + c)/2 -+ sqrt((a - c)^2 + 4 b^2)/2`.

use std::fmt;

use serde::Serialize;

use crate::solver4::QuadCoeffs;
use crate::tol::TOL_K;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagResult {
    /// Smaller eigenvalue (`F`, or `Delta` for the second block).
    pub eig_minus: f64,
    /// Larger eigenvalue (`G`, or the second block's partner).
    pub eig_plus: f64,
    /// Rotation angle in `(-pi/2, pi/2]`.
    pub angle: f64,
}

impl DiagResult {
    /// Coefficients `(F, cross, G)` of the block after rotating by `angle`:
    /// the diagonal terms and the `2XY` coefficient.
    pub fn rotated(a: f64, b: f64, c: f64, angle: f64) -> (f64, f64, f64) {
        let (s, co) = angle.sin_cos();
        let f = a * co * co - 2.0 * b * s * co + c * s * s;
        let g = a * s * s + 2.0 * b * s * co + c * co * co;
        let cross = a * s * co + b * (co * co - s * s) - c * s * co;
        (f, cross, g)
    }
}

/// Eigenvalues and principal angle of the symmetric block `[[a, b], [b, c]]`.
/// The fully degenerate `a = c`, `b = 0` case returns angle 0.
pub fn diagonalize2(a: f64, b: f64, c: f64) -> DiagResult {
    let h = (a - c).hypot(2.0 * b);
    let mid = 0.5 * (a + c);
    DiagResult {
        eig_minus: mid - 0.5 * h,
        eig_plus: mid + 0.5 * h,
        angle: 0.5 * (2.0 * b).atan2(c - a),
    }
}

/// Block of `(x, y)`: `a x^2 + 2 b x y + c y^2 = F X^2 + G Y^2`.
pub fn xy_block(q: &QuadCoeffs) -> DiagResult {
    diagonalize2(q.a, q.b, q.c)
}

/// Block of `(z, w)`, diagonalized on `(alpha, beta, sigma)`:
/// `alpha z^2 + 2 beta z w + sigma w^2 = Delta Z^2 + Gamma W^2`, so the
/// constraint's own block `-alpha z^2 - 2 beta z w - sigma w^2` equals
/// `-(Delta Z^2 + Gamma W^2)`.
pub fn zw_block(q: &QuadCoeffs) -> DiagResult {
    diagonalize2(q.alpha, q.beta, q.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "0")]
    Zero,
}

impl Sign {
    fn of(v: f64, tol: f64) -> Self {
        if v.abs() <= tol {
            Sign::Zero
        } else if v > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
            Sign::Zero => "0",
        })
    }
}

/// Sign pattern of `(F, G, Delta, Gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub signs: [Sign; 4],
    /// Slots whose value lies within the tolerance of zero.
    pub zero: [bool; 4],
}

impl Signature {
    pub fn is_boundary(&self) -> bool {
        self.zero.iter().any(|z| *z)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.signs;
        write!(f, "({a},{b},{c},{d})")
    }
}

pub fn classify_signature(f: f64, g: f64, delta: f64, gamma: f64) -> Signature {
    classify_signature_with(f, g, delta, gamma, TOL_K)
}

pub fn classify_signature_with(f: f64, g: f64, delta: f64, gamma: f64, tol: f64) -> Signature {
    let vals = [f, g, delta, gamma];
    Signature {
        signs: vals.map(|v| Sign::of(v, tol)),
        zero: vals.map(|v| v.abs() <= tol),
    }
}

/// The sufficient conditions for `(F, G, Delta, Gamma) ~ (+, +, -, -)` on raw
/// coefficients, next to the pattern actually found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `a > 0`, `c > 0`, `a c > b^2`
    pub xy_positive_definite: bool,
    /// `alpha < 0`, `sigma < 0`, `alpha sigma > beta^2`
    pub zw_negative_definite: bool,
    /// `a c - b^2`, relative to `max(|a c|, b^2)`
    pub xy_determinant: f64,
    /// `alpha sigma - beta^2`, relative to `max(|alpha sigma|, beta^2)`
    pub zw_determinant: f64,
    pub signature: Signature,
    /// Conditions and eigenvalue signs tell the same story for each block.
    pub agrees: bool,
}

/// Both block diagonalizations of one pair's constraint together with the
/// signature and the raw-coefficient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadFormReport {
    pub coeffs: QuadCoeffs,
    pub xy: DiagResult,
    pub zw: DiagResult,
    pub conditions: ConditionReport,
}

fn rel_det(p: f64, q: f64, r: f64) -> f64 {
    let scale = (p * r).abs().max(q * q);
    if scale == 0.0 {
        0.0
    } else {
        (p * r - q * q) / scale
    }
}

pub fn analyze(q: &QuadCoeffs) -> QuadFormReport {
    let xy = xy_block(q);
    let zw = zw_block(q);
    let tol = TOL_K * q.max_abs().max(1.0);
    let signature = classify_signature_with(xy.eig_minus, xy.eig_plus, zw.eig_minus, zw.eig_plus, tol);
    let xy_determinant = rel_det(q.a, q.b, q.c);
    let zw_determinant = rel_det(q.alpha, q.beta, q.sigma);
    let xy_pd = q.a > 0.0 && q.c > 0.0 && xy_determinant > TOL_K;
    let zw_nd = q.alpha < 0.0 && q.sigma < 0.0 && zw_determinant > TOL_K;
    let s = signature.signs;
    let agrees =
        xy_pd == (s[0] == Sign::Plus && s[1] == Sign::Plus) && zw_nd == (s[2] == Sign::Minus && s[3] == Sign::Minus);
    QuadFormReport {
        coeffs: *q,
        xy,
        zw,
        conditions: ConditionReport {
            xy_positive_definite: xy_pd,
            zw_negative_definite: zw_nd,
            xy_determinant,
            zw_determinant,
            signature,
            agrees,
        },
    }
}
