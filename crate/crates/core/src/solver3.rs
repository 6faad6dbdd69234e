//! Rotation-only ("non-relativistic") devices.
//!
//! A rotation maps a polarization vector `S` to `S'` of equal length. One
//! measurement leaves a one-parameter family of rotations, labelled by an
//! angle `gamma`:
//!
//! ```text
//! n0 = beta (S^2 + S.S'),   n = alpha (S + S') + beta S x S'
//! alpha = sin(gamma) / sqrt(2 (S^2 + S.S')),   beta = cos(gamma) / (S sqrt(2 (S^2 + S.S')))
//! ```
//!
//! Two measurements with equally inclined inputs pin `gamma` (up to the
//! harmless `gamma -> gamma + pi`, which flips the sign of `(n0, n)`).

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lorentz::{k_from_nm_unchecked, mueller_from_k_unit, ComplexParameter, MuellerMatrix, RealParameter};
use crate::stokes::MeasurementPair;
use crate::tol::{TOL_CONS, TOL_DEG, TOL_DIV, TOL_IM, TOL_INV, TOL_K, TOL_L};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family3DSolution {
    /// In `[0, 2 pi)`.
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n0: f64,
    pub n: Vector3<f64>,
}

impl Family3DSolution {
    pub fn real_parameter(&self) -> RealParameter {
        RealParameter::rotation(self.n0, self.n)
    }

    pub fn k(&self) -> ComplexParameter {
        k_from_nm_unchecked(&self.real_parameter())
    }

    pub fn mueller(&self) -> MuellerMatrix {
        mueller_from_k_unit(&self.k(), TOL_IM).expect("rotation parameters give a real product")
    }

    /// `n0^2 + n^2 - 1`
    pub fn normalization_residual(&self) -> f64 {
        self.n0 * self.n0 + self.n.norm_squared() - 1.0
    }
}

/// Checks the rotation preconditions and returns `(|S|, S^2 + S.S')`.
fn rotation_geometry(p: &MeasurementPair) -> Result<(f64, f64)> {
    let (s, sp) = (p.input.s(), p.output.s());
    let (len, len_out) = (s.norm(), sp.norm());
    if (len - len_out).abs() > TOL_INV * len.max(len_out) {
        return Err(Error::LengthMismatch {
            input: len,
            output: len_out,
        });
    }
    if len <= TOL_DEG * p.input.s0() {
        return Err(Error::DegenerateGeometry(
            "unpolarized input has no rotation geometry".into(),
        ));
    }
    let d = s.norm_squared() + s.dot(sp);
    if d <= TOL_DEG * s.norm_squared() {
        return Err(Error::AntipodalInput(d));
    }
    Ok((len, d))
}

fn wrap_angle(gamma: f64) -> f64 {
    let g = gamma.rem_euclid(TAU);
    if g >= TAU {
        0.0
    } else {
        g
    }
}

/// Member `gamma` of the rotation family carrying `p.input` to `p.output`.
pub fn family_3d(p: &MeasurementPair, gamma: f64) -> Result<Family3DSolution> {
    let (len, d) = rotation_geometry(p)?;
    let (s, sp) = (p.input.s(), p.output.s());
    let root = (2.0 * d).sqrt();
    let (sin, cos) = gamma.sin_cos();
    let alpha = sin / root;
    let beta = cos / (len * root);
    Ok(Family3DSolution {
        gamma: wrap_angle(gamma),
        alpha,
        beta,
        n0: beta * d,
        n: alpha * (s + sp) + beta * s.cross(sp),
    })
}

/// Gibbs vector `n / n0` of the family member `gamma`, in closed form:
/// `c = tan(gamma) S (S + S') / (S^2 + S.S') + S x S' / (S^2 + S.S')`.
pub fn gibbs_3d(p: &MeasurementPair, gamma: f64) -> Result<Vector3<f64>> {
    let (len, d) = rotation_geometry(p)?;
    let fam = family_3d(p, gamma)?;
    if fam.n0.abs() <= TOL_DIV {
        return Err(Error::HalfTurn(fam.n0));
    }
    let (s, sp) = (p.input.s(), p.output.s());
    Ok(gamma.tan() * len * (s + sp) / d + s.cross(sp) / d)
}

/// One of the four closed-form expressions for `tan(gamma)`, kept as a
/// numerator/denominator pair so the quadrant survives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaExpression {
    pub numerator: f64,
    pub denominator: f64,
}

impl GammaExpression {
    fn magnitude(&self) -> f64 {
        self.numerator.hypot(self.denominator)
    }
}

/// Result of the two-measurement rotation reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPairRotation {
    pub solution: Family3DSolution,
    /// `|N1.N1' - N2.N2'|`
    pub consistency_residual: f64,
    pub expressions: [GammaExpression; 4],
    /// Which expression fixed `gamma`.
    pub chosen: usize,
    /// Largest disagreement (modulo pi) among the non-degenerate expressions.
    pub expression_spread: f64,
    /// Transitivity residuals on unit directions for the two pairs.
    pub residuals: [f64; 2],
}

fn unit_directions(p: &MeasurementPair) -> Result<(Vector3<f64>, Vector3<f64>)> {
    match (p.input.direction(), p.output.direction()) {
        (Some(n), Some(np)) => Ok((n, np)),
        _ => Err(Error::DegenerateGeometry("unpolarized vector has no direction".into())),
    }
}

fn angle_gap_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn rotate(sol: &Family3DSolution, v: &Vector3<f64>) -> Vector3<f64> {
    let l = sol.mueller();
    let out = l.apply_raw(&[1.0, v.x, v.y, v.z]);
    Vector3::new(out[1], out[2], out[3])
}

/// Reconstructs a rotation device from two measurements.
///
/// Requires `N1.N1' = N2.N2'` for the unit directions: both inputs must make
/// the same angle with the rotation axis. `gamma` comes from the best
/// conditioned of the four expressions
///
/// ```text
/// tan g =  N1.(N2 x N2') / ((N2 - N1).(N2 + N2'))
/// tan g = -N1'.(N2' x N2) / ((N2' - N1').(N2' + N2))
/// tan g =  N2.(N1 x N1') / ((N1 - N2).(N1 + N1'))
/// tan g = -N2'.(N1' x N1) / ((N1' - N2').(N1' + N1))
/// ```
pub fn solve_two_3d(p1: &MeasurementPair, p2: &MeasurementPair) -> Result<TwoPairRotation> {
    let (n1, n1p) = unit_directions(p1)?;
    let (n2, n2p) = unit_directions(p2)?;

    let consistency_residual = (n1.dot(&n1p) - n2.dot(&n2p)).abs();
    if consistency_residual > TOL_CONS {
        return Err(Error::InconsistentPairs {
            residual: consistency_residual,
        });
    }

    let expressions = [
        GammaExpression {
            numerator: n1.dot(&n2.cross(&n2p)),
            denominator: (n2 - n1).dot(&(n2 + n2p)),
        },
        GammaExpression {
            numerator: -n1p.dot(&n2p.cross(&n2)),
            denominator: (n2p - n1p).dot(&(n2p + n2)),
        },
        GammaExpression {
            numerator: n2.dot(&n1.cross(&n1p)),
            denominator: (n1 - n2).dot(&(n1 + n1p)),
        },
        GammaExpression {
            numerator: -n2p.dot(&n1p.cross(&n1)),
            denominator: (n1p - n2p).dot(&(n1p + n1)),
        },
    ];
    let (chosen, best) = expressions
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.magnitude().total_cmp(&b.1.magnitude()))
        .expect("four expressions");
    if best.magnitude() <= 1e-10 {
        return Err(Error::DegenerateGeometry(
            "every tan(gamma) expression is 0/0; the pairs do not fix the axis".into(),
        ));
    }
    let gamma = best.numerator.atan2(best.denominator);
    let expression_spread = expressions
        .iter()
        .filter(|e| e.magnitude() > 1e-6 * best.magnitude())
        .map(|e| angle_gap_mod_pi(e.numerator.atan2(e.denominator), gamma))
        .fold(0.0, f64::max);

    let unit1 = unit_pair(&n1, &n1p);
    for g in [gamma, gamma + PI] {
        let solution = family_3d(&unit1, g)?;
        let r1 = (rotate(&solution, &n1) - n1p).amax();
        let r2 = (rotate(&solution, &n2) - n2p).amax();
        if r1 <= TOL_L && r2 <= TOL_L {
            // report the family member on the raw first pair
            let solution = family_3d(p1, g)?;
            return Ok(TwoPairRotation {
                solution,
                consistency_residual,
                expressions,
                chosen,
                expression_spread,
                residuals: [r1, r2],
            });
        }
    }
    let solution = family_3d(&unit1, gamma)?;
    Err(Error::InconsistentPairs {
        residual: (rotate(&solution, &n2) - n2p).amax(),
    })
}

fn unit_pair(n: &Vector3<f64>, np: &Vector3<f64>) -> MeasurementPair {
    use crate::stokes::StokesVector;
    MeasurementPair::new_unchecked(
        StokesVector::new_unchecked(1.0, *n),
        StokesVector::new_unchecked(1.0, *np),
    )
}

/// Output of [`linear_two_3d`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTwoResult {
    pub y2: f64,
    pub z2: f64,
    pub y: f64,
    pub z: f64,
    pub n0: f64,
    pub n: Vector3<f64>,
    pub residuals: [f64; 2],
}

impl LinearTwoResult {
    pub fn real_parameter(&self) -> RealParameter {
        RealParameter::rotation(self.n0, self.n)
    }

    pub fn mueller(&self) -> MuellerMatrix {
        mueller_from_k_unit(&k_from_nm_unchecked(&self.real_parameter()), TOL_IM)
            .expect("rotation parameters give a real product")
    }
}

/// Row `(avec^2 (avec^2 + bvec^2) - (avec.bvec)^2, avec^2)` of the linear
/// system in `(y^2, z^2)` for one unit-normalized pair.
pub fn linear_row(p: &MeasurementPair) -> Result<[f64; 2]> {
    let (n, np) = unit_directions(p)?;
    let (a, b) = (n + np, n - np);
    let (a2, b2, ab) = (a.norm_squared(), b.norm_squared(), a.dot(&b));
    Ok([a2 * (a2 + b2) - ab * ab, a2])
}

/// Solves `r1 . (y^2, z^2) = 1`, `r2 . (y^2, z^2) = 1` by Cramer's rule.
pub fn solve_linear_rows(r1: [f64; 2], r2: [f64; 2]) -> Result<(f64, f64)> {
    let det = r1[0] * r2[1] - r2[0] * r1[1];
    let scale = (r1[0] * r2[1]).abs() + (r2[0] * r1[1]).abs();
    if det.abs() <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::SingularSystem(format!(
            "rows {r1:?} and {r2:?} are dependent (det {det:e})"
        )));
    }
    let y2 = (r2[1] - r1[1]) / det;
    let z2 = (r1[0] - r2[0]) / det;
    for (name, v) in [("y^2", y2), ("z^2", z2)] {
        if v < -TOL_K {
            return Err(Error::NegativeSquare { name, value: v });
        }
    }
    Ok((y2, z2))
}

/// Rotation from the linear system in `(y^2, z^2)` built on two unit-normalized
/// pairs.
///
/// Each row is the normalization `n0^2 + n^2 = 1` of the rotation
/// `n0 = -y avec^2`, `n = z avec + y avec x bvec`. For unit directions
/// `avec^2 + bvec^2 = 4` and `avec.bvec = 0`, so every row is a multiple of
/// `(4, 1)` and the system is always singular. The function reports this as
/// [`Error::SingularSystem`]. Rows from other sources can be solved directly
/// with [`solve_linear_rows`].
pub fn linear_two_3d(p1: &MeasurementPair, p2: &MeasurementPair) -> Result<LinearTwoResult> {
    let (y2, z2) = solve_linear_rows(linear_row(p1)?, linear_row(p2)?)?;
    let (y_abs, z_abs) = (y2.max(0.0).sqrt(), z2.max(0.0).sqrt());

    let (n1, n1p) = unit_directions(p1)?;
    let (n2, n2p) = unit_directions(p2)?;
    let (a, b) = (n1 + n1p, n1 - n1p);
    let mut best: Option<LinearTwoResult> = None;
    for sy in [1.0, -1.0] {
        for sz in [1.0, -1.0] {
            let (y, z) = (sy * y_abs, sz * z_abs);
            let n0 = -y * a.norm_squared();
            let n = z * a + y * a.cross(&b);
            let cand = LinearTwoResult {
                y2,
                z2,
                y,
                z,
                n0,
                n,
                residuals: [0.0; 2],
            };
            let l = cand.mueller();
            let res = |v: &Vector3<f64>, w: &Vector3<f64>| {
                let o = l.apply_raw(&[1.0, v.x, v.y, v.z]);
                (Vector3::new(o[1], o[2], o[3]) - w).amax()
            };
            let residuals = [res(&n1, &n1p), res(&n2, &n2p)];
            let worst = residuals[0].max(residuals[1]);
            if worst <= TOL_L.max(TOL_CONS) {
                let cand = LinearTwoResult { residuals, ..cand };
                if best.as_ref().is_none_or(|b| worst < b.residuals[0].max(b.residuals[1])) {
                    best = Some(cand);
                }
            }
        }
    }
    best.ok_or(Error::InconsistentPairs { residual: f64::NAN })
}
