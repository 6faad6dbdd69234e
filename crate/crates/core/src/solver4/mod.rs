//! General (rotation plus boost) devices.
//!
//! For one pair the unknown parameter is expanded over the pair basis
//! `{avec, bvec, avec x bvec}` with four scalars `(x, y, z, w)`:
//!
//! ```text
//! n0 = A x - avec^2 y          n = z avec - w A bvec + y avec x bvec
//! m0 = -B z + bvec^2 w         m = x bvec - y B avec + w avec x bvec
//! ```
//!
//! Orthogonality `n0 m0 + n.m = 0` then holds identically, and the
//! normalization becomes the quadratic constraint
//! `a x^2 + 2 b x y + c y^2 - alpha z^2 - 2 beta z w - sigma w^2 = 1`.

mod four;
mod six;

pub use four::{solve_four, solve_four_with, FourOptions, FourReport, FourRoot};
pub use six::{solve_six, solve_six_with, LiftedUnknowns, SixCandidate, SixDiagnostics, SixOptions, SixReport};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lorentz::{mueller_from_k_unit, ComplexParameter, MuellerMatrix, RealParameter};
use crate::stokes::{pair_geometry, require_basis, MeasurementPair, PairGeometry};
use crate::tol::{TOL_CONS, TOL_DEG, TOL_K};

/// Expansion scalars of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoeffs {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl ExpansionCoeffs {
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, -self.w)
    }

    pub fn lifted(&self) -> LiftedUnknowns {
        LiftedUnknowns::from_expansion(self)
    }

    /// Coefficient of `bvec` in `n`: `-A w`.
    pub fn n_minus(&self, g: &PairGeometry) -> f64 {
        -g.a * self.w
    }

    /// Coefficient of `avec` in `m`: `-B y`.
    pub fn m_plus(&self, g: &PairGeometry) -> f64 {
        -g.b * self.y
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Coefficients of the quadratic constraint of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl QuadCoeffs {
    pub fn from_geometry(g: &PairGeometry) -> Self {
        let (a, b) = (g.a, g.b);
        let (aa, bb) = (a * a, b * b);
        Self {
            a: aa - g.b2,
            b: a * (bb - g.a2),
            c: (g.a2 + g.b2 - bb) * g.a2 - aa * bb,
            alpha: bb - g.a2,
            beta: b * (aa - g.b2),
            sigma: (g.a2 + g.b2 - aa) * g.b2 - aa * bb,
        }
    }

    /// Row `(a, 2b, c, -alpha, -2beta, -sigma)` acting on the lifted unknowns.
    pub fn lifted_row(&self) -> [f64; 6] {
        [self.a, 2.0 * self.b, self.c, -self.alpha, -2.0 * self.beta, -self.sigma]
    }

    /// Left-hand side of the constraint.
    pub fn evaluate(&self, e: &ExpansionCoeffs) -> f64 {
        let ExpansionCoeffs { x, y, z, w } = *e;
        self.a * x * x + 2.0 * self.b * x * y + self.c * y * y
            - self.alpha * z * z
            - 2.0 * self.beta * z * w
            - self.sigma * w * w
    }

    /// Gradient of [`QuadCoeffs::evaluate`] with respect to `(x, y, z, w)`.
    pub fn gradient(&self, e: &ExpansionCoeffs) -> [f64; 4] {
        let ExpansionCoeffs { x, y, z, w } = *e;
        [
            2.0 * (self.a * x + self.b * y),
            2.0 * (self.b * x + self.c * y),
            -2.0 * (self.alpha * z + self.beta * w),
            -2.0 * (self.beta * z + self.sigma * w),
        ]
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.alpha, self.beta, self.sigma]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Constraint coefficients of a pair.
pub fn quad_coeffs(p: &MeasurementPair) -> Result<QuadCoeffs> {
    let g = pair_geometry(p)?;
    let q = QuadCoeffs::from_geometry(&g);
    if cfg!(debug_assertions)
        && p.input.invariant().abs() <= 1e-14 * p.input.s0().powi(2)
        && p.output.invariant().abs() <= 1e-14 * p.output.s0().powi(2)
    {
        let polar = quad_coeffs_polarized(p);
        debug_assert!(
            q.max_abs_diff(&polar) <= 1e-10 * q.max_abs().max(1.0),
            "fully polarized specialization disagrees: {q:?} vs {polar:?}"
        );
    }
    Ok(q)
}

/// The coefficients rewritten through the invariant `Sigma^2` and the
/// Minkowski product `P = S0 S0' + S.S'`. Equal to [`QuadCoeffs::from_geometry`]
/// on every valid pair.
pub fn quad_coeffs_invariant_form(p: &MeasurementPair) -> QuadCoeffs {
    let (s, sp) = (&p.input, &p.output);
    let sigma2 = s.invariant();
    let prod = s.s0() * sp.s0() + s.s().dot(sp.s());
    let a = s.s0() + sp.s0();
    let b = s.s0() - sp.s0();
    let avec2 = (s.s() + sp.s()).norm_squared();
    let bvec2 = (s.s() - sp.s()).norm_squared();
    QuadCoeffs {
        a: 2.0 * sigma2 + 2.0 * prod,
        b: a * (2.0 * sigma2 - 2.0 * prod),
        c: (a * a - 4.0 * sigma2) * avec2 - a * a * b * b,
        alpha: 2.0 * sigma2 - 2.0 * prod,
        beta: b * (2.0 * sigma2 + 2.0 * prod),
        sigma: (b * b - 4.0 * sigma2) * bvec2 - a * a * b * b,
    }
}

/// Specialization for fully polarized light (`Sigma^2 = 0`). Here
/// `a c = b^2` and `alpha sigma = beta^2`, so both blocks are degenerate.
pub fn quad_coeffs_polarized(p: &MeasurementPair) -> QuadCoeffs {
    let (s, sp) = (&p.input, &p.output);
    let prod = s.s0() * sp.s0() + s.s().dot(sp.s());
    let a = s.s0() + sp.s0();
    let b = s.s0() - sp.s0();
    QuadCoeffs {
        a: 2.0 * prod,
        b: -2.0 * a * prod,
        c: 2.0 * a * a * prod,
        alpha: -2.0 * prod,
        beta: 2.0 * b * prod,
        sigma: -2.0 * b * b * prod,
    }
}

/// `a x^2 + 2 b x y + c y^2 - alpha z^2 - 2 beta z w - sigma w^2 - 1`.
pub fn constraint_residual(q: &QuadCoeffs, e: &ExpansionCoeffs) -> f64 {
    q.evaluate(e) - 1.0
}

/// Real parameter from the expansion, without any check.
pub fn expansion_to_params_raw(g: &PairGeometry, e: &ExpansionCoeffs) -> RealParameter {
    let ExpansionCoeffs { x, y, z, w } = *e;
    RealParameter {
        n0: g.a * x - g.a2 * y,
        n: z * g.avec - w * g.a * g.bvec + y * g.cross,
        m0: -g.b * z + g.b2 * w,
        m: x * g.bvec - y * g.b * g.avec + w * g.cross,
    }
}

/// Real parameter from the expansion; fails unless the normalization and
/// orthogonality relations hold within `TOL_K`.
pub fn expansion_to_params(g: &PairGeometry, e: &ExpansionCoeffs) -> Result<RealParameter> {
    let r = expansion_to_params_raw(g, e);
    r.check(TOL_K)?;
    Ok(r)
}

/// Side results of [`params_to_expansion_detailed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionDiagnostics {
    /// `y` recomputed from the `m` projections (absent when `B` vanishes).
    pub y_from_m: Option<f64>,
    /// `w` recomputed from the `n` projections (absent when `A` vanishes).
    pub w_from_n: Option<f64>,
    /// Largest disagreement of the duplicates, weighted by their contribution to the parameter.
    pub duplicate_mismatch: f64,
    /// `|expansion_to_params(expansion) - r|_inf`
    pub round_trip: f64,
}

/// Projects `(n, m)` onto the pair basis. `y` and `z` come from `n`, `x` and
/// `w` from `m`; the redundant `w` (from `n`) and `y` (from `m`) are reported
/// in the diagnostics.
pub fn params_to_expansion_detailed(
    g: &PairGeometry,
    r: &RealParameter,
    tol: f64,
) -> Result<(ExpansionCoeffs, ProjectionDiagnostics)> {
    require_basis(g)?;
    let e = project_raw(g, r);
    let ExpansionCoeffs { y, w, .. } = e;
    let d = g.projection_denominator();
    let ab = g.a * g.b;
    let (an, bn) = (g.avec.dot(&r.n), g.bvec.dot(&r.n));
    let (am, bm) = (g.avec.dot(&r.m), g.bvec.dot(&r.m));

    let scale = r.magnitude().sqrt().max(1.0);
    let tiny = TOL_DEG.sqrt() * (g.a.abs() + g.a2.sqrt());
    let y_from_m = (g.b.abs() > tiny).then(|| (bm * ab - am * g.b2) / (d * g.b));
    let w_from_n = (g.a.abs() > tiny).then(|| -(bn * g.a2 - an * ab) / (d * g.a));
    let mut duplicate_mismatch = 0.0f64;
    if let Some(ym) = y_from_m {
        duplicate_mismatch = duplicate_mismatch.max((ym - y).abs() * (g.b * g.a2.sqrt()).abs());
    }
    if let Some(wn) = w_from_n {
        duplicate_mismatch = duplicate_mismatch.max((wn - w).abs() * (g.a * g.b2.sqrt()).abs());
    }
    let round_trip = expansion_to_params_raw(g, &e).max_abs_diff(r);
    let diag = ProjectionDiagnostics {
        y_from_m,
        w_from_n,
        duplicate_mismatch,
        round_trip,
    };
    let worst = duplicate_mismatch.max(round_trip);
    if !(worst <= tol * scale) {
        return Err(Error::InconsistentParameter(worst));
    }
    Ok((e, diag))
}

/// The projections alone, with no basis or consistency checks.
pub(crate) fn project_raw(g: &PairGeometry, r: &RealParameter) -> ExpansionCoeffs {
    let d = g.projection_denominator();
    let ab = g.a * g.b;
    let (an, bn) = (g.avec.dot(&r.n), g.bvec.dot(&r.n));
    let (am, bm) = (g.avec.dot(&r.m), g.bvec.dot(&r.m));
    ExpansionCoeffs {
        x: (-am * ab + bm * g.a2) / d,
        y: g.cross.dot(&r.n) / d,
        z: -(bn * ab - an * g.b2) / d,
        w: g.cross.dot(&r.m) / d,
    }
}

/// Expansion of `r` in the basis of `g`. Fails when `r` does not map the pair.
pub fn params_to_expansion(g: &PairGeometry, r: &RealParameter) -> Result<ExpansionCoeffs> {
    params_to_expansion_detailed(g, r, TOL_CONS).map(|(e, _)| e)
}

/// Complex parameter straight from the expansion, without the unit check:
/// `k0 = (x A - i z B) - (y avec^2 - i w bvec^2)`,
/// `k = -(y B + i z) avec + (x + i w A) bvec + (w - i y) avec x bvec`.
pub fn k_from_expansion_raw(g: &PairGeometry, e: &ExpansionCoeffs) -> ComplexParameter {
    let ExpansionCoeffs { x, y, z, w } = *e;
    let i = Complex64::i();
    let k0 = (x * g.a - i * z * g.b) - (y * g.a2 - i * w * g.b2);
    let ca = -(y * g.b + i * z);
    let cb = x + i * w * g.a;
    let cc = w - i * y;
    let comp = |j: usize| ca * g.avec[j] + cb * g.bvec[j] + cc * g.cross[j];
    ComplexParameter::new_unchecked([k0, comp(0), comp(1), comp(2)])
}

pub fn k_from_expansion(g: &PairGeometry, e: &ExpansionCoeffs) -> Result<ComplexParameter> {
    let k = k_from_expansion_raw(g, e);
    k.check_unit(TOL_K)?;
    Ok(k)
}

/// Mueller matrix of a candidate parameter, skipping the unit check so that
/// slightly off candidates can still be scored.
pub(crate) fn candidate_mueller(k: &ComplexParameter) -> MuellerMatrix {
    mueller_from_k_unit(k, f64::INFINITY).expect("imaginary check disabled")
}

/// One point of the single-pair solution family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family4DRoot {
    pub expansion: ExpansionCoeffs,
    pub k: ComplexParameter,
    pub mueller: MuellerMatrix,
    /// Transitivity residual on the generating pair.
    pub residual: f64,
}

/// Solves the constraint for `x` given `(y, z, w)`. Returns one or two roots,
/// each scored by the transitivity residual of its matrix on `p`.
pub fn family_4d(p: &MeasurementPair, y: f64, z: f64, w: f64) -> Result<Vec<Family4DRoot>> {
    let g = pair_geometry(p)?;
    let q = QuadCoeffs::from_geometry(&g);
    let lin = q.b * y;
    let rest = q.c * y * y - q.alpha * z * z - 2.0 * q.beta * z * w - q.sigma * w * w - 1.0;
    let scale = q.max_abs().max(1.0);

    let xs: Vec<f64> = if q.a.abs() <= TOL_DEG * scale {
        if lin.abs() <= TOL_DEG * scale * y.abs().max(1.0) {
            return Err(Error::DegenerateLeadingCoefficient);
        }
        vec![-rest / (2.0 * lin)]
    } else {
        let disc = lin * lin - q.a * rest;
        let disc_scale = (lin * lin).abs() + (q.a * rest).abs();
        if disc < -TOL_CONS * disc_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NoRealRoot(disc));
        }
        let root = disc.max(0.0).sqrt();
        if root == 0.0 {
            vec![-lin / q.a]
        } else {
            // cancellation-free pair of roots
            let t = -(lin + if lin >= 0.0 { root } else { -root });
            let (r1, r2) = (t / q.a, rest / t);
            if r1 <= r2 {
                vec![r1, r2]
            } else {
                vec![r2, r1]
            }
        }
    };

    Ok(xs
        .into_iter()
        .map(|x| {
            let expansion = ExpansionCoeffs { x, y, z, w };
            let k = k_from_expansion_raw(&g, &expansion);
            let mueller = candidate_mueller(&k);
            Family4DRoot {
                expansion,
                k,
                mueller,
                residual: mueller.transitivity_residual(&p.input, &p.output),
            }
        })
        .collect())
}

/// Transitivity residuals of `l` on every pair.
pub(crate) fn residuals_on(l: &MuellerMatrix, pairs: &[MeasurementPair]) -> Vec<f64> {
    pairs
        .iter()
        .map(|p| l.transitivity_residual(&p.input, &p.output))
        .collect()
}

/// Checks that `pairs` have a usable expansion basis and returns their geometries.
pub(crate) fn geometries(pairs: &[MeasurementPair]) -> Result<Vec<PairGeometry>> {
    pairs
        .iter()
        .map(|p| {
            let g = pair_geometry(p)?;
            require_basis(&g)?;
            Ok(g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{k_from_nm, mueller_from_k, nm_from_k};
    use crate::stokes::StokesVector;
    use nalgebra::Vector3;

    fn sv(s0: f64, x: f64, y: f64, z: f64) -> StokesVector {
        StokesVector::new(s0, Vector3::new(x, y, z)).unwrap()
    }

    #[test]
    fn quarter_turn_coefficients() {
        let p = MeasurementPair::new(sv(1.0, 1.0, 0.0, 0.0), sv(1.0, 0.0, 1.0, 0.0)).unwrap();
        let q = quad_coeffs(&p).unwrap();
        assert_eq!(q.a, 2.0);
        assert_eq!(q.b, -4.0);
        assert_eq!(q.c, 8.0);
        assert_eq!(q.alpha, -2.0);
        assert_eq!(q.beta, 0.0);
        assert_eq!(q.sigma, 0.0);
        assert!(q.max_abs_diff(&quad_coeffs_polarized(&p)) < 1e-14);
    }

    #[test]
    fn identity_pair_coefficients() {
        let s = sv(1.0, 1.0, 0.0, 0.0);
        let q = quad_coeffs(&MeasurementPair::new(s, s).unwrap()).unwrap();
        // bvec = 0 and B = 0 kill beta and sigma, while b = -A avec^2 survives
        assert_eq!((q.beta, q.sigma), (0.0, 0.0));
        assert_eq!(q.b, -8.0);
        assert_eq!(q.alpha, -4.0);
        assert_eq!(q.a, 4.0);
        assert_eq!(q.c, 16.0);
    }

    #[test]
    fn identity_from_expansion() {
        let s = sv(1.0, 0.5, 0.0, 0.0);
        let g = PairGeometry::new(&MeasurementPair::new(s, s).unwrap());
        let e = ExpansionCoeffs::new(1.0 / g.a, 0.0, 0.0, 0.0);
        let r = expansion_to_params(&g, &e).unwrap();
        assert_eq!(r, RealParameter::new(1.0, Vector3::zeros(), 0.0, Vector3::zeros()));
        let k = k_from_expansion(&g, &e).unwrap();
        assert!(k.distance_up_to_sign(&ComplexParameter::identity()) < 1e-15);
    }

    #[test]
    fn zero_and_scaled_constraint() {
        let p = MeasurementPair::new(sv(1.0, 1.0, 0.0, 0.0), sv(1.0, 0.0, 1.0, 0.0)).unwrap();
        let q = quad_coeffs(&p).unwrap();
        assert_eq!(constraint_residual(&q, &ExpansionCoeffs::new(0.0, 0.0, 0.0, 0.0)), -1.0);
        let e = ExpansionCoeffs::new(1.0 / 2f64.sqrt(), 0.0, 0.0, 0.0);
        assert!(constraint_residual(&q, &e).abs() < 1e-15);
        let e2 = ExpansionCoeffs::new(2.0 * e.x, 0.0, 0.0, 0.0);
        assert!((constraint_residual(&q, &e2) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_pair_has_no_projection() {
        let s = sv(1.0, 0.3, 0.2, 0.1);
        let g = PairGeometry::new(&MeasurementPair::new(s, s).unwrap());
        let r = RealParameter::rotation(1.0, Vector3::zeros());
        assert!(matches!(params_to_expansion(&g, &r), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn boosted_round_trip() {
        let k = k_from_nm(&RealParameter::new(
            0.9f64.cosh(),
            Vector3::zeros(),
            0.0,
            Vector3::new(0.9f64.sinh(), 0.0, 0.0),
        ))
        .unwrap();
        let l = mueller_from_k(&k).unwrap();
        let s = sv(1.0, 0.2, 0.5, -0.3);
        let p = MeasurementPair::new(s, l.apply(&s)).unwrap();
        let g = pair_geometry(&p).unwrap();
        let nm = nm_from_k(&k);
        let (e, d) = params_to_expansion_detailed(&g, &nm, TOL_CONS).unwrap();
        assert!(d.round_trip < 1e-12);
        assert!(d.y_from_m.is_some() && d.w_from_n.is_some());
        let q = QuadCoeffs::from_geometry(&g);
        assert!(constraint_residual(&q, &e).abs() < 1e-12);
        assert!(k_from_expansion(&g, &e).unwrap().distance_up_to_sign(&k) < 1e-12);
        let flipped = k_from_expansion(&g, &e.neg()).unwrap();
        assert!(flipped.distance_up_to_sign(&k) < 1e-12);
        let lm = mueller_from_k(&flipped).unwrap();
        assert!(lm.max_abs_diff(&l) < 1e-12);
        // a different device does not map the pair
        assert!(matches!(
            params_to_expansion(&g, &RealParameter::rotation(1.0, Vector3::zeros())),
            Err(Error::InconsistentParameter(_))
        ));
    }

    #[test]
    fn family_contains_truth_and_rejects_huge() {
        let k = k_from_nm(&RealParameter::new(
            0.7f64.cosh(),
            Vector3::zeros(),
            0.0,
            Vector3::new(0.0, 0.7f64.sinh(), 0.0),
        ))
        .unwrap();
        let l = mueller_from_k(&k).unwrap();
        let s = sv(1.3, 0.4, -0.2, 0.7);
        let p = MeasurementPair::new(s, l.apply(&s)).unwrap();
        let g = pair_geometry(&p).unwrap();
        let e = params_to_expansion(&g, &nm_from_k(&k)).unwrap();
        let roots = family_4d(&p, e.y, e.z, e.w).unwrap();
        assert!(roots
            .iter()
            .any(|r| (r.expansion.x - e.x).abs() < 1e-10 && r.residual < 1e-9));
        for r in &roots {
            assert!(r.residual < 1e-8);
        }
        let q = QuadCoeffs::from_geometry(&g);
        let (y, z, w) = if q.c > 0.0 { (0.0, 1e6, 1e6) } else { (1e6, 0.0, 0.0) };
        let got = family_4d(&p, y, z, w);
        assert!(matches!(got, Err(Error::NoRealRoot(_))), "{got:?}");
    }

    #[test]
    fn rotation_family_has_zero_root() {
        let s = sv(1.0, 0.6, 0.0, 0.0);
        let sp = sv(1.0, 0.0, 0.6, 0.0);
        let p = MeasurementPair::new(s, sp).unwrap();
        let g = pair_geometry(&p).unwrap();
        let q = QuadCoeffs::from_geometry(&g);
        // pick (y, z) on the ellipse c y^2 - alpha z^2 = 1
        let y = 0.5 / q.c.sqrt();
        let z = ((1.0 - q.c * y * y) / -q.alpha).sqrt();
        let roots = family_4d(&p, y, z, 0.0).unwrap();
        let zero = roots.iter().find(|r| r.expansion.x.abs() < 1e-14).unwrap();
        let r = expansion_to_params(&g, &zero.expansion).unwrap();
        assert!((r.n0 + y * g.a2).abs() < 1e-14);
        assert!((r.n - (z * g.avec + y * g.cross)).amax() < 1e-14);
        assert!(zero.residual < 1e-12);
    }

    #[test]
    fn invariant_form_matches() {
        let s = sv(1.5, 0.3, -0.4, 0.2);
        let k = k_from_nm(&RealParameter::new(
            0.5f64.cosh(),
            Vector3::zeros(),
            0.0,
            Vector3::new(0.0, 0.0, 0.5f64.sinh()),
        ))
        .unwrap();
        let p = MeasurementPair::new(s, mueller_from_k(&k).unwrap().apply(&s)).unwrap();
        let q = quad_coeffs(&p).unwrap();
        assert!(q.max_abs_diff(&quad_coeffs_invariant_form(&p)) < 1e-12 * q.max_abs());
    }
}
