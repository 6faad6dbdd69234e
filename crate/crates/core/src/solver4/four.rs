//! Reconstruction from four measurements: four simultaneous quadratic
//! constraints in `(x, y, z, w)`, solved by damped Newton (Levenberg-Marquardt)
//! from seeded random starts.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{candidate_mueller, geometries, k_from_expansion_raw, residuals_on, ExpansionCoeffs, QuadCoeffs};
use crate::error::{Error, Result};
use crate::json::KJson;
use crate::stokes::MeasurementPair;
use crate::tol::TOL_L;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Largest `|constraint - 1|` accepted as a root.
    pub tol_root: f64,
    /// Initial Levenberg-Marquardt damping.
    pub damping: f64,
    /// Half-width of the start box; derived from the coefficients when absent.
    pub scale: Option<f64>,
    /// Worst transitivity residual a root may have to count as valid.
    pub tol_valid: f64,
}

impl Default for FourOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            seed: 0,
            max_iter: 500,
            tol_root: 1e-10,
            damping: 1e-3,
            scale: None,
            tol_valid: TOL_L,
        }
    }
}

/// A converged root, canonicalized modulo the global sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourRoot {
    pub expansion: ExpansionCoeffs,
    /// `max_i |constraint_i - 1|`
    pub residual: f64,
    pub jacobian_rank: usize,
    /// Pair basis giving the best matrix.
    pub basis: usize,
    pub k: KJson,
    pub mueller: Vec<f64>,
    pub residuals: Vec<f64>,
    pub worst: f64,
    pub validated: bool,
    /// How many starts converged to this root.
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourReport {
    pub roots: Vec<FourRoot>,
    pub starts: usize,
    pub converged: usize,
    pub scale: f64,
    /// Some root has a rank-deficient Jacobian, so it lies on a continuum.
    pub non_isolated: bool,
    pub validated: bool,
}

impl FourReport {
    pub fn best(&self) -> Option<&FourRoot> {
        self.roots.first()
    }
}

pub fn solve_four(pairs: &[MeasurementPair]) -> Result<FourReport> {
    solve_four_with(pairs, &FourOptions::default())
}

struct System {
    quads: Vec<QuadCoeffs>,
    /// Row weights `1 / max(1, |q_i|_inf)` used while descending.
    weights: [f64; 4],
}

impl System {
    fn new(quads: Vec<QuadCoeffs>) -> Self {
        let weights = std::array::from_fn(|i| 1.0 / quads[i].max_abs().max(1.0));
        Self { quads, weights }
    }

    /// Unweighted residuals `q_i(e) - 1`.
    fn residual(&self, e: &ExpansionCoeffs) -> Vector4<f64> {
        Vector4::from_fn(|i, _| self.quads[i].evaluate(e) - 1.0)
    }

    fn jacobian(&self, e: &ExpansionCoeffs) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.quads[i].gradient(e)[j])
    }

    fn weighted_residual(&self, e: &ExpansionCoeffs) -> Vector4<f64> {
        self.residual(e).component_mul(&Vector4::from(self.weights))
    }

    fn weighted_jacobian(&self, e: &ExpansionCoeffs) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.weights[i] * self.quads[i].gradient(e)[j])
    }

    /// Levenberg-Marquardt on the weighted residuals from `start`; returns the
    /// final point and its unweighted residual norm.
    fn descend(&self, start: ExpansionCoeffs, opts: &FourOptions) -> (ExpansionCoeffs, f64) {
        let mut e = start;
        let mut r = self.weighted_residual(&e);
        let mut cost = r.norm_squared();
        let mut lambda = opts.damping;
        for _ in 0..opts.max_iter {
            if self.residual(&e).amax() <= opts.tol_root * 1e-3 {
                break;
            }
            let j = self.weighted_jacobian(&e);
            let jt = j.transpose();
            let jtj = jt * j;
            let g = jt * r;
            let mut improved = false;
            while lambda < 1e20 {
                let damped =
                    jtj + Matrix4::from_diagonal(&(jtj.diagonal() * lambda)) + Matrix4::identity() * (lambda * 1e-12);
                if let Some(step) = damped.lu().solve(&(-g)) {
                    let trial = ExpansionCoeffs::from_array((Vector4::from(e.to_array()) + step).into());
                    let rt = self.weighted_residual(&trial);
                    let ct = rt.norm_squared();
                    if ct.is_finite() && ct < cost {
                        e = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (e, self.residual(&e).amax())
    }
}

/// The constraints are `R f_i(theta) - P g_i(phi) = 1` with
/// `(x, y) = sqrt(R) (cos theta, sin theta)` and `(z, w) = sqrt(P) (cos phi, sin phi)`,
/// linear in `(R, P)` for fixed angles. The reduced search eliminates `(R, P)`
/// by weighted least squares and runs Levenberg-Marquardt over the two angles.
impl System {
    fn radial_columns(&self, theta: f64, phi: f64) -> (Vector4<f64>, Vector4<f64>) {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let f = Vector4::from_fn(|i, _| {
            let q = &self.quads[i];
            self.weights[i] * (q.a * ct * ct + 2.0 * q.b * ct * st + q.c * st * st)
        });
        let g = Vector4::from_fn(|i, _| {
            let q = &self.quads[i];
            -self.weights[i] * (q.alpha * cp * cp + 2.0 * q.beta * cp * sp + q.sigma * sp * sp)
        });
        (f, g)
    }

    /// Weighted least-squares `(R, P)` and the weighted residual at the angles.
    fn reduced(&self, theta: f64, phi: f64) -> ([f64; 2], Vector4<f64>) {
        let (f, g) = self.radial_columns(theta, phi);
        let w = Vector4::from(self.weights);
        let m = nalgebra::Matrix4x2::from_columns(&[f, g]);
        let svd = m.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let rp = svd.solve(&w, eps).unwrap_or_else(|_| nalgebra::Vector2::zeros());
        ([rp[0], rp[1]], m * rp - w)
    }

    fn reduced_descend(&self, theta: f64, phi: f64, opts: &FourOptions) -> Option<ExpansionCoeffs> {
        let mut ang = nalgebra::Vector2::new(theta, phi);
        let (_, mut r) = self.reduced(ang[0], ang[1]);
        let mut cost = r.norm_squared();
        let mut lambda = opts.damping;
        let h = 1e-7;
        for _ in 0..opts.max_iter {
            let mut j = nalgebra::Matrix4x2::zeros();
            for k in 0..2 {
                let mut plus = ang;
                let mut minus = ang;
                plus[k] += h;
                minus[k] -= h;
                let d = (self.reduced(plus[0], plus[1]).1 - self.reduced(minus[0], minus[1]).1) / (2.0 * h);
                j.set_column(k, &d);
            }
            let jtj = j.transpose() * j;
            let g = j.transpose() * r;
            let mut improved = false;
            while lambda < 1e20 {
                let damped = jtj
                    + nalgebra::Matrix2::from_diagonal(&(jtj.diagonal() * lambda))
                    + nalgebra::Matrix2::identity() * (lambda * 1e-12);
                if let Some(step) = damped.lu().solve(&(-g)) {
                    let trial = ang + step;
                    let (_, rt) = self.reduced(trial[0], trial[1]);
                    let ct = rt.norm_squared();
                    if ct.is_finite() && ct < cost {
                        ang = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-15);
                        improved = true;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved || cost.sqrt() <= opts.tol_root * 1e-3 {
                break;
            }
        }
        let ([rr, pp], _) = self.reduced(ang[0], ang[1]);
        let floor = -opts.tol_root.sqrt();
        if rr < floor || pp < floor {
            return None;
        }
        let (st, ct) = ang[0].sin_cos();
        let (sp, cp) = ang[1].sin_cos();
        let (a, b) = (rr.max(0.0).sqrt(), pp.max(0.0).sqrt());
        Some(ExpansionCoeffs::new(a * ct, a * st, b * cp, b * sp))
    }

    /// Reduced angular search from the angles of `start`, then a full
    /// four-dimensional polish; the start itself is descended as a fallback.
    fn solve_from(&self, start: ExpansionCoeffs, opts: &FourOptions) -> (ExpansionCoeffs, f64) {
        let direct = self.descend(start, opts);
        if direct.1 <= opts.tol_root {
            return direct;
        }
        let theta = start.y.atan2(start.x);
        let phi = start.w.atan2(start.z);
        match self.reduced_descend(theta, phi, opts) {
            Some(e) => {
                let polished = self.descend(e, opts);
                if polished.1 < direct.1 {
                    polished
                } else {
                    direct
                }
            }
            None => direct,
        }
    }
}

fn canonical(e: ExpansionCoeffs) -> ExpansionCoeffs {
    let v = e.to_array();
    let big = e.max_abs();
    match v.iter().find(|c| c.abs() > 1e-9 * big) {
        Some(c) if *c < 0.0 => e.neg(),
        _ => e,
    }
}

fn start_scale(quads: &[QuadCoeffs]) -> f64 {
    quads
        .iter()
        .map(|q| {
            let m = q.a.abs().max(q.c.abs()).max(q.alpha.abs()).max(q.sigma.abs());
            if m > 0.0 {
                2.0 / m.sqrt()
            } else {
                1.0
            }
        })
        .fold(0.0, f64::max)
}

pub fn solve_four_with(pairs: &[MeasurementPair], opts: &FourOptions) -> Result<FourReport> {
    if pairs.len() != 4 {
        return Err(Error::PairCount {
            expected: "4",
            found: pairs.len(),
        });
    }
    let geo = geometries(pairs)?;
    let sys = System::new(geo.iter().map(QuadCoeffs::from_geometry).collect());
    let scale = opts.scale.unwrap_or_else(|| start_scale(&sys.quads));

    let mut found: Vec<(ExpansionCoeffs, f64, usize)> = Vec::new();
    let mut converged = 0;
    for index in 0..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(index as u64);
        let start = ExpansionCoeffs::from_array(std::array::from_fn(|_| rng.random_range(-scale..=scale)));
        let (e, res) = sys.solve_from(start, opts);
        if !(res <= opts.tol_root) {
            continue;
        }
        converged += 1;
        let e = canonical(e);
        let tol = 1e-7 * (1.0 + e.max_abs());
        match found.iter_mut().find(|(f, _, _)| f.max_abs_diff(&e) <= tol) {
            Some(slot) => {
                slot.2 += 1;
                if res < slot.1 {
                    slot.0 = e;
                    slot.1 = res;
                }
            }
            None => found.push((e, res, 1)),
        }
    }
    if found.is_empty() {
        return Err(Error::NoConvergedRoot { starts: opts.starts });
    }

    let mut roots: Vec<FourRoot> = found
        .into_iter()
        .map(|(e, residual, hits)| {
            let sv = sys.jacobian(&e).singular_values();
            let smax = sv.max();
            let jacobian_rank = sv.iter().filter(|s| **s > 1e-8 * smax).count();
            let mut best: Option<FourRoot> = None;
            for (basis, g) in geo.iter().enumerate() {
                let k = k_from_expansion_raw(g, &e);
                let l = candidate_mueller(&k);
                let residuals = residuals_on(&l, pairs);
                let worst = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
                let worst = if worst.is_nan() { f64::INFINITY } else { worst };
                if best.as_ref().is_none_or(|b| worst < b.worst) {
                    best = Some(FourRoot {
                        expansion: e,
                        residual,
                        jacobian_rank,
                        basis,
                        k: k.into(),
                        mueller: l.to_row_major().to_vec(),
                        residuals,
                        worst,
                        validated: worst <= opts.tol_valid,
                        hits,
                    });
                }
            }
            best.expect("four bases")
        })
        .collect();
    roots.sort_by(|a, b| {
        a.worst.total_cmp(&b.worst).then_with(|| {
            a.expansion
                .to_array()
                .iter()
                .zip(b.expansion.to_array())
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let non_isolated = roots.iter().any(|r| r.jacobian_rank < 4);
    let validated = roots.iter().any(|r| r.validated);
    Ok(FourReport {
        roots,
        starts: opts.starts,
        converged,
        scale,
        non_isolated,
        validated,
    })
}
