//! Reconstruction from six measurements through the lifted linear system.
//!
//! Treating `(x^2, xy, y^2, z^2, zw, w^2)` as six independent unknowns turns
//! the six quadratic constraints into a 6x6 linear system. The square roots
//! that recover `(x, y, z, w)` leave signs open; every assignment is tried
//! against every pair basis and scored by the transitivity residuals.

use nalgebra::{Matrix6, Vector6};
use serde::Serialize;

use super::{candidate_mueller, geometries, k_from_expansion_raw, residuals_on, ExpansionCoeffs, QuadCoeffs};
use crate::error::{Error, Result};
use crate::json::KJson;
use crate::lorentz::{ComplexParameter, MuellerMatrix};
use crate::stokes::MeasurementPair;
use crate::tol::{COND_MAX, TOL_L};

/// The lifted unknowns `(x^2, xy, y^2, z^2, zw, w^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftedUnknowns {
    pub u: [f64; 6],
}

impl LiftedUnknowns {
    pub fn from_expansion(e: &ExpansionCoeffs) -> Self {
        let ExpansionCoeffs { x, y, z, w } = *e;
        Self {
            u: [x * x, x * y, y * y, z * z, z * w, w * w],
        }
    }

    /// Relative residuals `|u1^2 - u0 u2|` and `|u4^2 - u3 u5|`, each divided by
    /// the squared largest entry of its block.
    pub fn rank1_residuals(&self) -> (f64, f64) {
        let block = |a: f64, b: f64, c: f64| {
            let scale = a.abs().max(b.abs()).max(c.abs()).powi(2).max(f64::MIN_POSITIVE);
            (b * b - a * c).abs() / scale
        };
        let u = &self.u;
        (block(u[0], u[1], u[2]), block(u[3], u[4], u[5]))
    }

    pub fn check_rank1(&self, tol: f64) -> Result<()> {
        let (xy, zw) = self.rank1_residuals();
        if !(xy <= tol && zw <= tol) {
            return Err(Error::Rank1Violation { xy, zw });
        }
        Ok(())
    }

    /// Every sign assignment worth testing, with `x >= 0` fixing the global sign.
    ///
    /// `y` comes from `xy / x`, or from `+-sqrt(y^2)` when `x` is negligible;
    /// the `sqrt` values are always added as edge cases. The `(z, w)` block is
    /// enumerated the same way with both overall signs, since its sign relative
    /// to the `(x, y)` block changes the matrix.
    pub fn sign_candidates(&self) -> Vec<ExpansionCoeffs> {
        let u = &self.u;
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let thr = 1e-8 * norm.sqrt();
        let root = |v: f64| v.max(0.0).sqrt();

        let x = root(u[0]);
        let y_abs = root(u[2]);
        let mut xy = vec![(x, y_abs), (x, -y_abs)];
        if x > thr {
            xy.insert(0, (x, u[1] / x));
        }

        let z = root(u[3]);
        let w_abs = root(u[5]);
        let mut zw = Vec::new();
        if z > thr {
            zw.push((z, u[4] / z));
            zw.push((-z, -u[4] / z));
        }
        for sz in [1.0, -1.0] {
            for sw in [1.0, -1.0] {
                zw.push((sz * z, sw * w_abs));
            }
        }

        let mut out: Vec<ExpansionCoeffs> = Vec::new();
        for &(x, y) in &xy {
            for &(z, w) in &zw {
                let e = ExpansionCoeffs { x, y, z, w };
                if !out.iter().any(|o| o.max_abs_diff(&e) <= 1e-14 * (1.0 + e.max_abs())) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Rank-one check followed by [`LiftedUnknowns::sign_candidates`].
    pub fn candidates(&self, tol: f64) -> Result<Vec<ExpansionCoeffs>> {
        self.check_rank1(tol)?;
        Ok(self.sign_candidates())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SixOptions {
    pub cond_max: f64,
    /// Worst transitivity residual a candidate may have to count as valid.
    pub tol_valid: f64,
    /// Candidates kept in the report.
    pub keep: usize,
}

impl Default for SixOptions {
    fn default() -> Self {
        Self {
            cond_max: COND_MAX,
            tol_valid: TOL_L,
            keep: 16,
        }
    }
}

/// A sign assignment evaluated in the basis of one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SixCandidate {
    pub expansion: ExpansionCoeffs,
    /// Index of the pair whose basis turned the expansion into `k`.
    pub basis: usize,
    pub k: KJson,
    pub mueller: Vec<f64>,
    /// Transitivity residual on each pair.
    pub residuals: Vec<f64>,
    pub worst: f64,
    /// `|k0^2 - k.k - 1|`
    pub unit_residual: f64,
    pub validated: bool,
}

impl SixCandidate {
    pub fn mueller_matrix(&self) -> MuellerMatrix {
        crate::json::matrix_from_json(&self.mueller).expect("16 entries")
    }

    pub fn parameter(&self) -> ComplexParameter {
        self.k.into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerReport {
    pub det: f64,
    /// Determinants with column `i` replaced by the right-hand side.
    pub numerators: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SixDiagnostics {
    pub condition_number: f64,
    /// `|M u - 1|_inf`
    pub lifted_residual: f64,
    pub cramer: CramerReport,
    /// Relative rank-one residuals of the `(x, y)` and `(z, w)` blocks.
    pub rank1_xy: f64,
    pub rank1_zw: f64,
    /// For the best candidate's expansion, the distance (up to sign) between
    /// the parameter built in each pair's basis and the candidate's own.
    pub k_distances: Vec<f64>,
    pub k_spread: f64,
    pub candidates_tested: usize,
    pub tolerance: f64,
    pub validated: bool,
}

/// Outcome of [`solve_six`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SixReport {
    pub u: [f64; 6],
    pub candidates: Vec<SixCandidate>,
    pub diagnostics: SixDiagnostics,
}

impl SixReport {
    /// Worst-pair residual of the best candidate (infinite when none exist).
    pub fn best_residual(&self) -> f64 {
        self.candidates.first().map_or(f64::INFINITY, |c| c.worst)
    }

    pub fn best(&self) -> Option<&SixCandidate> {
        self.candidates.first()
    }
}

pub fn solve_six(pairs: &[MeasurementPair]) -> Result<SixReport> {
    solve_six_with(pairs, &SixOptions::default())
}

pub fn solve_six_with(pairs: &[MeasurementPair], opts: &SixOptions) -> Result<SixReport> {
    if pairs.len() != 6 {
        return Err(Error::PairCount {
            expected: "6",
            found: pairs.len(),
        });
    }
    let geo = geometries(pairs)?;
    let rows: Vec<[f64; 6]> = geo.iter().map(|g| QuadCoeffs::from_geometry(g).lifted_row()).collect();
    let m = Matrix6::from_fn(|i, j| rows[i][j]);
    let rhs = Vector6::repeat(1.0);

    let sv = m.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition_number <= opts.cond_max) {
        return Err(Error::SingularSystem(format!(
            "lifted system condition number {condition_number:e} exceeds {:e}",
            opts.cond_max
        )));
    }
    let u = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("LU factorization failed".into()))?;
    let lifted_residual = (m * u - rhs).amax();
    let cramer = cramer_report(&m, &rhs);
    let lifted = LiftedUnknowns {
        u: [u[0], u[1], u[2], u[3], u[4], u[5]],
    };
    let (rank1_xy, rank1_zw) = lifted.rank1_residuals();

    let signs = lifted.sign_candidates();
    let mut all = Vec::with_capacity(signs.len() * geo.len());
    for e in &signs {
        for (basis, g) in geo.iter().enumerate() {
            let k = k_from_expansion_raw(g, e);
            let l = candidate_mueller(&k);
            let residuals = residuals_on(&l, pairs);
            let worst = residuals.iter().fold(0.0f64, |m, r| m.max(*r));
            all.push(SixCandidate {
                expansion: *e,
                basis,
                k: k.into(),
                mueller: l.to_row_major().to_vec(),
                residuals,
                worst: if worst.is_nan() { f64::INFINITY } else { worst },
                unit_residual: k.unit_residual().norm(),
                validated: worst <= opts.tol_valid,
            });
        }
    }
    let candidates_tested = all.len();
    all.sort_by(|a, b| {
        a.worst
            .total_cmp(&b.worst)
            .then_with(|| a.basis.cmp(&b.basis))
            .then_with(|| cmp_arrays(&a.expansion.to_array(), &b.expansion.to_array()))
    });
    let mut candidates: Vec<SixCandidate> = Vec::new();
    for c in all {
        let dup = candidates.iter().any(|o| {
            o.mueller
                .iter()
                .zip(&c.mueller)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs()))
        });
        if !dup {
            candidates.push(c);
        }
        if candidates.len() >= opts.keep.max(1) {
            break;
        }
    }

    let (k_distances, k_spread) = match candidates.first() {
        Some(best) => {
            let kb = best.parameter();
            let d: Vec<f64> = geo
                .iter()
                .map(|g| k_from_expansion_raw(g, &best.expansion).distance_up_to_sign(&kb))
                .collect();
            let spread = d.iter().fold(0.0f64, |m, v| m.max(*v));
            (d, spread)
        }
        None => (Vec::new(), f64::NAN),
    };
    let validated = candidates.first().is_some_and(|c| c.validated);
    let report = SixReport {
        u: lifted.u,
        candidates,
        diagnostics: SixDiagnostics {
            condition_number,
            lifted_residual,
            cramer,
            rank1_xy,
            rank1_zw,
            k_distances,
            k_spread,
            candidates_tested,
            tolerance: opts.tol_valid,
            validated,
        },
    };
    if !validated {
        return Err(Error::NoValidCandidate(Box::new(report)));
    }
    Ok(report)
}

fn cmp_arrays(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn cramer_report(m: &Matrix6<f64>, rhs: &Vector6<f64>) -> CramerReport {
    let det = m.determinant();
    let mut numerators = [0.0; 6];
    for (i, slot) in numerators.iter_mut().enumerate() {
        let mut mi = *m;
        mi.set_column(i, rhs);
        *slot = mi.determinant();
    }
    CramerReport { det, numerators }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::TOL_R1;

    #[test]
    fn lifted_round_trip_and_candidates() {
        let e = ExpansionCoeffs::new(0.3, -0.7, 1.1, 0.4);
        let u = e.lifted();
        let (a, b) = u.rank1_residuals();
        assert!(a < 1e-15 && b < 1e-15);
        let c = u.candidates(TOL_R1).unwrap();
        assert!(c.iter().any(|x| x.max_abs_diff(&e) < 1e-14));
        let flipped = ExpansionCoeffs::new(0.3, -0.7, -1.1, -0.4);
        assert!(c.iter().any(|x| x.max_abs_diff(&flipped) < 1e-14));
        assert!(c.iter().all(|x| x.x >= 0.0));
    }

    #[test]
    fn zero_x_uses_square_root() {
        let e = ExpansionCoeffs::new(0.0, 0.5, 0.0, -0.25);
        let c = e.lifted().sign_candidates();
        assert!(c.iter().any(|x| x.max_abs_diff(&e) < 1e-15));
        assert!(c.iter().any(|x| x.max_abs_diff(&e.neg()) < 1e-15));
    }

    #[test]
    fn injected_rank_violation() {
        let u = LiftedUnknowns {
            u: [1.0, 3.0, 1.0, 1.0, 0.5, 0.25],
        };
        assert!(matches!(u.candidates(TOL_R1), Err(Error::Rank1Violation { .. })));
    }

    #[test]
    fn wrong_count() {
        assert!(matches!(solve_six(&[]), Err(Error::PairCount { .. })));
    }
}
