//! Seeded ground truth for tests and synthetic datasets, plus a reference
//! least-squares reconstruction that does not use the parametrization.
//!
//! Every generator takes a 64-bit seed; equal seeds give bit-identical output.

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, SVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lorentz::{is_lorentz_with, mueller_from_k, nm_from_k, ComplexParameter, MuellerMatrix, RealParameter};
use crate::solver4::{project_raw, ExpansionCoeffs, LiftedUnknowns};
use crate::stokes::{require_basis, MeasurementPair, PairGeometry, StokesVector};

/// Default largest rapidity of sampled devices.
pub const CHI_MAX: f64 = 2.0;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; the first uniform is kept away from zero
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation, as the quaternion `(n0, n)`.
pub fn random_rotation_rng<R: Rng>(rng: &mut R) -> (f64, Vector3<f64>) {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| gaussian(rng));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return (q[0] / norm, Vector3::new(q[1], q[2], q[3]) / norm);
        }
    }
}

/// Random device with rapidity at most `chi_max`.
///
/// The rotation part `n` comes from a uniform quaternion, the boost part `m`
/// from a ball of radius `sinh(chi_max / 2)`. The unit condition then fixes
/// `k0 = +-sqrt(1 + k.k)`, with the sign of the quaternion's scalar part.
/// Draws whose `m0^2 + m^2` exceeds `sinh^2(chi_max / 2)` are redrawn.
pub fn random_lorentz_rng<R: Rng>(rng: &mut R, chi_max: f64) -> (ComplexParameter, MuellerMatrix) {
    let bound = (0.5 * chi_max).sinh();
    loop {
        let (q0, n) = random_rotation_rng(rng);
        let m = if bound > 0.0 {
            random_unit_vector(rng) * bound * rng.random::<f64>()
        } else {
            Vector3::zeros()
        };
        let kv = [0, 1, 2].map(|j| Complex64::new(m[j], -n[j]));
        let kk: Complex64 = kv.iter().map(|z| z * z).sum();
        let mut k0 = (Complex64::new(1.0, 0.0) + kk).sqrt();
        if q0 < 0.0 {
            k0 = -k0;
        }
        if k0.im * k0.im + m.norm_squared() > bound * bound * (1.0 + 1e-12) {
            continue;
        }
        let k = ComplexParameter::new_unchecked([k0, kv[0], kv[1], kv[2]]);
        if let Ok(l) = mueller_from_k(&k) {
            return (k, l);
        }
    }
}

pub fn random_lorentz(seed: u64) -> (ComplexParameter, MuellerMatrix) {
    random_lorentz_with(seed, CHI_MAX)
}

pub fn random_lorentz_with(seed: u64, chi_max: f64) -> (ComplexParameter, MuellerMatrix) {
    random_lorentz_rng(&mut rng_for(seed, 0), chi_max)
}

/// Partly polarized Stokes vector with `S0` in `[0.5, 2]` and degree of
/// polarization in `[0.1, 0.95]`.
pub fn random_stokes<R: Rng>(rng: &mut R) -> StokesVector {
    let s0 = rng.random_range(0.5..2.0);
    let p = rng.random_range(0.1..0.95);
    StokesVector::new_unchecked(s0, random_unit_vector(rng) * (p * s0))
}

/// Fully polarized Stokes vector with `S0` in `[0.5, 2]`.
pub fn random_polarized_stokes<R: Rng>(rng: &mut R) -> StokesVector {
    let s0 = rng.random_range(0.5..2.0);
    StokesVector::new_unchecked(s0, random_unit_vector(rng) * s0)
}

/// `(S, L S)` without validation.
pub fn pair_through(l: &MuellerMatrix, s: &StokesVector) -> MeasurementPair {
    MeasurementPair::new_unchecked(*s, l.apply(s))
}

/// A device together with pairs it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub k: ComplexParameter,
    pub mueller: MuellerMatrix,
    pub pairs: Vec<MeasurementPair>,
}

/// Device from [`random_lorentz`] applied to `count` random partly polarized inputs.
pub fn generic_instance(seed: u64, count: usize, chi_max: f64) -> Instance {
    let mut rng = rng_for(seed, 0);
    let (k, mueller) = random_lorentz_rng(&mut rng, chi_max);
    let pairs = (0..count)
        .map(|_| pair_through(&mueller, &random_stokes(&mut rng)))
        .collect();
    Instance { k, mueller, pairs }
}

/// Random rotation and two pairs whose inputs make the same angle with its
/// axis, so that both directions obey `N.N'` equal.
pub fn rotation_instance(seed: u64) -> Instance {
    let mut rng = rng_for(seed, 0);
    let axis = random_unit_vector(&mut rng);
    let theta = rng.random_range(0.2..(std::f64::consts::TAU - 0.2));
    let (s, c) = (0.5 * theta).sin_cos();
    let k = crate::lorentz::k_from_nm(&RealParameter::rotation(c, axis * s)).expect("unit quaternion");
    let mueller = mueller_from_k(&k).expect("rotation");
    let n1 = loop {
        let v = random_unit_vector(&mut rng);
        if v.cross(&axis).norm() > 0.2 {
            break v;
        }
    };
    let phi = rng.random_range(0.3..(std::f64::consts::TAU - 0.3));
    let n2 = rotate_about(&n1, &axis, phi);
    let pairs = [n1, n2]
        .iter()
        .map(|n| {
            let s0 = rng.random_range(0.5..2.0);
            let p = rng.random_range(0.2..1.0);
            pair_through(&mueller, &StokesVector::new_unchecked(s0, n * (p * s0)))
        })
        .collect();
    Instance { k, mueller, pairs }
}

/// Rodrigues rotation of `v` about the unit `axis` by `angle`.
pub fn rotate_about(v: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c)
}

/// Expansion scalars by least squares on the eight linear relations between
/// `(x, y, z, w)` and `(n0, n, m0, m)`; independent of the closed-form
/// projections.
pub fn expansion_by_least_squares(g: &PairGeometry, r: &RealParameter) -> ExpansionCoeffs {
    let mut m = SMatrix::<f64, 8, 4>::zeros();
    let mut rhs = SVector::<f64, 8>::zeros();
    // n0 = A x - avec^2 y
    m[(0, 0)] = g.a;
    m[(0, 1)] = -g.a2;
    rhs[0] = r.n0;
    // m0 = -B z + bvec^2 w
    m[(1, 2)] = -g.b;
    m[(1, 3)] = g.b2;
    rhs[1] = r.m0;
    for j in 0..3 {
        // n = z avec - w A bvec + y cross
        m[(2 + j, 1)] = g.cross[j];
        m[(2 + j, 2)] = g.avec[j];
        m[(2 + j, 3)] = -g.a * g.bvec[j];
        rhs[2 + j] = r.n[j];
        // m = x bvec - y B avec + w cross
        m[(5 + j, 0)] = g.bvec[j];
        m[(5 + j, 1)] = -g.b * g.avec[j];
        m[(5 + j, 3)] = g.cross[j];
        rhs[5 + j] = r.m[j];
    }
    let svd = m.svd(true, true);
    let sol = svd.solve(&rhs, 1e-14 * svd.singular_values.max()).expect("thin SVD");
    ExpansionCoeffs::new(sol[0], sol[1], sol[2], sol[3])
}

/// Settings for [`consistent_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistentOptions {
    pub count: usize,
    /// Keep only physical Stokes vectors (`S0 >= |S|`, `S0 > 0`).
    pub physical: bool,
    pub chi_max: f64,
    /// Newton starts per candidate device.
    pub starts: usize,
    /// Candidate devices tried before giving up.
    pub devices: usize,
}

impl Default for ConsistentOptions {
    fn default() -> Self {
        Self {
            count: 6,
            physical: true,
            chi_max: 1.0,
            starts: 400,
            devices: 200,
        }
    }
}

/// Pairs from one device whose lifted unknowns all coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentInstance {
    pub instance: Instance,
    /// Expansion of the device in the first pair's basis.
    pub expansion: ExpansionCoeffs,
    /// Index of the device draw that succeeded.
    pub device: usize,
}

fn lifted_of(l: &MuellerMatrix, r: &RealParameter, s: &[f64; 4]) -> Option<[f64; 6]> {
    let input = StokesVector::new_unchecked(s[0], Vector3::new(s[1], s[2], s[3]));
    let g = PairGeometry::new(&pair_through(l, &input));
    if g.is_collinear() {
        return None;
    }
    let u = LiftedUnknowns::from_expansion(&project_raw(&g, r)).u;
    u.iter().all(|v| v.is_finite()).then_some(u)
}

const TARGET: [usize; 4] = [0, 1, 3, 4];

/// Newton iteration on the input Stokes vector so that its pair reproduces
/// the lifted entries `(x^2, xy, z^2, zw)` of `target`.
fn newton_to_target(l: &MuellerMatrix, r: &RealParameter, target: &[f64; 6], start: [f64; 4]) -> Option<[f64; 4]> {
    let scale = target.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let f = |s: &[f64; 4]| -> Option<SVector<f64, 4>> {
        let u = lifted_of(l, r, s)?;
        Some(SVector::<f64, 4>::from_fn(|i, _| {
            (u[TARGET[i]] - target[TARGET[i]]) / scale
        }))
    };
    let mut s = start;
    let mut fs = f(&s)?;
    for _ in 0..80 {
        if fs.amax() <= 1e-14 {
            return Some(s);
        }
        let h = 1e-7 * (1.0 + s.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut j = Matrix4::zeros();
        for c in 0..4 {
            let (mut sp, mut sm) = (s, s);
            sp[c] += h;
            sm[c] -= h;
            let col = (f(&sp)? - f(&sm)?) / (2.0 * h);
            j.set_column(c, &col);
        }
        let step = j.lu().solve(&(-fs))?;
        let mut t = 1.0;
        let norm0 = fs.norm();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: [f64; 4] = std::array::from_fn(|i| s[i] + t * step[i]);
            if let Some(ft) = f(&trial) {
                if ft.norm() < norm0 {
                    s = trial;
                    fs = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return (fs.amax() <= 1e-12).then_some(s);
        }
    }
    (fs.amax() <= 1e-12).then_some(s)
}

fn is_physical(s: &[f64; 4]) -> bool {
    s[0] > 0.0 && s[0] * s[0] - (s[1] * s[1] + s[2] * s[2] + s[3] * s[3]) >= 0.0
}

/// Searches for `opts.count` pairs from one device whose per-pair expansions
/// share the same lifted unknowns, so the lifted system is consistent.
///
/// For each device draw, a random first input fixes the target; further inputs
/// come from Newton iterations on `(S0, S)` matching four of the lifted entries
/// (which admits each block up to sign) and are kept when all six entries agree.
/// Returns `None` when no device yields enough inputs.
pub fn consistent_instance(seed: u64, opts: &ConsistentOptions) -> Option<ConsistentInstance> {
    for device in 0..opts.devices {
        let mut rng = rng_for(seed, device as u64);
        let (k, l) = random_lorentz_rng(&mut rng, opts.chi_max);
        let r = nm_from_k(&k);
        let first = random_stokes(&mut rng);
        let first_pair = pair_through(&l, &first);
        let g0 = PairGeometry::new(&first_pair);
        if require_basis(&g0).is_err() {
            continue;
        }
        let e0 = project_raw(&g0, &r);
        let target = LiftedUnknowns::from_expansion(&e0).u;
        let tscale = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut inputs: Vec<[f64; 4]> = vec![first.to_array()];
        for _ in 0..opts.starts {
            let s = random_stokes(&mut rng);
            let stretch = rng.random_range(0.2..3.0);
            let start = s.to_array().map(|v| v * stretch);
            let Some(sol) = newton_to_target(&l, &r, &target, start) else {
                continue;
            };
            if opts.physical && !is_physical(&sol) {
                continue;
            }
            let Some(u) = lifted_of(&l, &r, &sol) else {
                continue;
            };
            let mismatch = u.iter().zip(&target).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if mismatch > 1e-10 * tscale {
                continue;
            }
            let size = sol.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(1e-3..=1e3).contains(&size) {
                continue;
            }
            let input = StokesVector::new_unchecked(sol[0], Vector3::new(sol[1], sol[2], sol[3]));
            if require_basis(&PairGeometry::new(&pair_through(&l, &input))).is_err() {
                continue;
            }
            let distinct = inputs.iter().all(|o| {
                let d = o.iter().zip(&sol).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                d > 1e-6 * (1.0 + size)
            });
            if distinct {
                inputs.push(sol);
                if inputs.len() == opts.count {
                    let pairs = inputs
                        .iter()
                        .map(|s| pair_through(&l, &StokesVector::new_unchecked(s[0], Vector3::new(s[1], s[2], s[3]))))
                        .collect();
                    return Some(ConsistentInstance {
                        instance: Instance { k, mueller: l, pairs },
                        expansion: e0,
                        device,
                    });
                }
            }
        }
    }
    None
}

/// Least-squares fit of all sixteen matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectFit {
    pub mueller: Vec<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `|M^T G M - G|_inf`
    pub metric_residual: f64,
    /// `|L S_i - S_i'|_inf` over all pairs.
    pub fit_residual: f64,
}

impl DirectFit {
    pub fn mueller_matrix(&self) -> MuellerMatrix {
        crate::json::matrix_from_json(&self.mueller).expect("16 entries")
    }
}

/// Stacks `L S_i = S_i'` for all pairs (four rows each) and solves for the 16
/// entries of `L` by SVD.
pub fn direct_linear_solve(pairs: &[MeasurementPair]) -> Result<DirectFit> {
    if pairs.len() < 4 {
        return Err(Error::PairCount {
            expected: "at least 4",
            found: pairs.len(),
        });
    }
    let rows = 4 * pairs.len();
    let mut a = DMatrix::<f64>::zeros(rows, 16);
    let mut b = DVector::<f64>::zeros(rows);
    for (p, pair) in pairs.iter().enumerate() {
        let s = pair.input.to_array();
        let t = pair.output.to_array();
        for i in 0..4 {
            for j in 0..4 {
                a[(4 * p + i, 4 * i + j)] = s[j];
            }
            b[4 * p + i] = t[i];
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax;
    let rank = svd.rank(eps);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    if rank < 16 {
        return Err(Error::RankDeficient { rank, needed: 16 });
    }
    let x = svd.solve(&b, eps).map_err(|e| Error::SingularSystem(e.to_string()))?;
    let fit_residual = (&a * &x - &b).amax();
    let l = MuellerMatrix(Matrix4::from_fn(|i, j| x[4 * i + j]));
    Ok(DirectFit {
        mueller: l.to_row_major().to_vec(),
        rank,
        singular_values,
        metric_residual: is_lorentz_with(&l, f64::INFINITY).metric_residual,
        fit_residual,
    })
}
