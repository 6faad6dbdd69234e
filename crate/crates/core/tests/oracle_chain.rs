use mueller_core::oracle::{
    expansion_by_least_squares, pair_through, random_lorentz_rng, random_rotation_rng, random_stokes,
    random_unit_vector, rng_for, CHI_MAX,
};
use mueller_core::solver3::family_3d;
use mueller_core::solver4::{
    constraint_residual, expansion_to_params, expansion_to_params_raw, family_4d, k_from_expansion,
    params_to_expansion, params_to_expansion_detailed, quad_coeffs, quad_coeffs_invariant_form, ExpansionCoeffs,
    QuadCoeffs,
};
use mueller_core::tol::TOL_CONS;
use mueller_core::{
    k_from_nm, mueller_from_k, nm_from_k, pair_geometry, ComplexParameter, Error, MeasurementPair, MuellerMatrix,
    PairGeometry, RealParameter, StokesVector,
};
use nalgebra::Vector3;
use proptest::prelude::*;

struct Chain {
    k: ComplexParameter,
    l: MuellerMatrix,
    pair: MeasurementPair,
    g: PairGeometry,
}

/// Device and generic pair for `seed`, or `None` when the pair basis is collinear.
fn chain(seed: u64) -> Option<Chain> {
    let mut rng = rng_for(seed, 7);
    let (k, l) = random_lorentz_rng(&mut rng, CHI_MAX);
    let pair = pair_through(&l, &random_stokes(&mut rng));
    let g = pair_geometry(&pair).unwrap();
    (!g.is_collinear()).then_some(Chain { k, l, pair, g })
}

/// Constraint coefficients recomputed from the raw Stokes components.
fn coefficients_from_components(p: &MeasurementPair) -> [f64; 6] {
    let s = p.input.to_array();
    let t = p.output.to_array();
    let a = s[0] + t[0];
    let b = s[0] - t[0];
    let mut a2 = 0.0;
    let mut b2 = 0.0;
    for j in 1..4 {
        a2 += (s[j] + t[j]) * (s[j] + t[j]);
        b2 += (s[j] - t[j]) * (s[j] - t[j]);
    }
    [
        a * a - b2,
        a * (b * b - a2),
        (a2 + b2 - b * b) * a2 - a * a * b * b,
        b * b - a2,
        b * (a * a - b2),
        (a2 + b2 - a * a) * b2 - a * a * b * b,
    ]
}

#[test]
fn oracle_chain_over_200_devices() {
    let mut used = 0;
    for seed in 0..400u64 {
        if used == 200 {
            break;
        }
        let Some(Chain { k, l, pair, g }) = chain(seed) else {
            continue;
        };
        used += 1;
        let r = nm_from_k(&k);
        let scale = g.a.abs().max(1.0) * g.a2.sqrt().max(1.0);
        assert!(g.identity_residual().abs() <= 1e-11 * scale, "seed {seed}");

        let e = params_to_expansion(&g, &r).unwrap();
        let lsq = expansion_by_least_squares(&g, &r);
        assert!(
            e.max_abs_diff(&lsq) <= 1e-9 * (1.0 + e.max_abs()),
            "seed {seed}: {e:?} vs {lsq:?}"
        );

        let back = expansion_to_params(&g, &e).unwrap();
        assert!(back.max_abs_diff(&r) <= 1e-9, "seed {seed}");
        assert!(back.orthogonality_residual().abs() <= 1e-11 * back.magnitude().max(1.0));

        let q = quad_coeffs(&pair).unwrap();
        assert!(constraint_residual(&q, &e).abs() <= 1e-9, "seed {seed}");

        let ke = k_from_expansion(&g, &e).unwrap();
        assert!(ke.distance_up_to_sign(&k) <= 1e-9, "seed {seed}");
        assert!(mueller_from_k(&ke).unwrap().max_abs_diff(&l) <= 1e-8, "seed {seed}");

        let kn = k_from_expansion(&g, &e.neg()).unwrap();
        assert!(kn.distance_up_to_sign(&ke.neg()) <= 1e-12 && (kn.k0() + ke.k0()).norm() <= 1e-12);
        assert!(mueller_from_k(&kn).unwrap().max_abs_diff(&l) <= 1e-8);

        let (_, diag) = params_to_expansion_detailed(&g, &r, TOL_CONS).unwrap();
        if let Some(ym) = diag.y_from_m {
            assert!(
                (ym - e.y).abs() <= 1e-10 * (1.0 + e.y.abs()) / g.b.abs().min(1.0),
                "seed {seed}"
            );
        }
    }
    assert_eq!(used, 200);
}

#[test]
fn coefficients_match_component_recomputation() {
    for seed in 0..200 {
        let Some(c) = chain(seed) else { continue };
        let q = quad_coeffs(&c.pair).unwrap();
        let raw = coefficients_from_components(&c.pair);
        let scale = q.max_abs().max(1.0);
        for (x, y) in q.to_array().iter().zip(raw) {
            assert!((x - y).abs() <= 1e-12 * scale, "seed {seed}");
        }
        let inv = quad_coeffs_invariant_form(&c.pair);
        assert!(q.max_abs_diff(&inv) <= 1e-10 * scale, "seed {seed}");
    }
}

#[test]
fn family_recovers_ground_truth_x() {
    for seed in 0..100 {
        let Some(c) = chain(seed) else { continue };
        let e = params_to_expansion(&c.g, &nm_from_k(&c.k)).unwrap();
        let roots = family_4d(&c.pair, e.y, e.z, e.w).unwrap();
        let hit = roots
            .iter()
            .find(|root| (root.expansion.x - e.x).abs() <= 1e-8 * (1.0 + e.x.abs()))
            .unwrap_or_else(|| panic!("seed {seed}: {roots:?} missing x = {}", e.x));
        assert!(hit.residual <= 1e-8, "seed {seed}: {}", hit.residual);
        for root in &roots {
            let q = quad_coeffs(&c.pair).unwrap();
            assert!(constraint_residual(&q, &root.expansion).abs() <= 1e-8 * q.max_abs().max(1.0));
        }
    }
}

#[test]
fn family_off_surface_has_no_root() {
    let c = (0..).find_map(chain).unwrap();
    let q = quad_coeffs(&c.pair).unwrap();
    // with y = 0 the discriminant is -a (-alpha z^2 - 1), negative for large z
    assert!(q.a > 0.0 && q.alpha < 0.0, "{q:?}");
    assert!(matches!(family_4d(&c.pair, 0.0, 1e3, 0.0), Err(Error::NoRealRoot(_))));
}

#[test]
fn identity_device_on_null_pair() {
    let s = StokesVector::new(1.0, Vector3::new(0.6, 0.0, 0.0)).unwrap();
    let g = pair_geometry(&MeasurementPair::new(s, s).unwrap()).unwrap();
    let r = expansion_to_params_raw(&g, &ExpansionCoeffs::new(1.0 / g.a, 0.0, 0.0, 0.0));
    assert_eq!(r, RealParameter::new(1.0, Vector3::zeros(), 0.0, Vector3::zeros()));
    assert!(matches!(params_to_expansion(&g, &r), Err(Error::DegenerateGeometry(_))));
}

#[test]
fn parameter_of_another_device_is_inconsistent() {
    let c = (0..).find_map(chain).unwrap();
    let (other, _) = random_lorentz_rng(&mut rng_for(99, 99), CHI_MAX);
    assert!(matches!(
        params_to_expansion(&c.g, &nm_from_k(&other)),
        Err(Error::InconsistentParameter(_))
    ));
}

/// Pure rotation and an input tilted by `eps` off its axis, so `bvec = O(eps)`.
fn near_axis_pair(seed: u64, eps: f64) -> (RealParameter, MeasurementPair) {
    let mut rng = rng_for(seed, 11);
    let (n0, n) = random_rotation_rng(&mut rng);
    let axis = n.normalize();
    let perp = random_unit_vector(&mut rng).cross(&axis).normalize();
    let s = StokesVector::new_unchecked(1.0, (axis + perp * eps).normalize() * 0.8);
    let r = RealParameter::rotation(n0, n);
    let l = mueller_from_k(&k_from_nm(&r).unwrap()).unwrap();
    (r, pair_through(&l, &s))
}

#[test]
fn rotation_limit_matches_three_dimensional_family() {
    let mut tested = 0;
    for seed in 0..20 {
        for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
            let (r, pair) = near_axis_pair(seed, eps);
            let g = pair_geometry(&pair).unwrap();
            if g.is_collinear() {
                continue;
            }
            let e = params_to_expansion(&g, &r).unwrap();
            // no boost part: the m-side coefficients vanish
            assert!(
                e.x.abs() <= 1e-8 && e.w.abs() <= 1e-8 * (1.0 + e.y.abs()),
                "seed {seed} eps {eps}: {e:?}"
            );
            assert!((r.n0 + e.y * g.a2).abs() <= 1e-8);
            // the same rotation as a member of the rotation-only family
            let s = pair.input.s().norm();
            let dot = s * s + pair.input.s().dot(pair.output.s());
            let root = (2.0 * dot).sqrt();
            let (alpha, beta) = (r.n.dot(&g.avec) / g.a2, r.n0 / dot);
            let gamma = (alpha * root).atan2(beta * s * root);
            let fam = family_3d(&pair, gamma).unwrap();
            assert!(
                (fam.alpha - e.z).abs() <= 1e-8 * (1.0 + e.z.abs()),
                "seed {seed} eps {eps}"
            );
            assert!(
                (fam.beta + 2.0 * e.y).abs() <= 1e-8 * (1.0 + e.y.abs()),
                "seed {seed} eps {eps}"
            );
            assert!((fam.n0 - r.n0).abs() <= 1e-8 && (fam.n - r.n).amax() <= 1e-8);
            tested += 1;
        }
    }
    assert_eq!(tested, 80);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn orthogonality_holds_for_any_expansion(
        seed in 0u64..10_000,
        e in prop::array::uniform4(-3.0f64..3.0),
    ) {
        let Some(c) = chain(seed) else { return Ok(()) };
        let r = expansion_to_params_raw(&c.g, &ExpansionCoeffs::from_array(e));
        let scale = r.magnitude().max(1.0);
        prop_assert!(r.orthogonality_residual().abs() <= 1e-11 * scale);
    }

    #[test]
    fn normalization_tracks_constraint(
        seed in 0u64..10_000,
        e in prop::array::uniform4(-3.0f64..3.0),
    ) {
        let Some(c) = chain(seed) else { return Ok(()) };
        let e = ExpansionCoeffs::from_array(e);
        let r = expansion_to_params_raw(&c.g, &e);
        let q = QuadCoeffs::from_geometry(&c.g);
        let scale = r.magnitude().max(1.0);
        prop_assert!((r.normalization_residual() - constraint_residual(&q, &e)).abs() <= 1e-10 * scale);
    }

    #[test]
    fn zero_expansion_gives_minus_one(seed in 0u64..10_000) {
        let Some(c) = chain(seed) else { return Ok(()) };
        let q = quad_coeffs(&c.pair).unwrap();
        prop_assert_eq!(constraint_residual(&q, &ExpansionCoeffs::new(0.0, 0.0, 0.0, 0.0)), -1.0);
        let e = params_to_expansion(&c.g, &nm_from_k(&c.k)).unwrap();
        let doubled = ExpansionCoeffs::from_array(e.to_array().map(|v| 2.0 * v));
        prop_assert!((constraint_residual(&q, &doubled) - 3.0).abs() <= 1e-8 * q.max_abs().max(1.0));
    }
}
