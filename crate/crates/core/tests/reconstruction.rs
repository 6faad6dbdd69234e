use mueller_core::oracle::{consistent_instance, generic_instance, ConsistentInstance, ConsistentOptions};
use mueller_core::solver4::{
    quad_coeffs, solve_four, solve_four_with, solve_six, FourOptions, LiftedUnknowns, QuadCoeffs,
};
use mueller_core::tol::TOL_R1;
use mueller_core::{Error, MeasurementPair, StokesVector};
use nalgebra::Vector3;

fn six_set(seed: u64) -> ConsistentInstance {
    consistent_instance(seed, &ConsistentOptions::default()).expect("consistent six-pair set")
}

fn four_set(seed: u64) -> ConsistentInstance {
    let opts = ConsistentOptions {
        count: 4,
        ..ConsistentOptions::default()
    };
    consistent_instance(seed, &opts).expect("consistent four-pair set")
}

#[test]
fn consistent_sets_share_the_expansion() {
    for seed in 0..4 {
        let set = six_set(seed);
        for p in &set.instance.pairs {
            let q = quad_coeffs(p).unwrap();
            let res = q.evaluate(&set.expansion) - 1.0;
            assert!(res.abs() <= 1e-9 * q.max_abs().max(1.0), "seed {seed}: {res:e}");
        }
    }
}

#[test]
fn six_pairs_recover_the_device() {
    for seed in 0..6 {
        let set = six_set(seed);
        let report = solve_six(&set.instance.pairs).unwrap();
        let d = &report.diagnostics;
        assert!(d.lifted_residual <= 1e-8, "seed {seed}: {d:?}");
        assert!(d.rank1_xy <= TOL_R1 && d.rank1_zw <= TOL_R1, "seed {seed}: {d:?}");
        let best = report.best().unwrap();
        assert!(best.validated);
        assert!(
            best.mueller_matrix().max_abs_diff(&set.instance.mueller) <= 1e-6,
            "seed {seed}"
        );
        assert!(
            best.parameter().distance_up_to_sign(&set.instance.k) <= 1e-6,
            "seed {seed}"
        );
        let lifted = LiftedUnknowns::from_expansion(&set.expansion).u;
        let scale = lifted.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in report.u.iter().zip(lifted) {
            assert!((a - b).abs() <= 1e-6 * scale, "seed {seed}");
        }
        assert_eq!(d.k_distances.len(), 6);
        assert!(d.k_distances[best.basis] <= 1e-9, "seed {seed}: {:?}", d.k_distances);
    }
}

#[test]
fn six_copies_are_singular() {
    let set = six_set(0);
    let pairs = [set.instance.pairs[0]; 6];
    assert!(matches!(solve_six(&pairs), Err(Error::SingularSystem(_))));
}

#[test]
fn wrong_pair_count_is_an_input_error() {
    let set = six_set(0);
    let err = solve_six(&set.instance.pairs[..5]).unwrap_err();
    assert!(matches!(err, Error::PairCount { found: 5, .. }));
    assert!(!err.is_inconsistency());
    assert!(matches!(
        solve_four(&set.instance.pairs),
        Err(Error::PairCount { found: 6, .. })
    ));
}

#[test]
fn injected_rank_violation() {
    let u = LiftedUnknowns {
        u: [1.0, 2.0, 1.0, 1.0, 0.0, 1.0],
    };
    assert!(matches!(u.check_rank1(TOL_R1), Err(Error::Rank1Violation { .. })));
}

/// Generic six-pair data from one device: records whether a shared lifted
/// solution exists. None does, so the solver reports the diagnostic path.
#[test]
fn generic_six_pairs_have_no_shared_lifted_solution() {
    let mut outcomes = Vec::new();
    for seed in 0..10 {
        let inst = generic_instance(seed, 6, 1.0);
        match solve_six(&inst.pairs) {
            Err(Error::NoValidCandidate(report)) => {
                let d = &report.diagnostics;
                assert!(!d.validated);
                assert!(report.best_residual() > 1e-6);
                assert!(report.candidates.iter().all(|c| c.residuals.len() == 6));
                outcomes.push(d.rank1_xy.max(d.rank1_zw));
            }
            Err(e) => {
                assert!(e.is_inconsistency(), "seed {seed}: {e}");
                outcomes.push(f64::NAN);
            }
            Ok(report) => panic!("seed {seed}: generic data validated: {:?}", report.diagnostics),
        }
    }
    assert_eq!(outcomes.len(), 10);
}

#[test]
fn four_pairs_find_a_validated_root() {
    for seed in 0..12 {
        let set = four_set(seed);
        let report = solve_four(&set.instance.pairs).unwrap();
        assert!(report.starts <= 64);
        let best = report.best().unwrap();
        assert!(best.residual <= 1e-10, "seed {seed}: {}", best.residual);
        assert!(
            best.validated && best.residuals.iter().all(|r| *r <= 1e-9),
            "seed {seed}: {best:?}"
        );
        let l = mueller_core::json::matrix_from_json(&best.mueller).unwrap();
        assert!(l.max_abs_diff(&set.instance.mueller) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn four_pair_solver_is_deterministic() {
    let set = four_set(1);
    let a = solve_four(&set.instance.pairs).unwrap();
    let b = solve_four(&set.instance.pairs).unwrap();
    assert_eq!(a, b);
    let c = solve_four_with(
        &set.instance.pairs,
        &FourOptions {
            seed: 5,
            ..FourOptions::default()
        },
    )
    .unwrap();
    assert!(c.validated);
}

#[test]
fn four_copies_are_non_isolated() {
    let set = four_set(0);
    let report = solve_four(&[set.instance.pairs[0]; 4]).unwrap();
    assert!(report.non_isolated);
}

#[test]
fn generic_four_pairs_do_not_validate() {
    for seed in 0..5 {
        let inst = generic_instance(seed, 4, 1.0);
        match solve_four(&inst.pairs) {
            Err(Error::NoConvergedRoot { starts }) => assert_eq!(starts, 64),
            Ok(report) => assert!(!report.validated, "seed {seed}: {:?}", report.best()),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn polarized_pair_blocks_are_degenerate() {
    let s = StokesVector::new(1.0, Vector3::new(0.6, 0.8, 0.0)).unwrap();
    let t = StokesVector::new(2.0, Vector3::new(0.0, 1.2, 1.6)).unwrap();
    let q: QuadCoeffs = quad_coeffs(&MeasurementPair::new(s, t).unwrap()).unwrap();
    let scale = q.max_abs();
    assert!((q.a * q.c - q.b * q.b).abs() <= 1e-12 * scale * scale);
    assert!((q.alpha * q.sigma - q.beta * q.beta).abs() <= 1e-12 * scale * scale);
}
