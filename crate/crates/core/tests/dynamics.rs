use proptest::prelude::*;

use volterra::analysis::{estimate_omega, Budget, Mode, OmegaEstimate, Verdict};
use volterra::batch;
use volterra::lyapunov::{
    admissibility, monotonicity_report, LinearFunctional, Monotonicity, Trend,
};
use volterra::matrix::{classify, ClassTag, MatrixDescriptor, SkewMatrix};
use volterra::operator::{cascade_partial_sum_oracle, VolterraOperator};
use volterra::simplex::{l1_distance, rho_distance, SimplexPoint};

fn seed_point() -> impl Strategy<Value = SimplexPoint> {
    prop::collection::btree_map(1usize..=24, 0.05f64..1.0, 1..=8).prop_map(|m| {
        SimplexPoint::from_sparse(m)
            .unwrap()
            .renormalize(1.0)
            .unwrap()
    })
}

#[test]
fn descriptor_round_trip_preserves_dynamics() {
    let m = SkewMatrix::tilde(
        vec![
            vec![0.0, 0.4, -0.2],
            vec![-0.4, 0.0, 0.9],
            vec![0.2, -0.9, 0.0],
        ],
        SkewMatrix::random(17, -1.0, 0.0).unwrap(),
    )
    .unwrap();
    let text = serde_json::to_string(&m.descriptor()).unwrap();
    let back: MatrixDescriptor = serde_json::from_str(&text).unwrap();
    let m2 = SkewMatrix::from_descriptor(&back).unwrap();
    let x0 = SimplexPoint::uniform(1..=9).unwrap();
    let a = VolterraOperator::new(m).iterate(&x0, 30).unwrap();
    let b = VolterraOperator::new(m2).iterate(&x0, 30).unwrap();
    assert_eq!(a.points, b.points);
}

#[test]
fn tilde_minus_class_and_exact_split() {
    let m = SkewMatrix::tilde(
        vec![vec![0.0, 0.7], vec![-0.7, 0.0]],
        SkewMatrix::random(5, -1.0, -0.1).unwrap(),
    )
    .unwrap();
    let c = classify(&m, 40).unwrap();
    assert_eq!(c.tag, ClassTag::TildeMinus { k0: 3 });
    let v = VolterraOperator::new(m);
    let x0 = SimplexPoint::uniform([1, 2, 4, 7, 11]).unwrap();
    let split = v.decompose_tilde(&x0).unwrap();
    assert_eq!(
        split.iterate(40).unwrap(),
        v.iterate(&x0, 40).unwrap().points
    );
    // each block keeps its own mass: the head (a_12 > 0) collapses onto e_1,
    // the strictly negative tail onto the top of its support
    let est = estimate_omega(&v, &x0, Mode::Weak, &Budget::with_steps(50_000)).unwrap();
    let Verdict::PointOnSphere { point, .. } = est.verdict else {
        panic!("{:?}", est.verdict);
    };
    let expect = SimplexPoint::from_sparse([(1, 0.4), (11, 0.6)]).unwrap();
    assert!(l1_distance(&point, &expect) < 1e-8, "{point:?}");
}

#[test]
fn omega_estimate_json_round_trip() {
    let v = VolterraOperator::cascade();
    let est = estimate_omega(
        &v,
        &SimplexPoint::uniform(1..=4).unwrap(),
        Mode::Norm,
        &Budget::with_steps(100),
    )
    .unwrap();
    let text = serde_json::to_string(&est).unwrap();
    let back: OmegaEstimate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, est);
}

#[test]
fn batch_of_estimates_matches_serial_loop() {
    let seeds: Vec<u64> = (0..12).collect();
    let run = |&s: &u64| {
        let v = VolterraOperator::new(SkewMatrix::random(s, 0.05, 1.0).unwrap());
        let x0 = SimplexPoint::uniform([3, 5, 8]).unwrap();
        estimate_omega(&v, &x0, Mode::Norm, &Budget::with_steps(20_000)).unwrap()
    };
    let serial: Vec<_> = seeds.iter().map(run).collect();
    assert_eq!(batch::map(&seeds, run), serial);
    assert!(serial
        .iter()
        .all(|e| e.verdict == Verdict::VertexLimit { index: 3 }));
}

#[test]
fn quasi_lyapunov_values_converge_on_cascade() {
    // b^[m] is decreasing and c0, so along a V- trajectory it decreases to a limit
    let f = LinearFunctional::bm(3).unwrap();
    let t = VolterraOperator::cascade()
        .iterate(&SimplexPoint::geometric(30).unwrap(), 400)
        .unwrap();
    let r = monotonicity_report(&f, &t);
    assert_eq!(r.verdict, Monotonicity::Nonincreasing);
    assert!(r.limit_exists);
    let adm = admissibility(&f, VolterraOperator::cascade().matrix(), 32).unwrap();
    assert_eq!(adm.predicted_trend(), Some(Trend::Nonincreasing));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascade_matches_closed_form(x0 in seed_point(), n in 0u32..12) {
        let t = VolterraOperator::cascade().iterate(&x0, n as usize).unwrap();
        let p = t.last();
        for m in 1..=24 {
            let sim: f64 = p.iter().take_while(|&(k, _)| k <= m).map(|(_, v)| v).sum();
            let exact = cascade_partial_sum_oracle(&x0, m, n);
            let tol = if exact < 1e-8 { 1e-14 } else { 1e-10 * exact };
            prop_assert!((sim - exact).abs() <= tol, "m={} n={} sim={} exact={}", m, n, sim, exact);
        }
    }

    #[test]
    fn random_signed_dynamics_stay_on_simplex(x0 in seed_point(), seed in any::<u64>(), n in 1usize..200) {
        let v = VolterraOperator::new(SkewMatrix::random(seed, -1.0, 1.0).unwrap());
        let t = v.iterate(&x0, n).unwrap();
        let support = x0.support();
        for p in &t.points {
            prop_assert!((p.mass() - 1.0).abs() < 1e-10);
            prop_assert!(p.support().iter().all(|k| support.contains(k)));
        }
        for (j, w) in t.points.windows(2).enumerate() {
            prop_assert!(rho_distance(&w[0], &w[1]) <= l1_distance(&w[0], &w[1]));
            prop_assert_eq!(t.step_l1[j], l1_distance(&w[0], &w[1]));
        }
    }

    #[test]
    fn decreasing_c0_functionals_rise_on_vplus(x0 in seed_point(), seed in any::<u64>(), m in 1usize..10) {
        let v = VolterraOperator::new(SkewMatrix::random(seed, 0.0, 1.0).unwrap());
        let f = LinearFunctional::bm(m).unwrap();
        let t = v.iterate(&x0, 80).unwrap();
        let r = monotonicity_report(&f, &t);
        prop_assert!(r.verdict.is_nondecreasing(), "{:?}", r.deltas);
    }
}
