use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use tmeig::density::{conditional_logpdf, marginal_logpdf, pullback_logpdf};
use tmeig::estimators::{allocate, nmc_split, EstimatorKind};
use tmeig::models::{closed_form_eig, make_linear_gaussian, Model};
use tmeig::numerics::random_orthonormal;
use tmeig::rng::stream;
use tmeig::transport::{
    map_forward, map_invert, BlockTriangularMap, MonotoneComponent, MultiIndexSet, Ordering, Rectifier,
    Standardization, TriangularMap,
};
use tmeig::Error;

fn random_map(dim: usize, degree: u32, seed: u64) -> TriangularMap {
    let mut rng = stream(seed, "properties/map", 0);
    let comps = (1..=dim)
        .map(|k| {
            let set = MultiIndexSet::total_degree(k, degree);
            let coefs = (0..set.len())
                .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            MonotoneComponent::new(set, coefs, Rectifier::Softplus, 24).unwrap()
        })
        .collect();
    let st = Standardization {
        mean: (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        scale: (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    TriangularMap::new(0, st, comps).unwrap()
}

proptest! {
    #[test]
    fn allocation_partitions_the_budget(l in 2usize..200_000, p in 0.01f64..0.99, min_train in 1usize..50) {
        prop_assume!(l > min_train);
        let (m, n) = allocate(l, p, min_train).unwrap();
        prop_assert_eq!(m + n, l);
        prop_assert!(m >= 1);
        prop_assert!(n >= min_train);
    }

    #[test]
    fn larger_exponent_never_shrinks_evaluation(l in 100usize..100_000, p in 0.05f64..0.9) {
        let (m1, _) = allocate(l, p, 2).unwrap();
        let (m2, _) = allocate(l, p + 0.05, 2).unwrap();
        prop_assert!(m2 >= m1);
    }

    #[test]
    fn nmc_split_stays_within_budget(l in 8usize..10_000_000) {
        let (outer, inner) = nmc_split(l).unwrap();
        prop_assert!(outer * inner <= l);
        prop_assert!(l - outer * inner < inner);
        prop_assert_eq!(inner, (l as f64).cbrt().round() as usize);
    }

    #[test]
    fn estimator_names_round_trip(i in 0usize..6) {
        let kind = EstimatorKind::ALL[i];
        prop_assert_eq!(kind.as_str().parse::<EstimatorKind>().unwrap(), kind);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // inputs are drawn in standardized coordinates: far outside them the
    // random polynomials flatten the map and the inverse is ill-conditioned
    #[test]
    fn map_inverts_its_own_image(seed in 0u64..1000, degree in 1u32..4, u in prop::collection::vec(-2.5f64..2.5, 3)) {
        let map = random_map(3, degree, seed);
        let st = map.standardization();
        let z: Vec<f64> = (0..3).map(|i| st.mean[i] + st.scale[i] * u[i]).collect();
        let (w, _) = map_forward(&map, &z).unwrap();
        let back = map_invert(&map, &w).unwrap();
        for (a, b) in z.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_reproduces_targets(seed in 0u64..1000, degree in 1u32..4, w in prop::collection::vec(-4.0f64..4.0, 3)) {
        let map = random_map(3, degree, seed);
        // random maps need not be onto, so a target may have no preimage
        let z = match map_invert(&map, &w) {
            Ok(z) => z,
            Err(Error::Component { source, .. }) if matches!(*source, Error::Divergence { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let (again, _) = map_forward(&map, &z).unwrap();
        for k in 0..3 {
            // backward error: a few ulps of z_k, times the local slope
            let h = 1e-6 * z[k].abs().max(1.0);
            let mut zp = z.clone();
            zp[k] += h;
            let slope = (map_forward(&map, &zp).unwrap().0[k] - again[k]).abs() / h;
            let tol = 1e-12 * w[k].abs().max(1.0) + 16.0 * f64::EPSILON * slope * z[k].abs().max(1.0);
            prop_assert!((w[k] - again[k]).abs() <= tol, "component {k}: {} vs {}", w[k], again[k]);
        }
    }

    #[test]
    fn joint_density_factorizes(seed in 0u64..1000, n_lead in 1usize..4, z in prop::collection::vec(-2.5f64..2.5, 4)) {
        let map = random_map(4, 2, seed);
        let block = BlockTriangularMap::from_triangular(Ordering::XThenY, &map, n_lead).unwrap();
        let joint = pullback_logpdf(&map, &z).unwrap();
        let split = marginal_logpdf(&block, &z[..n_lead]).unwrap()
            + conditional_logpdf(&block, &z[n_lead..], &z[..n_lead]).unwrap();
        prop_assert!((joint - split).abs() <= 1e-12 * joint.abs().max(1.0));
    }

    #[test]
    fn projection_never_gains_information(seed in 0u64..500, r in 1usize..7, s in 1usize..4) {
        let model = make_linear_gaussian(6, 3, 0.7, seed).unwrap();
        let full = model.exact_eig().unwrap();
        let mut rng = stream(seed, "properties/projection", 0);
        let u = random_orthonormal(6, r, &mut rng);
        let v = random_orthonormal(3, s, &mut rng);
        let part = closed_form_eig(&model, Some(&u), Some(&v)).unwrap();
        prop_assert!(part >= -1e-12);
        prop_assert!(part <= full + 1e-10);
    }
}
