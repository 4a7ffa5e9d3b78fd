mod common;

use calibra::comass::{comass, comass_analytic, comass_bruteforce, ComassOptions};
use calibra::exterior::SimpleVector;
use calibra::gluing::{glued_metric, inverse_product_hessian, relative_spectrum, t_of_s};
use calibra::lawlor::{c_control, f_control, integrate_fastest, Control, CurvatureModel, IntegrationOptions};
use calibra::linalg::spd_min_eigenvalue;
use calibra::obstruction::{hemisphere_test, wedge_comass_check, HemisphereVerdict, SpherePointSet};
use calibra::product::{mean_curvature, minimal_product, Factor, SamplingOptions};
use calibra::rng::{gaussian_matrix, seeded, unit_vector};
use common::{random_form, random_metric, random_rotation};
use nalgebra::DVector;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=6).prop_flat_map(|n| (Just(n), 1..=n.min(3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn contraction_is_adjoint_to_wedge(seed in any::<u64>(), n in 2usize..=6, m in 2usize..=4, r in 1usize..=3) {
        prop_assume!(m <= n && r < m);
        let mut rng = seeded(seed);
        let phi = random_form(&mut rng, n, m);
        let eta = SimpleVector::from_matrix(gaussian_matrix(&mut rng, n, r));
        let v = SimpleVector::from_matrix(gaussian_matrix(&mut rng, n, m - r));
        let lhs = phi.contract(&eta).unwrap().evaluate(&v).unwrap();
        let rhs = phi.evaluate(&eta.wedge(&v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn wedge_is_associative_and_graded(seed in any::<u64>(), n in 3usize..=7, p in 1usize..=2, q in 1usize..=2, r in 1usize..=2) {
        prop_assume!(p + q + r <= n);
        let mut rng = seeded(seed);
        let (a, b, c) = (random_form(&mut rng, n, p), random_form(&mut rng, n, q), random_form(&mut rng, n, r));
        let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(left.approx_eq(&right, 1e-12 * left.max_abs_coeff().max(1.0)));
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap().scaled(if p * q % 2 == 0 { 1.0 } else { -1.0 });
        prop_assert!(ab.approx_eq(&ba, 1e-12 * ab.max_abs_coeff().max(1.0)));
    }

    #[test]
    fn gram_norm_is_the_gram_determinant(seed in any::<u64>(), (n, m) in dims()) {
        let mut rng = seeded(seed);
        let g = random_metric(&mut rng, n);
        let v = gaussian_matrix(&mut rng, n, m);
        let q = SimpleVector::from_matrix(v.clone());
        let det = (v.transpose() * g.matrix() * &v).determinant();
        let norm = q.gram_norm(&g).unwrap();
        prop_assert!((norm * norm - det).abs() < 1e-10 * det.abs().max(1.0));
        let unit = q.normalized(&g).unwrap();
        prop_assert!((unit.gram_norm(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pullback_is_functorial(seed in any::<u64>(), (n, m) in dims(), k in 2usize..=5, l in 2usize..=5) {
        prop_assume!(m <= k.min(l));
        let mut rng = seeded(seed);
        let phi = random_form(&mut rng, n, m);
        let a = gaussian_matrix(&mut rng, n, k);
        let b = gaussian_matrix(&mut rng, k, l);
        let lhs = phi.pullback(&(&a * &b)).unwrap();
        let rhs = phi.pullback(&a).unwrap().pullback(&b).unwrap();
        prop_assert!(lhs.approx_eq(&rhs, 1e-10 * lhs.max_abs_coeff().max(1.0)));
    }

    #[test]
    fn glued_gram_norm_matches_t_of_s(seed in any::<u64>(), (n, m) in dims(), s in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let (g1, g2) = (random_metric(&mut rng, n), random_metric(&mut rng, n));
        let q = SimpleVector::from_matrix(gaussian_matrix(&mut rng, n, m));
        let spec = relative_spectrum(&g1, &g2, &q).unwrap();
        let direct = q.gram_norm(&glued_metric(&g1, &g2, s).unwrap()).unwrap().powi(2);
        prop_assert!((t_of_s(&spec, s) - direct).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn inverse_product_hessian_is_positive_definite(x in proptest::collection::vec(0.01f64..10.0, 1..6)) {
        prop_assert!(spd_min_eigenvalue(&inverse_product_hessian(&x)) > 0.0);
    }

    #[test]
    fn controls_start_at_one_and_decrease_in_alpha(k in 1usize..=12, t in 0.001f64..3.0, a in 0.0f64..3.0, da in 0.001f64..1.0) {
        prop_assert_eq!(f_control(a, 0.0, k), 1.0);
        prop_assert_eq!(c_control(a, 0.0), 1.0);
        prop_assert!(f_control(a + da, t, k) < f_control(a, t, k));
        prop_assert!(c_control(a + da, t) < c_control(a, t));
    }

    #[test]
    fn product_weights_are_unit(ks in proptest::collection::vec(1usize..=5, 1..=5)) {
        let link = minimal_product(ks.iter().map(|&d| Factor::Sphere { dim: d }).collect()).unwrap();
        let s: f64 = link.lambdas.iter().map(|l| l * l).sum();
        prop_assert!((s - 1.0).abs() < 1e-15);
        prop_assert_eq!(link.k, ks.iter().sum::<usize>());
        for p in link.sample_points(8, 3).unwrap() {
            prop_assert!((p.x.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn antipodal_pairs_are_infeasible(seed in any::<u64>(), n in 2usize..=6, extra in 0usize..20) {
        let mut rng = seeded(seed);
        let x = unit_vector(&mut rng, n);
        let mut pts = vec![x.clone(), -x];
        pts.extend((0..extra).map(|_| unit_vector(&mut rng, n)));
        let set = SpherePointSet::new(pts).unwrap();
        let c = hemisphere_test(&set, 1e-8).unwrap();
        prop_assert_eq!(c.verdict, HemisphereVerdict::Infeasible);
        prop_assert!(c.verify(&set));
    }

    #[test]
    fn hemisphere_certificates_are_exclusive_and_checkable(seed in any::<u64>(), n in 2usize..=5, count in 1usize..30, tilt in 0.0f64..2.0) {
        let mut rng = seeded(seed);
        let pole = unit_vector(&mut rng, n);
        let pts: Vec<DVector<f64>> = (0..count).map(|_| (unit_vector(&mut rng, n) + &pole * tilt).normalize()).collect();
        let set = SpherePointSet::new(pts).unwrap();
        let c = hemisphere_test(&set, 1e-8).unwrap();
        match c.verdict {
            HemisphereVerdict::Feasible => {
                prop_assert!(c.weights.is_none() && c.margin.unwrap() > 0.0);
            }
            HemisphereVerdict::Infeasible => {
                prop_assert!(c.direction.is_none() && c.dual_residual.unwrap() <= 1e-8);
            }
            HemisphereVerdict::Boundary => {}
        }
        prop_assert!(c.verify(&set));
    }

    #[test]
    fn hemisphere_test_is_rotation_equivariant(seed in any::<u64>(), n in 2usize..=5, count in 1usize..20) {
        let mut rng = seeded(seed);
        let pole = unit_vector(&mut rng, n);
        let pts: Vec<DVector<f64>> = (0..count).map(|_| (unit_vector(&mut rng, n) + &pole * 1.5).normalize()).collect();
        let rot = random_rotation(&mut rng, n);
        let a = hemisphere_test(&SpherePointSet::new(pts.clone()).unwrap(), 1e-8).unwrap();
        let b = hemisphere_test(&SpherePointSet::new(pts.iter().map(|p| &rot * p).collect()).unwrap(), 1e-8).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        if a.verdict == HemisphereVerdict::Feasible {
            prop_assert!((a.margin.unwrap() - b.margin.unwrap()).abs() < 1e-9);
            let wa = &rot * DVector::from_vec(a.direction.unwrap());
            let wb = DVector::from_vec(b.direction.unwrap());
            prop_assert!((wa - wb).norm() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn comass_is_homogeneous(seed in any::<u64>(), (n, m) in dims(), c in -4.0f64..4.0) {
        prop_assume!(c.abs() > 0.05);
        let mut rng = seeded(seed);
        let phi = random_form(&mut rng, n, m);
        let g = random_metric(&mut rng, n);
        let opts = ComassOptions::default();
        let base = comass(&phi, &g, &opts).unwrap().value;
        let scaled = comass(&phi.scaled(c), &g, &opts).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() < 1e-6 * scaled);
    }

    #[test]
    fn comass_scales_with_the_metric(seed in any::<u64>(), (n, m) in dims(), c in 0.2f64..5.0) {
        let mut rng = seeded(seed);
        let phi = random_form(&mut rng, n, m);
        let g = random_metric(&mut rng, n);
        let opts = ComassOptions::default();
        let base = comass(&phi, &g, &opts).unwrap().value;
        let scaled = comass(&phi, &g.scaled(c * c).unwrap(), &opts).unwrap().value;
        let want = base * c.powi(-(m as i32));
        prop_assert!((scaled - want).abs() < 1e-6 * want);
    }

    #[test]
    fn comass_is_sandwiched_by_its_oracles(seed in any::<u64>(), n in 2usize..=6, m in 1usize..=3) {
        prop_assume!(m <= n);
        let mut rng = seeded(seed);
        let phi = random_form(&mut rng, n, m);
        let g = random_metric(&mut rng, n);
        let value = comass(&phi, &g, &ComassOptions::default()).unwrap().value;
        prop_assert!(comass_bruteforce(&phi, &g, 2000, seed).unwrap() <= value + 1e-12);
        if let Some(exact) = comass_analytic(&phi, &g).unwrap() {
            prop_assert!(value <= exact + 1e-6);
        }
    }

    #[test]
    fn fastest_profiles_stay_in_the_band(k in 2usize..=8, alpha in 0.0f64..2.0, use_f in any::<bool>()) {
        let control = if use_f { Control::F } else { Control::C };
        let model = CurvatureModel::with_control(k, alpha, control).unwrap();
        let p = integrate_fastest(&model, &IntegrationOptions::default()).unwrap();
        prop_assert!(p.min_discriminant >= -1e-12, "{}", p.min_discriminant);
    }

    #[test]
    fn sphere_products_are_minimal(ks in proptest::collection::vec(1usize..=3, 2..=3), seed in any::<u64>()) {
        let link = minimal_product(ks.iter().map(|&d| Factor::Sphere { dim: d }).collect()).unwrap();
        let opts = SamplingOptions::default();
        for p in link.sample_points(4, seed).unwrap() {
            prop_assert!(mean_curvature(&link, &p, &opts).unwrap() < 1e-4);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn wedge_comass_dominates_the_split_value(seed in any::<u64>(), n1 in 2usize..=3, n2 in 2usize..=3) {
        let mut rng = seeded(seed);
        let phi1 = random_form(&mut rng, n1, 1 + (seed % 2) as usize);
        let phi2 = random_form(&mut rng, n2, 1);
        let (g1, g2) = (random_metric(&mut rng, n1), random_metric(&mut rng, n2));
        let r = wedge_comass_check(&phi1, &g1, &phi2, &g2, &ComassOptions::default()).unwrap();
        prop_assert!(r.above_split && r.ok, "{r:?}");
    }
}
