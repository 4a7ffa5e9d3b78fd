//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;
use std::time::Instant;

use calibra::comass::{
    adapted_metric, adapted_threshold, comass, comass_analytic, comass_bruteforce, decompose, ComassOptions,
};
use calibra::exterior::{binomial, MultiIndex, SimpleVector};
use calibra::gluing::{normalize_metric, uniform_grid, verify_gluing_bound, GluingOptions};
use calibra::lawlor::{
    build_smooth_profile, check_area_minimizing, integrate_branch, integrate_fastest, second_order_coeffs,
    verify_profile, Control, CurvatureModel, IntegrationOptions, LinkData, SmoothOptions,
};
use calibra::obstruction::{
    constant_calibration_obstruction, gauss_image, hypersurface_samples, hemisphere_test, wedge_comass_bound,
    wedge_comass_check, HemisphereVerdict, ObstructionOptions,
};
use calibra::product::{
    curvature_model, minimal_product, normal_radius, replication_search, Factor, SamplingOptions,
};
use calibra::rng::{gaussian_matrix, seeded};
use common::{random_form, random_metric};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn comass_oracles() -> Outcome {
    let start = Instant::now();
    let opts = ComassOptions::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [4usize, 6] {
        let rows: Vec<(f64, f64, f64)> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded(1000 * n as u64 + i);
                let phi = random_form(&mut rng, n, 2);
                let g = random_metric(&mut rng, n);
                let value = comass(&phi, &g, &opts).unwrap().value;
                let exact = comass_analytic(&phi, &g).unwrap().unwrap();
                let brute = comass_bruteforce(&phi, &g, 100_000, i).unwrap();
                (value, exact, brute)
            })
            .collect();
        let worst_rel = rows.iter().map(|(v, e, _)| (v - e).abs() / e).fold(0.0, f64::max);
        let above = rows.iter().filter(|(v, _, b)| *b > v * (1.0 + 1e-12)).count();
        let min_ratio = rows.iter().map(|(v, _, b)| b / v).fold(f64::INFINITY, f64::min);
        let short = rows.iter().filter(|(v, _, b)| *b < 0.98 * v).count();
        pass &= worst_rel <= 1e-4 && above == 0 && short == 0;
        lines.push(format!(
            "R^{n}: worst rel err {worst_rel:.2e}, brute > optimizer {above}, brute/optimizer min {min_ratio:.4}, more than 2% below {short}/100"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    outcome(pass, format!("{}; {secs:.1}s", lines.join("; ")))
}

fn gluing_sweep() -> Outcome {
    let opts = GluingOptions::default();
    let grid = uniform_grid(11);
    let rows: Vec<Result<(f64, f64, f64), String>> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(50_000 + i);
            let n = 2 + (i % 5) as usize;
            let m = 1 + (i / 5 % 3) as usize;
            let m = m.min(n);
            let phi = random_form(&mut rng, n, m);
            let (g1, _) = normalize_metric(&phi, &random_metric(&mut rng, n), &opts.comass).map_err(|e| e.to_string())?;
            let (g2, _) = normalize_metric(&phi, &random_metric(&mut rng, n), &opts.comass).map_err(|e| e.to_string())?;
            let r = verify_gluing_bound(&phi, &g1, &g2, &grid, &opts).map_err(|e| e.to_string())?;
            Ok((r.worst_violation, r.worst_improved_violation, r.worst_ccgp_violation))
        })
        .collect();
    let errors = rows.iter().filter(|r| r.is_err()).count();
    let ok: Vec<_> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    let worst = ok.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_imp = ok.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let worst_ccgp = ok.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        errors == 0 && worst <= 1e-6 && worst_imp <= 1e-6,
        format!(
            "500 triples, {errors} errors; max(comass − 1) = {worst:.2e}; max(comass − improved bound) = {worst_imp:.2e}; max(comass − ccgp bound) = {worst_ccgp:.2e}"
        ),
    )
}

fn decomposition_round_trip() -> Outcome {
    let opts = ComassOptions::default();
    let rows: Vec<Result<(f64, f64, bool, f64, f64, f64), String>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(70_000 + i);
            let n = 3 + (i % 4) as usize;
            let m = 2 + (i / 4 % 2) as usize;
            let m = m.min(n - 1);
            let g = random_metric(&mut rng, n);
            let xi = SimpleVector::from_matrix(gaussian_matrix(&mut rng, n, m)).normalized(&g).unwrap();
            let raw = random_form(&mut rng, n, m);
            let phi = raw.scaled(1.0 / raw.evaluate(&xi).unwrap());
            let d = decompose(&phi, &xi).map_err(|e| e.to_string())?;
            let recon = d.reconstruct().unwrap().distance(&phi);
            let size = phi.max_abs_coeff();
            // coefficients against [V | W], computed independently by pullback
            let coeffs = phi.pullback(&d.basis()).unwrap();
            let leading = MultiIndex::leading(m);
            let mut forced: f64 = 0.0;
            let mut stored_exact = true;
            let stored = d.basis_form();
            for idx in MultiIndex::all(n, m) {
                if idx != leading && idx.as_slice()[m - 2] < m {
                    forced = forced.max(coeffs.get(&idx).abs());
                    stored_exact &= stored.get(&idx) == 0.0;
                }
            }
            let c2 = 2.0 * adapted_threshold(&phi, &xi, &g, &opts).map_err(|e| e.to_string())?.max(0.5);
            let ga = adapted_metric(&phi, &xi, &g, c2, &opts).map_err(|e| e.to_string())?;
            let c = comass(&phi, &ga, &opts).unwrap().value;
            let xi_norm = xi.gram_norm(&ga).unwrap();
            Ok((recon, forced, stored_exact, c, (phi.evaluate(&xi).unwrap() / xi_norm - 1.0).abs(), size))
        })
        .collect();
    let errors: Vec<&String> = rows.iter().filter_map(|r| r.as_ref().err()).collect();
    let ok: Vec<_> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    let recon = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let over = ok.iter().filter(|r| r.0 > 1e-10).count();
    let worst_size = ok.iter().max_by(|a, b| a.0.total_cmp(&b.0)).map_or(0.0, |r| r.5);
    let forced = ok.iter().map(|r| r.1).fold(0.0, f64::max);
    let exact = ok.iter().all(|r| r.2);
    let comass_dev = ok.iter().map(|r| (r.3 - 1.0).abs()).fold(0.0, f64::max);
    let xi_dev = ok.iter().map(|r| r.4).fold(0.0, f64::max);
    outcome(
        errors.is_empty() && recon <= 1e-10 && exact && forced <= 1e-10 && comass_dev <= 1e-4 && xi_dev <= 1e-10,
        format!(
            "100 instances, {} errors{}; reconstruction {recon:.1e} (above 1e-10: {over}, worst at max |φ_I| {worst_size:.2e}); stored tail zeros exact {exact}, pulled-back forced coefficients {forced:.1e}; |comass − 1| {comass_dev:.1e}; |φ(ξ)/‖ξ‖ − 1| {xi_dev:.1e}",
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    )
}

fn lawlor_convergence() -> Outcome {
    let base = IntegrationOptions::default();
    let mut fine = base.clone();
    fine.ode.atol /= 2.0;
    let mut jobs = Vec::new();
    for k in [2usize, 4, 6] {
        for alpha in [0.5, 1.0, 1.5] {
            jobs.push((k, alpha));
        }
    }
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(k, alpha)| {
            let mut ok = true;
            let mut thetas = Vec::new();
            let mut worst_margin = f64::NEG_INFINITY;
            for control in [Control::F, Control::C] {
                let model = CurvatureModel::with_control(k, alpha, control).unwrap();
                let p = integrate_fastest(&model, &base).unwrap();
                let p_fine = integrate_fastest(&model, &fine).unwrap();
                let same = match (p.theta, p_fine.theta) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-8,
                    (None, None) => std::mem::discriminant(&p.outcome) == std::mem::discriminant(&p_fine.outcome),
                    _ => false,
                };
                let check = verify_profile(&p, &model);
                worst_margin = worst_margin.max(check.worst_margin);
                ok &= same && check.ok && check.worst_margin <= 1e-8;
                thetas.push(p.theta);
            }
            let ordered = match (thetas[0], thetas[1]) {
                (Some(f), Some(c)) => c > f,
                _ => true,
            };
            ok &= ordered;
            let show = |t: Option<f64>| t.map(|x| format!("{x:.10}")).unwrap_or_else(|| "none".into());
            format!(
                "{}(k={k}, α={alpha}: θ_F {}, θ_c {}, verify {worst_margin:.1e})",
                if ok { "" } else { "FAIL " },
                show(thetas[0]),
                show(thetas[1])
            )
        })
        .collect();
    let pass = rows.iter().all(|r| !r.starts_with("FAIL"));
    outcome(pass, rows.join("; "))
}

fn cone_verdicts() -> Outcome {
    let start = Instant::now();
    let io = IntegrationOptions::default();
    let verdict = |factors: Vec<Factor>, points: usize| {
        let link = minimal_product(factors).unwrap();
        let s = SamplingOptions { points, ..Default::default() };
        let est = curvature_model(&link, &s).unwrap();
        let r = normal_radius(&link, &s).unwrap();
        let data = LinkData {
            k: link.k,
            ambient_dim: link.ambient_sphere_dim + 1,
            alpha: est.alpha,
            curvature: Some(est.model.clone()),
            normal_radius: Some(r.value),
        };
        let v = check_area_minimizing(&data, Control::Custom, &io).unwrap();
        let p_err = (0..=100)
            .map(|i| {
                let t = i as f64 / 100.0;
                (est.model.p(t) - (1.0 - t * t).powi(link.k as i32 / 2)).abs()
            })
            .fold(0.0, f64::max);
        (v, est.alpha, r.value, p_err)
    };
    let s3 = || vec![Factor::Sphere { dim: 3 }, Factor::Sphere { dim: 3 }];
    let s1 = || vec![Factor::Sphere { dim: 1 }, Factor::Sphere { dim: 1 }];
    let (a, alpha, radius, p_err) = verdict(s3(), 64);
    let (a2, _, _, _) = verdict(s3(), 128);
    let (b, _, _, _) = verdict(s1(), 64);
    let (b2, _, _, _) = verdict(s1(), 128);
    let secs = start.elapsed().as_secs_f64();
    let pass = a.passes
        && a2.passes
        && !b.passes
        && !b2.passes
        && (radius - FRAC_PI_4).abs() < 1e-6
        && p_err < 1e-6
        && secs < 300.0;
    outcome(
        pass,
        format!(
            "S³×S³: {} (α {alpha:.6}, R {radius:.6}, |p − (1−t²)³| {p_err:.1e}, θ {:.8}, margin {:.6}), doubled sampling {}; S¹×S¹: {}, doubled sampling {}; {secs:.1}s",
            a.status(),
            a.theta_used.unwrap_or(f64::NAN),
            a.margin.unwrap_or(f64::NAN),
            a2.status(),
            b.status(),
            b2.status()
        ),
    )
}

fn simons_model() -> CurvatureModel {
    CurvatureModel::custom(6, 6f64.sqrt(), Arc::new(|t: f64| (1.0 - t * t).powi(3)), -3.0).unwrap()
}

fn profile_surgery() -> Outcome {
    let model = simons_model();
    let opts = SmoothOptions::default();
    let kk = opts.integration.normalization.prefactor(6);
    let (a_min, a_max) = second_order_coeffs(kk, model.p2).unwrap();
    let theta0 = integrate_fastest(&model, &opts.integration).unwrap().theta.unwrap();
    let slow = integrate_branch(&model, a_min, &opts.integration).unwrap();
    let slow_theta = slow.theta.unwrap_or(std::f64::consts::FRAC_PI_2);
    match build_smooth_profile(&model, 0.5 * (a_min + a_max), 0.05, 1e-3, &opts) {
        Err(e) => outcome(false, format!("construction failed: {e}")),
        Ok(sp) => {
            let h_end = *sp.profile.h_values.last().unwrap();
            let tangent = sp.end_slope.abs() < 1e-12 && h_end == 0.0;
            let pass = tangent && sp.check.worst_margin <= 1e-6 && theta0 < sp.theta2 && sp.theta2 < slow_theta;
            outcome(
                pass,
                format!(
                    "θ₀ {theta0:.8} < θ₂ {:.8} < a_min branch {} ({:?}); end slope {:.1e}; worst residual {:.2e} over {} samples",
                    sp.theta2,
                    slow.theta.map(|t| format!("{t:.8}")).unwrap_or_else(|| "π/2 (no vanishing)".into()),
                    slow.outcome,
                    sp.end_slope,
                    sp.check.worst_margin,
                    sp.profile.t_samples.len()
                ),
            )
        }
    }
}

fn obstruction() -> Outcome {
    let clifford = Factor::Product(vec![Factor::Sphere { dim: 1 }, Factor::Sphere { dim: 1 }]);
    let image = gauss_image(&hypersurface_samples(&clifford, 256, 0, false).unwrap()).unwrap();
    let cert = hemisphere_test(&image, 1e-8).unwrap();
    let verified = cert.verify(&image);
    let residual = cert.dual_residual.unwrap_or(f64::INFINITY);
    let opts = ObstructionOptions::default();
    let r = constant_calibration_obstruction(&minimal_product(vec![clifford, Factor::Sphere { dim: 3 }]).unwrap(), &opts).unwrap();
    let eq = constant_calibration_obstruction(
        &minimal_product(vec![Factor::Equator { dim: 2 }, Factor::Sphere { dim: 1 }]).unwrap(),
        &opts,
    )
    .unwrap();
    let pass = cert.verdict == HemisphereVerdict::Infeasible
        && verified
        && residual <= 1e-8
        && r.obstructed
        && r.certificate_verified
        && eq.single_point
        && !eq.obstructed;
    outcome(
        pass,
        format!(
            "Clifford Gauss image ({} samples): {:?}, verified {verified}, residual {residual:.1e}; (S¹×S¹)×S³ obstructed {}; equator × S¹ single point {}",
            image.len(),
            cert.verdict,
            r.obstructed,
            eq.single_point
        ),
    )
}

fn wedge_bound() -> Outcome {
    let opts = ComassOptions::default();
    let rows: Vec<(f64, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(90_000 + i);
            let (n1, n2) = (2 + (i % 3) as usize, 2 + (i / 3 % 3) as usize);
            let (m1, m2) = (1 + (i % 2) as usize, 1 + (i / 2 % 2) as usize);
            let (m1, m2) = (m1.min(n1), m2.min(n2));
            let phi1 = random_form(&mut rng, n1, m1);
            let phi2 = random_form(&mut rng, n2, m2);
            let (g1, g2) = (random_metric(&mut rng, n1), random_metric(&mut rng, n2));
            let r = wedge_comass_check(&phi1, &g1, &phi2, &g2, &opts).unwrap();
            // rescale so that C₁ = C₂ = 1/(m₁+m₂)!
            let target = 1.0 / (1..=(m1 + m2)).product::<usize>() as f64;
            let s1 = phi1.scaled(target / r.c1);
            let s2 = phi2.scaled(target / r.c2);
            let small = wedge_comass_check(&s1, &g1, &s2, &g2, &opts).unwrap();
            let bound = wedge_comass_bound(small.c1, m1, small.c2, m2).unwrap();
            assert_eq!(binomial(m1 + m2, m1) as f64 * small.c1 * small.c2, bound);
            (r.measured - r.bound, small.measured, small.measured - bound)
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_small = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_small_gap = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-6 && worst_small_gap <= 1e-6 && worst_small <= 1.0,
        format!(
            "50 pairs; max(measured − bound) = {worst:.2e}; with C = 1/(m₁+m₂)!: max measured {worst_small:.3e}, max(measured − bound) = {worst_small_gap:.2e}"
        ),
    )
}

/// First computed n_pass for `S¹` under F-control, kept as a regression constant.
const FROZEN_N_PASS: usize = 12;

fn replication() -> Outcome {
    let io = IntegrationOptions::default();
    let runs: Vec<Option<usize>> = [0u64, 1]
        .par_iter()
        .map(|&seed| {
            let s = SamplingOptions { seed, ..Default::default() };
            replication_search(&Factor::Sphere { dim: 1 }, 12, Control::F, &s, &io).unwrap().n_pass
        })
        .collect();
    let pass = runs[0].is_some() && runs[0] == runs[1] && runs[0] == Some(FROZEN_N_PASS);
    outcome(pass, format!("n_pass seed 0 {:?}, seed 1 {:?}, frozen {FROZEN_N_PASS}", runs[0], runs[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("comass oracle equivalence", comass_oracles),
        ("gluing metrics sweep", gluing_sweep),
        ("decomposition round trip", decomposition_round_trip),
        ("Lawlor ODE convergence and ordering", lawlor_convergence),
        ("cone verdicts", cone_verdicts),
        ("profile surgery", profile_surgery),
        ("hemisphere obstruction", obstruction),
        ("wedge comass bound", wedge_bound),
        ("replication search", replication),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} [{name}] {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
