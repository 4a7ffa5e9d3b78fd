use std::path::Path;

use calibra::comass::{comass, comass_analytic, ComassOptions};
use calibra::gluing::{normalize_metric, uniform_grid, verify_gluing_bound, GluingOptions};
use calibra::io::LinkSpec;
use calibra::lawlor::{
    check_area_minimizing, integrate_fastest, vanishing_table, verify_profile, write_table_csv, Control,
    CurvatureModel, IntegrationOptions, LinkData, Normalization,
};
use calibra::obstruction::{
    constant_calibration_obstruction, gauss_image, hypersurface_samples, HemisphereVerdict, ObstructionOptions,
};
use calibra::product::{curvature_model, minimal_product, normal_radius, replication_search, Factor, SamplingOptions};
use serde::Serialize;
use serde_json::json;

use crate::job::Job;
use crate::output::{opt, Csv, OutputDir};
use crate::{Cli, CliError, Command, RunSummary, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

pub(crate) fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    if cli.command == Command::Validate {
        return validate(cli);
    }
    let spec = cli.spec.as_ref().ok_or_else(|| CliError::usage("--spec is required"))?;
    let out = cli.out.as_ref().ok_or_else(|| CliError::usage("--out is required"))?;
    let job = Job::read(spec)?;
    if let Some(c) = &job.file.command {
        if c != cli.command.name() {
            return Err(CliError::usage(format!("job file is for `{c}`, not `{}`", cli.command.name())));
        }
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(CliError::usage(format!("--tol must be positive, got {t}")));
        }
    }
    let mut dir = OutputDir::create(out)?;
    let summary = match cli.command {
        Command::Comass => run_comass(cli, &job, &mut dir)?,
        Command::GlueSweep => run_glue(cli, &job, &mut dir)?,
        Command::VanishingTable => run_table(cli, &job, &mut dir)?,
        Command::CertifyCone => run_certify(cli, &job, &mut dir)?,
        Command::Obstruct => run_obstruct(cli, &job, &mut dir)?,
        Command::Replicate => run_replicate(cli, &job, &mut dir)?,
        Command::Validate => unreachable!(),
    };
    dir.finish(&cli.header(), summary.code)?;
    Ok(summary)
}

fn integration(cli: &Cli) -> IntegrationOptions {
    let mut o = IntegrationOptions { normalization: Normalization::from(cli.normalization), ..Default::default() };
    if let Some(t) = cli.tol {
        o.ode.atol = t;
    }
    o
}

fn sampling(cli: &Cli) -> SamplingOptions {
    let mut s = SamplingOptions { seed: cli.seed, ..Default::default() };
    if let Some(n) = cli.grid {
        s.points = n;
    }
    s
}

fn done(code: i32, lines: Vec<String>) -> Result<RunSummary, CliError> {
    Ok(RunSummary { code, lines })
}

fn run_comass(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let phi = job.form("comass")?;
    let g = job.metric("metric", "comass")?;
    let mut opts = ComassOptions { seed: cli.seed, ..Default::default() };
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    let r = comass(&phi, &g, &opts)?;
    let analytic = comass_analytic(&phi, &g)?;
    let agrees = analytic.map(|a| (r.value - a).abs() <= 1e-6 * a.max(1.0));
    let factors: Vec<Vec<f64>> = r.maximizer.factors().iter().map(|v| v.iter().copied().collect()).collect();
    dir.write_json(
        "report.json",
        &json!({
            "job": cli.header(),
            "n": phi.dim(),
            "m": phi.degree(),
            "comass": r.value,
            "method": r.method,
            "restarts_used": r.restarts_used,
            "maximizer": factors,
            "analytic": analytic,
            "analytic_agrees": agrees,
        }),
    )?;
    let code = if agrees == Some(false) { EXIT_NUMERIC } else { EXIT_OK };
    let mut lines = vec![format!("comass {}", r.value)];
    if let Some(a) = analytic {
        lines.push(format!("analytic {a}"));
    }
    done(code, lines)
}

fn run_glue(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let phi = job.form("glue-sweep")?;
    let mut g1 = job.metric("metric1", "glue-sweep")?;
    let mut g2 = job.metric("metric2", "glue-sweep")?;
    let mut opts = GluingOptions::default();
    opts.comass.seed = cli.seed;
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    if job.file.normalize {
        g1 = normalize_metric(&phi, &g1, &opts.comass)?.0;
        g2 = normalize_metric(&phi, &g2, &opts.comass)?.0;
    }
    let grid = uniform_grid(cli.grid.unwrap_or(11));
    if grid.is_empty() {
        return Err(CliError::usage("--grid must be at least 1"));
    }
    let r = verify_gluing_bound(&phi, &g1, &g2, &grid, &opts)?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv).expect("in-memory write");
    dir.write("sweep.csv", &csv)?;
    if cli.plot_data {
        let mut long = Csv::new(&["s", "series", "value"]);
        for i in 0..r.s_grid.len() {
            for (name, v) in [
                ("comass", r.comass_values[i]),
                ("ccgp_bound", r.ccgp_bounds[i]),
                ("improved_bound", r.improved_bounds[i]),
            ] {
                long.row([r.s_grid[i].to_string(), name.to_string(), v.to_string()]);
            }
        }
        dir.write("sweep_long.csv", &long.into_bytes())?;
    }
    dir.write_json(
        "report.json",
        &json!({
            "job": cli.header(),
            "normalized_endpoints": job.file.normalize,
            "endpoint_comass": r.endpoint_comass,
            "worst_violation": r.worst_violation,
            "worst_improved_violation": r.worst_improved_violation,
            "worst_ccgp_violation": r.worst_ccgp_violation,
            "tol": r.tol,
            "passes": r.passes(),
        }),
    )?;
    done(
        EXIT_OK,
        vec![
            format!("max comass − 1 = {:e}", r.worst_violation),
            format!("bound respected: {}", r.passes()),
        ],
    )
}

fn run_table(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let ks = job.file.ks.clone().unwrap_or_else(|| (2..=8).collect());
    let alphas = match &job.file.alphas {
        Some(a) => a.clone(),
        None => (1..=cli.grid.unwrap_or(8)).map(|i| 0.25 * i as f64).collect(),
    };
    if ks.is_empty() || alphas.is_empty() {
        return Err(CliError::usage("vanishing-table needs at least one k and one α"));
    }
    let opts = integration(cli);
    let rows = vanishing_table(&ks, &alphas, &opts)?;
    let mut csv = Vec::new();
    write_table_csv(&rows, &mut csv).expect("in-memory write");
    dir.write("table.csv", &csv)?;
    if cli.plot_data {
        let mut long = Csv::new(&["k", "alpha", "control", "t", "h"]);
        for &k in &ks {
            for &alpha in &alphas {
                for control in [Control::F, Control::C] {
                    let p = integrate_fastest(&CurvatureModel::with_control(k, alpha, control)?, &opts)?;
                    let last = p.t_samples.len() - 1;
                    for i in (0..=last).filter(|&i| i % 20 == 0 || i == last) {
                        long.row([
                            k.to_string(),
                            alpha.to_string(),
                            control.to_string(),
                            p.t_samples[i].to_string(),
                            p.h_values[i].to_string(),
                        ]);
                    }
                }
            }
        }
        dir.write("profiles_long.csv", &long.into_bytes())?;
    }
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    dir.write_json(
        "report.json",
        &json!({
            "job": cli.header(),
            "ks": ks,
            "alphas": alphas,
            "ode_atol": opts.ode.atol,
            "rows": rows.len(),
            "without_converged_angle": unconverged,
        }),
    )?;
    done(EXIT_OK, vec![format!("{} rows, {} without a converged angle", rows.len(), unconverged)])
}

#[derive(Serialize)]
struct LinkSummary {
    k: usize,
    ambient_dim: usize,
    factors: usize,
    lambdas: Vec<f64>,
}

fn run_certify(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let control: Control = cli.control.map(Into::into).unwrap_or(Control::Custom);
    let opts = integration(cli);
    let (data, model_for_profile, extra) = if let Some(m) = &job.file.model {
        let model = m.model()?;
        let data = LinkData {
            k: m.k,
            ambient_dim: m.ambient_dim,
            alpha: m.alpha,
            curvature: Some(model.clone()),
            normal_radius: Some(m.normal_radius),
        };
        (data, model, json!({ "source": "model", "p_coeffs": m.p_coeffs }))
    } else {
        let link = minimal_product(job.link("certify-cone")?.resolve_factors(&job.base)?)?;
        let s = sampling(cli);
        let est = curvature_model(&link, &s)?;
        let radius = normal_radius(&link, &s)?;
        let data = LinkData {
            k: link.k,
            ambient_dim: link.ambient_sphere_dim + 1,
            alpha: est.alpha,
            curvature: Some(est.model.clone()),
            normal_radius: Some(radius.value),
        };
        let extra = json!({
            "source": "link",
            "link": LinkSummary {
                k: link.k,
                ambient_dim: link.ambient_sphere_dim + 1,
                factors: link.factors.len(),
                lambdas: link.lambdas.clone(),
            },
            "sampling": s,
            "curvature": {
                "alpha": est.alpha,
                "p2": est.p2,
                "kappa_max": est.kappa_max,
                "max_mean_curvature": est.max_mean_curvature,
                "samples": est.samples,
                "spectra": est.spectra,
            },
            "normal_radius": radius,
        });
        if radius.flagged {
            dir.write_json("report.json", &json!({ "job": cli.header(), "inputs": extra, "error": "normal radius flagged" }))?;
            return Err(CliError::numeric("normal radius estimate flagged: sampling too sparse"));
        }
        (data, est.model, extra)
    };
    let model = match control {
        Control::Custom => model_for_profile,
        c => CurvatureModel::with_control(data.k, data.alpha, c)?,
    };
    let verdict = check_area_minimizing(&data, control, &opts)?;
    let profile = integrate_fastest(&model, &opts)?;
    let check = verify_profile(&profile, &model);
    let verified = !verdict.passes || (check.ok && profile.theta == verdict.theta_used);
    let mut csv = Csv::new(&["t", "h"]);
    for (t, h) in profile.t_samples.iter().zip(&profile.h_values) {
        csv.row([t.to_string(), h.to_string()]);
    }
    dir.write("profile.csv", &csv.into_bytes())?;
    if cli.plot_data {
        let mut long = Csv::new(&["t", "series", "value"]);
        for (t, h) in profile.t_samples.iter().zip(&profile.h_values) {
            long.row([t.to_string(), "h".into(), h.to_string()]);
            let upper = model.discriminant(*t, 0.0).max(0.0).sqrt();
            long.row([t.to_string(), "band_upper".into(), upper.to_string()]);
        }
        dir.write("profile_long.csv", &long.into_bytes())?;
    }
    dir.write_json(
        "report.json",
        &json!({
            "job": cli.header(),
            "inputs": extra,
            "alpha": data.alpha,
            "status": verdict.status(),
            "verdict": verdict,
            "profile_check": check,
            "verified": verified,
        }),
    )?;
    let lines = vec![
        format!("verdict {}", verdict.status()),
        format!("theta {}", opt(verdict.theta_used)),
        format!("R/2 {}", verdict.r_half),
        format!("margin {}", opt(verdict.margin)),
    ];
    done(if verified { EXIT_OK } else { EXIT_NUMERIC }, lines)
}

fn run_obstruct(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let factors = job.link("obstruct")?.resolve_factors(&job.base)?;
    if factors.len() < 2 {
        return Err(CliError::usage("obstruct needs a product link with at least two factors"));
    }
    let product = minimal_product(factors)?;
    let mut opts = ObstructionOptions { seed: cli.seed, ..Default::default() };
    if let Some(n) = cli.grid {
        opts.samples = n;
    }
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    let r = constant_calibration_obstruction(&product, &opts)?;
    let image = gauss_image(&hypersurface_samples(&product.factors[0], opts.samples, opts.seed, false)?)?;
    let mut header: Vec<String> = vec!["index".into()];
    header.extend((1..=image.ambient_len()).map(|i| format!("n{i}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, p) in image.points.iter().enumerate() {
        csv.row(std::iter::once(i.to_string()).chain(p.iter().map(|x| x.to_string())));
    }
    dir.write("gauss_image.csv", &csv.into_bytes())?;
    dir.write_json("report.json", &json!({ "job": cli.header(), "report": r }))?;
    let code = if r.certificate.verdict == HemisphereVerdict::Boundary || (r.obstructed && !r.certificate_verified) {
        EXIT_NUMERIC
    } else {
        EXIT_OK
    };
    done(
        code,
        vec![
            format!("obstructed {}", r.obstructed),
            format!("hemisphere {:?}", r.certificate.verdict),
            format!("single point {}", r.single_point),
        ],
    )
}

fn run_replicate(cli: &Cli, job: &Job, dir: &mut OutputDir) -> Result<RunSummary, CliError> {
    let base = job.base_link("replicate")?.resolve(&job.base)?;
    let n_max = job.file.n_max.unwrap_or(12);
    let control: Control = cli.control.map(Into::into).unwrap_or(Control::F);
    if control == Control::Custom {
        return Err(CliError::usage("replicate supports the F and c controls"));
    }
    let r = replication_search(&base, n_max, control, &sampling(cli), &integration(cli))?;
    let mut csv = Csv::new(&["n", "k", "alpha", "normal_radius", "binding", "theta", "margin", "passes"]);
    for e in &r.entries {
        csv.row([
            e.n.to_string(),
            e.k.to_string(),
            e.alpha.to_string(),
            e.normal_radius.value.to_string(),
            format!("{:?}", e.normal_radius.binding),
            opt(e.verdict.theta_used),
            opt(e.verdict.margin),
            e.verdict.passes.to_string(),
        ]);
    }
    dir.write("replicate.csv", &csv.into_bytes())?;
    dir.write_json("report.json", &json!({ "job": cli.header(), "n_max": n_max, "result": r }))?;
    done(EXIT_OK, vec![format!("n_pass {}", r.n_pass.map(|n| n.to_string()).unwrap_or_else(|| "none".into()))])
}

#[derive(Clone, Debug, Serialize)]
struct Diagnostic {
    fatal: bool,
    item: String,
    message: String,
}

fn check_link(spec: &LinkSpec, base: &Path, item: &str, diags: &mut Vec<Diagnostic>) {
    let mut push = |fatal, message: String| diags.push(Diagnostic { fatal, item: item.to_string(), message });
    match spec.resolve(base) {
        Err(e) => push(true, e.to_string()),
        Ok(f) => {
            check_factor(&f, &mut push);
        }
    }
}

fn check_factor(f: &Factor, push: &mut impl FnMut(bool, String)) {
    match f {
        Factor::Sampled(s) => {
            for (i, msg) in s.diagnostics() {
                push(false, format!("sample {i}: {msg}"));
            }
        }
        Factor::Product(cs) if !cs.is_empty() => cs.iter().for_each(|c| check_factor(c, push)),
        _ => {
            if let Err(e) = f.validate() {
                push(true, e.to_string());
            }
        }
    }
}

fn validate(cli: &Cli) -> Result<RunSummary, CliError> {
    let spec = cli.spec.as_ref().ok_or_else(|| CliError::usage("--spec is required"))?;
    let mut diags = Vec::new();
    let fatal = |item: &str, e: String| Diagnostic { fatal: true, item: item.to_string(), message: e };
    match Job::read(spec) {
        Err(e) => diags.push(fatal("spec", e.message)),
        Ok(job) => {
            let f = &job.file;
            let form = f.form.as_ref().map(|s| s.load(&job.base).and_then(|x| x.to_form()));
            let form_dim = match &form {
                Some(Ok(phi)) => Some(phi.dim()),
                Some(Err(e)) => {
                    diags.push(fatal("form", e.to_string()));
                    None
                }
                None => None,
            };
            for (name, src) in [("metric", &f.metric), ("metric1", &f.metric1), ("metric2", &f.metric2)] {
                match src.as_ref().map(|s| s.load(&job.base).and_then(|m| m.to_metric())) {
                    Some(Ok(g)) => {
                        if let Some(n) = form_dim.filter(|&n| n != g.dim()) {
                            diags.push(fatal(name, format!("metric is on ℝ^{} but the form is on ℝ^{n}", g.dim())));
                        }
                    }
                    Some(Err(e)) => diags.push(fatal(name, e.to_string())),
                    None => {}
                }
            }
            if let Some(ks) = &f.ks {
                if ks.contains(&0) {
                    diags.push(fatal("ks", "link dimensions must be ≥ 1".into()));
                }
            }
            if let Some(a) = f.alphas.as_ref().and_then(|a| a.iter().find(|a| !(**a >= 0.0))) {
                diags.push(fatal("alphas", format!("α = {a} must be ≥ 0")));
            }
            if let Some(m) = &f.model {
                if let Err(e) = m.model() {
                    diags.push(fatal("model", e.to_string()));
                }
                if !(m.normal_radius > 0.0) {
                    diags.push(fatal("model", format!("normal radius {} must be positive", m.normal_radius)));
                }
            }
            for (name, l) in [("link", &f.link), ("base", &f.base)] {
                if let Some(l) = l {
                    check_link(l, &job.base, name, &mut diags);
                }
            }
        }
    }
    let any_fatal = diags.iter().any(|d| d.fatal);
    let lines: Vec<String> = if diags.is_empty() {
        vec!["ok".into()]
    } else {
        diags
            .iter()
            .map(|d| format!("{} [{}] {}", if d.fatal { "fatal" } else { "warning" }, d.item, d.message))
            .collect()
    };
    if let Some(out) = &cli.out {
        let mut dir = OutputDir::create(out)?;
        dir.write_json("diagnostics.json", &json!({ "job": cli.header(), "diagnostics": diags, "fatal": any_fatal }))?;
        dir.finish(&cli.header(), if any_fatal { EXIT_USAGE } else { EXIT_OK })?;
    }
    done(if any_fatal { EXIT_USAGE } else { EXIT_OK }, lines)
}
