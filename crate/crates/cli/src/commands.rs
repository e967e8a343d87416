use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use fdm_core::io::{load_cloud, write_cloud, write_eigenfunctions, write_eigenvalues, write_matrix, Cell, MatrixKind, Report};
use fdm_core::kernels::{DistanceMode, EigenMethod, FdmConfig, GeneratorScale};
use fdm_core::manifolds::{
    circle_nonuniform_grid, circle_random, circle_uniform_grid, icosphere_size, interval_grid, sphere_icosphere_grid,
    truth_for, ManifoldTag, PointCloud,
};
use fdm_core::ridge::{indicator_experiment, logspace, CvOptions, DEFAULT_THRESHOLD_FLOOR};
use fdm_core::validation::{
    bandwidth_sweep, best_row, interval_comparison, pair_collapse, power_law_fit, SweepOptions,
};
use fdm_core::{run_fdm, Execution, SpectralResult};

use crate::args::{
    Distance, Experiment, FdmArgs, KrrArgs, Manifold, PipelineArgs, SampleArgs, SampleKind, Solver, ValidateArgs,
};
use crate::error::{failed, invalid, CliError};
use crate::output::{timestamp, write_stamped, Output};
use crate::svg::{Chart, Series};

pub struct Globals {
    pub reproducible: bool,
    pub exec: Execution,
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

fn default_dim(tag: ManifoldTag) -> Option<usize> {
    match tag {
        ManifoldTag::Circle | ManifoldTag::Interval => Some(1),
        ManifoldTag::Sphere => Some(2),
        ManifoldTag::External => None,
    }
}

fn parse_scale(s: &str) -> Result<GeneratorScale, CliError> {
    match s {
        "kernel" => Ok(GeneratorScale::Kernel),
        "unit" => Ok(GeneratorScale::Unit),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|c| *c > 0.0 && c.is_finite())
            .map(GeneratorScale::Custom)
            .ok_or_else(|| CliError::usage(format!("--generator-scale: expected kernel, unit or a positive number, got {s}"))),
    }
}

fn build_config(
    p: &PipelineArgs,
    beta: f64,
    eps: f64,
    tag: ManifoldTag,
    default_l: usize,
    exec: Execution,
) -> Result<FdmConfig, CliError> {
    let dim = match p.dim.or(default_dim(tag)) {
        Some(d) => d,
        None => return Err(CliError::usage("--dim is required for point clouds without a manifold tag")),
    };
    let mode = if p.analytic_geodesic {
        DistanceMode::AnalyticSphere
    } else {
        match p.distance.unwrap_or(Distance::Graph) {
            Distance::Graph => DistanceMode::GraphDijkstra,
            Distance::Analytic => DistanceMode::AnalyticSphere,
            Distance::Euclidean => DistanceMode::RawEuclidean,
        }
    };
    if mode == DistanceMode::AnalyticSphere && tag != ManifoldTag::Sphere {
        return Err(CliError::usage(format!("analytic geodesics need a sphere cloud, got {}", tag.name())));
    }
    let method = match p.solver.unwrap_or(Solver::Auto) {
        Solver::Auto => EigenMethod::Auto,
        Solver::Dense => EigenMethod::Dense,
        Solver::Lanczos => EigenMethod::Lanczos,
    };
    let mut c = FdmConfig::new(beta, eps)
        .with_dim(dim)
        .with_num_eigs(p.l.unwrap_or(default_l))
        .with_distance_mode(mode)
        .with_eigen_method(method)
        .with_execution(exec);
    if let Some(t) = p.graph_threshold {
        c = c.with_graph_threshold(t);
    }
    if let Some(b) = p.kde_bandwidth {
        c = c.with_kde_bandwidth(b);
    }
    if let Some(s) = &p.generator_scale {
        c = c.with_generator_scale(parse_scale(s)?);
    }
    c.validate().map_err(invalid)?;
    Ok(c)
}

/// All-pairs shortest paths on a level >= 5 icosphere takes minutes.
fn guard_long(cloud: &PointCloud, config: &FdmConfig, allow_long: bool) -> Result<(), CliError> {
    let long = !config.is_local()
        && config.distance_mode == DistanceMode::GraphDijkstra
        && cloud.tag == ManifoldTag::Sphere
        && cloud.len() >= icosphere_size(5);
    if long && !allow_long {
        return Err(CliError::usage(format!(
            "graph geodesics on {} sphere points take minutes; pass --allow-long or use --analytic-geodesic",
            cloud.len()
        )));
    }
    Ok(())
}

fn describe_branch(config: &FdmConfig) -> String {
    match config.alpha() {
        Some(alpha) => format!("branch: local (exponential kernel, alpha = {alpha}, Euclidean distances)"),
        None => {
            let dist = match config.distance_mode {
                DistanceMode::GraphDijkstra => format!("graph geodesics, threshold {:.6e}", config.graph_threshold()),
                DistanceMode::AnalyticSphere => "analytic great-circle geodesics".to_string(),
                DistanceMode::RawEuclidean => "Euclidean distances".to_string(),
            };
            format!("branch: nonlocal (polynomial kernel, {dist})")
        }
    }
}

fn sampled_cloud(
    manifold: Manifold,
    kind: Option<SampleKind>,
    n: Option<usize>,
    level: Option<u32>,
    seed: Option<u64>,
) -> Result<PointCloud, CliError> {
    let cloud = match manifold {
        Manifold::Circle => {
            if level.is_some() {
                return Err(CliError::usage("--level applies to the sphere only"));
            }
            let n = need(n, "n")?;
            match kind.unwrap_or(SampleKind::Uniform) {
                SampleKind::Uniform => circle_uniform_grid(n),
                SampleKind::Nonuniform => circle_nonuniform_grid(n),
                SampleKind::Random => circle_random(n, seed.unwrap_or(1)),
            }
        }
        Manifold::Sphere => {
            if n.is_some() {
                return Err(CliError::usage("the sphere size is set by --level, not --n"));
            }
            if kind.is_some_and(|k| k != SampleKind::Uniform) {
                return Err(CliError::usage("the sphere is sampled on an icosphere grid only"));
            }
            sphere_icosphere_grid(need(level, "level")?)
        }
        Manifold::Interval => {
            if level.is_some() || kind.is_some_and(|k| k != SampleKind::Uniform) {
                return Err(CliError::usage("the interval is sampled on a uniform grid only"));
            }
            interval_grid(need(n, "n")?)
        }
    };
    cloud.map_err(invalid)
}

pub fn sample(a: &SampleArgs, g: &Globals) -> Result<(), CliError> {
    let cloud = sampled_cloud(need(a.manifold, "manifold")?, a.kind, a.n, a.level, a.seed)?;
    let mut body = Vec::new();
    write_cloud(&mut body, &cloud).map_err(failed)?;
    let stamp = timestamp(g.reproducible);
    match &a.out {
        Some(path) => {
            write_stamped(path, stamp.as_deref(), &body)?;
            println!("wrote {} {} points to {}", cloud.len(), cloud.tag.name(), path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            let res = out
                .write_all(stamp.as_deref().unwrap_or("").as_bytes())
                .and_then(|_| out.write_all(&body))
                .and_then(|_| out.flush());
            res.map_err(|e| CliError::Pipeline(format!("cannot write to standard output: {e}")))?;
        }
    }
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> fdm_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(failed)?;
    Ok(buf)
}

fn spectrum_chart(result: &SpectralResult, truth: Option<Vec<f64>>, title: String) -> Chart {
    let est: Vec<(f64, f64)> = result.lambda.iter().enumerate().skip(1).map(|(j, l)| (j as f64, *l)).collect();
    let mut chart = Chart::new(title, "index j", "eigenvalue").log_log().with_series(Series::new("estimate", est));
    if let Some(t) = truth {
        let pts = t.iter().enumerate().skip(1).map(|(j, l)| (j as f64, *l)).collect();
        chart = chart.with_series(Series::new("analytic", pts).dashed());
    }
    chart
}

pub fn fdm(a: &FdmArgs, g: &Globals) -> Result<(), CliError> {
    let input = need(a.input.as_ref(), "input")?;
    let eps = need(a.eps, "eps")?;
    let beta = need(a.pipeline.beta, "beta")?;
    if !input.exists() {
        return Err(CliError::usage(format!("input file {} does not exist", input.display())));
    }
    let cloud = load_cloud(input).map_err(|e| CliError::usage(format!("cannot read {}: {e}", input.display())))?;
    let config = build_config(&a.pipeline, beta, eps, cloud.tag, 10, g.exec)?;
    guard_long(&cloud, &config, a.pipeline.allow_long)?;
    println!("{}", describe_branch(&config));

    let start = Instant::now();
    let (stack, result) = run_fdm(&cloud, &config).map_err(failed)?;
    let elapsed = start.elapsed().as_secs_f64();

    let out = Output::new(a.pipeline.out.clone().unwrap_or_else(|| PathBuf::from("fdm_out")), g.reproducible)?;
    out.text("eigenvalues.csv", &csv_bytes(|b| write_eigenvalues(b, &result))?)?;
    out.text("eigenfunctions.csv", &csv_bytes(|b| write_eigenfunctions(b, &result))?)?;
    if a.dump_heat {
        out.raw("heat.fdmd", &csv_bytes(|b| write_matrix(b, stack.h.view(), MatrixKind::Markov))?)?;
    }
    if a.pipeline.svg {
        let truth = truth_for(cloud.tag).map(|t| t.eigenvalues(result.lambda.len(), beta));
        let chart = spectrum_chart(&result, truth, format!("spectrum, beta = {beta}, eps = {eps:e}"));
        out.raw("spectrum.svg", chart.render().as_bytes())?;
    }
    let shown: Vec<String> = result.lambda.iter().skip(1).take(6).map(|l| format!("{l:.4}")).collect();
    println!("points: {}, eigenpairs: {}, t = {:.6e}", cloud.len(), result.lambda.len(), result.t);
    println!("lambda[1..]: {}", shown.join(", "));
    println!("elapsed: {elapsed:.3} s");
    println!("output: {}", out.dir.display());
    Ok(())
}

pub fn validate(a: &ValidateArgs, g: &Globals) -> Result<(), CliError> {
    match a.experiment.unwrap_or(Experiment::Sweep) {
        Experiment::Sweep => sweep(a, g),
        Experiment::Interval => interval(a, g),
    }
}

fn default_grid() -> Vec<f64> {
    (2..30).map(|k| 2f64.powf(-(k as f64) / 2.0)).collect()
}

fn sweep(a: &ValidateArgs, g: &Globals) -> Result<(), CliError> {
    let manifold = a.manifold.unwrap_or(Manifold::Circle);
    if manifold == Manifold::Interval {
        return Err(CliError::usage("sweeps run on the circle or the sphere; use --experiment interval"));
    }
    let (n, level) = match manifold {
        Manifold::Sphere => (a.n, Some(a.level.unwrap_or(4))),
        _ => (Some(a.n.unwrap_or(500)), a.level),
    };
    let cloud = sampled_cloud(manifold, a.kind, n, level, a.seed)?;
    let truth = truth_for(cloud.tag).expect("circle and sphere have analytic truth");
    let beta = a.pipeline.beta.unwrap_or(2.0);
    let grid = a.eps.clone().unwrap_or_else(default_grid);
    if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(CliError::usage("--eps must list positive bandwidths"));
    }
    let threshold = a.rmse_threshold.unwrap_or(0.2);
    if !(threshold > 0.0) {
        return Err(CliError::usage("--rmse-threshold must be positive"));
    }
    let floor = a.threshold_floor.unwrap_or(DEFAULT_THRESHOLD_FLOOR);
    let base = build_config(&a.pipeline, beta, grid[0], cloud.tag, 20, g.exec)?;
    guard_long(&cloud, &base, a.pipeline.allow_long)?;
    if base.num_eigs + 1 > cloud.len() {
        return Err(CliError::usage(format!("{} eigenpairs requested from {} points", base.num_eigs + 1, cloud.len())));
    }
    println!("{}", describe_branch(&base));
    let uses_graph = !base.is_local() && base.distance_mode == DistanceMode::GraphDijkstra;
    let opts = SweepOptions { graph_threshold_floor: (uses_graph && a.pipeline.graph_threshold.is_none()).then_some(floor) };

    let start = Instant::now();
    let rows = bandwidth_sweep(&cloud, &base, &grid, truth.as_ref(), opts).map_err(failed)?;
    let mut report = Report::new(&["epsilon", "mean_rmse", "count_below", "error"])
        .meta("manifold", cloud.tag.name())
        .meta("n", cloud.len())
        .meta("beta", beta)
        .meta("dim", base.dim)
        .meta("l", base.num_eigs)
        .meta("rmse_threshold", threshold)
        .meta("threshold_floor", opts.graph_threshold_floor);
    for r in &rows {
        let err = r.outcome.as_ref().err().map(|e| Cell::Text(e.clone())).unwrap_or(Cell::Missing);
        report.push(vec![r.epsilon.into(), r.mean_rmse().into(), r.count_below(threshold).into(), err]).map_err(failed)?;
    }
    let best = best_row(&rows, threshold)
        .ok_or_else(|| CliError::Pipeline("no bandwidth in the grid produced a valid run".into()))?;
    let best_eps = rows[best].epsilon;
    let mut best_cfg = base.clone().with_epsilon(best_eps);
    if let Some(f) = opts.graph_threshold_floor {
        best_cfg = best_cfg.with_graph_threshold(f.max(best_eps.sqrt()));
    }
    let (_, result) = run_fdm(&cloud, &best_cfg).map_err(failed)?;
    let elapsed = start.elapsed().as_secs_f64();

    let (fit_series, default_hi) = match cloud.tag {
        ManifoldTag::Circle => (pair_collapse(&result.lambda), 50),
        _ => (result.lambda.clone(), 100),
    };
    let lo = a.fit_lo.unwrap_or(2);
    let hi = a.fit_hi.unwrap_or(default_hi).min(fit_series.len().saturating_sub(1));
    let fit = if hi > lo { power_law_fit(&fit_series, lo, hi).ok() } else { None };
    let expected = beta / base.dim as f64;

    let out = Output::new(a.pipeline.out.clone().unwrap_or_else(|| PathBuf::from("validate_out")), g.reproducible)?;
    let mut body = Vec::new();
    report
        .meta("best_epsilon", best_eps)
        .meta("fit_slope", fit.map(|f| f.slope))
        .meta("expected_slope", expected)
        .write(&mut body)
        .map_err(failed)?;
    out.text("sweep.csv", &body)?;
    out.text("eigenvalues.csv", &csv_bytes(|b| write_eigenvalues(b, &result))?)?;
    if a.pipeline.svg {
        let pts = rows.iter().filter_map(|r| r.mean_rmse().map(|m| (r.epsilon, m))).collect();
        let chart = Chart::new(format!("mean eigenfunction RMSE, beta = {beta}"), "epsilon", "mean RMSE")
            .log_log()
            .with_series(Series::new("mean RMSE", pts));
        out.raw("rmse.svg", chart.render().as_bytes())?;
        let truth_vals = truth.eigenvalues(result.lambda.len(), beta);
        let chart = spectrum_chart(&result, Some(truth_vals), format!("spectrum at eps = {best_eps:.3e}"));
        out.raw("spectrum.svg", chart.render().as_bytes())?;
    }

    println!("bandwidths: {}, failed runs: {}", rows.len(), rows.iter().filter(|r| r.outcome.is_err()).count());
    println!(
        "best eps: {best_eps:.6e}, eigenfunctions below {threshold}: {}, mean RMSE {:.4}",
        rows[best].count_below(threshold).unwrap_or(0),
        rows[best].mean_rmse().unwrap_or(f64::NAN)
    );
    match fit {
        Some(f) => println!("power-law slope over j in [{lo}, {hi}]: {:.4} (expected {expected:.4}, r2 {:.4})", f.slope, f.r2),
        None => println!("power-law fit skipped (range [{lo}, {hi}] is empty)"),
    }
    println!("elapsed: {elapsed:.3} s");
    println!("output: {}", out.dir.display());
    Ok(())
}

fn interval(a: &ValidateArgs, g: &Globals) -> Result<(), CliError> {
    if a.manifold.is_some_and(|m| m != Manifold::Interval) {
        return Err(CliError::usage("the interval experiment runs on [0, 1]"));
    }
    let beta = a.pipeline.beta.unwrap_or(1.0);
    if beta != 1.0 {
        return Err(CliError::usage(format!("the interval experiment needs beta = 1, got {beta}")));
    }
    let eps = match a.eps.as_deref() {
        None => 2f64.powi(-12),
        Some([e]) => *e,
        Some(_) => return Err(CliError::usage("the interval experiment takes a single --eps")),
    };
    let n = a.n.unwrap_or(500);
    if n < 3 {
        return Err(CliError::usage("the interval experiment needs at least 3 points"));
    }
    let config = build_config(&a.pipeline, beta, eps, ManifoldTag::Interval, 1, g.exec)?;
    println!("{}", describe_branch(&config));
    let start = Instant::now();
    let cmp = interval_comparison(n, &config).map_err(failed)?;
    let elapsed = start.elapsed().as_secs_f64();
    let (to_reg, to_spec) = (cmp.fdm_to_regional(0.1, 0.9), cmp.fdm_to_spectral(0.1, 0.9));

    let mut report = Report::new(&["x", "fdm", "regional", "spectral"])
        .meta("experiment", "interval")
        .meta("n", n)
        .meta("beta", beta)
        .meta("epsilon", eps)
        .meta("l2_fdm_regional", to_reg)
        .meta("l2_fdm_spectral", to_spec);
    for i in 0..cmp.x.len() {
        report
            .push(vec![cmp.x[i].into(), cmp.fdm[i].into(), cmp.regional[i].into(), cmp.spectral[i].into()])
            .map_err(failed)?;
    }
    let out = Output::new(a.pipeline.out.clone().unwrap_or_else(|| PathBuf::from("validate_out")), g.reproducible)?;
    out.text("interval.csv", &csv_bytes(|b| report.write(b))?)?;
    if a.pipeline.svg {
        let curve = |v: &[f64]| cmp.x.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        let chart = Chart::new("generator of x^2 on [0, 1], min scaled to -1", "x", "value")
            .with_series(Series::new("FDM", curve(&cmp.fdm)))
            .with_series(Series::new("regional", curve(&cmp.regional)).dashed())
            .with_series(Series::new("spectral", curve(&cmp.spectral)).dashed());
        out.raw("interval.svg", chart.render().as_bytes())?;
    }
    println!("L2 distance on [0.1, 0.9]: to regional {to_reg:.4}, to spectral {to_spec:.4}");
    println!("elapsed: {elapsed:.3} s");
    println!("output: {}", out.dir.display());
    Ok(())
}

fn grid(explicit: &Option<Vec<f64>>, count: Option<usize>, lo: f64, hi: f64, default: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let g = match explicit {
        Some(v) => v.clone(),
        None => logspace(lo, hi, count.unwrap_or(default)),
    };
    if g.is_empty() || g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(CliError::usage(format!("--{flag} must give at least one positive value")));
    }
    Ok(g)
}

pub fn krr(a: &KrrArgs, g: &Globals) -> Result<(), CliError> {
    let n = a.n.unwrap_or(500);
    let sigma = a.sigma.unwrap_or(0.05);
    let seed = a.seed.unwrap_or(7);
    if n < 4 {
        return Err(CliError::usage("--n must be at least 4"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(CliError::usage("--sigma must be nonnegative"));
    }
    let floor = a.threshold_floor.unwrap_or(DEFAULT_THRESHOLD_FLOOR);
    if !(floor > 0.0) {
        return Err(CliError::usage("--threshold-floor must be positive"));
    }
    let options = CvOptions {
        epsilons: grid(&a.eps_grid, a.eps_count, -3.0, 0.0, 16, "eps-grid")?,
        deltas: grid(&a.delta_grid, a.delta_count, -20.0, -2.0, 19, "delta-grid")?,
        seed,
        graph_threshold_floor: Some(floor),
    };
    let start = Instant::now();
    let r = indicator_experiment(n, sigma, seed, &options, g.exec).map_err(failed)?;
    let elapsed = start.elapsed().as_secs_f64();

    let out = Output::new(a.out.clone().unwrap_or_else(|| PathBuf::from("krr_out")), g.reproducible)?;
    let mut summary = format!("n={n}\nsigma={sigma}\nseed={seed}\n");
    for f in &r.families {
        let name = f.family_name();
        summary.push_str(&format!(
            "{name}.beta={}\n{name}.epsilon={:e}\n{name}.delta={:e}\n{name}.cv_error={:e}\n\
             {name}.overshoot_zero={:e}\n{name}.overshoot_pi={:e}\n{name}.l2_error={:e}\n",
            f.beta, f.cv.epsilon, f.cv.delta, f.cv.error, f.overshoot_zero, f.overshoot_pi, f.l2_error
        ));
        let mut table = Report::new(&["epsilon", "delta", "error"]).meta("family", name).meta("beta", f.beta);
        for c in &f.cv.table {
            table.push(vec![c.epsilon.into(), c.delta.into(), c.error.into()]).map_err(failed)?;
        }
        out.text(&format!("krr_cv_{name}.csv"), &csv_bytes(|b| table.write(b))?)?;
    }
    out.text("krr_summary.txt", summary.as_bytes())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| r.theta[i].total_cmp(&r.theta[j]));
    let mut columns = vec!["theta", "f_true", "y"];
    let names: Vec<String> = r.families.iter().map(|f| format!("yhat_{}", f.family_name())).collect();
    columns.extend(names.iter().map(String::as_str));
    let mut curves = Report::new(&columns).meta("n", n).meta("sigma", sigma).meta("seed", seed);
    for &i in &order {
        let mut row: Vec<Cell> = vec![r.theta[i].into(), r.f_true[i].into(), r.y[i].into()];
        row.extend(r.families.iter().map(|f| Cell::from(f.y_hat[i])));
        curves.push(row).map_err(failed)?;
    }
    out.text("krr_curves.csv", &csv_bytes(|b| curves.write(b))?)?;
    if a.svg {
        let sorted = |v: &[f64]| order.iter().map(|&i| (r.theta[i], v[i])).collect::<Vec<_>>();
        let mut chart = Chart::new(format!("expected regression, N = {n}, sigma = {sigma}"), "theta", "value")
            .with_series(Series::new("indicator", sorted(&r.f_true)).dashed());
        for f in &r.families {
            chart = chart.with_series(Series::new(f.family_name(), sorted(&f.y_hat)));
        }
        out.raw("krr.svg", chart.render().as_bytes())?;
    }

    println!("{:<12} {:>10} {:>8} {:>11} {:>10} {:>10} {:>9}", "family", "epsilon", "delta", "cv error", "over(0)", "over(pi)", "L2");
    for f in &r.families {
        println!(
            "{:<12} {:>10.3e} {:>8.0e} {:>11.4e} {:>10.4} {:>10.4} {:>9.4}",
            f.family_name(),
            f.cv.epsilon,
            f.cv.delta,
            f.cv.error,
            f.overshoot_zero,
            f.overshoot_pi,
            f.l2_error
        );
    }
    println!("elapsed: {elapsed:.3} s");
    println!("output: {}", out.dir.display());
    Ok(())
}
