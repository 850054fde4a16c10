//! The five subcommands.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nhpp_shrink::posterior::{write_estimates_csv, PosteriorSummary, ShapePosterior, LAMBDA_GRID_CELLS};
use nhpp_shrink::predict::{predictive_count_params, predictive_point_logdensity, DEFAULT_REPLICATES};
use nhpp_shrink::risk::{
    domination_study, lemma1_check, lemma3_check, lemma3_grid, log_grid, paired_estimation_risk,
    predictive_risk_mc, theorem3_check, RiskEntry, RiskReport, StudySetup,
};
use nhpp_shrink::simulate::{sample_nhpp, sample_nhpp_thinning};
use nhpp_shrink::{BaseMeasure, IntensityModel, KernelSpec, McmcConfig, PointPattern, PriorSpec, RngStream, Window};
use serde::Serialize;

use crate::config::{
    resolve_seed, EstimateArgs, Figure1Args, ModelArgs, Param, PredictArgs, RiskArgs, SimulateArgs,
};
use crate::parse::{kernel_for, parse_beta, parse_intensity, parse_window};
use crate::svg::{Curve, Plot};
use crate::CliError;

/// The observed pattern of the published example.
pub const FIGURE1_PATTERN: [f64; 10] = [0.29, 1.55, 2.06, 2.85, 2.87, 3.60, 5.55, 5.61, 5.65, 6.01];

const LEMMA1_TOLERANCE: f64 = 1e-6;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Runs `f` on the file at `path`, or on stdout.
fn with_output<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_err(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| io_err(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush().map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_pattern(path: &Path, window: Window) -> Result<PointPattern, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    PointPattern::read_csv(window, file).map_err(|e| io_err(path, e))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

pub fn simulate(args: &mut SimulateArgs) -> Result<(), CliError> {
    let window = parse_window(args.window.get_or_insert_with(|| "circle".into()))?;
    let model = parse_intensity(args.intensity.get_or_insert_with(|| "sine2".into()), window)?;
    let exposure = positive("exposure", *args.exposure.get_or_insert(1.0))?;
    let seed = resolve_seed(args.seed)?;
    args.seed = Some(seed);
    let mut rng = RngStream::new(seed, 0).rng();
    let pattern = match args.method.get_or_insert_with(|| "inversion".into()).as_str() {
        "inversion" => sample_nhpp(&model, exposure, &mut rng)?,
        "thinning" => sample_nhpp_thinning(&model, exposure, None, &mut rng)?,
        other => return Err(CliError::Config(format!("unknown method `{other}`"))),
    };
    crate::echo_config(&*args);
    with_output(args.output.as_deref(), |w| Ok(pattern.write_csv(w)?))?;
    eprintln!("N = {} (seed {seed})", pattern.count());
    Ok(())
}

/// Everything `estimate` and `predict` build from [`ModelArgs`].
struct Model {
    window: Window,
    kernel: KernelSpec,
    priors: Vec<PriorSpec>,
    s: f64,
    mcmc: McmcConfig,
    seed: u64,
}

impl ModelArgs {
    /// Fills in defaults (so the echo is complete) and builds the model.
    fn resolve(&mut self) -> Result<Model, CliError> {
        let window = parse_window(self.window.get_or_insert_with(|| "circle".into()))?;
        if window.is_circle() && self.sigma.is_none() {
            self.kappa.get_or_insert(5.0);
        }
        let kernel = kernel_for(window, self.kappa, self.sigma)?;
        let density = positive("base_density", *self.base_density.get_or_insert(1.0))?;
        let beta = parse_beta(&self.beta.get_or_insert_with(|| Param::Name("improper".into())).to_string())?;
        let base = PriorSpec::new(BaseMeasure::uniform(window, density)?, beta, 0.0)?;
        let gammas = self
            .gammas
            .get_or_insert_with(|| vec![Param::Number(0.0), Param::Name("shrinkage".into())]);
        let priors = resolve_gammas(&base, gammas)?;
        let s = positive("s", *self.s.get_or_insert(1.0))?;
        let d = McmcConfig::default();
        let mcmc = McmcConfig {
            burn_in: *self.burn_in.get_or_insert(d.burn_in),
            samples: *self.samples.get_or_insert(d.samples),
            thin: *self.thin.get_or_insert(d.thin),
            aux_components: *self.aux_components.get_or_insert(d.aux_components),
            location_step: *self.location_step.get_or_insert(d.location_step),
        };
        mcmc.validate()?;
        let seed = resolve_seed(self.seed)?;
        self.seed = Some(seed);
        Ok(Model {
            window,
            kernel,
            priors,
            s,
            mcmc,
            seed,
        })
    }
}

fn resolve_gammas(base: &PriorSpec, gammas: &[Param]) -> Result<Vec<PriorSpec>, CliError> {
    if gammas.is_empty() {
        return Err(CliError::Config("gammas must not be empty".into()));
    }
    gammas
        .iter()
        .map(|g| {
            let value = match g {
                Param::Number(v) => *v,
                Param::Name(n) if n == "shrinkage" => base.shrinkage_gamma(),
                Param::Name(n) => return Err(CliError::Config(format!("gamma `{n}`: expected a number or `shrinkage`"))),
            };
            Ok(base.with_gamma(value)?)
        })
        .collect()
}

#[derive(Serialize)]
struct EstimateRow {
    gamma: f64,
    weight_mean: f64,
    integral: f64,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    n: usize,
    s: f64,
    abs_alpha: f64,
    rows: Vec<EstimateRow>,
    estimates: &'a [PosteriorSummary],
}

fn fit(pattern: &PointPattern, model: &Model) -> Result<ShapePosterior, CliError> {
    let mut rng = RngStream::new(model.seed, 0).rng();
    Ok(ShapePosterior::fit(
        pattern,
        &model.priors[0],
        &model.kernel,
        &model.mcmc,
        LAMBDA_GRID_CELLS,
        &mut rng,
    )?)
}

fn diagnostics_gate(shape: &ShapePosterior) -> Result<(), CliError> {
    let d = &shape.diagnostics;
    if d.passes() {
        return Ok(());
    }
    Err(CliError::Diagnostic(format!(
        "MCMC diagnostics failed: acceptance {:?}; {}",
        d.acceptance_rate,
        d.warnings.join("; ")
    )))
}

fn estimate_plot(
    summaries: &[PosteriorSummary],
    abs_alpha: f64,
    truth: Option<&IntensityModel>,
    ticks: &[f64],
) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let window = summaries[0].lambda_hat.window();
    let xs = summaries[0].lambda_hat.nodes();
    let truth_ys: Option<Vec<f64>> = truth.map(|m| xs.iter().map(|&x| m.eval(x)).collect());
    let labels: Vec<String> = summaries
        .iter()
        .map(|s| {
            if (s.gamma - (abs_alpha - 1.0)).abs() < 1e-12 {
                format!("gamma = |alpha| - 1 = {:.4} (shrinkage)", s.gamma)
            } else {
                format!("gamma = {}", s.gamma)
            }
        })
        .collect();
    let mut curves = Vec::new();
    if let Some(ys) = &truth_ys {
        curves.push(Curve {
            label: "true intensity",
            color: "black",
            dashed: true,
            xs: &xs,
            ys,
        });
    }
    for (i, s) in summaries.iter().enumerate() {
        curves.push(Curve {
            label: &labels[i],
            color: COLORS[i % COLORS.len()],
            dashed: false,
            xs: &xs,
            ys: s.lambda_hat.values(),
        });
    }
    Plot {
        title: "Bayes estimates of the intensity",
        x_label: "u",
        y_label: "intensity",
        x_range: (window.start(), window.start() + window.length()),
        curves,
        ticks,
    }
    .render()
}

fn print_rows(rows: &[EstimateRow]) {
    eprintln!("{:>12} {:>14} {:>14}", "gamma", "weight_mean", "integral");
    for r in rows {
        eprintln!("{:>12.6} {:>14.6} {:>14.6}", r.gamma, r.weight_mean, r.integral);
    }
}

fn summarize(shape: &ShapePosterior, model: &Model) -> Result<(Vec<PosteriorSummary>, Vec<EstimateRow>), CliError> {
    let summaries = model
        .priors
        .iter()
        .map(|p| shape.summary(p, model.s))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = summaries
        .iter()
        .map(|s| EstimateRow {
            gamma: s.gamma,
            weight_mean: s.weight_mean,
            integral: s.lambda_hat.integral(),
        })
        .collect();
    Ok((summaries, rows))
}

pub fn estimate(args: &mut EstimateArgs) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let path = args
        .pattern
        .clone()
        .ok_or_else(|| CliError::Config("--pattern is required".into()))?;
    let truth = args
        .truth
        .as_deref()
        .map(|t| parse_intensity(t, model.window))
        .transpose()?;
    let pattern = read_pattern(&path, model.window)?;
    crate::echo_config(&*args);

    let shape = fit(&pattern, &model)?;
    let (summaries, rows) = summarize(&shape, &model)?;
    let abs_alpha = model.priors[0].abs_alpha();
    if args.csv.is_some() || (args.json.is_none() && args.svg.is_none()) {
        with_output(args.csv.as_deref(), |w| Ok(write_estimates_csv(&summaries, w)?))?;
    }
    if let Some(p) = &args.json {
        let report = EstimateReport {
            n: pattern.count(),
            s: model.s,
            abs_alpha,
            rows,
            estimates: &summaries,
        };
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
        write_text(p, &text)?;
        print_rows(&report.rows);
    } else {
        print_rows(&rows);
    }
    if let Some(p) = &args.svg {
        write_text(p, &estimate_plot(&summaries, abs_alpha, truth.as_ref(), pattern.points()))?;
    }
    diagnostics_gate(&shape)
}

pub fn predict(args: &mut PredictArgs) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let path = args
        .pattern
        .clone()
        .ok_or_else(|| CliError::Config("--pattern is required".into()))?;
    let futures = args
        .future
        .clone()
        .filter(|f| !f.is_empty())
        .ok_or_else(|| CliError::Config("--future needs at least one pattern".into()))?;
    let t = positive("t", *args.t.get_or_insert(1.0))?;
    let replicates = *args.replicates.get_or_insert(DEFAULT_REPLICATES);
    if replicates == 0 {
        return Err(CliError::Config("replicates must be at least 1".into()));
    }
    let observed = read_pattern(&path, model.window)?;
    let futures = futures
        .iter()
        .map(|p| Ok((p.clone(), read_pattern(p, model.window)?)))
        .collect::<Result<Vec<(PathBuf, PointPattern)>, CliError>>()?;
    crate::echo_config(&*args);

    let shape = fit(&observed, &model)?;
    let stream = RngStream::new(model.seed, 0);
    let mut rows = Vec::new();
    for (i, (p, future)) in futures.iter().enumerate() {
        let mut rng = stream.derive(i as u64 + 1).rng();
        // the point layer does not depend on γ or β
        let point = predictive_point_logdensity(
            &shape.draws,
            &model.priors[0],
            &model.kernel,
            future.points(),
            replicates,
            &mut rng,
        )?;
        for prior in &model.priors {
            let layer = predictive_count_params(prior, observed.count(), model.s, t)?;
            let count_log = layer.log_pmf(future.count() as u64);
            rows.push((p.display().to_string(), future.count(), prior.gamma(), count_log, point.log_density));
        }
    }
    with_output(args.output.as_deref(), |w| {
        writeln!(w, "future,m,gamma,count_log,point_log,log_score").map_err(|e| CliError::Config(e.to_string()))?;
        for (f, m, g, c, pl) in &rows {
            writeln!(w, "{f},{m},{g},{c},{pl},{}", c + pl).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    })?;
    eprintln!("scored {} future pattern(s) under {} prior(s)", futures.len(), model.priors.len());
    diagnostics_gate(&shape)
}

fn risk_window_and_truth(args: &mut RiskArgs) -> Result<(Window, IntensityModel, KernelSpec), CliError> {
    let window = parse_window(args.window.get_or_insert_with(|| "circle".into()))?;
    let truth = parse_intensity(args.truth.get_or_insert_with(|| "sine2".into()), window)?;
    if window.is_circle() && args.sigma.is_none() {
        args.kappa.get_or_insert(5.0);
    }
    let kernel = kernel_for(window, args.kappa, args.sigma)?;
    Ok((window, truth, kernel))
}

fn lemma1_report() -> Result<(RiskReport, bool), CliError> {
    let hs: [(&str, fn(u64) -> f64); 3] = [
        ("n", |n| n as f64),
        ("n^2", |n| (n * n) as f64),
        ("log(n+1)", |n| (n as f64 + 1.0).ln()),
    ];
    let mut report = RiskReport::default();
    let mut ok = true;
    for (name, h) in hs {
        for w in [0.5, 2.0, 10.0] {
            for tau in [0.5, 2.0, 10.0] {
                let (numeric, identity) = lemma1_check(w, tau, h)?;
                ok &= (numeric - identity).abs() <= LEMMA1_TOLERANCE * identity.abs();
                report.entries.push(RiskEntry {
                    label: format!("h={name};w={w};tau={tau}"),
                    estimate: numeric,
                    std_error: 0.0,
                    replications: 1,
                    exact: Some(identity),
                });
            }
        }
    }
    report
        .notes
        .push(format!("central difference vs identity, relative tolerance {LEMMA1_TOLERANCE}"));
    Ok((report, ok))
}

fn lemma3_report() -> Result<(RiskReport, bool), CliError> {
    let mut report = RiskReport::default();
    let mut ok = true;
    for (theta, c) in lemma3_grid() {
        let (lhs, rhs) = lemma3_check(theta, c)?;
        ok &= lhs < rhs;
        report.entries.push(RiskEntry {
            label: format!("theta={theta};c={c}"),
            estimate: lhs,
            std_error: 0.0,
            replications: 1,
            exact: Some(rhs),
        });
    }
    report.notes.push("estimate = left side, exact = bound; gate needs estimate < exact".into());
    Ok((report, ok))
}

pub fn risk(args: &mut RiskArgs) -> Result<(), CliError> {
    let mode = match (args.check.clone(), args.study.clone()) {
        (Some(c), None) => c,
        (None, Some(s)) => s,
        _ => return Err(CliError::Config("give exactly one of --check or --study".into())),
    };
    let is_check = args.check.is_some();
    let is_study = matches!(mode.as_str(), "estimation" | "predictive");
    if is_check && is_study {
        return Err(CliError::Config(format!("`{mode}` is a study, not a check")));
    }
    if !is_check && !is_study {
        return Err(CliError::Config(format!("unknown study `{mode}`")));
    }
    let seed = resolve_seed(args.seed)?;
    args.seed = Some(seed);
    let abs_alpha = positive("abs_alpha", *args.abs_alpha.get_or_insert(TAU))?;
    let tau = positive("tau", *args.tau.get_or_insert(1.0))?;
    let s = positive("s", *args.s.get_or_insert(1.0))?;
    let t = positive("t", *args.t.get_or_insert(1.0))?;
    let replications = *args.replications.get_or_insert(2000);
    let h = McmcConfig::harness();
    let mcmc = McmcConfig {
        burn_in: *args.burn_in.get_or_insert(h.burn_in),
        samples: *args.samples.get_or_insert(h.samples),
        thin: *args.thin.get_or_insert(h.thin),
        ..h
    };
    mcmc.validate()?;

    let (report, passed) = match mode.as_str() {
        "lemma1" => {
            crate::echo_config(&*args);
            lemma1_report()?
        }
        "lemma3" => {
            crate::echo_config(&*args);
            lemma3_report()?
        }
        "theorem4" => {
            let w_grid = args.w_grid.get_or_insert_with(|| log_grid(0.01, 100.0, 20)).clone();
            let gammas = args.gammas.get_or_insert_with(|| vec![Param::Number(0.0)]).clone();
            crate::echo_config(&*args);
            let pairs = gammas
                .iter()
                .map(|g| match g {
                    Param::Number(v) => Ok((*v, abs_alpha - 1.0)),
                    Param::Name(n) => Err(CliError::Config(format!("theorem4 needs numeric gammas, got `{n}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = domination_study(abs_alpha, &pairs, &w_grid, tau)?;
            let ok = !report.entries.is_empty() && report.entries.iter().all(|e| e.estimate > 0.0);
            (report, ok)
        }
        "theorem3" | "estimation" | "predictive" => {
            let (window, truth, kernel) = risk_window_and_truth(args)?;
            let default_gammas = if mode == "theorem3" {
                vec![Param::Name("shrinkage".into())]
            } else {
                vec![Param::Number(0.0), Param::Name("shrinkage".into())]
            };
            let gammas = args.gammas.get_or_insert(default_gammas).clone();
            crate::echo_config(&*args);
            let base = PriorSpec::improper_uniform(window, abs_alpha / window.length(), 0.0)?;
            let priors = resolve_gammas(&base, &gammas)?;
            let setup = StudySetup {
                truth: &truth,
                kernel: &kernel,
                config: mcmc,
                replications,
                stream: RngStream::new(seed, 0),
            };
            match mode.as_str() {
                "theorem3" => {
                    let mut report = RiskReport::default();
                    let mut ok = true;
                    for (i, prior) in priors.iter().enumerate() {
                        let check = theorem3_check(
                            &StudySetup {
                                stream: setup.stream.derive(i as u64 + 1),
                                ..setup.clone()
                            },
                            prior,
                            s,
                            t,
                        )?;
                        ok &= check.passes();
                        let mut r = check.report();
                        for e in &mut r.entries {
                            e.label = format!("gamma={};{}", prior.gamma(), e.label);
                        }
                        report.entries.extend(r.entries);
                        report.notes.extend(r.notes);
                        report.tau_grid = r.tau_grid;
                    }
                    (report, ok)
                }
                "estimation" => (paired_estimation_risk(&setup, &priors, s)?, true),
                _ => {
                    let mut report = RiskReport::default();
                    for (i, prior) in priors.iter().enumerate() {
                        let arm = StudySetup {
                            stream: setup.stream.derive(i as u64 + 1),
                            ..setup.clone()
                        };
                        let mut e = predictive_risk_mc(&arm, prior, s, t)?;
                        e.label = format!("gamma={};{}", prior.gamma(), e.label);
                        report.entries.push(e);
                    }
                    (report, true)
                }
            }
        }
        other => return Err(CliError::Config(format!("unknown check `{other}`"))),
    };

    if args.csv.is_some() || args.json.is_none() {
        with_output(args.csv.as_deref(), |w| Ok(report.write_csv(w)?))?;
    }
    if let Some(p) = &args.json {
        write_text(p, &report.to_json()?)?;
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    if is_check {
        let verdict = if passed { "PASS" } else { "FAIL" };
        eprintln!("{mode}: {verdict} ({} entries)", report.entries.len());
        if !passed {
            return Err(CliError::Gate(format!("{mode} gate failed")));
        }
    }
    Ok(())
}

pub fn figure1(args: &mut Figure1Args) -> Result<(), CliError> {
    let dir = args.out_dir.get_or_insert_with(|| PathBuf::from(".")).clone();
    let seed = resolve_seed(args.seed)?;
    args.seed = Some(seed);
    crate::echo_config(&*args);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;

    let mut model_args = ModelArgs {
        seed: Some(seed),
        ..Default::default()
    };
    let model = model_args.resolve()?;
    let pattern = PointPattern::new(Window::Circle, FIGURE1_PATTERN.to_vec())?;
    let shape = fit(&pattern, &model)?;
    let (summaries, rows) = summarize(&shape, &model)?;
    let abs_alpha = model.priors[0].abs_alpha();

    let pattern_path = dir.join("figure1_pattern.csv");
    with_output(Some(&pattern_path), |w| Ok(pattern.write_csv(w)?))?;
    with_output(Some(&dir.join("figure1_estimates.csv")), |w| Ok(write_estimates_csv(&summaries, w)?))?;
    let report = EstimateReport {
        n: pattern.count(),
        s: model.s,
        abs_alpha,
        rows,
        estimates: &summaries,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&dir.join("figure1_estimates.json"), &text)?;
    let truth = IntensityModel::sine2();
    write_text(
        &dir.join("figure1.svg"),
        &estimate_plot(&summaries, abs_alpha, Some(&truth), pattern.points()),
    )?;
    print_rows(&report.rows);
    eprintln!("expected integrals: N + 2pi = {:.6} and N + 1 = 11", 10.0 + TAU);
    diagnostics_gate(&shape)
}
