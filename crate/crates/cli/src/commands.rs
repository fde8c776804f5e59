use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use microvol::config::Config;
use microvol::functionals::theoretical_rate;
use microvol::kernels::audit_kernel_assumptions;
use microvol::moments::{MomentParams, QuadratureOptions};
use microvol::refsim::JointSampler;
use microvol::stats::mean_estimate;
use microvol::{
    error_functionals, fit_rate, hermite4, moment_value, run_weak_error, simulate_events, ErrorFunctionals,
    FitStatus, GaussianModelSpec, GaussianVariant, KernelSpec, MomentModel, SeedStream,
};

use crate::output::OutDir;
use crate::svg::{Band, Plot, Series, Style, PALETTE};
use crate::{
    AuditArgs, Cli, CliError, Command, FunctionalsArgs, KernelArg, ModelArg, MomentsArgs, PathsArgs, RefsimArgs,
    VariantArg, WeakErrorArgs,
};

type Res<T> = Result<T, CliError>;

pub fn run(cli: &Cli) -> Res<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("experiment.seed", &s.to_string())?;
    }
    let out = OutDir::new(&cli.out_dir)?;
    match &cli.command {
        Command::Paths(a) => paths(&cfg, &out, a),
        Command::Refsim(a) => refsim(&cfg, &out, a),
        Command::Moments(a) => moments(&mut cfg, &out, a),
        Command::Functionals(a) => functionals(&mut cfg, &out, a),
        Command::WeakError(a) => weak_error(&mut cfg, &out, a),
        Command::KernelAudit(a) => kernel_audit(&cfg, &out, a),
    }
}

fn seed(cfg: &Config) -> Res<u64> {
    Ok(cfg.u64_or("experiment.seed", microvol::ExperimentConfig::desk_default().seed)?)
}

fn horizons(cfg: &Config) -> Res<(f64, f64)> {
    Ok((cfg.f64_or("experiment.horizon", 1.0)?, cfg.f64_or("experiment.pre_horizon", 0.0)?))
}

fn variant(v: VariantArg) -> GaussianVariant {
    match v {
        VariantArg::TwoSided => GaussianVariant::TwoSided,
        VariantArg::Rl => GaussianVariant::RiemannLiouville,
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Core(microvol::Error::Config(msg.into()))
}

fn print(value: &serde_json::Value) -> Res<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

#[derive(Serialize)]
struct PathRow {
    t: f64,
    log_vol: f64,
    log_price: f64,
}

fn paths(cfg: &Config, out: &OutDir, a: &PathsArgs) -> Res<()> {
    let kernel = cfg.kernel(a.n)?;
    let law = cfg.mark_law()?;
    let (horizon, pre) = horizons(cfg)?;
    if a.grid < 2 {
        return Err(usage("--grid needs at least 2 points"));
    }
    let seeds = SeedStream::new(seed(cfg)?).derive(3);
    let grid: Vec<f64> = (0..a.grid).map(|i| horizon * i as f64 / (a.grid - 1) as f64).collect();
    let mut files = Vec::new();
    let mut price_series = Vec::new();
    let mut vol_series = Vec::new();
    for r in 0..a.replications {
        let ev = simulate_events(kernel.n(), horizon, pre, &law, &mut seeds.rng(r as u64))?;
        let p = ev.price_path(&kernel, &grid)?;
        let rows: Vec<PathRow> = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| PathRow {
                t,
                log_vol: p.log_vol[i],
                log_price: p.log_price[i],
            })
            .collect();
        files.push(out.csv(&format!("paths_{r}.csv"), &rows)?);
        let color = PALETTE[r % PALETTE.len()].to_string();
        price_series.push(line(format!("path {r}"), grid.iter().copied().zip(p.log_price).collect(), &color));
        vol_series.push(line(format!("path {r}"), grid.iter().copied().zip(p.log_vol).collect(), &color));
    }
    if !a.no_svg {
        let title = format!("Prelimit paths, n = {}, H = {}", kernel.n(), kernel.hurst());
        files.push(out.text(
            "paths_price.svg",
            &Plot {
                title: title.clone(),
                x_label: "t".into(),
                y_label: "log-price".into(),
                series: price_series,
                ..Plot::default()
            }
            .render(),
        )?);
        files.push(out.text(
            "paths_vol.svg",
            &Plot {
                title,
                x_label: "t".into(),
                y_label: "log-volatility".into(),
                series: vol_series,
                ..Plot::default()
            }
            .render(),
        )?);
    }
    print(&json!({ "files": files }))
}

fn line(name: String, points: Vec<(f64, f64)>, color: &str) -> Series {
    Series {
        name,
        points,
        color: color.to_string(),
        style: Style::Line,
        error_bars: None,
    }
}

#[derive(Serialize)]
struct EnsembleRow {
    replication: usize,
    terminal_log_price: f64,
    terminal_log_vol: f64,
}

fn refsim(cfg: &Config, out: &OutDir, a: &RefsimArgs) -> Res<()> {
    let law = cfg.mark_law()?;
    let (horizon, _) = horizons(cfg)?;
    let kernel = if a.approx {
        cfg.kernel(None)?
    } else {
        KernelSpec::limit(cfg.f64_or("kernel.hurst", 0.15)?)?
    };
    let spec = GaussianModelSpec {
        sigma_p: law.sigma_p(),
        sigma_v: law.sigma_v(),
        rho: law.rho(),
        variant: variant(a.variant),
        kernel,
        horizon,
        steps: a.grid,
    };
    let sampler = JointSampler::new(spec)?;
    let seeds = SeedStream::new(seed(cfg)?).derive(4);
    let batch = 256;
    let rows: Vec<EnsembleRow> = (0..a.samples.div_ceil(batch))
        .into_par_iter()
        .flat_map_iter(|b| {
            let first = b * batch;
            let count = batch.min(a.samples - first);
            let (vol, dw) = sampler.sample_block(&seeds, first as u64, count, false);
            (0..count)
                .map(|c| {
                    let mut p = dw[(0, c)];
                    for j in 1..a.grid {
                        p += vol[(j - 1, c)].exp() * dw[(j, c)];
                    }
                    EnsembleRow {
                        replication: first + c,
                        terminal_log_price: p * spec.sigma_p,
                        terminal_log_vol: vol[(a.grid - 1, c)],
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let prices: Vec<f64> = rows.iter().map(|r| r.terminal_log_price).collect();
    let stat = |f: &dyn Fn(f64) -> f64| mean_estimate(&prices.iter().map(|p| f(*p)).collect::<Vec<_>>());
    let summary = json!({
        "variant": spec.variant,
        "kernel": spec.kernel,
        "steps": a.grid,
        "samples": a.samples,
        "mean": stat(&|p| p),
        "second_moment": stat(&|p| p * p),
        "fourth_moment": stat(&|p| p.powi(4)),
        "hermite4": stat(&hermite4),
    });
    out.csv("refsim.csv", &rows)?;
    out.json("refsim.json", &summary)?;
    print(&summary)
}

fn moments(cfg: &mut Config, out: &OutDir, a: &MomentsArgs) -> Res<()> {
    if let Some(h) = a.hurst {
        cfg.set("kernel.hurst", &h.to_string())?;
    }
    let law = cfg.mark_law()?;
    let (horizon, _) = horizons(cfg)?;
    let v = variant(a.variant);
    let model = match a.model {
        ModelArg::Limit => MomentModel::Limit {
            hurst: cfg.f64_or("kernel.hurst", 0.15)?,
            variant: v,
        },
        ModelArg::Approx => MomentModel::ApproxGaussian {
            kernel: cfg.kernel(a.n)?,
            variant: v,
        },
        ModelArg::Prelimit => MomentModel::Prelimit {
            kernel: cfg.kernel(a.n)?,
            law,
            pre_zero: v.pre_zero(),
        },
    };
    let opts = QuadratureOptions {
        nodes: a.nodes,
        check_nodes: a.nodes + a.nodes / 2,
        ..QuadratureOptions::default()
    };
    let est = moment_value(a.order, &model, &MomentParams::from_law(&law, horizon), &opts)?;
    let body = json!({
        "value": est.value,
        "quadrature_error": est.quadrature_error,
        "term_count": est.term_count,
    });
    out.json("moments.json", &body)?;
    print(&body)
}

#[derive(Serialize)]
struct FunctionalRow {
    n: u64,
    star: f64,
    diamond: f64,
    square: f64,
    triangle: f64,
    sum: f64,
}

fn functionals(cfg: &mut Config, out: &OutDir, a: &FunctionalsArgs) -> Res<()> {
    if let Some(k) = a.kernel {
        let name = match k {
            KernelArg::Benchmark => "benchmark",
            KernelArg::Optimized => "optimized",
            KernelArg::Shift => "shift",
        };
        cfg.set("kernel.variant", name)?;
    }
    for (key, v) in [("kernel.hurst", a.hurst), ("kernel.beta", a.beta), ("kernel.alpha", a.alpha)] {
        if let Some(v) = v {
            cfg.set(key, &v.to_string())?;
        }
    }
    if a.n_min == 0 || a.n_min > a.n_max {
        return Err(usage("need 0 < n-min <= n-max"));
    }
    let base = cfg.kernel(Some(a.n_min))?;
    if base.is_limit() {
        return Err(usage("functionals compare a prelimit kernel with the limit"));
    }
    let (horizon, _) = horizons(cfg)?;
    let ns: Vec<u64> = std::iter::successors(Some(a.n_min), |n| n.checked_mul(2))
        .take_while(|n| *n <= a.n_max)
        .collect();
    let values: Vec<ErrorFunctionals> = ns
        .par_iter()
        .map(|&n| Ok(error_functionals(&base.with_n(n)?, horizon, a.pre_zero)?))
        .collect::<Res<_>>()?;
    let rows: Vec<FunctionalRow> = values
        .iter()
        .map(|f| FunctionalRow {
            n: f.n,
            star: f.star,
            diamond: f.diamond,
            square: f.square,
            triangle: f.triangle,
            sum: f.sum(),
        })
        .collect();
    out.csv("functionals.csv", &rows)?;
    let rate = theoretical_rate(&base);
    let nf: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    let sums: Vec<f64> = rows.iter().map(|r| r.sum).collect();
    let fit = if ns.len() >= 3 { Some(fit_rate(&nf, &sums)?) } else { None };
    let summary = json!({
        "kernel": base.variant(),
        "hurst": base.hurst(),
        "pre_zero": a.pre_zero,
        "fit": fit,
        "theoretical_exponent": rate.exponent,
        "theoretical_log_factor": rate.log_factor,
    });
    out.json("functionals_fit.json", &summary)?;

    let pick = |f: &dyn Fn(&FunctionalRow) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.n as f64, f(r))).collect() };
    let mut series = vec![
        marker_line("⋆", pick(&|r| r.star), PALETTE[0]),
        marker_line("◇", pick(&|r| r.diamond), PALETTE[1]),
        marker_line("□", pick(&|r| r.square), PALETTE[2]),
        marker_line("△", pick(&|r| r.triangle), PALETTE[3]),
        marker_line("sum", pick(&|r| r.sum), "black"),
    ];
    if let Some(last) = rows.last() {
        let c = last.sum * (last.n as f64).powf(rate.exponent);
        series.push(Series {
            name: format!("n^-{:.3}", rate.exponent),
            points: nf.iter().map(|n| (*n, c * n.powf(-rate.exponent))).collect(),
            color: PALETTE[4].into(),
            style: Style::Dashed,
            error_bars: None,
        });
    }
    out.text(
        "functionals.svg",
        &Plot {
            title: format!("Error functionals, H = {}", base.hurst()),
            x_label: "n".into(),
            y_label: "value".into(),
            log_x: true,
            log_y: true,
            series,
            bands: vec![],
        }
        .render(),
    )?;
    print(&summary)
}

fn marker_line(name: &str, points: Vec<(f64, f64)>, color: &str) -> Series {
    Series {
        name: name.into(),
        points,
        color: color.into(),
        style: Style::Line,
        error_bars: None,
    }
}

#[derive(Serialize)]
struct WeakErrorRow {
    n: u64,
    estimate: f64,
    standard_error: f64,
    weak_error: f64,
    error_standard_error: f64,
    noise_dominated: bool,
    band_center: Option<f64>,
    inside_1se: Option<bool>,
    inside_2se: Option<bool>,
    inside_3se: Option<bool>,
}

fn weak_error(cfg: &mut Config, out: &OutDir, a: &WeakErrorArgs) -> Res<()> {
    if let Some(m) = a.samples {
        cfg.set("experiment.samples", &m.to_string())?;
    }
    if let Some(ns) = &a.ns {
        cfg.set("experiment.ns", ns)?;
    }
    let exp = cfg.experiment()?;
    let report = run_weak_error(&exp)?;
    out.json("weak_error.json", &report)?;
    let rows: Vec<WeakErrorRow> = report
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let b = report.bands.get(i);
            WeakErrorRow {
                n: p.n,
                estimate: p.estimate,
                standard_error: p.standard_error,
                weak_error: p.weak_error,
                error_standard_error: p.error_standard_error,
                noise_dominated: p.noise_dominated,
                band_center: b.map(|b| b.center),
                inside_1se: b.map(|b| b.inside[0]),
                inside_2se: b.map(|b| b.inside[1]),
                inside_3se: b.map(|b| b.inside[2]),
            }
        })
        .collect();
    out.csv("weak_error.csv", &rows)?;

    let xs: Vec<f64> = report.points.iter().map(|p| p.n as f64).collect();
    let mut bands = Vec::new();
    let mut series = vec![Series {
        name: "|weak error|".into(),
        points: report.points.iter().map(|p| (p.n as f64, p.weak_error)).collect(),
        color: "black".into(),
        style: Style::Markers,
        error_bars: Some(report.points.iter().map(|p| p.error_standard_error).collect()),
    }];
    if !report.bands.is_empty() {
        for (k, opacity) in [(3.0, 0.12), (2.0, 0.18), (1.0, 0.25)] {
            bands.push(Band {
                name: format!("±{k} SE"),
                x: xs.clone(),
                lower: report.bands.iter().map(|b| b.center - k * b.standard_error).collect(),
                upper: report.bands.iter().map(|b| b.center + k * b.standard_error).collect(),
                color: PALETTE[0].into(),
                opacity,
            });
        }
        series.push(Series {
            name: format!("C n^-{:.4}", report.theoretical_exponent),
            points: report.bands.iter().map(|b| (b.n as f64, b.center)).collect(),
            color: PALETTE[1].into(),
            style: Style::Line,
            error_bars: None,
        });
    }
    out.text(
        "weak_error.svg",
        &Plot {
            title: format!("Weak error, H = {}", exp.hurst),
            x_label: "n".into(),
            y_label: "absolute weak error".into(),
            log_x: true,
            log_y: true,
            series,
            bands,
        }
        .render(),
    )?;
    print(&json!({
        "fit": report.fit,
        "theoretical_exponent": report.theoretical_exponent,
        "benchmark": report.benchmark,
    }))?;
    match report.fit.status {
        FitStatus::Consistent => Ok(()),
        FitStatus::Inconclusive => Err(CliError::Inconclusive(format!(
            "{} of {} points above the noise floor",
            report.fit.points_used.len(),
            report.points.len()
        ))),
        FitStatus::Contradicting => Err(CliError::Contradicting(format!(
            "slope {:?} outside {:?}",
            report.fit.slope, exp.slope_window
        ))),
    }
}

fn kernel_audit(cfg: &Config, out: &OutDir, a: &AuditArgs) -> Res<()> {
    let kernel = cfg.kernel(a.n)?;
    let (horizon, _) = horizons(cfg)?;
    let report = audit_kernel_assumptions(&kernel, horizon, a.theta, a.grid)?;
    let body = json!({
        "kernel": kernel,
        "passed": report.passed(),
        "report": report,
    });
    out.json("kernel_audit.json", &body)?;
    print(&body)
}
