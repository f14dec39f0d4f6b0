use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rfp_core::density::fit_kde;
use rfp_core::driver_sim::{
    simulate_with, simulate_with_delay, write_trace, SimSettings, SimulationOutcome,
};
use rfp_core::evt::{build_excess_set, fit_gpd};
use rfp_core::foreseeable::{
    solve_range_evt, solve_range_kde, EvtBound, ForeseeableQuery, ForeseeableRange,
};
use rfp_core::preventable::{
    build_importance_density, crude_mc, grid_boundary, importance_mc, BoundaryCurve,
    DriverSimulator, RiskEstimate,
};
use rfp_core::rng::derive_seed;
use rfp_core::scenario_store::{exposure, load_records};
use rfp_core::scenario_store::{mine_scenarios, read_tracks, MinedSpan, MiningOptions};
use rfp_core::{ExposureEstimate, GpdFit, KdeModel, Orientation, ScenarioFamily, ScenarioSpec};
use serde::Serialize;

use crate::config::LoadedConfig;
use crate::report::{write_json, write_text, Report};
use crate::CliError;

const HISTOGRAM_BINS: usize = 30;
const PDF_POINTS: usize = 200;

#[derive(Serialize)]
struct KdeReport<'a> {
    category: &'a str,
    parameter_names: &'a [String],
    exposure: ExposureEstimate,
    n_points: usize,
    bandwidth: f64,
    renormalization: f64,
    ranges: Vec<ForeseeableRange>,
}

pub fn foreseeable_kde(cfg: &LoadedConfig, id: &str, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cat = cfg.category(id)?;
    let records = load_records(&cat.data, &cat.schema)?;
    let exp = exposure(id, &records, cfg.hours()?)?;
    let model = fit_kde(&records, &cat.schema)?;
    let ranges = cfg
        .config
        .lambda_fs
        .iter()
        .map(|&lambda_fs| {
            let query = match &cat.policy {
                Some(p) => ForeseeableQuery {
                    lambda_fs,
                    policy: p.clone(),
                },
                None => ForeseeableQuery::expand_both(lambda_fs, model.dim()),
            };
            solve_range_kde(&model, &exp, &query)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let report = KdeReport {
        category: id,
        parameter_names: &cat.schema.parameter_names,
        exposure: exp,
        n_points: model.len(),
        bandwidth: model.bandwidth(),
        renormalization: model.renormalization(),
        ranges,
    };
    let names = &cat.schema.parameter_names;
    let thetas: Vec<Vec<f64>> = records.iter().map(|r| r.theta.clone()).collect();
    Ok(vec![
        write_json(
            out,
            &format!("foreseeable-kde-{id}.json"),
            &Report::new("foreseeable-kde", &cfg.config, report)?,
        )?,
        write_text(
            out,
            &format!("{id}-histogram.csv"),
            &histogram_csv(names, &thetas),
        )?,
        write_text(
            out,
            &format!("{id}-marginal-pdf.csv"),
            &marginal_pdf_csv(names, &model),
        )?,
    ])
}

fn histogram_csv(names: &[String], thetas: &[Vec<f64>]) -> String {
    let mut s = String::from("parameter,bin_lower,bin_upper,count,density\n");
    let n = thetas.len() as f64;
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = thetas.iter().map(|t| t[j]).collect();
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo {
            (hi - lo) / HISTOGRAM_BINS as f64
        } else {
            1.0
        };
        let mut counts = [0usize; HISTOGRAM_BINS];
        for x in &col {
            let b = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            let _ = writeln!(
                s,
                "{name},{a},{},{c},{}",
                a + width,
                *c as f64 / (n * width)
            );
        }
    }
    s
}

fn marginal_pdf_csv(names: &[String], model: &KdeModel) -> String {
    let mut s = String::from("parameter,x,pdf\n");
    for (j, name) in names.iter().enumerate() {
        let (lo, hi) = model.data_range(j);
        let pad = 0.1 * (hi - lo);
        let t = model.transforms()[j];
        for k in 0..PDF_POINTS {
            let x = lo - pad + (hi - lo + 2.0 * pad) * k as f64 / (PDF_POINTS - 1) as f64;
            if t.accepts(x) {
                let _ = writeln!(s, "{name},{x},{}", model.marginal_pdf(j, x));
            }
        }
    }
    s
}

#[derive(Serialize)]
struct EvtReport<'a> {
    category: &'a str,
    dimension: &'a str,
    exceed_fraction: f64,
    n_excesses: usize,
    exposure: ExposureEstimate,
    fit: GpdFit,
    bounds: Vec<EvtBound>,
}

pub fn foreseeable_evt(
    cfg: &LoadedConfig,
    id: &str,
    dimension: &str,
    orientation: Orientation,
    truncate_at: Option<f64>,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let cat = cfg.category(id)?;
    let j = cat
        .schema
        .parameter_names
        .iter()
        .position(|n| n == dimension)
        .ok_or_else(|| CliError::Config(format!("category {id} has no parameter {dimension:?}")))?;
    let records = load_records(&cat.data, &cat.schema)?;
    let exp = exposure(id, &records, cfg.hours()?)?;
    let values: Vec<f64> = records.iter().map(|r| r.theta[j]).collect();
    let fraction = cfg.config.evt.exceed_fraction;
    let excess = build_excess_set(&values, orientation, fraction)?;
    let mut fit = fit_gpd(&excess)?;
    if let Some(limit) = truncate_at {
        fit = fit.with_truncation(limit)?;
    }
    let bounds = cfg
        .config
        .lambda_fs
        .iter()
        .map(|&l| solve_range_evt(&fit, &exp, l))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ys = excess.excesses.clone();
    ys.sort_by(f64::total_cmp);
    let k = ys.len() as f64;
    let mut csv = String::from("excess,empirical_exceedance,model_exceedance\n");
    for (i, y) in ys.iter().enumerate() {
        let model = fit.sf(*y).unwrap_or(0.0);
        let _ = writeln!(csv, "{y},{},{model}", 1.0 - (i + 1) as f64 / (k + 1.0));
    }

    let report = EvtReport {
        category: id,
        dimension,
        exceed_fraction: fraction,
        n_excesses: excess.excesses.len(),
        exposure: exp,
        fit,
        bounds,
    };
    Ok(vec![
        write_json(
            out,
            &format!("foreseeable-evt-{id}-{dimension}.json"),
            &Report::new("foreseeable-evt", &cfg.config, report)?,
        )?,
        write_text(out, &format!("{id}-{dimension}-evt.csv"), &csv)?,
    ])
}

#[derive(Serialize)]
struct CategoryRiskReport<'a> {
    category: &'a str,
    family: ScenarioFamily,
    n_critical: usize,
    importance_bandwidth: f64,
    crude: RiskEstimate,
    importance: RiskEstimate,
}

pub fn preventable_category(
    cfg: &LoadedConfig,
    id: &str,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let cat = cfg.category(id)?;
    let family = cat.schema.family.ok_or_else(|| {
        CliError::Config(format!("category {id} has no scenario family to simulate"))
    })?;
    let records = load_records(&cat.data, &cat.schema)?;
    let model = fit_kde(&records, &cat.schema)?;
    let mc = cfg.config.mc;
    let seed = cfg.config.base_seed;
    let sim = DriverSimulator::new(family, cfg.config.driver);

    let pilot = crude_mc(&model, &sim, mc.n_pilot, derive_seed(seed, 1))?;
    let n_critical = ((mc.n_critical_fraction * mc.n_pilot as f64).round() as usize).max(3);
    let q = build_importance_density(&model, &pilot.runs, n_critical)?;
    let is = importance_mc(&model, &q, &sim, mc.n_is, derive_seed(seed, 2))?;

    let report = CategoryRiskReport {
        category: id,
        family,
        n_critical,
        importance_bandwidth: q.bandwidth(),
        crude: pilot.estimate,
        importance: is,
    };
    let c = &report.crude;
    let csv = format!(
        "category,mu_mc,sigma_mc,n_mc,mu_is,sigma_is,n_is\n{id},{},{},{},{},{},{}\n",
        c.mean, c.std, c.n_runs, is.mean, is.std, is.n_runs
    );
    Ok(vec![
        write_json(
            out,
            &format!("preventable-category-{id}.json"),
            &Report::new("preventable-category", &cfg.config, report)?,
        )?,
        write_text(out, &format!("{id}-risk.csv"), &csv)?,
    ])
}

pub fn preventable_grid(
    cfg: &LoadedConfig,
    name: &str,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg
        .config
        .grids
        .get(name)
        .ok_or_else(|| CliError::Config(format!("grid {name:?} is not in the config")))?;
    let sim = DriverSimulator::new(grid.family, cfg.config.driver);
    let curve: BoundaryCurve = grid_boundary(
        &sim,
        &grid.to_spec(),
        &cfg.config.sequential,
        cfg.config.base_seed,
    )?;

    let mut nodes = format!(
        "{},{},p_hat,n_sims,n_collisions,verdict\n",
        curve.axis1.name, curve.axis2.name
    );
    for n in &curve.nodes {
        let verdict = serde_json::to_value(n.result.verdict)?;
        let _ = writeln!(
            nodes,
            "{},{},{},{},{},{}",
            n.axis1,
            n.axis2,
            n.result.p_hat,
            n.result.n_sims,
            n.result.n_collisions,
            verdict.as_str().unwrap_or_default()
        );
    }
    let boundary = curve.to_csv();
    Ok(vec![
        write_json(
            out,
            &format!("grid-{name}.json"),
            &Report::new("preventable-grid", &cfg.config, curve)?,
        )?,
        write_text(out, &format!("grid-{name}-boundary.csv"), &boundary)?,
        write_text(out, &format!("grid-{name}-nodes.csv"), &nodes)?,
    ])
}

pub struct MineArgs {
    pub tracks: PathBuf,
    pub phases: Vec<String>,
    pub slack: f64,
    pub min_duration: f64,
    pub hours: Option<f64>,
    pub label: String,
}

#[derive(Serialize)]
struct MineReport<'a> {
    label: &'a str,
    query: Vec<BTreeSet<String>>,
    options: MiningOptions,
    n_spans: usize,
    exposure: Option<ExposureEstimate>,
    spans: Vec<MinedSpan>,
}

pub fn mine(cfg: &LoadedConfig, args: &MineArgs, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let query: Vec<BTreeSet<String>> = args
        .phases
        .iter()
        .map(|p| {
            p.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect()
        })
        .collect();
    if query.iter().any(BTreeSet::is_empty) {
        return Err(CliError::Config(
            "every --phase needs at least one tag".into(),
        ));
    }
    if !(args.slack >= 0.0 && args.min_duration >= 0.0) {
        return Err(CliError::Config(
            "slack and min-duration must be non-negative".into(),
        ));
    }
    let tracks = read_tracks(&args.tracks)?;
    let options = MiningOptions {
        slack: args.slack,
        min_duration: args.min_duration,
    };
    let spans = mine_scenarios(&tracks, &query, &options);
    let exposure = args
        .hours
        .map(|h| ExposureEstimate::from_count(args.label.as_str(), spans.len(), h))
        .transpose()?;

    let mut csv = String::from("object_id,start,end\n");
    for s in &spans {
        let _ = writeln!(csv, "{},{},{}", s.object_id, s.start, s.end);
    }
    let report = MineReport {
        label: &args.label,
        query,
        options,
        n_spans: spans.len(),
        exposure,
        spans,
    };
    Ok(vec![
        write_json(
            out,
            &format!("mine-{}.json", args.label),
            &Report::new("mine", &cfg.config, report)?,
        )?,
        write_text(out, &format!("mine-{}.csv", args.label), &csv)?,
    ])
}

#[derive(Serialize)]
struct SimulateReport {
    spec: ScenarioSpec,
    settings: SimSettings,
    outcome: SimulationOutcome,
}

pub fn simulate(
    cfg: &LoadedConfig,
    family: ScenarioFamily,
    theta: Vec<f64>,
    dt: Option<f64>,
    reaction_delay: Option<f64>,
    trace: bool,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let spec = ScenarioSpec::new(family, theta)?;
    let mut settings = SimSettings::default();
    if let Some(dt) = dt {
        settings.dt = dt;
    }
    // a full trajectory is more useful than one cut at the settled state
    settings.stop_when_settled = !trace;
    let driver = &cfg.config.driver;
    let mut points = Vec::new();
    let sink = trace.then_some(&mut points);
    let outcome = match reaction_delay {
        Some(tau) => simulate_with_delay(&spec, driver, &settings, tau, sink)?,
        None => simulate_with(&spec, driver, &settings, cfg.config.base_seed, sink)?,
    };
    let mut written = vec![write_json(
        out,
        "simulate.json",
        &Report::new(
            "simulate",
            &cfg.config,
            SimulateReport {
                spec,
                settings,
                outcome,
            },
        )?,
    )?];
    if trace {
        let path = out.join("trajectory.csv");
        let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_trace(std::io::BufWriter::new(file), &points)?;
        written.push(path);
    }
    Ok(written)
}
