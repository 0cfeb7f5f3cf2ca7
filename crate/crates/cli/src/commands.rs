use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use hwsir::analysis::{
    align_by_threshold, ensemble_mean, layer_proportion_estimates, sup_distance, Component, Curve, Estimate,
};
use hwsir::ebcm::EbcmModel;
use hwsir::engine::TypeHistogram;
use hwsir::graph::{Layer, PopulationGraph};
use hwsir::integrator::IntegratorConfig;
use hwsir::reduced::ReducedModel;
use hwsir::rng::stream;
use hwsir::scenario::{round_down_to_five, threshold_time, Horizon, Scenario};
use hwsir::{bench, Error, Result};

use crate::svg::{line_plot, Series};
use crate::{Command, Common, Form, Model};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common } => simulate(&common),
        Command::Reduce {
            common,
            initial,
            full_state,
        } => reduce(&common, initial.as_deref(), full_state),
        Command::Ebcm {
            common,
            form,
            full_state,
        } => ebcm(&common, form, full_state),
        Command::Compare { common, models, form } => compare(&common, &models, form),
        Command::Bench {
            scenario,
            runs,
            reference_n,
            out_dir,
        } => run_bench(&scenario, runs, reference_n, &out_dir),
        Command::InferIc { common, stop_level } => infer_ic(&common, stop_level),
        Command::Graph { common } => graph(&common),
    }
}

fn load(common: &Common) -> Result<Scenario> {
    let mut sc = Scenario::load(&common.scenario)?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    if let Some(r) = common.replicates {
        sc.replicates = r;
    }
    if let Some(level) = common.align_threshold {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::Config(format!(
                "--align-threshold must lie in [0, 1], got {level}"
            )));
        }
    }
    fs::create_dir_all(&common.out_dir)?;
    Ok(sc)
}

/// `0, dt, 2dt, …` up to and including `t_end`.
fn grid(t_start: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let mut g = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t_start + k as f64 * dt;
        if t > t_end * (1.0 + 1e-12) + 1e-12 {
            break;
        }
        g.push(t.min(t_end));
        k += 1;
    }
    if g.last().is_none_or(|&t| t < t_end) {
        g.push(t_end);
    }
    g
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

fn write_svg(path: &Path, title: &str, series: &[Series]) -> Result<()> {
    fs::write(path, line_plot(title, "t", "proportion", series))?;
    Ok(())
}

fn curve_series<'a>(name: &str, c: &'a Curve, dashed: bool) -> [Series<'a>; 2] {
    [
        Series {
            label: format!("{name} s"),
            x: &c.t,
            y: &c.s,
            dashed,
        },
        Series {
            label: format!("{name} i"),
            x: &c.t,
            y: &c.i,
            dashed,
        },
    ]
}

fn simulate(common: &Common) -> Result<()> {
    let sc = load(common)?;
    let horizon = sc.resolve_horizon()?;
    let setup = sc.ensemble_setup();
    let trajs = setup.run(sc.seed, sc.replicates, horizon, &sc.sampling())?;
    for (r, traj) in trajs.iter().enumerate() {
        traj.write_csv(create(&common.out_dir.join(format!("trajectory_{r:04}.csv")))?)?;
    }
    let curves: Vec<Curve> = trajs.iter().map(Curve::from_trajectory).collect();
    let curves = match common.align_threshold {
        Some(level) => align_by_threshold(&curves, level)?,
        None => curves,
    };
    let k = sc.population as f64;
    let finals: Vec<f64> = trajs.iter().map(|t| t.last().map_or(0.0, |s| s.r as f64 / k)).collect();
    let peaks: Vec<(f64, f64)> = curves.iter().map(Curve::peak).collect();
    let props = layer_proportion_estimates(&trajs);
    let mut summary = json!({
        "scenario": sc.name,
        "seed": sc.seed,
        "replicates": sc.replicates,
        "retained": curves.len(),
        "horizon": horizon,
        "align_threshold": common.align_threshold,
        "final_size": Estimate::of(&finals),
        "peak_prevalence": Estimate::of(&peaks.iter().map(|p| p.1).collect::<Vec<_>>()),
        "peak_time": Estimate::of(&peaks.iter().map(|p| p.0).collect::<Vec<_>>()),
        "layer_proportions": { "G": props[0], "H": props[1], "W": props[2] },
    });
    let mean_curve = if curves.len() >= 2 {
        let lo = curves.iter().map(Curve::start).fold(f64::INFINITY, f64::min);
        let hi = curves.iter().map(Curve::end).fold(f64::NEG_INFINITY, f64::max);
        let lo = (lo / sc.dt).floor() * sc.dt;
        let mean = ensemble_mean(&curves, &grid(lo, hi, sc.dt))?;
        mean.write_csv(create(&common.out_dir.join("ensemble_mean.csv"))?)?;
        summary["ensemble_mean"] = json!("ensemble_mean.csv");
        Some(mean.curve())
    } else {
        None
    };
    write_json(&common.out_dir.join("summary.json"), &summary)?;
    if common.svg {
        let shown = mean_curve.as_ref().or(curves.first());
        if let Some(c) = shown {
            write_svg(
                &common.out_dir.join("simulate.svg"),
                &sc.name,
                &curve_series("SSA", c, false),
            )?;
        }
    }
    Ok(())
}

fn reduce(common: &Common, initial: Option<&Path>, full_state: bool) -> Result<()> {
    let sc = load(common)?;
    let params = sc.reduced_params()?;
    let model = ReducedModel::new(params.clone())?;
    let y0 = match initial {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let hist: TypeHistogram = serde_json::from_value(value.get("histogram").cloned().unwrap_or(value))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            model.initial_condition_from_counts(&hist)?
        }
        None => model.initial_condition(sc.initial_fraction())?,
    };
    let (horizon, t_star) = match sc.horizon {
        Horizon::Time(t) => (t, None),
        Horizon::Auto(_) => {
            let t_star = threshold_time(&params, sc.initial_fraction(), 0.01)?;
            (round_down_to_five(t_star), Some(t_star))
        }
    };
    let sol = model.solve(&y0, horizon, &IntegratorConfig::default())?;
    let g = grid(0.0, horizon, sc.dt);
    sol.write_csv(create(&common.out_dir.join("reduced.csv"))?, &g, full_state)?;

    let mut failures = Vec::new();
    let mut all_passed = true;
    for &t in sol.dense.times() {
        let report = model.check_v(&sol.state(t), 1e-8);
        if !report.passed() {
            all_passed = false;
            failures.extend(
                report
                    .failures()
                    .map(|c| json!({ "t": t, "constraint": c.name, "violation": c.violation })),
            );
            failures.truncate(20);
        }
    }
    let curve = Curve::from_fn(&g, |t| (sol.s(t), sol.i(t)));
    let (peak_t, peak_i) = curve.peak();
    let summary = json!({
        "scenario": sc.name,
        "horizon": horizon,
        "t_star": t_star.or_else(|| sol.threshold_time(0.01)),
        "dimension": model.dim(),
        "steps": sol.dense.steps(),
        "final": { "s": sol.s(horizon), "i": sol.i(horizon), "r": sol.r(horizon) },
        "peak": { "t": peak_t, "i": peak_i },
        "invariant_set": { "tolerance": 1e-8, "all_passed": all_passed, "failures": failures },
    });
    write_json(&common.out_dir.join("reduced_summary.json"), &summary)?;
    if common.svg {
        write_svg(
            &common.out_dir.join("reduced.svg"),
            &sc.name,
            &curve_series("ODE", &curve, false),
        )?;
    }
    Ok(())
}

fn ebcm(common: &Common, form: Form, full_state: bool) -> Result<()> {
    let sc = load(common)?;
    let model = EbcmModel::new(sc.reduced_params()?, form.into())?;
    let horizon = sc.resolve_horizon()?;
    let sol = model.solve(
        &model.initial_condition(sc.initial_fraction())?,
        horizon,
        &IntegratorConfig::default(),
    )?;
    let g = grid(0.0, horizon, sc.dt);
    sol.write_csv(create(&common.out_dir.join("ebcm.csv"))?, &g, full_state)?;
    if common.svg {
        let curve = Curve::from_fn(&g, |t| (sol.s(t), sol.i(t)));
        write_svg(
            &common.out_dir.join("ebcm.svg"),
            &sc.name,
            &curve_series("EBCM", &curve, true),
        )?;
    }
    Ok(())
}

fn model_curve(sc: &Scenario, model: Model, form: Form, horizon: f64, align: Option<f64>) -> Result<Curve> {
    let fine = grid(0.0, horizon, sc.dt.min(0.25));
    let curve = match model {
        Model::Ssa => {
            let trajs = sc
                .ensemble_setup()
                .run(sc.seed, sc.replicates, horizon, &sc.sampling())?;
            let curves: Vec<Curve> = trajs.iter().map(Curve::from_trajectory).collect();
            let curves = match align {
                Some(level) => align_by_threshold(&curves, level)?,
                None => curves,
            };
            if curves.len() == 1 {
                return Ok(curves.into_iter().next().expect("one curve"));
            }
            let lo = curves.iter().map(Curve::start).fold(f64::INFINITY, f64::min);
            let hi = curves.iter().map(Curve::end).fold(f64::NEG_INFINITY, f64::max);
            let lo = (lo / sc.dt).floor() * sc.dt;
            return Ok(ensemble_mean(&curves, &grid(lo, hi, sc.dt))?.curve());
        }
        Model::Ode => {
            let m = ReducedModel::new(sc.reduced_params()?)?;
            let sol = m.solve(
                &m.initial_condition(sc.initial_fraction())?,
                horizon,
                &IntegratorConfig::default(),
            )?;
            Curve::from_fn(&fine, |t| (sol.s(t), sol.i(t)))
        }
        Model::Ebcm => {
            let m = EbcmModel::new(sc.reduced_params()?, form.into())?;
            let sol = m.solve(
                &m.initial_condition(sc.initial_fraction())?,
                horizon,
                &IntegratorConfig::default(),
            )?;
            Curve::from_fn(&fine, |t| (sol.s(t), sol.i(t)))
        }
    };
    match align {
        Some(level) => Ok(align_by_threshold(&[curve], level)?.remove(0)),
        None => Ok(curve),
    }
}

fn compare(common: &Common, models: &[Model], form: Form) -> Result<()> {
    if models.len() < 2 {
        return Err(Error::Config("compare needs at least two models".into()));
    }
    let sc = load(common)?;
    let horizon = sc.resolve_horizon()?;
    let names: Vec<String> = models.iter().map(|m| format!("{m:?}").to_lowercase()).collect();
    let curves = models
        .iter()
        .map(|&m| model_curve(&sc, m, form, horizon, common.align_threshold))
        .collect::<Result<Vec<_>>>()?;
    let matrix = |component| -> Result<Vec<Vec<f64>>> {
        curves
            .iter()
            .map(|a| curves.iter().map(|b| sup_distance(a, b, component)).collect())
            .collect()
    };
    let report = json!({
        "scenario": sc.name,
        "horizon": horizon,
        "align_threshold": common.align_threshold,
        "models": names,
        "sup_distance_i": matrix(Component::I)?,
        "sup_distance_s": matrix(Component::S)?,
    });
    write_json(&common.out_dir.join("compare.json"), &report)?;
    for (name, c) in names.iter().zip(&curves) {
        c.write_csv(create(&common.out_dir.join(format!("compare_{name}.csv")))?)?;
    }
    if common.svg {
        let series: Vec<Series> = names
            .iter()
            .zip(&curves)
            .enumerate()
            .flat_map(|(k, (n, c))| curve_series(n, c, k > 0))
            .collect();
        write_svg(&common.out_dir.join("compare.svg"), &sc.name, &series)?;
    }
    Ok(())
}

fn run_bench(files: &[std::path::PathBuf], runs: usize, reference_n: u64, out_dir: &Path) -> Result<()> {
    if runs == 0 {
        return Err(Error::Config("--runs must be >= 1".into()));
    }
    let scenarios = if files.is_empty() {
        Scenario::table1()
    } else {
        files.iter().map(|f| Scenario::load(f)).collect::<Result<_>>()?
    };
    fs::create_dir_all(out_dir)?;
    let report = bench::run(&scenarios, runs, reference_n)?;
    report.write_csv(create(&out_dir.join("bench.csv"))?)?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Io(e.into()))?;
    write_json(&out_dir.join("bench.json"), &value)?;
    let expected = reference_n as u128 * (reference_n as u128 + 1) / 2;
    println!(
        "reference loop: sum 1..={reference_n} = {} ({})",
        report.reference_value,
        if report.reference_value as u128 == expected {
            "ok"
        } else {
            "MISMATCH"
        }
    );
    println!("{:<22} {:>10} {:>10} {:>10}", "scenario", "ssa", "ode", "ode/ssa");
    for row in &report.rows {
        println!(
            "{:<22} {:>10.4} {:>10.4} {:>10.3}",
            row.scenario, row.ssa.mean, row.ode.mean, row.ratio
        );
    }
    Ok(())
}

fn infer_ic(common: &Common, stop_level: f64) -> Result<()> {
    let sc = load(common)?;
    if !(stop_level > 0.0 && stop_level <= 1.0) {
        return Err(Error::Config(format!(
            "--stop-level must lie in (0, 1], got {stop_level}"
        )));
    }
    let ic = sc
        .ensemble_setup()
        .infer_initial_condition(sc.seed, sc.replicates, stop_level)?;
    let value = json!({
        "scenario": sc.name,
        "stop_level": stop_level,
        "retained": ic.retained,
        "discarded": ic.discarded,
        "histogram": ic.histogram,
    });
    write_json(&common.out_dir.join("inferred_ic.json"), &value)?;
    let mut w = create(&common.out_dir.join("inferred_ic.csv"))?;
    writeln!(w, "layer,S,I,count")?;
    for layer in Layer::BOTH {
        for (&(s, i), &c) in ic.histogram.layer(layer) {
            writeln!(w, "{},{s},{i},{c}", layer.tag())?;
        }
    }
    Ok(())
}

fn graph(common: &Common) -> Result<()> {
    let sc = load(common)?;
    let mut rng = stream(sc.seed, 0);
    let g = PopulationGraph::build(sc.population, &sc.households, &sc.workplaces, &mut rng)?;
    g.write_csv(create(&common.out_dir.join("graph.csv"))?)?;
    let summary = json!({
        "scenario": sc.name,
        "population": g.size(),
        "households": g.layer(Layer::Household).len(),
        "workplaces": g.layer(Layer::Workplace).len(),
        "household_sizes": g.empirical_size_dist(Layer::Household),
        "workplace_sizes": g.empirical_size_dist(Layer::Workplace),
    });
    write_json(&common.out_dir.join("graph_summary.json"), &summary)?;
    Ok(())
}
