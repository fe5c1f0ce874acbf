//! Subcommand implementations, callable in-process.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;

use cg_core::cg::{run_collect, solve_instance, CgConfig, IterRecord, Strategy};
use cg_core::features::{build_samples, read_dataset, write_dataset, ArcSample, FeatureError};
use cg_core::ingest::{
    generate_random, parse_instance, tighten_windows, write_instance, GenParams, Layout,
    VrptwInstance,
};
use cg_core::learn::{
    evaluate, load_model, save_model, train_forest, train_logistic, ClassWeights, ForestHyper,
    LogisticHyper, Metrics, TrainedModel,
};
use cg_core::net::{build_network, Network};
use cg_core::seed::{derive_seed, rng_for};

use crate::csvio::{
    assemble_report, clean_field, read_report, write_report, write_trace, ReportRow, RowStatus,
};
use crate::{
    resolve_settings, BenchArgs, CollectArgs, GenArgs, ModelKindArg, ReportArgs, SolveArgs,
    TrainArgs,
};

pub fn instance_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load_instance(path: &Path, tighten: Option<f64>) -> Result<(VrptwInstance, Network)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading instance {}", path.display()))?;
    let mut inst =
        parse_instance(&text).with_context(|| format!("parsing instance {}", path.display()))?;
    if let Some(factor) = tighten {
        inst = tighten_windows(&inst, factor)
            .with_context(|| format!("tightening {}", path.display()))?;
    }
    let net = build_network(&inst)
        .with_context(|| format!("building network for {}", path.display()))?;
    Ok((inst, net))
}

pub fn cmd_gen(args: &GenArgs) -> Result<Vec<PathBuf>> {
    if args.customers == 0 {
        bail!("--customers must be at least 1");
    }
    if let Some(f) = args.tighten {
        if !(f > 0.0 && f <= 1.0) {
            bail!("tighten factor {f} outside (0, 1]");
        }
    }
    let layout: Layout = args.layout.parse().map_err(|e: String| anyhow!(e))?;
    let mut params = GenParams {
        layout,
        ..GenParams::default()
    };
    if let Some(d) = args.demand_min {
        params.demand_min = d;
    }
    if let Some(d) = args.demand_max {
        params.demand_max = d;
    }
    if let Some(c) = args.capacity {
        params.capacity = c;
    }
    if params.demand_min > params.demand_max || f64::from(params.demand_max) > params.capacity {
        bail!(
            "demand range {}..={} must be ordered and fit the capacity {}",
            params.demand_min,
            params.demand_max,
            params.capacity
        );
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut paths = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let mut inst = generate_random(
            args.customers,
            derive_seed(args.seed, "gen-instance", i as u64),
            &params,
        );
        inst.name = format!("r{}_s{}_{:02}", args.customers, args.seed, i);
        if let Some(f) = args.tighten {
            inst = tighten_windows(&inst, f)?;
        }
        let path = args.out_dir.join(format!("{}.txt", inst.name));
        std::fs::write(&path, write_instance(&inst))
            .with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    println!(
        "wrote {} instance(s) with {} customers to {}",
        args.count,
        args.customers,
        args.out_dir.display()
    );
    Ok(paths)
}

#[derive(Debug)]
pub struct CollectSummary {
    /// At least one instance was skipped.
    pub partial: bool,
    pub rows: usize,
    pub positives: usize,
    /// (instance id, rows, positive rows) per collected instance.
    pub per_instance: Vec<(String, usize, usize)>,
}

pub fn cmd_collect(args: &CollectArgs) -> Result<CollectSummary> {
    let settings = resolve_settings(&args.flags, None)?;
    let mut cfg = settings.cg.clone();
    cfg.strategy = Strategy::Baseline;

    let mut samples: Vec<ArcSample> = Vec::new();
    let mut summary = CollectSummary {
        partial: false,
        rows: 0,
        positives: 0,
        per_instance: Vec::new(),
    };
    let mut seen_ids: HashSet<String> = HashSet::new();
    for path in &args.instances {
        let id = instance_stem(path);
        let skip = |summary: &mut CollectSummary, why: String| {
            eprintln!("skipping {}: {why}", path.display());
            summary.partial = true;
        };
        if !seen_ids.insert(id.clone()) {
            skip(&mut summary, format!("duplicate instance id {id:?}"));
            continue;
        }
        let (_, net) = match load_instance(path, settings.tighten) {
            Ok(v) => v,
            Err(e) => {
                skip(&mut summary, format!("{e:#}"));
                continue;
            }
        };
        let y = match run_collect(&net, &cfg) {
            Ok((_, y)) => y,
            Err(e) => {
                skip(&mut summary, format!("{e:#}"));
                continue;
            }
        };
        match build_samples(&net, &id, &y) {
            Ok((rows, _)) => {
                let positives = rows.iter().filter(|s| s.label).count();
                println!(
                    "{id}: {} rows, {} positive ({:.4})",
                    rows.len(),
                    positives,
                    positives as f64 / rows.len() as f64
                );
                summary.rows += rows.len();
                summary.positives += positives;
                summary.per_instance.push((id, rows.len(), positives));
                samples.extend(rows);
            }
            Err(FeatureError::Empty) => {
                println!("{id}: no selectable arcs, 0 rows");
                summary.per_instance.push((id, 0, 0));
            }
            Err(e) => skip(&mut summary, format!("{e:#}")),
        }
    }

    std::fs::write(&args.out, write_dataset(&samples))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "dataset: {} rows, {} positive ({}) -> {}",
        summary.rows,
        summary.positives,
        if summary.rows == 0 {
            "n/a".to_string()
        } else {
            format!("{:.4}", summary.positives as f64 / summary.rows as f64)
        },
        args.out.display()
    );
    if summary.partial {
        eprintln!("warning: some instances were skipped");
    }
    Ok(summary)
}

pub fn cmd_train(args: &TrainArgs) -> Result<Metrics> {
    let settings = resolve_settings(&args.flags, Some(&args.train))?;
    let text = std::fs::read_to_string(&args.dataset)
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    let samples = read_dataset(&text)?;
    if samples.is_empty() {
        bail!("dataset {} has no rows", args.dataset.display());
    }

    let ids: BTreeSet<String> = samples.iter().map(|s| s.instance_id.clone()).collect();
    let mut ids: Vec<String> = ids.into_iter().collect();
    if ids.len() < 2 {
        bail!(
            "dataset covers {} instance(s); at least 2 are needed to hold out a test split \
             (collect more instances)",
            ids.len()
        );
    }
    let mut rng = rng_for(settings.cg.rng_seed, "train-split", 0);
    for k in (1..ids.len()).rev() {
        let j = rng.gen_range(0..=k);
        ids.swap(k, j);
    }
    let n_test = ((ids.len() as f64 * settings.train.test_fraction).round() as usize)
        .clamp(1, ids.len() - 1);
    let test_ids: HashSet<&str> = ids[..n_test].iter().map(String::as_str).collect();
    let (test, train): (Vec<ArcSample>, Vec<ArcSample>) = samples
        .into_iter()
        .partition(|s| test_ids.contains(s.instance_id.as_str()));

    let classes = (
        train.iter().filter(|s| !s.label).count(),
        train.iter().filter(|s| s.label).count(),
    );
    if classes.0 == 0 || classes.1 == 0 {
        bail!(
            "training split has a single class ({} negative, {} positive); \
             collect more instances",
            classes.0,
            classes.1
        );
    }

    let model = match settings.train.kind {
        ModelKindArg::Forest => {
            let hyper = ForestHyper {
                n_trees: settings.train.trees,
                max_depth: settings.train.max_depth,
                max_features: settings.train.max_features,
                min_samples_leaf: settings.train.min_samples_leaf,
                min_samples_split: settings.train.min_samples_split,
                bootstrap: true,
                class_weights: ClassWeights::Balanced,
            };
            train_forest(&train, &hyper, derive_seed(settings.cg.rng_seed, "forest", 0))?
        }
        ModelKindArg::Logistic => {
            let hyper = LogisticHyper {
                c: settings.train.c,
                ..LogisticHyper::default()
            };
            train_logistic(&train, &hyper)?
        }
    };
    let metrics = evaluate(&model, &test);
    std::fs::write(&args.out, save_model(&model))
        .with_context(|| format!("writing {}", args.out.display()))?;

    println!(
        "split: {} train / {} test instances ({} / {} rows)",
        ids.len() - n_test,
        n_test,
        train.len(),
        test.len()
    );
    println!(
        "held-out: tp={} fp={} tn={} fn={} recall={:.4} tnr={:.4} balanced_accuracy={:.4}",
        metrics.tp,
        metrics.fp,
        metrics.tn,
        metrics.fn_,
        metrics.recall,
        metrics.tnr,
        metrics.balanced_accuracy
    );
    println!("wrote {} model -> {}", model.kind(), args.out.display());
    Ok(metrics)
}

fn load_model_file(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))?;
    Ok(load_model(&text).with_context(|| format!("loading model {}", path.display()))?)
}

fn report_row(
    instance: String,
    customers: usize,
    strategy: Strategy,
    outcome: &cg_core::cg::CgOutcome,
) -> ReportRow {
    ReportRow {
        instance,
        customers,
        strategy,
        status: RowStatus::Ok,
        iterations: outcome.stats.iterations as f64,
        full_network_iterations: outcome.stats.full_network_iterations as f64,
        pp_seconds: outcome.stats.pp_seconds,
        rmp_seconds: outcome.stats.rmp_seconds,
        total_seconds: outcome.stats.total_seconds,
        objective: outcome.solution.objective,
        gain_vs_baseline: None,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<ReportRow> {
    let settings = resolve_settings(&args.flags, None)?;
    let strategy: Strategy = args.strategy.parse()?;
    let mut cfg = settings.cg.clone();
    cfg.strategy = strategy;
    let model = args.model.as_deref().map(load_model_file).transpose()?;
    if strategy.needs_model() && model.is_none() {
        bail!("strategy {strategy} requires --model");
    }

    let (inst, net) = load_instance(&args.instance, settings.tighten)?;
    let outcome = solve_instance(&net, &cfg, model.as_ref())?;
    let row = report_row(
        instance_stem(&args.instance),
        inst.n_customers(),
        strategy,
        &outcome,
    );
    if let Some(path) = &args.out {
        std::fs::write(path, write_report(std::slice::from_ref(&row), !args.no_timing))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.trace {
        std::fs::write(
            path,
            write_trace(&outcome.stats.per_iteration, !args.no_timing),
        )
        .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{} {}: objective={:.6} iterations={} (full={}) pp={:.3}s rmp={:.3}s total={:.3}s",
        row.instance,
        strategy,
        row.objective,
        outcome.stats.iterations,
        outcome.stats.full_network_iterations,
        row.pp_seconds,
        row.rmp_seconds,
        row.total_seconds
    );
    Ok(row)
}

#[derive(Debug)]
pub struct BenchResult {
    pub failed_cells: usize,
    /// Assembled rows, averages included, as written to the report.
    pub rows: Vec<ReportRow>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchResult> {
    let settings = resolve_settings(&args.flags, None)?;
    let threads = args.threads.unwrap_or(settings.threads).max(1);

    let mut strategies: Vec<Strategy> = vec![Strategy::Baseline];
    for part in args.strategies.split(',') {
        let s: Strategy = part.trim().parse()?;
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }
    let model = args.model.as_deref().map(load_model_file).transpose()?;
    if let Some(s) = strategies.iter().find(|s| s.needs_model()) {
        if model.is_none() {
            bail!("strategy {s} requires --model");
        }
    }

    let loaded: Vec<(String, Result<(VrptwInstance, Network)>)> = args
        .instances
        .iter()
        .map(|p| (instance_stem(p), load_instance(p, settings.tighten)))
        .collect();

    struct Cell {
        inst_idx: usize,
        strategy: Strategy,
    }
    let cells: Vec<Cell> = (0..loaded.len())
        .flat_map(|i| {
            strategies.iter().map(move |&s| Cell {
                inst_idx: i,
                strategy: s,
            })
        })
        .collect();

    type CellOut = std::result::Result<(ReportRow, Vec<IterRecord>), (ReportRow, String)>;
    let mut slots: Vec<Option<CellOut>> = (0..cells.len()).map(|_| None).collect();
    let model_ref = model.as_ref();
    let cfg_base = &settings.cg;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, CellOut)>();
        for worker in 0..threads {
            let tx = tx.clone();
            let cells = &cells;
            let loaded = &loaded;
            scope.spawn(move || {
                for (ci, cell) in cells.iter().enumerate() {
                    if ci % threads != worker {
                        continue;
                    }
                    let (name, inst_net) = &loaded[cell.inst_idx];
                    let out: CellOut = match inst_net {
                        Ok((inst, net)) => {
                            let mut cfg: CgConfig = cfg_base.clone();
                            cfg.strategy = cell.strategy;
                            match solve_instance(net, &cfg, model_ref) {
                                Ok(outcome) => Ok((
                                    report_row(
                                        name.clone(),
                                        inst.n_customers(),
                                        cell.strategy,
                                        &outcome,
                                    ),
                                    outcome.stats.per_iteration,
                                )),
                                Err(e) => Err((
                                    error_row(name.clone(), inst.n_customers(), cell.strategy),
                                    format!("{e}"),
                                )),
                            }
                        }
                        Err(e) => Err((error_row(name.clone(), 0, cell.strategy), format!("{e:#}"))),
                    };
                    if tx.send((ci, out)).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        for (ci, out) in rx {
            slots[ci] = Some(out);
        }
    });

    if let Some(dir) = &args.traces_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut failed = 0usize;
    for (cell, slot) in cells.iter().zip(slots) {
        match slot.expect("every cell reports") {
            Ok((row, trace)) => {
                if let Some(dir) = &args.traces_dir {
                    let file = dir.join(format!(
                        "{}_{}.trace.csv",
                        clean_field(&row.instance),
                        row.strategy
                    ));
                    std::fs::write(&file, write_trace(&trace, !args.no_timing))
                        .with_context(|| format!("writing {}", file.display()))?;
                }
                rows.push(row);
            }
            Err((mut row, msg)) => {
                eprintln!(
                    "cell failed: {} x {}: {msg}",
                    loaded[cell.inst_idx].0, cell.strategy
                );
                row.status = RowStatus::Error(msg);
                rows.push(row);
                failed += 1;
            }
        }
    }

    let rows = assemble_report(rows);
    std::fs::write(&args.out, write_report(&rows, !args.no_timing))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "bench: {} cells ({} instances x {} strategies), {} failed -> {}",
        cells.len(),
        loaded.len(),
        strategies.len(),
        failed,
        args.out.display()
    );
    Ok(BenchResult {
        failed_cells: failed,
        rows,
    })
}

fn error_row(instance: String, customers: usize, strategy: Strategy) -> ReportRow {
    ReportRow {
        instance,
        customers,
        strategy,
        status: RowStatus::Ok,
        iterations: 0.0,
        full_network_iterations: 0.0,
        pp_seconds: 0.0,
        rmp_seconds: 0.0,
        total_seconds: 0.0,
        objective: f64::NAN,
        gain_vs_baseline: None,
    }
}

/// Prints the report as an aligned table and checks that every strategy's
/// objective matches its instance's baseline within `tol`. Returns whether
/// the check passed.
pub fn cmd_report(args: &ReportArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let rows = read_report(&text)?;
    if rows.is_empty() {
        println!("empty report");
        return Ok(true);
    }

    let headers = [
        "instance", "n", "strategy", "status", "iters", "full", "pp(s)", "rmp(s)", "total(s)",
        "objective", "gain%",
    ];
    let mut table: Vec<[String; 11]> = vec![headers.map(str::to_string)];
    for r in &rows {
        table.push([
            r.instance.clone(),
            r.customers.to_string(),
            r.strategy.to_string(),
            match &r.status {
                RowStatus::Ok => "ok".to_string(),
                RowStatus::Error(_) => "error".to_string(),
            },
            format!("{:.1}", r.iterations),
            format!("{:.1}", r.full_network_iterations),
            format!("{:.2}", r.pp_seconds),
            format!("{:.2}", r.rmp_seconds),
            format!("{:.2}", r.total_seconds),
            if r.objective.is_nan() {
                "-".to_string()
            } else {
                format!("{:.6}", r.objective)
            },
            match r.gain_vs_baseline {
                Some(g) => format!("{g:.0}"),
                None => "-".to_string(),
            },
        ]);
    }
    let mut widths = [0usize; 11];
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        println!("{}", line.join("  "));
    }

    let mut max_dev: f64 = 0.0;
    let mut checked = 0usize;
    let mut missing_baseline = 0usize;
    let data_rows: Vec<&ReportRow> = rows
        .iter()
        .filter(|r| !r.is_average() && r.status.is_ok())
        .collect();
    for r in &data_rows {
        if r.strategy == Strategy::Baseline {
            continue;
        }
        match data_rows
            .iter()
            .find(|b| b.strategy == Strategy::Baseline && b.instance == r.instance)
        {
            Some(b) => {
                max_dev = max_dev.max((r.objective - b.objective).abs());
                checked += 1;
            }
            None => missing_baseline += 1,
        }
    }
    if checked == 0 {
        println!("exactness: no strategy/baseline pairs to compare");
        return Ok(missing_baseline == 0);
    }
    let ok = max_dev <= args.tol && missing_baseline == 0;
    println!(
        "exactness: max |objective - baseline| = {max_dev:.3e} over {checked} pair(s) \
         (tol {:.0e}) -> {}",
        args.tol,
        if ok { "OK" } else { "VIOLATION" }
    );
    if missing_baseline > 0 {
        println!("exactness: {missing_baseline} row(s) had no baseline to compare against");
    }
    Ok(ok)
}
