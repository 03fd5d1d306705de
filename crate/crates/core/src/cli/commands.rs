use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::RunConfig;
use crate::baselines::{make_variant, pca_fit, LookupBaseline};
use crate::chemtab_model::{holdout, train_model_logged, write_weights_csv, ChemTabModel, Encoder, TrainReport};
use crate::dataset::{fmt_f64, read_csv, split, write_csv, write_metadata, write_split_manifest, DatasetMetadata, SplitMode};
use crate::eval::{evaluate, export_results, read_results, thread_count, AblationPlan, AblationSettings, EvalReport, ResultRow, ResultTable};
use crate::flamelet::{assemble_dataset, strain_sweep, BoundaryConditions, Grid};
use crate::{Dataset, Error, Mechanism, Result};

fn load_mechanism(c: &RunConfig) -> Result<Mechanism> {
    match &c.mechanism {
        Some(path) => Mechanism::from_file(path),
        None => Ok(Mechanism::default_methane()),
    }
}

fn load_dataset(c: &RunConfig) -> Result<Dataset> {
    let path = c.dataset_path();
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    read_csv(path)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Strain sweep, then the dataset CSV and its `.meta` sidecar.
pub fn cmd_generate(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let mech = load_mechanism(c)?;
    let bc = BoundaryConditions::from_mechanism(&mech);
    let grid = Grid::new(c.grid, c.domain_length)?;
    let solver = c.solver();
    let solutions = strain_sweep(&mech, &bc, &c.sweep(), &grid, &solver)?;
    let (ds, dropped) = assemble_dataset(&solutions)?;
    let solved = solutions.iter().filter(|s| s.converged && !s.extinguished).count();
    if ds.n_rows() == 0 {
        return Err(Error::Solver { step: 0, cell: 0, msg: "no burning flame survived the sweep".into() });
    }
    std::fs::create_dir_all(&c.out)?;
    let path = c.dataset_path();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_csv(&ds, &path)?;
    let meta = DatasetMetadata {
        mechanism_hash: mech.content_hash(),
        grid_points: c.grid,
        domain_length: c.domain_length,
        n_flames_requested: c.flames,
        n_flames_solved: solved,
        shrink: c.shrink,
        pressure: mech.pressure(),
        solver_tolerance: solver.tolerance,
        max_pseudo_steps: solver.max_pseudo_steps,
        extinction_threshold: solver.extinction_threshold,
        rows_kept: ds.n_rows(),
        rows_dropped: dropped,
    };
    let meta_path = write_metadata(&meta, &path)?;
    println!("flames: {solved} of {} requested", c.flames);
    println!("rows kept: {}, dropped: {dropped}", ds.n_rows());
    if let Some(last) = solutions.last().filter(|s| s.extinguished || !s.converged) {
        println!(
            "sweep ended at flame key {:.6e} ({})",
            last.flame_key,
            if last.extinguished { "extinguished" } else { "not converged" }
        );
    }
    println!("wrote {}", path.display());
    Ok(vec![path, meta_path])
}

/// Trains the configured variant on the train side of the split. The
/// training log is written even when training diverges.
pub fn cmd_train(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(c)?;
    let seeds = c.seeds();
    let spec = c.split_spec()?;
    let (train_side, _) = split(&ds, &spec)?;
    let (fit, val) = holdout(&train_side, c.validation_fraction, seeds.holdout)?;
    let model = make_variant(c.variant, &fit, &c.model_spec(), c.lambdas(), &c.fgm_weights, seeds.model)?;

    std::fs::create_dir_all(&c.out)?;
    let split_path = c.out.join("split.txt");
    write_split_manifest(&ds, &spec, &split_path)?;
    let report_path = c.out.join("train_report.csv");
    let mut report = TrainReport::default();
    let outcome = train_model_logged(model, &fit, &val, &c.control(), &mut report);
    report.write_csv(&report_path)?;
    let model = outcome?;

    let ckpt = c.checkpoint_path();
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    model.save(&ckpt, c.seed)?;
    let mut written = vec![split_path, report_path, ckpt];
    if matches!(model.encoder, Encoder::Linear { .. }) {
        let w = c.out.join("weights.csv");
        write_weights_csv(&model, &w)?;
        written.push(w);
    }
    match report.best() {
        Some(b) => println!(
            "{}: {} epochs, best epoch {} with validation source-energy MAE {:.6e}",
            model.label,
            report.epochs.len(),
            b.epoch,
            b.val_energy_mae
        ),
        None => println!("{}: 0 epochs, wrote the initialized model", model.label),
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}

fn eval_header(key_species: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["side", "method", "split", "p", "rows", "mae_source_energy"].map(String::from).to_vec();
    h.extend(key_species.iter().map(|k| format!("mae_{k}")));
    h.extend(["max_gram_offdiag", "norm_min", "norm_max", "max_cov_offdiag"].map(String::from));
    h
}

fn eval_row(side: &str, rows: usize, r: &EvalReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.filter(|x| !x.is_nan()).map(fmt_f64).unwrap_or_default();
    let mut row = vec![
        side.to_string(),
        r.method.clone(),
        r.split.map(|s| s.to_string()).unwrap_or_default(),
        r.p.to_string(),
        rows.to_string(),
        fmt_f64(r.mae_source_energy),
    ];
    row.extend(r.mae_key.iter().map(|(_, v)| fmt_f64(*v)));
    let c = r.conformity.as_ref();
    row.push(opt(c.map(|c| c.max_gram_off_diagonal)));
    row.push(opt(c.map(|c| c.norm_min)));
    row.push(opt(c.map(|c| c.norm_max)));
    row.push(opt(c.map(|c| c.max_covariance_off_diagonal)));
    row
}

/// Scores the checkpoint on the train and test sides of the configured split.
pub fn cmd_evaluate(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let ckpt = c.checkpoint_path();
    if !ckpt.exists() {
        return Err(Error::MissingArtifact(ckpt));
    }
    let ds = load_dataset(c)?;
    let (model, trained_seed) = ChemTabModel::load(&ckpt)?;
    if trained_seed != c.seed {
        eprintln!("warning: checkpoint was trained with seed {trained_seed}, splitting with seed {}", c.seed);
    }
    let spec = c.split_spec()?;
    let (train_side, test_side) = split(&ds, &spec)?;
    let mut rows = Vec::new();
    for (side, part) in [("train", &train_side), ("test", &test_side)] {
        let mut r = evaluate(&model, part)?;
        r.split = Some(spec.mode);
        r.seed = trained_seed;
        println!("{side:5} {} rows: source-energy MAE {:.6e}", part.n_rows(), r.mae_source_energy);
        rows.push(eval_row(side, part.n_rows(), &r));
    }
    std::fs::create_dir_all(&c.out)?;
    let path = c.out.join("evaluation.csv");
    std::fs::write(&path, csv_bytes(&eval_header(&model.key_species), &rows)?)?;
    println!("wrote {}", path.display());
    Ok(vec![path])
}

fn ablation_settings(c: &RunConfig) -> Result<AblationSettings> {
    Ok(AblationSettings {
        spec: c.model_spec(),
        control: c.control(),
        lambdas: c.lambdas(),
        fgm: c.fgm_weights.clone(),
        table_sizes: c.table_grid.clone(),
        threads: thread_count()?,
    })
}

fn run_plan(c: &RunConfig, plan: &AblationPlan, dir: &str) -> Result<Vec<PathBuf>> {
    let ds = load_dataset(c)?;
    let settings = ablation_settings(c)?;
    let n_jobs: usize = plan.cells.iter().map(|cell| cell.repeats).sum();
    println!("{} cells, {n_jobs} training runs on {} worker(s)", plan.cells.len(), settings.threads);
    let table = crate::eval::run_ablation(plan, &ds, c.seeds().ablation, &settings)?;
    for r in &table.rows {
        println!("{}", row_line(r));
    }
    export_results(&table, c.out.join(dir))
}

fn row_line(r: &ResultRow) -> String {
    let mut s = format!("{:12} {:9} p={} MAE {:.4e} +- {:.2e} ({} seeds)", r.method, r.split.to_string(), r.p, r.mae_mean, r.mae_std, r.seeds);
    if let Some(f) = &r.failure {
        let _ = write!(s, " FAILED: {f}");
    }
    s
}

/// Constraint subsets at `cpv` plus CT(ALL) over the PV sweep, both splits.
pub fn cmd_ablate(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let plan = AblationPlan::constraint_study(c.cpv, c.fraction, c.repeats).merge(AblationPlan::pv_sweep(
        &c.pv_sweep,
        c.fraction,
        c.repeats,
    ));
    let written = run_plan(c, &plan, "ablation")?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}

/// Baseline comparison, plus the PCA basis and lookup table fitted on the
/// train side of the configured split.
pub fn cmd_baseline(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let plan = AblationPlan::baselines(c.cpv, c.fraction, c.repeats);
    let mut written = run_plan(c, &plan, "baseline")?;

    let ds = load_dataset(c)?;
    let (train_side, _) = split(&ds, &c.split_spec()?)?;
    let dir = c.out.join("baseline");
    let basis = pca_fit(train_side.y().view(), c.cpv)?;
    let pca_path = dir.join("pca_basis.csv");
    basis.write_csv(train_side.species_names(), &pca_path)?;
    written.push(pca_path);
    let keys = c.model_spec().resolve_key_species(ds.species_names())?;
    let lookup = LookupBaseline::fit(&train_side, &c.fgm_weights, &keys, &c.table_grid)?;
    let table_path = dir.join("lookup.table");
    lookup.table.save(&table_path)?;
    written.push(table_path);
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}

fn read_if_present(path: &Path) -> Result<Option<ResultTable>> {
    if path.exists() {
        read_results(path).map(Some)
    } else {
        Ok(None)
    }
}

fn mean_of(table: &ResultTable, method: &str, split: SplitMode, p: usize) -> Option<f64> {
    table.find(method, split, p).filter(|r| r.failure.is_none() && r.seeds > 0).map(|r| r.mae_mean)
}

/// Text summary of the split-strategy, PV-count and lookup comparisons.
pub fn summarize(table: &ResultTable) -> String {
    let mut s = String::new();
    let mut keys: Vec<(String, usize)> = table.rows.iter().map(|r| (r.method.clone(), r.p)).collect();
    keys.sort();
    keys.dedup();

    let _ = writeln!(s, "split strategy (test source-energy MAE)");
    let _ = writeln!(s, "{:14} {:>3} {:>14} {:>14}  flamelet >= point", "method", "p", "by point", "by flamelet");
    for (m, p) in &keys {
        let point = mean_of(table, m, SplitMode::ByPoint, *p);
        let flame = mean_of(table, m, SplitMode::ByFlamelet, *p);
        let show = |v: Option<f64>| v.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
        let holds = match (point, flame) {
            (Some(a), Some(b)) => if b >= a { "yes" } else { "no" },
            _ => "-",
        };
        let _ = writeln!(s, "{m:14} {p:>3} {:>14} {:>14}  {holds}", show(point), show(flame));
    }

    let mut ps: Vec<usize> = table.rows.iter().filter(|r| r.method == "CT(ALL)").map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    if ps.len() > 1 {
        let _ = writeln!(s, "\nCT(ALL) by number of progress variables");
        for split in [SplitMode::ByPoint, SplitMode::ByFlamelet] {
            let best = ps
                .iter()
                .filter_map(|&p| mean_of(table, "CT(ALL)", split, p).map(|v| (p, v)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((p, v)) = best {
                let _ = writeln!(s, "{split:9} lowest MAE {v:.4e} at p = {p}");
            }
        }
    }

    let lookups: Vec<&ResultRow> = table.rows.iter().filter(|r| r.method == "LOOKUP").collect();
    if !lookups.is_empty() {
        let _ = writeln!(s, "\nCT(ALL) against the two-PV lookup table");
        for r in lookups {
            if let Some(ct) = mean_of(table, "CT(ALL)", r.split, r.p) {
                let _ = writeln!(s, "{:9} CT(ALL) {ct:.4e}, LOOKUP {:.4e}, ratio {:.3}", r.split.to_string(), r.mae_mean, ct / r.mae_mean);
            }
        }
    }

    let failed: Vec<&ResultRow> = table.rows.iter().filter(|r| r.failure.is_some()).collect();
    if !failed.is_empty() {
        let _ = writeln!(s, "\nfailed cells");
        for r in failed {
            let _ = writeln!(s, "{}", row_line(r));
        }
    }
    s
}

/// Merges the ablation and baseline results found under `--out`.
pub fn cmd_report(c: &RunConfig) -> Result<Vec<PathBuf>> {
    let ablation = c.out.join("ablation").join("results.csv");
    let baseline = c.out.join("baseline").join("results.csv");
    let mut merged = ResultTable::default();
    let mut found = false;
    for path in [&ablation, &baseline] {
        if let Some(t) = read_if_present(path)? {
            found = true;
            for row in t.rows {
                if merged.find(&row.method, row.split, row.p).is_none() {
                    merged.rows.push(row);
                }
            }
        }
    }
    if !found {
        return Err(Error::MissingArtifact(ablation));
    }
    merged.rows.sort_by(|a, b| (&a.method, a.split, a.p).cmp(&(&b.method, b.split, b.p)));
    let dir = c.out.join("report");
    let mut written = export_results(&merged, &dir)?;
    let text = summarize(&merged);
    print!("{text}");
    let path = dir.join("summary.txt");
    std::fs::write(&path, text)?;
    written.push(path);
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}
