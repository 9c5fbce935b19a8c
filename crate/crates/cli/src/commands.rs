use std::io::Write;
use std::path::{Path, PathBuf};

use nvreadout::classify::{
    discard_filter_ml, fit_threshold, read_net, train_shallow_net, write_net, Prediction, ShallowNet, TrainConfig,
    TrainingLog,
};
use nvreadout::dynamics::{
    calibrated_params, dataset_hash, encode_dataset, read_dataset, write_dataset_csv, Class, Dataset, Trajectory,
};
use nvreadout::eval::{
    cross_param_robustness, discard_curve, evaluate_threshold, fidelity_on, flip_analysis, kmeans_analysis, mean_std,
    prepare_cell, rows, sweep_parameters, sweep_repetitions, train_networks, write_discard_series,
    write_flip_histogram, write_repetition_series, write_rows_csv, CellData, Coordinates, Fidelity, FidelityReport,
    Method, RunFidelity,
};
use nvreadout::nvmodel::{build_rate_matrix, build_relaxation_rate_matrix, Level};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Output;
use crate::Command;

struct Ctx<'a> {
    config: &'a RunConfig,
    quiet: bool,
}

impl Ctx<'_> {
    fn note(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("nvreadout: {}", message.as_ref());
        }
    }

    fn prepare(&self, repetitions: usize) -> Result<CellData, CliError> {
        let c = self.config;
        self.note(format!(
            "simulating cell (A_perp {}, k_ion {}): {} + {} traces x {repetitions} repetitions",
            c.cell.a_perp, c.cell.k_ion, c.data.n_train, c.data.n_test
        ));
        Ok(prepare_cell(c.cell, repetitions, &c.experiment_config())?)
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input file {} does not exist", path.display())))
    }
}

fn name_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate { .. } => "simulate",
        Command::Train { .. } => "train",
        Command::Predict { .. } => "predict",
        Command::Eval { .. } => "eval",
        Command::SweepN => "sweep-n",
        Command::SweepParams => "sweep-params",
        Command::Discard => "discard",
        Command::Flips => "flips",
        Command::Robustness => "robustness",
        Command::Kmeans => "kmeans",
        Command::DumpRates { .. } => "dump-rates",
        Command::Validate { .. } => "validate",
    }
}

/// Runs one subcommand. Input paths are checked before the output directory is created.
pub fn execute(cmd: &Command, config: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let inputs: Vec<&PathBuf> = match cmd {
        Command::Train { data, test } => std::iter::once(data).chain(test).collect(),
        Command::Predict { model, data } => vec![model, data],
        Command::Eval { train, test, model } => [train, test].into_iter().chain(model).collect(),
        _ => Vec::new(),
    };
    for p in inputs {
        require_file(p)?;
    }
    if matches!(cmd, Command::SweepN | Command::SweepParams | Command::Robustness) {
        config.nonempty_grid()?;
    }
    let ctx = Ctx { config, quiet };
    let name = name_of(cmd);
    let mut out = Output::create(&config.run.output, name, &config.hash())?;
    let resolved = format!(
        "# nvreadout {name} format_version={} config_hash={}\n{}",
        crate::output::ARTIFACT_FORMAT_VERSION,
        config.hash(),
        config.to_toml_without_run()
    );
    out.write_bytes(&format!("{name}.config.toml"), resolved.as_bytes())?;
    match cmd {
        Command::Simulate { csv } => simulate(&ctx, &mut out, *csv)?,
        Command::Train { data, test } => train(&ctx, &mut out, data, test.as_deref())?,
        Command::Predict { model, data } => predict(&ctx, &mut out, model, data)?,
        Command::Eval { train, test, model } => eval(&ctx, &mut out, train, test, model)?,
        Command::SweepN => sweep_n(&ctx, &mut out)?,
        Command::SweepParams => sweep_params(&ctx, &mut out)?,
        Command::Discard => discard(&ctx, &mut out)?,
        Command::Flips => flips(&ctx, &mut out)?,
        Command::Robustness => robustness(&ctx, &mut out)?,
        Command::Kmeans => kmeans(&ctx, &mut out)?,
        Command::DumpRates { calibrated, relaxation } => dump_rates(&ctx, &mut out, *calibrated, *relaxation)?,
        Command::Validate { .. } => unreachable!("handled before execution"),
    }
    ctx.note(format!("wrote {}", config.run.output.display()));
    out.finish()
}

#[derive(Serialize)]
struct DatasetSummary {
    file: String,
    repetitions: usize,
    n_traces: usize,
    n_flip: usize,
    dataset_hash: String,
}

fn summarize(file: &str, d: &Dataset) -> Result<DatasetSummary, CliError> {
    Ok(DatasetSummary {
        file: file.to_string(),
        repetitions: d.repetitions(),
        n_traces: d.traces.len(),
        n_flip: d.traces.iter().filter(|t| t.has_flip()).count(),
        dataset_hash: dataset_hash(d)?,
    })
}

fn simulate(ctx: &Ctx, out: &mut Output, csv: bool) -> Result<(), CliError> {
    let data = ctx.prepare(ctx.config.data.max_repetitions)?;
    let mut summaries = Vec::new();
    for (stem, d) in [("train", &data.train), ("test", &data.test)] {
        let file = format!("{stem}.nvrt");
        out.write_bytes(&file, &encode_dataset(d)?)?;
        if csv {
            out.write_csv(&format!("{stem}.csv"), |w| write_dataset_csv(w, d))?;
        }
        summaries.push(summarize(&file, d)?);
    }
    #[derive(Serialize)]
    struct Report {
        beta: f64,
        datasets: Vec<DatasetSummary>,
    }
    out.write_json("simulate.json", &Report { beta: data.params.beta, datasets: summaries })
}

fn load(path: &Path) -> Result<Dataset, CliError> {
    read_dataset(path).map_err(|e| match e {
        nvreadout::Error::Io(io) => CliError::io(path, io),
        other => CliError::Contract(format!("{}: {other}", path.display())),
    })
}

fn load_net(path: &Path) -> Result<ShallowNet, CliError> {
    read_net(path).map_err(|e| match e {
        nvreadout::Error::Io(io) => CliError::io(path, io),
        other => CliError::Contract(format!("{}: {other}", path.display())),
    })
}

/// Predictions of `net` on `traces`, truncated to its input length.
fn predict_traces(net: &ShallowNet, traces: &[Trajectory]) -> Result<Vec<Prediction>, CliError> {
    let n = net.n_inputs();
    let counts: Vec<&[u16]> = traces
        .iter()
        .map(|t| {
            t.counts.get(..n).ok_or_else(|| {
                CliError::Contract(format!("network expects {n} repetitions, trace has {}", t.counts.len()))
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(net.predict_batch(&counts)?)
}

fn coordinates(d: &Dataset, repetitions: usize) -> Coordinates {
    let p = &d.manifest.params;
    Coordinates { repetitions, a_perp: p.a_perp, k_ion: p.ionization_coefficient(), discard_ratio: 0.0 }
}

fn run_of(seed: Option<u64>, f: &Fidelity) -> RunFidelity {
    RunFidelity { seed, f: f.f, f_bright: f.f_bright, f_dark: f.f_dark, discard_ratio: 0.0 }
}

fn train(ctx: &Ctx, out: &mut Output, data: &Path, test: Option<&Path>) -> Result<(), CliError> {
    let train_set = load(data)?;
    let test_set = test.map(load).transpose()?;
    let hash = dataset_hash(&train_set)?;
    let refs: Vec<&Trajectory> = train_set.traces.iter().collect();
    let seeds = &ctx.config.data.training_seeds;
    ctx.note(format!("training {} networks on {} traces", seeds.len(), refs.len()));
    let trained: Vec<(u64, ShallowNet, TrainingLog)> = seeds
        .par_iter()
        .map(|&seed| {
            let (net, log) = train_shallow_net(&refs, &TrainConfig { seed, ..ctx.config.train.clone() })?;
            Ok((seed, net, log))
        })
        .collect::<Result<_, nvreadout::Error>>()?;

    #[derive(Serialize)]
    struct Entry {
        seed: u64,
        file: String,
        n_inputs: usize,
        hidden: usize,
        log: TrainingLog,
        test: Option<Fidelity>,
    }
    let mut entries = Vec::new();
    for (seed, net, log) in trained {
        let file = format!("net-seed{seed}.nvsn");
        let tc = TrainConfig { seed, ..ctx.config.train.clone() };
        write_net(&out.path(&file), &net, Some(&tc), Some(&log), Some(&hash))?;
        out.register(&file)?;
        out.register(&format!("net-seed{seed}.json"))?;
        let test = match &test_set {
            Some(t) => Some(fidelity_on(&predict_traces(&net, &t.traces)?, &t.traces, None)?),
            None => None,
        };
        entries.push(Entry { seed, file, n_inputs: net.n_inputs(), hidden: net.hidden(), log, test });
    }
    out.write_json("train.json", &entries)
}

fn predict(ctx: &Ctx, out: &mut Output, model: &Path, data: &Path) -> Result<(), CliError> {
    let net = load_net(model)?;
    let set = load(data)?;
    ctx.note(format!("predicting {} traces", set.traces.len()));
    let preds = predict_traces(&net, &set.traces)?;
    out.write_csv("predictions.csv", |w| {
        writeln!(w, "index,label,p_dark,p_bright,class")?;
        for (i, (p, t)) in preds.iter().zip(&set.traces).enumerate() {
            let class = if p.class == Class::Dark { "dark" } else { "bright" };
            writeln!(w, "{i},{},{},{},{class}", t.label.m_i(), p.p_dark, p.p_bright)?;
        }
        Ok(())
    })?;
    let fid = fidelity_on(&preds, &set.traces, None).ok();
    #[derive(Serialize)]
    struct Report {
        n_inputs: usize,
        n_traces: usize,
        dataset_hash: String,
        fidelity: Option<Fidelity>,
    }
    out.write_json(
        "predict.json",
        &Report { n_inputs: net.n_inputs(), n_traces: preds.len(), dataset_hash: dataset_hash(&set)?, fidelity: fid },
    )
}

fn eval(ctx: &Ctx, out: &mut Output, train: &Path, test: &Path, models: &[PathBuf]) -> Result<(), CliError> {
    let train_set = load(train)?;
    let test_set = load(test)?;
    if train_set.repetitions() != test_set.repetitions() {
        return Err(CliError::Contract(format!(
            "train has {} repetitions, test has {}",
            train_set.repetitions(),
            test_set.repetitions()
        )));
    }
    ctx.note(format!("scoring threshold and {} networks", models.len()));
    let hash = dataset_hash(&test_set)?;
    let n_test = test_set.traces.len();
    let tm = fit_threshold(&train_set.totals(), &train_set.classes())?;
    let tm_preds: Vec<Prediction> = test_set.traces.iter().map(|t| tm.classify(&t.counts)).collect();
    let tm_fid = fidelity_on(&tm_preds, &test_set.traces, None)?;
    let mut reports =
        vec![FidelityReport::single(Method::Threshold, coordinates(&test_set, test_set.repetitions()), tm_fid, 0.0, n_test, &hash)];
    if !models.is_empty() {
        let mut runs = Vec::new();
        let mut n_inputs = None;
        for (i, path) in models.iter().enumerate() {
            let net = load_net(path)?;
            if *n_inputs.get_or_insert(net.n_inputs()) != net.n_inputs() {
                return Err(CliError::Contract("networks have different input lengths".into()));
            }
            let fid = fidelity_on(&predict_traces(&net, &test_set.traces)?, &test_set.traces, None)?;
            runs.push(run_of(Some(i as u64), &fid));
        }
        let coords = coordinates(&test_set, n_inputs.unwrap_or(0));
        reports.push(FidelityReport::from_runs(Method::Network, coords, runs, n_test, &hash));
    }
    let all_rows: Vec<_> = reports.iter().flat_map(|r| rows("eval", r)).collect();
    out.write_csv("eval.csv", |w| write_rows_csv(w, &all_rows))?;
    #[derive(Serialize)]
    struct Report<'a> {
        threshold: &'a nvreadout::classify::ThresholdModel,
        reports: &'a [FidelityReport],
    }
    out.write_json("eval.json", &Report { threshold: &tm, reports: &reports })
}

fn sweep_n(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    let data = ctx.prepare(c.data.max_repetitions)?;
    let grid = c.nonempty_grid()?;
    ctx.note(format!("sweeping {} repetition counts", grid.len()));
    let sweep = sweep_repetitions(&data, &grid, &c.sweep.ml_repetitions, &c.experiment_config())?;
    ctx.note(format!("N_opt = {}", sweep.n_opt));
    out.write_csv("sweep_n.csv", |w| write_repetition_series(w, &sweep))?;
    out.write_json("sweep_n.json", &sweep)
}

fn sweep_params(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    ctx.note(format!("sweeping {} parameter cells", c.sweep.cells.len()));
    let cells = sweep_parameters(&c.sweep.cells, &c.nonempty_grid()?, &c.experiment_config())?;
    out.write_csv("sweep_params.csv", |w| {
        writeln!(w, "a_perp,k_ion,beta,n_opt,tm_f,ml_f_opt,ml_f_opt_std,ml_f_max,ml_f_max_std")?;
        for s in &cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                s.cell.a_perp, s.cell.k_ion, s.beta, s.n_opt, s.tm_at_opt.f, s.ml_at_opt.f, s.ml_at_opt.f_std, s.ml_at_max.f, s.ml_at_max.f_std
            )?;
        }
        Ok(())
    })?;
    out.write_json("sweep_params.json", &cells)
}

fn discard(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    let data = ctx.prepare(c.data.max_repetitions)?;
    ctx.note("training networks");
    let nets = train_networks(&data, &c.experiment_config())?;
    let curve = discard_curve(&data, &nets, &c.discard.ratios)?;

    #[derive(Serialize)]
    struct MarginPoint {
        t: f64,
        discard_ratio: f64,
        n_scored: usize,
        f: Option<f64>,
        f_std: Option<f64>,
    }
    let mut margins = Vec::new();
    for &t in &c.discard.t {
        let mut f = Vec::new();
        let mut ratio = Vec::new();
        for net in &nets {
            let kept = discard_filter_ml(&net.predictions, t)?;
            ratio.push(kept.discard_ratio);
            // A kept set holding a single class has no fidelity.
            if let Ok(fid) = fidelity_on(&net.predictions, &data.test.traces, Some(&kept.kept)) {
                f.push(fid.f);
            }
        }
        let n_scored = f.len();
        let (f, f_std) = if f.is_empty() { (None, None) } else { let (m, s) = mean_std(&f); (Some(m), Some(s)) };
        margins.push(MarginPoint { t, discard_ratio: mean_std(&ratio).0, n_scored, f, f_std });
    }
    out.write_csv("discard.csv", |w| write_discard_series(w, &curve))?;
    #[derive(Serialize)]
    struct Report {
        curve: Vec<nvreadout::eval::DiscardPoint>,
        ml_margins: Vec<MarginPoint>,
    }
    out.write_json("discard.json", &Report { curve, ml_margins: margins })
}

fn flips(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    let data = ctx.prepare(c.data.max_repetitions)?;
    let (_, tm_preds, _) = evaluate_threshold(&data)?;
    ctx.note("training networks");
    let nets = train_networks(&data, &c.experiment_config())?;
    #[derive(Serialize)]
    struct Entry {
        seed: u64,
        report: nvreadout::eval::FlipReport,
    }
    let mut entries = Vec::new();
    for net in &nets {
        let report = flip_analysis(&data.test.traces, &tm_preds, &net.predictions, c.flips.bins)?;
        out.write_csv(&format!("flips-seed{}.csv", net.seed), |w| write_flip_histogram(w, &report))?;
        entries.push(Entry { seed: net.seed, report });
    }
    out.write_json("flips.json", &entries)
}

fn robustness(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    let cfg = c.experiment_config();
    let reference = ctx.prepare(c.robustness.reference_repetitions)?;
    ctx.note("training reference networks");
    let nets = train_networks(&reference, &cfg)?;
    ctx.note(format!("scoring on {} cells", c.robustness.cells.len()));
    let rows = cross_param_robustness(&nets, &c.robustness.cells, &c.nonempty_grid()?, &cfg)?;
    out.write_csv("robustness.csv", |w| {
        writeln!(w, "a_perp,k_ion,n_opt,tm_f,ml_native_f,ml_native_f_std,network_r_f,network_r_f_std")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.cell.a_perp, r.cell.k_ion, r.n_opt, r.tm.f, r.ml_native.f, r.ml_native.f_std, r.network_r.f, r.network_r.f_std
            )?;
        }
        Ok(())
    })?;
    out.write_json("robustness.json", &rows)
}

fn kmeans(ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let c = ctx.config;
    let data = ctx.prepare(c.data.max_repetitions)?;
    let reports = [Class::Dark, Class::Bright]
        .into_iter()
        .map(|g| kmeans_analysis(&data, g, c.kmeans.k, c.kmeans.seed))
        .collect::<Result<Vec<_>, _>>()?;
    out.write_csv("kmeans.csv", |w| {
        writeln!(w, "group,k,n_group,accuracy_before,accuracy_after,discard_ratio,flip_fraction_group,flip_fraction_discarded")?;
        for r in &reports {
            let group = if r.group == Class::Dark { "dark" } else { "bright" };
            writeln!(
                w,
                "{group},{},{},{},{},{},{},{}",
                r.k, r.n_group, r.accuracy_before, r.accuracy_after, r.discard_ratio, r.flip_fraction_group, r.flip_fraction_discarded
            )?;
        }
        Ok(())
    })?;
    out.write_json("kmeans.json", &reports)
}

fn dump_rates(ctx: &Ctx, out: &mut Output, calibrated: bool, relaxation: bool) -> Result<(), CliError> {
    let c = ctx.config;
    let mut params = c.cell.apply(&c.params)?;
    if calibrated {
        params = calibrated_params(&params, &c.timing, &c.budget)?;
        ctx.note(format!("calibrated beta = {}", params.beta));
    }
    let matrix = if relaxation { build_relaxation_rate_matrix(&params)? } else { build_rate_matrix(&params)? };
    let levels: Vec<Level> = Level::all().collect();
    out.write_csv("rates.csv", |w| {
        write!(w, "\"from\\to\"")?;
        for l in &levels {
            write!(w, ",\"{l}\"")?;
        }
        writeln!(w)?;
        for from in &levels {
            write!(w, "\"{from}\"")?;
            for to in &levels {
                write!(w, ",{}", matrix.rate(*from, *to))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.write_json("rates.json", &params)
}
