//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 1-8 always run. The full-scale reproduction (9-11) runs when
//! `NVREADOUT_FULL=1` is set; it simulates 10⁴ + 10⁴ traces of 8000
//! repetitions per parameter cell and trains 10 networks per point.
//!
//! Failures are reported but only turn into a nonzero exit status with
//! `NVREADOUT_STRICT=1`.

mod common;

use std::time::Instant;

use nalgebra::DMatrix;
use nvreadout::classify::{encode_net, ShallowNet};
use nvreadout::dynamics::*;
use nvreadout::eval::*;
use nvreadout::nvmodel::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const CELLS: [(f64, f64); 9] = [
    (-30.0, 70.0),
    (-30.0, 90.0),
    (-30.0, 110.0),
    (-40.0, 70.0),
    (-40.0, 90.0),
    (-40.0, 110.0),
    (-50.0, 70.0),
    (-50.0, 90.0),
    (-50.0, 110.0),
];

fn averaging_oracle() -> Outcome {
    let entries: Vec<Level> = Level::all()
        .filter(|l| l.electronic().manifold() == Manifold::Excited)
        .collect();
    let mut worst: f64 = 0.0;
    for (a_perp, k_ion) in CELLS {
        let h = build_hamiltonian(&default_params(a_perp, k_ion, 1.0).unwrap());
        for &entry in &entries {
            let fast = effective_population_matrix(&h, entry).unwrap();
            let slow = common::schrodinger_average(&h.matrix, entry.index(), 1000.0, 200.0);
            for (i, s) in slow.iter().enumerate() {
                worst = worst.max((fast[i] - s).abs());
            }
        }
    }
    outcome(worst < 1e-6, format!("max |P_avg - P_rk4| = {worst:.2e} over 9 cells x {} entry levels (< 1e-6)", entries.len()))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, h, b) = (rng.random_range(2..12), rng.random_range(1..6), rng.random_range(1..10));
        let net = ShallowNet::random(n, h, &mut rng);
        let x = DMatrix::from_fn(n, b, |_, _| rng.random_range(0.0..1.5));
        let t: Vec<usize> = (0..b).map(|_| rng.random_range(0..2)).collect();
        worst = worst.max(common::gradient_error(&net, &x, &t));
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 20 random nets (< 1e-5)"))
}

fn charge_ratio() -> Outcome {
    let timing = PulseTiming::default();
    let params = calibrated_params(&PhysicalParams::default(), &timing, &PhotonBudget::default()).unwrap();
    let model = ReadoutModel::new(&params, &timing).unwrap();
    let start = Level::new(ElectronicLevel::MinusGround(0), 0).unwrap();
    let f = continuous_negative_fraction(&model.illuminated, start, 2000.0);
    outcome((f - 0.70).abs() <= 0.02, format!("NV- fraction {f:.4} at beta = {:.4} (0.70 ± 0.02)", params.beta))
}

/// Threshold and network results for one data seed.
struct DeskRun {
    data: CellData,
    tm: Vec<nvreadout::classify::Prediction>,
    tm_f: f64,
    nets: Vec<TrainedNet>,
}

fn desk_runs(base: &PhysicalParams, cell: Cell, seeds: &[u64]) -> Vec<DeskRun> {
    seeded_runs(&ExperimentConfig { base: base.clone(), ..ExperimentConfig::desk() }, cell, seeds)
}

/// Reference cell at the default budget's repetition count (4000 train / 4000 test).
fn reference_runs(seeds: &[u64]) -> Vec<DeskRun> {
    let n = PhotonBudget::default().repetitions;
    let cfg = ExperimentConfig { n_train: 4000, n_test: 4000, max_repetitions: n, ..ExperimentConfig::desk() };
    seeded_runs(&cfg, Cell::REFERENCE, seeds)
}

fn seeded_runs(template: &ExperimentConfig, cell: Cell, seeds: &[u64]) -> Vec<DeskRun> {
    seeds
        .iter()
        .map(|&s| {
            let cfg = ExperimentConfig { data_seed: s, training_seeds: vec![s], ..template.clone() };
            let data = prepare_cell(cell, cfg.max_repetitions, &cfg).unwrap();
            let (_, tm, fid) = evaluate_threshold(&data).unwrap();
            let nets = train_networks(&data, &cfg).unwrap();
            DeskRun { data, tm, tm_f: fid.f, nets }
        })
        .collect()
}

fn control(seeds: &[u64]) -> Outcome {
    let timing = PulseTiming::default();
    let mut base = PhysicalParams::default();
    base.c_perp = 0.0;
    let cell = Cell { a_perp: 0.0, k_ion: 90.0 };
    let params = calibrated_params(&cell.apply(&base).unwrap(), &timing, &PhotonBudget::default()).unwrap();
    let model = ReadoutModel::new(&params, &timing).unwrap();
    let ds = generate_dataset(99, 0, 10_000, 1000, &ClassMix::default(), &model).unwrap();
    let flipped = ds.traces.iter().filter(|t| t.has_flip()).count();

    let runs = desk_runs(&base, cell, seeds);
    let tm: Vec<f64> = runs.iter().map(|r| r.tm_f).collect();
    let ml: Vec<f64> = runs.iter().map(|r| r.nets[0].fidelity.f).collect();
    let (tm_m, tm_s) = mean_std(&tm);
    let (ml_m, ml_s) = mean_std(&ml);
    let sigma = (tm_s * tm_s + ml_s * ml_s).sqrt();
    let flips_desk: usize = runs.iter().map(|r| r.data.test.traces.iter().filter(|t| t.has_flip()).count()).sum();

    // Informational: A_perp = 0 alone leaves the NV0 transverse term on.
    let apo = calibrated_params(&cell.apply(&PhysicalParams::default()).unwrap(), &timing, &PhotonBudget::default()).unwrap();
    let apo_model = ReadoutModel::new(&apo, &timing).unwrap();
    let apo_flips = generate_dataset(99, 0, 10_000, 1000, &ClassMix::default(), &apo_model)
        .unwrap()
        .traces
        .iter()
        .filter(|t| t.has_flip())
        .count();

    outcome(
        flipped == 0 && flips_desk == 0 && (ml_m - tm_m).abs() <= sigma,
        format!(
            "flipped traces {flipped}/10000; TM {tm_m:.4}±{tm_s:.4} vs ML {ml_m:.4}±{ml_s:.4}, |Δ| = {:.4} (≤ 1σ = {sigma:.4}); with C_perp on: {apo_flips} flipped",
            (ml_m - tm_m).abs()
        ),
    )
}

fn determinism() -> Outcome {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let cfg = ExperimentConfig {
                n_train: 400,
                n_test: 200,
                max_repetitions: 300,
                training_seeds: vec![3, 4],
                ..ExperimentConfig::desk()
            };
            let data = prepare_cell(Cell::REFERENCE, 300, &cfg).unwrap();
            let nets = train_networks(&data, &cfg).unwrap();
            let sweep = sweep_repetitions(&data, &[100, 200, 300], &[300], &cfg).unwrap();
            (
                dataset_hash(&data.train).unwrap() + &dataset_hash(&data.test).unwrap(),
                nets.iter().map(|n| encode_net(&n.net)).collect::<Vec<_>>(),
                to_json(&sweep).unwrap(),
            )
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(1);
    outcome(
        a == b && a == c,
        format!(
            "1 vs 4 workers: datasets {}, models {}, reports {}",
            if a.0 == b.0 { "identical" } else { "differ" },
            if a.1 == b.1 { "identical" } else { "differ" },
            if a.2 == b.2 { "identical" } else { "differ" }
        ),
    )
}

fn desk_ordering(runs: &[DeskRun]) -> Outcome {
    let tm: Vec<f64> = runs.iter().map(|r| r.tm_f).collect();
    let ml: Vec<f64> = runs.iter().map(|r| r.nets[0].fidelity.f).collect();
    let (tm_m, _) = mean_std(&tm);
    let (ml_m, _) = mean_std(&ml);
    let (mut n_flip, mut tm_ok, mut ml_ok) = (0usize, 0usize, 0usize);
    for r in runs {
        for (i, t) in r.data.test.traces.iter().enumerate() {
            if t.has_flip() {
                n_flip += 1;
                tm_ok += (r.tm[i].class == t.label.class()) as usize;
                ml_ok += (r.nets[0].predictions[i].class == t.label.class()) as usize;
            }
        }
    }
    let tm_acc = tm_ok as f64 / n_flip as f64;
    let ml_acc = ml_ok as f64 / n_flip as f64;
    outcome(
        ml_m >= tm_m && ml_acc - tm_acc >= 0.05,
        format!(
            "mean F: ML {ml_m:.4} vs TM {tm_m:.4}; flip subset ({n_flip} traces): ML {ml_acc:.4} vs TM {tm_acc:.4} (Δ ≥ 0.05)"
        ),
    )
}

fn discard_monotonicity(runs: &[DeskRun]) -> Outcome {
    let targets = [0.0, 0.05, 0.1, 0.2, 0.3];
    let curves: Vec<Vec<DiscardPoint>> = runs.iter().map(|r| discard_curve(&r.data, &r.nets, &targets).unwrap()).collect();
    let stat = |k: usize, tm: bool| {
        let v: Vec<f64> = curves.iter().map(|c| if tm { c[k].tm.f } else { c[k].ml.f }).collect();
        mean_std(&v)
    };
    let mut pass = true;
    let mut line = String::new();
    for k in 0..targets.len() {
        let (tm, tm_s) = stat(k, true);
        let (ml, ml_s) = stat(k, false);
        let ratio = mean_std(&curves.iter().map(|c| c[k].tm.coordinates.discard_ratio).collect::<Vec<_>>()).0;
        if k > 0 {
            let (tm_prev, _) = stat(k - 1, true);
            let (ml_prev, _) = stat(k - 1, false);
            pass &= tm >= tm_prev - tm_s && ml >= ml_prev - ml_s;
        }
        pass &= ml >= tm;
        line += &format!(" r={ratio:.3}: TM {tm:.4} ML {ml:.4};");
    }
    outcome(pass, format!("non-decreasing within 1σ and ML ≥ TM:{}", line.trim_end_matches(';')))
}

fn kmeans_discard_improves(runs: &[DeskRun]) -> Outcome {
    let reports: Vec<KMeansGroupReport> = runs
        .iter()
        .enumerate()
        .map(|(s, r)| kmeans_analysis(&r.data, Class::Dark, 3, s as u64).unwrap())
        .collect();
    let improved = reports.iter().filter(|r| r.accuracy_after > r.accuracy_before).count();
    let detail: Vec<String> = reports
        .iter()
        .map(|r| format!("{:.4}->{:.4} (-{:.1}%)", r.accuracy_before, r.accuracy_after, 100.0 * r.discard_ratio))
        .collect();
    outcome(2 * improved > reports.len(), format!("dark-group accuracy improved in {improved}/{}: {}", reports.len(), detail.join(", ")))
}

struct FullScale {
    sweep: RepetitionSweep,
    tm_opt: f64,
    ml_opt: FidelityReport,
    ml_max: FidelityReport,
    nets_opt: Vec<TrainedNet>,
    cfg: ExperimentConfig,
}

fn full_scale() -> FullScale {
    let cfg = ExperimentConfig::default();
    let data = prepare_cell(Cell::REFERENCE, cfg.max_repetitions, &cfg).unwrap();
    let grid = repetition_grid(cfg.max_repetitions);
    let sweep = sweep_repetitions(&data, &grid, &[], &cfg).unwrap();
    let n_opt = sweep.n_opt;
    let at_opt = data.truncated(n_opt).unwrap();
    let nets_opt = train_networks(&at_opt, &cfg).unwrap();
    let ml_opt = report_of(&at_opt, &nets_opt);
    let nets_max = train_networks(&data, &cfg).unwrap();
    let ml_max = report_of(&data, &nets_max);
    let tm_opt = sweep.point(n_opt).unwrap().tm.f;
    FullScale { sweep, tm_opt, ml_opt, ml_max, nets_opt, cfg }
}

fn report_of(data: &CellData, nets: &[TrainedNet]) -> FidelityReport {
    let runs = nets
        .iter()
        .map(|n| RunFidelity { seed: Some(n.seed), f: n.fidelity.f, f_bright: n.fidelity.f_bright, f_dark: n.fidelity.f_dark, discard_ratio: 0.0 })
        .collect();
    let coords = Coordinates { repetitions: data.repetitions(), a_perp: data.cell.a_perp, k_ion: data.cell.k_ion, discard_ratio: 0.0 };
    FidelityReport::from_runs(Method::Network, coords, runs, data.test.traces.len(), &data.test_hash().unwrap())
}

fn reference_fidelities(fs: &FullScale) -> Outcome {
    let tm = fs.tm_opt;
    let ml = fs.ml_opt.f;
    let gap = 100.0 * (ml - tm);
    let gap_max = 100.0 * (fs.ml_max.f - tm);
    let pass = (tm - 0.9698).abs() <= 0.005 && (ml - 0.9732).abs() <= 0.005 && (gap - 0.34).abs() <= 0.2 && gap_max <= 0.57 + 0.2;
    outcome(
        pass,
        format!(
            "N_opt {}: TM {tm:.4} (0.9698±0.005), ML {ml:.4}±{:.4} (0.9732±0.005), gap {gap:.2} pp (0.34±0.2), ML(8000) {:.4} gap {gap_max:.2} pp (≤ 0.77)",
            fs.sweep.n_opt, fs.ml_opt.f_std, fs.ml_max.f
        ),
    )
}

fn interior_maximum(fs: &FullScale) -> Outcome {
    let first = fs.sweep.points.first().unwrap().tm.f;
    let last = fs.sweep.points.last().unwrap().tm.f;
    let n = fs.sweep.n_opt;
    outcome(
        (2000..=2750).contains(&n) && first < fs.tm_opt && last < fs.tm_opt,
        format!("N_opt = {n} (in [2000, 2750]); TM F(500) {first:.4} < F(N_opt) {:.4} > F(8000) {last:.4}", fs.tm_opt),
    )
}

fn robustness(fs: &FullScale) -> Outcome {
    let cells = [Cell { a_perp: -40.0, k_ion: 90.0 }, Cell { a_perp: -30.0, k_ion: 90.0 }, Cell { a_perp: -50.0, k_ion: 100.0 }];
    let grid: Vec<usize> = (1000..=4000).step_by(125).collect();
    let rows = cross_param_robustness(&fs.nets_opt, &cells, &grid, &fs.cfg).unwrap();
    let d = |r: &RobustnessRow| 100.0 * (r.network_r.f - r.tm.f);
    let pass = d(&rows[0]) > 0.0 && d(&rows[1]).abs() < 0.2 && d(&rows[2]) < 0.0;
    let detail: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "({}, {}) N_opt {}: R {:.4} native {:.4} TM {:.4}",
                r.cell.a_perp, r.cell.k_ion, r.n_opt, r.network_r.f, r.ml_native.f, r.tm.f
            )
        })
        .collect();
    outcome(pass, format!("R>TM at -40, |R-TM|<0.2pp at -30, R<TM at k_ion 100: {}", detail.join("; ")))
}

fn info(id: &str, name: &str, o: Outcome) {
    let tag = if o.pass { "holds" } else { "does not hold" };
    println!("[INFO] {id} {name} ({tag}): {}", o.detail);
}

fn main() {
    let mut failures = 0;
    let mut line = |id: &str, name: &str, o: Outcome, t: Instant| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failures += (!o.pass) as usize;
        println!("[{tag}] {id} {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
    };
    let seeds: Vec<u64> = (1..=5).collect();

    let t = Instant::now();
    line("1", "averaging oracle", averaging_oracle(), t);
    let t = Instant::now();
    line("2", "gradient check", gradient_check(), t);
    let t = Instant::now();
    line("3", "charge ratio", charge_ratio(), t);
    let t = Instant::now();
    line("4", "A_perp=0 control", control(&seeds), t);
    let t = Instant::now();
    line("5", "determinism", determinism(), t);
    let t = Instant::now();
    let runs = desk_runs(&PhysicalParams::default(), Cell::REFERENCE, &seeds);
    line("6", "desk-scale ordering", desk_ordering(&runs), t);
    let t = Instant::now();
    let desk_discard = discard_monotonicity(&runs);
    let desk_kmeans = kmeans_discard_improves(&runs);
    let reference = reference_runs(&seeds);
    line("7", "discard monotonicity (N=2375)", discard_monotonicity(&reference), t);
    info("7", "desk scale", desk_discard);
    let t = Instant::now();
    line("8", "k-means discard (N=2375)", kmeans_discard_improves(&reference), t);
    info("8", "desk scale", desk_kmeans);
    info("6", "same ordering at N=2375", desk_ordering(&reference));

    if std::env::var("NVREADOUT_FULL").is_ok_and(|v| v == "1") {
        let t = Instant::now();
        let fs = full_scale();
        line("9", "reference-cell fidelities and gaps", reference_fidelities(&fs), t);
        line("10", "interior TM optimum", interior_maximum(&fs), t);
        let t = Instant::now();
        line("11", "transfer robustness", robustness(&fs), t);
    } else {
        println!("[SKIP] 9-11 full-scale reproduction: set NVREADOUT_FULL=1");
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        if std::env::var("NVREADOUT_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    } else {
        println!("all acceptance criteria passed");
    }
}
