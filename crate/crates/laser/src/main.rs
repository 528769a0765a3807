//! Command-line entry point: world generation, training, estimation,
//! benchmark sweeps, and the latent-recovery diagnostic.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use laser::config::{load_config, RunConfig};
use laser::data::{generate_world, load_dataset, save_dataset, true_ate, Dataset};
use laser::error::{Error, Result};
use laser::estimators::estimate;
use laser::evaluation::{align_latents, export_scatter, mape, run_sweep_with, CellResult};
use laser::model::{save_model, train};

#[derive(Parser)]
#[command(name = "laser", about = "Long-term treatment effect estimation from short-term outcomes")]
struct Cli {
    /// Configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides io.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for both generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the benchmark sweep (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a semi-synthetic world: d_obs.csv, d_exp.csv, truth.json.
    Generate,
    /// Train the model on generated data and save it.
    Train,
    /// Estimate the ATE with every configured method.
    Estimate,
    /// Run the configured multi-seed sweep and write the benchmark table.
    Benchmark,
    /// Train on the latent-recovery world and report alignment r-squared.
    Diagnose {
        /// Exit nonzero if any r-squared falls below estimate.r2_threshold.
        #[arg(long)]
        assert: bool,
    },
}

fn load_run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.gen.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
        cfg.data_dir = out.clone();
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn load_world(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let obs = load_dataset(&cfg.data_dir.join("d_obs.csv"))?;
    let exp = load_dataset(&cfg.data_dir.join("d_exp.csv"))?;
    Ok((obs, exp))
}

fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let world = generate_world(&cfg.gen)?;
    save_dataset(&world.d_obs, &cfg.out_dir.join("d_obs.csv"))?;
    save_dataset(&world.d_exp, &cfg.out_dir.join("d_exp.csv"))?;
    let truth = serde_json::json!({
        "tau_true": world.tau_true,
        "seed": cfg.gen.seed,
        "config_digest": cfg.digest,
    });
    write_text(
        &cfg.out_dir.join("truth.json"),
        &format!("{}\n", serde_json::to_string_pretty(&truth).expect("json")),
    )?;
    println!(
        "generated {} observational and {} experimental units (tau = {})",
        world.d_obs.n_units(),
        world.d_exp.n_units(),
        world.tau_true
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let (obs, exp) = load_world(cfg)?;
    let (model, trace) = train(&obs, &exp, &cfg.train)?;
    save_model(&model, &cfg.out_dir.join("model.txt"))?;
    let mut csv = String::from("epoch,total,neg_elbo,kl,recon_m,recon_y\n");
    for (i, b) in trace.iter().enumerate() {
        use std::fmt::Write as _;
        let _ = writeln!(csv, "{i},{},{},{},{},{}", b.total, b.neg_elbo, b.kl, b.recon_m, b.recon_y);
    }
    write_text(&cfg.out_dir.join("loss_trace.csv"), &csv)?;
    println!(
        "trained {} epochs, final loss {}",
        trace.len(),
        trace.last().map_or(f64::NAN, |b| b.total)
    );
    Ok(())
}

fn read_truth(cfg: &RunConfig) -> Option<f64> {
    let text = std::fs::read_to_string(cfg.data_dir.join("truth.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("tau_true")?.as_f64()
}

fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let (obs, exp) = load_world(cfg)?;
    // ground truth, when available: from the truth file or the dataset's
    // potential-outcome columns
    let tau_true = read_truth(cfg).or_else(|| true_ate(&exp).ok());
    for &method in &cfg.methods {
        let mut report = estimate(method, &obs, &exp, &cfg.train)?;
        report.config_digest = cfg.digest.clone();
        report.tau_true = tau_true;
        report.mape = tau_true.and_then(|t| mape(t, report.tau_hat).ok());
        let path = cfg.out_dir.join(format!("report-{method}.json"));
        report.write(&path)?;
        println!(
            "{method}: tau_hat = {}{}",
            report.tau_hat,
            report
                .mape
                .map_or(String::new(), |m| format!(", mape = {m}"))
        );
    }
    Ok(())
}

fn read_cells(path: &Path) -> Vec<CellResult> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect()
}

fn cmd_benchmark(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let spec = cfg.sweep_spec();
    let cells_path = cfg.out_dir.join("cells.jsonl");
    let existing = read_cells(&cells_path);
    if !existing.is_empty() {
        println!("resuming: {} cells already completed", existing.len());
    }
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&cells_path)
        .map_err(|e| Error::io(cells_path.display().to_string(), e))?;
    let sink = Mutex::new(file);
    let table = run_sweep_with(&spec, &existing, &|cell| {
        // one full line per completed cell so an interrupted sweep resumes
        let line = serde_json::to_string(cell).expect("cell json");
        let mut f = sink.lock().expect("cell sink");
        let _ = writeln!(f, "{line}");
        let _ = f.flush();
    })?;
    drop(sink);
    // rewrite the cell log in canonical order so reruns are byte-identical
    let mut all = read_cells(&cells_path);
    all.sort_by(|a, b| {
        (&a.method, a.axis_value, a.seed)
            .partial_cmp(&(&b.method, b.axis_value, b.seed))
            .expect("finite sort keys")
    });
    all.dedup_by(|a, b| a.method == b.method && a.axis_value == b.axis_value && a.seed == b.seed);
    let mut log = String::new();
    for c in &all {
        log.push_str(&serde_json::to_string(c).expect("cell json"));
        log.push('\n');
    }
    write_text(&cells_path, &log)?;
    write_text(&cfg.out_dir.join("benchmark.csv"), &table.to_csv())?;
    write_text(
        &cfg.out_dir.join("benchmark.json"),
        &format!("{}\n", serde_json::to_string_pretty(&table).expect("table json")),
    )?;
    print!("{}", table.to_csv());
    Ok(())
}

fn cmd_diagnose(cfg: &RunConfig, assert_threshold: bool) -> Result<bool> {
    ensure_dir(&cfg.out_dir)?;
    let world = generate_world(&cfg.gen)?;
    let (model, _) = train(&world.d_obs, &world.d_exp, &cfg.train)?;
    let s_true = world
        .d_exp
        .s_true
        .as_ref()
        .ok_or_else(|| Error::Capability("generated world carries no true latents".into()))?;
    let s_hat = model.extract_latents(&world.d_exp)?;
    let alignment = align_latents(s_true, &s_hat)?;
    export_scatter(s_true, &alignment.aligned, &world.d_exp.t, &cfg.out_dir.join("scatter.csv"))?;
    let summary = serde_json::json!({
        "r2_per_dim": alignment.r2_per_dim,
        "degenerate": alignment.degenerate,
        "threshold": cfg.r2_threshold,
        "seed": cfg.gen.seed,
        "config_digest": cfg.digest,
    });
    write_text(
        &cfg.out_dir.join("r2.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("json")),
    )?;
    let ok = alignment.r2_per_dim.iter().all(|&r| r >= cfg.r2_threshold);
    println!(
        "alignment r2 = {:?} (threshold {})",
        alignment.r2_per_dim, cfg.r2_threshold
    );
    if assert_threshold && !ok {
        eprintln!("r2 below threshold {}", cfg.r2_threshold);
        return Ok(false);
    }
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    let cfg = load_run_config(cli)?;
    match cli.cmd {
        Cmd::Generate => cmd_generate(&cfg).map(|()| true),
        Cmd::Train => cmd_train(&cfg).map(|()| true),
        Cmd::Estimate => cmd_estimate(&cfg).map(|()| true),
        Cmd::Benchmark => cmd_benchmark(&cfg).map(|()| true),
        Cmd::Diagnose { assert } => cmd_diagnose(&cfg, assert),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
