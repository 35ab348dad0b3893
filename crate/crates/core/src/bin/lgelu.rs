use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lambda_gelu::harness::config::TrainConfig;
use lambda_gelu::harness::report::{emit_reports, fmt_f64, rederive};
use lambda_gelu::harness::{
    load_dataset, run_grid, run_substitution_study, run_training, GridRow, HarnessError, HarnessResult,
};
use lambda_gelu::metrics::{best_validation, drift_v_lambda, RunRecord};
use lambda_gelu::ActivationKind;

/// Train λ-GELU networks, sweep (t, c), anneal to ReLU and write CSV reports.
#[derive(Parser)]
#[command(name = "lgelu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config once per seed.
    Train(Common),
    /// Sweep the [grid] table's (t, c) axes against a GELU baseline.
    Grid(Common),
    /// Train with hardness annealed to λ_target after the switch epoch.
    Anneal(Common),
    /// Compare direct GELU→ReLU swaps with annealed λ-GELU→ReLU swaps.
    Substitute(Common),
    /// Rebuild grid.csv and correlation.csv from an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated seeds; overrides training.seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Runs trained in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Ignored; accepted so every subcommand takes the same flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Directory written by an earlier command.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(common: &Common) -> HarnessResult<TrainConfig> {
    let mut cfg = TrainConfig::from_file(&common.config)?;
    if let Some(seeds) = &common.seed {
        cfg = cfg.with_seeds(seeds.clone());
        cfg.validate()?;
    }
    if common.jobs == 0 {
        return Err(HarnessError::Config("--jobs must be at least 1".into()));
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> HarnessResult<ExitCode> {
    match command {
        Command::Train(c) => train(&c, "train", load(&c)?),
        Command::Anneal(c) => {
            let mut cfg = load(&c)?;
            cfg.model.activation = ActivationKind::LambdaGelu;
            cfg.anneal.get_or_insert_with(Default::default);
            train(&c, "anneal", cfg)
        }
        Command::Grid(c) => {
            let cfg = load(&c)?;
            let data = load_dataset(&cfg.dataset, cfg.training.val_fraction)?;
            let rep = run_grid(&cfg, &data, c.jobs)?;
            emit_reports(&c.out, "grid", &cfg, &rep.records, None)?;
            print_grid(&rep.rows);
            println!("wrote {}", c.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Substitute(c) => {
            let cfg = load(&c)?;
            let data = load_dataset(&cfg.dataset, cfg.training.val_fraction)?;
            let st = run_substitution_study(&cfg, &data, c.jobs)?;
            emit_reports(&c.out, "substitute", &cfg, &st.records, Some(&st))?;
            println!("lambda_target = {}", fmt_f64(st.lambda_target));
            println!(
                "{:>6}  {:>10} {:>10}  {:>10} {:>10}",
                "seed", "gelu", "gelu→relu", "annealed", "ann→relu"
            );
            for r in &st.rows {
                println!(
                    "{:>6}  {:>10.4} {:>10.4}  {:>10.4} {:>10.4}",
                    r.seed, r.gelu.original, r.gelu.substituted, r.annealed.original, r.annealed.substituted
                );
            }
            let m = st.mean;
            println!(
                "{:>6}  {:>10.4} {:>10.4}  {:>10.4} {:>10.4}",
                "mean", m.gelu_original, m.gelu_substituted, m.annealed_original, m.annealed_substituted
            );
            println!("wrote {}", c.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(r) => {
            let (rows, corr) = rederive(&r.out)?;
            print_grid(&rows);
            println!("{} correlation rows", corr.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn train(c: &Common, command: &str, cfg: TrainConfig) -> HarnessResult<ExitCode> {
    let data = load_dataset(&cfg.dataset, cfg.training.val_fraction)?;
    let mut records = Vec::new();
    let mut failed = false;
    for &seed in &cfg.training.seeds {
        let out = run_training(&cfg, seed, &data)?;
        print_run(&out.record);
        failed |= out.failed();
        records.push(out.record);
    }
    emit_reports(&c.out, command, &cfg, &records, None)?;
    println!("wrote {}", c.out.display());
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn print_run(r: &RunRecord) {
    if let Some(f) = &r.failure {
        eprintln!("seed {}: diverged: {f}", r.seed);
        return;
    }
    let (bvs, epoch) = best_validation(r).map_or((f64::NAN, 0), |b| b);
    let mut line = format!("seed {}: best {bvs:.4} at epoch {epoch}", r.seed);
    if let Ok(d) = drift_v_lambda(r) {
        line.push_str(&format!(", drift {d:.6}"));
    }
    if let Some(p) = r.profiles.last() {
        let l: Vec<String> = p.lambdas.iter().map(|v| format!("{v:.4}")).collect();
        line.push_str(&format!(", final λ [{}]", l.join(", ")));
    }
    println!("{line}");
}

fn print_grid(rows: &[GridRow]) {
    println!("{:>8} {:>8} {:>14} {:>12}  status", "t", "c", "drift", "delta_bvs");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt_f64);
    for r in rows {
        println!(
            "{:>8} {:>8} {:>14} {:>12}  {}",
            fmt_f64(r.t),
            fmt_f64(r.c),
            opt(r.drift),
            opt(r.delta_bvs),
            r.status
        );
    }
}
