use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use vprop_core::env::{generate, parse_map, write_map, EnvKind, GridWorld};
use vprop_core::harness::{
    checkpoint, evaluate_planner, gradcheck_suite, render_value_map, EvalReport, MetricsWriter, RunConfig,
    DEFAULT_EVAL_SEEDS, GRADCHECK_TOLERANCE,
};
use vprop_core::planners::{Planner, Variant};
use vprop_core::trainer::{train, Learner};

#[derive(Parser)]
#[command(name = "vprop", version, about = "Train and evaluate value-propagation planners on grid worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a planner; writes config.toml, metrics.csv, model.vprp and eval.json.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint on fresh seeded maps.
    Eval(EvalArgs),
    /// Value-map image and greedy-arrow text for one map.
    Render(RenderArgs),
    /// Write seeded map files.
    Genmaps(GenmapsArgs),
    /// Finite-difference check of every differentiable operation.
    Gradcheck(GradcheckArgs),
    /// Print the default run configuration.
    DefaultConfig,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Skip the evaluation after training.
    #[arg(long)]
    no_eval: bool,
    /// Print a progress line every this many episodes (0 disables).
    #[arg(long, default_value_t = 1000)]
    progress: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated map sizes.
    #[arg(long, value_delimiter = ',', default_value = "12,32,64")]
    sizes: Vec<usize>,
    /// Episodes per size and seed.
    #[arg(long, default_value_t = 40)]
    episodes: usize,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value = "static")]
    env: EnvKind,
    /// Report path; defaults to eval.json next to the checkpoint.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Map file to render; otherwise one is generated from --kind/--size/--seed.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value = "static")]
    kind: EnvKind,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stem; `.pgm` and `.txt` are appended.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenmapsArgs {
    #[arg(long)]
    kind: EnvKind,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "maps")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random non-kink instances per operation.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a).map(|()| true),
        Command::Eval(a) => cmd_eval(a).map(|()| true),
        Command::Render(a) => cmd_render(a).map(|()| true),
        Command::Genmaps(a) => cmd_genmaps(a).map(|()| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::DefaultConfig => RunConfig::default()
            .to_toml()
            .map(|t| print!("{t}"))
            .map(|()| true)
            .map_err(Into::into),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_report(report: &EvalReport) {
    for s in &report.sizes {
        let dist = s
            .mean_distance_to_optimal
            .map_or_else(|| "-".to_string(), |d| format!("{d:.3}"));
        println!(
            "size {:>3}: win rate {:.3} ({}/{}), distance to optimal {dist}, reward min/mean/max {:.3}/{:.3}/{:.3}",
            s.size, s.win_rate, s.wins, s.episodes, s.reward_min, s.reward_mean, s.reward_max
        );
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(e) = a.env {
        cfg.env = e;
    }
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;

    let planner = Planner::new(cfg.planner_config(), &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut learner = Learner::new(planner, cfg.hyperparams);
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"))?;
    let mut io_error = None;
    let (mut wins, mut seen) = (0usize, 0usize);
    let start = Instant::now();
    let summary = train(&cfg.train_spec(), &mut learner, |m| {
        if io_error.is_none() {
            io_error = metrics.record(m).err();
        }
        wins += m.win as usize;
        seen += 1;
        if a.progress > 0 && seen == a.progress {
            eprintln!(
                "episode {:>7}  win rate {:.3}  bound {:>3}  {:.0}s",
                m.episode + 1,
                wins as f64 / seen as f64,
                m.curriculum_bound,
                start.elapsed().as_secs_f64()
            );
            (wins, seen) = (0, 0);
        }
    });
    metrics.finish()?;
    if let Some(e) = io_error {
        return Err(e).context("writing metrics.csv");
    }
    let summary = summary?;
    checkpoint::save(&learner.planner, &dir.join("model.vprp"))?;
    eprintln!(
        "trained {} episodes ({} steps, {} updates, {} wins) in {:.0}s",
        summary.episodes,
        summary.env_steps,
        summary.updates,
        summary.wins,
        start.elapsed().as_secs_f64()
    );
    if !a.no_eval && !cfg.eval_sizes.is_empty() && cfg.eval_episodes > 0 {
        let report = evaluate_planner(&learner.planner, cfg.env, &cfg.eval_sizes, cfg.eval_episodes, &cfg.eval_seeds)?;
        write_report(&report, &dir.join("eval.json"))?;
        print_report(&report);
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if a.sizes.is_empty() {
        bail!("--sizes needs at least one size");
    }
    let planner = checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let seeds = a.seeds.unwrap_or_else(|| DEFAULT_EVAL_SEEDS.to_vec());
    let report = evaluate_planner(&planner, a.env, &a.sizes, a.episodes, &seeds)?;
    let out = a
        .output
        .unwrap_or_else(|| a.checkpoint.with_file_name("eval.json"));
    write_report(&report, &out)?;
    print_report(&report);
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let planner = checkpoint::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let world: GridWorld = match &a.map {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_map(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => generate(a.kind, a.size, a.size, &mut ChaCha8Rng::seed_from_u64(a.seed))?,
    };
    render_value_map(&planner, &world, &a.output)
        .with_context(|| format!("writing {}.pgm/.txt", a.output.display()))?;
    print!("{}", fs::read_to_string(a.output.with_extension("txt"))?);
    Ok(())
}

fn cmd_genmaps(a: GenmapsArgs) -> Result<()> {
    fs::create_dir_all(&a.output_dir).with_context(|| format!("creating {}", a.output_dir.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let digits = a.count.saturating_sub(1).to_string().len();
    for i in 0..a.count {
        let world = generate(a.kind, a.size, a.size, &mut rng)?;
        let path = a
            .output_dir
            .join(format!("{}_{}_{i:0digits$}.map", a.kind, a.size));
        fs::write(&path, write_map(&world)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} maps to {}", a.count, a.output_dir.display());
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<bool> {
    let summaries = gradcheck_suite(a.instances, a.seed)?;
    let mut ok = true;
    for s in &summaries {
        println!(
            "{:<16} {} instances={} kinks_skipped={} max_rel_err={:.2e} (tolerance {GRADCHECK_TOLERANCE:.0e})",
            s.name,
            if s.passed { "PASS" } else { "FAIL" },
            s.instances,
            s.kinks,
            s.max_rel_err
        );
        ok &= s.passed;
    }
    Ok(ok)
}
