//! `imrl` subcommands. Every subcommand reads an optional flat config file;
//! omitted keys take their defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use imrl_core::geometry::{optimal_scoop_point, BinaryMask};
use imrl_core::pipeline::{
    ablation_suite, clips_from_demos, dataset_embeddings, embedding_metrics, evaluate, gen_demos, gen_food_dataset,
    train_bc, train_repr, tsne_2d, Encoder, FoodImageDataset, PolicyParams, Split,
};
use imrl_core::report::{write_bc_loss_csv, write_hash_sidecar, write_points_csv, write_repr_loss_csv};
use imrl_core::seed::derive;
use imrl_core::simworld::trajectory::{read_trajectories, write_trajectories};
use imrl_core::simworld::{EnvSuite, PropertyClass, Trajectory};
use imrl_core::{parse_config, write_report, ImrlError, MetricsReport, MetricsRow, Result, RunConfig};

pub use imrl_core::config;
pub use imrl_core::report;

#[derive(Parser, Debug)]
#[command(name = "imrl", version, about = "Representation learning and behavior cloning for food scooping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Flat key=value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the labelled food-image dataset.
    GenData(ConfigArg),
    /// Roll out the scripted expert and store the demonstrations.
    GenDemos(ConfigArg),
    /// Pretrain the encoder.
    TrainRepr(ConfigArg),
    /// Behavior-clone a policy on top of the encoder.
    TrainBc(ConfigArg),
    /// Evaluate the trained policy on the configured suite.
    Eval(ConfigArg),
    /// Train and evaluate the four ablation variants.
    Ablate(ConfigArg),
    /// Print the optimal scooping point of a PGM mask.
    ScoopPoint {
        #[arg(long)]
        mask: PathBuf,
        /// Density window side (odd).
        #[arg(long, default_value_t = 9)]
        r: usize,
        /// Minimum distance from the mask boundary.
        #[arg(long, default_value_t = 3.0)]
        m: f64,
    },
    /// Export embeddings, embedding metrics and a t-SNE layout.
    Embed(ConfigArg),
}

/// Runs the CLI on `argv` (program name first) and returns the exit status.
pub fn run_command(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        Some(p) => parse_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data_cmd(&load_config(&a)?),
        Command::GenDemos(a) => gen_demos_cmd(&load_config(&a)?),
        Command::TrainRepr(a) => train_repr_cmd(&load_config(&a)?),
        Command::TrainBc(a) => train_bc_cmd(&load_config(&a)?),
        Command::Eval(a) => eval_cmd(&load_config(&a)?),
        Command::Ablate(a) => ablate_cmd(&load_config(&a)?),
        Command::ScoopPoint { mask, r, m } => scoop_point_cmd(&mask, r, m),
        Command::Embed(a) => embed_cmd(&load_config(&a)?),
    }
}

fn dataset_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("dataset")
}

/// Encoder fine-tuned alongside the policy.
fn bc_encoder_file(cfg: &RunConfig) -> PathBuf {
    cfg.policy_file().with_extension("encoder.bin")
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| ImrlError::io(dir, e)),
        None => Ok(()),
    }
}

fn make_dataset(cfg: &RunConfig) -> Result<FoodImageDataset> {
    gen_food_dataset(&cfg.dataset_spec(), derive(cfg.seed, "dataset"))
}

fn make_demos(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let suite = EnvSuite::by_name(&cfg.eval_suite)?;
    gen_demos(cfg.demos, &suite, cfg.attempts, cfg.fullness_label, derive(cfg.seed, "demos"))
}

/// The stored dataset if present, otherwise a fresh one from the config.
fn dataset_or_generate(cfg: &RunConfig) -> Result<FoodImageDataset> {
    let dir = dataset_dir(cfg);
    if dir.join("labels.csv").exists() {
        FoodImageDataset::load(&dir)
    } else {
        make_dataset(cfg)
    }
}

fn demos_or_generate(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    let p = cfg.demos_file();
    if p.exists() {
        read_trajectories(&p)
    } else {
        make_demos(cfg)
    }
}

fn gen_data_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = make_dataset(cfg)?;
    let dir = dataset_dir(cfg);
    ds.save(&dir, &cfg.hash())?;
    println!("{} images, {} types -> {}", ds.len(), ds.num_types(), dir.display());
    Ok(())
}

fn gen_demos_cmd(cfg: &RunConfig) -> Result<()> {
    let demos = make_demos(cfg)?;
    let p = cfg.demos_file();
    ensure_parent(&p)?;
    write_trajectories(&p, &demos)?;
    write_hash_sidecar(&p, &cfg.hash())?;
    let steps: usize = demos.iter().map(|d| d.steps.len()).sum();
    println!("{} demos, {steps} steps -> {}", demos.len(), p.display());
    Ok(())
}

fn train_repr_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = dataset_or_generate(cfg)?;
    let demos = demos_or_generate(cfg)?;
    let clips = clips_from_demos(&demos, cfg.temporal_frames, cfg.clips_per_attempt, derive(cfg.seed, "clips"))?;
    let (enc, history) = train_repr(&ds, &clips, &cfg.loss_weights(), &cfg.repr_config())?;
    let p = cfg.encoder_file();
    ensure_parent(&p)?;
    enc.save(&p)?;
    write_hash_sidecar(&p, &cfg.hash())?;
    write_repr_loss_csv(&history, &cfg.hash(), &cfg.loss_file())?;
    let first = history.frozen_loss.first().copied().unwrap_or(f64::NAN);
    let last = history.frozen_loss.last().copied().unwrap_or(f64::NAN);
    println!("L_z {first:.4} -> {last:.4}; encoder -> {}", p.display());
    Ok(())
}

fn train_bc_cmd(cfg: &RunConfig) -> Result<()> {
    let demos = demos_or_generate(cfg)?;
    let enc = Encoder::load(&cfg.encoder_file())?;
    let (policy, tuned, history) = train_bc(&demos, &enc, &cfg.bc_config())?;
    let p = cfg.policy_file();
    ensure_parent(&p)?;
    policy.save(&p)?;
    write_hash_sidecar(&p, &cfg.hash())?;
    let ep = bc_encoder_file(cfg);
    tuned.save(&ep)?;
    write_hash_sidecar(&ep, &cfg.hash())?;
    write_bc_loss_csv(&history, &cfg.hash(), &cfg.out_dir.join("bc_loss.csv"))?;
    let last = history.epoch_nll.last().copied().unwrap_or(history.initial_nll);
    println!("NLL {:.4} -> {last:.4}; policy -> {}", history.initial_nll, p.display());
    Ok(())
}

fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let policy = PolicyParams::load(&cfg.policy_file())?;
    let ep = bc_encoder_file(cfg);
    let enc = Encoder::load(&if ep.exists() { ep } else { cfg.encoder_file() })?;
    let suite = EnvSuite::by_name(&cfg.eval_suite)?;
    let eval_cfg = cfg.eval_config();
    let rows = evaluate(&policy, &enc, &suite, &eval_cfg)?;
    let mut report = MetricsReport {
        config_hash: cfg.hash(),
        rows: rows.iter().map(|r| MetricsRow::from_env("full", &suite.name, r)).collect(),
    };
    let mean = MetricsRow::suite_mean("full", &suite.name, eval_cfg.seed, &rows)?;
    println!("{}: SUR {:.3} SFR {:.3} AFS {:.4}", suite.name, mean.sur, mean.sfr, mean.afs);
    report.rows.push(mean);
    write_report(&report, &cfg.metrics_file())
}

fn ablate_cmd(cfg: &RunConfig) -> Result<()> {
    let rows = ablation_suite(cfg, cfg.seed)?;
    for r in &rows {
        println!("{:<20} SUR {:.3} SFR {:.3} AFS {:.4}", r.variant, r.sur, r.sfr, r.afs);
    }
    let report = MetricsReport {
        config_hash: cfg.hash(),
        rows,
    };
    write_report(&report, &cfg.out_dir.join("ablation.csv"))
}

fn scoop_point_cmd(mask: &Path, r: usize, m: f64) -> Result<()> {
    let text = std::fs::read_to_string(mask).map_err(|e| ImrlError::io(mask, e))?;
    let mask = BinaryMask::from_pgm(&text)?;
    println!("{}", optimal_scoop_point(&mask, r, m)?);
    Ok(())
}

fn embed_cmd(cfg: &RunConfig) -> Result<()> {
    let ds = dataset_or_generate(cfg)?;
    let enc = Encoder::load(&cfg.encoder_file())?;
    let (points, labels) = dataset_embeddings(&enc, &ds, Split::Test)?;
    let dim = enc.embed_dim();
    let names: Vec<String> = labels.iter().map(|&l| PropertyClass::ALL[l].name().to_string()).collect();
    let hash = cfg.hash();
    write_points_csv(&points, dim, &names, "e", &hash, &cfg.embed_file())?;
    let m = embedding_metrics(&enc, &ds, Split::Test)?;
    println!("silhouette {:.4} intra/inter {:.4}", m.silhouette, m.intra_inter_ratio);

    let n = cfg.tsne_points.min(labels.len());
    let t = tsne_2d(&points[..n * dim], dim, cfg.tsne_perplexity, cfg.tsne_iters, derive(cfg.seed, "tsne"))?;
    let flat: Vec<f64> = t.coords.iter().flatten().copied().collect();
    write_points_csv(&flat, 2, &names[..n], "t", &hash, &cfg.tsne_file())?;
    println!(
        "t-SNE KL {:.4} -> {:.4} over {n} points",
        t.initial_kl(),
        t.final_kl()
    );
    Ok(())
}
