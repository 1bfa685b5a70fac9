//! Command-line front end: one subcommand per pipeline stage, all driven
//! by the same config file. Library examples cover the same ground with
//! more commentary; this binary just wires the stages to the filesystem.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::{s, Array2};

use llrq::autonet::{save_model, train, write_history, FloatWidth, TRAIN_CHUNK};
use llrq::harness::{
    domains, evaluate, generate_dataset, generate_labeled_llrs, mix_seed, parse_results_csv,
    read_dataset, render_report, write_dataset, write_results_csv, Config, EvalAssets, Scheme,
};
use llrq::quantizer::{mmi_fit_columns, KmeansConfig, LatentQuantizer};
use llrq::{Error, Result};

#[derive(Parser)]
#[command(name = "llrq", version, about = "Soft-bit compression experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config file; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the training dataset file.
    GenData(Common),
    /// Train the soft-bit compressor on the dataset file.
    Train(Common),
    /// Fit latent codebooks for every configured bit allocation.
    FitCodebook(Common),
    /// Fit per-position L-value quantizers.
    FitMmi(Common),
    /// Run the block-error-rate sweep and write the results CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Scheme to evaluate (repeatable); defaults to the config's list.
        #[arg(long = "scheme")]
        schemes: Vec<String>,
    },
    /// Render the comparison report from a results CSV.
    Report(Common),
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

fn cmd_gen_data(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let data = generate_dataset(&cfg)?;
    ensure_parent(&cfg.dataset_path)?;
    write_dataset(
        &cfg.dataset_path,
        data.view(),
        FloatWidth::F32,
        cfg.master_seed,
        cfg.hash(),
    )?;
    println!(
        "wrote {} rows x {} soft bits to {}",
        data.nrows(),
        data.ncols(),
        cfg.dataset_path.display()
    );
    Ok(())
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let (data, header) = read_dataset(&cfg.dataset_path)?;
    if header.config_hash != cfg.hash() {
        eprintln!(
            "note: {} was generated from a different config",
            cfg.dataset_path.display()
        );
    }
    let mut train_cfg = cfg.train_config();
    train_cfg.verbose = true;
    let out = train(data.view(), &train_cfg)?;
    ensure_parent(&cfg.model_path)?;
    save_model(&out.net, &cfg.model_path, FloatWidth::F64)?;
    ensure_parent(&cfg.history_path)?;
    write_history(&out.history, out.net.bits(), &cfg.history_path)?;
    if let Some(row) = out.history.last() {
        println!("final loss {:.6}", row.loss);
    }
    println!("wrote model to {}", cfg.model_path.display());
    println!("wrote history to {}", cfg.history_path.display());
    Ok(())
}

/// Encodes the whole dataset to latent vectors in bounded-memory chunks.
fn encode_dataset(cfg: &Config) -> Result<Array2<f64>> {
    let (data, _) = read_dataset(&cfg.dataset_path)?;
    let net = llrq::autonet::load_model(&cfg.model_path)?;
    if net.bits() != data.ncols() {
        return Err(Error::InvalidState(format!(
            "model compresses {} soft bits but the dataset rows have {}",
            net.bits(),
            data.ncols()
        )));
    }
    let mut latents = Array2::zeros((data.nrows(), llrq::autonet::LATENT_DIM));
    let mut start = 0;
    while start < data.nrows() {
        let end = (start + TRAIN_CHUNK).min(data.nrows());
        let z = net.encode(data.slice(s![start..end, ..]));
        latents.slice_mut(s![start..end, ..]).assign(&z);
        start = end;
    }
    Ok(latents)
}

fn cmd_fit_codebook(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let latents = encode_dataset(&cfg)?;
    for alloc in &cfg.allocations {
        let total: usize = alloc.iter().sum();
        let kmeans = KmeansConfig {
            minibatch: cfg.kmeans_minibatch,
            iterations: cfg.kmeans_iterations,
            seed: mix_seed(cfg.master_seed, domains::CODEBOOK, total as u64, 0),
        };
        let q = LatentQuantizer::fit(latents.view(), alloc, &kmeans)?;
        let path = cfg.codebook_path(total);
        ensure_parent(&path)?;
        q.save(&path)?;
        println!(
            "fit {}+{}+{} bit codebook on {} latents, wrote {}",
            alloc[0],
            alloc[1],
            alloc[2],
            latents.nrows(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_fit_mmi(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let (llrs, tx) = generate_labeled_llrs(&cfg)?;
    for &bits in &cfg.mmi_bits {
        let q = mmi_fit_columns(llrs.view(), tx.view(), bits, cfg.mmi_bins)?;
        let path = cfg.mmi_path(bits);
        ensure_parent(&path)?;
        q.save(&path)?;
        println!(
            "fit {bits}-bit quantizers on {} L-values per position, wrote {}",
            llrs.nrows(),
            path.display()
        );
    }
    Ok(())
}

fn cmd_eval(common: &Common, scheme_args: &[String]) -> Result<()> {
    let cfg = load_config(common)?;
    let schemes: Vec<Scheme> = if scheme_args.is_empty() {
        cfg.schemes.clone()
    } else {
        scheme_args
            .iter()
            .map(|s| Scheme::parse(s))
            .collect::<Result<_>>()?
    };
    let assets = EvalAssets::load_for(&cfg, &schemes)?;
    let records = evaluate(&cfg, &schemes, &assets)?;
    for r in &records {
        println!(
            "{:<14} {:>6.2} dB  bler {:>9.5}  ({}/{} blocks, {:.1} s)",
            r.scheme, r.snr_db, r.bler, r.errors, r.codewords, r.wall_s
        );
    }
    ensure_parent(&cfg.results_path)?;
    write_results_csv(&records, &cfg.results_path)?;
    println!("wrote {}", cfg.results_path.display());
    Ok(())
}

fn cmd_report(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let text = std::fs::read_to_string(&cfg.results_path)
        .map_err(|e| Error::io(&cfg.results_path, e))?;
    let records = parse_results_csv(&text)?;
    print!("{}", render_report(&records, cfg.constellation_bits));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match &cli.cmd {
        Cmd::GenData(c) => cmd_gen_data(c),
        Cmd::Train(c) => cmd_train(c),
        Cmd::FitCodebook(c) => cmd_fit_codebook(c),
        Cmd::FitMmi(c) => cmd_fit_mmi(c),
        Cmd::Eval { common, schemes } => cmd_eval(common, schemes),
        Cmd::Report(c) => cmd_report(c),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
