//! The whole experiment in miniature: generate data, train a compressor,
//! sweep block error rates for a few schemes, render the report.
//!
//! Everything is scaled down to finish in about a minute; the `llrq`
//! binary runs the same stages at full size from a config file.

use llrq::harness::{evaluate, generate_dataset, render_report, Config, EvalAssets, Scheme};
use llrq::quantizer::{KmeansConfig, LatentQuantizer};

fn main() -> llrq::Result<()> {
    let mut cfg = Config::default();
    cfg.constellation_bits = 4;
    cfg.train_codewords_per_snr = 150;
    cfg.train_snrs_db = vec![11.0, 12.0, 13.0];
    cfg.batch_size = 8192;
    cfg.rounds = 2;
    cfg.epochs_stage1 = 6;
    cfg.epochs_stage2 = 4;
    cfg.eval_codewords_per_snr = 400;
    cfg.eval_snrs_db = vec![10.0, 11.0, 12.0, 13.0, 14.0];

    println!("generating {} training codewords...", 3 * cfg.train_codewords_per_snr);
    let data = generate_dataset(&cfg)?;

    println!("training on {} symbols...", data.nrows());
    let out = llrq::autonet::train(data.view(), &cfg.train_config())?;

    println!("fitting a 4+4+4 bit latent codebook...");
    let latents = out.net.encode(data.view());
    let codebook = LatentQuantizer::fit(latents.view(), &[4, 4, 4], &KmeansConfig::default())?;

    let mut assets = EvalAssets::none();
    assets.net = Some(out.net);
    assets.latent.insert(codebook.total_bits(), codebook);

    let schemes = [Scheme::Unquantized, Scheme::AeFull, Scheme::AeQuantized(12)];
    println!("evaluating {} schemes over {:?} dB...\n", schemes.len(), cfg.eval_snrs_db);
    let records = evaluate(&cfg, &schemes, &assets)?;
    print!("{}", render_report(&records, cfg.constellation_bits));
    Ok(())
}
