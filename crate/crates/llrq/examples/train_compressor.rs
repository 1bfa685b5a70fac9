//! Trains a small soft-bit compressor end to end: generate a dataset from
//! the configured link, run the two-stage loop, watch the loss and the
//! per-bit weights evolve.

use llrq::autonet::{bit_errors, Stage2Allocation};
use llrq::harness::{generate_dataset, Config};

fn main() -> llrq::Result<()> {
    // A cut-down run that finishes in seconds: fewer codewords and epochs
    // than a real fit, everything else as in a full experiment.
    let mut cfg = Config::default();
    cfg.train_codewords_per_snr = 60;
    cfg.batch_size = 4096;
    cfg.rounds = 2;
    cfg.epochs_stage1 = 4;
    cfg.epochs_stage2 = 2;
    cfg.stage2_allocation = Stage2Allocation::Equal;

    let data = generate_dataset(&cfg)?;
    println!(
        "dataset: {} symbols x {} soft bits from SNRs {:?}",
        data.nrows(),
        data.ncols(),
        cfg.train_snrs_db
    );

    let out = llrq::autonet::train(data.view(), &cfg.train_config())?;

    println!("\njoint-stage loss per epoch:");
    for row in out.history.iter().filter(|r| r.stage == 1) {
        println!(
            "  round {} epoch {:>2}: loss {:.5}",
            row.round, row.epoch, row.loss
        );
    }

    println!("\nper-bit weights after each round (renormalized errors):");
    for (i, w) in out.weight_history.iter().enumerate() {
        let rendered: Vec<String> = w.iter().map(|x| format!("{x:.3}")).collect();
        println!("  {}: [{}]", if i == 0 { "init " } else { "round" }, rendered.join(", "));
    }

    let errors = bit_errors(&out.net, data.view(), 1e-6);
    println!("\nfinal noise-free reconstruction error per bit position:");
    for (k, e) in errors.iter().enumerate() {
        println!("  position {k}: {e:.5}");
    }
    println!("\nthe weakest (highest-error) positions are the low-reliability");
    println!("Gray bits; the adaptive weights push training effort there.");
    Ok(())
}
