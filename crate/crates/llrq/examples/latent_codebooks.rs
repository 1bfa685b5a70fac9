//! Quantizing the 3-dimensional latent space with per-component scalar
//! codebooks fitted by mini-batch k-means.

use llrq::harness::{generate_dataset, Config};
use llrq::quantizer::{distortion, kmeans_fit_traced, KmeansConfig, LatentQuantizer};

fn main() -> llrq::Result<()> {
    let mut cfg = Config::default();
    cfg.train_codewords_per_snr = 60;
    cfg.batch_size = 4096;
    cfg.rounds = 1;
    cfg.epochs_stage1 = 4;
    cfg.epochs_stage2 = 2;

    let data = generate_dataset(&cfg)?;
    let out = llrq::autonet::train(data.view(), &cfg.train_config())?;
    let latents = out.net.encode(data.view());
    println!("encoded {} symbols into 3 latent components", latents.nrows());

    // Watch the refinement passes drive distortion down on one component.
    let column: Vec<f64> = latents.column(0).to_vec();
    let kmeans = KmeansConfig::default();
    let (codebook, trace) = kmeans_fit_traced(&column, 3, &kmeans)?;
    println!("\ncomponent 0, 3 bits: distortion per refinement pass:");
    for (i, d) in trace.iter().enumerate() {
        println!("  pass {i}: {d:.6}");
    }
    println!("levels: {:?}", codebook.levels());

    // The full quantizer fits all three components at once.
    for alloc in [[3usize, 3, 3], [5, 5, 5], [6, 6, 6]] {
        let q = LatentQuantizer::fit(latents.view(), &alloc, &kmeans)?;
        let mut quantized = latents.clone();
        q.quantize_rows(&mut quantized);
        let mse = latents
            .iter()
            .zip(quantized.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / latents.len() as f64;
        println!(
            "\n{}+{}+{} bits ({} total): latent MSE {:.2e}",
            alloc[0],
            alloc[1],
            alloc[2],
            q.total_bits(),
            mse
        );
        for (i, cb) in q.components().iter().enumerate() {
            let sample: Vec<f64> = latents.column(i).iter().copied().take(5000).collect();
            println!(
                "  component {i}: {} levels, distortion {:.2e}",
                cb.levels().len(),
                distortion(cb, &sample)
            );
        }
    }
    Ok(())
}
