//! Temporary diagnostic, not part of the crate.
//! Usage: probe2 <batch> <lr> <eps:epochs>... [--save=p] [--load=p] [--stage2=eps:epochs]

use llrq::autonet::{
    load_model, save_model, total_loss, AdamConfig, BranchedAutoencoder, FloatWidth, FullAdam,
    Gradients, MlpAdam, TRAIN_CHUNK,
};
use llrq::harness::read_dataset;
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

fn report(net: &BranchedAutoencoder, data: ArrayView2<f64>, label: &str) {
    let n = 131072.min(data.nrows());
    let x = data.slice_axis(Axis(0), (0..n).into());
    let out = net.reconstruct(x);
    let k = data.ncols();
    let w = vec![1.0 / k as f64; k];
    let loss6 = total_loss(out.view(), x, &w, 1e-6);
    let mut flips = vec![0usize; k];
    let mut strong_err = vec![0f64; k];
    let mut strong = vec![0usize; k];
    for i in 0..n {
        for j in 0..k {
            let t = x[[i, j]];
            let o = out[[i, j]];
            if t * o < 0.0 && t.abs() > 0.05 {
                flips[j] += 1;
            }
            if t.abs() > 0.5 {
                strong_err[j] += (o - t).abs();
                strong[j] += 1;
            }
        }
    }
    let err: Vec<String> = (0..k)
        .map(|j| format!("{:.4}", strong_err[j] / strong[j].max(1) as f64))
        .collect();
    println!("[{label}] eq-weight loss@1e-6 {loss6:.5} over {n} rows");
    println!("[{label}] flips/{n}: {flips:?}");
    println!("[{label}] strong |err|: {}", err.join(" "));
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let batch: usize = args[0].parse().unwrap();
    let lr: f64 = args[1].parse().unwrap();
    let mut phases: Vec<(f64, usize)> = Vec::new();
    let mut save: Option<String> = None;
    let mut load: Option<String> = None;
    let mut stage2: Option<(f64, usize)> = None;
    for a in &args[2..] {
        if let Some(p) = a.strip_prefix("--save=") {
            save = Some(p.to_string());
        } else if let Some(p) = a.strip_prefix("--load=") {
            load = Some(p.to_string());
        } else if let Some(p) = a.strip_prefix("--stage2=") {
            let (e, n) = p.split_once(':').unwrap();
            stage2 = Some((e.parse().unwrap(), n.parse().unwrap()));
        } else {
            let (e, n) = a.split_once(':').unwrap();
            phases.push((e.parse().unwrap(), n.parse().unwrap()));
        }
    }

    let data_path =
        std::env::var("PROBE_DATA").unwrap_or("/root/scratch/out/dataset.bin".into());
    let (data, _) = read_dataset(Path::new(&data_path)).unwrap();
    let k = data.ncols();
    let mut w = vec![1.0 / k as f64; k];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut net = match &load {
        Some(p) => load_model(Path::new(p)).unwrap(),
        None => BranchedAutoencoder::new(k, &mut rng).unwrap(),
    };
    let mut indices: Vec<usize> = (0..data.nrows()).collect();
    let adam = AdamConfig {
        lr,
        ..Default::default()
    };
    let t0 = Instant::now();
    for &(eps, epochs) in &phases {
        let mut opt = FullAdam::new(&net);
        for epoch in 1..=epochs {
            indices.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for batch_idx in indices.chunks(batch) {
                let b = data.select(Axis(0), batch_idx);
                let rows = b.nrows();
                let mut grads = Gradients::zeros_like(&net);
                for start in (0..rows).step_by(TRAIN_CHUNK) {
                    let end = (start + TRAIN_CHUNK).min(rows);
                    let chunk = b.slice_axis(Axis(0), (start..end).into());
                    let cache = net.forward_train(chunk, Some((&mut rng, 1e-3)));
                    loss_sum += net.loss_sum(&cache, chunk, &w, eps);
                    grads.add_assign(&net.backward(&cache, chunk, &w, eps));
                }
                grads.scale(1.0 / rows as f64);
                opt.step(&mut net, &grads, &adam);
            }
            println!(
                "eps {eps:.0e} epoch {epoch}: loss {:.6} ({:.0}s)",
                loss_sum / data.nrows() as f64,
                t0.elapsed().as_secs_f64()
            );
        }
        report(&net, data.view(), &format!("eps {eps:.0e}"));
        let errors = llrq::autonet::bit_errors(&net, data.view(), eps);
        w = llrq::autonet::update_bit_weights(&errors, &w);
        let pretty: Vec<String> = w.iter().map(|v| format!("{v:.3}")).collect();
        println!("weights -> [{}]", pretty.join(", "));
    }

    // Frozen-encoder per-decoder refinement, mirroring stage 2 of train().
    if let Some((eps, epochs)) = stage2 {
        let n = data.nrows();
        let mut latents = ndarray::Array2::zeros((n, llrq::autonet::LATENT_DIM));
        for start in (0..n).step_by(TRAIN_CHUNK) {
            let end = (start + TRAIN_CHUNK).min(n);
            let chunk = data.slice_axis(Axis(0), (start..end).into());
            latents
                .slice_axis_mut(Axis(0), (start..end).into())
                .assign(&net.encode(chunk));
        }
        for dk in 0..k {
            let mut opt_k = MlpAdam::new(&net.decoders[dk]);
            let mut last = 0.0;
            for _epoch in 1..=epochs {
                indices.shuffle(&mut rng);
                let mut loss_sum = 0.0;
                for batch_idx in indices.chunks(batch) {
                    let z_batch = latents.select(Axis(0), batch_idx);
                    let rows = z_batch.nrows();
                    let dec = &net.decoders[dk];
                    let acts = dec.forward_cached(z_batch.view());
                    let out = acts.last().unwrap();
                    let mut d_out = ndarray::Array2::zeros((rows, 1));
                    for (i, &bi) in batch_idx.iter().enumerate() {
                        let t = data[(bi, dk)];
                        let o = out[(i, 0)];
                        loss_sum += llrq::autonet::sample_loss(o, t, eps);
                        d_out[(i, 0)] = 2.0 * (o - t) / (t.abs() + eps);
                    }
                    let (mut g, _) = dec.backward(&acts, d_out);
                    for gr in g.iter_mut() {
                        gr.0 *= 1.0 / rows as f64;
                        gr.1 *= 1.0 / rows as f64;
                    }
                    opt_k.step(&mut net.decoders[dk], &g, &adam);
                }
                last = loss_sum / n as f64;
            }
            println!(
                "stage2 dec {} eps {eps:.0e}: loss {last:.6} ({:.0}s)",
                dk + 1,
                t0.elapsed().as_secs_f64()
            );
        }
        report(&net, data.view(), "stage2");
    }

    if let Some(p) = save {
        save_model(&net, Path::new(&p), FloatWidth::F64).unwrap();
        println!("saved {p}");
    }
}
