//! Temporary diagnostic, not part of the crate.

use llrq::autonet::load_model;
use llrq::harness::{read_dataset, Config};
use std::path::Path;

fn main() -> llrq::Result<()> {
    let cfg = Config::default();
    let data_path = std::env::args().nth(2).unwrap_or("/root/scratch/out/dataset.bin".into());
    let (data, _) = read_dataset(Path::new(&data_path))?;
    let model_path = std::env::args().nth(1).unwrap_or("/root/scratch/out/model.bin".into());
    let net = load_model(Path::new(&model_path))?;
    let n = 65536.min(data.nrows());
    let x = data.slice(ndarray::s![0..n, ..]);
    let out = net.reconstruct(x);
    let k = data.ncols();
    let mut sign_flips = vec![0usize; k];
    let mut abs_err = vec![0f64; k];
    let mut abs_err_strong = vec![0f64; k];
    let mut strong = vec![0usize; k];
    let mut mean_abs_t = vec![0f64; k];
    for i in 0..n {
        for j in 0..k {
            let t = x[[i, j]];
            let o = out[[i, j]];
            if t * o < 0.0 && t.abs() > 0.05 {
                sign_flips[j] += 1;
            }
            abs_err[j] += (o - t).abs() / n as f64;
            mean_abs_t[j] += t.abs() / n as f64;
            if t.abs() > 0.5 {
                abs_err_strong[j] += (o - t).abs();
                strong[j] += 1;
            }
        }
    }
    println!("model: {model_path}, {n} rows");
    println!(
        "{:>3} {:>10} {:>12} {:>12} {:>14}",
        "bit", "E|t|", "E|o-t|", "signflips", "E|o-t| (|t|>.5)"
    );
    for j in 0..k {
        println!(
            "{:>3} {:>10.4} {:>12.4} {:>12} {:>14.4}",
            j,
            mean_abs_t[j],
            abs_err[j],
            sign_flips[j],
            abs_err_strong[j] / strong[j].max(1) as f64
        );
    }
    let _ = cfg;
    Ok(())
}
