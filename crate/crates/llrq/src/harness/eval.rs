//! Monte-Carlo block-error-rate evaluation. Every scheme at a given SNR
//! sees exactly the same messages and channel realizations, so measured
//! differences come from the L-value processing alone.

use std::collections::HashMap;
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autonet::{load_model, BranchedAutoencoder, TRAIN_CHUNK};
use crate::coding::deinterleave;
use crate::error::{Error, Result};
use crate::modem::{llr_of_soft_bit, soft_bit, Constellation};
use crate::quantizer::{LatentQuantizer, MmiQuantizer};

use super::config::{Config, Scheme};
use super::pipeline::{channel_mode, random_message, transmit_codeword, CodeInstance};
use super::rng::{domains, mix_seed};

/// Codewords simulated and decoded per batch; bounds the L-value matrix
/// held in memory while keeping the network transforms well fed.
const CW_BLOCK: usize = 512;

/// Fitted artifacts a scheme may need.
#[derive(Default)]
pub struct EvalAssets {
    pub net: Option<BranchedAutoencoder>,
    /// Latent codebooks keyed by total bit budget.
    pub latent: HashMap<usize, LatentQuantizer>,
    /// Per-L-value quantizers keyed by bit width.
    pub mmi: HashMap<usize, MmiQuantizer>,
}

impl EvalAssets {
    /// No artifacts; enough for unquantized evaluation.
    pub fn none() -> Self {
        Self::default()
    }

    /// Loads whatever the given schemes require from the paths in the
    /// config, validating each artifact against the constellation.
    pub fn load_for(cfg: &Config, schemes: &[Scheme]) -> Result<Self> {
        let mut assets = EvalAssets::none();
        let mut need_net = false;
        for scheme in schemes {
            match scheme {
                Scheme::Unquantized => {}
                Scheme::AeFull => need_net = true,
                Scheme::AeQuantized(nb) => {
                    need_net = true;
                    if !assets.latent.contains_key(nb) {
                        let q = LatentQuantizer::load(&cfg.codebook_path(*nb))?;
                        if q.total_bits() != *nb {
                            return Err(Error::InvalidState(format!(
                                "codebook {} holds {} bits, expected {nb}",
                                cfg.codebook_path(*nb).display(),
                                q.total_bits()
                            )));
                        }
                        assets.latent.insert(*nb, q);
                    }
                }
                Scheme::Mmi(b) => {
                    if !assets.mmi.contains_key(b) {
                        let q = MmiQuantizer::load(&cfg.mmi_path(*b))?;
                        if q.bit_positions() != cfg.constellation_bits {
                            return Err(Error::InvalidState(format!(
                                "quantizer {} covers {} bit positions, constellation has {}",
                                cfg.mmi_path(*b).display(),
                                q.bit_positions(),
                                cfg.constellation_bits
                            )));
                        }
                        assets.mmi.insert(*b, q);
                    }
                }
            }
        }
        if need_net {
            let net = load_model(&cfg.model_path)?;
            if net.bits() != cfg.constellation_bits {
                return Err(Error::InvalidState(format!(
                    "model {} compresses {} L-values, constellation has {}",
                    cfg.model_path.display(),
                    net.bits(),
                    cfg.constellation_bits
                )));
            }
            assets.net = Some(net);
        }
        Ok(assets)
    }

    fn check_for(&self, scheme: &Scheme, k: usize) -> Result<()> {
        let missing = |what: String| Error::InvalidState(what);
        match scheme {
            Scheme::Unquantized => Ok(()),
            Scheme::AeFull => match &self.net {
                Some(net) if net.bits() == k => Ok(()),
                Some(net) => Err(missing(format!(
                    "model compresses {} L-values, constellation has {k}",
                    net.bits()
                ))),
                None => Err(missing("scheme ae-full needs a trained model".into())),
            },
            Scheme::AeQuantized(nb) => {
                self.check_for(&Scheme::AeFull, k)?;
                match self.latent.get(nb) {
                    Some(q) if q.total_bits() == *nb => Ok(()),
                    Some(q) => Err(missing(format!(
                        "codebook under key {nb} actually holds {} bits",
                        q.total_bits()
                    ))),
                    None => Err(missing(format!("scheme ae-{nb} needs a {nb}-bit codebook"))),
                }
            }
            Scheme::Mmi(b) => match self.mmi.get(b) {
                Some(q) if q.bit_positions() == k => Ok(()),
                Some(q) => Err(missing(format!(
                    "quantizer covers {} bit positions, constellation has {k}",
                    q.bit_positions()
                ))),
                None => Err(missing(format!("scheme mmi-{b} needs a fitted quantizer"))),
            },
        }
    }
}

/// One (scheme, SNR) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BlerRecord {
    pub scheme: String,
    pub snr_db: f64,
    pub codewords: usize,
    pub errors: usize,
    pub bler: f64,
    /// Wall-clock seconds spent transforming and decoding; informational
    /// only and deliberately kept out of the results CSV.
    pub wall_s: f64,
}

/// Runs the evaluation grid. Returns one record per (scheme, SNR),
/// sorted by scheme name and then SNR.
pub fn evaluate(cfg: &Config, schemes: &[Scheme], assets: &EvalAssets) -> Result<Vec<BlerRecord>> {
    if schemes.is_empty() {
        return Err(Error::invalid_argument("no schemes requested"));
    }
    if cfg.eval_codewords_per_snr == 0 {
        return Err(Error::invalid_argument("eval codewords_per_snr must be positive"));
    }
    let k = cfg.constellation_bits;
    for scheme in schemes {
        assets.check_for(scheme, k)?;
    }

    let constellation = Constellation::new(k)?;
    let code = CodeInstance::build(cfg)?;
    let mode = channel_mode(cfg);
    let n = code.codeword_len();
    let total_cw = cfg.eval_codewords_per_snr;

    let mut errors = vec![vec![0usize; cfg.eval_snrs_db.len()]; schemes.len()];
    let mut wall = vec![vec![0f64; cfg.eval_snrs_db.len()]; schemes.len()];

    for (s, &snr_db) in cfg.eval_snrs_db.iter().enumerate() {
        let gen_snr = if cfg.noiseless { f64::INFINITY } else { snr_db };
        let mut done = 0;
        while done < total_cw {
            let bsize = CW_BLOCK.min(total_cw - done);
            let mut llr_block = Array2::zeros((bsize, n));
            let mut msgs = Vec::with_capacity(bsize);
            for i in 0..bsize {
                let c = (done + i) as u64;
                let seed = mix_seed(cfg.master_seed, domains::EVAL, s as u64, c);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let msg = random_message(&code, &mut rng);
                let cw = code.encode(&msg)?;
                let (_, llrs) =
                    transmit_codeword(&cw, cfg, &constellation, &mode, gen_snr, &mut rng)?;
                llr_block
                    .row_mut(i)
                    .assign(&ndarray::ArrayView1::from(&llrs));
                msgs.push(msg);
            }
            for (j, scheme) in schemes.iter().enumerate() {
                let t0 = Instant::now();
                let transformed = apply_scheme(scheme, llr_block.view(), assets, k)?;
                for (i, msg) in msgs.iter().enumerate() {
                    let row = transformed.row(i).to_vec();
                    let coded = if mode.is_etu() {
                        deinterleave(&row, cfg.interleaver_seed)
                    } else {
                        row
                    };
                    let decoded = code.decode(&coded, cfg)?;
                    if &decoded != msg {
                        errors[j][s] += 1;
                    }
                }
                wall[j][s] += t0.elapsed().as_secs_f64();
            }
            done += bsize;
        }
    }

    let mut records = Vec::with_capacity(schemes.len() * cfg.eval_snrs_db.len());
    for (j, scheme) in schemes.iter().enumerate() {
        for (s, &snr_db) in cfg.eval_snrs_db.iter().enumerate() {
            records.push(BlerRecord {
                scheme: scheme.to_string(),
                snr_db,
                codewords: total_cw,
                errors: errors[j][s],
                bler: errors[j][s] as f64 / total_cw as f64,
                wall_s: wall[j][s],
            });
        }
    }
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(records)
}

/// Applies one scheme to a block of per-codeword L-value rows (in
/// transmitted order) and returns L-values of the same shape.
fn apply_scheme(
    scheme: &Scheme,
    llr_block: ArrayView2<'_, f64>,
    assets: &EvalAssets,
    k: usize,
) -> Result<Array2<f64>> {
    match scheme {
        Scheme::Unquantized => Ok(llr_block.to_owned()),
        Scheme::Mmi(b) => {
            let q = &assets.mmi[b];
            let mut out = llr_block.to_owned();
            for ((_, col), v) in out.indexed_iter_mut() {
                *v = q.quantize(*v, col % k);
            }
            Ok(out)
        }
        Scheme::AeFull | Scheme::AeQuantized(_) => {
            let net = assets.net.as_ref().expect("checked upfront");
            let (rows, n) = llr_block.dim();
            let soft: Vec<f64> = llr_block.iter().map(|&l| soft_bit(l)).collect();
            let sym = Array2::from_shape_vec((rows * n / k, k), soft)
                .expect("row length is a multiple of k");
            let mut rec = Array2::zeros(sym.dim());
            let mut start = 0;
            while start < sym.nrows() {
                let end = (start + TRAIN_CHUNK).min(sym.nrows());
                let chunk = sym.slice(s![start..end, ..]);
                let out = match scheme {
                    Scheme::AeFull => net.reconstruct(chunk),
                    Scheme::AeQuantized(nb) => {
                        let mut z = net.encode(chunk);
                        assets.latent[nb].quantize_rows(&mut z);
                        net.decode(z.view())
                    }
                    _ => unreachable!(),
                };
                rec.slice_mut(s![start..end, ..]).assign(&out);
                start = end;
            }
            let llrs: Vec<f64> = rec.iter().map(|&v| llr_of_soft_bit(v)).collect();
            Ok(Array2::from_shape_vec((rows, n), llrs).expect("shape preserved"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::BitQuantizer;

    fn tiny_cfg() -> Config {
        let mut cfg = Config::default();
        cfg.constellation_bits = 4;
        cfg.eval_codewords_per_snr = 3;
        cfg.eval_snrs_db = vec![18.0];
        cfg
    }

    #[test]
    fn noiseless_unquantized_decodes_everything() {
        let mut cfg = tiny_cfg();
        cfg.noiseless = true;
        let records =
            evaluate(&cfg, &[Scheme::Unquantized], &EvalAssets::none()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].errors, 0);
        assert_eq!(records[0].bler, 0.0);
        assert_eq!(records[0].codewords, 3);
    }

    #[test]
    fn noiseless_sign_quantizer_also_decodes_everything() {
        let mut cfg = tiny_cfg();
        cfg.noiseless = true;
        // One threshold at zero with saturated representatives: keeps the
        // sign of every L-value, which is all a noiseless decode needs.
        let per_bit: Vec<BitQuantizer> = (0..4)
            .map(|_| BitQuantizer::from_parts(vec![0.0], vec![-8.0, 8.0]).unwrap())
            .collect();
        let mut assets = EvalAssets::none();
        assets
            .mmi
            .insert(1, MmiQuantizer::from_bit_quantizers(per_bit).unwrap());
        let records = evaluate(&cfg, &[Scheme::Mmi(1)], &assets).unwrap();
        assert_eq!(records[0].errors, 0);
    }

    #[test]
    fn repeated_runs_are_identical() {
        let mut cfg = tiny_cfg();
        cfg.eval_snrs_db = vec![8.0, 18.0];
        let a = evaluate(&cfg, &[Scheme::Unquantized], &EvalAssets::none()).unwrap();
        let b = evaluate(&cfg, &[Scheme::Unquantized], &EvalAssets::none()).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.scheme, y.scheme);
            assert_eq!(x.errors, y.errors);
            assert_eq!(x.bler, y.bler);
        }
        // 8 dB Rayleigh is far below the code's operating point.
        assert!(a[0].errors > 0, "expected decoding failures at 8 dB");
    }

    #[test]
    fn missing_assets_are_reported() {
        let cfg = tiny_cfg();
        let err = evaluate(&cfg, &[Scheme::AeFull], &EvalAssets::none()).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)), "got {err:?}");
        let err = evaluate(&cfg, &[Scheme::Mmi(2)], &EvalAssets::none()).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)), "got {err:?}");
    }

    #[test]
    fn records_are_sorted_by_scheme_then_snr() {
        let mut cfg = tiny_cfg();
        cfg.noiseless = true;
        cfg.eval_snrs_db = vec![19.0, 17.0];
        let per_bit: Vec<BitQuantizer> = (0..4)
            .map(|_| BitQuantizer::from_parts(vec![0.0], vec![-8.0, 8.0]).unwrap())
            .collect();
        let mut assets = EvalAssets::none();
        assets
            .mmi
            .insert(1, MmiQuantizer::from_bit_quantizers(per_bit).unwrap());
        let records =
            evaluate(&cfg, &[Scheme::Unquantized, Scheme::Mmi(1)], &assets).unwrap();
        let keys: Vec<(String, f64)> =
            records.iter().map(|r| (r.scheme.clone(), r.snr_db)).collect();
        assert_eq!(
            keys,
            vec![
                ("mmi-1".to_string(), 17.0),
                ("mmi-1".to_string(), 19.0),
                ("unquantized".to_string(), 17.0),
                ("unquantized".to_string(), 19.0),
            ]
        );
    }
}
