//! Experiment configuration: a flat key=value text format with section
//! headers, strict about unknown keys so typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::autonet::{AdamConfig, Stage2Allocation, TrainConfig, WeightMode};
use crate::error::{Error, Result};

use super::rng::{domains, mix_seed};

/// Fading model applied between the mapper and the demapper.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    /// Independent Rayleigh gain per symbol.
    Flat,
    /// Frequency-selective fading over OFDM subcarriers, one realization
    /// per codeword.
    Etu,
}

/// Channel code wrapping the transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeKind {
    Ldpc,
    Polar,
}

/// What happens to the exact LLRs before decoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Decode the exact LLRs directly.
    Unquantized,
    /// Autoencoder round trip without latent quantization.
    AeFull,
    /// Autoencoder round trip with the latent quantized to this many total
    /// bits.
    AeQuantized(usize),
    /// Per-L-value maximum-mutual-information quantization at this many
    /// bits.
    Mmi(usize),
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unquantized" => Ok(Scheme::Unquantized),
            "ae-full" => Ok(Scheme::AeFull),
            _ => {
                if let Some(rest) = s.strip_prefix("ae-") {
                    let nb: usize = rest.parse().map_err(|_| {
                        Error::invalid_argument(format!("bad latent bit count in scheme {s}"))
                    })?;
                    return Ok(Scheme::AeQuantized(nb));
                }
                if let Some(rest) = s.strip_prefix("mmi-") {
                    let b: usize = rest.parse().map_err(|_| {
                        Error::invalid_argument(format!("bad bit count in scheme {s}"))
                    })?;
                    return Ok(Scheme::Mmi(b));
                }
                Err(Error::invalid_argument(format!(
                    "unknown scheme {s}; expected unquantized, ae-full, ae-<bits> or mmi-<bits>"
                )))
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Unquantized => write!(f, "unquantized"),
            Scheme::AeFull => write!(f, "ae-full"),
            Scheme::AeQuantized(nb) => write!(f, "ae-{nb}"),
            Scheme::Mmi(b) => write!(f, "mmi-{b}"),
        }
    }
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Everything an experiment run needs, with desk-scale defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    // [experiment]
    pub constellation_bits: usize,
    pub channel: ChannelKind,
    pub code: CodeKind,
    pub master_seed: u64,
    pub interleaver_seed: u64,
    pub polar_n: usize,
    pub polar_k: usize,
    pub polar_design_snr_db: f64,

    // [data]
    pub train_codewords_per_snr: usize,
    pub train_snrs_db: Vec<f64>,
    pub dataset_path: PathBuf,

    // [train]
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub latent_noise_sigma: f64,
    pub loss_epsilon: f64,
    pub rounds: usize,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub stage2_allocation: Stage2Allocation,
    pub weight_mode: WeightMode,
    pub model_path: PathBuf,
    pub history_path: PathBuf,

    // [codebook]
    pub allocations: Vec<[usize; 3]>,
    pub kmeans_minibatch: usize,
    pub kmeans_iterations: usize,
    pub codebook_dir: PathBuf,

    // [mmi]
    pub mmi_bits: Vec<usize>,
    pub mmi_bins: usize,
    pub mmi_codewords_per_snr: usize,
    pub mmi_dir: PathBuf,

    // [eval]
    pub eval_codewords_per_snr: usize,
    pub eval_snrs_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub bp_max_iter: usize,
    pub polar_list_size: usize,
    pub noiseless: bool,
    pub results_path: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            constellation_bits: 8,
            channel: ChannelKind::Flat,
            code: CodeKind::Ldpc,
            master_seed: 7,
            interleaver_seed: 1001,
            polar_n: 256,
            polar_k: 128,
            polar_design_snr_db: 3.0,

            train_codewords_per_snr: 2000,
            train_snrs_db: vec![16.0, 17.0, 18.0, 19.0],
            dataset_path: "out/dataset.bin".into(),

            batch_size: 8192,
            learning_rate: 3e-3,
            lr_decay: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            latent_noise_sigma: 1e-3,
            loss_epsilon: 1.0,
            rounds: 4,
            epochs_stage1: 35,
            epochs_stage2: 15,
            stage2_allocation: Stage2Allocation::Equal,
            weight_mode: WeightMode::Adaptive,
            model_path: "out/model.bin".into(),
            history_path: "out/history.csv".into(),

            allocations: vec![[5, 5, 5], [6, 6, 6]],
            kmeans_minibatch: 1024,
            kmeans_iterations: 100,
            codebook_dir: "out".into(),

            mmi_bits: vec![2],
            mmi_bins: 2000,
            mmi_codewords_per_snr: 2000,
            mmi_dir: "out".into(),

            eval_codewords_per_snr: 2000,
            eval_snrs_db: vec![15.0, 16.0, 17.0, 18.0, 19.0, 20.0],
            schemes: vec![
                Scheme::Unquantized,
                Scheme::AeFull,
                Scheme::AeQuantized(15),
                Scheme::Mmi(2),
            ],
            bp_max_iter: 50,
            polar_list_size: 8,
            noiseless: false,
            results_path: "out/results.csv".into(),
        }
    }
}

struct RawEntries {
    entries: BTreeMap<(String, String), (usize, String)>,
}

impl RawEntries {
    fn parse(text: &str) -> Result<Self> {
        const SECTIONS: [&str; 6] = ["experiment", "data", "train", "codebook", "mmi", "eval"];
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = match raw_line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw_line.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Parse {
                    line: lineno,
                    msg: format!("unterminated section header {line}"),
                })?;
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: lineno,
                msg: format!("expected key = value, got {line}"),
            })?;
            let sec = section.clone().ok_or(Error::Parse {
                line: lineno,
                msg: "key before any [section] header".into(),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries
                .insert((sec.clone(), key.clone()), (lineno, value))
                .is_some()
            {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("duplicate key {key} in section [{sec}]"),
                });
            }
        }
        Ok(RawEntries { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn finish(self) -> Result<()> {
        if let Some(((section, key), (line, _))) = self.entries.into_iter().min_by_key(|e| e.1 .0)
        {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key {key} in section [{section}]"),
            });
        }
        Ok(())
    }
}

fn parse_scalar<T: FromStr>(raw: &str, line: usize, what: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from {raw}"),
    })
}

fn parse_f64_list(raw: &str, line: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = raw
        .split(',')
        .map(|s| parse_scalar(s.trim(), line, what))
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::Parse {
            line,
            msg: format!("{what} list is empty"),
        });
    }
    Ok(vals)
}

macro_rules! set_scalar {
    ($raw:expr, $cfg:expr, $sec:literal, $key:literal, $field:ident, $what:literal) => {
        if let Some((line, value)) = $raw.take($sec, $key) {
            $cfg.$field = parse_scalar(&value, line, $what)?;
        }
    };
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawEntries::parse(text)?;
        let mut cfg = Config::default();

        set_scalar!(raw, cfg, "experiment", "constellation_bits", constellation_bits, "an integer");
        if let Some((line, v)) = raw.take("experiment", "channel") {
            cfg.channel = match v.as_str() {
                "flat" => ChannelKind::Flat,
                "etu" => ChannelKind::Etu,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("channel must be flat or etu, got {other}"),
                    })
                }
            };
        }
        if let Some((line, v)) = raw.take("experiment", "code") {
            cfg.code = match v.as_str() {
                "ldpc" => CodeKind::Ldpc,
                "polar" => CodeKind::Polar,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("code must be ldpc or polar, got {other}"),
                    })
                }
            };
        }
        set_scalar!(raw, cfg, "experiment", "master_seed", master_seed, "an integer");
        set_scalar!(raw, cfg, "experiment", "interleaver_seed", interleaver_seed, "an integer");
        set_scalar!(raw, cfg, "experiment", "polar_n", polar_n, "an integer");
        set_scalar!(raw, cfg, "experiment", "polar_k", polar_k, "an integer");
        set_scalar!(raw, cfg, "experiment", "polar_design_snr_db", polar_design_snr_db, "a number");

        set_scalar!(raw, cfg, "data", "codewords_per_snr", train_codewords_per_snr, "an integer");
        if let Some((line, v)) = raw.take("data", "snrs_db") {
            cfg.train_snrs_db = parse_f64_list(&v, line, "an SNR in dB")?;
        }
        if let Some((_, v)) = raw.take("data", "dataset_path") {
            cfg.dataset_path = v.into();
        }

        set_scalar!(raw, cfg, "train", "batch_size", batch_size, "an integer");
        set_scalar!(raw, cfg, "train", "learning_rate", learning_rate, "a number");
        set_scalar!(raw, cfg, "train", "lr_decay", lr_decay, "a number");
        set_scalar!(raw, cfg, "train", "adam_beta1", adam_beta1, "a number");
        set_scalar!(raw, cfg, "train", "adam_beta2", adam_beta2, "a number");
        set_scalar!(raw, cfg, "train", "adam_epsilon", adam_epsilon, "a number");
        set_scalar!(raw, cfg, "train", "latent_noise_sigma", latent_noise_sigma, "a number");
        set_scalar!(raw, cfg, "train", "loss_epsilon", loss_epsilon, "a number");
        set_scalar!(raw, cfg, "train", "rounds", rounds, "an integer");
        set_scalar!(raw, cfg, "train", "epochs_stage1", epochs_stage1, "an integer");
        set_scalar!(raw, cfg, "train", "epochs_stage2", epochs_stage2, "an integer");
        if let Some((line, v)) = raw.take("train", "stage2_allocation") {
            cfg.stage2_allocation = match v.as_str() {
                "equal" => Stage2Allocation::Equal,
                "proportional" => Stage2Allocation::Proportional,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("stage2_allocation must be equal or proportional, got {other}"),
                    })
                }
            };
        }
        if let Some((line, v)) = raw.take("train", "weight_mode") {
            cfg.weight_mode = match v.as_str() {
                "adaptive" => WeightMode::Adaptive,
                "inverse-llr" => WeightMode::InverseLlrMagnitude,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("weight_mode must be adaptive or inverse-llr, got {other}"),
                    })
                }
            };
        }
        if let Some((_, v)) = raw.take("train", "model_path") {
            cfg.model_path = v.into();
        }
        if let Some((_, v)) = raw.take("train", "history_path") {
            cfg.history_path = v.into();
        }

        if let Some((line, v)) = raw.take("codebook", "allocations") {
            let mut allocations = Vec::new();
            for triple in v.split(';') {
                let parts: Result<Vec<usize>> = triple
                    .split(',')
                    .map(|s| parse_scalar(s.trim(), line, "a bit count"))
                    .collect();
                let parts = parts?;
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "allocation {} must list exactly 3 per-component bit counts",
                            triple.trim()
                        ),
                    });
                }
                allocations.push([parts[0], parts[1], parts[2]]);
            }
            if allocations.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "allocations list is empty".into(),
                });
            }
            cfg.allocations = allocations;
        }
        set_scalar!(raw, cfg, "codebook", "kmeans_minibatch", kmeans_minibatch, "an integer");
        set_scalar!(raw, cfg, "codebook", "kmeans_iterations", kmeans_iterations, "an integer");
        if let Some((_, v)) = raw.take("codebook", "codebook_dir") {
            cfg.codebook_dir = v.into();
        }

        if let Some((line, v)) = raw.take("mmi", "bits") {
            let vals: Result<Vec<usize>> = v
                .split(',')
                .map(|s| parse_scalar(s.trim(), line, "a bit count"))
                .collect();
            cfg.mmi_bits = vals?;
        }
        set_scalar!(raw, cfg, "mmi", "bins", mmi_bins, "an integer");
        set_scalar!(raw, cfg, "mmi", "codewords_per_snr", mmi_codewords_per_snr, "an integer");
        if let Some((_, v)) = raw.take("mmi", "mmi_dir") {
            cfg.mmi_dir = v.into();
        }

        set_scalar!(raw, cfg, "eval", "codewords_per_snr", eval_codewords_per_snr, "an integer");
        if let Some((line, v)) = raw.take("eval", "snrs_db") {
            cfg.eval_snrs_db = parse_f64_list(&v, line, "an SNR in dB")?;
        }
        if let Some((line, v)) = raw.take("eval", "schemes") {
            let schemes: Result<Vec<Scheme>> =
                v.split(',').map(|s| Scheme::parse(s.trim())).collect();
            cfg.schemes = schemes.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        set_scalar!(raw, cfg, "eval", "bp_max_iter", bp_max_iter, "an integer");
        set_scalar!(raw, cfg, "eval", "polar_list_size", polar_list_size, "an integer");
        if let Some((line, v)) = raw.take("eval", "noiseless") {
            cfg.noiseless = match v.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("noiseless must be true or false, got {other}"),
                    })
                }
            };
        }
        if let Some((_, v)) = raw.take("eval", "results_path") {
            cfg.results_path = v.into();
        }

        raw.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.constellation_bits % 2 != 0 || !(2..=12).contains(&self.constellation_bits) {
            return Err(Error::invalid_argument(format!(
                "constellation_bits must be even and in 2..=12, got {}",
                self.constellation_bits
            )));
        }
        if self.train_snrs_db.is_empty() || self.eval_snrs_db.is_empty() {
            return Err(Error::invalid_argument("SNR lists must be nonempty"));
        }
        if !self.polar_n.is_power_of_two() || self.polar_k > self.polar_n {
            return Err(Error::invalid_argument(format!(
                "polar code ({}, {}) is invalid",
                self.polar_n, self.polar_k
            )));
        }
        if self.polar_list_size == 0 || !self.polar_list_size.is_power_of_two() {
            return Err(Error::invalid_argument(
                "polar_list_size must be a positive power of two",
            ));
        }
        Ok(())
    }

    /// File that holds the latent codebook for a total bit budget.
    pub fn codebook_path(&self, total_bits: usize) -> PathBuf {
        self.codebook_dir.join(format!("codebook-{total_bits}.txt"))
    }

    /// File that holds the MMI quantizer for a per-L-value bit width.
    pub fn mmi_path(&self, bits: usize) -> PathBuf {
        self.mmi_dir.join(format!("mmi-{bits}.txt"))
    }

    /// The training configuration implied by this experiment config. The
    /// training seed is derived from the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                epsilon: self.adam_epsilon,
            },
            latent_noise_sigma: self.latent_noise_sigma,
            loss_epsilon: self.loss_epsilon,
            rounds: self.rounds,
            epochs_stage1: self.epochs_stage1,
            epochs_stage2: self.epochs_stage2,
            allocation: self.stage2_allocation,
            weight_mode: self.weight_mode,
            seed: mix_seed(self.master_seed, domains::NET_TRAIN, 0, 0),
            verbose: false,
        }
    }

    /// Deterministic serialization of every effective setting, used for
    /// the config hash embedded in dataset files.
    pub fn canonical_string(&self) -> String {
        let f = |v: f64| format!("{v}");
        let fl = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::from("llrq-config-v1\n");
        use std::fmt::Write;
        let w = &mut s;
        let _ = writeln!(w, "constellation_bits={}", self.constellation_bits);
        let _ = writeln!(
            w,
            "channel={}",
            match self.channel {
                ChannelKind::Flat => "flat",
                ChannelKind::Etu => "etu",
            }
        );
        let _ = writeln!(
            w,
            "code={}",
            match self.code {
                CodeKind::Ldpc => "ldpc",
                CodeKind::Polar => "polar",
            }
        );
        let _ = writeln!(w, "master_seed={}", self.master_seed);
        let _ = writeln!(w, "interleaver_seed={}", self.interleaver_seed);
        let _ = writeln!(w, "polar_n={}", self.polar_n);
        let _ = writeln!(w, "polar_k={}", self.polar_k);
        let _ = writeln!(w, "polar_design_snr_db={}", f(self.polar_design_snr_db));
        let _ = writeln!(w, "train_codewords_per_snr={}", self.train_codewords_per_snr);
        let _ = writeln!(w, "train_snrs_db={}", fl(&self.train_snrs_db));
        let _ = writeln!(w, "dataset_path={}", self.dataset_path.display());
        let _ = writeln!(w, "batch_size={}", self.batch_size);
        let _ = writeln!(w, "learning_rate={}", f(self.learning_rate));
        let _ = writeln!(w, "adam_beta1={}", f(self.adam_beta1));
        let _ = writeln!(w, "adam_beta2={}", f(self.adam_beta2));
        let _ = writeln!(w, "adam_epsilon={}", f(self.adam_epsilon));
        let _ = writeln!(w, "latent_noise_sigma={}", f(self.latent_noise_sigma));
        let _ = writeln!(w, "loss_epsilon={}", f(self.loss_epsilon));
        let _ = writeln!(w, "rounds={}", self.rounds);
        let _ = writeln!(w, "epochs_stage1={}", self.epochs_stage1);
        let _ = writeln!(w, "epochs_stage2={}", self.epochs_stage2);
        let _ = writeln!(
            w,
            "stage2_allocation={}",
            match self.stage2_allocation {
                Stage2Allocation::Equal => "equal",
                Stage2Allocation::Proportional => "proportional",
            }
        );
        let _ = writeln!(
            w,
            "weight_mode={}",
            match self.weight_mode {
                WeightMode::Adaptive => "adaptive",
                WeightMode::InverseLlrMagnitude => "inverse-llr",
            }
        );
        let _ = writeln!(w, "model_path={}", self.model_path.display());
        let _ = writeln!(w, "history_path={}", self.history_path.display());
        let allocs = self
            .allocations
            .iter()
            .map(|a| format!("{},{},{}", a[0], a[1], a[2]))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(w, "allocations={allocs}");
        let _ = writeln!(w, "kmeans_minibatch={}", self.kmeans_minibatch);
        let _ = writeln!(w, "kmeans_iterations={}", self.kmeans_iterations);
        let _ = writeln!(w, "codebook_dir={}", self.codebook_dir.display());
        let bits = self
            .mmi_bits
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(w, "mmi_bits={bits}");
        let _ = writeln!(w, "mmi_bins={}", self.mmi_bins);
        let _ = writeln!(w, "mmi_codewords_per_snr={}", self.mmi_codewords_per_snr);
        let _ = writeln!(w, "mmi_dir={}", self.mmi_dir.display());
        let _ = writeln!(w, "eval_codewords_per_snr={}", self.eval_codewords_per_snr);
        let _ = writeln!(w, "eval_snrs_db={}", fl(&self.eval_snrs_db));
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(w, "schemes={schemes}");
        let _ = writeln!(w, "bp_max_iter={}", self.bp_max_iter);
        let _ = writeln!(w, "polar_list_size={}", self.polar_list_size);
        let _ = writeln!(w, "noiseless={}", self.noiseless);
        let _ = writeln!(w, "results_path={}", self.results_path.display());
        s
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_string().as_bytes())
    }
}
