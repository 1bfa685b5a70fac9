//! Training datasets: soft-bit rows generated from the configured link,
//! stored in a small self-describing binary format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autonet::FloatWidth;
use crate::error::{Error, Result};
use crate::modem::{soft_bit, Constellation};

use super::config::Config;
use super::pipeline::{channel_mode, random_message, transmit_codeword, CodeInstance};
use super::rng::{domains, mix_seed};

const DATA_MAGIC: &[u8; 8] = b"LLRQDATA";
const DATA_VERSION: u32 = 1;

/// Largest f32 strictly below 1. Soft bits are clamped to this magnitude
/// when narrowed so a stored value never rounds to exactly +-1.0.
pub const SOFT_BIT_F32_LIMIT: f32 = f32::from_bits(0x3F7F_FFFF);

/// Metadata stored in front of the sample rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub width: FloatWidth,
    /// Columns per row (bits per symbol).
    pub bits: u32,
    pub rows: u64,
    /// Master seed of the generating config.
    pub master_seed: u64,
    /// Hash of the generating config's canonical string.
    pub config_hash: u64,
}

/// Writes rows of soft bits with a header. f32 datasets clamp each value
/// to [`SOFT_BIT_F32_LIMIT`] in magnitude.
pub fn write_dataset(
    path: &Path,
    data: ArrayView2<'_, f64>,
    width: FloatWidth,
    master_seed: u64,
    config_hash: u64,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    w.write_all(DATA_MAGIC).map_err(io_err)?;
    w.write_all(&DATA_VERSION.to_le_bytes()).map_err(io_err)?;
    let width_code: u8 = match width {
        FloatWidth::F64 => 0,
        FloatWidth::F32 => 1,
    };
    w.write_all(&[width_code]).map_err(io_err)?;
    w.write_all(&(data.ncols() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(data.nrows() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&master_seed.to_le_bytes()).map_err(io_err)?;
    w.write_all(&config_hash.to_le_bytes()).map_err(io_err)?;
    for &v in data.iter() {
        match width {
            FloatWidth::F64 => w.write_all(&v.to_le_bytes()).map_err(io_err)?,
            FloatWidth::F32 => {
                let narrowed =
                    (v as f32).clamp(-SOFT_BIT_F32_LIMIT, SOFT_BIT_F32_LIMIT);
                w.write_all(&narrowed.to_le_bytes()).map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a dataset written by [`write_dataset`]; f32 files widen to f64.
pub fn read_dataset(path: &Path) -> Result<(Array2<f64>, DatasetHeader)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path, e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != DATA_MAGIC {
        return Err(Error::invalid_argument(format!(
            "{}: not a dataset file (bad magic)",
            path.display()
        )));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io_err)?;
    let version = u32::from_le_bytes(b4);
    if version != DATA_VERSION {
        return Err(Error::invalid_argument(format!(
            "{}: unsupported dataset version {version}",
            path.display()
        )));
    }
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1).map_err(io_err)?;
    let width = match b1[0] {
        0 => FloatWidth::F64,
        1 => FloatWidth::F32,
        other => {
            return Err(Error::invalid_argument(format!(
                "{}: unknown dataset float width code {other}",
                path.display()
            )))
        }
    };
    r.read_exact(&mut b4).map_err(io_err)?;
    let bits = u32::from_le_bytes(b4);
    r.read_exact(&mut b8).map_err(io_err)?;
    let rows = u64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(io_err)?;
    let master_seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(io_err)?;
    let config_hash = u64::from_le_bytes(b8);

    if bits == 0 || bits > 64 {
        return Err(Error::invalid_argument(format!(
            "{}: implausible column count {bits}",
            path.display()
        )));
    }
    let count = (rows as usize)
        .checked_mul(bits as usize)
        .ok_or_else(|| Error::invalid_argument("dataset size overflows"))?;
    let mut values = Vec::with_capacity(count);
    match width {
        FloatWidth::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf).map_err(io_err)?;
                values.push(f64::from_le_bytes(buf));
            }
        }
        FloatWidth::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..count {
                r.read_exact(&mut buf).map_err(io_err)?;
                values.push(f32::from_le_bytes(buf) as f64);
            }
        }
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::invalid_argument(format!(
                "{}: trailing bytes after dataset rows",
                path.display()
            )))
        }
        Err(e) => return Err(Error::io(path, e)),
    }

    let header = DatasetHeader {
        width,
        bits,
        rows,
        master_seed,
        config_hash,
    };
    let data = Array2::from_shape_vec((rows as usize, bits as usize), values)
        .map_err(|e| Error::invalid_argument(format!("dataset shape: {e}")))?;
    Ok((data, header))
}

/// Generates the training set: for every configured SNR and codeword,
/// encode a random message, run it through the channel, demap exact
/// L-values and store one soft-bit row per symbol. Rows are shuffled at
/// the end so mini-batches mix SNRs. Deterministic in the master seed.
pub fn generate_dataset(cfg: &Config) -> Result<Array2<f64>> {
    generate_rows(cfg, cfg.train_codewords_per_snr, domains::TRAIN_DATA, false)
        .map(|(soft, _)| soft)
}

/// Like [`generate_dataset`] but keeps L-values unsquashed and returns the
/// transmitted bit of every position, for fitting L-value quantizers.
/// Rows stay in generation order.
pub fn generate_labeled_llrs(cfg: &Config) -> Result<(Array2<f64>, Array2<u8>)> {
    let (llrs, labels) =
        generate_rows(cfg, cfg.mmi_codewords_per_snr, domains::MMI_DATA, true)?;
    Ok((llrs, labels.expect("labeled generation returns labels")))
}

fn generate_rows(
    cfg: &Config,
    codewords_per_snr: usize,
    domain: u64,
    labeled: bool,
) -> Result<(Array2<f64>, Option<Array2<u8>>)> {
    if codewords_per_snr == 0 {
        return Err(Error::invalid_argument("codewords_per_snr must be positive"));
    }
    let constellation = Constellation::new(cfg.constellation_bits)?;
    let code = CodeInstance::build(cfg)?;
    let mode = channel_mode(cfg);
    let k = cfg.constellation_bits;
    let symbols_per_cw = code.codeword_len() / k;
    let rows = cfg.train_snrs_db.len() * codewords_per_snr * symbols_per_cw;

    let mut values = Vec::with_capacity(rows * k);
    let mut bits = if labeled { Vec::with_capacity(rows * k) } else { Vec::new() };
    for (s, &snr_db) in cfg.train_snrs_db.iter().enumerate() {
        for c in 0..codewords_per_snr {
            let seed = mix_seed(cfg.master_seed, domain, s as u64, c as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let msg = random_message(&code, &mut rng);
            let cw = code.encode(&msg)?;
            let (mapped, llrs) =
                transmit_codeword(&cw, cfg, &constellation, &mode, snr_db, &mut rng)?;
            if labeled {
                values.extend_from_slice(&llrs);
                bits.extend_from_slice(&mapped);
            } else {
                values.extend(llrs.iter().map(|&l| soft_bit(l)));
            }
        }
    }

    let matrix = Array2::from_shape_vec((rows, k), values)
        .map_err(|e| Error::invalid_argument(format!("dataset shape: {e}")))?;
    if labeled {
        let labels = Array2::from_shape_vec((rows, k), bits)
            .map_err(|e| Error::invalid_argument(format!("dataset shape: {e}")))?;
        return Ok((matrix, Some(labels)));
    }

    // Shuffle whole rows so a mini-batch is not a single SNR's block.
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix_seed(cfg.master_seed, domains::DATA_SHUFFLE, 0, 0));
    order.shuffle(&mut rng);
    let mut shuffled = Array2::zeros((rows, k));
    for (dst, &src) in order.iter().enumerate() {
        shuffled.row_mut(dst).assign(&matrix.row(src));
    }
    Ok((shuffled, None))
}
