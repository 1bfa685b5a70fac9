//! Binary model files and the training-history CSV.
//!
//! Model files are little-endian throughout: an 8-byte magic, a format
//! version, a float width tag, then the encoder and decoders as plain
//! dimension-prefixed weight dumps. Weights may be stored at full f64
//! precision or narrowed to f32 for compactness.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::net::{Activation, BranchedAutoencoder, DenseLayer, Mlp};
use super::train::HistoryRow;
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"LLRQMODL";
const MODEL_VERSION: u32 = 1;
const MAX_LAYERS: u32 = 64;
const MAX_DIM: u32 = 1 << 20;

/// Storage precision of a saved model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatWidth {
    F64,
    F32,
}

impl FloatWidth {
    fn code(self) -> u8 {
        match self {
            FloatWidth::F64 => 0,
            FloatWidth::F32 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FloatWidth::F64),
            1 => Ok(FloatWidth::F32),
            other => Err(Error::InvalidState(format!(
                "model file: unknown float width code {other}"
            ))),
        }
    }
}

fn write_f64(w: &mut impl Write, v: f64, width: FloatWidth) -> std::io::Result<()> {
    match width {
        FloatWidth::F64 => w.write_all(&v.to_le_bytes()),
        FloatWidth::F32 => w.write_all(&(v as f32).to_le_bytes()),
    }
}

fn read_f64(r: &mut impl Read, width: FloatWidth) -> std::io::Result<f64> {
    match width {
        FloatWidth::F64 => {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        }
        FloatWidth::F32 => {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            Ok(f32::from_le_bytes(buf) as f64)
        }
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u8(r: &mut impl Read) -> std::io::Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn write_mlp(w: &mut impl Write, mlp: &Mlp, width: FloatWidth) -> std::io::Result<()> {
    write_u32(w, mlp.layers.len() as u32)?;
    for layer in &mlp.layers {
        write_u32(w, layer.out_dim() as u32)?;
        write_u32(w, layer.in_dim() as u32)?;
        w.write_all(&[layer.act.code()])?;
        for &v in layer.w.iter() {
            write_f64(w, v, width)?;
        }
        for &v in layer.b.iter() {
            write_f64(w, v, width)?;
        }
    }
    Ok(())
}

fn read_mlp(r: &mut impl Read, width: FloatWidth, path: &Path) -> Result<Mlp> {
    let io_err = |e: std::io::Error| Error::io(path, e);
    let layer_count = read_u32(r).map_err(io_err)?;
    if layer_count == 0 || layer_count > MAX_LAYERS {
        return Err(Error::InvalidState(format!(
            "model file: implausible layer count {layer_count}"
        )));
    }
    let mut layers = Vec::with_capacity(layer_count as usize);
    let mut prev_out: Option<u32> = None;
    for i in 0..layer_count {
        let out_dim = read_u32(r).map_err(io_err)?;
        let in_dim = read_u32(r).map_err(io_err)?;
        if out_dim == 0 || in_dim == 0 || out_dim > MAX_DIM || in_dim > MAX_DIM {
            return Err(Error::InvalidState(format!(
                "model file: implausible layer {i} shape {out_dim}x{in_dim}"
            )));
        }
        if let Some(prev) = prev_out {
            if prev != in_dim {
                return Err(Error::InvalidState(format!(
                    "model file: layer {i} expects {in_dim} inputs but the previous layer emits {prev}"
                )));
            }
        }
        prev_out = Some(out_dim);
        let act = Activation::from_code(read_u8(r).map_err(io_err)?)?;
        let mut w = Array2::zeros((out_dim as usize, in_dim as usize));
        for v in w.iter_mut() {
            *v = read_f64(r, width).map_err(io_err)?;
        }
        let mut b = Array1::zeros(out_dim as usize);
        for v in b.iter_mut() {
            *v = read_f64(r, width).map_err(io_err)?;
        }
        layers.push(DenseLayer { w, b, act });
    }
    Ok(Mlp { layers })
}

/// Writes a model file at the requested precision.
pub fn save_model(net: &BranchedAutoencoder, path: &Path, width: FloatWidth) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(MODEL_MAGIC)?;
        write_u32(&mut w, MODEL_VERSION)?;
        w.write_all(&[width.code()])?;
        write_u32(&mut w, net.bits() as u32)?;
        write_mlp(&mut w, &net.encoder, width)?;
        write_u32(&mut w, net.decoders.len() as u32)?;
        for dec in &net.decoders {
            write_mlp(&mut w, dec, width)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads a model file saved by `save_model`. f32 weights are widened back
/// to f64.
pub fn load_model(path: &Path) -> Result<BranchedAutoencoder> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::InvalidState(format!(
            "model file {}: bad magic",
            path.display()
        )));
    }
    let version = read_u32(&mut r).map_err(io_err)?;
    if version != MODEL_VERSION {
        return Err(Error::InvalidState(format!(
            "model file {}: unsupported version {version}",
            path.display()
        )));
    }
    let width = FloatWidth::from_code(read_u8(&mut r).map_err(io_err)?)?;
    let bits = read_u32(&mut r).map_err(io_err)? as usize;

    let encoder = read_mlp(&mut r, width, path)?;
    let decoder_count = read_u32(&mut r).map_err(io_err)? as usize;
    if decoder_count != bits {
        return Err(Error::InvalidState(format!(
            "model file {}: header says {bits} bits but {decoder_count} decoders follow",
            path.display()
        )));
    }
    let mut decoders = Vec::with_capacity(decoder_count);
    for _ in 0..decoder_count {
        decoders.push(read_mlp(&mut r, width, path)?);
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::InvalidState(format!(
            "model file {}: trailing bytes after the last decoder",
            path.display()
        )));
    }

    let net = BranchedAutoencoder { encoder, decoders };
    if net.encoder.in_dim() != bits || net.decoders.iter().any(|d| d.out_dim() != 1) {
        return Err(Error::InvalidState(format!(
            "model file {}: layer shapes disagree with the header",
            path.display()
        )));
    }
    Ok(net)
}

/// Writes the per-epoch training history as CSV. Error cells are empty on
/// epochs where no measurement was taken.
pub fn write_history(rows: &[HistoryRow], bits: usize, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        write!(w, "stage,round,epoch,loss")?;
        for k in 1..=bits {
            write!(w, ",e_{k}")?;
        }
        for k in 1..=bits {
            write!(w, ",w_{k}")?;
        }
        writeln!(w)?;
        for row in rows {
            write!(w, "{},{},{},{}", row.stage, row.round, row.epoch, row.loss)?;
            for k in 0..bits {
                match row.errors.get(k) {
                    Some(e) => write!(w, ",{e}")?,
                    None => write!(w, ",")?,
                }
            }
            for k in 0..bits {
                match row.weights.get(k) {
                    Some(v) => write!(w, ",{v}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_net(seed: u64) -> BranchedAutoencoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BranchedAutoencoder::new(4, &mut rng).unwrap()
    }

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = test_net(5);
        save_model(&net, &path, FloatWidth::F64).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.bits(), 4);
        for (a, b) in net.encoder.layers.iter().zip(&back.encoder.layers) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
            assert_eq!(a.act, b.act);
        }
        for (da, db) in net.decoders.iter().zip(&back.decoders) {
            for (a, b) in da.layers.iter().zip(&db.layers) {
                assert_eq!(a.w, b.w);
            }
        }
    }

    #[test]
    fn f32_round_trip_stays_close() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model32.bin");
        let net = test_net(6);
        save_model(&net, &path, FloatWidth::F32).unwrap();
        let back = load_model(&path).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((32, 4), |_| rng.gen::<f64>() * 1.8 - 0.9);
        let a = net.reconstruct(x.view());
        let b = back.reconstruct(x.view());
        for (va, vb) in a.iter().zip(b.iter()) {
            assert!((va - vb).abs() < 1e-5, "{va} vs {vb}");
        }
        let f64_path = dir.path().join("model64.bin");
        save_model(&net, &f64_path, FloatWidth::F64).unwrap();
        let small = std::fs::metadata(&path).unwrap().len();
        let large = std::fs::metadata(&f64_path).unwrap().len();
        assert!(small < large);
    }

    #[test]
    fn rejects_corrupted_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let net = test_net(7);
        save_model(&net, &path, FloatWidth::F64).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let bad_magic = dir.path().join("bad_magic.bin");
        let mut corrupted = bytes.clone();
        corrupted[0] = b'X';
        std::fs::write(&bad_magic, &corrupted).unwrap();
        assert!(load_model(&bad_magic).is_err());

        let truncated = dir.path().join("truncated.bin");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_model(&truncated).is_err());

        let padded = dir.path().join("padded.bin");
        let mut extra = bytes.clone();
        extra.push(0);
        std::fs::write(&padded, &extra).unwrap();
        assert!(load_model(&padded).is_err());

        let bad_version = dir.path().join("version.bin");
        let mut versioned = bytes;
        versioned[8] = 99;
        std::fs::write(&bad_version, &versioned).unwrap();
        assert!(load_model(&bad_version).is_err());
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let rows = vec![
            HistoryRow {
                stage: 1,
                round: 1,
                epoch: 1,
                loss: 0.5,
                errors: Vec::new(),
                weights: vec![0.5, 0.5],
            },
            HistoryRow {
                stage: 1,
                round: 1,
                epoch: 2,
                loss: 0.25,
                errors: vec![0.1, 0.4],
                weights: vec![0.5, 0.5],
            },
        ];
        write_history(&rows, 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "stage,round,epoch,loss,e_1,e_2,w_1,w_2");
        assert_eq!(lines[1], "1,1,1,0.5,,,0.5,0.5");
        assert_eq!(lines[2], "1,1,2,0.25,0.1,0.4,0.5,0.5");
    }
}
