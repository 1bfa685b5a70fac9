//! Maximum-mutual-information scalar quantization of L-values.
//!
//! Each bit position gets its own quantizer: the (transmitted bit, LLR)
//! pairs are histogrammed, and dynamic programming places cell boundaries
//! on bin edges to maximize the mutual information between the bit and the
//! cell index. Contiguous cells are optimal here because the posterior is
//! monotone in the LLR. Each cell's representative is the LLR implied by
//! its empirical bit posterior.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::modem::L_MAX;

/// Default histogram resolution over the clipped LLR range.
pub const MMI_BINS: usize = 2000;

/// Quantizer for one bit position: sorted thresholds and one
/// representative L-value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BitQuantizer {
    thresholds: Vec<f64>,
    reps: Vec<f64>,
}

impl BitQuantizer {
    /// Wraps explicit parts. Thresholds must be strictly increasing and
    /// representatives non-decreasing (clamping can saturate neighbors to
    /// the same clipped value) with one more representative than
    /// thresholds.
    pub fn from_parts(thresholds: Vec<f64>, reps: Vec<f64>) -> Result<Self> {
        if reps.len() != thresholds.len() + 1 {
            return Err(Error::invalid_argument(format!(
                "{} thresholds need {} representatives, got {}",
                thresholds.len(),
                thresholds.len() + 1,
                reps.len()
            )));
        }
        if thresholds.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::invalid_argument(
                "thresholds must be strictly increasing",
            ));
        }
        if reps.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid_argument(
                "representatives must be non-decreasing",
            ));
        }
        if thresholds.iter().chain(reps.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid_argument("quantizer values must be finite"));
        }
        Ok(BitQuantizer { thresholds, reps })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn representatives(&self) -> &[f64] {
        &self.reps
    }

    /// Cell index of an L-value; a value exactly on a threshold belongs to
    /// the upper cell.
    pub fn cell(&self, l: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= l)
    }

    pub fn quantize(&self, l: f64) -> f64 {
        self.reps[self.cell(l)]
    }
}

/// One `BitQuantizer` per bit position of the symbol label.
#[derive(Clone, Debug, PartialEq)]
pub struct MmiQuantizer {
    per_bit: Vec<BitQuantizer>,
}

fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Fits one bit position. `llrs` are the computed L-values, `tx` the bits
/// actually transmitted. The histogram spans the clipped LLR range; `bins`
/// controls its resolution and thereby the threshold granularity.
pub fn mmi_fit(llrs: &[f64], tx: &[bool], bits: usize, bins: usize) -> Result<BitQuantizer> {
    if llrs.len() != tx.len() {
        return Err(Error::invalid_argument(format!(
            "{} LLRs but {} transmitted bits",
            llrs.len(),
            tx.len()
        )));
    }
    if llrs.is_empty() {
        return Err(Error::invalid_argument("no samples"));
    }
    if bits == 0 || bits > 8 {
        return Err(Error::invalid_argument(format!(
            "cell count 2^{bits} is out of the supported 1..=8 bit range"
        )));
    }
    let cells = 1usize << bits;
    if bins < cells {
        return Err(Error::invalid_argument(format!(
            "{bins} histogram bins cannot host {cells} cells"
        )));
    }
    let ones = tx.iter().filter(|&&b| b).count();
    if ones == 0 || ones == tx.len() {
        return Err(Error::DegenerateInput(
            "all samples carry the same transmitted bit".into(),
        ));
    }

    let lo = -L_MAX;
    let width = 2.0 * L_MAX / bins as f64;
    let mut c0 = vec![0u64; bins];
    let mut c1 = vec![0u64; bins];
    for (&l, &b) in llrs.iter().zip(tx) {
        let idx = (((l - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        if b {
            c1[idx] += 1;
        } else {
            c0[idx] += 1;
        }
    }

    // Prefix counts: p0[i] = zeros in bins [0, i).
    let mut p0 = vec![0u64; bins + 1];
    let mut p1 = vec![0u64; bins + 1];
    for i in 0..bins {
        p0[i + 1] = p0[i] + c0[i];
        p1[i + 1] = p1[i] + c1[i];
    }
    let n = llrs.len() as f64;
    let q0 = (tx.len() - ones) as f64 / n;
    let q1 = ones as f64 / n;

    // Mutual-information contribution of one cell spanning bins [i, j).
    // Empty spans are infeasible: they would leave a cell without a
    // posterior.
    let cell_gain = |i: usize, j: usize| -> f64 {
        let a0 = (p0[j] - p0[i]) as f64 / n;
        let a1 = (p1[j] - p1[i]) as f64 / n;
        let pc = a0 + a1;
        if pc == 0.0 {
            return f64::NEG_INFINITY;
        }
        xlnx(a0) + xlnx(a1) - a0 * (q0 * pc).ln() - a1 * (q1 * pc).ln()
    };

    // dp[j] after m rounds: best gain splitting bins [0, j) into m cells.
    let mut prev = vec![f64::NEG_INFINITY; bins + 1];
    for j in 1..=bins {
        prev[j] = cell_gain(0, j);
    }
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(cells);
    back.push(vec![0; bins + 1]);
    for m in 2..=cells {
        let mut cur = vec![f64::NEG_INFINITY; bins + 1];
        let mut bp = vec![0u32; bins + 1];
        for j in m..=bins {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0u32;
            for i in (m - 1)..j {
                if prev[i] == f64::NEG_INFINITY {
                    continue;
                }
                let g = cell_gain(i, j);
                if g == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev[i] + g;
                if cand > best {
                    best = cand;
                    arg = i as u32;
                }
            }
            cur[j] = best;
            bp[j] = arg;
        }
        prev = cur;
        back.push(bp);
    }
    if prev[bins] == f64::NEG_INFINITY {
        return Err(Error::DegenerateInput(format!(
            "fewer than {cells} non-empty histogram bins"
        )));
    }

    // Walk the back pointers to recover the boundary bins.
    let mut bounds = Vec::with_capacity(cells - 1);
    let mut j = bins;
    for m in (2..=cells).rev() {
        let i = back[m - 1][j] as usize;
        bounds.push(i);
        j = i;
    }
    bounds.reverse();

    let thresholds: Vec<f64> = bounds.iter().map(|&i| lo + i as f64 * width).collect();
    let mut edges = Vec::with_capacity(cells + 1);
    edges.push(0);
    edges.extend(bounds.iter().copied());
    edges.push(bins);
    let reps: Vec<f64> = edges
        .windows(2)
        .map(|e| {
            let z = (p0[e[1]] - p0[e[0]]) as f64;
            let o = (p1[e[1]] - p1[e[0]]) as f64;
            if z == 0.0 {
                L_MAX
            } else if o == 0.0 {
                -L_MAX
            } else {
                (o / z).ln().clamp(-L_MAX, L_MAX)
            }
        })
        .collect();
    if reps.windows(2).any(|p| p[1] < p[0]) {
        eprintln!("warning: cell representatives are not monotone: {reps:?}");
    }
    BitQuantizer::from_parts(thresholds, reps)
}

/// Fits one quantizer per column of matched LLR / transmitted-bit
/// matrices.
pub fn mmi_fit_columns(
    llrs: ArrayView2<f64>,
    tx: ArrayView2<u8>,
    bits: usize,
    bins: usize,
) -> Result<MmiQuantizer> {
    if llrs.dim() != tx.dim() {
        return Err(Error::invalid_argument(format!(
            "LLR matrix is {:?} but bit matrix is {:?}",
            llrs.dim(),
            tx.dim()
        )));
    }
    let mut per_bit = Vec::with_capacity(llrs.ncols());
    for k in 0..llrs.ncols() {
        let col: Vec<f64> = llrs.column(k).iter().copied().collect();
        let bcol: Vec<bool> = tx.column(k).iter().map(|&b| b != 0).collect();
        per_bit.push(mmi_fit(&col, &bcol, bits, bins)?);
    }
    Ok(MmiQuantizer { per_bit })
}

impl MmiQuantizer {
    pub fn from_bit_quantizers(per_bit: Vec<BitQuantizer>) -> Result<Self> {
        if per_bit.is_empty() {
            return Err(Error::invalid_argument("no bit positions"));
        }
        Ok(MmiQuantizer { per_bit })
    }

    pub fn bit_positions(&self) -> usize {
        self.per_bit.len()
    }

    pub fn per_bit(&self) -> &[BitQuantizer] {
        &self.per_bit
    }

    /// Quantizes an L-value observed at bit position `k` of the label.
    pub fn quantize(&self, l: f64, k: usize) -> f64 {
        self.per_bit[k].quantize(l)
    }

    /// Plain text: a `[bit k]` section per position with `t` and `r` lines
    /// for thresholds and representatives.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            for (k, q) in self.per_bit.iter().enumerate() {
                writeln!(w, "[bit {}]", k + 1)?;
                for t in &q.thresholds {
                    writeln!(w, "t {t}")?;
                }
                for r in &q.reps {
                    writeln!(w, "r {r}")?;
                }
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut sections: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                let expected = format!("[bit {}]", sections.len() + 1);
                if line != expected {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected section header {expected}, got {line}"),
                    });
                }
                sections.push((Vec::new(), Vec::new()));
                continue;
            }
            let (kind, value) = line.split_once(' ').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected 't <value>' or 'r <value>', got {line}"),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not a number: {value}"),
            })?;
            let section = sections.last_mut().ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "value before any [bit k] header".into(),
            })?;
            match kind {
                "t" => {
                    if !section.1.is_empty() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "threshold after representatives".into(),
                        });
                    }
                    section.0.push(value);
                }
                "r" => section.1.push(value),
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unknown line kind {other}"),
                    })
                }
            }
        }
        if sections.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "no [bit k] sections".into(),
            });
        }
        let mut per_bit = Vec::with_capacity(sections.len());
        for (thresholds, reps) in sections {
            per_bit.push(BitQuantizer::from_parts(thresholds, reps)?);
        }
        MmiQuantizer::from_bit_quantizers(per_bit)
    }
}

/// Empirical mutual information (nats) between the transmitted bit and the
/// quantizer cell index.
pub fn empirical_mutual_information(llrs: &[f64], tx: &[bool], q: &BitQuantizer) -> f64 {
    let cells = q.reps.len();
    let mut joint = vec![[0u64; 2]; cells];
    for (&l, &b) in llrs.iter().zip(tx) {
        joint[q.cell(l)][b as usize] += 1;
    }
    mi_from_joint(&joint, llrs.len() as f64)
}

/// Mutual information (nats) between the transmitted bit and the raw
/// histogram bin index, an upper bound for any quantizer built on those
/// bins.
pub fn binned_mutual_information(llrs: &[f64], tx: &[bool], bins: usize) -> f64 {
    let lo = -L_MAX;
    let width = 2.0 * L_MAX / bins as f64;
    let mut joint = vec![[0u64; 2]; bins];
    for (&l, &b) in llrs.iter().zip(tx) {
        let idx = (((l - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        joint[idx][b as usize] += 1;
    }
    mi_from_joint(&joint, llrs.len() as f64)
}

fn mi_from_joint(joint: &[[u64; 2]], n: f64) -> f64 {
    let mut m0 = 0u64;
    let mut m1 = 0u64;
    for j in joint {
        m0 += j[0];
        m1 += j[1];
    }
    let q = [m0 as f64 / n, m1 as f64 / n];
    let mut mi = 0.0;
    for j in joint {
        let pc = (j[0] + j[1]) as f64 / n;
        if pc == 0.0 {
            continue;
        }
        for x in 0..2 {
            let pxc = j[x] as f64 / n;
            if pxc > 0.0 {
                mi += pxc * (pxc / (q[x] * pc)).ln();
            }
        }
    }
    mi
}
