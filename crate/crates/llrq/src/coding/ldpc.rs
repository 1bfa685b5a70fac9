//! LDPC encoding and sum-product belief-propagation decoding.
//!
//! Codes are loaded from alist parity-check matrices. Encoding is
//! systematic: message bits occupy the first k positions and the parity
//! bits are produced by a dense GF(2) generator derived from H by Gaussian
//! elimination on the last n-k columns.
//!
//! The decoder takes L-values in the crate convention (positive means
//! bit 1) and internally flips to the textbook log(P0/P1) orientation for
//! the tanh-domain check update.

use std::path::Path;

use crate::coding::alist::SparseParityCheck;
use crate::error::{Error, Result};

/// IEEE 802.11n rate-1/2 code of length 648 (z = 27), the canonical
/// (648, 324) code. Shipped as the repository's default LDPC asset.
const IEEE80211N_648_324: &str = include_str!("../../assets/ieee80211n_648_324.alist");

/// Outcome flags of one belief-propagation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BpOutcome {
    /// True when the hard decision satisfied every parity check.
    pub converged: bool,
    /// Number of iterations performed (1-based; the syndrome is tested
    /// after each iteration).
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: SparseParityCheck,
    k: usize,
    /// Parity generator rows: p[j] = popcount(rows[j] & msg) mod 2,
    /// bit-packed over the k message positions.
    parity_rows: Vec<Vec<u64>>,
    /// Per check: (variable index, global edge index).
    check_edges: Vec<Vec<(u32, u32)>>,
    /// Per variable: global edge indices.
    var_edges: Vec<Vec<u32>>,
    edge_count: usize,
}

/// Messages are kept within this magnitude; atanh never sees 1.
const MSG_CLAMP: f64 = 50.0;
const TANH_CLAMP: f64 = 1.0 - 1e-15;

impl LdpcCode {
    /// Builds the code from a parsed parity-check matrix, deriving the
    /// systematic encoder. Fails if the last n-k columns are singular.
    pub fn new(h: SparseParityCheck) -> Result<Self> {
        let (n, m) = (h.n(), h.m());
        if m >= n {
            return Err(Error::invalid_argument(format!(
                "parity-check matrix must be wide: n={n}, m={m}"
            )));
        }
        let k = n - m;
        let parity_rows = derive_parity_generator(&h, k)?;

        let mut check_edges = Vec::with_capacity(m);
        let mut var_edges = vec![Vec::new(); n];
        let mut edge = 0u32;
        for c in 0..m {
            let mut row = Vec::with_capacity(h.vars_of_check(c).len());
            for &v in h.vars_of_check(c) {
                row.push((v, edge));
                var_edges[v as usize].push(edge);
                edge += 1;
            }
            check_edges.push(row);
        }

        Ok(LdpcCode {
            h,
            k,
            parity_rows,
            check_edges,
            var_edges,
            edge_count: edge as usize,
        })
    }

    pub fn from_alist_str(text: &str) -> Result<Self> {
        Self::new(SparseParityCheck::parse(text)?)
    }

    pub fn load_alist(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_alist_str(&text)
    }

    /// The built-in (648, 324) code.
    pub fn ieee80211n_648_324() -> Self {
        Self::from_alist_str(IEEE80211N_648_324).expect("embedded alist asset is valid")
    }

    pub fn codeword_len(&self) -> usize {
        self.h.n()
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.h.n() as f64
    }

    pub fn parity_check(&self) -> &SparseParityCheck {
        &self.h
    }

    /// Systematic encode: returns [message | parity].
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.k {
            return Err(Error::invalid_argument(format!(
                "message length {} differs from k={}",
                msg.len(),
                self.k
            )));
        }
        let words = (self.k + 63) / 64;
        let mut packed = vec![0u64; words];
        for (i, &b) in msg.iter().enumerate() {
            packed[i / 64] |= ((b & 1) as u64) << (i % 64);
        }
        let mut cw = Vec::with_capacity(self.h.n());
        cw.extend(msg.iter().map(|&b| b & 1));
        for row in &self.parity_rows {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw.push((ones & 1) as u8);
        }
        debug_assert!(self.syndrome_ok(&cw));
        Ok(cw)
    }

    /// True when H c = 0.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.h.m()).all(|c| {
            self.h
                .vars_of_check(c)
                .iter()
                .fold(0u8, |acc, &v| acc ^ (bits[v as usize] & 1))
                == 0
        })
    }

    /// Flooding sum-product decoder. Stops as soon as the running hard
    /// decision satisfies all checks; the outcome reports whether that
    /// happened and after how many iterations.
    pub fn decode_bp(&self, llr: &[f64], max_iter: usize) -> Result<(Vec<u8>, BpOutcome)> {
        let n = self.h.n();
        if llr.len() != n {
            return Err(Error::invalid_argument(format!(
                "decoder input length {} differs from n={n}",
                llr.len()
            )));
        }
        if max_iter == 0 {
            return Err(Error::invalid_argument("max_iter must be at least 1"));
        }

        // internal orientation: log(P0/P1)
        let ch: Vec<f64> = llr.iter().map(|&l| -l).collect();
        let mut msg_vc: Vec<f64> = Vec::with_capacity(self.edge_count);
        for c in 0..self.h.m() {
            for &(v, _) in &self.check_edges[c] {
                msg_vc.push(ch[v as usize]);
            }
        }
        let mut msg_cv = vec![0.0f64; self.edge_count];
        let mut marginal = vec![0.0f64; n];
        let mut hard = vec![0u8; n];

        let max_deg = self.check_edges.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut t = vec![0.0f64; max_deg];
        let mut suffix = vec![0.0f64; max_deg + 1];

        for iter in 1..=max_iter {
            // check-node update via prefix/suffix tanh products
            for row in &self.check_edges {
                let deg = row.len();
                for (i, &(_, e)) in row.iter().enumerate() {
                    t[i] = (msg_vc[e as usize] / 2.0).tanh();
                }
                suffix[deg] = 1.0;
                for i in (0..deg).rev() {
                    suffix[i] = suffix[i + 1] * t[i];
                }
                let mut prefix = 1.0;
                for (i, &(_, e)) in row.iter().enumerate() {
                    let prod = (prefix * suffix[i + 1]).clamp(-TANH_CLAMP, TANH_CLAMP);
                    // 2 atanh(prod), written out because the platform atanh
                    // is imprecise near saturation
                    msg_cv[e as usize] = ((1.0 + prod) / (1.0 - prod)).ln();
                    prefix *= t[i];
                }
            }

            // variable-node update and hard decision
            for v in 0..n {
                let mut sum = ch[v];
                for &e in &self.var_edges[v] {
                    sum += msg_cv[e as usize];
                }
                marginal[v] = sum;
                hard[v] = (sum < 0.0) as u8;
            }
            for row in &self.check_edges {
                for &(v, e) in row {
                    msg_vc[e as usize] =
                        (marginal[v as usize] - msg_cv[e as usize]).clamp(-MSG_CLAMP, MSG_CLAMP);
                }
            }

            if self.syndrome_ok(&hard) {
                return Ok((
                    hard,
                    BpOutcome {
                        converged: true,
                        iterations: iter,
                    },
                ));
            }
        }
        Ok((
            hard,
            BpOutcome {
                converged: false,
                iterations: max_iter,
            },
        ))
    }
}

/// Gaussian elimination over GF(2): reduce the last m columns of H to the
/// identity, leaving the parity generator in the first k columns.
fn derive_parity_generator(h: &SparseParityCheck, k: usize) -> Result<Vec<Vec<u64>>> {
    let (n, m) = (h.n(), h.m());
    let words = (n + 63) / 64;
    let mut rows: Vec<Vec<u64>> = vec![vec![0u64; words]; m];
    for c in 0..m {
        for &v in h.vars_of_check(c) {
            rows[c][(v as usize) / 64] |= 1u64 << ((v as usize) % 64);
        }
    }
    for j in 0..m {
        let col = k + j;
        let (w, bit) = (col / 64, col % 64);
        let pivot = (j..m)
            .find(|&r| (rows[r][w] >> bit) & 1 == 1)
            .ok_or_else(|| {
                Error::InvalidState(format!(
                    "parity columns are singular at column {col}; cannot build a systematic encoder"
                ))
            })?;
        rows.swap(j, pivot);
        let pivot_row = rows[j].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != j && (row[w] >> bit) & 1 == 1 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
    }
    // extract the message-column halves
    let kw = (k + 63) / 64;
    Ok(rows
        .into_iter()
        .map(|row| {
            let mut out = row;
            out.truncate(kw);
            if k % 64 != 0 {
                out[kw - 1] &= (1u64 << (k % 64)) - 1;
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::L_MAX;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embedded_code_shape() {
        let code = LdpcCode::ieee80211n_648_324();
        assert_eq!(code.codeword_len(), 648);
        assert_eq!(code.message_len(), 324);
        assert_eq!(code.rate(), 0.5);
        assert_eq!(code.parity_check().edge_count(), 2376);
    }

    #[test]
    fn zero_message_zero_codeword() {
        let code = LdpcCode::ieee80211n_648_324();
        let cw = code.encode(&vec![0u8; 324]).unwrap();
        assert!(cw.iter().all(|&b| b == 0));
        assert!(code.syndrome_ok(&cw));
    }

    #[test]
    fn random_codewords_satisfy_parity() {
        let code = LdpcCode::ieee80211n_648_324();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..324).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = code.encode(&msg).unwrap();
            assert_eq!(&cw[..324], &msg[..]);
            assert!(code.syndrome_ok(&cw));
        }
        // linearity spot check
        let a: Vec<u8> = (0..324).map(|_| rng.gen_range(0..2u8)).collect();
        let b: Vec<u8> = (0..324).map(|_| rng.gen_range(0..2u8)).collect();
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        let cab = code.encode(&ab).unwrap();
        for i in 0..648 {
            assert_eq!(cab[i], ca[i] ^ cb[i]);
        }
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let code = LdpcCode::ieee80211n_648_324();
        assert!(code.encode(&vec![0u8; 323]).is_err());
        assert!(code.decode_bp(&vec![0.0; 647], 10).is_err());
        assert!(code.decode_bp(&vec![0.0; 648], 0).is_err());
    }

    #[test]
    fn noiseless_decode_in_one_iteration() {
        let code = LdpcCode::ieee80211n_648_324();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let msg: Vec<u8> = (0..324).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = code.encode(&msg).unwrap();
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 1 { L_MAX } else { -L_MAX }).collect();
        let (hard, out) = code.decode_bp(&llr, 50).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(hard, cw);
    }

    #[test]
    fn corrects_weak_bits() {
        let code = LdpcCode::ieee80211n_648_324();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let msg: Vec<u8> = (0..324).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = code.encode(&msg).unwrap();
        let mut llr: Vec<f64> = cw.iter().map(|&b| if b == 1 { 8.0 } else { -8.0 }).collect();
        // flip a handful of positions to mildly wrong values
        for i in [5usize, 100, 333, 640] {
            llr[i] = -llr[i].signum() * 1.5;
        }
        let (hard, out) = code.decode_bp(&llr, 50).unwrap();
        assert!(out.converged, "did not converge: {out:?}");
        assert_eq!(hard, cw);
    }

    #[test]
    fn converged_implies_zero_syndrome() {
        let code = LdpcCode::ieee80211n_648_324();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for trial in 0..10 {
            let llr: Vec<f64> = (0..648).map(|_| rng.gen::<f64>() * 8.0 - 4.0).collect();
            let (hard, out) = code.decode_bp(&llr, 30).unwrap();
            if out.converged {
                assert!(code.syndrome_ok(&hard), "trial {trial}");
            }
        }
    }

    #[test]
    fn singular_parity_part_rejected() {
        // last two columns identical -> singular parity submatrix
        let alist = "4 2\n2 3\n1 1 2 2\n3 3\n1 0\n2 0\n1 2\n1 2\n1 3 4\n2 3 4\n";
        let h = SparseParityCheck::parse(alist).unwrap();
        assert!(LdpcCode::new(h).is_err());
    }
}
