//! Polar encoding and successive-cancellation list decoding.
//!
//! Construction ranks synthesized channels by Bhattacharyya parameters at
//! a configurable design SNR. The decoder is an LLR-based SC list decoder
//! (min-sum check combine, path metric grows by |L| whenever a decision
//! contradicts its LLR); list size 1 gives plain SC. No CRC is attached.
//!
//! Input L-values use the crate convention (positive means bit 1) and are
//! flipped internally to log(P0/P1).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PolarCode {
    n: usize,
    k: usize,
    stages: usize,
    frozen: Vec<bool>,
    info_pos: Vec<usize>,
}

impl PolarCode {
    /// Bhattacharyya-parameter construction: starting from
    /// z = exp(-10^(design_snr_db/10)), the worse/better channel splits use
    /// 2z - z^2 and z^2; the k most reliable positions carry information.
    pub fn construct(n: usize, k: usize, design_snr_db: f64) -> Result<Self> {
        let stages = check_dims(n, k)?;
        let z0 = (-10f64.powf(design_snr_db / 10.0)).exp();
        let mut z = vec![0.0f64; n];
        for (i, zi) in z.iter_mut().enumerate() {
            let mut v = z0;
            // bits of i, MSB first, trace the split path of channel i
            for b in (0..stages).rev() {
                v = if (i >> b) & 1 == 1 { v * v } else { 2.0 * v - v * v };
            }
            *zi = v;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap().then(a.cmp(&b)));
        let mut frozen = vec![true; n];
        for &i in order.iter().take(k) {
            frozen[i] = false;
        }
        Ok(Self::from_frozen_flags(n, k, stages, frozen))
    }

    /// Builds a code from an explicit frozen set.
    pub fn from_frozen_indices(n: usize, frozen_indices: &[usize]) -> Result<Self> {
        if frozen_indices.iter().any(|&i| i >= n) {
            return Err(Error::invalid_argument("frozen index out of range"));
        }
        let mut frozen = vec![false; n];
        for &i in frozen_indices {
            if frozen[i] {
                return Err(Error::invalid_argument(format!("duplicate frozen index {i}")));
            }
            frozen[i] = true;
        }
        let k = n - frozen_indices.len();
        let stages = check_dims(n, k)?;
        Ok(Self::from_frozen_flags(n, k, stages, frozen))
    }

    fn from_frozen_flags(n: usize, k: usize, stages: usize, frozen: Vec<bool>) -> Self {
        let info_pos = (0..n).filter(|&i| !frozen[i]).collect();
        PolarCode {
            n,
            k,
            stages,
            frozen,
            info_pos,
        }
    }

    /// Frozen-set text format: one integer index per line, sorted.
    pub fn frozen_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.frozen[i]).collect()
    }

    pub fn save_frozen(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for i in self.frozen_indices() {
            text.push_str(&i.to_string());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn parse_frozen(n: usize, text: &str) -> Result<Self> {
        let mut indices = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let idx: usize = line.parse().map_err(|_| Error::Parse {
                line: no + 1,
                msg: format!("expected a frozen index, got {line:?}"),
            })?;
            indices.push(idx);
        }
        Self::from_frozen_indices(n, &indices)
    }

    pub fn load_frozen(n: usize, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_frozen(n, &text)
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_pos
    }

    /// x = u G: info bits placed on the reliable positions, frozen
    /// positions zero, then the butterfly transform.
    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        if msg.len() != self.k {
            return Err(Error::invalid_argument(format!(
                "message length {} differs from k={}",
                msg.len(),
                self.k
            )));
        }
        let mut x = vec![0u8; self.n];
        for (&pos, &b) in self.info_pos.iter().zip(msg) {
            x[pos] = b & 1;
        }
        let mut s = 1;
        while s < self.n {
            let mut i = 0;
            while i < self.n {
                if i & s == 0 {
                    x[i] ^= x[i + s];
                }
                i += 1;
            }
            s <<= 1;
        }
        Ok(x)
    }

    /// Plain successive cancellation (list size 1).
    pub fn decode_sc(&self, llr: &[f64]) -> Result<Vec<u8>> {
        self.decode_list(llr, 1)
    }

    /// SC list decoding; returns the decoded message bits of the best
    /// surviving path.
    pub fn decode_list(&self, llr: &[f64], list_size: usize) -> Result<Vec<u8>> {
        if llr.len() != self.n {
            return Err(Error::invalid_argument(format!(
                "decoder input length {} differs from n={}",
                llr.len(),
                self.n
            )));
        }
        if list_size == 0 {
            return Err(Error::invalid_argument("list size must be at least 1"));
        }

        let mut cur: Vec<PathState> = vec![PathState::new(self.n, self.stages); list_size];
        let mut next: Vec<PathState> = vec![PathState::new(self.n, self.stages); list_size];
        // internal orientation: log(P0/P1)
        for (dst, &l) in cur[0].p[..self.n].iter_mut().zip(llr) {
            *dst = -l;
        }
        let mut active = 1usize;
        let mut candidates: Vec<(f64, u32, u8)> = Vec::with_capacity(2 * list_size);

        for phi in 0..self.n {
            for path in cur.iter_mut().take(active) {
                path.refresh_llr(self.n, self.stages, phi);
            }
            if self.frozen[phi] {
                for path in cur.iter_mut().take(active) {
                    let l = path.leaf_llr(self.n, self.stages);
                    if l < 0.0 {
                        path.metric += -l;
                    }
                    path.set_bit(self.n, self.stages, phi, 0);
                }
                continue;
            }

            candidates.clear();
            for (idx, path) in cur.iter().enumerate().take(active) {
                let l = path.leaf_llr(self.n, self.stages);
                // u = 0 penalized when the LLR favors 1, and vice versa
                let pen0 = if l < 0.0 { -l } else { 0.0 };
                let pen1 = if l > 0.0 { l } else { 0.0 };
                candidates.push((path.metric + pen0, idx as u32, 0));
                candidates.push((path.metric + pen1, idx as u32, 1));
            }
            candidates.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            let survivors = candidates.len().min(list_size);
            for (slot, &(metric, parent, bit)) in candidates[..survivors].iter().enumerate() {
                next[slot].copy_from(&cur[parent as usize]);
                next[slot].metric = metric;
                next[slot].set_bit(self.n, self.stages, phi, bit);
            }
            std::mem::swap(&mut cur, &mut next);
            active = survivors;
        }

        let best = cur[..active]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.metric.partial_cmp(&b.1.metric).unwrap().then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .unwrap();
        Ok(self.info_pos.iter().map(|&i| cur[best].u[i]).collect())
    }
}

fn check_dims(n: usize, k: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid_argument(format!(
            "codeword length must be a power of two >= 2, got {n}"
        )));
    }
    if k > n {
        return Err(Error::invalid_argument(format!("k={k} exceeds n={n}")));
    }
    Ok(n.trailing_zeros() as usize)
}

/// One list path: LLR arrays for every tree level (sizes n, n/2, .., 1
/// concatenated), partial-sum arrays for levels 1..=stages (left and right
/// halves concatenated per level), the decided u vector, and the metric.
#[derive(Debug, Clone)]
struct PathState {
    p: Vec<f64>,
    c: Vec<u8>,
    u: Vec<u8>,
    metric: f64,
}

fn p_offset(n: usize, level: usize) -> usize {
    // n + n/2 + ... down to this level
    2 * n - (2 * n >> level)
}

fn c_offset(n: usize, level: usize) -> usize {
    // levels 1..level each store 2 * (n >> l) partial-sum bits
    (1..level).map(|l| 2 * (n >> l)).sum()
}

impl PathState {
    fn new(n: usize, stages: usize) -> Self {
        PathState {
            p: vec![0.0; 2 * n - 1],
            c: vec![0u8; (1..=stages).map(|l| 2 * (n >> l)).sum()],
            u: vec![0u8; n],
            metric: 0.0,
        }
    }

    fn copy_from(&mut self, other: &Self) {
        self.p.copy_from_slice(&other.p);
        self.c.copy_from_slice(&other.c);
        self.u.copy_from_slice(&other.u);
        self.metric = other.metric;
    }

    fn leaf_llr(&self, n: usize, stages: usize) -> f64 {
        self.p[p_offset(n, stages)]
    }

    /// Recomputes the LLR levels invalidated by reaching phase `phi`.
    fn refresh_llr(&mut self, n: usize, stages: usize, phi: usize) {
        let start = if phi == 0 {
            1
        } else {
            stages - phi.trailing_zeros() as usize
        };
        for level in start..=stages {
            let size = n >> level;
            let branch = (phi >> (stages - level)) & 1;
            let src = p_offset(n, level - 1);
            let dst = p_offset(n, level);
            if branch == 0 {
                for i in 0..size {
                    let a = self.p[src + i];
                    let b = self.p[src + size + i];
                    self.p[dst + i] = a.signum() * b.signum() * a.abs().min(b.abs());
                }
            } else {
                let cs = c_offset(n, level);
                for i in 0..size {
                    let a = self.p[src + i];
                    let b = self.p[src + size + i];
                    let left = self.c[cs + i];
                    self.p[dst + i] = if left == 0 { b + a } else { b - a };
                }
            }
        }
    }

    /// Records the decision for phase `phi` and propagates partial sums.
    fn set_bit(&mut self, n: usize, stages: usize, phi: usize, bit: u8) {
        self.u[phi] = bit;
        let leaf = c_offset(n, stages);
        self.c[leaf + (phi & 1)] = bit;
        let mut level = stages;
        let mut ph = phi;
        while ph & 1 == 1 && level > 1 {
            let size = n >> level;
            let src = c_offset(n, level);
            let parent = c_offset(n, level - 1);
            let side = (ph >> 1) & 1;
            let base = parent + side * (n >> (level - 1));
            for i in 0..size {
                self.c[base + i] = self.c[src + i] ^ self.c[src + size + i];
                self.c[base + size + i] = self.c[src + size + i];
            }
            ph >>= 1;
            level -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::L_MAX;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noiseless_llr(cw: &[u8]) -> Vec<f64> {
        cw.iter().map(|&b| if b == 1 { L_MAX } else { -L_MAX }).collect()
    }

    #[test]
    fn construct_rate_half() {
        let code = PolarCode::construct(256, 128, 3.0).unwrap();
        assert_eq!(code.codeword_len(), 256);
        assert_eq!(code.message_len(), 128);
        assert_eq!(code.frozen_indices().len(), 128);
        assert_eq!(code.info_positions().len(), 128);
        // position 0 goes through the worst split chain, always frozen
        assert!(code.frozen_indices().contains(&0));
        // the last position is the most reliable, always information
        assert!(code.info_positions().contains(&255));
    }

    #[test]
    fn construct_rejects_bad_dims() {
        assert!(PolarCode::construct(100, 50, 3.0).is_err());
        assert!(PolarCode::construct(256, 300, 3.0).is_err());
        assert!(PolarCode::construct(1, 1, 3.0).is_err());
    }

    #[test]
    fn zero_message_zero_codeword() {
        let code = PolarCode::construct(256, 128, 3.0).unwrap();
        let cw = code.encode(&vec![0u8; 128]).unwrap();
        assert!(cw.iter().all(|&b| b == 0));
    }

    #[test]
    fn encode_is_linear() {
        let code = PolarCode::construct(64, 32, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a: Vec<u8> = (0..32).map(|_| rng.gen_range(0..2u8)).collect();
        let b: Vec<u8> = (0..32).map(|_| rng.gen_range(0..2u8)).collect();
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        let cab = code.encode(&ab).unwrap();
        for i in 0..64 {
            assert_eq!(cab[i], ca[i] ^ cb[i]);
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let code = PolarCode::construct(256, 128, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let msg: Vec<u8> = (0..128).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = code.encode(&msg).unwrap();
            let llr = noiseless_llr(&cw);
            assert_eq!(code.decode_sc(&llr).unwrap(), msg);
            assert_eq!(code.decode_list(&llr, 8).unwrap(), msg);
        }
    }

    #[test]
    fn list_beats_plain_sc_on_noisy_input() {
        let code = PolarCode::construct(128, 64, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let trials = 300;
        let sigma = 0.85; // BPSK-ish noise level where SC struggles
        let mut sc_err = 0;
        let mut scl_err = 0;
        for _ in 0..trials {
            let msg: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = code.encode(&msg).unwrap();
            let llr: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let x = if b == 1 { 1.0 } else { -1.0 };
                    let noise: f64 = rng.sample(rand_distr::StandardNormal);
                    2.0 * (x + sigma * noise) / (sigma * sigma)
                })
                .collect();
            if code.decode_sc(&llr).unwrap() != msg {
                sc_err += 1;
            }
            if code.decode_list(&llr, 8).unwrap() != msg {
                scl_err += 1;
            }
        }
        assert!(
            scl_err < sc_err,
            "list-8 errors {scl_err} not below SC errors {sc_err}"
        );
    }

    #[test]
    fn decoder_rejects_bad_input() {
        let code = PolarCode::construct(64, 32, 3.0).unwrap();
        assert!(code.decode_list(&vec![0.0; 63], 8).is_err());
        assert!(code.decode_list(&vec![0.0; 64], 0).is_err());
        assert!(code.encode(&vec![0u8; 31]).is_err());
    }

    #[test]
    fn frozen_set_round_trip() {
        let code = PolarCode::construct(256, 128, 3.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frozen.txt");
        code.save_frozen(&path).unwrap();
        let loaded = PolarCode::load_frozen(256, &path).unwrap();
        assert_eq!(loaded.frozen_indices(), code.frozen_indices());
        assert_eq!(loaded.message_len(), 128);

        assert!(PolarCode::parse_frozen(256, "3\nx\n").is_err());
        assert!(PolarCode::parse_frozen(4, "9\n").is_err());
        assert!(PolarCode::parse_frozen(4, "1\n1\n").is_err());
    }

    #[test]
    fn construction_deterministic() {
        let a = PolarCode::construct(256, 128, 3.0).unwrap();
        let b = PolarCode::construct(256, 128, 3.0).unwrap();
        assert_eq!(a.frozen_indices(), b.frozen_indices());
    }
}
