//! Gray-coded square QAM mapping and soft demapping.
//!
//! A square M-QAM constellation with K = log2(M) bits per symbol is built as
//! the Cartesian product of two Gray-labeled PAM constellations. The first
//! K/2 bits of a symbol label select the real coordinate (MSB first), the
//! last K/2 the imaginary coordinate. With this convention the average
//! L-value magnitudes are non-increasing within each half of the label,
//! which downstream compression relies on.
//!
//! Sign convention everywhere: a positive L-value means bit 1 is more
//! likely, L = log P(y|b=1) - log P(y|b=0).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard clip applied to every L-value produced by this module. Chosen past
/// the point where tanh(L/2) saturates in double precision, so clipping is
/// invisible to soft-bit consumers, while keeping atanh round trips finite.
pub const L_MAX: f64 = 40.0;

/// Soft bits are clamped to [-(1 - 1e-12), 1 - 1e-12] so that atanh stays
/// finite no matter what the L-value was.
pub const SOFT_BIT_CLAMP: f64 = 1.0 - 1e-12;

/// The three sufficient statistics of one channel use: from (G, y_r, y_i)
/// every L-value of the symbol can be recovered exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientStats {
    /// Gain-to-noise ratio |h|^2 / sigma^2.
    pub g: f64,
    /// Real part of the equalized symbol y/h.
    pub y_r: f64,
    /// Imaginary part of the equalized symbol y/h.
    pub y_i: f64,
}

/// G = |h|^2 / sigma^2 and the equalized symbol y/h.
pub fn sufficient_stats(y: Complex64, h: Complex64, sigma2: f64) -> Result<SufficientStats> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::invalid_argument("channel coefficient h must be nonzero"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid_argument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let eq = y / h;
    Ok(SufficientStats {
        g: h.norm_sqr() / sigma2,
        y_r: eq.re,
        y_i: eq.im,
    })
}

/// Soft bit of one L-value, tanh(L/2), clamped strictly inside (-1, 1).
pub fn soft_bit(llr: f64) -> f64 {
    (llr / 2.0).tanh().clamp(-SOFT_BIT_CLAMP, SOFT_BIT_CLAMP)
}

/// Inverse of [`soft_bit`]: L = 2 atanh(lambda) after clamping, clipped to
/// [-L_MAX, L_MAX]. Written as ln((1+x)/(1-x)) because the platform atanh
/// loses several digits near the saturation region.
pub fn llr_of_soft_bit(lambda: f64) -> f64 {
    let x = lambda.clamp(-SOFT_BIT_CLAMP, SOFT_BIT_CLAMP);
    ((1.0 + x) / (1.0 - x)).ln().clamp(-L_MAX, L_MAX)
}

/// Element-wise [`soft_bit`].
pub fn to_soft_bits(llrs: &[f64]) -> Vec<f64> {
    llrs.iter().map(|&l| soft_bit(l)).collect()
}

/// Element-wise [`llr_of_soft_bit`].
pub fn from_soft_bits(soft: &[f64]) -> Vec<f64> {
    soft.iter().map(|&s| llr_of_soft_bit(s)).collect()
}

/// Gray-labeled square QAM constellation with unit average energy.
#[derive(Debug, Clone)]
pub struct Constellation {
    k: usize,
    side: usize,
    /// PAM amplitudes in ascending order, shared by both axes.
    levels: Vec<f64>,
    /// Gray label of each level index (k/2-bit value, MSB first).
    gray_of_index: Vec<usize>,
    /// Symbol for each K-bit label value (bits MSB first).
    points: Vec<Complex64>,
    /// bit_is_one[j][i]: Gray bit j (MSB first) of level i.
    bit_is_one: Vec<Vec<bool>>,
}

impl Constellation {
    /// Builds the BRGC-labeled constellation for an even number of bits per
    /// symbol, 2 <= K <= 12, normalized to unit average energy.
    pub fn new(bits_per_symbol: usize) -> Result<Self> {
        let k = bits_per_symbol;
        if k % 2 != 0 || !(2..=12).contains(&k) {
            return Err(Error::invalid_argument(format!(
                "bits per symbol must be even and in 2..=12, got {k}"
            )));
        }
        let k2 = k / 2;
        let side = 1usize << k2;

        // Unit-energy PAM scale: levels are (2i - (side-1)) * a with
        // E[x^2] = a^2 (side^2 - 1) / 3 per axis and two axes.
        let a = (3.0 / (2.0 * ((side * side - 1) as f64))).sqrt();
        let levels: Vec<f64> = (0..side).map(|i| (2.0 * i as f64 - (side as f64 - 1.0)) * a).collect();

        let gray_of_index: Vec<usize> = (0..side).map(|i| i ^ (i >> 1)).collect();
        let mut index_of_gray = vec![0usize; side];
        for (i, &g) in gray_of_index.iter().enumerate() {
            index_of_gray[g] = i;
        }

        let mut points = vec![Complex64::new(0.0, 0.0); 1 << k];
        for v in 0..(1usize << k) {
            let gi = v >> k2;
            let gq = v & (side - 1);
            points[v] = Complex64::new(levels[index_of_gray[gi]], levels[index_of_gray[gq]]);
        }

        let bit_is_one = (0..k2)
            .map(|j| {
                (0..side)
                    .map(|i| (gray_of_index[i] >> (k2 - 1 - j)) & 1 == 1)
                    .collect()
            })
            .collect();

        Ok(Constellation {
            k,
            side,
            levels,
            gray_of_index,
            points,
            bit_is_one,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.k
    }

    /// Number of constellation points, M = 2^K.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// All points, indexed by the integer value of their K-bit label
    /// (MSB first).
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Label bits (MSB first) of the point at label value `v`.
    pub fn label_bits(&self, v: usize) -> Vec<u8> {
        (0..self.k).rev().map(|b| ((v >> b) & 1) as u8).collect()
    }

    /// Maps one K-bit label to its symbol.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Complex64> {
        if bits.len() != self.k {
            return Err(Error::invalid_argument(format!(
                "expected {} bits, got {}",
                self.k,
                bits.len()
            )));
        }
        let v = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        Ok(self.points[v])
    }

    /// Maps a bit stream whose length is a multiple of K to symbols.
    pub fn map_all(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.k != 0 {
            return Err(Error::invalid_argument(format!(
                "bit count {} is not a multiple of {}",
                bits.len(),
                self.k
            )));
        }
        bits.chunks(self.k).map(|c| self.map_bits(c)).collect()
    }

    /// Nearest-point hard decision, returned as label bits.
    pub fn hard_demap(&self, y: Complex64) -> Vec<u8> {
        let gi = self.gray_of_index[self.nearest_level(y.re)];
        let gq = self.gray_of_index[self.nearest_level(y.im)];
        let v = (gi << (self.k / 2)) | gq;
        self.label_bits(v)
    }

    fn nearest_level(&self, u: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &a) in self.levels.iter().enumerate() {
            let d = (u - a) * (u - a);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Exact L-values from the sufficient statistics, one per bit, clipped
    /// to [-L_MAX, L_MAX]. Log-sum-exp is stabilized by subtracting the
    /// per-set maximum exponent.
    pub fn llr_from_stats(&self, s: &SufficientStats) -> Vec<f64> {
        let k2 = self.k / 2;
        let mut out = vec![0.0; self.k];
        self.axis_llr_exact(s.y_r, s.g, &mut out[..k2]);
        self.axis_llr_exact(s.y_i, s.g, &mut out[k2..]);
        out
    }

    /// Exact L-values of a received symbol. Identical to computing the
    /// sufficient statistics first, by construction.
    pub fn llr_exact(&self, y: Complex64, h: Complex64, sigma2: f64) -> Result<Vec<f64>> {
        let s = sufficient_stats(y, h, sigma2)?;
        Ok(self.llr_from_stats(&s))
    }

    /// Max-log L-values from the sufficient statistics.
    pub fn llr_maxlog_from_stats(&self, s: &SufficientStats) -> Vec<f64> {
        let k2 = self.k / 2;
        let mut out = vec![0.0; self.k];
        self.axis_llr_maxlog(s.y_r, s.g, &mut out[..k2]);
        self.axis_llr_maxlog(s.y_i, s.g, &mut out[k2..]);
        out
    }

    /// Max-log approximation of [`Constellation::llr_exact`]: each
    /// log-sum-exp replaced by its largest term.
    pub fn llr_maxlog(&self, y: Complex64, h: Complex64, sigma2: f64) -> Result<Vec<f64>> {
        let s = sufficient_stats(y, h, sigma2)?;
        Ok(self.llr_maxlog_from_stats(&s))
    }

    /// Writes the k/2 exact per-axis L-values for equalized coordinate `u`.
    fn axis_llr_exact(&self, u: f64, g: f64, out: &mut [f64]) {
        let d: Vec<f64> = self.levels.iter().map(|&a| -g * (u - a) * (u - a)).collect();
        for (j, lj) in out.iter_mut().enumerate() {
            let ones = &self.bit_is_one[j];
            let mut m0 = f64::NEG_INFINITY;
            let mut m1 = f64::NEG_INFINITY;
            for i in 0..self.side {
                if ones[i] {
                    m1 = m1.max(d[i]);
                } else {
                    m0 = m0.max(d[i]);
                }
            }
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for i in 0..self.side {
                if ones[i] {
                    s1 += (d[i] - m1).exp();
                } else {
                    s0 += (d[i] - m0).exp();
                }
            }
            *lj = ((m1 + s1.ln()) - (m0 + s0.ln())).clamp(-L_MAX, L_MAX);
        }
    }

    fn axis_llr_maxlog(&self, u: f64, g: f64, out: &mut [f64]) {
        for (j, lj) in out.iter_mut().enumerate() {
            let ones = &self.bit_is_one[j];
            let mut m0 = f64::NEG_INFINITY;
            let mut m1 = f64::NEG_INFINITY;
            for (i, &a) in self.levels.iter().enumerate() {
                let d = -g * (u - a) * (u - a);
                if ones[i] {
                    m1 = m1.max(d);
                } else {
                    m0 = m0.max(d);
                }
            }
            *lj = (m1 - m0).clamp(-L_MAX, L_MAX);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_energy_all_orders() {
        for k in [2, 4, 6, 8, 10, 12] {
            let c = Constellation::new(k).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.size() as f64;
            assert!(close(e, 1.0, 1e-12), "K={k}: mean energy {e}");
        }
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(Constellation::new(3).is_err());
        assert!(Constellation::new(0).is_err());
        assert!(Constellation::new(14).is_err());
    }

    #[test]
    fn qpsk_points() {
        let c = Constellation::new(2).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        for p in c.points() {
            assert!(close(p.re.abs(), s, 1e-15) && close(p.im.abs(), s, 1e-15));
        }
        // 4 distinct points
        for i in 0..4 {
            for j in 0..i {
                assert!((c.points()[i] - c.points()[j]).norm() > 0.1);
            }
        }
    }

    /// Any two points adjacent along one axis differ in exactly one label bit.
    #[test]
    fn gray_adjacency() {
        for k in [2, 4, 6, 8] {
            let c = Constellation::new(k).unwrap();
            let m = c.size();
            let mut by_pos: Vec<(usize, usize, usize)> = (0..m)
                .map(|v| {
                    let p = c.points()[v];
                    let i = c.levels.iter().position(|&a| close(a, p.re, 1e-12)).unwrap();
                    let q = c.levels.iter().position(|&a| close(a, p.im, 1e-12)).unwrap();
                    (i, q, v)
                })
                .collect();
            by_pos.sort();
            for a in 0..m {
                for b in 0..m {
                    let (ia, qa, va) = by_pos[a];
                    let (ib, qb, vb) = by_pos[b];
                    let adjacent = (ia == ib && qa.abs_diff(qb) == 1)
                        || (qa == qb && ia.abs_diff(ib) == 1);
                    if adjacent {
                        assert_eq!((va ^ vb).count_ones(), 1, "K={k} labels {va:#x} {vb:#x}");
                    }
                }
            }
        }
    }

    #[test]
    fn label_bijection_and_roundtrip() {
        for k in [2, 4, 6, 8] {
            let c = Constellation::new(k).unwrap();
            for v in 0..c.size() {
                let bits = c.label_bits(v);
                let p = c.map_bits(&bits).unwrap();
                assert_eq!(p, c.points()[v]);
                // noiseless nearest-point demap recovers the label
                assert_eq!(c.hard_demap(p), bits, "K={k} label {v}");
            }
            // distinct points
            for i in 0..c.size() {
                for j in 0..i {
                    assert!((c.points()[i] - c.points()[j]).norm_sqr() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn map_bits_rejects_wrong_length() {
        let c = Constellation::new(4).unwrap();
        assert!(c.map_bits(&[0, 1, 0]).is_err());
        assert!(c.map_all(&[0, 1, 0, 1, 1]).is_err());
    }

    #[test]
    fn qpsk_zero_symbol_gives_zero_llrs() {
        let c = Constellation::new(2).unwrap();
        let l = c
            .llr_exact(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 1.0)
            .unwrap();
        assert!(l.iter().all(|&x| close(x, 0.0, 1e-14)), "{l:?}");
        let ml = c
            .llr_maxlog(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 1.0)
            .unwrap();
        assert!(ml.iter().all(|&x| close(x, 0.0, 1e-14)));
    }

    /// 4-QAM closed form: L1 = 2 sqrt(2) G y_r, L2 = 2 sqrt(2) G y_i.
    #[test]
    fn qpsk_closed_form() {
        let c = Constellation::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let y = Complex64::new(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            let h = Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
            if h.norm_sqr() < 1e-3 {
                continue;
            }
            let sigma2 = 0.05 + rng.gen::<f64>() * 2.0;
            let s = sufficient_stats(y, h, sigma2).unwrap();
            let expect = |u: f64| (2.0 * 2.0f64.sqrt() * s.g * u).clamp(-L_MAX, L_MAX);
            let l = c.llr_exact(y, h, sigma2).unwrap();
            assert!(close(l[0], expect(s.y_r), 1e-10), "{} vs {}", l[0], expect(s.y_r));
            assert!(close(l[1], expect(s.y_i), 1e-10));
        }
    }

    /// Brute-force L-value: direct summation over all M points without
    /// stabilization, at moderate G.
    fn naive_llr(c: &Constellation, s: &SufficientStats) -> Vec<f64> {
        let k = c.bits_per_symbol();
        let y = Complex64::new(s.y_r, s.y_i);
        (0..k)
            .map(|bit| {
                let mut num = 0.0;
                let mut den = 0.0;
                for v in 0..c.size() {
                    let d = (y - c.points()[v]).norm_sqr();
                    let e = (-s.g * d).exp();
                    if (v >> (k - 1 - bit)) & 1 == 1 {
                        num += e;
                    } else {
                        den += e;
                    }
                }
                (num.ln() - den.ln()).clamp(-L_MAX, L_MAX)
            })
            .collect()
    }

    #[test]
    fn exact_llr_matches_naive_oracle_256qam() {
        let c = Constellation::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            // sample G in a range the unstabilized oracle can survive
            let g = 0.1 + rng.gen::<f64>() * 40.0;
            let v = rng.gen_range(0..c.size());
            let x = c.points()[v];
            let spread = (2.0 * g).sqrt().recip();
            let s = SufficientStats {
                g,
                y_r: x.re + spread * (rng.gen::<f64>() * 6.0 - 3.0),
                y_i: x.im + spread * (rng.gen::<f64>() * 6.0 - 3.0),
            };
            let fast = c.llr_from_stats(&s);
            let slow = naive_llr(&c, &s);
            for (a, b) in fast.iter().zip(&slow) {
                let tol = 1e-9 * b.abs().max(1.0);
                assert!((a - b).abs() <= tol, "{a} vs {b}");
            }
        }
    }

    /// llr_exact(y, h, s2) must equal llr_from_stats(sufficient_stats(...))
    /// bit for bit, and be invariant under joint phase rotation.
    #[test]
    fn stats_identity_and_phase_invariance() {
        let c = Constellation::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let y = Complex64::new(rng.gen::<f64>() * 3.0 - 1.5, rng.gen::<f64>() * 3.0 - 1.5);
            let h = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            if h.norm_sqr() < 1e-3 {
                continue;
            }
            let sigma2 = 0.02 + rng.gen::<f64>();
            let a = c.llr_exact(y, h, sigma2).unwrap();
            let b = c.llr_from_stats(&sufficient_stats(y, h, sigma2).unwrap());
            assert_eq!(a, b);

            let phi = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
            let rot = c.llr_exact(y * phi, h * phi, sigma2).unwrap();
            for (x, y) in a.iter().zip(&rot) {
                assert!(close(*x, *y, 1e-9 * x.abs().max(1.0)), "{x} vs {y}");
            }

            // equalization identity: llr(y, h, s2) == llr(y/h, 1, s2/|h|^2)
            let eq = c
                .llr_exact(y / h, Complex64::new(1.0, 0.0), sigma2 / h.norm_sqr())
                .unwrap();
            for (x, y) in a.iter().zip(&eq) {
                assert!(close(*x, *y, 1e-9 * x.abs().max(1.0)));
            }
        }
    }

    /// Swapping (y_r, y_i) exchanges the L-values of the two label halves.
    #[test]
    fn axis_swap_symmetry() {
        let c = Constellation::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let s = SufficientStats {
                g: 0.1 + rng.gen::<f64>() * 30.0,
                y_r: rng.gen::<f64>() * 3.0 - 1.5,
                y_i: rng.gen::<f64>() * 3.0 - 1.5,
            };
            let swapped = SufficientStats {
                g: s.g,
                y_r: s.y_i,
                y_i: s.y_r,
            };
            let a = c.llr_from_stats(&s);
            let b = c.llr_from_stats(&swapped);
            let k2 = c.bits_per_symbol() / 2;
            for j in 0..k2 {
                assert_eq!(a[j], b[j + k2]);
                assert_eq!(a[j + k2], b[j]);
            }
        }
    }

    #[test]
    fn maxlog_approaches_exact_at_high_gain() {
        let c = Constellation::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..500 {
            let g = 100.0 + rng.gen::<f64>() * 1000.0;
            let s = SufficientStats {
                g,
                y_r: rng.gen::<f64>() * 2.4 - 1.2,
                y_i: rng.gen::<f64>() * 2.4 - 1.2,
            };
            let ex = c.llr_from_stats(&s);
            let ml = c.llr_maxlog_from_stats(&s);
            for (a, b) in ex.iter().zip(&ml) {
                assert!((a - b).abs() < 1e-3, "exact {a} maxlog {b} at G={g}");
            }
        }
    }

    /// On-point reception at high gain: positive L-value exactly for the
    /// transmitted 1 bits.
    #[test]
    fn sign_convention_on_constellation_points() {
        let c = Constellation::new(4).unwrap();
        for v in 0..c.size() {
            let x = c.points()[v];
            let s = SufficientStats {
                g: 50.0,
                y_r: x.re,
                y_i: x.im,
            };
            let bits = c.label_bits(v);
            for (k, (&l, lm)) in c
                .llr_from_stats(&s)
                .iter()
                .zip(c.llr_maxlog_from_stats(&s))
                .enumerate()
            {
                let want_positive = bits[k] == 1;
                assert_eq!(l > 0.0, want_positive, "label {v} bit {k}: L={l}");
                assert_eq!(lm > 0.0, want_positive);
            }
        }
    }

    #[test]
    fn llr_guards() {
        let c = Constellation::new(2).unwrap();
        let y = Complex64::new(0.3, -0.2);
        assert!(c.llr_exact(y, Complex64::new(0.0, 0.0), 1.0).is_err());
        assert!(c.llr_exact(y, Complex64::new(1.0, 0.0), 0.0).is_err());
        assert!(c.llr_exact(y, Complex64::new(1.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn soft_bit_round_trip() {
        assert_eq!(soft_bit(0.0), 0.0);
        assert!(close(soft_bit(2.0), 1.0f64.tanh(), 1e-15));
        // the largest magnitude the clamped inverse can report
        let bound = ((1.0 + SOFT_BIT_CLAMP) / (1.0 - SOFT_BIT_CLAMP)).ln();
        for l in [-40.0, -7.5, -1.0, -1e-6, 0.0, 0.3, 2.0, 12.0, 40.0] {
            let s = soft_bit(l);
            assert!(s.abs() <= SOFT_BIT_CLAMP);
            let back = llr_of_soft_bit(s);
            // saturation limits the recoverable magnitude
            let expect = l.clamp(-bound, bound);
            assert!(close(back, expect, 1e-9), "L={l} back={back} expect={expect}");
        }
        // extremes stay finite
        assert!(llr_of_soft_bit(1.0).is_finite());
        assert!(llr_of_soft_bit(-1.0).is_finite());
    }

    #[test]
    fn soft_bit_vectors_monotone() {
        // stay below the clamp region so monotonicity is strict
        let ls: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5).collect();
        let ss = to_soft_bits(&ls);
        for w in ss.windows(2) {
            assert!(w[1] > w[0]);
        }
        let back = from_soft_bits(&ss);
        for (l, b) in ls.iter().zip(&back) {
            // representing L as tanh(L/2) loses roughly exp(|L|) * ulp
            let tol = 1e-9 + l.abs().exp() * 4e-16;
            assert!(close(*l, *b, tol), "L={l} back={b}");
        }
    }
}
