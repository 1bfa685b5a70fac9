//! Fading channel simulation: flat Rayleigh and ETU-profile OFDM.
//!
//! SNR is defined against unit average symbol energy and unit average
//! channel power, so the noise variance is sigma^2 = 10^(-snr_db/10) for
//! both modes. Passing `f64::INFINITY` as the SNR disables noise for
//! sanity checks (the stored variance is floored at a tiny positive value
//! so that L-value computations stay well defined).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modem::Constellation;

/// Floor for the noise variance so that a noiseless run still yields a
/// valid gain-to-noise ratio (the resulting L-values simply clip).
pub const SIGMA2_FLOOR: f64 = 1e-30;

/// One received symbol: coefficient, observation and the noise variance
/// they were generated with.
#[derive(Debug, Clone, Copy)]
pub struct ChannelUse {
    pub h: Complex64,
    pub y: Complex64,
    pub sigma2: f64,
}

/// Noise variance for a requested SNR in dB (unit signal power).
pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0).max(SIGMA2_FLOOR)
}

/// One flat Rayleigh coefficient, CN(0, 1): independent real and
/// imaginary parts with variance 1/2 each.
pub fn rayleigh_flat<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let scale = 0.5f64.sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Multipath power-delay profile rendered in the frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EtuProfile {
    /// Tap delays in nanoseconds.
    pub tap_delays_ns: Vec<f64>,
    /// Relative tap powers in dB; normalized internally so the
    /// per-subcarrier average power is exactly one.
    pub tap_powers_db: Vec<f64>,
    pub fft_size: usize,
    pub used_subcarriers: usize,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing_hz: f64,
}

impl EtuProfile {
    /// The LTE Extended Typical Urban profile: nine taps spanning
    /// 0..5000 ns, 15 kHz spacing, FFT size 1024.
    pub fn lte_default() -> Self {
        EtuProfile {
            tap_delays_ns: vec![0.0, 50.0, 120.0, 200.0, 230.0, 500.0, 1600.0, 2300.0, 5000.0],
            tap_powers_db: vec![-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0],
            fft_size: 1024,
            used_subcarriers: 600,
            subcarrier_spacing_hz: 15_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_delays_ns.is_empty() || self.tap_delays_ns.len() != self.tap_powers_db.len() {
            return Err(Error::invalid_argument(
                "profile needs equal, nonzero numbers of tap delays and powers",
            ));
        }
        if self.fft_size == 0 || self.used_subcarriers == 0 || self.used_subcarriers > self.fft_size
        {
            return Err(Error::invalid_argument(format!(
                "need 0 < used subcarriers ({}) <= fft size ({})",
                self.used_subcarriers, self.fft_size
            )));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::invalid_argument("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    /// Linear tap powers normalized to sum to one.
    fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.tap_powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }

    /// Draws one channel realization: independent CN(0, p_l) tap gains,
    /// evaluated as a frequency response on each used subcarrier. The
    /// normalized tap powers make E[|h|^2] = 1 per subcarrier.
    pub fn frequency_response<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Complex64>> {
        self.validate()?;
        let powers = self.normalized_powers();
        let gains: Vec<Complex64> = powers.iter().map(|&p| complex_gaussian(rng, p)).collect();
        let mut h = Vec::with_capacity(self.used_subcarriers);
        for sc in 0..self.used_subcarriers {
            let f = sc as f64 * self.subcarrier_spacing_hz;
            let mut acc = Complex64::new(0.0, 0.0);
            for (g, &tau_ns) in gains.iter().zip(&self.tap_delays_ns) {
                let phase = -std::f64::consts::TAU * f * tau_ns * 1e-9;
                acc += g * Complex64::from_polar(1.0, phase);
            }
            h.push(acc);
        }
        Ok(h)
    }
}

/// How symbols of one codeword see the channel.
#[derive(Debug, Clone)]
pub enum ChannelMode {
    /// Independent CN(0,1) coefficient per symbol (fast flat fading).
    Flat,
    /// One multipath realization per codeword; symbol i sits on
    /// subcarrier i of the frequency response.
    Etu(EtuProfile),
}

impl ChannelMode {
    pub fn is_etu(&self) -> bool {
        matches!(self, ChannelMode::Etu(_))
    }
}

/// Maps a codeword onto symbols and runs them through the channel at the
/// requested SNR. Flat mode draws a fresh coefficient per symbol; ETU mode
/// draws one frequency response per call and places symbols on consecutive
/// subcarriers.
pub fn transmit<R: Rng + ?Sized>(
    bits: &[u8],
    c: &Constellation,
    mode: &ChannelMode,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<ChannelUse>> {
    let symbols = c.map_all(bits)?;
    let sigma2 = noise_var_from_snr_db(snr_db);
    let coeffs: Vec<Complex64> = match mode {
        ChannelMode::Flat => (0..symbols.len()).map(|_| rayleigh_flat(rng)).collect(),
        ChannelMode::Etu(profile) => {
            let h = profile.frequency_response(rng)?;
            if symbols.len() > h.len() {
                return Err(Error::invalid_argument(format!(
                    "codeword needs {} subcarriers but the profile only uses {}",
                    symbols.len(),
                    h.len()
                )));
            }
            h[..symbols.len()].to_vec()
        }
    };
    Ok(symbols
        .iter()
        .zip(coeffs)
        .map(|(&x, h)| {
            let n = complex_gaussian(rng, sigma2);
            ChannelUse {
                h,
                y: h * x + n,
                sigma2,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{soft_bit, sufficient_stats};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rayleigh_mean_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| rayleigh_flat(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((0.995..=1.005).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn rayleigh_phase_uniform_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 100_000;
        let mut phases: Vec<f64> = (0..n).map(|_| rayleigh_flat(&mut rng).arg()).collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Kolmogorov-Smirnov statistic against Uniform(-pi, pi)
        let mut d: f64 = 0.0;
        for (i, &p) in phases.iter().enumerate() {
            let cdf = (p + std::f64::consts::PI) / std::f64::consts::TAU;
            d = d.max((cdf - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - cdf).abs());
        }
        let critical = 1.628 / (n as f64).sqrt(); // 1% level, large-sample
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn rayleigh_deterministic() {
        let a: Vec<Complex64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..64).map(|_| rayleigh_flat(&mut rng)).collect()
        };
        let b: Vec<Complex64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..64).map(|_| rayleigh_flat(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn single_tap_profile_is_flat() {
        let profile = EtuProfile {
            tap_delays_ns: vec![0.0],
            tap_powers_db: vec![0.0],
            fft_size: 64,
            used_subcarriers: 32,
            subcarrier_spacing_hz: 15_000.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = profile.frequency_response(&mut rng).unwrap();
        for w in h.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn etu_profile_normalized() {
        let profile = EtuProfile::lte_default();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let reals = 10_000;
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..reals {
            let h = profile.frequency_response(&mut rng).unwrap();
            acc += h.iter().map(|x| x.norm_sqr()).sum::<f64>();
            count += h.len();
        }
        let mean = acc / count as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn etu_adjacent_subcarriers_coherent() {
        let profile = EtuProfile::lte_default();
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut cross = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for _ in 0..1000 {
            let h = profile.frequency_response(&mut rng).unwrap();
            for w in h.windows(2) {
                cross += w[0] * w[1].conj();
                power += 0.5 * (w[0].norm_sqr() + w[1].norm_sqr());
            }
        }
        let rho = cross.norm() / power;
        assert!(rho > 0.9, "adjacent-subcarrier correlation {rho}");
    }

    #[test]
    fn etu_rejects_bad_profiles() {
        let mut p = EtuProfile::lte_default();
        p.tap_delays_ns.clear();
        p.tap_powers_db.clear();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(p.frequency_response(&mut rng).is_err());

        let mut p = EtuProfile::lte_default();
        p.used_subcarriers = p.fft_size + 1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn transmit_snr_calibrated() {
        let c = Constellation::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let snr_db = 10.0;
        let uses_per_cw = 25_000;
        let mut sig = 0.0;
        let mut noise = 0.0;
        for _ in 0..4 {
            let bits: Vec<u8> = (0..uses_per_cw * 4).map(|_| rng.gen_range(0..2u8)).collect();
            let symbols = c.map_all(&bits).unwrap();
            let uses = transmit(&bits, &c, &ChannelMode::Flat, snr_db, &mut rng).unwrap();
            for (x, u) in symbols.iter().zip(&uses) {
                sig += (u.h * x).norm_sqr();
                noise += (u.y - u.h * x).norm_sqr();
            }
        }
        let measured_db = 10.0 * (sig / noise).log10();
        assert!(
            (measured_db - snr_db).abs() < 0.1,
            "measured {measured_db} dB, requested {snr_db} dB"
        );
    }

    #[test]
    fn transmit_deterministic_and_length_checked() {
        let c = Constellation::new(4).unwrap();
        let bits: Vec<u8> = (0..64).map(|i| ((i * 7) % 3 & 1) as u8).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            transmit(&bits, &c, &ChannelMode::Flat, 12.0, &mut rng).unwrap()
        };
        let a = run(3);
        let b = run(3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.y, y.y);
            assert_eq!(x.h, y.h);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(transmit(&bits[..63], &c, &ChannelMode::Flat, 12.0, &mut rng).is_err());
    }

    #[test]
    fn noiseless_transmit_recovers_bits() {
        let c = Constellation::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let bits: Vec<u8> = (0..800).map(|_| rng.gen_range(0..2u8)).collect();
        for mode in [ChannelMode::Flat, ChannelMode::Etu(EtuProfile::lte_default())] {
            let uses = transmit(&bits, &c, &mode, f64::INFINITY, &mut rng).unwrap();
            for (i, u) in uses.iter().enumerate() {
                let l = c.llr_exact(u.y, u.h, u.sigma2).unwrap();
                for (k, &lk) in l.iter().enumerate() {
                    let bit = bits[i * 8 + k];
                    assert_eq!(lk > 0.0, bit == 1, "symbol {i} bit {k}");
                }
            }
        }
    }

    #[test]
    fn etu_codeword_longer_than_grid_rejected() {
        let c = Constellation::new(2).unwrap();
        let mut p = EtuProfile::lte_default();
        p.used_subcarriers = 4;
        let bits = vec![0u8; 2 * 5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(transmit(&bits, &c, &ChannelMode::Etu(p), 10.0, &mut rng).is_err());
    }

    /// Average soft-bit magnitudes fall off within each label half
    /// (256-QAM, flat Rayleigh, 18 dB). Light version of the acceptance
    /// check: 20k symbols, two standard errors.
    #[test]
    fn soft_bit_magnitude_ordering() {
        let c = Constellation::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let n = 20_000;
        let bits: Vec<u8> = (0..n * 8).map(|_| rng.gen_range(0..2u8)).collect();
        let uses = transmit(&bits, &c, &ChannelMode::Flat, 18.0, &mut rng).unwrap();
        let mags: Vec<Vec<f64>> = uses
            .iter()
            .map(|u| {
                let s = sufficient_stats(u.y, u.h, u.sigma2).unwrap();
                c.llr_from_stats(&s).iter().map(|&l| soft_bit(l).abs()).collect()
            })
            .collect();
        for half in [0usize, 4] {
            for j in half..half + 3 {
                let diffs: Vec<f64> = mags.iter().map(|m| m[j] - m[j + 1]).collect();
                let mean = diffs.iter().sum::<f64>() / n as f64;
                let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                    / (n as f64 - 1.0);
                let se = (var / n as f64).sqrt();
                assert!(mean > 2.0 * se, "gap {j}->{} = {mean}, se {se}", j + 1);
            }
        }
    }
}
