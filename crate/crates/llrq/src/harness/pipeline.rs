//! Shared transmit-side plumbing for dataset generation and evaluation:
//! build the configured code and channel, push one codeword through them.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{transmit, ChannelMode, EtuProfile};
use crate::coding::{interleave, LdpcCode, PolarCode};
use crate::error::{Error, Result};
use crate::modem::Constellation;

use super::config::{ChannelKind, CodeKind, Config};

/// The channel code selected by a config.
pub(crate) enum CodeInstance {
    Ldpc(LdpcCode),
    Polar(PolarCode),
}

impl CodeInstance {
    pub fn build(cfg: &Config) -> Result<Self> {
        match cfg.code {
            CodeKind::Ldpc => Ok(CodeInstance::Ldpc(LdpcCode::ieee80211n_648_324())),
            CodeKind::Polar => Ok(CodeInstance::Polar(PolarCode::construct(
                cfg.polar_n,
                cfg.polar_k,
                cfg.polar_design_snr_db,
            )?)),
        }
    }

    pub fn message_len(&self) -> usize {
        match self {
            CodeInstance::Ldpc(c) => c.message_len(),
            CodeInstance::Polar(c) => c.message_len(),
        }
    }

    pub fn codeword_len(&self) -> usize {
        match self {
            CodeInstance::Ldpc(c) => c.codeword_len(),
            CodeInstance::Polar(c) => c.codeword_len(),
        }
    }

    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        match self {
            CodeInstance::Ldpc(c) => c.encode(msg),
            CodeInstance::Polar(c) => c.encode(msg),
        }
    }

    /// Decodes coded-order L-values back to message bits.
    pub fn decode(&self, llr: &[f64], cfg: &Config) -> Result<Vec<u8>> {
        match self {
            CodeInstance::Ldpc(c) => {
                let (hard, _) = c.decode_bp(llr, cfg.bp_max_iter)?;
                Ok(hard[..c.message_len()].to_vec())
            }
            CodeInstance::Polar(c) => c.decode_list(llr, cfg.polar_list_size),
        }
    }
}

pub(crate) fn channel_mode(cfg: &Config) -> ChannelMode {
    match cfg.channel {
        ChannelKind::Flat => ChannelMode::Flat,
        ChannelKind::Etu => ChannelMode::Etu(EtuProfile::lte_default()),
    }
}

/// Draws a random message of the code's message length.
pub(crate) fn random_message(code: &CodeInstance, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..code.message_len()).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Sends one codeword through the configured channel. Returns the coded
/// bits in transmitted (interleaved) order together with the exact
/// demapper L-values in the same order, one per coded bit.
pub(crate) fn transmit_codeword(
    cw: &[u8],
    cfg: &Config,
    constellation: &Constellation,
    mode: &ChannelMode,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<u8>, Vec<f64>)> {
    let mapped = if mode.is_etu() {
        interleave(cw, cfg.interleaver_seed)
    } else {
        cw.to_vec()
    };
    if mapped.len() % cfg.constellation_bits != 0 {
        return Err(Error::invalid_argument(format!(
            "codeword length {} is not a whole number of {}-bit symbols",
            mapped.len(),
            cfg.constellation_bits
        )));
    }
    let uses = transmit(&mapped, constellation, mode, snr_db, rng)?;
    let mut llrs = Vec::with_capacity(mapped.len());
    for u in &uses {
        llrs.extend(constellation.llr_exact(u.y, u.h, u.sigma2)?);
    }
    Ok((mapped, llrs))
}
