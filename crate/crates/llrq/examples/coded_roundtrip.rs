//! Coded round trips: LDPC with belief propagation and polar with list
//! decoding, both fed exact L-values from a fading channel.

use llrq::channel::{transmit, ChannelMode};
use llrq::coding::{LdpcCode, PolarCode};
use llrq::modem::Constellation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn llrs_for(
    cw: &[u8],
    c: &Constellation,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> llrq::Result<Vec<f64>> {
    let uses = transmit(cw, c, &ChannelMode::Flat, snr_db, rng)?;
    let mut llrs = Vec::with_capacity(cw.len());
    for u in &uses {
        llrs.extend(c.llr_exact(u.y, u.h, u.sigma2)?);
    }
    Ok(llrs)
}

fn main() -> llrq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let qam = Constellation::new(4)?;

    let ldpc = LdpcCode::ieee80211n_648_324();
    println!(
        "LDPC ({}, {}), rate {:.2}, 16-QAM, flat Rayleigh",
        ldpc.codeword_len(),
        ldpc.message_len(),
        ldpc.rate()
    );
    let msg: Vec<u8> = (0..ldpc.message_len()).map(|_| rng.gen_range(0..2)).collect();
    let cw = ldpc.encode(&msg)?;
    for snr_db in [12.0, 15.0, 18.0] {
        let llrs = llrs_for(&cw, &qam, snr_db, &mut rng)?;
        let (hard, outcome) = ldpc.decode_bp(&llrs, 50)?;
        let ok = hard[..ldpc.message_len()] == msg[..];
        println!(
            "  {snr_db:>5.1} dB: message {}, checks satisfied after {} iterations: {}",
            if ok { "recovered" } else { "LOST" },
            outcome.iterations,
            outcome.converged
        );
    }

    let polar = PolarCode::construct(256, 128, 3.0)?;
    println!(
        "\npolar ({}, {}), list size 8, 16-QAM, flat Rayleigh",
        polar.codeword_len(),
        polar.message_len()
    );
    let msg: Vec<u8> = (0..polar.message_len()).map(|_| rng.gen_range(0..2)).collect();
    let cw = polar.encode(&msg)?;
    for snr_db in [12.0, 15.0, 18.0] {
        let llrs = llrs_for(&cw, &qam, snr_db, &mut rng)?;
        let decoded = polar.decode_list(&llrs, 8)?;
        println!(
            "  {snr_db:>5.1} dB: message {}",
            if decoded == msg { "recovered" } else { "LOST" }
        );
    }

    // Without noise both chains are exact.
    let llrs = llrs_for(&cw, &qam, f64::INFINITY, &mut rng)?;
    assert_eq!(polar.decode_list(&llrs, 8)?, msg);
    println!("\nnoiseless polar round trip: exact, as it should be");
    Ok(())
}
