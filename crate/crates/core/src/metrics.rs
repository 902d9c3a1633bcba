//! SINR and rate evaluation: user/eavesdropper SINRs, per-user and sum
//! secrecy rates, and the sensing-echo SINR.
//!
//! Rates are computed from the deterministic SINR formulas; no symbol-level
//! noise is ever sampled. The `[.]+` clipping of the secrecy rate applies
//! here (evaluation and reporting) but not inside the optimization
//! surrogates.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::SlotChannel;
use crate::scenario::ScenarioConfig;

/// Per-slot transmit beamformers for each user plus the jamming stream, and
/// the unit-norm receive filter.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// `user_beams[n][k]` is `f_k` at slot `n`.
    pub user_beams: Vec<Vec<DVector<Complex64>>>,
    /// `jam_beams[n]` is the jamming beam at slot `n`.
    pub jam_beams: Vec<DVector<Complex64>>,
    /// `rx_filters[n]` is the receive filter `w` at slot `n`, unit norm.
    pub rx_filters: Vec<DVector<Complex64>>,
}

impl BeamformerSet {
    /// Total transmit power at a slot.
    pub fn slot_power(&self, slot: usize) -> f64 {
        self.user_beams[slot].iter().map(|f| f.norm_squared()).sum::<f64>()
            + self.jam_beams[slot].norm_squared()
    }

    pub fn slot_count(&self) -> usize {
        self.jam_beams.len()
    }
}

fn gain_sq(h: &DVector<Complex64>, f: &DVector<Complex64>) -> f64 {
    h.dotc(f).norm_sqr()
}

/// Downlink SINR of user `k` at one slot.
pub fn user_sinr(k: usize, ch: &SlotChannel, beams: &BeamformerSet, slot: usize, cfg: &ScenarioConfig) -> f64 {
    let h = ch.user_channel(k);
    let desired = gain_sq(&h, &beams.user_beams[slot][k]);
    let mut interference = cfg.noise_power;
    for (i, f) in beams.user_beams[slot].iter().enumerate() {
        if i != k {
            interference += gain_sq(&h, f);
        }
    }
    interference += gain_sq(&h, &beams.jam_beams[slot]);
    desired / interference
}

/// SINR of the eavesdropper when decoding user `k`'s stream at one slot.
pub fn eve_sinr(k: usize, ch: &SlotChannel, beams: &BeamformerSet, slot: usize, cfg: &ScenarioConfig) -> f64 {
    let h = ch.eve_channel();
    let desired = gain_sq(&h, &beams.user_beams[slot][k]);
    let mut interference = cfg.noise_power;
    for (i, f) in beams.user_beams[slot].iter().enumerate() {
        if i != k {
            interference += gain_sq(&h, f);
        }
    }
    interference += gain_sq(&h, &beams.jam_beams[slot]);
    desired / interference
}

/// Clipped secrecy rate of user `k` at one slot, bits/s/Hz.
pub fn secrecy_rate(k: usize, ch: &SlotChannel, beams: &BeamformerSet, slot: usize, cfg: &ScenarioConfig) -> f64 {
    let user = (1.0 + user_sinr(k, ch, beams, slot, cfg)).log2();
    let eve = (1.0 + eve_sinr(k, ch, beams, slot, cfg)).log2();
    (user - eve).max(0.0)
}

/// Sum of clipped secrecy rates over all users and slots.
pub fn sum_secrecy_rate(
    channels: &crate::channel::ChannelState,
    beams: &BeamformerSet,
    cfg: &ScenarioConfig,
) -> f64 {
    channels
        .slots
        .iter()
        .enumerate()
        .map(|(n, ch)| {
            (0..cfg.user_count()).map(|k| secrecy_rate(k, ch, beams, n, cfg)).sum::<f64>()
        })
        .sum()
}

/// Sensing-echo SINR at one slot for receive filter `w = beams.rx_filters[slot]`.
pub fn sensing_sinr(ch: &SlotChannel, beams: &BeamformerSet, slot: usize, cfg: &ScenarioConfig) -> f64 {
    let w = &beams.rx_filters[slot];
    // a = zeta * (chi_E^H w) chi_E, so a^H f = zeta * (w^H chi_E)(chi_E^H f)
    let w_chi = w.dotc(&ch.eve_dir);
    let mut numerator = 0.0;
    let mut denominator = cfg.noise_power;
    let si_w: DVector<Complex64> = ch.si.adjoint() * w;
    let mut acc = |f: &DVector<Complex64>| {
        let a_f = ch.sensing_gain * w_chi * ch.eve_dir.dotc(f);
        numerator += a_f.norm_sqr();
        denominator += si_w.dotc(f).norm_sqr();
    };
    for f in &beams.user_beams[slot] {
        acc(f);
    }
    acc(&beams.jam_beams[slot]);
    numerator / denominator
}
