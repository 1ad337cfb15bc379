//! OFDM subchannel capacity and deterministic log-distance path gain for
//! every directed vehicle pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("vehicles {0} and {1} occupy the same position")]
    CoincidentPositions(usize, usize),
}

/// Thermal noise floor at -174 dBm/Hz, in W/Hz.
pub const NOISE_PSD_W_PER_HZ: f64 = 3.981_071_705_534_969e-21;

/// Radio parameters shared by every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Total bandwidth W in Hz, split into `num_subchannels` slices.
    pub total_bandwidth_hz: f64,
    /// Number of orthogonal subchannels K.
    pub num_subchannels: usize,
    /// Transmit power P_t in watts.
    pub tx_power_w: f64,
    /// Noise power spectral density N0 in W/Hz before any offset.
    pub noise_psd_w_per_hz: f64,
    /// Interference margin in dB added on top of the noise floor.
    pub noise_offset_db: f64,
    /// Log-distance path loss exponent (>= 2).
    pub pathloss_exponent: f64,
    /// Power gain at 1 m reference distance.
    pub reference_gain: f64,
    /// Communication range in meters; pairs beyond it get zero capacity.
    pub comm_range_m: f64,
    /// Log-normal shadowing standard deviation in dB; 0 disables shadowing.
    pub shadowing_sigma_db: f64,
    /// Seed for the shadowing draw (unused when sigma is 0).
    pub shadowing_seed: u64,
}

impl ChannelParams {
    /// Bandwidth of one subchannel, W/K.
    pub fn subchannel_bandwidth_hz(&self) -> f64 {
        self.total_bandwidth_hz / self.num_subchannels as f64
    }

    /// Noise PSD with the dB offset applied.
    pub fn effective_noise_psd(&self) -> f64 {
        self.noise_psd_w_per_hz * 10f64.powf(self.noise_offset_db / 10.0)
    }
}

/// Deterministic log-distance path gain `g0 * d^(-alpha)`.
pub fn path_gain(distance_m: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    if distance_m <= 0.0 || distance_m.is_nan() {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    Ok(params.reference_gain * distance_m.powf(-params.pathloss_exponent))
}

/// Shannon capacity of one subchannel in bits/second:
/// `(W/K) * log2(1 + P_t * h / (N0_eff * W/K))`.
pub fn subchannel_capacity(gain: f64, params: &ChannelParams) -> f64 {
    debug_assert!(gain >= 0.0);
    if gain <= 0.0 {
        return 0.0;
    }
    let b = params.subchannel_bandwidth_hz();
    let snr = params.tx_power_w * gain / (params.effective_noise_psd() * b);
    b * (1.0 + snr).log2()
}

/// Full N x N matrix of subchannel capacities `C_ij`.
///
/// The diagonal is zero, as are pairs farther apart than the communication
/// range; matrix shape is stable regardless of connectivity.
pub fn capacity_matrix(
    positions: &[(f64, f64)],
    params: &ChannelParams,
) -> Result<Vec<Vec<f64>>, ChannelError> {
    let n = positions.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist == 0.0 {
                return Err(ChannelError::CoincidentPositions(i.min(j), i.max(j)));
            }
            if dist > params.comm_range_m {
                continue;
            }
            let mut h = path_gain(dist, params)?;
            if params.shadowing_sigma_db > 0.0 {
                h *= shadowing_factor(i, j, params);
            }
            out[i][j] = subchannel_capacity(h, params);
        }
    }
    Ok(out)
}

/// Seeded log-normal shadowing multiplier for the ordered pair (i, j).
///
/// Drawn from its own deterministic stream so the value depends only on
/// (seed, i, j) and not on evaluation order.
fn shadowing_factor(i: usize, j: usize, params: &ChannelParams) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(params.shadowing_seed);
    rng.set_stream(((i as u64) << 32) | j as u64);
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    10f64.powf(params.shadowing_sigma_db * z / 10.0)
}
