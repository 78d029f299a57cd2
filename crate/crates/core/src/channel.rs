//! Wireless-layer math: Rayleigh power gains, Shannon rate, transmission latency.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Fading and noise parameters shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Per-component standard deviation of the complex Gaussian channel.
    rayleigh_sigma: f64,
    /// Noise power spectral density N0, W/Hz.
    noise_power: f64,
}

impl ChannelParams {
    pub fn new(rayleigh_sigma: f64, noise_power: f64) -> Result<Self> {
        if !(rayleigh_sigma.is_finite() && rayleigh_sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rayleigh_sigma must be > 0 (got {rayleigh_sigma})"
            )));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_power must be > 0 (got {noise_power})"
            )));
        }
        Ok(Self {
            rayleigh_sigma,
            noise_power,
        })
    }

    pub fn rayleigh_sigma(&self) -> f64 {
        self.rayleigh_sigma
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// E|h|^2 for the configured fading.
    pub fn mean_gain(&self) -> f64 {
        2.0 * self.rayleigh_sigma * self.rayleigh_sigma
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            rayleigh_sigma: 0.2,
            noise_power: 1e-8,
        }
    }
}

/// One user's transmit power, channel gain and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAllocation {
    /// Transmit power, W.
    pub tx_power: f64,
    pub channel_gain: f64,
    /// Allocated bandwidth, Hz.
    pub bandwidth: f64,
}

/// Draws `num_users` power gains `g = |h|^2` with `h` complex Gaussian.
pub fn sample_channel_gains<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ChannelParams,
    num_users: usize,
) -> Vec<f64> {
    let sigma = params.rayleigh_sigma;
    (0..num_users)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let g = sigma * sigma * (re * re + im * im);
            // Both components exactly zero has probability zero; keep the
            // strict positivity invariant regardless.
            if g > 0.0 {
                g
            } else {
                f64::MIN_POSITIVE
            }
        })
        .collect()
}

/// Shannon rate `B * log2(1 + p g / (B N0))` in bits per second.
pub fn transmission_rate(link: &LinkAllocation, params: &ChannelParams) -> Result<f64> {
    if !(link.bandwidth > 0.0 && link.bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be > 0 to compute a rate (got {})",
            link.bandwidth
        )));
    }
    if link.tx_power < 0.0 || link.channel_gain < 0.0 {
        return Err(Error::InvalidArgument(
            "tx_power and channel_gain must be >= 0".into(),
        ));
    }
    let snr = link.tx_power * link.channel_gain / (link.bandwidth * params.noise_power);
    Ok(link.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Time to push `payload_bits` through a link of `rate` bits/s.
///
/// A zero rate yields `f64::INFINITY`.
pub fn transmission_latency(payload_bits: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        payload_bits / rate
    } else {
        f64::INFINITY
    }
}
