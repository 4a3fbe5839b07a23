//! Deterministic all-pole speech-like synthesis with known resonances.
//!
//! White noise from a seeded ChaCha generator drives a cascade of two-pole
//! resonators. The resonator settings are the ground truth that formant
//! analysis is checked against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Pcm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub frequency: f64,
    pub bandwidth: f64,
}

impl Resonance {
    pub fn new(frequency: f64, bandwidth: f64) -> Self {
        Self {
            frequency,
            bandwidth,
        }
    }

    /// Pole radius and angle at `sample_rate`.
    pub fn pole(&self, sample_rate: f64) -> (f64, f64) {
        let radius = (-std::f64::consts::PI * self.bandwidth / sample_rate).exp();
        let angle = 2.0 * std::f64::consts::PI * self.frequency / sample_rate;
        (radius, angle)
    }
}

/// Predictor coefficients `a[1..=2k]` of the cascade, so that
/// `x[n] = Σ a_j x[n-j] + e[n]`.
pub fn predictor_coefficients(resonances: &[Resonance], sample_rate: f64) -> Vec<f64> {
    // Multiply the second-order sections of A(z) = Π (1 - 2r cosθ z^-1 + r² z^-2).
    let mut poly = vec![1.0];
    for res in resonances {
        let (r, theta) = res.pole(sample_rate);
        let section = [1.0, -2.0 * r * theta.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, s) in section.iter().enumerate() {
                next[i + j] += p * s;
            }
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

/// Source signal driving the resonator cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Excitation {
    /// Uniform white noise from the seeded generator.
    Noise,
    /// Unit impulses every `1/f0` seconds, starting at a seeded phase.
    Pulses { f0: f64 },
}

/// Synthesis settings other than the resonances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub seed: u64,
    pub excitation: Excitation,
    /// Source passed through `1 / (1 - tilt z^-1)`. A tilt equal to the
    /// analysis pre-emphasis gives a speech-like falling source spectrum that
    /// pre-emphasis flattens again.
    pub tilt: f64,
}

impl SynthConfig {
    pub fn noise(sample_rate: u32, seed: u64) -> Self {
        Self {
            sample_rate,
            seed,
            excitation: Excitation::Noise,
            tilt: 0.0,
        }
    }

    pub fn with_tilt(self, tilt: f64) -> Self {
        Self { tilt, ..self }
    }

    pub fn with_excitation(self, excitation: Excitation) -> Self {
        Self { excitation, ..self }
    }
}

/// Synthesizes `duration` seconds of white noise through time-varying
/// resonances.
///
/// `resonances_at(t)` gives the resonator settings at time `t`; the number of
/// resonances must not change over time. Output is peak-normalized to 0.9.
pub fn synthesize<F>(duration: f64, sample_rate: u32, seed: u64, resonances_at: F) -> Pcm
where
    F: Fn(f64) -> Vec<Resonance>,
{
    synthesize_with(
        duration,
        &SynthConfig::noise(sample_rate, seed),
        resonances_at,
    )
}

/// Like [`synthesize`] with a noise source tilted by `tilt`.
pub fn synthesize_tilted<F>(
    duration: f64,
    sample_rate: u32,
    seed: u64,
    tilt: f64,
    resonances_at: F,
) -> Pcm
where
    F: Fn(f64) -> Vec<Resonance>,
{
    synthesize_with(
        duration,
        &SynthConfig::noise(sample_rate, seed).with_tilt(tilt),
        resonances_at,
    )
}

pub fn synthesize_with<F>(duration: f64, cfg: &SynthConfig, resonances_at: F) -> Pcm
where
    F: Fn(f64) -> Vec<Resonance>,
{
    let sample_rate = cfg.sample_rate;
    let fs = sample_rate as f64;
    let n = (duration * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut phase: f64 = match cfg.excitation {
        Excitation::Pulses { .. } => rng.gen_range(0.0..1.0),
        Excitation::Noise => 0.0,
    };
    let mut state: Vec<(f64, f64)> = Vec::new();
    let mut source = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let res = resonances_at(i as f64 / fs);
        if state.len() != res.len() {
            state = vec![(0.0, 0.0); res.len()];
        }
        let drive = match cfg.excitation {
            Excitation::Noise => rng.gen_range(-1.0..1.0),
            Excitation::Pulses { f0 } => {
                phase += f0 / fs;
                if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                }
            }
        };
        source = drive + cfg.tilt * source;
        let mut x = source;
        for (section, st) in res.iter().zip(state.iter_mut()) {
            let (r, theta) = section.pole(fs);
            // Unity gain at DC keeps the cascade level stable.
            let gain = 1.0 - 2.0 * r * theta.cos() + r * r;
            let y = gain * x + 2.0 * r * theta.cos() * st.0 - r * r * st.1;
            st.1 = st.0;
            st.0 = y;
            x = y;
        }
        out.push(x);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut out {
            *v *= 0.9 / peak;
        }
    }
    Pcm {
        samples: out,
        sample_rate,
    }
}

/// Stationary synthesis with fixed resonances.
pub fn synthesize_steady(
    resonances: &[Resonance],
    duration: f64,
    sample_rate: u32,
    seed: u64,
) -> Pcm {
    synthesize(duration, sample_rate, seed, |_| resonances.to_vec())
}
