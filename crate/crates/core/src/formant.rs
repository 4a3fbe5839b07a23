//! LPC analysis and third-formant (F3) tracking.
//!
//! Front end: pre-emphasis `y[n] = x[n] - α·x[n-1]`, Hamming-windowed frames,
//! biased autocorrelation, Levinson-Durbin. Formants are the resonances of
//! the prediction polynomial `A(z) = 1 - Σ a_k z^-k`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Pcm;
use crate::dd::Dd;
use crate::roots::{find_roots, RootError};

#[derive(Debug, Error, PartialEq)]
pub enum FormantError {
    #[error("frame is all zeros")]
    DegenerateInput,
    #[error("autocorrelation is not positive definite (order {order})")]
    NumericalInstability { order: usize },
    #[error("LPC order {order} needs a frame longer than the order, got {len} samples")]
    FrameTooShort { order: usize, len: usize },
    #[error("LPC order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("invalid analysis parameter: {0}")]
    BadParameter(String),
    #[error("span {start}..{end}s lies outside the audio (duration {duration}s)")]
    SpanOutsideAudio { start: f64, end: f64, duration: f64 },
    #[error("need at least 2 frames with F3, found {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Roots(#[from] RootError),
}

/// Analysis parameters for formant tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub preemphasis: f64,
    /// LPC order; `None` means `2 + fs/1000`.
    pub order: Option<usize>,
    pub max_bandwidth: f64,
    pub min_freq: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            preemphasis: 0.97,
            order: None,
            max_bandwidth: 400.0,
            min_freq: 90.0,
        }
    }
}

impl AnalysisConfig {
    pub fn order_for(&self, sample_rate: u32) -> usize {
        self.order
            .unwrap_or(2 + (sample_rate as f64 / 1000.0).round() as usize)
    }

    pub fn validate(&self) -> Result<(), FormantError> {
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return Err(FormantError::BadParameter(format!(
                "frame_ms = {}",
                self.frame_ms
            )));
        }
        if !(self.hop_ms > 0.0 && self.hop_ms.is_finite()) {
            return Err(FormantError::BadParameter(format!(
                "hop_ms = {}",
                self.hop_ms
            )));
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(FormantError::BadParameter(format!(
                "preemphasis = {} (must be in [0, 1))",
                self.preemphasis
            )));
        }
        if let Some(order) = self.order {
            if order < 2 {
                return Err(FormantError::OrderTooSmall(order));
            }
        }
        if self.max_bandwidth.is_nan() || self.max_bandwidth <= 0.0 {
            return Err(FormantError::BadParameter(format!(
                "max_bandwidth = {}",
                self.max_bandwidth
            )));
        }
        if self.min_freq.is_nan() || self.min_freq < 0.0 {
            return Err(FormantError::BadParameter(format!(
                "min_freq = {}",
                self.min_freq
            )));
        }
        Ok(())
    }
}

fn samples_for(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

pub fn preemphasize(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut prev = 0.0;
    samples
        .iter()
        .map(|&x| {
            let y = x - alpha * prev;
            prev = x;
            y
        })
        .collect()
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Pre-emphasized, Hamming-windowed analysis frames.
///
/// Returns an empty list when the signal is shorter than one frame.
pub fn preprocess(
    pcm: &Pcm,
    frame_ms: f64,
    hop_ms: f64,
    preemphasis: f64,
) -> Result<Vec<Vec<f64>>, FormantError> {
    let cfg = AnalysisConfig {
        frame_ms,
        hop_ms,
        preemphasis,
        ..AnalysisConfig::default()
    };
    cfg.validate()?;
    let frame_len = samples_for(frame_ms, pcm.sample_rate);
    let hop = samples_for(hop_ms, pcm.sample_rate).max(1);
    if frame_len == 0 || pcm.samples.len() < frame_len {
        return Ok(Vec::new());
    }
    let emphasized = preemphasize(&pcm.samples, preemphasis);
    let window = hamming(frame_len);
    let count = 1 + (emphasized.len() - frame_len) / hop;
    Ok((0..count)
        .map(|i| windowed(&emphasized[i * hop..i * hop + frame_len], &window))
        .collect())
}

fn windowed(frame: &[f64], window: &[f64]) -> Vec<f64> {
    frame.iter().zip(window).map(|(x, w)| x * w).collect()
}

/// Biased autocorrelation `r[0..=order]`.
pub fn autocorrelation(frame: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| {
            if lag >= frame.len() {
                return 0.0;
            }
            frame[lag..].iter().zip(frame).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// All-pole model of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpcModel {
    pub order: usize,
    /// Predictor coefficients `a[1..=order]`.
    pub coefficients: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Square root of the final prediction error energy.
    pub gain: f64,
    /// Prediction error energy after each order, `e[0] = r[0]`.
    pub error_energy: Vec<f64>,
}

impl LpcModel {
    /// `z^p·A(z)` in descending powers: `[1, -a1, ..., -ap]`.
    pub fn polynomial(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.coefficients.iter().map(|a| -a))
            .collect()
    }
}

/// Levinson-Durbin recursion on an autocorrelation sequence.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcModel, FormantError> {
    if order < 2 {
        return Err(FormantError::OrderTooSmall(order));
    }
    if r.len() <= order {
        return Err(FormantError::BadParameter(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if r[0] == 0.0 {
        return Err(FormantError::DegenerateInput);
    }
    if r[0] <= 0.0 || r.iter().any(|v| !v.is_finite()) {
        return Err(FormantError::NumericalInstability { order: 0 });
    }

    // Frames with narrow resonances give Toeplitz systems with condition
    // numbers near 1e12, so the recursion runs in double-double arithmetic.
    let rr: Vec<Dd> = r.iter().map(|&v| Dd::from(v)).collect();
    let mut a = vec![Dd::ZERO; order];
    let mut prev = vec![Dd::ZERO; order];
    let mut k = Vec::with_capacity(order);
    let mut energy = Vec::with_capacity(order + 1);
    let mut e = rr[0];
    energy.push(r[0]);

    for i in 1..=order {
        let mut acc = rr[i];
        for j in 1..i {
            acc = acc - a[j - 1] * rr[i - j];
        }
        let ki = acc / e;
        let ki_f = ki.to_f64();
        if !ki_f.is_finite() || ki_f.abs() >= 1.0 {
            return Err(FormantError::NumericalInstability { order: i });
        }
        prev[..i - 1].copy_from_slice(&a[..i - 1]);
        a[i - 1] = ki;
        for j in 1..i {
            a[j - 1] = prev[j - 1] - ki * prev[i - j - 1];
        }
        e = e * (Dd::ONE - ki * ki);
        let e_f = e.to_f64();
        if e_f.is_nan() || e_f <= 0.0 {
            return Err(FormantError::NumericalInstability { order: i });
        }
        k.push(ki_f);
        energy.push(e_f);
    }
    let e = e.to_f64();
    let a: Vec<f64> = a.into_iter().map(Dd::to_f64).collect();

    Ok(LpcModel {
        order,
        coefficients: a,
        reflection: k,
        gain: e.sqrt(),
        error_energy: energy,
    })
}

/// Autocorrelation LPC of a (windowed) frame.
pub fn lpc_fit(frame: &[f64], order: usize) -> Result<LpcModel, FormantError> {
    if order < 2 {
        return Err(FormantError::OrderTooSmall(order));
    }
    if frame.len() <= order {
        return Err(FormantError::FrameTooShort {
            order,
            len: frame.len(),
        });
    }
    if frame.iter().all(|&x| x == 0.0) {
        return Err(FormantError::DegenerateInput);
    }
    levinson_durbin(&autocorrelation(frame, order), order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub frequency: f64,
    pub bandwidth: f64,
}

/// Frequency and bandwidth of the resonance at `root`.
pub fn resonance_of_root(root: Complex64, sample_rate: f64) -> Formant {
    Formant {
        frequency: sample_rate * root.arg() / (2.0 * std::f64::consts::PI),
        bandwidth: -sample_rate * root.norm().ln() / std::f64::consts::PI,
    }
}

/// Formant candidates from the model's complex roots, ascending in frequency.
///
/// Keeps roots with positive imaginary part, `min_freq < f < fs/2 - 50` and
/// `0 < bandwidth < max_bandwidth`.
pub fn formants_from_lpc(
    model: &LpcModel,
    sample_rate: f64,
    max_bandwidth: f64,
    min_freq: f64,
) -> Result<Vec<Formant>, FormantError> {
    let roots = find_roots(&model.polynomial())?;
    Ok(select_formants(
        &roots,
        sample_rate,
        max_bandwidth,
        min_freq,
    ))
}

pub fn select_formants(
    roots: &[Complex64],
    sample_rate: f64,
    max_bandwidth: f64,
    min_freq: f64,
) -> Vec<Formant> {
    let ceiling = sample_rate / 2.0 - 50.0;
    let mut out: Vec<Formant> = roots
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|&z| resonance_of_root(z, sample_rate))
        .filter(|f| {
            f.frequency > min_freq
                && f.frequency < ceiling
                && f.bandwidth > 0.0
                && f.bandwidth < max_bandwidth
        })
        .collect();
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    /// Frame center, seconds from the start of the audio.
    pub time: f64,
    pub f1: Option<Formant>,
    pub f2: Option<Formant>,
    pub f3: Option<Formant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantTrack {
    pub utterance: String,
    pub span: (f64, f64),
    pub frames: Vec<TrackFrame>,
}

impl FormantTrack {
    pub fn f3_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frames
            .iter()
            .filter_map(|fr| fr.f3.map(|f| (fr.time, f.frequency)))
    }
}

/// Formants of one analysis frame; frames the model cannot describe (silence,
/// unstable fits, root-finder failure) yield an empty list.
fn frame_formants(
    frame: &[f64],
    order: usize,
    sample_rate: f64,
    cfg: &AnalysisConfig,
) -> Vec<Formant> {
    let model = match lpc_fit(frame, order) {
        Ok(m) => m,
        Err(e) => {
            log::debug!("frame skipped: {e}");
            return Vec::new();
        }
    };
    match formants_from_lpc(&model, sample_rate, cfg.max_bandwidth, cfg.min_freq) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("frame skipped: {e}");
            Vec::new()
        }
    }
}

/// Tracks F1-F3 over every frame whose center lies inside `span` (seconds).
pub fn track_f3(
    pcm: &Pcm,
    span: (f64, f64),
    cfg: &AnalysisConfig,
    utterance: &str,
) -> Result<FormantTrack, FormantError> {
    cfg.validate()?;
    let (start, end) = span;
    let duration = pcm.duration();
    if !(start >= 0.0 && start <= end && end <= duration + 1e-9) {
        return Err(FormantError::SpanOutsideAudio {
            start,
            end,
            duration,
        });
    }
    let fs = pcm.sample_rate as f64;
    let order = cfg.order_for(pcm.sample_rate);
    let frame_len = samples_for(cfg.frame_ms, pcm.sample_rate);
    let hop = samples_for(cfg.hop_ms, pcm.sample_rate).max(1);
    if frame_len <= order {
        return Err(FormantError::FrameTooShort {
            order,
            len: frame_len,
        });
    }
    let mut frames = Vec::new();
    if pcm.samples.len() >= frame_len {
        let count = 1 + (pcm.samples.len() - frame_len) / hop;
        let half = frame_len as f64 / 2.0;
        let window = hamming(frame_len);
        // First frame whose center can reach the span.
        let first = ((start * fs - half) / hop as f64).floor().max(0.0) as usize;
        for i in first..count {
            let time = (i * hop) as f64 / fs + half / fs;
            if time > end {
                break;
            }
            if time < start {
                continue;
            }
            let lo = i * hop;
            let raw = &pcm.samples[lo..lo + frame_len];
            let before = if lo > 0 { pcm.samples[lo - 1] } else { 0.0 };
            let mut emphasized = Vec::with_capacity(frame_len);
            let mut prev = before;
            for &x in raw {
                emphasized.push(x - cfg.preemphasis * prev);
                prev = x;
            }
            let formants = frame_formants(&windowed(&emphasized, &window), order, fs, cfg);
            frames.push(TrackFrame {
                time,
                f1: formants.first().copied(),
                f2: formants.get(1).copied(),
                f3: formants.get(2).copied(),
            });
        }
    }
    Ok(FormantTrack {
        utterance: utterance.to_string(),
        span,
        frames,
    })
}

/// One tracking job for [`track_many`].
#[derive(Debug, Clone)]
pub struct TrackRequest<'a> {
    pub pcm: &'a Pcm,
    pub span: (f64, f64),
    pub utterance: String,
}

/// Tracks many spans in parallel; results keep the request order.
pub fn track_many(
    requests: &[TrackRequest<'_>],
    cfg: &AnalysisConfig,
) -> Vec<Result<FormantTrack, FormantError>> {
    requests
        .par_iter()
        .map(|r| track_f3(r.pcm, r.span, cfg, &r.utterance))
        .collect()
}

/// F3 slope metrics over the frames where F3 was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeStat {
    /// Least-squares slope of F3 against time, Hz/s.
    pub ols_slope: f64,
    /// Sum of frame-to-frame F3 differences between adjacent present frames, Hz.
    pub net_change: f64,
    pub n_frames: usize,
}

pub fn f3_slope(track: &FormantTrack) -> Result<SlopeStat, FormantError> {
    let points: Vec<(f64, f64)> = track.f3_points().collect();
    let n = points.len();
    if n < 2 {
        return Err(FormantError::InsufficientData(n));
    }
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mean_f = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, f)| {
        let dt = t - mean_t;
        (sxy + dt * (f - mean_f), sxx + dt * dt)
    });
    let ols_slope = sxy / sxx;

    let net_change = track
        .frames
        .windows(2)
        .filter_map(|w| match (w[0].f3, w[1].f3) {
            (Some(a), Some(b)) => Some(b.frequency - a.frequency),
            _ => None,
        })
        .sum();

    Ok(SlopeStat {
        ols_slope,
        net_change,
        n_frames: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm(samples: Vec<f64>) -> Pcm {
        Pcm {
            samples,
            sample_rate: 16_000,
        }
    }

    #[test]
    fn constant_signal_single_frame() {
        let frames = preprocess(&pcm(vec![0.5; 400]), 25.0, 10.0, 0.97).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 400);
        let w = hamming(400);
        assert!((frames[0][0] - 0.5 * w[0]).abs() < 1e-15);
        for n in 1..400 {
            let expected = 0.5 * (1.0 - 0.97) * w[n];
            assert!((frames[0][n] - expected).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn zero_preemphasis_is_windowing_only() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin()).collect();
        let frames = preprocess(&pcm(x.clone()), 25.0, 10.0, 0.0).unwrap();
        assert_eq!(frames.len(), 1 + (1000 - 400) / 160);
        let w = hamming(400);
        for (k, frame) in frames.iter().enumerate() {
            for n in 0..400 {
                assert_eq!(frame[n], x[k * 160 + n] * w[n]);
            }
        }
    }

    #[test]
    fn empty_or_short_signal_has_no_frames() {
        assert!(preprocess(&pcm(vec![]), 25.0, 10.0, 0.97)
            .unwrap()
            .is_empty());
        assert!(preprocess(&pcm(vec![0.1; 399]), 25.0, 10.0, 0.97)
            .unwrap()
            .is_empty());
        assert!(preprocess(&pcm(vec![0.1; 500]), 25.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn all_zero_frame_is_degenerate() {
        assert_eq!(lpc_fit(&[0.0; 64], 10), Err(FormantError::DegenerateInput));
        assert!(matches!(
            lpc_fit(&[1.0; 8], 10),
            Err(FormantError::FrameTooShort { .. })
        ));
    }

    #[test]
    fn error_energy_non_increasing() {
        let x: Vec<f64> = (0..400)
            .map(|i| {
                (i as f64 * 0.3).sin()
                    + 0.5 * (i as f64 * 1.1).cos()
                    + 0.01 * ((i * 7919) % 13) as f64
            })
            .collect();
        let m = lpc_fit(&x, 12).unwrap();
        assert!(m.error_energy.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.reflection.iter().all(|k| k.abs() < 1.0));
    }

    #[test]
    fn real_roots_give_no_formants() {
        let roots = [Complex64::new(0.5, 0.0), Complex64::new(-0.3, 0.0)];
        assert!(select_formants(&roots, 16_000.0, 400.0, 90.0).is_empty());
        // A(z) = (1 - 0.5 z^-1)(1 + 0.3 z^-1) = 1 - 0.2 z^-1 - 0.15 z^-2
        let model = LpcModel {
            order: 2,
            coefficients: vec![0.2, 0.15],
            reflection: vec![],
            gain: 1.0,
            error_energy: vec![],
        };
        assert!(formants_from_lpc(&model, 16_000.0, 400.0, 90.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn near_unit_root_bandwidth() {
        let fs = 16_000.0;
        let theta = 2.0 * std::f64::consts::PI * 1000.0 / fs;
        let root = Complex64::from_polar(1.0 - 1e-9, theta);
        let f = resonance_of_root(root, fs);
        let expected = fs * 1e-9 / std::f64::consts::PI;
        assert!((f.bandwidth - expected).abs() < 1e-12 * fs);
        assert!(f.bandwidth > 0.0);
        let kept = select_formants(&[root, root.conj()], fs, 400.0, 90.0);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].frequency - 1000.0).abs() < 1e-6);
    }

    fn linear_track(values: &[Option<f64>], dt: f64) -> FormantTrack {
        FormantTrack {
            utterance: "u".into(),
            span: (0.0, dt * values.len() as f64),
            frames: values
                .iter()
                .enumerate()
                .map(|(i, v)| TrackFrame {
                    time: i as f64 * dt,
                    f1: None,
                    f2: None,
                    f3: v.map(|frequency| Formant {
                        frequency,
                        bandwidth: 100.0,
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn linear_f3_slope() {
        // 11 frames, 2500 -> 1800 Hz over 0.1 s
        let values: Vec<_> = (0..=10).map(|i| Some(2500.0 - 70.0 * i as f64)).collect();
        let s = f3_slope(&linear_track(&values, 0.01)).unwrap();
        assert!((s.ols_slope + 7000.0).abs() < 7000.0 * 1e-6);
        assert!((s.net_change + 700.0).abs() < 1e-9);
        assert_eq!(s.n_frames, 11);
    }

    #[test]
    fn constant_track_slope_zero() {
        let s = f3_slope(&linear_track(&[Some(2400.0); 6], 0.01)).unwrap();
        assert_eq!(s.ols_slope, 0.0);
        assert_eq!(s.net_change, 0.0);
    }

    #[test]
    fn gaps_split_net_change() {
        let s = f3_slope(&linear_track(
            &[Some(2500.0), Some(2400.0), None, Some(2000.0), Some(1950.0)],
            0.01,
        ))
        .unwrap();
        assert!((s.net_change + 150.0).abs() < 1e-9);
        assert_eq!(s.n_frames, 4);
    }

    #[test]
    fn single_frame_is_insufficient() {
        assert_eq!(
            f3_slope(&linear_track(&[Some(2500.0), None], 0.01)),
            Err(FormantError::InsufficientData(1))
        );
    }

    #[test]
    fn silence_has_no_f3() {
        let p = pcm(vec![0.0; 8000]);
        let track = track_f3(&p, (0.1, 0.4), &AnalysisConfig::default(), "sil").unwrap();
        assert!(!track.frames.is_empty());
        assert!(track.frames.iter().all(|f| f.f3.is_none()));
        assert!(track.frames.iter().all(|f| f.time >= 0.1 && f.time <= 0.4));
    }

    #[test]
    fn span_outside_audio() {
        let p = pcm(vec![0.0; 1600]);
        assert!(matches!(
            track_f3(&p, (0.05, 0.2), &AnalysisConfig::default(), "u"),
            Err(FormantError::SpanOutsideAudio { .. })
        ));
    }

    #[test]
    fn default_order_at_16k() {
        assert_eq!(AnalysisConfig::default().order_for(16_000), 18);
    }
}
