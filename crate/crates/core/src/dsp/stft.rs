use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrequencyGrid, SAMPLE_RATE};

/// Multichannel real signal; all channels share one length.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Input("waveform without channels".into()));
        }
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(Error::Input("channels differ in length".into()));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            channels: vec![samples],
            sample_rate,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            fft_len: 512,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frames that fit entirely inside `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            1 + (len - self.window_len) / self.hop
        }
    }

    pub fn grid(&self, sample_rate: u32) -> FrequencyGrid {
        FrequencyGrid {
            sample_rate,
            fft_len: self.fft_len,
        }
    }

    pub fn frames_per_second(&self) -> f64 {
        SAMPLE_RATE as f64 / self.hop as f64
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Complex STFT cube, laid out `[frame][bin][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<Complex64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub n_channels: usize,
    pub config: StftConfig,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn zeros(n_frames: usize, n_channels: usize, config: StftConfig, sample_rate: u32) -> Self {
        let n_bins = config.n_bins();
        Self {
            values: vec![Complex64::new(0.0, 0.0); n_frames * n_bins * n_channels],
            n_frames,
            n_bins,
            n_channels,
            config,
            sample_rate,
        }
    }

    #[inline]
    pub fn index(&self, frame: usize, bin: usize, channel: usize) -> usize {
        (frame * self.n_bins + bin) * self.n_channels + channel
    }

    #[inline]
    pub fn get(&self, frame: usize, bin: usize, channel: usize) -> Complex64 {
        self.values[self.index(frame, bin, channel)]
    }

    pub fn set(&mut self, frame: usize, bin: usize, channel: usize, v: Complex64) {
        let i = self.index(frame, bin, channel);
        self.values[i] = v;
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= alpha);
        s
    }
}

/// Reusable forward/inverse FFT plans for one configuration.
pub struct StftEngine {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub fn new(config: StftConfig) -> Result<Self> {
        if config.window_len == 0 || config.hop == 0 || config.fft_len < config.window_len {
            return Err(Error::Config(format!("invalid STFT configuration {config:?}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: hann(config.window_len),
            forward: planner.plan_fft_forward(config.fft_len),
            inverse: planner.plan_fft_inverse(config.fft_len),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// One-sided spectrum of every full frame of every channel.
    pub fn stft(&self, w: &Waveform) -> Result<Spectrogram> {
        let cfg = self.config;
        if w.len() < cfg.window_len {
            return Err(Error::Input(format!(
                "signal of {} samples is shorter than one {}-sample window",
                w.len(),
                cfg.window_len
            )));
        }
        let n_frames = cfg.n_frames(w.len());
        let mut spec = Spectrogram::zeros(n_frames, w.n_channels(), cfg, w.sample_rate);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        for (ch, samples) in w.channels.iter().enumerate() {
            for n in 0..n_frames {
                let start = n * cfg.hop;
                buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                for (i, (&s, &win)) in samples[start..start + cfg.window_len]
                    .iter()
                    .zip(&self.window)
                    .enumerate()
                {
                    buf[i] = Complex64::new(s * win, 0.0);
                }
                self.forward.process(&mut buf);
                for k in 0..spec.n_bins {
                    spec.set(n, k, ch, buf[k]);
                }
            }
        }
        Ok(spec)
    }

    /// Least-squares overlap-add inverse with the Hann synthesis window.
    /// Output length is `(N - 1) * hop + window_len`.
    pub fn istft(&self, s: &Spectrogram) -> Result<Waveform> {
        let cfg = self.config;
        if s.config != cfg {
            return Err(Error::Config("spectrogram built with another STFT configuration".into()));
        }
        let len = if s.n_frames == 0 {
            0
        } else {
            (s.n_frames - 1) * cfg.hop + cfg.window_len
        };
        let mut norm = vec![0.0; len];
        for n in 0..s.n_frames {
            for (i, &w) in self.window.iter().enumerate() {
                norm[n * cfg.hop + i] += w * w;
            }
        }
        let mut channels = Vec::with_capacity(s.n_channels);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        for ch in 0..s.n_channels {
            let mut out = vec![0.0; len];
            for n in 0..s.n_frames {
                for k in 0..s.n_bins {
                    buf[k] = s.get(n, k, ch);
                }
                for k in s.n_bins..cfg.fft_len {
                    buf[k] = buf[cfg.fft_len - k].conj();
                }
                self.inverse.process(&mut buf);
                let scale = 1.0 / cfg.fft_len as f64;
                for (i, &w) in self.window.iter().enumerate() {
                    out[n * cfg.hop + i] += buf[i].re * scale * w;
                }
            }
            for (o, &d) in out.iter_mut().zip(&norm) {
                *o = if d > 1e-10 { *o / d } else { 0.0 };
            }
            channels.push(out);
        }
        Ok(Waveform {
            channels,
            sample_rate: s.sample_rate,
        })
    }
}

pub fn stft(w: &Waveform, config: StftConfig) -> Result<Spectrogram> {
    StftEngine::new(config)?.stft(w)
}

pub fn istft(s: &Spectrogram) -> Result<Waveform> {
    StftEngine::new(s.config)?.istft(s)
}

/// Per-bin weights turning a one-sided spectrum into full-spectrum energy:
/// 1 for DC and Nyquist, 2 elsewhere.
pub fn one_sided_weights(fft_len: usize) -> Vec<f64> {
    let bins = fft_len / 2 + 1;
    (0..bins)
        .map(|k| if k == 0 || (fft_len % 2 == 0 && k == bins - 1) { 1.0 } else { 2.0 })
        .collect()
}
