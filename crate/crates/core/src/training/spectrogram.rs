use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Grid;

/// STFT frontend settings. The defaults give 257 frequency bins by 300
/// frames for a 3 s clip at 22.05 kHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramParams {
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub frames: usize,
    pub log_offset: f64,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        SpectrogramParams {
            sample_rate: 22_050,
            clip_seconds: 3.0,
            window: 512,
            hop: 220,
            fft_size: 512,
            frames: 300,
            log_offset: 1e-7,
        }
    }
}

impl SpectrogramParams {
    pub fn clip_samples(&self) -> usize {
        (self.sample_rate as f64 * self.clip_seconds).round() as usize
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window > self.fft_size || self.hop == 0 || self.frames == 0 {
            return Err(Error::InvalidHyperparameter(
                "window must fit the FFT; hop and frame count must be nonzero".into(),
            ));
        }
        if !(self.log_offset > 0.0) {
            return Err(Error::InvalidHyperparameter(
                "log offset must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Center crop or zero-pad to exactly `len` samples.
fn fit_length(waveform: &[f64], len: usize) -> Vec<f64> {
    if waveform.len() >= len {
        let start = (waveform.len() - len) / 2;
        waveform[start..start + len].to_vec()
    } else {
        let mut out = vec![0.0; len];
        let start = (len - waveform.len()) / 2;
        out[start..start + waveform.len()].copy_from_slice(waveform);
        out
    }
}

/// `log(|STFT| + eps)` with a periodic Hann window, frames centered on
/// multiples of the hop; output is `bins x frames`.
pub fn log_spectrogram(waveform: &[f64], params: &SpectrogramParams) -> Result<Grid> {
    params.validate()?;
    if waveform.is_empty() {
        return Err(Error::InvalidHyperparameter("empty waveform".into()));
    }
    let clip = fit_length(waveform, params.clip_samples());
    let n = params.fft_size;
    let hann: Vec<f64> = (0..params.window)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / params.window as f64).cos())
        .collect();
    let half = params.window as isize / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let bins = params.bins();
    let mut out = vec![0.0; bins * params.frames];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for t in 0..params.frames {
        let start = (t * params.hop) as isize - half;
        buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for (k, w) in hann.iter().enumerate() {
            let idx = start + k as isize;
            if idx >= 0 && (idx as usize) < clip.len() {
                buf[k].re = clip[idx as usize] * w;
            }
        }
        fft.process(&mut buf);
        for f in 0..bins {
            out[f * params.frames + t] = (buf[f].norm() + params.log_offset).ln();
        }
    }
    Grid::new(vec![bins, params.frames], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_constant_log_offset() {
        let p = SpectrogramParams::default();
        let g = log_spectrogram(&vec![0.0; p.clip_samples()], &p).unwrap();
        assert_eq!(g.shape(), &[257, 300]);
        assert!(g.data().iter().all(|&v| v == p.log_offset.ln()));
    }

    #[test]
    fn shape_is_fixed_for_any_length() {
        let p = SpectrogramParams::default();
        for len in [1, 1000, 66_150, 100_000] {
            let g = log_spectrogram(&vec![0.1; len], &p).unwrap();
            assert_eq!(g.shape(), &[257, 300]);
        }
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        let p = SpectrogramParams::default();
        let bin = 40usize;
        let freq = bin as f64 * p.sample_rate as f64 / p.fft_size as f64;
        let wave: Vec<f64> = (0..p.clip_samples())
            .map(|k| (2.0 * PI * freq * k as f64 / p.sample_rate as f64).sin())
            .collect();
        let g = log_spectrogram(&wave, &p).unwrap();
        for t in 0..p.frames {
            let column: Vec<f64> = (0..p.bins()).map(|f| g.get(&[f, t])).collect();
            assert_eq!(
                Grid::new(vec![p.bins()], column).unwrap().argmax(),
                bin,
                "frame {t}"
            );
        }
    }

    #[test]
    fn empty_waveform_is_rejected() {
        assert!(log_spectrogram(&[], &SpectrogramParams::default()).is_err());
    }
}
