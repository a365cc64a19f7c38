//! Beacon tone synthesis and short-time Fourier analysis.

use std::f64::consts::PI;

use leonav_core::noise;
use leonav_core::spectral::{SpectralError, Spectrogram};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BeaconError {
    #[error("tone reaches {f_max:.1} Hz, beyond the {nyquist:.1} Hz Nyquist limit")]
    Nyquist { f_max: f64, nyquist: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("{samples} samples are fewer than one {nfft}-point window")]
    TooShort { samples: usize, nfft: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// STFT layout: Hann window of `nfft` points, `overlap` fraction shared by
/// consecutive windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StftParams {
    pub nfft: usize,
    pub overlap: f64,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams { nfft: 1024, overlap: 0.5 }
    }
}

impl StftParams {
    pub fn hop(&self) -> usize {
        ((self.nfft as f64) * (1.0 - self.overlap)).round().max(1.0) as usize
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect()
}

/// Unit-amplitude complex chirp `exp(j 2π (f_D0 t + α t²/2))` plus circular
/// white Gaussian noise of variance `10^(-snr_db/10)`. `snr_db = +∞` gives a
/// clean tone.
pub fn tone_samples(
    alpha: f64,
    f_d0: f64,
    duration: f64,
    sample_rate: f64,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<Complex<f64>>, BeaconError> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(BeaconError::InvalidParameter("duration and sample rate must be positive"));
    }
    if snr_db.is_nan() {
        return Err(BeaconError::InvalidParameter("snr is NaN"));
    }
    let nyquist = sample_rate / 2.0;
    let f_max = f_d0.abs().max((f_d0 + alpha * duration).abs());
    if f_max >= nyquist {
        return Err(BeaconError::Nyquist { f_max, nyquist });
    }
    let n = (duration * sample_rate).round() as usize;
    let sigma = if snr_db.is_infinite() && snr_db > 0.0 { 0.0 } else { (10f64.powf(-snr_db / 10.0) / 2.0).sqrt() };
    let mut rng = noise::rng_for(seed, &[0x4245_4143]);
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            let phase = 2.0 * PI * (f_d0 * t + 0.5 * alpha * t * t);
            let mut z = Complex::from_polar(1.0, phase);
            if sigma > 0.0 {
                z += Complex::new(sigma * noise::standard_normal(&mut rng), sigma * noise::standard_normal(&mut rng));
            }
            z
        })
        .collect())
}

/// Power per slice, frequency bins and slice times.
pub type StftPower = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Raw STFT power `|X_k|²` per slice (frequency ascending, zero at the
/// centre) and the slice centre times.
pub fn stft_power(samples: &[Complex<f64>], sample_rate: f64, params: &StftParams) -> Result<StftPower, BeaconError> {
    let nfft = params.nfft;
    if nfft < 4 || !(0.0..1.0).contains(&params.overlap) {
        return Err(BeaconError::InvalidParameter("nfft must be >= 4 and overlap in [0, 1)"));
    }
    if samples.len() < nfft {
        return Err(BeaconError::TooShort { samples: samples.len(), nfft });
    }
    let hop = params.hop();
    let window = hann(nfft);
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let slices = (samples.len() - nfft) / hop + 1;
    let mut power = Vec::with_capacity(slices * nfft);
    let mut t_axis = Vec::with_capacity(slices);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for s in 0..slices {
        let start = s * hop;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = samples[start + k] * window[k];
        }
        fft.process(&mut buf);
        // shift so that bin 0 is -fs/2
        power.extend((0..nfft).map(|k| buf[(k + nfft / 2) % nfft].norm_sqr()));
        t_axis.push((start as f64 + nfft as f64 / 2.0) / sample_rate);
    }
    let f_axis = (0..nfft).map(|k| (k as f64 - (nfft / 2) as f64) * sample_rate / nfft as f64).collect();
    Ok((t_axis, f_axis, power))
}

/// Spectrogram in dB of a sample stream.
pub fn spectrogram(samples: &[Complex<f64>], sample_rate: f64, params: &StftParams) -> Result<Spectrogram, BeaconError> {
    let (t_axis, f_axis, power) = stft_power(samples, sample_rate, params)?;
    let db = power.iter().map(|p| 10.0 * (p + 1e-30).log10()).collect();
    Ok(Spectrogram::new(t_axis, f_axis, db)?)
}

/// Spectrogram of a synthetic beacon (default STFT layout).
pub fn synthesize_beacon(
    alpha: f64,
    f_d0: f64,
    duration: f64,
    sample_rate: f64,
    snr_db: f64,
    seed: u64,
) -> Result<Spectrogram, BeaconError> {
    let samples = tone_samples(alpha, f_d0, duration, sample_rate, snr_db, seed)?;
    spectrogram(&samples, sample_rate, &StftParams::default())
}
