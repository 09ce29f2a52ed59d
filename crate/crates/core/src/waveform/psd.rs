use std::f64::consts::PI;
use std::io::Write;

use rustfft::FftPlanner;

use super::synth::SampleBuffer;
use crate::dsp::{C64, ZERO};
use crate::error::{Error, Result};

/// Two-sided power spectral density, frequencies ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdTable {
    pub frequency_hz: Vec<f64>,
    pub psd: Vec<f64>,
}

impl PsdTable {
    pub fn resolution(&self) -> f64 {
        self.frequency_hz[1] - self.frequency_hz[0]
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution()
    }

    /// Power inside `[lo, hi]`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.frequency_hz
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| (lo..=hi).contains(*f))
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.resolution()
    }

    pub fn value_at(&self, f: f64) -> f64 {
        let i = self
            .frequency_hz
            .partition_point(|&x| x < f)
            .min(self.psd.len() - 1);
        self.psd[i]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frequency_hz", "psd_db"])?;
        for (f, p) in self.frequency_hz.iter().zip(&self.psd) {
            w.write_record([format!("{f:.9e}"), format!("{:.6}", 10.0 * p.max(1e-300).log10())])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Welch periodogram with a Hann window and 50% overlap. Segments are the
/// smallest power of two giving bins no wider than `resolution`; at least ten
/// segments' worth of samples are required.
pub fn compute_psd(buf: &SampleBuffer, resolution: f64) -> Result<PsdTable> {
    if !(resolution > 0.0) {
        return Err(Error::param("resolution", "must be positive"));
    }
    let nseg = ((buf.sample_rate / resolution).ceil() as usize).next_power_of_two().max(16);
    let needed = 10 * nseg;
    if buf.len() < needed {
        return Err(Error::BufferTooShort {
            len: buf.len(),
            needed,
        });
    }
    let window: Vec<f64> = (0..nseg)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / nseg as f64).cos())
        .collect();
    let wpow: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let hop = nseg / 2;
    let mut acc = vec![0.0; nseg];
    let mut count = 0usize;
    let mut seg = vec![ZERO; nseg];
    let mut start = 0;
    while start + nseg <= buf.len() {
        for ((s, &x), &w) in seg.iter_mut().zip(&buf.samples[start..start + nseg]).zip(&window) {
            *s = x * w;
        }
        fft.process(&mut seg);
        for (a, v) in acc.iter_mut().zip(&seg) {
            *a += v.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * buf.sample_rate * wpow);
    let df = buf.sample_rate / nseg as f64;
    let mut frequency_hz = Vec::with_capacity(nseg);
    let mut psd = Vec::with_capacity(nseg);
    for i in 0..nseg {
        let k = (i + nseg / 2) % nseg;
        let f = if k >= nseg / 2 { k as f64 - nseg as f64 } else { k as f64 } * df;
        frequency_hz.push(f + buf.center_offset);
        psd.push(acc[k] * scale);
    }
    Ok(PsdTable { frequency_hz, psd })
}

/// Convenience for tests: a constant-envelope tone at `freq`.
pub fn tone(freq: f64, amplitude: f64, sample_rate: f64, len: usize) -> SampleBuffer {
    let samples = (0..len)
        .map(|m| C64::from_polar(amplitude, 2.0 * PI * freq * m as f64 / sample_rate))
        .collect();
    SampleBuffer {
        samples,
        sample_rate,
        center_offset: 0.0,
        origin: 0,
        samples_per_symbol: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_peaks_at_its_frequency() {
        let fs = 8.0;
        let buf = tone(1.25, 1.0, fs, 1 << 14);
        let t = compute_psd(&buf, 0.01).unwrap();
        let (imax, _) = t
            .psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((t.frequency_hz[imax] - 1.25).abs() <= t.resolution());
        assert!((t.total_power() / buf.mean_power() - 1.0).abs() < 0.01);
    }

    #[test]
    fn too_short_buffer_errors() {
        let buf = tone(0.0, 1.0, 8.0, 100);
        assert!(matches!(compute_psd(&buf, 0.01), Err(Error::BufferTooShort { .. })));
    }

    #[test]
    fn csv_has_expected_header() {
        let buf = tone(0.5, 1.0, 8.0, 4096);
        let t = compute_psd(&buf, 0.1).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("frequency_hz,psd_db\n"));
        assert_eq!(text.lines().count(), t.psd.len() + 1);
    }
}
