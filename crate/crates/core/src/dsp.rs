//! Small numerical building blocks shared across modules.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Full linear convolution of `a` and `b` (length `a.len() + b.len() - 1`).
///
/// Short kernels are convolved directly; long ones through an FFT.
pub fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![ZERO; n];
        for (i, &x) in a.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (j, &h) in b.iter().enumerate() {
                out[i + j] += x * h;
            }
        }
        return out;
    }
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = a.to_vec();
    fa.resize(size, ZERO);
    let mut fb = b.to_vec();
    fb.resize(size, ZERO);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(n);
    fa.iter_mut().for_each(|x| *x *= scale);
    fa
}

/// Zero-delay filtering: convolve with an odd-length FIR whose center tap is
/// time zero, returning a sequence aligned with (and as long as) the input.
pub fn filter_centered(x: &[C64], taps: &[C64]) -> Vec<C64> {
    debug_assert!(taps.len() % 2 == 1);
    let center = taps.len() / 2;
    let full = convolve(x, taps);
    full[center..center + x.len()].to_vec()
}

/// Numerically stable `ln(sum(exp(v)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db10(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl Pchip {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Option<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut slope = vec![0.0; n];
        if n == 2 {
            slope[0] = delta[0];
            slope[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slope[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Some(Pchip { x, y, slope })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().expect("non-empty"))
    }

    /// Evaluate inside the domain; `None` outside.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return None;
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k => (k - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(
            h00 * self.y[i]
                + h10 * h * self.slope[i]
                + h01 * self.y[i + 1]
                + h11 * h * self.slope[i + 1],
        )
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)` over every point evaluated, endpoints included.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut best = (lo, f(lo));
    let fb = f(hi);
    if fb > best.1 {
        best = (hi, fb);
    }
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Vertex of the parabola through three equally or unequally spaced points.
/// Returns `None` when the points are collinear or the parabola opens upward.
pub fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a >= 0.0 || !a.is_finite() {
        return None;
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    let yv = y[0] + (xv - x[0]) * (d1 + a * (xv - x[1]));
    Some((xv, yv))
}
