//! Second-order low-pass sections.

use std::f64::consts::PI;

/// Direct-form II transposed biquad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl Biquad {
    /// Butterworth low-pass (Q = 1/√2) at `cutoff` Hz for sample rate `fs`,
    /// by bilinear transform prewarped at the cutoff.
    pub fn butterworth_lowpass(cutoff: f64, fs: f64) -> Self {
        assert!(cutoff > 0.0 && cutoff < fs / 2.0, "cutoff must lie below Nyquist");
        let k = (PI * cutoff / fs).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            s1: 0.0,
            s2: 0.0,
        }
    }

    /// Sets the internal state to the steady response to a constant input `x`.
    pub fn settle(&mut self, x: f64) {
        // with y = x at DC: s2 = b2 x − a2 y, s1 = b1 x − a1 y + s2
        let y = x * self.dc_gain();
        self.s2 = self.b[2] * x - self.a[1] * y;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    /// |H(e^{iω})|² at frequency `f` for sample rate `fs`.
    pub fn power_response(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let z1 = num_complex::Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z1 + self.a[1] * z2;
        (num / den).norm_sqr()
    }
}

/// Filters `x` in place, starting settled on its first sample.
pub fn lowpass_in_place(x: &mut [f64], cutoff: f64, fs: f64) {
    let mut f = Biquad::butterworth_lowpass(cutoff, fs);
    if let Some(&first) = x.first() {
        f.settle(first);
    }
    for v in x.iter_mut() {
        *v = f.process(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unit-step response of the analog Butterworth pair with ζ = 1/√2.
    fn analog_step(t: f64, fc: f64) -> f64 {
        let w0 = 2.0 * PI * fc;
        let zeta = std::f64::consts::FRAC_1_SQRT_2;
        let wd = w0 * (1.0 - zeta * zeta).sqrt();
        1.0 - (-zeta * w0 * t).exp() * ((wd * t).cos() + zeta / (1.0 - zeta * zeta).sqrt() * (wd * t).sin())
    }

    fn crossing(f: impl Fn(f64) -> f64, level: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (0.0, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) < level {
                a = m
            } else {
                b = m
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn unit_dc_gain_and_settled_start() {
        let mut f = Biquad::butterworth_lowpass(3e5, 1e7);
        assert!((f.dc_gain() - 1.0).abs() < 1e-12);
        f.settle(2.5);
        for _ in 0..100 {
            assert!((f.process(2.5) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn half_power_at_cutoff() {
        let f = Biquad::butterworth_lowpass(3e5, 4e7);
        assert!((f.power_response(3e5, 4e7) - 0.5).abs() < 1e-12);
        assert!((f.power_response(0.0, 4e7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_rise_matches_analog_oracle() {
        let (fc, fs) = (3e5, 4e7);
        let t10 = crossing(|t| analog_step(t, fc), 0.1, 1e-5);
        let t90 = crossing(|t| analog_step(t, fc), 0.9, 1e-5);
        let analog_rise = t90 - t10;
        assert!((analog_rise - 1.13e-6).abs() < 0.02e-6, "analog rise {analog_rise}");

        let mut f = Biquad::butterworth_lowpass(fc, fs);
        let y: Vec<f64> = (0..2000).map(|_| f.process(1.0)).collect();
        let cross = |level: f64| {
            let i = y.iter().position(|&v| v >= level).unwrap();
            (i as f64 - 1.0 + (level - y[i - 1]) / (y[i] - y[i - 1])) / fs
        };
        let rise = cross(0.9) - cross(0.1);
        assert!((rise / analog_rise - 1.0).abs() < 0.01, "digital {rise}, analog {analog_rise}");
    }
}
