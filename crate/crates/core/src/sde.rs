//! Ito–Euler increments and strong-convergence measurement against SDEs with
//! known pathwise solutions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::stream;

/// One Ito–Euler increment `drift·dt + amplitude·dW`.
#[inline]
pub fn ito_euler_increment(drift: f64, amplitude: f64, dt: f64, dw: f64) -> f64 {
    drift * dt + amplitude * dw
}

/// Test problems with exact solutions driven by the same Brownian path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestSde {
    /// dX = −θX dt + √(2D) dW
    OrnsteinUhlenbeck { theta: f64, diffusion: f64, x0: f64 },
    /// dX = μX dt + σX dW
    GeometricBrownian { mu: f64, sigma: f64, x0: f64 },
}

impl TestSde {
    fn drift(&self, x: f64) -> f64 {
        match *self {
            TestSde::OrnsteinUhlenbeck { theta, .. } => -theta * x,
            TestSde::GeometricBrownian { mu, .. } => mu * x,
        }
    }

    fn amplitude(&self, x: f64) -> f64 {
        match *self {
            TestSde::OrnsteinUhlenbeck { diffusion, .. } => (2.0 * diffusion).sqrt(),
            TestSde::GeometricBrownian { sigma, .. } => sigma * x,
        }
    }

    fn x0(&self) -> f64 {
        match *self {
            TestSde::OrnsteinUhlenbeck { x0, .. } | TestSde::GeometricBrownian { x0, .. } => x0,
        }
    }
}

/// Mean absolute endpoint error E|X_euler(T) − X(T)| for each step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ConvergenceStudy {
    /// Least-squares slope of log(error) against log(dt).
    pub fn order(&self) -> f64 {
        let n = self.steps.len() as f64;
        let xs: Vec<f64> = self.steps.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = self.errors.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }
}

/// Runs Ito–Euler at step sizes `T/2^k` for `k` in `levels` against the exact
/// solution on a `T/2^fine` grid, averaging over `paths` Brownian paths.
pub fn strong_convergence(
    sde: TestSde,
    t_end: f64,
    fine: u32,
    levels: &[u32],
    paths: usize,
    seed: u64,
) -> ConvergenceStudy {
    assert!(levels.iter().all(|&k| k <= fine), "levels must not exceed the reference level");
    let n_fine = 1usize << fine;
    let h = t_end / n_fine as f64;
    let mut rng = stream(seed);
    let mut sums = vec![0.0; levels.len()];
    let mut dw = vec![0.0; n_fine];
    for _ in 0..paths {
        let exact = match sde {
            TestSde::OrnsteinUhlenbeck { theta, diffusion, x0 } => {
                // joint Gaussian (ΔW_k, ∫ e^{−θ(t_{k+1}−s)} dW_s) per fine interval
                let decay = (-theta * h).exp();
                let cov = (1.0 - decay) / theta;
                let var_i = (1.0 - decay * decay) / (2.0 * theta);
                let a = cov / h;
                let b = (var_i - a * a * h).max(0.0).sqrt();
                let amp = (2.0 * diffusion).sqrt();
                let mut x = x0;
                for w in dw.iter_mut() {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    *w = z1 * h.sqrt();
                    x = decay * x + amp * (a * *w + b * z2);
                }
                x
            }
            TestSde::GeometricBrownian { mu, sigma, x0 } => {
                let mut w_total = 0.0;
                for w in dw.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w = z * h.sqrt();
                    w_total += *w;
                }
                x0 * ((mu - 0.5 * sigma * sigma) * t_end + sigma * w_total).exp()
            }
        };
        for (slot, &k) in sums.iter_mut().zip(levels) {
            let n = 1usize << k;
            let stride = n_fine / n;
            let dt = t_end / n as f64;
            let mut x = sde.x0();
            for chunk in dw.chunks(stride) {
                let w: f64 = chunk.iter().sum();
                x += ito_euler_increment(sde.drift(x), sde.amplitude(x), dt, w);
            }
            *slot += (x - exact).abs();
        }
    }
    ConvergenceStudy {
        steps: levels.iter().map(|&k| t_end / (1u64 << k) as f64).collect(),
        errors: sums.iter().map(|s| s / paths as f64).collect(),
    }
}
