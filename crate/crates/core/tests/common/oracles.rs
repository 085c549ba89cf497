use molgen::latentdiff::{sample_chains, NoiseSchedule};
use numcore::Tensor;

pub fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var, v.len())
}

/// Standard errors of the sample mean and variance of a normal with variance `var`.
pub fn standard_errors(var: f64, n: usize) -> (f64, f64) {
    ((var / n as f64).sqrt(), var * (2.0 / (n as f64 - 1.0)).sqrt())
}

/// Per-dimension Gaussian data `N(m, s²)`.
pub const TARGETS: [(f64, f64); 3] = [(1.5, 0.25), (-0.5, 2.0), (0.0, 1.0)];

/// `E[x0 | z_t]` for Gaussian data: the optimal denoiser.
pub fn gaussian_oracle(schedule: &NoiseSchedule, zt: &Tensor, t: usize) -> Tensor {
    let a = schedule.alpha_bar(t);
    Tensor::from_fn(zt.rows(), zt.cols(), |i, j| {
        let (m, s2) = TARGETS[j];
        let gain = a.sqrt() * s2 / (a * s2 + 1.0 - a);
        m + gain * (zt.get(i, j) - a.sqrt() * m)
    })
}

pub fn oracle_samples(schedule: &NoiseSchedule, ladder: &[usize], n: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_chains(schedule, ladder, TARGETS.len(), n, seed, |zt, t, _| Ok(gaussian_oracle(schedule, zt, t))).unwrap()
}

/// Exact output moments of the sampler driven by the Gaussian oracle: every
/// step is affine in `z_t` plus independent noise.
pub fn sampler_moments(schedule: &NoiseSchedule, ladder: &[usize], m: f64, s2: f64) -> (f64, f64) {
    let (mut mean, mut var) = (0.0, 1.0);
    for pair in ladder.windows(2) {
        let (t, s) = (pair[0], pair[1]);
        let a = schedule.alpha_bar(t);
        let k = schedule.coefficients(s, t).unwrap();
        let gain = a.sqrt() * s2 / (a * s2 + 1.0 - a);
        let slope = k.pred * gain + k.zt;
        let offset = k.pred * m * (1.0 - gain * a.sqrt());
        let noise = if s == 0 { 0.0 } else { k.sigma * k.sigma };
        mean = slope * mean + offset;
        var = slope * slope * var + noise;
    }
    (mean, var)
}
