use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cosine schedule offset.
pub const COSINE_S: f64 = 0.008;
/// Smallest allowed per-step `α_{t|t-1}`.
pub const MIN_STEP_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Cosine,
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(Error::invalid(format!("unknown schedule kind `{other}` (cosine | linear)"))),
        }
    }
}

/// Cumulative signal levels `ᾱ_0 = 1 > ᾱ_1 > … > ᾱ_T > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
}

/// Coefficients of one reverse step from `t` down to `s`:
/// `z_s = pred·x̂ + zt·z_t + sigma·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub pred: f64,
    pub zt: f64,
    pub sigma: f64,
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        let mut alpha_bar = Vec::with_capacity(t_max + 1);
        alpha_bar.push(1.0);
        match kind {
            ScheduleKind::Cosine => {
                let f = |t: usize| {
                    let x = ((t as f64 / t_max as f64) + COSINE_S) / (1.0 + COSINE_S) * std::f64::consts::FRAC_PI_2;
                    x.cos().powi(2)
                };
                let f0 = f(0);
                let mut prev_raw = 1.0;
                for t in 1..=t_max {
                    let raw = f(t) / f0;
                    let step = (raw / prev_raw).clamp(MIN_STEP_ALPHA, 1.0);
                    prev_raw = raw;
                    let last = *alpha_bar.last().expect("non-empty");
                    alpha_bar.push(last * step);
                }
            }
            ScheduleKind::Linear => {
                let scale = 1000.0 / t_max as f64;
                let (lo, hi) = (1e-4 * scale, 0.02 * scale);
                for t in 1..=t_max {
                    let frac = if t_max == 1 { 0.0 } else { (t - 1) as f64 / (t_max - 1) as f64 };
                    let beta = (lo + (hi - lo) * frac).min(1.0 - MIN_STEP_ALPHA);
                    let last = *alpha_bar.last().expect("non-empty");
                    alpha_bar.push(last * (1.0 - beta));
                }
            }
        }
        Ok(Self { alpha_bar })
    }

    /// A schedule given directly by `ᾱ_0 = 1 > ᾱ_1 > … > ᾱ_T > 0`.
    pub fn from_alpha_bars(alpha_bar: Vec<f64>) -> Result<Self> {
        if alpha_bar.len() < 2 || alpha_bar[0] != 1.0 {
            return Err(Error::invalid("ᾱ must start at 1 and have at least one step"));
        }
        if alpha_bar.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
            return Err(Error::invalid("ᾱ must decrease strictly and stay positive"));
        }
        Ok(Self { alpha_bar })
    }

    pub fn t_max(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    fn check(&self, s: usize, t: usize) -> Result<()> {
        if t == 0 || t > self.t_max() || s >= t {
            return Err(Error::invalid(format!(
                "reverse step {t} -> {s} outside 0..={}",
                self.t_max()
            )));
        }
        Ok(())
    }

    /// `σ²(s, t) = (1−ᾱ_s)(1−ᾱ_t/ᾱ_s)/(1−ᾱ_t)`.
    pub fn sigma2(&self, s: usize, t: usize) -> Result<f64> {
        self.check(s, t)?;
        let (a_s, a_t) = (self.alpha_bar[s], self.alpha_bar[t]);
        Ok((1.0 - a_s) * (1.0 - a_t / a_s) / (1.0 - a_t))
    }

    pub fn coefficients(&self, s: usize, t: usize) -> Result<StepCoefficients> {
        self.check(s, t)?;
        let (a_s, a_t) = (self.alpha_bar[s], self.alpha_bar[t]);
        let step = a_t / a_s;
        Ok(StepCoefficients {
            pred: a_s.sqrt() * (1.0 - step) / (1.0 - a_t),
            zt: step.sqrt() * (1.0 - a_s) / (1.0 - a_t),
            sigma: self.sigma2(s, t)?.max(0.0).sqrt(),
        })
    }
}

/// Reverse-time ladder `T, T−k, …, ≥1, 0` with stride `k = ⌈T / T_sample⌉`.
pub fn respaced_ladder(t_train: usize, t_sample: usize) -> Result<Vec<usize>> {
    if t_sample == 0 || t_sample > t_train {
        return Err(Error::invalid(format!(
            "sampling steps {t_sample} must lie in 1..={t_train}"
        )));
    }
    let stride = t_train.div_ceil(t_sample);
    let mut ladder: Vec<usize> = (0..)
        .map(|k| t_train as isize - (k * stride) as isize)
        .take_while(|&t| t >= 1)
        .map(|t| t as usize)
        .collect();
    ladder.push(0);
    Ok(ladder)
}
