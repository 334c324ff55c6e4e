//! Monotone time reparametrizations `t -> beta(t)` of `[0, T]`.

use crate::error::{Error, Result};
use crate::spectral::time::{cumulative_integral, interpolate_at};
use crate::spectral::TimeGrid;

#[derive(Clone, Debug)]
pub struct TimeReparam {
    pub times: TimeGrid,
    pub m2: Vec<f64>,
    pub mu: f64,
    /// `beta(t_i)`.
    pub beta: Vec<f64>,
    /// `beta^{-1}(tau_i)`.
    pub beta_inv: Vec<f64>,
    /// `rho(tau_i) = m2(beta^{-1}(tau_i)) / mu`.
    pub rho: Vec<f64>,
    cumulative: Vec<f64>,
}

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

impl TimeReparam {
    /// `mu = (1/T) int m2`, `beta(t) = mu^{-1} int_0^t m2`.
    pub fn new(times: TimeGrid, m2: Vec<f64>) -> Result<TimeReparam> {
        if m2.len() != times.n_t {
            return Err(Error::Precondition("m2 must be sampled on the time grid".into()));
        }
        if let Some(bad) = m2.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Degeneracy(format!("m2 must be positive, found {bad:.3e}")));
        }
        let cumulative = cumulative_integral(&m2, times.dt());
        let mu = cumulative[times.n_t - 1] / times.horizon;
        let mut beta: Vec<f64> = cumulative.iter().map(|c| c / mu).collect();
        beta[0] = 0.0;
        beta[times.n_t - 1] = times.horizon;
        if beta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Degeneracy("time reparametrization not monotone".into()));
        }
        let mut r = TimeReparam {
            times,
            m2,
            mu,
            beta,
            beta_inv: Vec::new(),
            rho: Vec::new(),
            cumulative,
        };
        r.beta_inv = (0..times.n_t).map(|i| r.beta_inv_at(times.t(i))).collect();
        r.rho = r.beta_inv.iter().map(|&t| r.m2_at(t) / mu).collect();
        Ok(r)
    }

    pub fn identity(times: TimeGrid) -> TimeReparam {
        TimeReparam::new(times, vec![1.0; times.n_t]).expect("unit m2 is admissible")
    }

    pub fn m2_at(&self, t: f64) -> f64 {
        interpolate_at(&self.times, &self.m2, t)
    }

    /// Accumulated nodal integral plus Gauss quadrature over the partial cell.
    pub fn beta_at(&self, t: f64) -> f64 {
        let h = self.times.horizon;
        let t = t.clamp(0.0, h);
        let dt = self.times.dt();
        let i = ((t / dt).floor() as usize).min(self.times.n_t - 1);
        let t0 = self.times.t(i);
        let half = 0.5 * (t - t0);
        let mid = 0.5 * (t + t0);
        let part: f64 = GAUSS5.iter().map(|(x, w)| w * self.m2_at(mid + half * x)).sum::<f64>() * half;
        (self.cumulative[i] + part) / self.mu
    }

    /// Monotone cubic guess refined by one Newton step.
    pub fn beta_inv_at(&self, tau: f64) -> f64 {
        let h = self.times.horizon;
        if tau <= 0.0 {
            return 0.0;
        }
        if tau >= h {
            return h;
        }
        let ts = self.times.times();
        let guess = pchip(&self.beta, &ts, tau);
        let slope = self.m2_at(guess) / self.mu;
        (guess - (self.beta_at(guess) - tau) / slope).clamp(0.0, h)
    }

    pub fn rho_at(&self, tau: f64) -> f64 {
        self.m2_at(self.beta_inv_at(tau)) / self.mu
    }

    pub fn is_identity(&self) -> bool {
        self.m2.iter().all(|&m| m == 1.0)
    }
}

/// Fritsch-Carlson monotone cubic interpolation of `(x_i, y_i)` at `q`.
pub fn pchip(x: &[f64], y: &[f64], q: f64) -> f64 {
    let n = x.len();
    let k = match x.partition_point(|&v| v <= q) {
        0 => 0,
        p if p >= n => n - 2,
        p => p - 1,
    };
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let slope = |i: usize| -> f64 {
        if i == 0 {
            return end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], *delta.get(1).unwrap_or(&delta[0]));
        }
        if i == n - 1 {
            return end_slope(h[n - 2], h[n.saturating_sub(3)], delta[n - 2], delta[n.saturating_sub(3)]);
        }
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 <= 0.0 {
            0.0
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            (w1 + w2) / (w1 / d0 + w2 / d1)
        }
    };
    let (m0, m1) = (slope(k), slope(k + 1));
    let s = (q - x[k]) / h[k];
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    h00 * y[k] + h10 * h[k] * m0 + h01 * y[k + 1] + h11 * h[k] * m1
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
