//! Uniform time grids, finite-difference stencils, quadrature and interpolation.

use num_complex::Complex64 as C64;

use super::field::Field;
use super::grid::Grid;
use super::pair::Pair;
use crate::error::{Error, Result};

/// Uniform samples `t_i = i T / (n_t - 1)` of `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_t: usize) -> Result<TimeGrid> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
        }
        if n_t < 7 {
            return Err(Error::Precondition(format!(
                "need at least 7 time samples, got {n_t}"
            )));
        }
        Ok(TimeGrid { horizon, n_t })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.n_t - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.n_t {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|i| self.t(i)).collect()
    }

    /// Grid with `factor` sub-intervals per interval.
    pub fn refine(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            n_t: (self.n_t - 1) * factor.max(1) + 1,
        }
    }
}

/// Minimal linear-space interface used by the stencils below.
pub trait Lin: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Lin for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Lin for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
}

impl Lin for Vec<C64> {
    fn zero_like(&self) -> Self {
        vec![C64::new(0.0, 0.0); self.len()]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
}

fn combine<T: Lin>(data: &[T], w: &[(usize, f64)]) -> T {
    let mut out = data[0].zero_like();
    for &(j, c) in w {
        out.axpy(c, &data[j]);
    }
    out
}

/// Fourth-order first-derivative stencil at sample `i` of `n` (unit spacing).
pub fn fd1_weights(i: usize, n: usize) -> Vec<(usize, f64)> {
    assert!(n >= 5, "first-derivative stencil needs five samples");
    let d = 1.0 / 12.0;
    if i == 0 {
        vec![(0, -25.0 * d), (1, 48.0 * d), (2, -36.0 * d), (3, 16.0 * d), (4, -3.0 * d)]
    } else if i == 1 {
        vec![(0, -3.0 * d), (1, -10.0 * d), (2, 18.0 * d), (3, -6.0 * d), (4, d)]
    } else if i + 1 == n {
        fd1_weights(0, n)
            .into_iter()
            .map(|(j, w)| (n - 1 - j, -w))
            .collect()
    } else if i + 2 == n {
        fd1_weights(1, n)
            .into_iter()
            .map(|(j, w)| (n - 1 - j, -w))
            .collect()
    } else {
        vec![(i - 2, d), (i - 1, -8.0 * d), (i + 1, 8.0 * d), (i + 2, -d)]
    }
}

/// Fourth-order second-derivative stencil at sample `i` of `n` (unit spacing).
pub fn fd2_weights(i: usize, n: usize) -> Vec<(usize, f64)> {
    assert!(n >= 6, "second-derivative stencil needs six samples");
    let d = 1.0 / 12.0;
    if i == 0 {
        vec![
            (0, 45.0 * d),
            (1, -154.0 * d),
            (2, 214.0 * d),
            (3, -156.0 * d),
            (4, 61.0 * d),
            (5, -10.0 * d),
        ]
    } else if i == 1 {
        vec![
            (0, 10.0 * d),
            (1, -15.0 * d),
            (2, -4.0 * d),
            (3, 14.0 * d),
            (4, -6.0 * d),
            (5, d),
        ]
    } else if i + 1 == n || i + 2 == n {
        fd2_weights(n - 1 - i, n)
            .into_iter()
            .map(|(j, w)| (n - 1 - j, w))
            .collect()
    } else {
        vec![
            (i - 2, -d),
            (i - 1, 16.0 * d),
            (i, -30.0 * d),
            (i + 1, 16.0 * d),
            (i + 2, -d),
        ]
    }
}

/// Fornberg weights of the derivatives `0..=m` at `z` on the nodes `x`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First-derivative weights (unit spacing): the fourth-order central
/// stencil inside, one-sided stencils on `closure + 1` nodes near the ends.
pub fn fd1_weights_closure(i: usize, n: usize, closure: usize) -> Vec<(usize, f64)> {
    let width = closure + 1;
    assert!(n >= width, "closure needs {width} samples");
    let half = closure / 2;
    if i >= 2 && i + 2 < n && (i >= half && i + half < n) {
        return fd1_weights(i, n);
    }
    let base = if i < n / 2 { 0 } else { n - width };
    let xs: Vec<f64> = (base..base + width).map(|j| j as f64).collect();
    let w = fornberg(i as f64, &xs, 1);
    (base..base + width).zip(w[1].iter().copied()).collect()
}

/// `d_dt` with one-sided closures of the given order near the ends.
pub fn d_dt_closure<T: Lin>(data: &[T], dt: f64, closure: usize) -> Vec<T> {
    let n = data.len();
    (0..n)
        .map(|i| {
            let w: Vec<_> = fd1_weights_closure(i, n, closure)
                .into_iter()
                .map(|(j, c)| (j, c / dt))
                .collect();
            combine(data, &w)
        })
        .collect()
}

pub fn d_dt<T: Lin>(data: &[T], dt: f64) -> Vec<T> {
    let n = data.len();
    (0..n)
        .map(|i| {
            let w: Vec<_> = fd1_weights(i, n).into_iter().map(|(j, c)| (j, c / dt)).collect();
            combine(data, &w)
        })
        .collect()
}

pub fn d2_dt2<T: Lin>(data: &[T], dt: f64) -> Vec<T> {
    let n = data.len();
    (0..n)
        .map(|i| {
            let w: Vec<_> = fd2_weights(i, n)
                .into_iter()
                .map(|(j, c)| (j, c / (dt * dt)))
                .collect();
            combine(data, &w)
        })
        .collect()
}

/// Composite Simpson weights; an odd interval count closes with the 3/8 rule.
pub fn simpson_weights(n: usize, dt: f64) -> Vec<f64> {
    assert!(n >= 4, "simpson needs at least four samples");
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let even_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    let mut i = 0;
    while i + 2 <= even_end {
        w[i] += dt / 3.0;
        w[i + 1] += 4.0 * dt / 3.0;
        w[i + 2] += dt / 3.0;
        i += 2;
    }
    if intervals % 2 == 1 {
        let s = even_end;
        for (j, c) in [(0, 1.0), (1, 3.0), (2, 3.0), (3, 1.0)] {
            w[s + j] += 3.0 * dt / 8.0 * c;
        }
    }
    w
}

pub fn integrate<T: Lin>(data: &[T], dt: f64) -> T {
    let w = simpson_weights(data.len(), dt);
    let wv: Vec<_> = w.into_iter().enumerate().collect();
    combine(data, &wv)
}

/// Running integrals `int_0^{t_i}`: Simpson on even nodes, a four-point
/// cubic rule for the last interval at odd nodes.
pub fn cumulative_integral<T: Lin>(data: &[T], dt: f64) -> Vec<T> {
    let n = data.len();
    assert!(n >= 4, "cumulative quadrature needs at least four samples");
    let mut out = Vec::with_capacity(n);
    out.push(data[0].zero_like());
    for i in 1..n {
        if i % 2 == 0 {
            let mut v = out[i - 2].clone();
            v.axpy(dt / 3.0, &data[i - 2]);
            v.axpy(4.0 * dt / 3.0, &data[i - 1]);
            v.axpy(dt / 3.0, &data[i]);
            out.push(v);
        } else {
            let mut v = out[i - 1].clone();
            let w = interval_weights(i - 1, n);
            for (j, c) in w {
                v.axpy(c * dt, &data[j]);
            }
            out.push(v);
        }
    }
    out
}

/// Weights of `int_{t_i}^{t_{i+1}}` from the cubic through four nearby samples.
fn interval_weights(i: usize, n: usize) -> Vec<(usize, f64)> {
    if i == 0 {
        vec![(0, 9.0 / 24.0), (1, 19.0 / 24.0), (2, -5.0 / 24.0), (3, 1.0 / 24.0)]
    } else if i + 2 >= n {
        let j = n - 4;
        vec![(j, 1.0 / 24.0), (j + 1, -5.0 / 24.0), (j + 2, 19.0 / 24.0), (j + 3, 9.0 / 24.0)]
    } else {
        vec![
            (i - 1, -1.0 / 24.0),
            (i, 13.0 / 24.0),
            (i + 1, 13.0 / 24.0),
            (i + 2, -1.0 / 24.0),
        ]
    }
}

/// Degree-5 Lagrange weights for evaluating sampled data at time `t`.
pub fn lagrange_weights(grid: &TimeGrid, t: f64) -> Vec<(usize, f64)> {
    let n = grid.n_t;
    let dt = grid.dt();
    let s = (t / dt).clamp(0.0, (n - 1) as f64);
    let base = (s.floor() as i64 - 2).clamp(0, n as i64 - 6) as usize;
    let mut w = Vec::with_capacity(6);
    for j in base..base + 6 {
        let mut c = 1.0;
        for m in base..base + 6 {
            if m != j {
                c *= (s - m as f64) / (j as f64 - m as f64);
            }
        }
        w.push((j, c));
    }
    w
}

pub fn interpolate_at<T: Lin>(grid: &TimeGrid, data: &[T], t: f64) -> T {
    combine(data, &lagrange_weights(grid, t))
}

/// Phase multiplier of the free flow `e^{i mu k^2 t}`.
pub fn free_phase(grid: &Grid, mu: f64, t: f64) -> Vec<C64> {
    grid.wavenumbers()
        .iter()
        .map(|&k| C64::from_polar(1.0, mu * k * k * t))
        .collect()
}

/// Time derivative of spectral samples taken in the frame of the free flow
/// `e^{i mu k^2 t}`: the stencil acts on `e^{-i mu k^2 t} u` only.
pub fn frame_d_dt(grid: &Grid, times: &TimeGrid, coeffs: &[Vec<C64>], mu: f64) -> Vec<Vec<C64>> {
    frame_d_dt_closure(grid, times, coeffs, mu, 4)
}

/// `frame_d_dt` with one-sided closures of order `closure` at the ends.
pub fn frame_d_dt_closure(
    grid: &Grid,
    times: &TimeGrid,
    coeffs: &[Vec<C64>],
    mu: f64,
    closure: usize,
) -> Vec<Vec<C64>> {
    if mu == 0.0 {
        return d_dt_closure(coeffs, times.dt(), closure);
    }
    let k = grid.wavenumbers();
    let w: Vec<Vec<C64>> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ph = free_phase(grid, -mu, times.t(i));
            c.iter().zip(&ph).map(|(a, p)| a * p).collect()
        })
        .collect();
    let dw = d_dt_closure(&w, times.dt(), closure);
    dw.into_iter()
        .enumerate()
        .map(|(i, d)| {
            let ph = free_phase(grid, mu, times.t(i));
            d.iter()
                .zip(&ph)
                .zip(&coeffs[i])
                .zip(k)
                .map(|(((a, p), u), &kk)| a * p + C64::new(0.0, mu * kk * kk) * u)
                .collect()
        })
        .collect()
}

/// Second time derivative in the frame of the free flow.
pub fn frame_d2_dt2(grid: &Grid, times: &TimeGrid, coeffs: &[Vec<C64>], mu: f64) -> Vec<Vec<C64>> {
    if mu == 0.0 {
        return d2_dt2(coeffs, times.dt());
    }
    let k = grid.wavenumbers();
    let w: Vec<Vec<C64>> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ph = free_phase(grid, -mu, times.t(i));
            c.iter().zip(&ph).map(|(a, p)| a * p).collect()
        })
        .collect();
    let dw = d_dt(&w, times.dt());
    let ddw = d2_dt2(&w, times.dt());
    (0..coeffs.len())
        .map(|i| {
            let ph = free_phase(grid, mu, times.t(i));
            (0..grid.n())
                .map(|m| {
                    let om = C64::new(0.0, mu * k[m] * k[m]);
                    ph[m] * (ddw[i][m] + 2.0 * om * dw[i][m]) + om * om * coeffs[i][m]
                })
                .collect()
        })
        .collect()
}

/// Samples of a field-valued function of time.
#[derive(Clone, Debug)]
pub struct Traj<T = Field> {
    pub times: TimeGrid,
    pub samples: Vec<T>,
}

impl<T> Traj<T> {
    pub fn new(times: TimeGrid, samples: Vec<T>) -> Result<Traj<T>> {
        if samples.len() != times.n_t {
            return Err(Error::Precondition(format!(
                "trajectory has {} samples for {} times",
                samples.len(),
                times.n_t
            )));
        }
        Ok(Traj { times, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &T {
        &self.samples[0]
    }

    pub fn last(&self) -> &T {
        self.samples.last().unwrap()
    }
}

impl Traj<Field> {
    pub fn from_coeffs(grid: &Grid, times: TimeGrid, coeffs: Vec<Vec<C64>>) -> Result<Traj> {
        Traj::new(
            times,
            coeffs.into_iter().map(|c| Field::from_coeffs(grid, c)).collect(),
        )
    }

    pub fn zeros(grid: &Grid, times: TimeGrid) -> Traj {
        Traj {
            times,
            samples: (0..times.n_t).map(|_| Field::zeros(grid)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.samples[0].grid()
    }

    pub fn coeff_arrays(&self) -> Vec<Vec<C64>> {
        self.samples.iter().map(|f| f.coeffs().to_vec()).collect()
    }

    /// `sup_t |u(t)|_s`.
    pub fn sup_norm(&self, s: f64) -> f64 {
        self.samples.iter().fold(0.0, |m, f| m.max(f.sobolev_norm(s)))
    }

    pub fn map(&self, f: impl Fn(usize, &Field) -> Field) -> Traj {
        Traj {
            times: self.times,
            samples: self.samples.iter().enumerate().map(|(i, u)| f(i, u)).collect(),
        }
    }

    pub fn zip(&self, other: &Traj, f: impl Fn(&Field, &Field) -> Field) -> Traj {
        Traj {
            times: self.times,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Traj) -> Traj {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Traj) -> Traj {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Traj {
        self.map(|_, u| u.scale_re(s))
    }

    /// Plain stencil derivative.
    pub fn d_dt(&self) -> Traj {
        let g = self.grid().clone();
        let d = d_dt(&self.coeff_arrays(), self.times.dt());
        Traj::from_coeffs(&g, self.times, d).unwrap()
    }

    pub fn d2_dt2(&self) -> Traj {
        let g = self.grid().clone();
        let d = d2_dt2(&self.coeff_arrays(), self.times.dt());
        Traj::from_coeffs(&g, self.times, d).unwrap()
    }

    /// Stencil derivative taken in the frame of the free flow with speed `mu`.
    pub fn frame_d_dt(&self, mu: f64) -> Traj {
        let g = self.grid().clone();
        let d = frame_d_dt(&g, &self.times, &self.coeff_arrays(), mu);
        Traj::from_coeffs(&g, self.times, d).unwrap()
    }

    pub fn frame_d_dt_closure(&self, mu: f64, closure: usize) -> Traj {
        let g = self.grid().clone();
        let d = frame_d_dt_closure(&g, &self.times, &self.coeff_arrays(), mu, closure);
        Traj::from_coeffs(&g, self.times, d).unwrap()
    }

    pub fn frame_d2_dt2(&self, mu: f64) -> Traj {
        let g = self.grid().clone();
        let d = frame_d2_dt2(&g, &self.times, &self.coeff_arrays(), mu);
        Traj::from_coeffs(&g, self.times, d).unwrap()
    }

    /// Degree-5 Lagrange evaluation at an arbitrary time.
    pub fn at(&self, t: f64) -> Field {
        let w = lagrange_weights(&self.times, t);
        let mut c = vec![C64::new(0.0, 0.0); self.grid().n()];
        for (j, wj) in w {
            for (s, v) in c.iter_mut().zip(self.samples[j].coeffs()) {
                *s += v * wj;
            }
        }
        Field::from_coeffs(self.grid(), c)
    }

    /// Lagrange evaluation of `e^{-i mu k^2 t} u`, mapped back by the free flow.
    pub fn at_frame(&self, t: f64, mu: f64) -> Field {
        if mu == 0.0 {
            return self.at(t);
        }
        let g = self.grid();
        let w = lagrange_weights(&self.times, t);
        let mut c = vec![C64::new(0.0, 0.0); g.n()];
        for (j, wj) in w {
            let ph = free_phase(g, -mu, self.times.t(j));
            for ((s, v), p) in c.iter_mut().zip(self.samples[j].coeffs()).zip(&ph) {
                *s += v * p * wj;
            }
        }
        let ph = free_phase(g, mu, t);
        for (s, p) in c.iter_mut().zip(&ph) {
            *s *= p;
        }
        Field::from_coeffs(g, c)
    }

    /// `int_0^T int u conj v dx dt`, Simpson in time.
    pub fn l2_spacetime(&self, other: &Traj) -> C64 {
        let vals: Vec<C64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| super::field::l2(a, b).unwrap())
            .collect();
        integrate(&vals, self.times.dt())
    }
}

impl Traj<Pair> {
    pub fn sup_norm(&self, s: f64) -> f64 {
        self.samples.iter().fold(0.0, |m, p| m.max(p.sobolev_norm(s)))
    }
}
