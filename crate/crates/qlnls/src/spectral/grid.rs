use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

/// Uniform grid of `n` nodes on the circle `[0, 2*pi)`.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(n={})", self.n)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Grid> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Precondition(format!(
                "grid size must be even and at least 8, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = (0..n).map(|j| wavenumber(j, n) as f64).collect();
        Ok(Grid {
            n,
            plans: Arc::new(Plans { fwd, inv, k }),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed wavenumbers in FFT order: `0, 1, ..., n/2-1, -n/2, ..., -1`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.plans.k
    }

    /// Index of the Nyquist mode `-n/2`.
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        if k >= h || k < -h {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Node values to coefficients with `u = sum_k c_k e^{ikx}`.
    pub fn forward_in_place(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.plans.fwd.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    pub fn inverse_in_place(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.plans.inv.process(buf);
    }

    pub fn forward(&self, vals: &[C64]) -> Vec<C64> {
        let mut b = vals.to_vec();
        self.forward_in_place(&mut b);
        b
    }

    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut b = coeffs.to_vec();
        self.inverse_in_place(&mut b);
        b
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.n, other.n))
        }
    }
}

pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Japanese bracket `(1 + k^2)^{1/2}`.
pub fn bracket(k: f64) -> f64 {
    (1.0 + k * k).sqrt()
}
