use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use super::grid::{bracket, Grid};
use crate::error::{Error, Result};

/// Complex periodic function sampled on a [`Grid`], holding node values and
/// Fourier coefficients lazily.
#[derive(Clone)]
pub struct Field {
    grid: Grid,
    values: OnceLock<Vec<C64>>,
    coeffs: OnceLock<Vec<C64>>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Field(n={}, |u|_0={:.3e})", self.grid.n(), self.l2_norm())
    }
}

impl Field {
    pub fn from_values(grid: &Grid, values: Vec<C64>) -> Field {
        assert_eq!(values.len(), grid.n(), "value count must match grid");
        let v = OnceLock::new();
        let _ = v.set(values);
        Field {
            grid: grid.clone(),
            values: v,
            coeffs: OnceLock::new(),
        }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<C64>) -> Field {
        assert_eq!(coeffs.len(), grid.n(), "coefficient count must match grid");
        let c = OnceLock::new();
        let _ = c.set(coeffs);
        Field {
            grid: grid.clone(),
            values: OnceLock::new(),
            coeffs: c,
        }
    }

    pub fn from_real_values(grid: &Grid, values: &[f64]) -> Field {
        Field::from_values(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Field {
        Field::from_values(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn zeros(grid: &Grid) -> Field {
        Field::from_coeffs(grid, vec![C64::new(0.0, 0.0); grid.n()])
    }

    pub fn constant(grid: &Grid, c: C64) -> Field {
        Field::from_values(grid, vec![c; grid.n()])
    }

    /// `amp * e^{ikx}`; panics when `k` is not resolved.
    pub fn mode(grid: &Grid, k: i64, amp: C64) -> Field {
        let mut c = vec![C64::new(0.0, 0.0); grid.n()];
        c[grid.index_of(k).expect("mode outside grid band")] = amp;
        Field::from_coeffs(grid, c)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[C64] {
        self.values.get_or_init(|| {
            self.grid
                .inverse(self.coeffs.get().expect("field holds no representation"))
        })
    }

    pub fn coeffs(&self) -> &[C64] {
        self.coeffs.get_or_init(|| {
            self.grid
                .forward(self.values.get().expect("field holds no representation"))
        })
    }

    /// Mutable node values; the cached coefficients are discarded.
    pub fn values_mut(&mut self) -> &mut Vec<C64> {
        self.values();
        self.coeffs = OnceLock::new();
        self.values.get_mut().unwrap()
    }

    /// Mutable coefficients; the cached node values are discarded.
    pub fn coeffs_mut(&mut self) -> &mut Vec<C64> {
        self.coeffs();
        self.values = OnceLock::new();
        self.coeffs.get_mut().unwrap()
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs();
        self.coeffs.into_inner().unwrap()
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values();
        self.values.into_inner().unwrap()
    }

    pub fn check_grid(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Field {
        Field::from_values(&self.grid, self.values().iter().map(|&v| f(v)).collect())
    }

    pub fn zip_values(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        assert_eq!(self.n(), other.n(), "grid mismatch");
        Field::from_values(
            &self.grid,
            self.values()
                .iter()
                .zip(other.values())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    fn zip_coeffs(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        assert_eq!(self.n(), other.n(), "grid mismatch");
        Field::from_coeffs(
            &self.grid,
            self.coeffs()
                .iter()
                .zip(other.coeffs())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Field {
        if self.coeffs.get().is_some() {
            Field::from_coeffs(&self.grid, self.coeffs().iter().map(|&c| c * s).collect())
        } else {
            self.map_values(|v| v * s)
        }
    }

    pub fn scale_re(&self, s: f64) -> Field {
        self.scale(C64::new(s, 0.0))
    }

    pub fn conj(&self) -> Field {
        self.map_values(|v| v.conj())
    }

    pub fn re(&self) -> Field {
        self.map_values(|v| C64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Field {
        self.map_values(|v| C64::new(v.im, 0.0))
    }

    /// Largest imaginary part at the nodes.
    pub fn max_imag(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Pointwise product without spectral truncation.
    pub fn mul_pointwise(&self, other: &Field) -> Field {
        self.zip_values(other, |a, b| a * b)
    }

    /// Product followed by two-thirds dealiasing.
    pub fn mul(&self, other: &Field) -> Field {
        self.mul_pointwise(other).dealias()
    }

    /// Zero every mode with `|k| > n/3` together with the Nyquist mode.
    pub fn dealias(&self) -> Field {
        let mut c = self.coeffs().to_vec();
        dealias_coeffs(&self.grid, &mut c);
        Field::from_coeffs(&self.grid, c)
    }

    pub fn multiplier(&self, m: impl Fn(f64) -> C64) -> Field {
        let k = self.grid.wavenumbers();
        Field::from_coeffs(
            &self.grid,
            self.coeffs()
                .iter()
                .zip(k)
                .map(|(&c, &kk)| c * m(kk))
                .collect(),
        )
    }

    pub fn dx(&self) -> Field {
        let ny = -(self.n() as f64) / 2.0;
        self.multiplier(|k| if k == ny { C64::new(0.0, 0.0) } else { C64::new(0.0, k) })
    }

    pub fn dxx(&self) -> Field {
        self.multiplier(|k| C64::new(-k * k, 0.0))
    }

    /// Zero-mean antiderivative: `1 -> 0`, `e^{ijx} -> e^{ijx}/(ij)`.
    pub fn dx_inv(&self) -> Field {
        let ny = -(self.n() as f64) / 2.0;
        self.multiplier(|k| {
            if k == 0.0 || k == ny {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, -1.0 / k)
            }
        })
    }

    /// Bessel potential with symbol `<k>^s`.
    pub fn lambda(&self, s: f64) -> Field {
        self.multiplier(|k| C64::new(bracket(k).powf(s), 0.0))
    }

    /// Keep only modes with `|k| <= kmax`.
    pub fn truncate(&self, kmax: f64) -> Field {
        self.multiplier(|k| {
            if k.abs() <= kmax {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Translation `u(x) -> u(x + p)`.
    pub fn shift(&self, p: f64) -> Field {
        let ny = -(self.n() as f64) / 2.0;
        self.multiplier(|k| {
            if k == ny {
                C64::new((k * p).cos(), 0.0)
            } else {
                C64::from_polar(1.0, k * p)
            }
        })
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let k = self.grid.wavenumbers();
        self.coeffs()
            .iter()
            .zip(k)
            .map(|(c, &kk)| (1.0 + kk * kk).powf(s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral `L^2` norm `(sum |c_k|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Average `(1/2pi) int u`.
    pub fn mean(&self) -> C64 {
        self.coeffs()[0]
    }

    /// Rectangle-rule integral over the circle.
    pub fn integral(&self) -> C64 {
        self.values().iter().sum::<C64>() * self.grid.dx()
    }

    /// Energy fraction carried by modes with `|k| > kcut`.
    pub fn tail_energy(&self, kcut: f64) -> f64 {
        let k = self.grid.wavenumbers();
        let mut tail = 0.0;
        let mut total = 0.0;
        for (c, &kk) in self.coeffs().iter().zip(k) {
            let e = c.norm_sqr();
            total += e;
            if kk.abs() > kcut {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Trigonometric interpolant evaluated at arbitrary points.
    pub fn interpolate(&self, points: &[f64]) -> Vec<C64> {
        let n = self.n();
        let c = self.coeffs();
        let h = n / 2;
        points
            .iter()
            .map(|&y| {
                let z = C64::from_polar(1.0, y);
                let mut zp = C64::new(1.0, 0.0);
                let mut acc = c[0];
                for k in 1..h {
                    zp *= z;
                    acc += c[k] * zp + c[n - k] * zp.conj();
                }
                acc + c[h] * (h as f64 * y).cos()
            })
            .collect()
    }

    pub fn axpy(&self, a: C64, other: &Field) -> Field {
        self.zip_coeffs(other, |x, y| x + a * y)
    }

    /// Relative distance `|u - v|_0 / max(|v|_0, tiny)`.
    pub fn rel_dist(&self, other: &Field) -> f64 {
        let d = (self - other).l2_norm();
        let r = other.l2_norm();
        if r == 0.0 {
            d
        } else {
            d / r
        }
    }
}

pub fn dealias_coeffs(grid: &Grid, c: &mut [C64]) {
    let cut = grid.n() as f64 / 3.0;
    for (v, &k) in c.iter_mut().zip(grid.wavenumbers()) {
        if k.abs() > cut {
            *v = C64::new(0.0, 0.0);
        }
    }
    c[grid.nyquist()] = C64::new(0.0, 0.0);
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        if self.coeffs.get().is_some() && rhs.coeffs.get().is_some() {
            self.zip_coeffs(rhs, |a, b| a + b)
        } else {
            self.zip_values(rhs, |a, b| a + b)
        }
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        if self.coeffs.get().is_some() && rhs.coeffs.get().is_some() {
            self.zip_coeffs(rhs, |a, b| a - b)
        } else {
            self.zip_values(rhs, |a, b| a - b)
        }
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale_re(-1.0)
    }
}

impl Mul<C64> for &Field {
    type Output = Field;
    fn mul(self, rhs: C64) -> Field {
        self.scale(rhs)
    }
}

/// `int u conj(v) dx` by the rectangle rule.
pub fn l2(u: &Field, v: &Field) -> Result<C64> {
    u.check_grid(v)?;
    Ok(u.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b.conj())
        .sum::<C64>()
        * u.grid().dx())
}

/// Real product of complex-pair fields `int (u conj v + conj u v)`.
pub fn bold_l2(u: &Field, v: &Field) -> Result<f64> {
    Ok(2.0 * l2(u, v)?.re)
}

/// Symplectic form `i int (u conj v - conj u v)`.
pub fn symplectic_w(u: &Field, v: &Field) -> Result<f64> {
    let z = l2(u, v)?;
    // i (z - conj z) = -2 Im z
    Ok(-2.0 * z.im)
}

/// Spectral version of `int u conj v`, via Parseval.
pub fn l2_spectral(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>() * (2.0 * PI)
}

/// Applies a symbol `m(k)` to the coefficients of a field.
pub fn fourier_multiplier(symbol: impl Fn(f64) -> C64, u: &Field) -> Result<Field> {
    for &k in u.grid().wavenumbers() {
        let m = symbol(k);
        if !(m.re.is_finite() && m.im.is_finite()) {
            return Err(Error::Precondition(format!("symbol not finite at k={k}")));
        }
    }
    Ok(u.multiplier(symbol))
}
