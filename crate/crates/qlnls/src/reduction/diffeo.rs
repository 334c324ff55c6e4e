//! Time-dependent diffeomorphisms of the circle `x -> x + alpha(t, x)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

pub const MAX_FIXED_POINT_ITERS: usize = 200;
pub const FIXED_POINT_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct DiffeoT {
    pub alpha: Vec<Field>,
    pub alpha_inv: Vec<Field>,
}

/// Values of `f(y + a(y))` at the nodes, by trigonometric interpolation.
pub fn compose(f: &Field, a: &Field) -> Field {
    let grid = f.grid();
    let av = a.values();
    let pts: Vec<f64> = (0..grid.n()).map(|j| grid.node(j) + av[j].re).collect();
    Field::from_values(grid, f.interpolate(&pts))
}

pub fn check_invertible(alpha: &Field) -> Result<f64> {
    let s = alpha.dx().sup_norm();
    if s > 0.5 {
        Err(Error::Invertibility(format!("sup |d_x alpha| = {s:.3e} exceeds 1/2")))
    } else {
        Ok(s)
    }
}

/// Fixed point of `b(y) = -alpha(y + b(y))`.
pub fn invert_diffeo(alpha: &Field) -> Result<Field> {
    check_invertible(alpha)?;
    let mut b = alpha.re().scale_re(-1.0);
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let next = compose(alpha, &b).re().scale_re(-1.0);
        let change = (&next - &b).sup_norm();
        b = next;
        if change <= FIXED_POINT_TOL * (1.0 + b.sup_norm()) {
            return Ok(b);
        }
    }
    Err(Error::Contraction(format!(
        "diffeomorphism inverse did not converge in {MAX_FIXED_POINT_ITERS} iterations"
    )))
}

/// `sup |b(y) + alpha(y + b(y))|`.
pub fn composition_residual(alpha: &Field, alpha_inv: &Field) -> f64 {
    (&compose(alpha, alpha_inv) + alpha_inv).sup_norm()
}

/// `sup |(1 + alpha_x(y + b)) (1 + b_y) - 1|`.
pub fn derivative_identity_residual(alpha: &Field, alpha_inv: &Field) -> f64 {
    let ax = compose(&alpha.dx(), alpha_inv);
    let bx = alpha_inv.dx();
    ax.zip_values(&bx, |a, b| (1.0 + a) * (1.0 + b) - 1.0).sup_norm()
}

fn weight(a: &Field) -> Field {
    a.dx().map_values(|v| C64::new((1.0 + v.re).sqrt(), 0.0))
}

/// `sqrt(1 + alpha_x) u(x + alpha)`.
pub fn apply_a(alpha: &Field, u: &Field) -> Field {
    weight(alpha).mul_pointwise(&compose(u, alpha))
}

/// Inverse map, `sqrt(1 + b_y) u(y + b)` with `b` the inverse displacement.
pub fn apply_a_inv(alpha_inv: &Field, u: &Field) -> Field {
    apply_a(alpha_inv, u)
}

impl DiffeoT {
    pub fn identity(grid: &Grid, n_t: usize) -> DiffeoT {
        DiffeoT {
            alpha: vec![Field::zeros(grid); n_t],
            alpha_inv: vec![Field::zeros(grid); n_t],
        }
    }

    pub fn apply(&self, i: usize, u: &Field) -> Field {
        apply_a(&self.alpha[i], u)
    }

    pub fn apply_inv(&self, i: usize, u: &Field) -> Field {
        apply_a_inv(&self.alpha_inv[i], u)
    }

    pub fn max_composition_residual(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.alpha_inv)
            .fold(0.0, |m, (a, b)| m.max(composition_residual(a, b)))
    }
}
