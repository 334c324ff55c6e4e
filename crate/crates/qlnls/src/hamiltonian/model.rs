use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;

use super::density::HamiltonianDensity;
use crate::error::{Error, Result};
use crate::spectral::{complex_to_pair, pair_to_complex, Field, Pair};

/// Default spectral-tail threshold (energy fraction beyond `n/3`).
pub const RESOLUTION_TAIL: f64 = 1e-10;

/// Node values of `(u1, u2, d_x u1, d_x u2)` for a real pair.
pub fn composed_arguments(p: &Pair) -> Vec<[f64; 4]> {
    let u1 = p.u1.values();
    let u2 = p.u2.values();
    let d1 = p.u1.dx();
    let d2 = p.u2.dx();
    let d1 = d1.values();
    let d2 = d2.values();
    (0..p.u1.n())
        .map(|j| [u1[j].re, u2[j].re, d1[j].re, d2[j].re])
        .collect()
}

/// Composed gradient fields `d_{y_i} G(x, u1, u2, u1x, u2x)`, dealiased.
pub fn composed_gradient(g: &dyn HamiltonianDensity, p: &Pair) -> [Field; 4] {
    let grid = p.u1.grid();
    let y = composed_arguments(p);
    let x = grid.nodes();
    let mut cols: [Vec<C64>; 4] = Default::default();
    for (j, yj) in y.iter().enumerate() {
        let gr = g.gradient(x[j], yj);
        for i in 0..4 {
            cols[i].push(C64::new(gr[i], 0.0));
        }
    }
    cols.map(|c| Field::from_values(grid, c).dealias())
}

/// Composed Hessian fields `d_{y_i y_j} G`, dealiased.
pub fn composed_hessian(g: &dyn HamiltonianDensity, p: &Pair) -> [[Field; 4]; 4] {
    let grid = p.u1.grid();
    let y = composed_arguments(p);
    let x = grid.nodes();
    let mut cols: Vec<Vec<Vec<C64>>> = vec![vec![Vec::with_capacity(grid.n()); 4]; 4];
    for (j, yj) in y.iter().enumerate() {
        let h = g.hessian(x[j], yj);
        for a in 0..4 {
            for b in 0..4 {
                cols[a][b].push(C64::new(h[a][b], 0.0));
            }
        }
    }
    let mut it = cols.into_iter().map(|row| {
        let mut r = row.into_iter().map(|c| Field::from_values(grid, c).dealias());
        [r.next().unwrap(), r.next().unwrap(), r.next().unwrap(), r.next().unwrap()]
    });
    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
}

/// Rejects fields whose energy beyond the two-thirds band exceeds `tol`.
pub fn check_resolved(u: &Field, tol: f64) -> Result<()> {
    let tail = u.tail_energy(u.n() as f64 / 3.0);
    if tail > tol {
        Err(Error::Resolution(tail))
    } else {
        Ok(())
    }
}

/// Complex nonlinearity `-i (F_{zbar0} - d_x{F_{zbar1}})` in the scalar
/// form `u_t + i u_xx + N(u) = 0`.
pub fn eval_nonlinearity(g: &dyn HamiltonianDensity, u: &Field) -> Result<Field> {
    check_resolved(u, RESOLUTION_TAIL)?;
    Ok(nonlinearity_unchecked(g, u))
}

pub fn nonlinearity_unchecked(g: &dyn HamiltonianDensity, u: &Field) -> Field {
    let p = complex_to_pair(u);
    let [g1, g2, g3, g4] = composed_gradient(g, &p);
    let z0 = g1.zip_values(&g2, |a, b| C64::new(a.re, b.re) / SQRT_2);
    let z1 = g3.zip_values(&g4, |a, b| C64::new(a.re, b.re) / SQRT_2);
    (&z0 - &z1.dx()).scale(C64::new(0.0, -1.0)).dealias()
}

/// Real operator
/// `P(u) = (u1_t - u2_xx + G_2 - d_x{G_4}, u2_t + u1_xx - G_1 + d_x{G_3})`.
pub fn eval_p(g: &dyn HamiltonianDensity, p: &Pair, p_t: &Pair) -> Result<Pair> {
    p.u1.check_grid(&p_t.u1)?;
    let [g1, g2, g3, g4] = composed_gradient(g, p);
    let first = &(&(&p_t.u1 - &p.u2.dxx()) + &g2) - &g4.dx();
    let second = &(&(&p_t.u2 + &p.u1.dxx()) - &g1) + &g3.dx();
    Ok(Pair {
        u1: first.re(),
        u2: second.re(),
    })
}

/// `u_t + i u_xx + N(u)` for complex samples.
pub fn complex_residual(g: &dyn HamiltonianDensity, u: &Field, u_t: &Field) -> Field {
    let lin = u_t + &u.dxx().scale(C64::new(0.0, 1.0));
    &lin + &nonlinearity_unchecked(g, u)
}

/// `H = (1/2) int (u1_x^2 + u2_x^2) + int G`.
pub fn hamiltonian_value(g: &dyn HamiltonianDensity, p: &Pair) -> f64 {
    let grid = p.u1.grid();
    let y = composed_arguments(p);
    let x = grid.nodes();
    let mut acc = 0.0;
    for (j, yj) in y.iter().enumerate() {
        acc += 0.5 * (yj[2] * yj[2] + yj[3] * yj[3]) + g.value(x[j], yj);
    }
    acc * grid.dx()
}

/// Hamiltonian of the complex representative `u = (u1 + i u2)/sqrt 2`.
pub fn hamiltonian_complex(g: &dyn HamiltonianDensity, u: &Field) -> f64 {
    hamiltonian_value(g, &complex_to_pair(u))
}

pub fn pair_of(u: &Field) -> Pair {
    complex_to_pair(u)
}

pub fn complex_of(p: &Pair) -> Field {
    pair_to_complex(p)
}
