use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;

use super::field::Field;
use crate::error::{Error, Result};

/// Real pair `(u1, u2)`.
#[derive(Clone, Debug)]
pub struct Pair {
    pub u1: Field,
    pub u2: Field,
}

/// Complex field `u` standing for the pair `(u, conj u)`.
#[derive(Clone, Debug)]
pub struct BoldField {
    pub u: Field,
}

const REAL_TOL: f64 = 1e-12;

impl Pair {
    /// Builds a pair, checking both fields are real to `1e-12` of their norm.
    pub fn new(u1: Field, u2: Field) -> Result<Pair> {
        u1.check_grid(&u2)?;
        for f in [&u1, &u2] {
            let im = f.max_imag();
            if im > REAL_TOL * f.sup_norm().max(1.0) {
                return Err(Error::NotReal(im));
            }
        }
        Ok(Pair {
            u1: u1.re(),
            u2: u2.re(),
        })
    }

    pub fn zeros(grid: &crate::spectral::Grid) -> Pair {
        Pair {
            u1: Field::zeros(grid),
            u2: Field::zeros(grid),
        }
    }

    /// `|u1|_s + |u2|_s`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.u1.sobolev_norm(s) + self.u2.sobolev_norm(s)
    }

    /// Real product `int (u1 v1 + u2 v2)`.
    pub fn real_l2(&self, other: &Pair) -> Result<f64> {
        Ok(crate::spectral::l2(&self.u1, &other.u1)?.re + crate::spectral::l2(&self.u2, &other.u2)?.re)
    }

    pub fn add(&self, o: &Pair) -> Pair {
        Pair {
            u1: &self.u1 + &o.u1,
            u2: &self.u2 + &o.u2,
        }
    }

    pub fn sub(&self, o: &Pair) -> Pair {
        Pair {
            u1: &self.u1 - &o.u1,
            u2: &self.u2 - &o.u2,
        }
    }

    pub fn scale(&self, s: f64) -> Pair {
        Pair {
            u1: self.u1.scale_re(s),
            u2: self.u2.scale_re(s),
        }
    }
}

impl BoldField {
    pub fn new(u: Field) -> BoldField {
        BoldField { u }
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.u.sobolev_norm(s)
    }
}

/// `(h, conj h) = C^{-1}(u1, u2)`, i.e. `h = (u1 + i u2)/sqrt 2`.
pub fn c_transform(p: &Pair) -> Result<BoldField> {
    let p = Pair::new(p.u1.clone(), p.u2.clone())?;
    Ok(BoldField {
        u: p.u1.zip_values(&p.u2, |a, b| (a + C64::i() * b) / SQRT_2),
    })
}

/// `(u1, u2) = C(h, conj h)` with `C = (1/sqrt 2)[[1, 1], [-i, i]]`.
pub fn c_inverse(b: &BoldField) -> Pair {
    Pair {
        u1: b.u.map_values(|v| C64::new(SQRT_2 * v.re, 0.0)),
        u2: b.u.map_values(|v| C64::new(SQRT_2 * v.im, 0.0)),
    }
}

/// Complex scalar representative of a real pair without the realness check.
pub fn pair_to_complex(p: &Pair) -> Field {
    p.u1.zip_values(&p.u2, |a, b| C64::new(a.re, b.re) / SQRT_2)
}

pub fn complex_to_pair(h: &Field) -> Pair {
    c_inverse(&BoldField { u: h.clone() })
}
