//! Pointwise algebra of real-preserving 2x2 matrix fields and conjugation of
//! the operator by multiplication maps.

use num_complex::Complex64 as C64;

use crate::hamiltonian::Coeffs;
use crate::spectral::Field;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Matrix field acting as `h -> p h + q conj h` on the first component.
#[derive(Clone, Debug)]
pub struct Rp {
    pub p: Field,
    pub q: Field,
}

fn mulp(a: &Field, b: &Field) -> Field {
    a.mul_pointwise(b)
}

impl Rp {
    pub fn new(p: Field, q: Field) -> Rp {
        Rp { p, q }
    }

    pub fn identity(grid: &crate::spectral::Grid) -> Rp {
        Rp::new(Field::constant(grid, C64::new(1.0, 0.0)), Field::zeros(grid))
    }

    /// `self o other`.
    pub fn compose(&self, o: &Rp) -> Rp {
        Rp {
            p: &mulp(&self.p, &o.p) + &mulp(&self.q, &o.q.conj()),
            q: &mulp(&self.p, &o.q) + &mulp(&self.q, &o.p.conj()),
        }
    }

    pub fn add(&self, o: &Rp) -> Rp {
        Rp {
            p: &self.p + &o.p,
            q: &self.q + &o.q,
        }
    }

    pub fn scale(&self, s: f64) -> Rp {
        Rp {
            p: self.p.scale_re(s),
            q: self.q.scale_re(s),
        }
    }

    pub fn dx(&self) -> Rp {
        Rp {
            p: self.p.dx(),
            q: self.q.dx(),
        }
    }

    pub fn dxx(&self) -> Rp {
        Rp {
            p: self.p.dxx(),
            q: self.q.dxx(),
        }
    }

    /// Pointwise action on a field.
    pub fn apply(&self, h: &Field) -> Field {
        &mulp(&self.p, h) + &mulp(&self.q, &h.conj())
    }

    /// `det [[p, q], [conj q, conj p]]`, real for these matrices.
    pub fn det(&self) -> Field {
        let pp = mulp(&self.p, &self.p.conj());
        let qq = mulp(&self.q, &self.q.conj());
        &pp - &qq
    }
}

/// The three coefficient matrices multiplied by `i`, principal part including `sigma`.
pub fn to_rp(sigma: f64, c: &Coeffs) -> [Rp; 3] {
    let i = |f: &Field| f.scale(I);
    let sig = c.a2.map_values(|v| v + sigma);
    [
        Rp::new(i(&sig), i(&c.b2)),
        Rp::new(i(&c.a1), i(&c.b1)),
        Rp::new(i(&c.a0), i(&c.b0)),
    ]
}

pub fn from_rp(sigma: f64, e: &[Rp; 3]) -> Coeffs {
    let m = |f: &Field| f.scale(-I);
    Coeffs {
        a2: m(&e[0].p).map_values(|v| v - sigma),
        b2: m(&e[0].q),
        a1: m(&e[1].p),
        b1: m(&e[1].q),
        a0: m(&e[2].p),
        b0: m(&e[2].q),
    }
}

/// Derivatives of the multiplying matrix at one time.
pub struct Multiplier<'a> {
    pub q: &'a Rp,
    pub qinv: &'a Rp,
    pub qt: &'a Rp,
}

/// Coefficients of `Q^{-1} L Q` for `L = d_t + i E2 d_xx + i E1 d_x + i E0`.
pub fn conjugate_coeffs(sigma: f64, c: &Coeffs, m: &Multiplier) -> Coeffs {
    let [e2, e1, e0] = to_rp(sigma, c);
    let qx = m.q.dx();
    let qxx = m.q.dxx();
    let n2 = m.qinv.compose(&e2.compose(m.q));
    let n1 = m.qinv.compose(&e2.compose(&qx).scale(2.0).add(&e1.compose(m.q)));
    let inner = m
        .qt
        .add(&e2.compose(&qxx))
        .add(&e1.compose(&qx))
        .add(&e0.compose(m.q));
    let n0 = m.qinv.compose(&inner);
    from_rp(sigma, &[n2, n1, n0])
}
