use num_complex::Complex64 as C64;

use super::density::HamiltonianDensity;
use super::model::{check_resolved, composed_gradient, composed_hessian, eval_p, RESOLUTION_TAIL};
use crate::error::{Error, Result};
use crate::spectral::time::{d2_dt2, d_dt, interpolate_at, lagrange_weights};
use crate::spectral::{pair_to_complex, Field, Grid, Pair, TimeGrid, Traj};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Real 2x2 coefficient matrices of the linearized real operator,
/// `P'(u)[h] = h_t + J h_xx + p2 h_xx + p1 h_x + p0 h`, together with their
/// complex counterparts `a_k`, `b_k`.
#[derive(Clone, Debug)]
pub struct CoeffSet {
    pub p2: [[Field; 2]; 2],
    pub p1: [[Field; 2]; 2],
    pub p0: [[Field; 2]; 2],
    pub coeffs: Coeffs,
}

/// Complex coefficients at one time: the entries `a_k`, `b_k` generating
/// `A_k = [[a_k, b_k], [-conj b_k, -conj a_k]]`.
#[derive(Clone, Debug)]
pub struct Coeffs {
    pub a2: Field,
    pub b2: Field,
    pub a1: Field,
    pub b1: Field,
    pub a0: Field,
    pub b0: Field,
}

impl Coeffs {
    pub fn zeros(grid: &Grid) -> Coeffs {
        let z = Field::zeros(grid);
        Coeffs {
            a2: z.clone(),
            b2: z.clone(),
            a1: z.clone(),
            b1: z.clone(),
            a0: z.clone(),
            b0: z,
        }
    }

    pub fn fields(&self) -> [&Field; 6] {
        [&self.a2, &self.b2, &self.a1, &self.b1, &self.a0, &self.b0]
    }

    pub fn from_fields(f: [Field; 6]) -> Coeffs {
        let [a2, b2, a1, b1, a0, b0] = f;
        Coeffs { a2, b2, a1, b1, a0, b0 }
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> Coeffs {
        Coeffs::from_fields(self.fields().map(f))
    }

    /// Variable part `i (a2 h_xx + a1 h_x + a0 h + b2 hbar_xx + b1 hbar_x + b0 hbar)`
    /// acting on coefficients `hc`; products are dealiased.
    pub fn apply_var(&self, grid: &Grid, hc: &[C64]) -> Vec<C64> {
        let n = grid.n();
        let k = grid.wavenumbers();
        let ny = grid.nyquist();
        let mut h = hc.to_vec();
        let mut hx: Vec<C64> = hc
            .iter()
            .zip(k)
            .enumerate()
            .map(|(j, (c, &kk))| if j == ny { C64::new(0.0, 0.0) } else { c * C64::new(0.0, kk) })
            .collect();
        let mut hxx: Vec<C64> = hc.iter().zip(k).map(|(c, &kk)| c * (-kk * kk)).collect();
        grid.inverse_in_place(&mut h);
        grid.inverse_in_place(&mut hx);
        grid.inverse_in_place(&mut hxx);
        let a2 = self.a2.values();
        let b2 = self.b2.values();
        let a1 = self.a1.values();
        let b1 = self.b1.values();
        let a0 = self.a0.values();
        let b0 = self.b0.values();
        let mut out: Vec<C64> = (0..n)
            .map(|j| {
                I * (a2[j] * hxx[j]
                    + a1[j] * hx[j]
                    + a0[j] * h[j]
                    + b2[j] * hxx[j].conj()
                    + b1[j] * hx[j].conj()
                    + b0[j] * h[j].conj())
            })
            .collect();
        grid.forward_in_place(&mut out);
        crate::spectral::dealias_coeffs(grid, &mut out);
        out
    }

    pub fn sup(&self) -> f64 {
        self.fields().iter().fold(0.0, |m, f| m.max(f.sup_norm()))
    }
}

/// `L = d_t + i (sigma Sigma + A2) d_xx + i A1 d_x + i A0` with time-sampled
/// coefficients, acting on the first component of `(h, conj h)`.
#[derive(Clone, Debug)]
pub struct OperatorL {
    pub grid: Grid,
    pub times: TimeGrid,
    pub sigma: f64,
    pub coeffs: Vec<Coeffs>,
    pub hamiltonian_checked: bool,
    pub tracked: Vec<NormRecord>,
}

/// Norm trackers recorded at linearization.
#[derive(Clone, Copy, Debug)]
pub struct NormRecord {
    pub s: f64,
    pub n_t: f64,
    pub m_t: f64,
}

impl OperatorL {
    pub fn free(grid: &Grid, times: TimeGrid, sigma: f64) -> OperatorL {
        OperatorL {
            grid: grid.clone(),
            times,
            sigma,
            coeffs: (0..times.n_t).map(|_| Coeffs::zeros(grid)).collect(),
            hamiltonian_checked: false,
            tracked: Vec::new(),
        }
    }

    pub fn new(grid: &Grid, times: TimeGrid, sigma: f64, coeffs: Vec<Coeffs>) -> Result<OperatorL> {
        if coeffs.len() != times.n_t {
            return Err(Error::Precondition("one coefficient set per time sample required".into()));
        }
        Ok(OperatorL {
            grid: grid.clone(),
            times,
            sigma,
            coeffs,
            hamiltonian_checked: false,
            tracked: Vec::new(),
        })
    }

    /// Spatial part at sample `i`, coefficient in, coefficient out.
    pub fn apply_spatial_coeffs(&self, c: &Coeffs, hc: &[C64]) -> Vec<C64> {
        let mut out = c.apply_var(&self.grid, hc);
        for ((o, h), &k) in out.iter_mut().zip(hc).zip(self.grid.wavenumbers()) {
            *o += I * self.sigma * (-k * k) * h;
        }
        out
    }

    pub fn apply_spatial(&self, i: usize, h: &Field) -> Field {
        Field::from_coeffs(&self.grid, self.apply_spatial_coeffs(&self.coeffs[i], h.coeffs()))
    }

    /// `L h` on the sample grid; the time derivative uses the stencil in the
    /// frame of the free flow with speed `frame`.
    pub fn apply(&self, h: &Traj, frame: f64) -> Traj {
        let ht = h.frame_d_dt(frame);
        ht.map(|i, d| d + &self.apply_spatial(i, &h.samples[i]))
    }

    /// Coefficients interpolated at an arbitrary time.
    pub fn coeffs_at(&self, t: f64) -> Coeffs {
        let w = lagrange_weights(&self.times, t);
        let comb = |pick: fn(&Coeffs) -> &Field| {
            let mut v = vec![C64::new(0.0, 0.0); self.grid.n()];
            for &(j, wj) in &w {
                for (s, x) in v.iter_mut().zip(pick(&self.coeffs[j]).values()) {
                    *s += x * wj;
                }
            }
            Field::from_values(&self.grid, v)
        };
        Coeffs {
            a2: comb(|c| &c.a2),
            b2: comb(|c| &c.b2),
            a1: comb(|c| &c.a1),
            b1: comb(|c| &c.b1),
            a0: comb(|c| &c.a0),
            b0: comb(|c| &c.b0),
        }
    }

    /// Operator for `H(s) = h(T - s)`: `L h = g` becomes `L_rev H = -g(T - s)`.
    pub fn time_reversed(&self) -> OperatorL {
        OperatorL {
            grid: self.grid.clone(),
            times: self.times,
            sigma: -self.sigma,
            coeffs: self
                .coeffs
                .iter()
                .rev()
                .map(|c| c.map(|f| f.scale_re(-1.0)))
                .collect(),
            hamiltonian_checked: self.hamiltonian_checked,
            tracked: Vec::new(),
        }
    }

    pub fn sup_order2(&self) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0, |m, c| m.max(c.a2.sup_norm()).max(c.b2.sup_norm()))
    }

    pub fn sup_coeffs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.sup()))
    }

    pub fn is_free(&self) -> bool {
        self.sup_coeffs() == 0.0
    }

    fn series(&self, pick: fn(&Coeffs) -> &Field) -> Vec<Vec<C64>> {
        self.coeffs.iter().map(|c| pick(c).coeffs().to_vec()).collect()
    }

    /// `N_T(s)`: sup in time of the largest `H^s` norm among
    /// `a2, a2_t, a2_tt, a1, a1_t, a0`, plus the same for
    /// `b2, b2_t, b1, b1_t, b0`.
    pub fn n_t(&self, s: f64) -> f64 {
        let dt = self.times.dt();
        let norm = |c: &[C64]| Field::from_coeffs(&self.grid, c.to_vec()).sobolev_norm(s);
        let sup = |series: &[Vec<C64>]| series.iter().fold(0.0, |m: f64, c| m.max(norm(c)));
        let a2 = self.series(|c| &c.a2);
        let a1 = self.series(|c| &c.a1);
        let a0 = self.series(|c| &c.a0);
        let b2 = self.series(|c| &c.b2);
        let b1 = self.series(|c| &c.b1);
        let b0 = self.series(|c| &c.b0);
        let ga = [
            sup(&a2),
            sup(&d_dt(&a2, dt)),
            sup(&d2_dt2(&a2, dt)),
            sup(&a1),
            sup(&d_dt(&a1, dt)),
            sup(&a0),
        ];
        let gb = [sup(&b2), sup(&d_dt(&b2, dt)), sup(&b1), sup(&d_dt(&b1, dt)), sup(&b0)];
        ga.iter().fold(0.0f64, |m, v| m.max(*v)) + gb.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Coefficient value at sample `i` interpolated in time for a field series.
    pub fn interpolate_series(&self, series: &[Vec<C64>], t: f64) -> Vec<C64> {
        interpolate_at(&self.times, series, t)
    }
}

/// Coefficients at one time from the composed Hessian.
pub fn linearize_at(g: &dyn HamiltonianDensity, p: &Pair) -> CoeffSet {
    let h = composed_hessian(g, p);
    let d = |f: &Field| f.dx();
    // index map: y1..y4 -> 0..3
    let p2 = [
        [h[2][3].scale_re(-1.0), h[3][3].scale_re(-1.0)],
        [h[2][2].clone(), h[2][3].clone()],
    ];
    let p1 = [
        [&(&h[1][2] - &h[0][3]) - &d(&h[2][3]), d(&h[3][3]).scale_re(-1.0)],
        [d(&h[2][2]), &(&h[1][2] - &h[0][3]) + &d(&h[2][3])],
    ];
    let p0 = [
        [&h[0][1] - &d(&h[0][3]), &h[1][1] - &d(&h[1][3])],
        [&d(&h[0][2]) - &h[0][0], &d(&h[1][2]) - &h[0][1]],
    ];
    let to_ab = |m: &[[Field; 2]; 2]| -> (Field, Field) {
        let v11 = m[0][0].values();
        let v12 = m[0][1].values();
        let v21 = m[1][0].values();
        let v22 = m[1][1].values();
        let grid = m[0][0].grid();
        let a: Vec<C64> = (0..grid.n())
            .map(|j| 0.5 * (-I * v11[j] - v12[j] + v21[j] - I * v22[j]))
            .collect();
        let b: Vec<C64> = (0..grid.n())
            .map(|j| 0.5 * (-I * v11[j] + v12[j] + v21[j] + I * v22[j]))
            .collect();
        (Field::from_values(grid, a), Field::from_values(grid, b))
    };
    let (a2, b2) = to_ab(&p2);
    let (a1, b1) = to_ab(&p1);
    let (a0, b0) = to_ab(&p0);
    CoeffSet {
        p2,
        p1,
        p0,
        coeffs: Coeffs { a2, b2, a1, b1, a0, b0 },
    }
}

/// Linearized operator along a real trajectory.
pub fn linearize(g: &dyn HamiltonianDensity, u: &Traj<Pair>) -> Result<OperatorL> {
    linearize_with_tol(g, u, RESOLUTION_TAIL)
}

pub fn linearize_with_tol(g: &dyn HamiltonianDensity, u: &Traj<Pair>, tail_tol: f64) -> Result<OperatorL> {
    let grid = u.first().u1.grid().clone();
    for p in &u.samples {
        check_resolved(&pair_to_complex(p), tail_tol)?;
    }
    let coeffs = u.samples.iter().map(|p| linearize_at(g, p).coeffs).collect();
    let mut op = OperatorL::new(&grid, u.times, 1.0, coeffs)?;
    let complex = Traj::new(u.times, u.samples.iter().map(pair_to_complex).collect())?;
    op.tracked = [0.0, 1.0, 2.0]
        .iter()
        .map(|&s| NormRecord {
            s,
            n_t: op.n_t(s),
            m_t: m_t(&complex, s),
        })
        .collect();
    Ok(op)
}

/// Linearization along a complex trajectory `u = (u1 + i u2)/sqrt 2`.
pub fn linearize_complex(g: &dyn HamiltonianDensity, u: &Traj, tail_tol: f64) -> Result<OperatorL> {
    let pairs = Traj::new(u.times, u.samples.iter().map(crate::spectral::complex_to_pair).collect())?;
    linearize_with_tol(g, &pairs, tail_tol)
}

/// `M_T(s)`: largest over components of
/// `sup_t (|u_k|_{s+4} + |d_t u_k|_{s+2} + |d_tt u_k|_s)`.
pub fn m_t(u: &Traj, s: f64) -> f64 {
    let ut = u.frame_d_dt(1.0);
    let utt = u.frame_d2_dt2(1.0);
    let mut best: f64 = 0.0;
    for comp in 0..2 {
        let part = |f: &Field| {
            crate::spectral::complex_to_pair(f)
        };
        let mut sup: f64 = 0.0;
        for i in 0..u.len() {
            let a = part(&u.samples[i]);
            let b = part(&ut.samples[i]);
            let c = part(&utt.samples[i]);
            let pick = |p: &Pair| if comp == 0 { p.u1.clone() } else { p.u2.clone() };
            let v = pick(&a).sobolev_norm(s + 4.0) + pick(&b).sobolev_norm(s + 2.0) + pick(&c).sobolev_norm(s);
            sup = sup.max(v);
        }
        best = best.max(sup);
    }
    best
}

/// Sup-norm residuals of the four relations of the Hamiltonian structure.
#[derive(Clone, Debug)]
pub struct StructureReport {
    pub a2_real: f64,
    pub a1_relation: f64,
    pub a0_relation: f64,
    pub b1_relation: f64,
}

impl StructureReport {
    pub fn max(&self) -> f64 {
        self.a2_real
            .max(self.a1_relation)
            .max(self.a0_relation)
            .max(self.b1_relation)
    }

    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("a2 real", self.a2_real),
            ("a1 = 2 d_x a2 - conj a1", self.a1_relation),
            ("a0 = conj a0 + d_xx a2 - d_x conj a1", self.a0_relation),
            ("b1 = d_x b2", self.b1_relation),
        ]
    }
}

pub const STRUCTURE_TOL: f64 = 1e-8;

/// Residuals of the structure relations, without failing.
pub fn structure_residuals(l: &OperatorL) -> StructureReport {
    let mut r = StructureReport {
        a2_real: 0.0,
        a1_relation: 0.0,
        a0_relation: 0.0,
        b1_relation: 0.0,
    };
    for c in &l.coeffs {
        r.a2_real = r.a2_real.max(c.a2.max_imag());
        let rel1 = &(&c.a1 - &c.a2.dx().scale_re(2.0)) + &c.a1.conj();
        r.a1_relation = r.a1_relation.max(rel1.sup_norm());
        let rel0 = &(&(&c.a0 - &c.a0.conj()) - &c.a2.dxx()) + &c.a1.conj().dx();
        r.a0_relation = r.a0_relation.max(rel0.sup_norm());
        r.b1_relation = r.b1_relation.max((&c.b1 - &c.b2.dx()).sup_norm());
    }
    r
}

/// Asserts the structure relations to `1e-8` and marks the operator checked.
pub fn check_hamiltonian_structure(l: &mut OperatorL) -> Result<StructureReport> {
    let r = structure_residuals(l);
    for (name, v) in r.entries() {
        if v > STRUCTURE_TOL || !v.is_finite() {
            return Err(Error::Structure {
                relation: name.to_string(),
                residual: v,
            });
        }
    }
    l.hamiltonian_checked = true;
    Ok(r)
}

/// `P'(p)[h]` without the time derivative, from the real coefficient matrices.
pub fn apply_real_linearization(cs: &CoeffSet, h: &Pair) -> Pair {
    let hx = [h.u1.dx(), h.u2.dx()];
    let hxx = [h.u1.dxx(), h.u2.dxx()];
    let hv = [h.u1.clone(), h.u2.clone()];
    let row = |r: usize| {
        let mut acc = Field::zeros(h.u1.grid());
        for c in 0..2 {
            acc = &acc + &cs.p2[r][c].mul(&hxx[c]);
            acc = &acc + &cs.p1[r][c].mul(&hx[c]);
            acc = &acc + &cs.p0[r][c].mul(&hv[c]);
        }
        acc
    };
    let first = &row(0) - &h.u2.dxx();
    let second = &row(1) + &h.u1.dxx();
    Pair {
        u1: first.re(),
        u2: second.re(),
    }
}

/// Finite-difference validation of the linearization.
#[derive(Clone, Debug)]
pub struct DirectionalReport {
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `|(P(p + eps h) - P(p))/eps - P'(p)[h]|_0 / |h|_2` for `eps in {1e-3, 1e-4, 1e-5}`.
pub fn directional_derivative_check(g: &dyn HamiltonianDensity, p: &Pair, h: &Pair) -> Result<DirectionalReport> {
    let zero = Pair::zeros(p.u1.grid());
    let hn = h.u1.sobolev_norm(2.0) + h.u2.sobolev_norm(2.0);
    let eps = vec![1e-3, 1e-4, 1e-5];
    if hn == 0.0 {
        return Ok(DirectionalReport {
            ratios: vec![0.0; 3],
            eps,
            max_ratio: 0.0,
        });
    }
    let cs = linearize_at(g, p);
    let lin = apply_real_linearization(&cs, h);
    let base = eval_p(g, p, &zero)?;
    let mut ratios = Vec::new();
    for &e in &eps {
        let pe = p.add(&h.scale(e));
        let pp = eval_p(g, &pe, &zero)?;
        let q = pp.sub(&base).scale(1.0 / e).sub(&lin);
        ratios.push((q.u1.sobolev_norm(0.0) + q.u2.sobolev_norm(0.0)) / hn);
    }
    let max_ratio = ratios.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(DirectionalReport { eps, ratios, max_ratio })
}

/// Gradient fields re-exported for callers assembling custom operators.
pub fn gradient_fields(g: &dyn HamiltonianDensity, p: &Pair) -> [Field; 4] {
    composed_gradient(g, p)
}
