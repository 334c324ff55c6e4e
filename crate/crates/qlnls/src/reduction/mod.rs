//! Reduction of the linearized operator to `d_t + i mu Sigma d_xx + R` by five
//! successive changes of variables, with the forward and inverse conjugator
//! chains and their diagnostics.

pub mod conj;
pub mod diffeo;
pub mod reparam;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{structure_residuals, Coeffs, OperatorL, StructureReport, STRUCTURE_TOL};
use crate::spectral::time::{cumulative_integral, d_dt, interpolate_at};
use crate::spectral::{bold_l2, symplectic_w, Field, Grid, TimeGrid, Traj};
use conj::{conjugate_coeffs, Multiplier, Rp};
pub use diffeo::{apply_a, apply_a_inv, compose, invert_diffeo, DiffeoT};
pub use reparam::TimeReparam;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default gate on `N_T(1)` before reducing.
pub const ETA_NUM: f64 = 0.1;
/// Imaginary parts of quantities that must be real are discarded below this.
pub const REALNESS_TOL: f64 = 1e-10;

fn real_values(f: &Field) -> Vec<f64> {
    f.values().iter().map(|v| v.re).collect()
}

fn series_values(fs: &[Field]) -> Vec<Vec<C64>> {
    fs.iter().map(|f| f.values().to_vec()).collect()
}

fn fields_from_values(grid: &Grid, vs: Vec<Vec<C64>>) -> Vec<Field> {
    vs.into_iter().map(|v| Field::from_values(grid, v)).collect()
}

fn spatial_variance(f: &Field) -> f64 {
    let m = f.values().iter().sum::<C64>() / f.n() as f64;
    f.values().iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / f.n() as f64
}

/// Symmetrization output.
#[derive(Clone, Debug)]
pub struct Symmetrizer {
    pub s: Vec<Rp>,
    pub s_inv: Vec<Rp>,
    pub lambda: Vec<Field>,
    /// `sup |b1|` after the step, before it is carried on.
    pub b1_residual: f64,
}

/// Removes the off-diagonal second-order term.
pub fn symmetrize(l: &OperatorL) -> Result<(Symmetrizer, OperatorL)> {
    let grid = &l.grid;
    let sigma = l.sigma;
    let n_t = l.times.n_t;
    let mut s_ser = Vec::with_capacity(n_t);
    let mut c_ser = Vec::with_capacity(n_t);
    let mut lambdas = Vec::with_capacity(n_t);
    for c in &l.coeffs {
        let a2 = c.a2.values();
        let b2 = c.b2.values();
        let mut sv = Vec::with_capacity(grid.n());
        let mut cv = Vec::with_capacity(grid.n());
        let mut lv = Vec::with_capacity(grid.n());
        for j in 0..grid.n() {
            let d = sigma + a2[j].re;
            let disc = d * d - b2[j].norm_sqr();
            if disc < 0.25 {
                return Err(Error::Degeneracy(format!(
                    "(1 + a2)^2 - |b2|^2 = {disc:.3e} below 1/4"
                )));
            }
            let lam = disc.sqrt();
            let dd = ((d + lam) * (d + lam) - b2[j].norm_sqr()).sqrt();
            sv.push(C64::new((d + lam) / dd, 0.0));
            cv.push(-b2[j] / dd);
            lv.push(C64::new(lam, 0.0));
        }
        s_ser.push(sv);
        c_ser.push(cv);
        lambdas.push(Field::from_values(grid, lv));
    }
    let st = fields_from_values(grid, d_dt(&s_ser, l.times.dt()));
    let ct = fields_from_values(grid, d_dt(&c_ser, l.times.dt()));
    let s_f = fields_from_values(grid, s_ser);
    let c_f = fields_from_values(grid, c_ser);
    let mut s = Vec::with_capacity(n_t);
    let mut s_inv = Vec::with_capacity(n_t);
    let mut coeffs = Vec::with_capacity(n_t);
    let mut b1_res: f64 = 0.0;
    for i in 0..n_t {
        let q = Rp::new(s_f[i].clone(), c_f[i].clone());
        let qinv = Rp::new(s_f[i].clone(), c_f[i].scale_re(-1.0));
        let qt = Rp::new(st[i].clone(), ct[i].clone());
        let mut nc = conjugate_coeffs(
            sigma,
            &l.coeffs[i],
            &Multiplier {
                q: &q,
                qinv: &qinv,
                qt: &qt,
            },
        );
        nc.a2 = lambdas[i].map_values(|v| v - sigma);
        nc.b2 = Field::zeros(grid);
        b1_res = b1_res.max(nc.b1.sup_norm());
        coeffs.push(nc);
        s.push(q);
        s_inv.push(qinv);
    }
    let l0 = OperatorL::new(grid, l.times, sigma, coeffs)?;
    Ok((
        Symmetrizer {
            s,
            s_inv,
            lambda: lambdas,
            b1_residual: b1_res,
        },
        l0,
    ))
}

/// `m2 = ((1/2pi) int d^{-1/2})^{-2}` and
/// `alpha = d_x^{-1}(m2^{1/2} d^{-1/2} - 1)` for the principal symbol `d`.
pub fn homological_space(d: &Field) -> Result<(f64, Field)> {
    let dv = real_values(d);
    if let Some(bad) = dv.iter().find(|v| **v < 0.25) {
        return Err(Error::Degeneracy(format!("principal coefficient {bad:.3e} below 1/4")));
    }
    let mean = dv.iter().map(|v| v.powf(-0.5)).sum::<f64>() / dv.len() as f64;
    let m2 = mean.powi(-2);
    let g = Field::from_real_values(d.grid(), &dv.iter().map(|v| m2.sqrt() * v.powf(-0.5) - 1.0).collect::<Vec<_>>());
    Ok((m2, g.dx_inv().re()))
}

/// Removes the space dependence of the principal coefficient.
pub fn straighten_space(l0: &OperatorL) -> Result<(DiffeoT, Vec<f64>, OperatorL)> {
    let grid = &l0.grid;
    let sigma = l0.sigma;
    let n_t = l0.times.n_t;
    let mut m2 = Vec::with_capacity(n_t);
    let mut alpha = Vec::with_capacity(n_t);
    let mut alpha_inv = Vec::with_capacity(n_t);
    for c in &l0.coeffs {
        let d = c.a2.map_values(|v| C64::new(v.re + sigma, 0.0));
        let (m, a) = homological_space(&d)?;
        let b = invert_diffeo(&a)?;
        m2.push(m);
        alpha.push(a);
        alpha_inv.push(b);
    }
    let at = fields_from_values(grid, d_dt(&series_values(&alpha), l0.times.dt()));
    let mut coeffs = Vec::with_capacity(n_t);
    for i in 0..n_t {
        let c = &l0.coeffs[i];
        let a = &alpha[i];
        let b = &alpha_inv[i];
        let comp = |f: &Field| compose(f, b);
        let ax = a.dx();
        let axx = ax.dx();
        let axxx = axx.dx();
        let big_p2 = comp(&ax.map_values(|v| (1.0 + v) * (1.0 + v)));
        let big_p1 = comp(&axx.scale_re(2.0));
        let big_p0 = comp(&Field::from_values(
            grid,
            (0..grid.n())
                .map(|j| {
                    let (x1, x2, x3) = (ax.values()[j], axx.values()[j], axxx.values()[j]);
                    (2.0 * x3 * (1.0 + x1) - x2 * x2) / (4.0 * (1.0 + x1) * (1.0 + x1))
                })
                .collect(),
        ));
        let small_p = comp(&ax.map_values(|v| 1.0 + v));
        let small_q = comp(&axx.zip_values(&ax, |x2, x1| x2 / (2.0 * (1.0 + x1))));
        let d2 = c.a2.map_values(|v| v + sigma);
        let ad2 = comp(&d2);
        let ab2 = comp(&c.b2);
        let aa1 = comp(&c.a1);
        let ab1 = comp(&c.b1);
        let aat = comp(&at[i]);
        let aaxt = comp(&at[i].dx().zip_values(&ax, |xt, x1| xt / (2.0 * (1.0 + x1))));
        let m = |f: &Field, g: &Field| f.mul_pointwise(g);
        let new_d2 = m(&ad2, &big_p2);
        let a1 = &(&m(&ad2, &big_p1) + &m(&aa1, &small_p)) - &aat.scale(I);
        let a0 = &(&(&m(&ad2, &big_p0) + &m(&aa1, &small_q)) + &comp(&c.a0)) - &aaxt.scale(I);
        let b2 = m(&ab2, &big_p2);
        let b1 = &m(&ab2, &big_p1) + &m(&ab1, &small_p);
        let b0 = &(&m(&ab2, &big_p0) + &m(&ab1, &small_q)) + &comp(&c.b0);
        coeffs.push(Coeffs {
            a2: new_d2.map_values(|v| v - sigma),
            b2,
            a1,
            b1,
            a0,
            b0,
        });
    }
    let l1 = OperatorL::new(grid, l0.times, sigma, coeffs)?;
    Ok((DiffeoT { alpha, alpha_inv }, m2, l1))
}

/// Reparametrizes time so that the principal coefficient becomes `mu`.
pub fn reparam_time(l1: &OperatorL, m2: &[f64]) -> Result<(TimeReparam, OperatorL)> {
    let r = TimeReparam::new(l1.times, m2.to_vec())?;
    let mu = r.mu;
    let sigma = l1.sigma;
    let coeffs = (0..l1.times.n_t)
        .map(|i| {
            let c = l1.coeffs_at(r.beta_inv[i]);
            let inv = 1.0 / r.rho[i];
            Coeffs {
                a2: c.a2.map_values(|v| (v + sigma) * inv - mu),
                b2: c.b2.scale_re(inv),
                a1: c.a1.scale_re(inv),
                b1: c.b1.scale_re(inv),
                a0: c.a0.scale_re(inv),
                b0: c.b0.scale_re(inv),
            }
        })
        .collect();
    let l2 = OperatorL::new(&l1.grid, l1.times, mu, coeffs)?;
    Ok((r, l2))
}

/// Translation speed `p' = -i mean(a1)` and its integral.
pub fn translation_speed(l2: &OperatorL) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pd = Vec::with_capacity(l2.times.n_t);
    for c in &l2.coeffs {
        let m = c.a1.mean();
        if m.re.abs() > 1e-8 {
            return Err(Error::Structure {
                relation: "mean of a1 purely imaginary".into(),
                residual: m.re.abs(),
            });
        }
        pd.push(m.im);
    }
    let p = cumulative_integral(&pd, l2.times.dt());
    Ok((pd, p))
}

/// Removes the space average of the first-order coefficient.
pub fn translate_space(l2: &OperatorL) -> Result<(Vec<f64>, Vec<f64>, OperatorL)> {
    let (pd, p) = translation_speed(l2)?;
    let coeffs = l2
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut n = c.map(|f| f.shift(-p[i]));
            n.a1 = n.a1.map_values(|v| v - I * pd[i]);
            n
        })
        .collect();
    let l3 = OperatorL::new(&l2.grid, l2.times, l2.sigma, coeffs)?;
    Ok((p, pd, l3))
}

/// `v = exp(-d_x^{-1} a1 / (2 mu))`.
pub fn order_one_multiplier(a1: &Field, mu: f64) -> Field {
    a1.dx_inv().scale_re(-0.5 / mu).map_values(|z| z.exp())
}

/// Removes the first-order term entirely.
pub fn eliminate_order_one(l3: &OperatorL) -> Result<(Vec<Field>, OperatorL)> {
    let grid = &l3.grid;
    let mu = l3.sigma;
    for c in &l3.coeffs {
        let m = c.a1.mean().norm();
        if m > 1e-9 {
            return Err(Error::Precondition(format!("first-order coefficient has mean {m:.3e}")));
        }
    }
    let v: Vec<Field> = l3.coeffs.iter().map(|c| order_one_multiplier(&c.a1, mu)).collect();
    let vt = fields_from_values(grid, d_dt(&series_values(&v), l3.times.dt()));
    let coeffs = (0..l3.times.n_t)
        .map(|i| {
            let q = Rp::new(v[i].clone(), Field::zeros(grid));
            let qinv = Rp::new(v[i].map_values(|z| 1.0 / z), Field::zeros(grid));
            let qt = Rp::new(vt[i].clone(), Field::zeros(grid));
            conjugate_coeffs(
                mu,
                &l3.coeffs[i],
                &Multiplier {
                    q: &q,
                    qinv: &qinv,
                    qt: &qt,
                },
            )
        })
        .collect();
    let l4 = OperatorL::new(grid, l3.times, mu, coeffs)?;
    Ok((v, l4))
}

/// Everything produced by the five reduction steps.
#[derive(Clone, Debug)]
pub struct ReductionData {
    pub grid: Grid,
    pub times: TimeGrid,
    pub sym: Symmetrizer,
    pub diffeo: DiffeoT,
    pub reparam: TimeReparam,
    pub p: Vec<f64>,
    pub p_dot: Vec<f64>,
    pub v: Vec<Field>,
    pub r1: Vec<Field>,
    pub r2: Vec<Field>,
    pub mu: f64,
    pub stages: Vec<OperatorL>,
    pub structure: Vec<StructureReport>,
}

#[derive(Clone, Copy, Debug)]
pub struct ReduceOptions {
    pub eta: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { eta: ETA_NUM }
    }
}

pub fn full_reduce(l: &OperatorL) -> Result<ReductionData> {
    full_reduce_with(l, ReduceOptions::default())
}

pub fn full_reduce_with(l: &OperatorL, opts: ReduceOptions) -> Result<ReductionData> {
    if l.sigma <= 0.0 {
        return Err(Error::Precondition("principal coefficient must be positive".into()));
    }
    let nt1 = l.n_t(1.0);
    if nt1 > opts.eta {
        return Err(Error::Smallness(format!(
            "N_T(1) = {nt1:.3e} exceeds the gate {:.3e}",
            opts.eta
        )));
    }
    let input = structure_residuals(l);
    for (name, v) in input.entries() {
        if v > STRUCTURE_TOL {
            return Err(Error::Structure {
                relation: name.into(),
                residual: v,
            });
        }
    }
    let (sym, mut l0) = symmetrize(l)?;
    let (diffeo, m2, mut l1) = straighten_space(&l0)?;
    let (reparam, mut l2) = reparam_time(&l1, &m2)?;
    let (p, p_dot, mut l3) = translate_space(&l2)?;
    let (v, mut l4) = eliminate_order_one(&l3)?;
    let mut structure = Vec::with_capacity(5);
    for op in [&mut l0, &mut l1, &mut l2, &mut l3, &mut l4] {
        let r = structure_residuals(op);
        op.hamiltonian_checked = r.max() <= STRUCTURE_TOL;
        structure.push(r);
    }
    let r1 = l4.coeffs.iter().map(|c| c.a0.scale(I)).collect();
    let r2 = l4.coeffs.iter().map(|c| c.b0.scale(I)).collect();
    let mu = reparam.mu;
    Ok(ReductionData {
        grid: l.grid.clone(),
        times: l.times,
        sym,
        diffeo,
        reparam,
        p,
        p_dot,
        v,
        r1,
        r2,
        mu,
        stages: vec![l0, l1, l2, l3, l4],
        structure,
    })
}

/// Per-sample diagnostics of a reduction.
#[derive(Clone, Debug)]
pub struct ReductionRow {
    pub t: f64,
    pub order2_variance: f64,
    pub order1_sup: f64,
    pub remainder_sup: f64,
    pub det_s_deviation: f64,
    pub symplectic_s: f64,
    pub symplectic_a: f64,
    pub symplectic_t: f64,
    pub symplectic_m: f64,
}

impl ReductionData {
    pub fn l4(&self) -> &OperatorL {
        &self.stages[4]
    }

    /// `Phi = S A B rho T M` acting on a trajectory in the reduced variables;
    /// without `rho` when `with_rho` is false.
    pub fn apply_phi(&self, g: &Traj, with_rho: bool) -> Traj {
        let mu = self.mu;
        let stage = g.map(|i, h| {
            let w = self.v[i].mul_pointwise(h).shift(self.p[i]);
            if with_rho {
                w.scale_re(self.reparam.rho[i])
            } else {
                w
            }
        });
        Traj::new(
            self.times,
            (0..self.times.n_t)
                .map(|i| {
                    let b = if self.reparam.is_identity() {
                        stage.samples[i].clone()
                    } else {
                        stage.at_frame(self.reparam.beta[i], mu)
                    };
                    let a = self.diffeo.apply(i, &b);
                    self.sym.s[i].apply(&a)
                })
                .collect(),
        )
        .expect("sample count preserved")
    }

    /// `Psi = M^{-1} T^{-1} B^{-1} A^{-1} S^{-1}` acting on a trajectory in the
    /// original variables.
    pub fn apply_psi(&self, h: &Traj, frame: f64) -> Traj {
        let stage = h.map(|i, u| self.diffeo.apply_inv(i, &self.sym.s_inv[i].apply(u)));
        Traj::new(
            self.times,
            (0..self.times.n_t)
                .map(|i| {
                    let b = if self.reparam.is_identity() {
                        stage.samples[i].clone()
                    } else {
                        stage.at_frame(self.reparam.beta_inv[i], frame)
                    };
                    b.shift(-self.p[i]).mul_pointwise(&self.v[i].conj())
                })
                .collect(),
        )
        .expect("sample count preserved")
    }

    /// `Psi` at the first sample (`t = tau = 0`).
    pub fn psi_start(&self, u: &Field) -> Field {
        let a = self.diffeo.apply_inv(0, &self.sym.s_inv[0].apply(u));
        a.shift(-self.p[0]).mul_pointwise(&self.v[0].conj())
    }

    /// `Psi` at the last sample (`t = tau = T`).
    pub fn psi_end(&self, u: &Field) -> Field {
        let i = self.times.n_t - 1;
        let a = self.diffeo.apply_inv(i, &self.sym.s_inv[i].apply(u));
        a.shift(-self.p[i]).mul_pointwise(&self.v[i].conj())
    }

    /// `Psi^{-1}` at the last sample.
    pub fn psi_end_inv(&self, u: &Field) -> Field {
        let i = self.times.n_t - 1;
        let w = self.v[i].mul_pointwise(u).shift(self.p[i]);
        self.sym.s[i].apply(&self.diffeo.apply(i, &w))
    }

    /// Multiplier `k(tau, z) = rho^{-1}(tau) chi(y + b(t, y))` with
    /// `t = beta^{-1}(tau)`, `y = z - p(tau)`.
    pub fn k_field(&self, chi: &Field) -> Vec<Field> {
        let grid = &self.grid;
        let binv: Vec<Vec<C64>> = self.diffeo.alpha_inv.iter().map(|f| f.coeffs().to_vec()).collect();
        (0..self.times.n_t)
            .map(|i| {
                let t = self.reparam.beta_inv[i];
                let b = Field::from_coeffs(grid, interpolate_at(&self.times, &binv, t));
                let ys: Vec<f64> = (0..grid.n()).map(|j| grid.node(j) - self.p[i]).collect();
                let bv = b.interpolate(&ys);
                let pts: Vec<f64> = ys.iter().zip(&bv).map(|(y, d)| y + d.re).collect();
                let vals = chi.interpolate(&pts);
                let inv = 1.0 / self.reparam.rho[i];
                Field::from_values(grid, vals.into_iter().map(|z| C64::new(z.re * inv, 0.0)).collect())
            })
            .collect()
    }

    /// One row per time sample; symplectic residuals use the two test fields.
    pub fn diagnostics(&self, u: &Field, w: &Field) -> Vec<ReductionRow> {
        let base = symplectic_w(u, w).unwrap_or(0.0);
        let sres = |a: &Field, b: &Field| (symplectic_w(a, b).unwrap_or(f64::NAN) - base).abs();
        (0..self.times.n_t)
            .map(|i| {
                let l1 = &self.stages[1].coeffs[i];
                let l4 = &self.stages[4].coeffs[i];
                let s = &self.sym.s[i];
                let v = &self.v[i];
                ReductionRow {
                    t: self.times.t(i),
                    order2_variance: spatial_variance(&l1.a2),
                    order1_sup: l4.a1.sup_norm().max(l4.b1.sup_norm()),
                    remainder_sup: self.r1[i].sup_norm().max(self.r2[i].sup_norm()),
                    det_s_deviation: s.det().map_values(|z| z - 1.0).sup_norm(),
                    symplectic_s: sres(&s.apply(u), &s.apply(w)),
                    symplectic_a: sres(&self.diffeo.apply(i, u), &self.diffeo.apply(i, w)),
                    symplectic_t: sres(&u.shift(self.p[i]), &w.shift(self.p[i])),
                    symplectic_m: sres(&v.mul_pointwise(u), &v.mul_pointwise(w)),
                }
            })
            .collect()
    }
}

/// `|<Q u, w> - <u, Q^{-1} w>| / (|u|_0 |w|_0)` in the real pairing, per sample.
#[derive(Clone, Copy, Debug)]
pub struct AdjointRow {
    pub t: f64,
    pub s: f64,
    pub a: f64,
    pub t_shift: f64,
    pub m: f64,
}

impl AdjointRow {
    pub fn max(&self) -> f64 {
        self.s.max(self.a).max(self.t_shift).max(self.m)
    }
}

impl ReductionData {
    pub fn adjoint_defects(&self, u: &Field, w: &Field) -> Vec<AdjointRow> {
        let scale = 2.0 * std::f64::consts::TAU * u.l2_norm() * w.l2_norm();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let defect = |qu: Field, qinv_w: Field| {
            (bold_l2(&qu, w).unwrap_or(f64::NAN) - bold_l2(u, &qinv_w).unwrap_or(f64::NAN)).abs() / scale
        };
        (0..self.times.n_t)
            .map(|i| AdjointRow {
                t: self.times.t(i),
                s: defect(self.sym.s[i].apply(u), self.sym.s_inv[i].apply(w)),
                a: defect(self.diffeo.apply(i, u), self.diffeo.apply_inv(i, w)),
                t_shift: defect(u.shift(self.p[i]), w.shift(-self.p[i])),
                m: defect(self.v[i].mul_pointwise(u), self.v[i].conj().mul_pointwise(w)),
            })
            .collect()
    }
}

/// `sup_t |(L - Phi L4 Psi) h|_0 / sup_t |h|_4`.
pub fn conjugation_residual(l: &OperatorL, red: &ReductionData, h: &Traj) -> f64 {
    let lhs = l.apply(h, l.sigma);
    let big_h = red.apply_psi(h, l.sigma);
    let l4h = red.l4().apply(&big_h, red.mu);
    let rhs = red.apply_phi(&l4h, true);
    let num = lhs.sub(&rhs).sup_norm(0.0);
    let den = h.sup_norm(4.0);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
