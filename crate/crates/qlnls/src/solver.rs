//! Cauchy solvers: the exact free flow, a whole-interval Picard iteration for
//! operators whose variable part is small, an integrating-factor RK4 method of
//! lines for general operators, the route through the reduced operator, and
//! the formal adjoint.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{check_hamiltonian_structure, structure_residuals, Coeffs, OperatorL, STRUCTURE_TOL};
use crate::reduction::ReductionData;
use crate::spectral::time::{cumulative_integral, free_phase, frame_d_dt, lagrange_weights};
use crate::spectral::{Field, TimeGrid, Traj};

/// `u_k -> e^{i mu k^2 dt} u_k`.
pub fn free_propagate(mu: f64, dt: f64, u: &Field) -> Field {
    let ph = free_phase(u.grid(), mu, dt);
    Field::from_coeffs(u.grid(), u.coeffs().iter().zip(&ph).map(|(c, p)| c * p).collect())
}

/// Free flow sampled on `times`, starting at `t = 0`.
pub fn free_flow(mu: f64, times: TimeGrid, u0: &Field) -> Traj {
    Traj::new(times, (0..times.n_t).map(|i| free_propagate(mu, times.t(i), u0)).collect())
        .expect("one sample per node")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Which operator a Cauchy problem refers to.
#[derive(Clone, Copy)]
pub enum CauchyOperator<'a> {
    Free(f64),
    /// Reduced operator, solved by Picard iteration.
    L4(&'a OperatorL),
    /// Original operator through the reduction.
    Full(&'a OperatorL, &'a ReductionData),
    /// Original operator, method of lines.
    Direct(&'a OperatorL),
}

/// `L h = g` with `h` prescribed at `t = 0` (forward) or `t = T` (backward).
#[derive(Clone, Copy)]
pub struct CauchySpec<'a> {
    pub operator: CauchyOperator<'a>,
    pub times: TimeGrid,
    pub initial: &'a Field,
    pub forcing: Option<&'a Traj>,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Substeps per sample interval for the method of lines (lower bound).
    pub refine: usize,
    /// Refinement of the Picard quadrature grid.
    pub picard_refine: usize,
    pub picard_sweeps: usize,
    pub picard_tol: f64,
    /// Gate on `sup_t |R|_1` for Picard.
    pub remainder_gate: f64,
    pub residual_tol: f64,
    pub cross_check_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            refine: 2,
            picard_refine: 8,
            picard_sweeps: 50,
            picard_tol: 1e-12,
            remainder_gate: 0.5,
            residual_tol: 1e-6,
            cross_check_tol: 1e-5,
        }
    }
}

pub fn solve(spec: &CauchySpec, opts: &SolverOptions) -> Result<Traj> {
    let grid = spec.initial.grid().clone();
    match spec.operator {
        CauchyOperator::Free(mu) => {
            let l = OperatorL::free(&grid, spec.times, mu);
            solve_direct(&l, spec.initial, spec.forcing, spec.direction, opts)
        }
        CauchyOperator::Direct(l) => solve_direct(l, spec.initial, spec.forcing, spec.direction, opts),
        CauchyOperator::L4(l) => solve_l4(l, spec.initial, spec.forcing, spec.direction, opts).map(|r| r.traj),
        CauchyOperator::Full(l, red) => {
            solve_full(l, red, spec.initial, spec.forcing, spec.direction, opts).map(|r| r.traj)
        }
    }
}

fn reversed_forcing(g: &Traj) -> Traj {
    Traj::new(g.times, g.samples.iter().rev().map(|f| f.scale_re(-1.0)).collect()).expect("same length")
}

fn reversed(h: Traj) -> Traj {
    let times = h.times;
    Traj::new(times, h.samples.into_iter().rev().collect()).expect("same length")
}

/// Right-hand side of a Cauchy problem, evaluated at arbitrary times.
#[derive(Clone, Copy)]
pub enum Forcing<'a> {
    Samples(&'a Traj),
    /// `chi f + q`; `f` and `q` are interpolated before the pointwise product.
    Masked {
        chi: &'a Field,
        f: &'a Traj,
        q: Option<&'a Traj>,
    },
}

impl<'a> Forcing<'a> {
    pub fn times(&self) -> TimeGrid {
        match self {
            Forcing::Samples(g) => g.times,
            Forcing::Masked { f, .. } => f.times,
        }
    }

    /// Value at `t`, interpolating in the frame of the free flow of speed `frame`.
    pub fn at(&self, t: f64, frame: f64) -> Field {
        match self {
            Forcing::Samples(g) => g.at_frame(t, frame),
            Forcing::Masked { chi, f, q } => {
                let cf = chi.mul_pointwise(&f.at_frame(t, frame));
                match q {
                    Some(q) => &cf + &q.at_frame(t, frame),
                    None => cf,
                }
            }
        }
    }

    /// Values on the sample grid.
    pub fn sampled(&self) -> Traj {
        match self {
            Forcing::Samples(g) => (*g).clone(),
            Forcing::Masked { chi, f, q } => {
                let cf = f.map(|_, x| chi.mul_pointwise(x));
                match q {
                    Some(q) => cf.add(q),
                    None => cf,
                }
            }
        }
    }
}

/// Variable part `V(t) h` with coefficients interpolated at `t`.
fn variable_part(l: &OperatorL, t: f64, hc: &[C64]) -> Vec<C64> {
    let w = lagrange_weights(&l.times, t);
    if w.iter().any(|&(_, c)| c == 1.0) {
        let j = w.iter().find(|&&(_, c)| c == 1.0).unwrap().0;
        return l.coeffs[j].apply_var(&l.grid, hc);
    }
    l.coeffs_at(t).apply_var(&l.grid, hc)
}

fn coeffs_sup_order2(c: &[Coeffs]) -> f64 {
    c.iter()
        .fold(0.0, |m, c| m.max(c.a2.sup_norm()).max(c.b2.sup_norm()))
}

/// Integrating-factor RK4 on `h_t = -i sigma h_xx - V h + g`.
pub fn solve_direct(
    l: &OperatorL,
    h0: &Field,
    forcing: Option<&Traj>,
    dir: Direction,
    opts: &SolverOptions,
) -> Result<Traj> {
    solve_direct_forced(l, h0, forcing.map(Forcing::Samples), dir, opts)
}

pub fn solve_direct_forced(
    l: &OperatorL,
    h0: &Field,
    forcing: Option<Forcing>,
    dir: Direction,
    opts: &SolverOptions,
) -> Result<Traj> {
    l.grid.check_same(h0.grid())?;
    if let Some(g) = &forcing {
        if g.times().n_t != l.times.n_t {
            return Err(Error::Precondition("forcing must be sampled on the operator grid".into()));
        }
    }
    let n = l.grid.n() as f64;
    let sup2 = coeffs_sup_order2(&l.coeffs);
    let dt_max = if sup2 > 0.0 { 1.0 / (4.0 * n * n * sup2) } else { f64::INFINITY };
    let sub = ((l.times.dt() / dt_max).ceil() as usize).max(opts.refine.max(1));
    let sigma = l.sigma;
    let free = l.is_free();
    let horizon = l.times.horizon;
    match dir {
        Direction::Forward => {
            let rhs = |t: f64, h: &[C64]| -> Vec<C64> {
                let mut out = if free {
                    vec![C64::new(0.0, 0.0); h.len()]
                } else {
                    variable_part(l, t, h).into_iter().map(|v| -v).collect()
                };
                if let Some(g) = &forcing {
                    for (o, v) in out.iter_mut().zip(g.at(t, sigma).coeffs()) {
                        *o += v;
                    }
                }
                out
            };
            Ok(march(&l.grid, l.times, sigma, sub, h0, free && forcing.is_none(), rhs))
        }
        Direction::Backward => {
            let lr = l.time_reversed();
            let rhs = |s: f64, h: &[C64]| -> Vec<C64> {
                let mut out = if free {
                    vec![C64::new(0.0, 0.0); h.len()]
                } else {
                    variable_part(&lr, s, h).into_iter().map(|v| -v).collect()
                };
                if let Some(g) = &forcing {
                    for (o, v) in out.iter_mut().zip(g.at(horizon - s, sigma).coeffs()) {
                        *o -= v;
                    }
                }
                out
            };
            let h = march(&lr.grid, lr.times, lr.sigma, sub, h0, free && forcing.is_none(), rhs);
            Ok(reversed(h))
        }
    }
}

/// Integrating-factor RK4 for `u_t = -i sigma u_xx + F(t, u)` in spectral
/// coordinates, `sub` steps per sample interval.
pub fn march(
    grid: &crate::spectral::Grid,
    times: TimeGrid,
    sigma: f64,
    sub: usize,
    h0: &Field,
    trivial: bool,
    rhs: impl Fn(f64, &[C64]) -> Vec<C64>,
) -> Traj {
    let dt = times.dt();
    let step = dt / sub as f64;
    let e_half = free_phase(grid, sigma, 0.5 * step);
    let e_full = free_phase(grid, sigma, step);
    let mul = |e: &[C64], v: &[C64]| -> Vec<C64> { e.iter().zip(v).map(|(a, b)| a * b).collect() };
    let axpy = |a: &[C64], s: f64, b: &[C64]| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
    let mut u = h0.coeffs().to_vec();
    let mut out = Vec::with_capacity(times.n_t);
    out.push(h0.clone());
    for i in 0..times.n_t - 1 {
        if trivial {
            u = mul(&free_phase(grid, sigma, dt), &u);
        } else {
            for m in 0..sub {
                let t = times.t(i) + m as f64 * step;
                let k1 = rhs(t, &u);
                let k2 = rhs(t + 0.5 * step, &mul(&e_half, &axpy(&u, 0.5 * step, &k1)));
                let eu = mul(&e_half, &u);
                let k3 = rhs(t + 0.5 * step, &axpy(&eu, 0.5 * step, &k2));
                let k4 = rhs(t + step, &axpy(&mul(&e_full, &u), step, &mul(&e_half, &k3)));
                let mut next = mul(&e_full, &u);
                let a = mul(&e_full, &k1);
                let b = mul(&e_half, &k2.iter().zip(&k3).map(|(x, y)| x + y).collect::<Vec<_>>());
                for j in 0..next.len() {
                    next[j] += step / 6.0 * (a[j] + 2.0 * b[j] + k4[j]);
                }
                u = next;
            }
        }
        out.push(Field::from_coeffs(grid, u.clone()));
    }
    Traj::new(times, out).expect("one sample per node")
}

/// Result of a Picard solve.
#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub traj: Traj,
    pub sweeps: usize,
    pub increments: Vec<f64>,
    pub residual: f64,
}

/// `sup_t (|r1|_s + |r2|_s)` of the zeroth-order part.
pub fn remainder_norm(l: &OperatorL, s: f64) -> f64 {
    l.coeffs
        .iter()
        .fold(0.0, |m, c| m.max(c.a0.sobolev_norm(s) + c.b0.sobolev_norm(s)))
}

/// Duhamel fixed point for `h_t + i sigma h_xx + V h = g` over the whole
/// interval, in the frame of the free flow.
pub fn solve_l4(
    l: &OperatorL,
    h0: &Field,
    forcing: Option<&Traj>,
    dir: Direction,
    opts: &SolverOptions,
) -> Result<PicardOutcome> {
    l.grid.check_same(h0.grid())?;
    if dir == Direction::Backward {
        let lr = l.time_reversed();
        let gr = forcing.map(reversed_forcing);
        let mut r = solve_l4(&lr, h0, gr.as_ref(), Direction::Forward, opts)?;
        r.traj = reversed(r.traj);
        return Ok(r);
    }
    let rn = remainder_norm(l, 1.0);
    if rn > opts.remainder_gate {
        return Err(Error::Smallness(format!(
            "|R|_(T,1) = {rn:.3e} exceeds {:.3e}",
            opts.remainder_gate
        )));
    }
    let grid = &l.grid;
    let sigma = l.sigma;
    let fine = l.times.refine(opts.picard_refine.max(1));
    let nf = fine.n_t;
    let coeffs: Vec<Coeffs> = (0..nf).map(|i| l.coeffs_at(fine.t(i))).collect();
    let g_frame: Vec<Vec<C64>> = match forcing {
        Some(g) => (0..nf)
            .map(|i| {
                let t = fine.t(i);
                let ph = free_phase(grid, -sigma, t);
                g.at_frame(t, sigma).coeffs().iter().zip(&ph).map(|(a, p)| a * p).collect()
            })
            .collect(),
        None => vec![vec![C64::new(0.0, 0.0); grid.n()]; nf],
    };
    let phases: Vec<Vec<C64>> = (0..nf).map(|i| free_phase(grid, sigma, fine.t(i))).collect();
    let w0 = h0.coeffs().to_vec();
    let data_norm = h0.l2_norm().max(match forcing {
        Some(g) => g.sup_norm(0.0),
        None => 0.0,
    });
    let scale = if data_norm > 0.0 { data_norm } else { 1.0 };
    // frame variable: w(t) = e^{-i sigma k^2 t} h(t)
    let mut w: Vec<Vec<C64>> = vec![w0.clone(); nf];
    let mut increments = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    for _ in 0..opts.picard_sweeps {
        sweeps += 1;
        let integrand: Vec<Vec<C64>> = (0..nf)
            .map(|i| {
                let h: Vec<C64> = w[i].iter().zip(&phases[i]).map(|(a, p)| a * p).collect();
                let vh = coeffs[i].apply_var(grid, &h);
                vh.iter()
                    .zip(&phases[i])
                    .zip(&g_frame[i])
                    .map(|((v, p), g)| g - v * p.conj())
                    .collect()
            })
            .collect();
        let cum = cumulative_integral(&integrand, fine.dt());
        let mut inc: f64 = 0.0;
        for i in 0..nf {
            let next: Vec<C64> = w0.iter().zip(&cum[i]).map(|(a, b)| a + b).collect();
            let d = next
                .iter()
                .zip(&w[i])
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            inc = inc.max(d);
            w[i] = next;
        }
        let rel = inc / scale;
        increments.push(rel);
        if rel <= opts.picard_tol {
            converged = true;
            break;
        }
        let k = increments.len();
        if k >= 3 && increments[k - 1] > increments[k - 2] && increments[k - 2] > increments[k - 3] {
            return Err(Error::Smallness(format!("Picard increments growing ({rel:.3e})")));
        }
    }
    if !converged {
        return Err(Error::Smallness(format!(
            "Picard iteration did not contract within {} sweeps (last increment {:.3e})",
            opts.picard_sweeps,
            increments.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let fine_traj: Vec<Vec<C64>> = (0..nf)
        .map(|i| w[i].iter().zip(&phases[i]).map(|(a, p)| a * p).collect())
        .collect();
    // residual h_t + i sigma h_xx + V h - g on the quadrature grid
    let ht = frame_d_dt(grid, &fine, &fine_traj, sigma);
    let mut residual: f64 = 0.0;
    for i in 0..nf {
        let vh = coeffs[i].apply_var(grid, &fine_traj[i]);
        let k = grid.wavenumbers();
        let r: f64 = (0..grid.n())
            .map(|m| {
                let g = g_frame[i][m] * phases[i][m];
                let lap = C64::new(0.0, -sigma * k[m] * k[m]) * fine_traj[i][m];
                (ht[i][m] + lap + vh[m] - g).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }
    let residual = residual / scale;
    if residual > opts.residual_tol {
        return Err(Error::Accuracy(format!("Picard equation residual {residual:.3e}")));
    }
    let r = opts.picard_refine.max(1);
    let samples = (0..l.times.n_t)
        .map(|i| Field::from_coeffs(grid, fine_traj[i * r].clone()))
        .collect();
    Ok(PicardOutcome {
        traj: Traj::new(l.times, samples)?,
        sweeps,
        increments,
        residual,
    })
}

/// Outcome of the route through the reduced operator.
#[derive(Clone, Debug)]
pub struct FullOutcome {
    pub traj: Traj,
    pub picard: PicardOutcome,
    /// Relative sup-in-time disagreement with the method of lines.
    pub cross_check: f64,
    pub consistency: Option<Error>,
}

/// `h = Phi_0 H` where `L4 H = rho^{-1} Psi g`, `H = Psi h` at the start.
pub fn solve_full(
    l: &OperatorL,
    red: &ReductionData,
    h0: &Field,
    forcing: Option<&Traj>,
    dir: Direction,
    opts: &SolverOptions,
) -> Result<FullOutcome> {
    let big_h0 = match dir {
        Direction::Forward => red.psi_start(h0),
        Direction::Backward => red.psi_end(h0),
    };
    let gt = forcing.map(|g| {
        let pg = red.apply_psi(g, l.sigma);
        pg.map(|i, f| f.scale_re(1.0 / red.reparam.rho[i]))
    });
    let picard = solve_l4(red.l4(), &big_h0, gt.as_ref(), dir, opts)?;
    let traj = red.apply_phi(&picard.traj, false);
    let direct = solve_direct(l, h0, forcing, dir, opts)?;
    let cross_check = rel_sup_dist(&traj, &direct);
    let consistency = if cross_check > opts.cross_check_tol {
        Some(Error::Consistency(format!(
            "reduced route and method of lines differ by {cross_check:.3e}"
        )))
    } else {
        None
    };
    Ok(FullOutcome {
        traj,
        picard,
        cross_check,
        consistency,
    })
}

/// `sup_t |a - b|_0 / sup_t |b|_0`.
pub fn rel_sup_dist(a: &Traj, b: &Traj) -> f64 {
    let d = a.sub(b).sup_norm(0.0);
    let r = b.sup_norm(0.0);
    if r == 0.0 {
        d
    } else {
        d / r
    }
}

/// `L* = -L~`, with `L~` a forward operator of the same shape.
#[derive(Clone, Debug)]
pub struct AdjointOperator {
    pub tilde: OperatorL,
}

impl AdjointOperator {
    /// `L* g` on the sample grid.
    pub fn apply(&self, g: &Traj) -> Traj {
        self.tilde.apply(g, self.tilde.sigma).scale(-1.0)
    }

    /// Solves `L* f = 0` backward from `f(T) = f1`.
    pub fn solve_backward(&self, f1: &Field, opts: &SolverOptions) -> Result<Traj> {
        solve_direct(&self.tilde, f1, None, Direction::Backward, opts)
    }
}

/// Coefficients of `L~`, where
/// `L* = -d_t - i (Sigma + A2)* d_xx - i (2 d_x A2* - A1*) d_x - i (d_xx A2* - d_x A1* + A0*)`.
pub fn adjoint_coeffs(c: &Coeffs) -> Coeffs {
    let a2c = c.a2.conj();
    let a1c = c.a1.conj();
    let a0c = c.a0.conj();
    Coeffs {
        a2: a2c.clone(),
        b2: c.b2.scale_re(-1.0),
        a1: &a2c.dx().scale_re(2.0) - &a1c,
        b1: &c.b1 - &c.b2.dx().scale_re(2.0),
        a0: &(&a2c.dxx() - &a1c.dx()) + &a0c,
        b0: &(&c.b1.dx() - &c.b2.dxx()) - &c.b0,
    }
}

pub fn build_adjoint(l: &OperatorL) -> Result<AdjointOperator> {
    if !l.hamiltonian_checked {
        let r = structure_residuals(l);
        for (name, v) in r.entries() {
            if v > STRUCTURE_TOL {
                return Err(Error::Structure {
                    relation: name.into(),
                    residual: v,
                });
            }
        }
    }
    let coeffs = l.coeffs.iter().map(adjoint_coeffs).collect();
    let mut tilde = OperatorL::new(&l.grid, l.times, l.sigma, coeffs)?;
    check_hamiltonian_structure(&mut tilde)?;
    Ok(AdjointOperator { tilde })
}

/// `int <L h, g> dt - [<h, g>]_0^T - int <h, L* g> dt`, real bold pairing.
pub fn integration_by_parts_defect(l: &OperatorL, adj: &AdjointOperator, h: &Traj, g: &Traj) -> f64 {
    let lh = l.apply(h, l.sigma);
    let lsg = adj.apply(g);
    let pair = |a: &Traj, b: &Traj| 2.0 * a.l2_spacetime(b).re;
    let bnd = |f: &Field, e: &Field| crate::spectral::bold_l2(f, e).unwrap();
    let boundary = bnd(h.last(), g.last()) - bnd(h.first(), g.first());
    pair(&lh, g) - boundary - pair(h, &lsg)
}

/// Samples of the interaction-frame variable `e^{-i mu k^2 t} h(t)`.
pub fn interaction_frame(h: &Traj, mu: f64) -> Traj {
    h.map(|i, f| free_propagate(-mu, h.times.t(i), f))
}
