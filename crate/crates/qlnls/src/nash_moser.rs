//! Nonlinear control and Cauchy problems by a smoothed Newton iteration on
//! the map `Phi`, with the right inverses of the linearized problems.

use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::model::nonlinearity_unchecked;
use crate::hamiltonian::{check_hamiltonian_structure, hamiltonian_complex, linearize_complex, HamiltonianDensity};
use crate::hum::{hum_solve, ControlProblem, ControlSolution, Cutoff, HumOptions};
use crate::reduction::full_reduce;
use crate::solver::{march, rel_sup_dist, solve_full, Direction, Forcing, SolverOptions};
use crate::spectral::smoothing::{block_count, block_r, smooth_s};
use crate::spectral::{BoldField, Field, Grid, TimeGrid, Traj};

/// Loss exponent used for `a1`; it must dominate `mu_loss`.
pub const SIGMA_NUM: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NMParams {
    pub a0: f64,
    pub mu_loss: f64,
    pub a1: f64,
    pub alpha: f64,
    pub beta_reg: f64,
    pub a2: f64,
    pub delta: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Initial smoothing level.
    pub j0: u32,
    /// Constant `A` of the block condition on the data.
    pub block_constant: f64,
    /// Tail-energy tolerance for linearizing along iterates.
    pub resolution_tail: f64,
}

impl Default for NMParams {
    fn default() -> Self {
        let alpha = 2.5 * SIGMA_NUM;
        NMParams {
            a0: 1.0,
            mu_loss: 2.0,
            a1: SIGMA_NUM,
            alpha,
            beta_reg: alpha,
            a2: 2.0 * alpha - SIGMA_NUM + 1.0,
            delta: 10.0,
            max_iter: 8,
            tol: 1e-8,
            j0: 3,
            block_constant: 2.0,
            resolution_tail: 1e-5,
        }
    }
}

impl NMParams {
    /// The three admissibility inequalities, checked exactly.
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(0.0 <= p.a0 && p.a0 <= p.mu_loss && p.mu_loss <= p.a1) {
            return Err(Error::Config(format!(
                "nm: need 0 <= a0 <= mu_loss <= a1, got a0={}, mu_loss={}, a1={}",
                p.a0, p.mu_loss, p.a1
            )));
        }
        if !(p.a1 + p.beta_reg / 2.0 < p.alpha && p.alpha < p.a1 + p.beta_reg) {
            return Err(Error::Config(format!(
                "nm: need a1 + beta_reg/2 < alpha < a1 + beta_reg, got a1={}, alpha={}, beta_reg={}",
                p.a1, p.alpha, p.beta_reg
            )));
        }
        if !(2.0 * p.alpha < p.a1 + p.a2) {
            return Err(Error::Config(format!(
                "nm: need 2 alpha < a1 + a2, got alpha={}, a1={}, a2={}",
                p.alpha, p.a1, p.a2
            )));
        }
        if !(p.delta > 0.0 && p.tol > 0.0 && p.max_iter > 0) {
            return Err(Error::Config("nm: delta, tol and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Element `(v, alpha, beta)` of the data space; `beta` is absent for the
/// Cauchy problem.
#[derive(Clone, Debug)]
pub struct DataZ {
    pub v: Traj,
    pub alpha: Field,
    pub beta: Option<Field>,
}

impl DataZ {
    pub fn zeros(grid: &Grid, times: TimeGrid, with_end: bool) -> DataZ {
        DataZ {
            v: Traj::zeros(grid, times),
            alpha: Field::zeros(grid),
            beta: with_end.then(|| Field::zeros(grid)),
        }
    }

    pub fn sub(&self, o: &DataZ) -> DataZ {
        DataZ {
            v: self.v.sub(&o.v),
            alpha: &self.alpha - &o.alpha,
            beta: match (&self.beta, &o.beta) {
                (Some(a), Some(b)) => Some(a - b),
                (a, _) => a.clone(),
            },
        }
    }

    pub fn scale(&self, s: f64) -> DataZ {
        DataZ {
            v: self.v.scale(s),
            alpha: self.alpha.scale_re(s),
            beta: self.beta.as_ref().map(|b| b.scale_re(s)),
        }
    }
}

/// Norms of the unknown and data spaces; time derivatives in the frame of
/// the unit-speed free flow.
pub struct SpaceNorms;

impl SpaceNorms {
    /// `|u|_{T,s+4} + |u_t|_{T,s+2} + |u_tt|_{T,s}`.
    pub fn x(u: &Traj, s: f64) -> f64 {
        u.sup_norm(s + 4.0) + u.frame_d_dt(1.0).sup_norm(s + 2.0) + u.frame_d2_dt2(1.0).sup_norm(s)
    }

    pub fn e(u: &Traj, f: Option<&Traj>, s: f64) -> f64 {
        SpaceNorms::x(u, s) + f.map(|f| SpaceNorms::x(f, s)).unwrap_or(0.0)
    }

    /// `|v|_{T,s+4} + |v_t|_{T,s} + |alpha|_{s+4} + |beta|_{s+4}`.
    pub fn f(z: &DataZ, s: f64) -> f64 {
        z.v.sup_norm(s + 4.0)
            + z.v.frame_d_dt(1.0).sup_norm(s)
            + z.alpha.sobolev_norm(s + 4.0)
            + z.beta.as_ref().map(|b| b.sobolev_norm(s + 4.0)).unwrap_or(0.0)
    }
}

/// `sum_j |R_j z|_s^2 / |z|_s^2` over the spatial data and the sampled `v`.
pub fn block_ratio(z: &DataZ, s: f64) -> f64 {
    let grid = z.alpha.grid();
    let blocks = block_count(grid.n());
    let ratio = |u: &Field| -> (f64, f64) {
        let total = u.sobolev_norm(s).powi(2);
        let sum: f64 = (0..=blocks).map(|j| block_r(j, u).sobolev_norm(s).powi(2)).sum();
        (sum, total)
    };
    let mut num = 0.0;
    let mut den = 0.0;
    let mut add = |u: &Field| {
        let (a, b) = ratio(u);
        num += a;
        den += b;
    };
    add(&z.alpha);
    if let Some(b) = &z.beta {
        add(b);
    }
    for f in &z.v.samples {
        add(f);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The map `Phi`: `(P(u) - chi f, u(0), u(T))` for control, `(P(u), u(0))`
/// for the Cauchy problem, in the complex representation
/// `P(u) = u_t + i u_xx + N(u)`.
pub struct PhiMap<'a> {
    pub density: &'a dyn HamiltonianDensity,
    pub cutoff: Option<&'a Cutoff>,
}

impl<'a> PhiMap<'a> {
    pub fn control(density: &'a dyn HamiltonianDensity, cutoff: &'a Cutoff) -> PhiMap<'a> {
        PhiMap {
            density,
            cutoff: Some(cutoff),
        }
    }

    pub fn cauchy(density: &'a dyn HamiltonianDensity) -> PhiMap<'a> {
        PhiMap { density, cutoff: None }
    }

    pub fn p(&self, u: &Traj) -> Traj {
        let ut = u.frame_d_dt(1.0);
        let i = C64::new(0.0, 1.0);
        u.map(|j, f| {
            let lin = &ut.samples[j] + &f.dxx().scale(i);
            &lin + &nonlinearity_unchecked(self.density, f)
        })
    }

    pub fn eval(&self, u: &Traj, f: Option<&Traj>) -> DataZ {
        let mut v = self.p(u);
        if let (Some(c), Some(f)) = (self.cutoff, f) {
            v = v.sub(&c.apply_traj(f));
        }
        DataZ {
            v,
            alpha: u.first().clone(),
            beta: self.cutoff.map(|_| u.last().clone()),
        }
    }
}

/// One Newton step of the log.
#[derive(Clone, Debug)]
pub struct IterRecord {
    pub j: usize,
    pub theta: u32,
    pub residual: f64,
    pub increment: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct IterState {
    pub u: Traj,
    pub f: Option<Traj>,
    pub residual: DataZ,
    pub log: Vec<IterRecord>,
    /// Residual `|Phi(u) - Phi(0) - g|_{F_0}` at the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
    /// `ln r_{j+1} / ln r_j` for consecutive residuals below one.
    pub log_ratios: Vec<f64>,
}

impl IterState {
    pub fn min_log_ratio(&self) -> f64 {
        self.log_ratios.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn residuals(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.log.iter().map(|l| l.residual).collect();
        r.push(self.final_residual);
        r
    }
}

/// Increment `(h, phi)` solving the linearized problem at a smoothed iterate.
pub type Increment = (Traj, Option<Traj>);

fn smooth_traj(theta: u32, u: &Traj) -> Traj {
    u.map(|_, f| smooth_s(theta, f))
}

/// `u_{j+1} = u_j + S_theta Psi(S_theta u_j)[g - (Phi(u_j) - Phi(0))]`,
/// `theta = j + j0`.
pub fn nmh_solve(
    phi: &PhiMap,
    mut psi: impl FnMut(&Traj, &DataZ) -> Result<Increment>,
    g: &DataZ,
    init: (Traj, Option<Traj>),
    params: &NMParams,
) -> Result<IterState> {
    params.validate()?;
    let gate = SpaceNorms::f(g, params.beta_reg);
    if gate > params.delta {
        return Err(Error::Smallness(format!(
            "|g|_(F_beta) = {gate:.3e} exceeds delta = {:.3e}",
            params.delta
        )));
    }
    let br = block_ratio(g, params.beta_reg);
    if br > params.block_constant {
        return Err(Error::Precondition(format!(
            "block condition fails: sum |R_j g|^2 / |g|^2 = {br:.3e}"
        )));
    }
    let (mut u, mut f) = init;
    let grid = u.grid().clone();
    let zero_u = Traj::zeros(&grid, u.times);
    let zero_f = f.as_ref().map(|_| Traj::zeros(&grid, u.times));
    let phi0 = phi.eval(&zero_u, zero_f.as_ref());
    let residual_of = |u: &Traj, f: Option<&Traj>| g.sub(&phi.eval(u, f).sub(&phi0));
    let mut log = Vec::new();
    let mut r = residual_of(&u, f.as_ref());
    let mut rn = SpaceNorms::f(&r, 0.0);
    let mut increases = 0;
    let mut converged = rn <= params.tol;
    let mut j = 0;
    while !converged && j < params.max_iter {
        let clock = Instant::now();
        let theta = j as u32 + params.j0;
        let us = smooth_traj(theta, &u);
        let (h, p) = psi(&us, &r)?;
        let h = smooth_traj(theta, &h);
        let p = p.map(|p| smooth_traj(theta, &p));
        let increment = SpaceNorms::e(&h, p.as_ref(), 0.0);
        u = u.add(&h);
        f = match (f, p) {
            (Some(f), Some(p)) => Some(f.add(&p)),
            (f, _) => f,
        };
        log.push(IterRecord {
            j,
            theta,
            residual: rn,
            increment,
            seconds: clock.elapsed().as_secs_f64(),
        });
        let next = residual_of(&u, f.as_ref());
        let next_n = SpaceNorms::f(&next, 0.0);
        if next_n > rn {
            increases += 1;
        } else {
            increases = 0;
        }
        r = next;
        rn = next_n;
        converged = rn <= params.tol;
        j += 1;
        if increases >= 3 {
            return Err(Error::Divergence(format!(
                "residual increased for 3 consecutive steps (now {rn:.3e}); shrink the data"
            )));
        }
    }
    let mut all: Vec<f64> = log.iter().map(|l| l.residual).collect();
    all.push(rn);
    let log_ratios = all
        .windows(2)
        .filter(|w| w[0] < 1.0 && w[1] < 1.0 && w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1].ln() / w[0].ln())
        .collect();
    Ok(IterState {
        u,
        f,
        residual: r,
        log,
        final_residual: rn,
        converged,
        log_ratios,
    })
}

/// Integrating-factor RK4 on `u_t + i u_xx + N(u) = F`, `sub` steps per interval.
pub fn solve_nonlinear(
    density: &dyn HamiltonianDensity,
    u0: &Field,
    times: TimeGrid,
    forcing: Option<Forcing>,
    sub: usize,
) -> Traj {
    let grid = u0.grid().clone();
    let rhs = |t: f64, c: &[C64]| -> Vec<C64> {
        let u = Field::from_coeffs(&grid, c.to_vec());
        let mut out: Vec<C64> = nonlinearity_unchecked(density, &u).coeffs().iter().map(|v| -v).collect();
        if let Some(g) = &forcing {
            for (o, v) in out.iter_mut().zip(g.at(t, 1.0).coeffs()) {
                *o += v;
            }
        }
        out
    };
    march(&grid, times, 1.0, sub.max(1), u0, false, rhs)
}

/// Relative endpoint and support diagnostics of a nonlinear control.
#[derive(Clone, Debug)]
pub struct NonlinearControl {
    pub state: IterState,
    /// `sup |chi f|` over nodes outside the arc.
    pub off_support: f64,
    /// `|u(T) - u_end|_0 / |u_end|_0` for the returned iterate.
    pub endpoint: f64,
    /// Same for the re-simulation of `(u_in, f)` by the nonlinear integrator.
    pub resimulated_endpoint: f64,
    /// `|u, f|_{E_alpha} / |g|_{F_beta}`.
    pub norm_constant: f64,
    /// Ratio of the unknown to data norms at `s = 0`.
    pub low_constant: f64,
    pub halved: bool,
    pub hum_iters: Vec<usize>,
}

/// Options shared by the nonlinear drivers.
#[derive(Clone, Copy, Debug)]
pub struct NonlinearOptions {
    pub params: NMParams,
    pub hum: HumOptions,
    /// Substeps of the nonlinear integrator per sample interval.
    pub integrator_substeps: usize,
    pub endpoint_tol: f64,
    pub support_tol: f64,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            params: NMParams::default(),
            hum: HumOptions::default(),
            integrator_substeps: 4,
            endpoint_tol: 1e-6,
            support_tol: 1e-10,
        }
    }
}

fn rel_l2(a: &Field, b: &Field) -> f64 {
    let d = (a - b).l2_norm();
    let s = b.l2_norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// `sup |chi f|` over the nodes outside the arc.
pub fn off_support(cutoff: &Cutoff, f: &Traj) -> f64 {
    let grid = f.grid();
    let mut m: f64 = 0.0;
    for s in &f.samples {
        let cf = cutoff.apply(s);
        for (j, v) in cf.values().iter().enumerate() {
            if cutoff.outside(grid.node(j)) {
                m = m.max(v.norm());
            }
        }
    }
    m
}

pub fn control_iteration(
    density: &dyn HamiltonianDensity,
    cutoff: &Cutoff,
    g: &DataZ,
    init: (Traj, Option<Traj>),
    opts: &NonlinearOptions,
    hum_iters: &mut Vec<usize>,
) -> Result<IterState> {
    let phi = PhiMap::control(density, cutoff);
    let psi = |us: &Traj, r: &DataZ| -> Result<Increment> {
        let mut l = linearize_complex(density, us, opts.params.resolution_tail)?;
        check_hamiltonian_structure(&mut l)?;
        let problem = ControlProblem {
            l: &l,
            cutoff,
            h_in: BoldField::new(r.alpha.clone()),
            h_end: BoldField::new(r.beta.clone().expect("control data carries an endpoint")),
            q: Some(r.v.clone()),
        };
        let sol: ControlSolution = hum_solve(&problem, &opts.hum)?;
        hum_iters.push(sol.gramian_iters);
        Ok((sol.h, Some(sol.f)))
    };
    nmh_solve(&phi, psi, g, init, &opts.params)
}

/// Steers `u_in` to `u_end` in time `T` with a control supported in the arc.
pub fn control_nonlinear(
    density: &dyn HamiltonianDensity,
    u_in: &Field,
    u_end: &Field,
    times: TimeGrid,
    cutoff: &Cutoff,
    opts: &NonlinearOptions,
) -> Result<NonlinearControl> {
    let grid = u_in.grid().clone();
    let g = DataZ {
        v: Traj::zeros(&grid, times),
        alpha: u_in.clone(),
        beta: Some(u_end.clone()),
    };
    let zero = || (Traj::zeros(&grid, times), Some(Traj::zeros(&grid, times)));
    let mut hum_iters = Vec::new();
    let mut halved = false;
    let state = match control_iteration(density, cutoff, &g, zero(), opts, &mut hum_iters) {
        Ok(s) => s,
        Err(Error::Divergence(_)) => {
            halved = true;
            let half = control_iteration(density, cutoff, &g.scale(0.5), zero(), opts, &mut hum_iters)?;
            control_iteration(density, cutoff, &g, (half.u, half.f), opts, &mut hum_iters)?
        }
        Err(e) => return Err(e),
    };
    if !state.converged {
        return Err(Error::Divergence(format!(
            "residual {:.3e} above {:.3e} after {} iterations",
            state.final_residual,
            opts.params.tol,
            state.log.len()
        )));
    }
    let f = state.f.clone().expect("control iterate");
    let off = off_support(cutoff, &f);
    if off > opts.support_tol {
        return Err(Error::Control(format!("control leaks outside the arc: {off:.3e}")));
    }
    let endpoint = rel_l2(state.u.last(), u_end);
    if endpoint > opts.endpoint_tol {
        return Err(Error::Control(format!("endpoint residual {endpoint:.3e}")));
    }
    let forcing = Forcing::Masked {
        chi: &cutoff.chi,
        f: &f,
        q: None,
    };
    let resim = solve_nonlinear(density, u_in, times, Some(forcing), opts.integrator_substeps);
    let resimulated_endpoint = rel_l2(resim.last(), u_end);
    let p = &opts.params;
    let data_beta = SpaceNorms::f(&g, p.beta_reg);
    let data_low = SpaceNorms::f(&g, 0.0);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(NonlinearControl {
        norm_constant: ratio(SpaceNorms::e(&state.u, Some(&f), p.alpha), data_beta),
        low_constant: ratio(SpaceNorms::e(&state.u, Some(&f), 0.0), data_low),
        off_support: off,
        endpoint,
        resimulated_endpoint,
        state,
        halved,
        hum_iters,
    })
}

/// Nonlinear Cauchy solution with its cross-checks.
#[derive(Clone, Debug)]
pub struct NonlinearCauchy {
    pub state: IterState,
    pub direct: Traj,
    /// `sup_t |u - u_direct|_0 / sup_t |u_direct|_0`.
    pub cross_check: f64,
    /// Distance between the solutions reached from two initial iterates.
    pub uniqueness_gap: f64,
    /// `sup_t |H(u(t)) - H(u(0))|`.
    pub hamiltonian_drift: f64,
    pub hamiltonian_initial: f64,
    /// Disagreement of the reduced route with the method of lines at each Newton step.
    pub route_gaps: Vec<f64>,
}

impl NonlinearCauchy {
    /// Whether the drift stays below `1e-6 |H(u(0))| + 1e-12`.
    pub fn drift_ok(&self) -> bool {
        self.hamiltonian_drift <= 1e-6 * self.hamiltonian_initial.abs() + 1e-12
    }
}

fn cauchy_once(
    density: &dyn HamiltonianDensity,
    g: &DataZ,
    init: Traj,
    opts: &NonlinearOptions,
    solver: &SolverOptions,
    route_gaps: &mut Vec<f64>,
) -> Result<IterState> {
    let phi = PhiMap::cauchy(density);
    let psi = |us: &Traj, r: &DataZ| -> Result<Increment> {
        let mut l = linearize_complex(density, us, opts.params.resolution_tail)?;
        check_hamiltonian_structure(&mut l)?;
        let red = full_reduce(&l)?;
        let out = solve_full(&l, &red, &r.alpha, Some(&r.v), Direction::Forward, solver)?;
        route_gaps.push(out.cross_check);
        Ok((out.traj, None))
    };
    nmh_solve(&phi, psi, g, (init, None), &opts.params)
}

/// Solves `u_t + i u_xx + N(u) = 0`, `u(0) = u_in` on `[0, T]`.
pub fn solve_cauchy_nonlinear(
    density: &dyn HamiltonianDensity,
    u_in: &Field,
    times: TimeGrid,
    opts: &NonlinearOptions,
) -> Result<NonlinearCauchy> {
    let grid = u_in.grid().clone();
    // residual forcings are rough at the sample scale
    let solver = SolverOptions {
        residual_tol: opts.hum.solver.residual_tol.max(1e-2),
        ..opts.hum.solver
    };
    let g = DataZ {
        v: Traj::zeros(&grid, times),
        alpha: u_in.clone(),
        beta: None,
    };
    let mut route_gaps = Vec::new();
    let mut run = |init: Traj| -> Result<IterState> {
        match cauchy_once(density, &g, init.clone(), opts, &solver, &mut route_gaps) {
            Err(Error::Divergence(_)) => {
                let half = cauchy_once(density, &g.scale(0.5), init, opts, &solver, &mut route_gaps)?;
                cauchy_once(density, &g, half.u, opts, &solver, &mut route_gaps)
            }
            r => r,
        }
    };
    let state = run(Traj::zeros(&grid, times))?;
    if !state.converged {
        return Err(Error::Divergence(format!(
            "residual {:.3e} above {:.3e} after {} iterations",
            state.final_residual,
            opts.params.tol,
            state.log.len()
        )));
    }
    let free_start = crate::solver::free_flow(1.0, times, u_in);
    let other = run(free_start)?;
    drop(run);
    let uniqueness_gap = rel_sup_dist(&other.u, &state.u);
    let direct = solve_nonlinear(density, u_in, times, None, opts.integrator_substeps);
    let cross_check = rel_sup_dist(&state.u, &direct);
    let h0 = hamiltonian_complex(density, state.u.first());
    let hamiltonian_drift = state
        .u
        .samples
        .iter()
        .fold(0.0, |m: f64, f| m.max((hamiltonian_complex(density, f) - h0).abs()));
    Ok(NonlinearCauchy {
        state,
        direct,
        cross_check,
        uniqueness_gap,
        hamiltonian_drift,
        hamiltonian_initial: h0,
        route_gaps,
    })
}
