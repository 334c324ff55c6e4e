//! Cutoffs, observability diagnostics and synthesis of controls for the
//! linearized problem by the Hilbert uniqueness method.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::OperatorL;
use crate::sampling::{band_limited, Rng64};
use crate::solver::{build_adjoint, solve_direct, solve_direct_forced, AdjointOperator, Direction, Forcing, SolverOptions};
use crate::spectral::{c_inverse, c_transform, BoldField, Field, Grid, Pair, Traj};

/// Smooth indicator of an arc, exactly 0 outside and exactly 1 on a centered plateau.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub a: f64,
    pub b: f64,
    pub plateau_fraction: f64,
    pub chi: Field,
}

/// `e^{-1/s}` step glued to `1 - e^{-1/(1-s)}`: 0 for `s <= 0`, 1 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    f(s) / (f(s) + f(1.0 - s))
}

/// Profile value at `x` for the arc `(a, b)`.
pub fn cutoff_profile(a: f64, b: f64, plateau_fraction: f64, x: f64) -> f64 {
    let len = b - a;
    let y = (x - a).rem_euclid(TAU);
    if y <= 0.0 || y >= len {
        return 0.0;
    }
    let w = 0.5 * (1.0 - plateau_fraction) * len;
    if w <= 0.0 {
        return 1.0;
    }
    smooth_step(y / w).min(smooth_step((len - y) / w))
}

pub fn make_cutoff(grid: &Grid, a: f64, b: f64, plateau_fraction: f64) -> Result<Cutoff> {
    let len = b - a;
    if !(len > 0.0 && len < TAU) || !len.is_finite() {
        return Err(Error::Precondition(format!("degenerate arc ({a}, {b})")));
    }
    if !(0.0..1.0).contains(&plateau_fraction) {
        return Err(Error::Precondition(format!(
            "plateau fraction must lie in [0, 1), got {plateau_fraction}"
        )));
    }
    let chi = Field::from_real_fn(grid, |x| cutoff_profile(a, b, plateau_fraction, x));
    Ok(Cutoff {
        a,
        b,
        plateau_fraction,
        chi,
    })
}

impl Cutoff {
    /// `chi = 1` on the whole circle.
    pub fn full(grid: &Grid) -> Cutoff {
        Cutoff {
            a: 0.0,
            b: TAU,
            plateau_fraction: 1.0,
            chi: Field::constant(grid, C64::new(1.0, 0.0)),
        }
    }

    pub fn tail_energy(&self) -> f64 {
        self.chi.tail_energy(self.chi.n() as f64 / 3.0)
    }

    /// Pointwise `chi f` on the nodes.
    pub fn apply(&self, f: &Field) -> Field {
        self.chi.mul_pointwise(f)
    }

    pub fn apply_traj(&self, f: &Traj) -> Traj {
        f.map(|_, x| self.apply(x))
    }

    /// Whether node `x` lies outside the open arc.
    pub fn outside(&self, x: f64) -> bool {
        if self.b - self.a >= TAU {
            return false;
        }
        let y = (x - self.a).rem_euclid(TAU);
        y <= 0.0 || y >= self.b - self.a
    }
}

/// Real pairing `2 Re int a conj b`, evaluated spectrally.
pub fn real_inner(a: &Field, b: &Field) -> f64 {
    2.0 * crate::spectral::l2_spectral(a.coeffs(), b.coeffs()).re
}

/// Ingham ratios `int_0^T |sum w_j e^{i mu j^2 t}|^2 dt / sum |w_j|^2`.
#[derive(Clone, Debug)]
pub struct InghamReport {
    pub mu: f64,
    pub horizon: f64,
    pub trials: usize,
    pub modes: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Composite Gauss-Legendre nodes on `[0, T]`.
fn gauss_nodes(horizon: f64, panels: usize) -> Vec<(f64, f64)> {
    const G: [(f64, f64); 5] = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let h = horizon / panels as f64;
    let mut out = Vec::with_capacity(panels * 5);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in G {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

pub fn ingham_ratio(mu: f64, horizon: f64, w: &[C64]) -> f64 {
    let jmax = w.len() as f64;
    let panels = ((mu * jmax * jmax * horizon).ceil() as usize * 4).max(64);
    let nodes = gauss_nodes(horizon, panels);
    let den: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = nodes
        .iter()
        .map(|&(t, q)| {
            let s: C64 = w
                .iter()
                .enumerate()
                .map(|(j, c)| c * C64::from_polar(1.0, mu * (j * j) as f64 * t))
                .sum();
            q * s.norm_sqr()
        })
        .sum();
    num / den
}

pub fn ingham_lower_bound(horizon: f64, mu: f64, trials: usize, modes: usize, rng: &mut Rng64) -> Result<InghamReport> {
    if mu < 0.5 {
        return Err(Error::Precondition(format!("Ingham bound needs mu >= 1/2, got {mu}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let w: Vec<C64> = (0..modes)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = ingham_ratio(mu, horizon, &w);
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    if !(min_ratio > 0.0) {
        return Err(Error::Observability(format!("Ingham ratio minimum {min_ratio:.3e}")));
    }
    Ok(InghamReport {
        mu,
        horizon,
        trials,
        modes,
        min_ratio,
        max_ratio,
    })
}

/// `int_0^T int chi |u|^2` with `|u|^2` counting both components, for the
/// backward solution of `L u = 0`, `u(T) = u_T`.
pub fn observability_functional(l: &OperatorL, cutoff: &Cutoff, u_t: &Field, opts: &SolverOptions) -> Result<f64> {
    let u = solve_direct(l, u_t, None, Direction::Backward, opts)?;
    Ok(weighted_energy(&u, cutoff))
}

fn weighted_energy(u: &Traj, cutoff: &Cutoff) -> f64 {
    let dx = u.grid().dx();
    let vals: Vec<f64> = u
        .samples
        .iter()
        .map(|f| {
            2.0 * f
                .values()
                .iter()
                .zip(cutoff.chi.values())
                .map(|(v, c)| c.re * v.norm_sqr())
                .sum::<f64>()
                * dx
        })
        .collect();
    crate::spectral::time::integrate(&vals, u.times.dt())
}

/// Empirical observability constants from paired trials.
#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub trials: usize,
    pub mu: f64,
    /// `min ratio` for the free operator.
    pub c_free: f64,
    /// `min ratio` for the given operator.
    pub c_hat: f64,
    /// `c_hat / c_free`.
    pub degradation: f64,
    /// Whether `c_free / 4 <= c_hat <= 4 c_free`.
    pub within_factor_four: bool,
}

/// Minimum over `trials` random band-limited terminal data of
/// `int int chi |u|^2 / |u_T|_0^2`, for the operator and for the free one.
pub fn estimate_observability(
    l: &OperatorL,
    cutoff: &Cutoff,
    trials: usize,
    kmax: i64,
    rng: &mut Rng64,
    opts: &SolverOptions,
) -> Result<ObservabilityReport> {
    let free = OperatorL::free(&l.grid, l.times, l.sigma);
    let mut c_free = f64::INFINITY;
    let mut c_hat = f64::INFINITY;
    for _ in 0..trials {
        let u_t = band_limited(&l.grid, kmax, 1.0, 1.0, rng);
        let norm = 2.0 * TAU * u_t.l2_norm().powi(2);
        c_free = c_free.min(observability_functional(&free, cutoff, &u_t, opts)? / norm);
        c_hat = c_hat.min(observability_functional(l, cutoff, &u_t, opts)? / norm);
    }
    if !(c_hat > 0.0) {
        return Err(Error::Observability(format!("observability constant {c_hat:.3e}")));
    }
    let degradation = c_hat / c_free;
    Ok(ObservabilityReport {
        trials,
        mu: l.sigma,
        c_free,
        c_hat,
        degradation,
        within_factor_four: (0.25..=4.0).contains(&degradation),
    })
}

/// Data of the linear control problem `L h = chi f + q`, `h(0) = h_in`, `h(T) = h_end`.
#[derive(Clone)]
pub struct ControlProblem<'a> {
    pub l: &'a OperatorL,
    pub cutoff: &'a Cutoff,
    pub h_in: BoldField,
    pub h_end: BoldField,
    pub q: Option<Traj>,
}

#[derive(Clone, Copy, Debug)]
pub struct HumOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub endpoint_tol: f64,
    pub solver: SolverOptions,
}

impl Default for HumOptions {
    fn default() -> Self {
        HumOptions {
            max_iters: 500,
            rel_tol: 1e-10,
            endpoint_tol: 1e-6,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ControlSolution {
    pub f1: BoldField,
    pub f: Traj,
    pub h: Traj,
    pub gramian_iters: usize,
    pub cg_history: Vec<f64>,
    /// `|h(T) - h_end|_0` relative to the data size.
    pub residual_endpoint: f64,
    /// `sup_t |L* f|_0 / sup_t |f|_0`.
    pub residual_adjoint: f64,
    /// Extreme Ritz values of the Gramian seen by CG.
    pub ritz_min: f64,
    pub ritz_max: f64,
}

impl ControlSolution {
    /// Bound on `|G^{-1}|` from the smallest Ritz value.
    pub fn inverse_bound(&self) -> f64 {
        1.0 / self.ritz_min
    }
}

/// The Gramian `f1 -> w(T)`, `L* f = 0` backward from `f1`, `L w = chi f` forward from 0.
pub struct Gramian<'a> {
    pub l: &'a OperatorL,
    pub adj: AdjointOperator,
    pub cutoff: &'a Cutoff,
    pub opts: SolverOptions,
}

impl<'a> Gramian<'a> {
    pub fn new(l: &'a OperatorL, cutoff: &'a Cutoff, opts: SolverOptions) -> Result<Gramian<'a>> {
        Ok(Gramian {
            l,
            adj: build_adjoint(l)?,
            cutoff,
            opts,
        })
    }

    pub fn adjoint_flow(&self, f1: &Field) -> Result<Traj> {
        self.adj.solve_backward(f1, &self.opts)
    }

    pub fn apply(&self, f1: &Field) -> Result<Field> {
        let f = self.adjoint_flow(f1)?;
        let forcing = Forcing::Masked {
            chi: &self.cutoff.chi,
            f: &f,
            q: None,
        };
        let zero = Field::zeros(&self.l.grid);
        let w = solve_direct_forced(self.l, &zero, Some(forcing), Direction::Forward, &self.opts)?;
        Ok(w.last().clone())
    }
}

/// Extreme eigenvalues of the Lanczos matrix assembled from CG coefficients.
fn ritz_bounds(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let e = SymmetricEigen::new(t).eigenvalues;
    let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Output of the conjugate gradient solve of `G f1 = b`.
pub struct CgOutcome {
    pub x: Field,
    pub iters: usize,
    pub history: Vec<f64>,
    pub ritz: (f64, f64),
}

/// Conjugate gradients in the real pairing `2 Re int a conj b`.
pub fn conjugate_gradient(
    apply: impl Fn(&Field) -> Result<Field>,
    b: &Field,
    max_iters: usize,
    rel_tol: f64,
) -> Result<CgOutcome> {
    let grid = b.grid().clone();
    let bn = real_inner(b, b).sqrt();
    let mut x = Field::zeros(&grid);
    let mut history = vec![if bn > 0.0 { 1.0 } else { 0.0 }];
    if bn == 0.0 {
        return Ok(CgOutcome {
            x,
            iters: 0,
            history,
            ritz: (f64::NAN, f64::NAN),
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = real_inner(&r, &r);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for it in 1..=max_iters {
        let ap = apply(&p)?;
        let pap = real_inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Observability(format!(
                "Gramian not positive along a search direction (<p, Gp> = {pap:.3e})"
            )));
        }
        let alpha = rr / pap;
        x = x.axpy(C64::new(alpha, 0.0), &p);
        r = r.axpy(C64::new(-alpha, 0.0), &ap);
        let rr_new = real_inner(&r, &r);
        alphas.push(alpha);
        let rel = rr_new.sqrt() / bn;
        history.push(rel);
        if rel <= rel_tol {
            return Ok(CgOutcome {
                x,
                iters: it,
                history,
                ritz: ritz_bounds(&alphas, &betas),
            });
        }
        let beta = rr_new / rr;
        betas.push(beta);
        p = r.axpy(C64::new(beta, 0.0), &p);
        rr = rr_new;
    }
    Err(Error::Observability(format!(
        "CG stagnated after {max_iters} iterations (relative residual {:.3e})",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

/// HUM control: `G f1 = h_end - z(T)` with `L z = q`, `z(0) = h_in`.
pub fn hum_solve(problem: &ControlProblem, opts: &HumOptions) -> Result<ControlSolution> {
    let l = problem.l;
    let g = Gramian::new(l, problem.cutoff, opts.solver)?;
    let z = solve_direct(l, &problem.h_in.u, problem.q.as_ref(), Direction::Forward, &opts.solver)?;
    let rhs = &problem.h_end.u - z.last();
    let data = problem.h_in.u.l2_norm()
        + problem.h_end.u.l2_norm()
        + problem.q.as_ref().map(|q| q.sup_norm(0.0)).unwrap_or(0.0);
    let cg = conjugate_gradient(|a| g.apply(a), &rhs, opts.max_iters, opts.rel_tol)?;
    let f = g.adjoint_flow(&cg.x)?;
    let forcing = Forcing::Masked {
        chi: &problem.cutoff.chi,
        f: &f,
        q: problem.q.as_ref(),
    };
    let h = solve_direct_forced(l, &problem.h_in.u, Some(forcing), Direction::Forward, &opts.solver)?;
    let scale = if data > 0.0 { data } else { 1.0 };
    let residual_endpoint = (h.last() - &problem.h_end.u).l2_norm() / scale;
    let fs = f.sup_norm(0.0);
    let residual_adjoint = if fs > 0.0 {
        g.adj.apply(&f).sup_norm(0.0) / fs
    } else {
        0.0
    };
    if residual_endpoint > opts.endpoint_tol {
        return Err(Error::Accuracy(format!(
            "endpoint residual {residual_endpoint:.3e} above {:.3e}",
            opts.endpoint_tol
        )));
    }
    Ok(ControlSolution {
        f1: BoldField::new(cg.x),
        f,
        h,
        gramian_iters: cg.iters,
        cg_history: cg.history,
        residual_endpoint,
        residual_adjoint,
        ritz_min: cg.ritz.0,
        ritz_max: cg.ritz.1,
    })
}

/// Solution of `P'(u)[h] - chi phi = v`, `h(0) = alpha`, `h(T) = beta`.
#[derive(Clone, Debug)]
pub struct RightInverse {
    pub h: Traj<Pair>,
    pub phi: Traj<Pair>,
    pub control: ControlSolution,
}

fn pair_traj(t: &Traj) -> Traj<Pair> {
    Traj::new(t.times, t.samples.iter().map(|f| c_inverse(&BoldField::new(f.clone()))).collect())
        .expect("length preserved")
}

fn complex_traj(t: &Traj<Pair>) -> Result<Traj> {
    let s = t.samples.iter().map(|p| c_transform(p).map(|b| b.u)).collect::<Result<Vec<_>>>()?;
    Traj::new(t.times, s)
}

/// Right inverse of the linearized control map at `l`, the linearization at
/// the current trajectory.
pub fn right_inverse_psi(
    l: &OperatorL,
    cutoff: &Cutoff,
    v: &Traj<Pair>,
    alpha: &Pair,
    beta: &Pair,
    opts: &HumOptions,
) -> Result<RightInverse> {
    let q = complex_traj(v)?;
    let problem = ControlProblem {
        l,
        cutoff,
        h_in: c_transform(alpha)?,
        h_end: c_transform(beta)?,
        q: Some(q),
    };
    let control = hum_solve(&problem, opts)?;
    Ok(RightInverse {
        h: pair_traj(&control.h),
        phi: pair_traj(&control.f),
        control,
    })
}

/// `sup_t |L h - chi phi - q|_0` relative to the data size, in complex form.
pub fn right_inverse_defect(l: &OperatorL, cutoff: &Cutoff, ri: &RightInverse, v: &Traj<Pair>) -> Result<f64> {
    let h = complex_traj(&ri.h)?;
    let f = complex_traj(&ri.phi)?;
    let q = complex_traj(v)?;
    let lh = l.apply(&h, l.sigma);
    let d = lh.sub(&cutoff.apply_traj(&f)).sub(&q);
    let scale = q.sup_norm(0.0) + h.first().l2_norm() + h.last().l2_norm();
    Ok(d.sup_norm(0.0) / if scale > 0.0 { scale } else { 1.0 })
}

/// Tame-shape regularity audit of a control solution.
#[derive(Clone, Debug)]
pub struct RegularityRow {
    pub s: f64,
    pub f_norm: f64,
    pub h_norm: f64,
    pub data_norm: f64,
    pub fitted_constant: f64,
    pub f_tail: f64,
    pub pass: bool,
}

pub const REGULARITY_CONSTANT_MAX: f64 = 1e4;

pub fn regularity_audit(
    sol: &ControlSolution,
    problem: &ControlProblem,
    s_list: &[f64],
    n_t_loss: impl Fn(f64) -> f64,
) -> Vec<RegularityRow> {
    s_list
        .iter()
        .map(|&s| {
            let phi = |s: f64| {
                problem.h_in.u.sobolev_norm(s)
                    + problem.h_end.u.sobolev_norm(s)
                    + problem.q.as_ref().map(|q| q.sup_norm(s)).unwrap_or(0.0)
            };
            let f_norm = sol.f.sup_norm(s);
            let h_norm = sol.h.sup_norm(s);
            let data_norm = phi(s) + n_t_loss(s) * phi(0.0);
            let fitted = if data_norm > 0.0 {
                f_norm.max(h_norm) / data_norm
            } else if f_norm.max(h_norm) == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let f_tail = sol
                .f
                .samples
                .iter()
                .fold(0.0, |m: f64, x| m.max(x.tail_energy(x.n() as f64 / 3.0)));
            RegularityRow {
                s,
                f_norm,
                h_norm,
                data_norm,
                fitted_constant: fitted,
                f_tail,
                pass: fitted.is_finite() && fitted <= REGULARITY_CONSTANT_MAX,
            }
        })
        .collect()
}

/// Continuous free-operator Gramian restricted to `|k|, |j| <= kmax`:
/// `G_kj = chi_{k-j} int_0^T e^{i mu (k^2 - j^2)(T - t)} dt`.
pub fn truncated_free_gramian(chi: &Field, mu: f64, horizon: f64, kmax: i64) -> DMatrix<C64> {
    let m = (2 * kmax + 1) as usize;
    let grid = chi.grid();
    let idx = |k: i64| grid.index_of(k);
    let mut g = DMatrix::<C64>::zeros(m, m);
    for (a, k) in (-kmax..=kmax).enumerate() {
        for (b, j) in (-kmax..=kmax).enumerate() {
            let c = idx(k - j).map(|i| chi.coeffs()[i]).unwrap_or(C64::new(0.0, 0.0));
            let om = mu * (k * k - j * j) as f64;
            let integral = if om == 0.0 {
                C64::new(horizon, 0.0)
            } else {
                (C64::from_polar(1.0, om * horizon) - 1.0) / C64::new(0.0, om)
            };
            g[(a, b)] = c * integral;
        }
    }
    g
}

/// Terminal datum on `|k| <= kmax` steering `h_in` to `h_end` for the free
/// operator with the truncated Gramian, by dense least squares.
pub fn truncated_free_control(
    chi: &Field,
    mu: f64,
    horizon: f64,
    kmax: i64,
    h_in: &Field,
    h_end: &Field,
) -> Result<Field> {
    let grid = chi.grid();
    let g = truncated_free_gramian(chi, mu, horizon, kmax);
    let m = (2 * kmax + 1) as usize;
    let mut rhs = nalgebra::DVector::<C64>::zeros(m);
    for (a, k) in (-kmax..=kmax).enumerate() {
        let i = grid
            .index_of(k)
            .ok_or_else(|| Error::Precondition(format!("mode {k} not on the grid")))?;
        let free = C64::from_polar(1.0, mu * (k * k) as f64 * horizon);
        rhs[a] = h_end.coeffs()[i] - free * h_in.coeffs()[i];
    }
    let svd = g.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Accuracy(format!("least squares failed: {e}")))?;
    let mut c = vec![C64::new(0.0, 0.0); grid.n()];
    for (a, k) in (-kmax..=kmax).enumerate() {
        c[grid.index_of(k).unwrap()] = sol[a];
    }
    Ok(Field::from_coeffs(grid, c))
}

/// Default control arc `(0, pi)`.
pub fn default_arc() -> (f64, f64) {
    (0.0, PI)
}
