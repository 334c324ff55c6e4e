use serde_json::json;

use super::artifacts::{heatmap, json_num, Artifacts, Csv};
use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::model::RESOLUTION_TAIL;
use crate::hamiltonian::{check_hamiltonian_structure, hamiltonian_complex, linearize_complex, Density, DensityRegistry, OperatorL};
use crate::hum::{
    estimate_observability, hum_solve, ingham_lower_bound, ingham_ratio, make_cutoff, ControlProblem, Cutoff,
};
use crate::nash_moser::{control_nonlinear, solve_cauchy_nonlinear, IterState};
use crate::reduction::{conjugation_residual, full_reduce_with, ReduceOptions, ReductionData};
use crate::sampling::{band_limited, rng, Rng64};
use crate::solver::{free_flow, solve_direct, solve_full, Direction};
use crate::spectral::{BoldField, Field, Traj};
use crate::C64;

const HEATMAP_ROWS: usize = 129;

pub(super) fn density(cfg: &RunConfig) -> Result<Density> {
    DensityRegistry::with_builtins(cfg.kappa0).get(&cfg.density)
}

pub(super) fn cutoff(cfg: &RunConfig) -> Result<Cutoff> {
    make_cutoff(&cfg.grid(), cfg.arc.0, cfg.arc.1, cfg.plateau)
}

/// Free solution of spectral size `background.amplitude` and its checked linearization.
pub(super) fn background(cfg: &RunConfig, g: &Density, r: &mut Rng64) -> Result<(Traj, OperatorL)> {
    let u0 = band_limited(&cfg.grid(), cfg.background_modes, 1.0, cfg.background_amplitude, r);
    let u = free_flow(1.0, cfg.times(), &u0);
    let mut l = linearize_complex(g.as_ref(), &u, RESOLUTION_TAIL)?;
    check_hamiltonian_structure(&mut l)?;
    Ok((u, l))
}

/// Random datum with `|u|_4 = data.norm`.
pub(super) fn nonlinear_datum(cfg: &RunConfig, r: &mut Rng64) -> Field {
    let grid = cfg.grid();
    if cfg.zero_data || cfg.data_norm == 0.0 {
        return Field::zeros(&grid);
    }
    let u = band_limited(&grid, cfg.data_modes, 1.0, 1.0, r);
    u.scale_re(cfg.data_norm / u.sobolev_norm(4.0))
}

fn thinned(u: &Traj) -> Traj {
    let stride = u.len().div_ceil(HEATMAP_ROWS).max(1);
    if stride == 1 {
        return u.clone();
    }
    let idx: Vec<usize> = (0..u.len()).step_by(stride).collect();
    let n_t = idx.len();
    let dt = u.times.dt() * stride as f64;
    let times = crate::spectral::TimeGrid::new(dt * (n_t - 1) as f64, n_t).expect("at least two rows");
    Traj::new(times, idx.iter().map(|&i| u.samples[i].clone()).collect()).expect("lengths agree")
}

pub(super) fn reduce_options(cfg: &RunConfig) -> ReduceOptions {
    ReduceOptions { eta: cfg.eta }
}

pub fn simulate(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let g = density(cfg)?;
    let (_, l) = background(cfg, &g, &mut r)?;
    art.lap("linearize");
    let red = full_reduce_with(&l, reduce_options(cfg))?;
    art.lap("reduce");
    let h0 = band_limited(&cfg.grid(), 4, 1.0, 1.0, &mut r);
    let direct = solve_direct(&l, &h0, None, Direction::Forward, &cfg.solver)?;
    let full = solve_full(&l, &red, &h0, None, Direction::Forward, &cfg.solver)?;
    art.lap("solve");
    let mut norms = Csv::new(&["t", "l2_direct", "l2_reduced", "gap", "h4_direct"]);
    for i in 0..cfg.n_t {
        let (a, b) = (&direct.samples[i], &full.traj.samples[i]);
        norms.row(&[cfg.times().t(i), a.l2_norm(), b.l2_norm(), (a - b).l2_norm(), a.sobolev_norm(4.0)]);
    }
    art.write_csv("simulate_norms.csv", &norms)?;
    art.write_csv("simulate_heatmap.csv", &heatmap(&thinned(&direct)))?;
    let mut sweeps = Csv::new(&["sweep", "increment"]);
    for (k, inc) in full.picard.increments.iter().enumerate() {
        sweeps.row(&[k as f64, *inc]);
    }
    art.write_csv("simulate_picard.csv", &sweeps)?;
    art.residual("route_cross_check", full.cross_check);
    art.residual("picard_residual", full.picard.residual);
    art.residual("mu", red.mu);
    match full.consistency {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn max_of<T>(rows: &[T], f: impl Fn(&T) -> f64) -> f64 {
    rows.iter().map(f).fold(0.0, f64::max)
}

pub(super) struct ReduceSummary {
    pub red: ReductionData,
    pub order2_variance: f64,
    pub order1_sup: f64,
    pub det_s: f64,
    pub symplectic: f64,
    pub adjoint: f64,
    pub structure: f64,
    pub conjugation: f64,
}

pub(super) fn reduce_summary(cfg: &RunConfig, l: &OperatorL, r: &mut Rng64, probes: usize) -> Result<ReduceSummary> {
    let grid = cfg.grid();
    let red = full_reduce_with(l, reduce_options(cfg))?;
    let w1 = band_limited(&grid, 4, 1.0, 1.0, r);
    let w2 = band_limited(&grid, 4, 1.0, 1.0, r);
    let rows = red.diagnostics(&w1, &w2);
    let adj = red.adjoint_defects(&w1, &w2);
    let mut conjugation: f64 = 0.0;
    for _ in 0..probes {
        let h = free_flow(1.0, cfg.times(), &band_limited(&grid, 4, 1.0, 1.0, r));
        conjugation = conjugation.max(conjugation_residual(l, &red, &h));
    }
    Ok(ReduceSummary {
        order2_variance: max_of(&rows, |x| x.order2_variance),
        order1_sup: max_of(&rows, |x| x.order1_sup),
        det_s: max_of(&rows, |x| x.det_s_deviation),
        symplectic: max_of(&rows, |x| {
            x.symplectic_s.max(x.symplectic_a).max(x.symplectic_t).max(x.symplectic_m)
        }),
        adjoint: max_of(&adj, |x| x.max()),
        structure: max_of(&red.structure, |s| s.max()),
        conjugation,
        red,
    })
}

pub fn reduce(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let g = density(cfg)?;
    let (_, l) = background(cfg, &g, &mut r)?;
    art.lap("linearize");
    let sum = reduce_summary(cfg, &l, &mut r, 3)?;
    art.lap("reduce");
    let grid = cfg.grid();
    let red = &sum.red;
    let w1 = band_limited(&grid, 4, 1.0, 1.0, &mut r);
    let w2 = band_limited(&grid, 4, 1.0, 1.0, &mut r);
    let mut diag = Csv::new(&[
        "t",
        "order2_variance",
        "order1_sup",
        "remainder_sup",
        "det_s_deviation",
        "symplectic_s",
        "symplectic_a",
        "symplectic_t",
        "symplectic_m",
    ]);
    for d in red.diagnostics(&w1, &w2) {
        diag.row(&[
            d.t,
            d.order2_variance,
            d.order1_sup,
            d.remainder_sup,
            d.det_s_deviation,
            d.symplectic_s,
            d.symplectic_a,
            d.symplectic_t,
            d.symplectic_m,
        ]);
    }
    art.write_csv("reduce_diagnostics.csv", &diag)?;
    let mut adj = Csv::new(&["t", "s", "a", "t_shift", "m"]);
    for a in red.adjoint_defects(&w1, &w2) {
        adj.row(&[a.t, a.s, a.a, a.t_shift, a.m]);
    }
    art.write_csv("reduce_adjoint.csv", &adj)?;
    let mut st = Csv::new(&["stage", "a2_real", "a1_relation", "a0_relation", "b1_relation"]);
    for (k, s) in red.structure.iter().enumerate() {
        st.row(&[k as f64, s.a2_real, s.a1_relation, s.a0_relation, s.b1_relation]);
    }
    art.write_csv("reduce_structure.csv", &st)?;
    let mut co = Csv::new(&["t", "m2", "beta", "rho", "shift", "shift_rate"]);
    for i in 0..cfg.n_t {
        co.row(&[
            cfg.times().t(i),
            red.reparam.m2[i],
            red.reparam.beta[i],
            red.reparam.rho[i],
            red.p[i],
            red.p_dot[i],
        ]);
    }
    art.write_csv("reduce_coefficients.csv", &co)?;
    art.residual("order2_variance", sum.order2_variance);
    art.residual("order1_sup", sum.order1_sup);
    art.residual("det_s_deviation", sum.det_s);
    art.residual("symplectic_max", sum.symplectic);
    art.residual("adjoint_max", sum.adjoint);
    art.residual("structure_max", sum.structure);
    art.residual("conjugation_residual", sum.conjugation);
    art.residual("mu", red.mu);
    Ok(())
}

pub fn observe(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let ing = ingham_lower_bound(cfg.horizon, cfg.observe_mu, cfg.observe_trials, cfg.observe_modes, &mut r)?;
    let mut single = vec![C64::new(0.0, 0.0); cfg.observe_modes];
    single[cfg.observe_modes - 1] = C64::new(1.0, 0.0);
    let single_ratio = ingham_ratio(cfg.observe_mu, cfg.horizon, &single);
    art.lap("ingham");
    let mut csv = Csv::new(&["mu", "horizon", "trials", "modes", "min_ratio", "max_ratio", "single_mode_ratio"]);
    csv.row(&[
        ing.mu,
        ing.horizon,
        ing.trials as f64,
        ing.modes as f64,
        ing.min_ratio,
        ing.max_ratio,
        single_ratio,
    ]);
    art.write_csv("observe_ingham.csv", &csv)?;
    let g = density(cfg)?;
    let (_, l) = background(cfg, &g, &mut r)?;
    let cut = cutoff(cfg)?;
    let obs = estimate_observability(&l, &cut, cfg.observe_operator_trials, 4, &mut r, &cfg.solver)?;
    art.lap("observability");
    let mut c = Csv::new(&["trials", "c_free", "c_operator", "degradation"]);
    c.row(&[obs.trials as f64, obs.c_free, obs.c_hat, obs.degradation]);
    art.write_csv("observe_constants.csv", &c)?;
    art.residual("ingham_min_ratio", ing.min_ratio);
    art.residual("single_mode_gap", (single_ratio - cfg.horizon).abs());
    art.residual("observability_degradation", obs.degradation);
    art.note("within_factor_four", json!(obs.within_factor_four));
    Ok(())
}

pub fn control_lin(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let g = density(cfg)?;
    let (_, l) = background(cfg, &g, &mut r)?;
    let cut = cutoff(cfg)?;
    let grid = cfg.grid();
    let h_in = band_limited(&grid, 5, 1.0, 1.0, &mut r);
    let problem = ControlProblem {
        l: &l,
        cutoff: &cut,
        h_in: BoldField::new(h_in),
        h_end: BoldField::new(Field::zeros(&grid)),
        q: None,
    };
    art.lap("setup");
    let sol = hum_solve(&problem, &cfg.hum)?;
    art.lap("hum");
    let mut cg = Csv::new(&["iteration", "relative_residual"]);
    for (k, v) in sol.cg_history.iter().enumerate() {
        cg.row(&[k as f64, *v]);
    }
    art.write_csv("control_lin_cg.csv", &cg)?;
    let chi_f = cut.apply_traj(&sol.f);
    let mut norms = Csv::new(&["t", "l2_state", "l2_control"]);
    for i in 0..cfg.n_t {
        norms.row(&[cfg.times().t(i), sol.h.samples[i].l2_norm(), chi_f.samples[i].l2_norm()]);
    }
    art.write_csv("control_lin_norms.csv", &norms)?;
    art.write_csv("control_lin_heatmap.csv", &heatmap(&thinned(&chi_f)))?;
    art.residual("endpoint", sol.residual_endpoint);
    art.residual("adjoint", sol.residual_adjoint);
    art.residual("ritz_min", sol.ritz_min);
    art.residual("ritz_max", sol.ritz_max);
    art.residual("gramian_iterations", sol.gramian_iters as f64);
    Ok(())
}

fn nm_log(state: &IterState) -> Csv {
    let mut csv = Csv::new(&["step", "theta", "residual", "increment"]);
    for rec in &state.log {
        csv.row(&[rec.j as f64, rec.theta as f64, rec.residual, rec.increment]);
    }
    csv.row(&[state.log.len() as f64, f64::NAN, state.final_residual, f64::NAN]);
    csv
}

fn record_nm(art: &mut Artifacts, state: &IterState) {
    art.residual("nm_final_residual", state.final_residual);
    art.residual("nm_min_log_ratio", state.min_log_ratio());
    art.residual("nm_steps", state.log.len() as f64);
    let secs: Vec<_> = state.log.iter().map(|r| json_num(r.seconds)).collect();
    art.note("nm_step_seconds", json!(secs));
}

pub fn control(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let g = density(cfg)?;
    let cut = cutoff(cfg)?;
    let u_in = nonlinear_datum(cfg, &mut r);
    let u_end = nonlinear_datum(cfg, &mut r);
    let out = control_nonlinear(g.as_ref(), &u_in, &u_end, cfg.times(), &cut, &cfg.nonlinear_options())?;
    art.lap("nash_moser");
    let f = out.state.f.as_ref().expect("control iterate");
    let chi_f = cut.apply_traj(f);
    art.write_csv("control_nm.csv", &nm_log(&out.state))?;
    let mut norms = Csv::new(&["t", "l2_state", "h4_state", "l2_control"]);
    for i in 0..cfg.n_t {
        let u = &out.state.u.samples[i];
        norms.row(&[cfg.times().t(i), u.l2_norm(), u.sobolev_norm(4.0), chi_f.samples[i].l2_norm()]);
    }
    art.write_csv("control_norms.csv", &norms)?;
    art.write_csv("control_heatmap.csv", &heatmap(&thinned(&chi_f)))?;
    record_nm(art, &out.state);
    art.residual("endpoint", out.endpoint);
    art.residual("resimulated_endpoint", out.resimulated_endpoint);
    art.residual("off_support", out.off_support);
    art.residual("norm_constant", out.norm_constant);
    art.note("halved", json!(out.halved));
    art.note("hum_iterations", json!(out.hum_iters));
    Ok(())
}

pub fn cauchy(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut r = rng(cfg.seed);
    let g = density(cfg)?;
    let u_in = nonlinear_datum(cfg, &mut r);
    let out = solve_cauchy_nonlinear(g.as_ref(), &u_in, cfg.times(), &cfg.nonlinear_options())?;
    art.lap("nash_moser");
    art.write_csv("cauchy_nm.csv", &nm_log(&out.state))?;
    let mut norms = Csv::new(&["t", "l2_iterate", "l2_direct", "gap", "hamiltonian"]);
    for i in 0..cfg.n_t {
        let (a, b) = (&out.state.u.samples[i], &out.direct.samples[i]);
        norms.row(&[cfg.times().t(i), a.l2_norm(), b.l2_norm(), (a - b).l2_norm(), hamiltonian_complex(g.as_ref(), a)]);
    }
    art.write_csv("cauchy_norms.csv", &norms)?;
    art.write_csv("cauchy_heatmap.csv", &heatmap(&thinned(&out.state.u)))?;
    record_nm(art, &out.state);
    art.residual("cross_check", out.cross_check);
    art.residual("uniqueness_gap", out.uniqueness_gap);
    art.residual("hamiltonian_drift", out.hamiltonian_drift);
    art.residual("hamiltonian_initial", out.hamiltonian_initial);
    art.residual("route_gap_max", out.route_gaps.iter().cloned().fold(0.0, f64::max));
    if !out.drift_ok() {
        return Err(Error::Accuracy(format!(
            "hamiltonian drift {:.3e} against H(u(0)) = {:.3e}",
            out.hamiltonian_drift, out.hamiltonian_initial
        )));
    }
    Ok(())
}
