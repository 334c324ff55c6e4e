//! Invariant suite behind the `check` subcommand.

use super::artifacts::{Artifacts, Csv};
use super::commands::{background, cutoff, density, reduce_summary};
use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::check_density;
use crate::hum::{hum_solve, ingham_lower_bound, ingham_ratio, real_inner, ControlProblem, Gramian};
use crate::nash_moser::NMParams;
use crate::sampling::{band_limited, rng, Rng64};
use crate::solver::{build_adjoint, free_flow, free_propagate, integration_by_parts_defect};
use crate::spectral::smoothing::{block_constant, block_count, smoothing_constant};
use crate::spectral::{block_r, c_inverse, c_transform, smooth_s, BoldField, Field, Grid};
use crate::C64;

/// One line of the suite: `value <= bound` passes.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub bound: f64,
}

impl CheckLine {
    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

struct Suite(Vec<CheckLine>);

impl Suite {
    fn add(&mut self, name: &str, value: f64, bound: f64) {
        self.0.push(CheckLine {
            name: name.to_string(),
            value: if value.is_nan() { f64::INFINITY } else { value },
            bound,
        });
    }
}

/// Largest relative violation of the smoothing inequalities, and the
/// orthogonality defect `| sum |R_j u|^2 - |u|^2 | / |u|^2`.
fn smoothing_defects(grid: &Grid, fields: usize, r: &mut Rng64) -> (f64, f64) {
    let jmax = block_count(grid.n());
    let levels = [0.0, 1.0, 2.0, 3.0];
    let mut worst: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    let mut viol = |lhs: f64, rhs: f64| worst = worst.max((lhs - rhs) / rhs.max(1e-300));
    for _ in 0..fields {
        let u = band_limited(grid, grid.n() as i64 / 2 - 1, 0.5, 1.0, r);
        for j in 0..=jmax {
            let sj = smooth_s(j, &u);
            let rest = &u - &sj;
            let rj = block_r(j, &u);
            let p = 2f64.powi(j as i32);
            for &a in &levels {
                viol(sj.sobolev_norm(a), u.sobolev_norm(a));
                for &b in &levels {
                    if a < b {
                        viol(sj.sobolev_norm(b), p.powf(b - a) * smoothing_constant(b) * sj.sobolev_norm(a));
                    }
                    if a > b {
                        viol(rest.sobolev_norm(b), p.powf(-(a - b)) * rest.sobolev_norm(a));
                    }
                    viol(rj.sobolev_norm(b), p.powf(b - a) * block_constant(a, b) * rj.sobolev_norm(a));
                }
            }
        }
        for &a in &levels {
            let sum: f64 = (0..=jmax).map(|j| block_r(j, &u).sobolev_norm(a).powi(2)).sum();
            let tot = u.sobolev_norm(a).powi(2);
            ortho = ortho.max((sum - tot).abs() / tot);
        }
    }
    (worst.max(0.0), ortho)
}

fn free_mode_error(grid: &Grid) -> f64 {
    let mut err: f64 = 0.0;
    for k in -(grid.n() as i64 / 2 - 1)..(grid.n() as i64 / 2) {
        let u = Field::mode(grid, k, C64::new(1.0, 0.0));
        for &(mu, t) in &[(1.0, 0.37), (2.0, 1.0), (0.5, 3.1)] {
            let v = free_propagate(mu, t, &u);
            let want = C64::from_polar(1.0, mu * (k * k) as f64 * t);
            let j = grid.index_of(k).expect("inside the band");
            err = err.max((v.coeffs()[j] - want).norm());
        }
    }
    err
}

/// Runs the invariant suite on the configured problem.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckLine>> {
    let mut s = Suite(Vec::new());
    let mut r = rng(cfg.seed);
    let grid = cfg.grid();

    let (smooth, ortho) = smoothing_defects(&grid, 20, &mut r);
    s.add("smoothing_inequalities", smooth, 1e-12);
    s.add("block_orthogonality", ortho, 1e-12);
    s.add("nm_default_admissible", if NMParams::default().validate().is_ok() { 0.0 } else { 1.0 }, 0.0);
    s.add("nm_config_admissible", if cfg.nm.validate().is_ok() { 0.0 } else { 1.0 }, 0.0);

    let g = density(cfg)?;
    let dr = check_density(g.as_ref(), 200, &mut r)?;
    s.add("density_origin", dr.origin_residual, 1e-14);
    s.add("density_hessian_symmetry", dr.hessian_asymmetry, 1e-12);

    s.add("free_propagator_modes", free_mode_error(&grid), 1e-12);
    let h = band_limited(&grid, 6, 1.0, 1.0, &mut r);
    let back = c_transform(&c_inverse(&BoldField::new(h.clone())))?;
    s.add("complex_pair_roundtrip", (&back.u - &h).l2_norm() / h.l2_norm(), 1e-14);

    let (_, l) = background(cfg, &g, &mut r)?;
    let sum = reduce_summary(cfg, &l, &mut r, 2)?;
    s.add("structure_all_stages", sum.structure, 1e-8);
    s.add("order2_constant", sum.order2_variance, 1e-10);
    s.add("order1_eliminated", sum.order1_sup, 1e-9);
    s.add("det_symmetrizer", sum.det_s, 1e-10);
    s.add("symplectic_conjugators", sum.symplectic, 1e-10);
    s.add("conjugator_adjoints", sum.adjoint, 1e-9);
    s.add("conjugation_residual", sum.conjugation, 1e-6);

    let adj = build_adjoint(&l)?;
    let hh = free_flow(1.0, cfg.times(), &band_limited(&grid, 4, 1.0, 1.0, &mut r));
    let gg = free_flow(1.0, cfg.times(), &band_limited(&grid, 4, 1.0, 1.0, &mut r));
    let scale = hh.sup_norm(2.0) * gg.sup_norm(0.0) * cfg.horizon;
    s.add("integration_by_parts", integration_by_parts_defect(&l, &adj, &hh, &gg).abs() / scale, 1e-8);

    let ing = ingham_lower_bound(cfg.horizon, cfg.observe_mu, cfg.observe_trials, cfg.observe_modes, &mut r)?;
    s.add("ingham_positive", if ing.min_ratio > 0.0 { 0.0 } else { 1.0 }, 0.0);
    let mut one = vec![C64::new(0.0, 0.0); cfg.observe_modes];
    one[0] = C64::new(1.0, 0.0);
    s.add("ingham_single_mode", (ingham_ratio(cfg.observe_mu, cfg.horizon, &one) - cfg.horizon).abs(), 1e-10);

    let cut = cutoff(cfg)?;
    let off = grid
        .nodes()
        .iter()
        .zip(cut.chi.values())
        .filter(|(x, _)| cut.outside(**x))
        .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    s.add("cutoff_support", off, 0.0);
    let gram = Gramian::new(&l, &cut, cfg.solver)?;
    let a = band_limited(&grid, 5, 1.0, 1.0, &mut r);
    let b = band_limited(&grid, 5, 1.0, 1.0, &mut r);
    let (ga, gb) = (gram.apply(&a)?, gram.apply(&b)?);
    let sym = (real_inner(&ga, &b) - real_inner(&a, &gb)).abs() / (ga.l2_norm() * b.l2_norm());
    s.add("gramian_symmetry", sym, 1e-10);
    s.add("gramian_positive", if real_inner(&ga, &a) > 0.0 { 0.0 } else { 1.0 }, 0.0);

    let problem = ControlProblem {
        l: &l,
        cutoff: &cut,
        h_in: BoldField::new(band_limited(&grid, 5, 1.0, 1.0, &mut r)),
        h_end: BoldField::new(Field::zeros(&grid)),
        q: None,
    };
    let sol = hum_solve(&problem, &cfg.hum)?;
    s.add("hum_endpoint", sol.residual_endpoint, cfg.hum.endpoint_tol);
    s.add("hum_adjoint", sol.residual_adjoint, 1e-6);
    Ok(s.0)
}

pub fn check_command(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let lines = run_checks(cfg)?;
    art.lap("checks");
    let mut csv = Csv::new(&["check", "value", "bound", "pass"]);
    for l in &lines {
        csv.labelled(&l.name, &[l.value, l.bound, if l.pass() { 1.0 } else { 0.0 }]);
        art.residual(&l.name, l.value);
    }
    art.write_csv("check.csv", &csv)?;
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass()).map(|l| l.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Accuracy(format!("failed checks: {}", failed.join(", "))))
    }
}
