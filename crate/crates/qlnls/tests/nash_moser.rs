use std::f64::consts::PI;

use qlnls::hamiltonian::builtin;
use qlnls::hum::make_cutoff;
use qlnls::nash_moser::{
    block_ratio, control_nonlinear, nmh_solve, off_support, solve_cauchy_nonlinear, solve_nonlinear, DataZ,
    NMParams, NonlinearOptions, PhiMap, SpaceNorms,
};
use qlnls::sampling::{band_limited, rng};
use qlnls::solver::{free_flow, rel_sup_dist};
use qlnls::spectral::{Field, Grid, TimeGrid, Traj};
use qlnls::{Error, C64};

fn datum(g: &Grid, seed: u64, norm4: f64) -> Field {
    let mut r = rng(seed);
    let u = band_limited(g, 3, 1.0, 1.0, &mut r);
    u.scale_re(norm4 / u.sobolev_norm(4.0))
}

#[test]
fn default_parameters_are_admissible() {
    let p = NMParams::default();
    p.validate().unwrap();
    assert_eq!((p.a1, p.alpha, p.beta_reg, p.a2), (2.0, 5.0, 5.0, 9.0));
    assert_eq!(p.j0, 3);
    assert_eq!(p.tol, 1e-8);
}

#[test]
fn admissibility_is_strict() {
    let base = NMParams::default();
    let bad = [
        NMParams { a0: 2.5, ..base },
        NMParams { mu_loss: 2.5, ..base },
        // alpha on the lower boundary a1 + beta/2
        NMParams { alpha: 4.5, ..base },
        // alpha on the upper boundary a1 + beta
        NMParams { alpha: 7.0, beta_reg: 5.0, a2: 20.0, ..base },
        // 2 alpha = a1 + a2
        NMParams { a2: 8.0, ..base },
        NMParams { delta: 0.0, ..base },
        NMParams { max_iter: 0, ..base },
    ];
    for p in bad {
        assert!(matches!(p.validate(), Err(Error::Config(_))), "{p:?}");
    }
    let ok = NMParams { alpha: 4.5 + 1e-12, ..base };
    ok.validate().unwrap();
}

#[test]
fn phi_at_zero_vanishes_and_is_linear_without_density() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 33).unwrap();
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let d = builtin("cubic-a", 0.05).unwrap();
    let zero = Traj::zeros(&g, times);
    let z = PhiMap::control(d.as_ref(), &cut).eval(&zero, Some(&zero));
    assert_eq!(SpaceNorms::f(&z, 0.0), 0.0);

    let lin = builtin("zero", 0.0).unwrap();
    let phi = PhiMap::control(lin.as_ref(), &cut);
    let mut r = rng(1);
    let mk = |r: &mut _| free_flow(1.0, times, &band_limited(&g, 4, 1.0, 1.0, r)).scale(0.5);
    let (u, w, f) = (mk(&mut r), mk(&mut r), mk(&mut r));
    let c = 1.7;
    let lhs = phi.eval(&u.add(&w.scale(c)), Some(&f));
    let rhs_u = phi.eval(&u, Some(&f));
    let rhs_w = phi.eval(&w, Some(&zero));
    let want = rhs_u.v.add(&rhs_w.v.scale(c));
    assert!(lhs.v.sub(&want).sup_norm(0.0) < 1e-12);
    // the free flow is annihilated by P
    assert!(phi.eval(&u, None).v.sup_norm(0.0) < 1e-10);
}

#[test]
fn norms_and_block_ratio() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 33).unwrap();
    let zero = DataZ::zeros(&g, times, true);
    assert_eq!(SpaceNorms::f(&zero, 3.0), 0.0);
    assert_eq!(block_ratio(&zero, 1.0), 0.0);
    let z = DataZ {
        v: Traj::zeros(&g, times),
        alpha: datum(&g, 2, 1e-3),
        beta: Some(datum(&g, 3, 1e-3)),
    };
    assert!((block_ratio(&z, 5.0) - 1.0).abs() < 1e-12);
    assert!((SpaceNorms::f(&z, 0.0) - 2e-3).abs() < 1e-15);
    let e = Field::mode(&g, 1, C64::new(1.0, 0.0));
    let u = free_flow(1.0, times, &e);
    // u_t = i u and u_tt = -u, so the norm is <1>^4 + <1>^2 + 1
    let want = 7.0;
    let x = SpaceNorms::x(&u, 0.0);
    assert!((x - want).abs() < 1e-6, "{x} {want}");
}

#[test]
fn data_above_delta_is_rejected() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 33).unwrap();
    let d = builtin("cubic-a", 0.05).unwrap();
    let phi = PhiMap::cauchy(d.as_ref());
    let big = DataZ {
        v: Traj::zeros(&g, times),
        alpha: Field::mode(&g, 2, C64::new(1.0, 0.0)),
        beta: None,
    };
    let psi = |_: &Traj, _: &DataZ| -> qlnls::Result<(Traj, Option<Traj>)> { unreachable!() };
    let r = nmh_solve(&phi, psi, &big, (Traj::zeros(&g, times), None), &NMParams::default());
    assert!(matches!(r, Err(Error::Smallness(_))));
}

#[test]
fn linear_problem_converges_in_one_step() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 65).unwrap();
    let lin = builtin("zero", 0.0).unwrap();
    let u_in = datum(&g, 4, 1e-3);
    let out = solve_cauchy_nonlinear(lin.as_ref(), &u_in, times, &NonlinearOptions::default()).unwrap();
    assert!(out.state.converged);
    assert_eq!(out.state.log.len(), 1);
    assert!(rel_sup_dist(&out.state.u, &free_flow(1.0, times, &u_in)) < 1e-10);
}

#[test]
fn zero_data_is_trivial() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 33).unwrap();
    let d = builtin("cubic-b", 0.05).unwrap();
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let z = Field::zeros(&g);
    let opts = NonlinearOptions::default();
    let c = control_nonlinear(d.as_ref(), &z, &z, times, &cut, &opts).unwrap();
    assert!(c.state.log.is_empty());
    assert_eq!(c.state.f.as_ref().unwrap().sup_norm(0.0), 0.0);
    assert_eq!(c.off_support, 0.0);
    let k = solve_cauchy_nonlinear(d.as_ref(), &z, times, &opts).unwrap();
    assert_eq!(k.state.u.sup_norm(0.0), 0.0);
    assert_eq!(k.hamiltonian_drift, 0.0);
}

#[test]
fn cauchy_matches_method_of_lines() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 513).unwrap();
    let u_in = datum(&g, 5, 1e-3);
    for name in ["cubic-a", "cubic-b"] {
        let d = builtin(name, 0.05).unwrap();
        let out = solve_cauchy_nonlinear(d.as_ref(), &u_in, times, &NonlinearOptions::default()).unwrap();
        assert!(out.state.converged);
        assert!(out.cross_check <= 1e-5, "{name} {}", out.cross_check);
        assert!(out.uniqueness_gap <= 1e-6, "{name} {}", out.uniqueness_gap);
        assert!(out.drift_ok(), "{name} {} {}", out.hamiltonian_drift, out.hamiltonian_initial);
    }
}

#[test]
fn direct_integrator_conserves_energy() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let mut r = rng(6);
    let u0 = band_limited(&g, 4, 1.0, 0.1, &mut r);
    let d = builtin("cubic-a", 0.05).unwrap();
    let coarse = solve_nonlinear(d.as_ref(), &u0, times, None, 1);
    let fine = solve_nonlinear(d.as_ref(), &u0, times, None, 4);
    assert!(rel_sup_dist(&coarse, &fine) < 1e-8);
    let h0 = qlnls::hamiltonian::hamiltonian_complex(d.as_ref(), &u0);
    for f in &fine.samples {
        assert!((qlnls::hamiltonian::hamiltonian_complex(d.as_ref(), f) - h0).abs() <= 1e-8 * h0.abs());
    }
}

#[test]
fn off_support_measures_leakage() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 9).unwrap();
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let f = Traj::new(times, vec![Field::constant(&g, C64::new(1.0, 0.0)); 9]).unwrap();
    assert_eq!(off_support(&cut, &f), 0.0);
}
