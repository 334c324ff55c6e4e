use std::f64::consts::{PI, TAU};

use qlnls::hamiltonian::{builtin, check_hamiltonian_structure, linearize_complex, OperatorL};
use qlnls::hum::{
    cutoff_profile, estimate_observability, hum_solve, ingham_lower_bound, ingham_ratio, make_cutoff,
    observability_functional, real_inner, regularity_audit, right_inverse_defect, right_inverse_psi, smooth_step,
    truncated_free_control, ControlProblem, Cutoff, Gramian, HumOptions,
};
use qlnls::sampling::{band_limited, band_limited_real, rng};
use qlnls::solver::{free_flow, SolverOptions};
use qlnls::spectral::{c_inverse, BoldField, Field, Grid, Pair, TimeGrid, Traj};
use qlnls::{Error, C64};

fn background(g: &Grid, times: TimeGrid, name: &str, amp: f64, seed: u64) -> OperatorL {
    let mut r = rng(seed);
    let u = free_flow(1.0, times, &band_limited(g, 2, 1.0, amp, &mut r));
    let d = builtin(name, 0.05).unwrap();
    let mut l = linearize_complex(d.as_ref(), &u, 1e-10).unwrap();
    check_hamiltonian_structure(&mut l).unwrap();
    l
}

fn problem<'a>(l: &'a OperatorL, cutoff: &'a Cutoff, h_in: &Field, h_end: &Field) -> ControlProblem<'a> {
    ControlProblem {
        l,
        cutoff,
        h_in: BoldField::new(h_in.clone()),
        h_end: BoldField::new(h_end.clone()),
        q: None,
    }
}

#[test]
fn cutoff_examples() {
    let g = Grid::new(256).unwrap();
    let c = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    assert_eq!(cutoff_profile(0.0, PI, 0.5, PI / 2.0), 1.0);
    assert_eq!(cutoff_profile(0.0, PI, 0.5, 1.5 * PI), 0.0);
    for (x, v) in g.nodes().iter().zip(c.chi.values()) {
        if c.outside(*x) {
            assert_eq!(v.re, 0.0);
        }
        assert!((0.0..=1.0).contains(&v.re) && v.im == 0.0);
    }
    // rising shoulder on (0, pi/4), falling on (3pi/4, pi)
    let xs: Vec<f64> = (0..=200).map(|i| PI / 4.0 * i as f64 / 200.0).collect();
    let up: Vec<f64> = xs.iter().map(|&x| cutoff_profile(0.0, PI, 0.5, x)).collect();
    assert!(up.windows(2).all(|w| w[1] >= w[0]));
    let down: Vec<f64> = xs.iter().map(|&x| cutoff_profile(0.0, PI, 0.5, 0.75 * PI + x)).collect();
    assert!(down.windows(2).all(|w| w[1] <= w[0]));
    assert!(c.tail_energy() <= 1e-10, "{}", c.tail_energy());
    assert_eq!(smooth_step(0.5), 0.5);
    assert!(make_cutoff(&g, 1.0, 1.0, 0.5).is_err());
    assert!(make_cutoff(&g, 0.0, 7.0, 0.5).is_err());
    assert!(make_cutoff(&g, 0.0, PI, 1.0).is_err());
}

#[test]
fn ingham_examples() {
    for mu in [0.5, 1.0, 2.0] {
        let w = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.3, -0.4)];
        assert!((ingham_ratio(mu, 1.0, &w) - 1.0).abs() < 1e-10);
    }
    // two modes j = 1, 3 against the closed-form cross term
    let (mu, horizon) = (1.0, 40.0);
    let (w1, w3) = (C64::new(0.6, 0.2), C64::new(-0.1, 0.7));
    let mut w = vec![C64::new(0.0, 0.0); 4];
    w[1] = w1;
    w[3] = w3;
    let om = mu * (1.0 - 9.0);
    let cross = w1 * w3.conj() * (C64::from_polar(1.0, om * horizon) - 1.0) / C64::new(0.0, om);
    let den = w1.norm_sqr() + w3.norm_sqr();
    let want = horizon + 2.0 * cross.re / den;
    let got = ingham_ratio(mu, horizon, &w);
    assert!((got - want).abs() < 1e-10 * want, "{got} {want}");
    assert!((got / horizon - 1.0).abs() < 0.01);

    let mut r = rng(1);
    for mu in [0.5, 1.0, 2.0] {
        let rep = ingham_lower_bound(1.0, mu, 200, 6, &mut r).unwrap();
        assert!(rep.min_ratio > 0.0 && rep.min_ratio <= rep.max_ratio);
    }
    assert!(matches!(ingham_lower_bound(1.0, 0.3, 10, 4, &mut r), Err(Error::Precondition(_))));
}

#[test]
fn observability_examples() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 65).unwrap();
    let free = OperatorL::free(&g, times, 1.0);
    let full = Cutoff::full(&g);
    let opts = SolverOptions::default();
    assert_eq!(observability_functional(&free, &full, &Field::zeros(&g), &opts).unwrap(), 0.0);
    let e = Field::mode(&g, 1, C64::new(1.0, 0.0));
    let v = observability_functional(&free, &full, &e, &opts).unwrap();
    assert!((v - 2.0 * TAU).abs() < 1e-10, "{v}");
}

#[test]
fn observability_degrades_at_most_by_four() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let l = background(&g, times, "cubic-a", 1e-2, 2);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let mut r = rng(3);
    let rep = estimate_observability(&l, &cut, 10, 5, &mut r, &SolverOptions::default()).unwrap();
    assert!(rep.c_free > 0.0 && rep.c_hat > 0.0);
    assert!(rep.within_factor_four, "{rep:?}");
    assert!((rep.degradation - 1.0).abs() < 0.1);
}

#[test]
fn zero_data_gives_zero_control() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 33).unwrap();
    let l = OperatorL::free(&g, times, 1.0);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let z = Field::zeros(&g);
    let sol = hum_solve(&problem(&l, &cut, &z, &z), &HumOptions::default()).unwrap();
    assert_eq!(sol.f.sup_norm(0.0), 0.0);
    assert_eq!(sol.h.sup_norm(0.0), 0.0);
    assert_eq!(sol.gramian_iters, 0);
}

#[test]
fn full_torus_single_mode() {
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let l = OperatorL::free(&g, times, 1.0);
    let full = Cutoff::full(&g);
    let delta = 0.1;
    let h_in = Field::mode(&g, 1, C64::new(delta, 0.0));
    let z = Field::zeros(&g);
    let sol = hum_solve(&problem(&l, &full, &h_in, &z), &HumOptions::default()).unwrap();
    assert!(sol.residual_endpoint <= 1e-8, "{}", sol.residual_endpoint);
    // with chi = 1 the Gramian is T times the identity
    let closed = Field::mode(&g, 1, C64::from_polar(-delta, 1.0));
    assert!((&sol.f1.u - &closed).l2_norm() < 1e-8 * delta);
    let oracle = truncated_free_control(&full.chi, 1.0, 1.0, 8, &h_in, &z).unwrap();
    assert!((&sol.f1.u - &oracle).l2_norm() < 1e-8 * delta);
}

#[test]
fn arc_control_of_five_mode_datum() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 257).unwrap();
    let l = OperatorL::free(&g, times, 1.0);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let mut r = rng(4);
    let h_in = band_limited(&g, 2, 1.0, 1.0, &mut r);
    let z = Field::zeros(&g);
    let prob = problem(&l, &cut, &h_in, &z);
    let sol = hum_solve(&prob, &HumOptions::default()).unwrap();
    assert!(sol.residual_endpoint <= 1e-6);
    assert!(sol.residual_adjoint <= 1e-6, "{}", sol.residual_adjoint);
    assert!(sol.cg_history.windows(2).all(|w| w[1] < w[0] * 10.0));
    let f_bound = sol.inverse_bound() * real_inner(&h_in, &h_in).sqrt();
    assert!(real_inner(&sol.f1.u, &sol.f1.u).sqrt() <= 1.01 * f_bound);
    // chi f vanishes off the arc
    for f in &sol.f.samples {
        let cf = cut.apply(f);
        for (x, v) in g.nodes().iter().zip(cf.values()) {
            if cut.outside(*x) {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }
    let oracle = truncated_free_control(&cut.chi, 1.0, 1.0, 8, &h_in, &z).unwrap();
    let low = |f: &Field| f.truncate(8.0);
    let gap = (&low(&oracle) - &low(&sol.f1.u)).l2_norm() / sol.f1.u.l2_norm();
    assert!(gap <= 1e-4, "{gap}");
}

#[test]
fn gramian_is_symmetric_and_positive() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let l = background(&g, times, "cubic-b", 1e-2, 5);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let gram = Gramian::new(&l, &cut, SolverOptions::default()).unwrap();
    let mut r = rng(6);
    let mut c_num = f64::INFINITY;
    for _ in 0..4 {
        let a = band_limited(&g, 5, 1.0, 1.0, &mut r);
        let b = band_limited(&g, 5, 1.0, 1.0, &mut r);
        let (ga, gb) = (gram.apply(&a).unwrap(), gram.apply(&b).unwrap());
        let na = real_inner(&a, &a).sqrt();
        let nb = real_inner(&b, &b).sqrt();
        let asym = (real_inner(&ga, &b) - real_inner(&a, &gb)).abs();
        assert!(asym <= 1e-8 * na * nb, "{asym}");
        c_num = c_num.min(real_inner(&ga, &a) / (na * na));
    }
    assert!(c_num > 0.0);
    let mut r = rng(7);
    let obs = estimate_observability(&l, &cut, 4, 5, &mut r, &SolverOptions::default()).unwrap();
    assert!(c_num >= 0.25 * obs.c_hat, "{c_num} {}", obs.c_hat);
}

#[test]
fn perturbed_control_satisfies_adjoint_equation() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 257).unwrap();
    let l = background(&g, times, "cubic-a", 1e-2, 8);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let mut r = rng(9);
    let h_in = band_limited(&g, 3, 1.0, 1.0, &mut r);
    let h_end = band_limited(&g, 3, 1.0, 1.0, &mut r);
    let sol = hum_solve(&problem(&l, &cut, &h_in, &h_end), &HumOptions::default()).unwrap();
    assert!(sol.residual_endpoint <= 1e-6);
    assert!(sol.residual_adjoint <= 1e-6, "{}", sol.residual_adjoint);
    assert!(sol.ritz_min > 0.0 && sol.ritz_min <= sol.ritz_max);
}

#[test]
fn right_inverse_cases() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let opts = HumOptions::default();
    let zp = Pair::zeros(&g);
    let zv = Traj::new(times, vec![zp.clone(); times.n_t]).unwrap();
    let free = OperatorL::free(&g, times, 1.0);
    let ri = right_inverse_psi(&free, &cut, &zv, &zp, &zp, &opts).unwrap();
    assert_eq!(ri.h.sup_norm(0.0), 0.0);
    assert_eq!(ri.phi.sup_norm(0.0), 0.0);

    let mut r = rng(10);
    let alpha = Pair::new(band_limited_real(&g, 2, 1.0, 1e-3, &mut r), band_limited_real(&g, 2, 1.0, 1e-3, &mut r)).unwrap();
    let beta = Pair::new(band_limited_real(&g, 2, 1.0, 1e-3, &mut r), band_limited_real(&g, 2, 1.0, 1e-3, &mut r)).unwrap();
    let ri = right_inverse_psi(&free, &cut, &zv, &alpha, &beta, &opts).unwrap();
    let direct = hum_solve(
        &ControlProblem {
            l: &free,
            cutoff: &cut,
            h_in: qlnls::spectral::c_transform(&alpha).unwrap(),
            h_end: qlnls::spectral::c_transform(&beta).unwrap(),
            q: Some(Traj::zeros(&g, times)),
        },
        &opts,
    )
    .unwrap();
    let back = c_inverse(&BoldField::new(direct.f.last().clone()));
    assert!((&back.u1 - &ri.phi.last().u1).sup_norm() < 1e-15);

    // the defect stencil and the forced integrator are fourth order in dt, and
    // chi f carries frequencies up to mu n^2 / 4, hence the coarse grid
    let g = Grid::new(32).unwrap();
    let times = TimeGrid::new(1.0, 3073).unwrap();
    let cut = make_cutoff(&g, 0.0, PI, 0.0).unwrap();
    let alpha = Pair::new(band_limited_real(&g, 2, 1.0, 1e-3, &mut r), band_limited_real(&g, 2, 1.0, 1e-3, &mut r)).unwrap();
    for name in ["cubic-a", "cubic-b"] {
        let l = background(&g, times, name, 1e-2, 11);
        let v0 = Pair::new(band_limited_real(&g, 3, 1.0, 1e-3, &mut r), band_limited_real(&g, 3, 1.0, 1e-3, &mut r)).unwrap();
        let v = Traj::new(times, vec![v0; times.n_t]).unwrap();
        let ri = right_inverse_psi(&l, &cut, &v, &alpha, &Pair::zeros(&g), &opts).unwrap();
        let d = right_inverse_defect(&l, &cut, &ri, &v).unwrap();
        assert!(d <= 1e-6, "{name} {d}");
    }
}

#[test]
fn regularity_of_free_control() {
    let g = Grid::new(64).unwrap();
    let times = TimeGrid::new(1.0, 129).unwrap();
    let l = OperatorL::free(&g, times, 1.0);
    let cut = make_cutoff(&g, 0.0, PI, 0.5).unwrap();
    let mut r = rng(12);
    let h_in = band_limited(&g, 4, 1.0, 1.0, &mut r);
    let h_end = band_limited(&g, 4, 1.0, 1.0, &mut r);
    let prob = problem(&l, &cut, &h_in, &h_end);
    let sol = hum_solve(&prob, &HumOptions::default()).unwrap();
    let rows = regularity_audit(&sol, &prob, &[0.0, 1.0, 2.0, 4.0], |s| l.n_t(s + 2.0));
    for row in &rows {
        assert!(row.pass && row.f_norm.is_finite() && row.h_norm.is_finite(), "{row:?}");
        assert!(row.f_tail <= 1e-6, "{row:?}");
    }
    // s = 0 is the L2 bound
    assert!(rows[0].fitted_constant * rows[0].data_norm >= sol.f.sup_norm(0.0));
}
