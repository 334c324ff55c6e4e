use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use qlnls::hamiltonian::{builtin, check_hamiltonian_structure, linearize_complex, Coeffs, OperatorL};
use qlnls::reduction::diffeo::{composition_residual, derivative_identity_residual};
use qlnls::reduction::{
    apply_a, apply_a_inv, conjugation_residual, eliminate_order_one, full_reduce, homological_space, invert_diffeo,
    order_one_multiplier, straighten_space, symmetrize, translate_space, ReductionData, TimeReparam,
};
use qlnls::sampling::{band_limited, band_limited_real, rng};
use qlnls::solver::free_flow;
use qlnls::spectral::{Field, Grid, TimeGrid};
use qlnls::{Error, C64};

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn cst(g: &Grid, re: f64, im: f64) -> Field {
    Field::constant(g, C64::new(re, im))
}

fn steady(g: &Grid, times: TimeGrid, c: Coeffs) -> OperatorL {
    OperatorL::new(g, times, 1.0, vec![c; times.n_t]).unwrap()
}

/// Gauss-Legendre on many panels; independent of the crate's quadratures.
fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let panels = 4000;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let m = a + (p as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(m + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

fn background(n: usize, n_t: usize, name: &str, amp: f64, seed: u64) -> OperatorL {
    let g = grid(n);
    let times = TimeGrid::new(1.0, n_t).unwrap();
    let mut r = rng(seed);
    let u = free_flow(1.0, times, &band_limited(&g, 2, 1.0, amp, &mut r));
    let d = builtin(name, 0.05).unwrap();
    let mut l = linearize_complex(d.as_ref(), &u, 1e-10).unwrap();
    check_hamiltonian_structure(&mut l).unwrap();
    l
}

#[test]
fn symmetrize_examples() {
    let g = grid(16);
    let times = TimeGrid::new(1.0, 9).unwrap();
    let zero = OperatorL::free(&g, times, 1.0);
    let (sym, l0) = symmetrize(&zero).unwrap();
    assert!(sym.s.iter().all(|s| (&s.p - &cst(&g, 1.0, 0.0)).sup_norm() < 1e-15 && s.q.sup_norm() == 0.0));
    assert!(l0.sup_coeffs() < 1e-14);

    let mut c = Coeffs::zeros(&g);
    c.a2 = cst(&g, 0.1, 0.0);
    let (sym, l0) = symmetrize(&steady(&g, times, c)).unwrap();
    assert!((&sym.lambda[0] - &cst(&g, 1.1, 0.0)).sup_norm() < 1e-15);
    assert!((&sym.s[0].p - &cst(&g, 1.0, 0.0)).sup_norm() < 1e-15 && sym.s[0].q.sup_norm() == 0.0);
    assert!((&l0.coeffs[4].a2 - &cst(&g, 0.1, 0.0)).sup_norm() < 1e-15);

    let mut c = Coeffs::zeros(&g);
    c.b2 = cst(&g, 0.6, 0.0);
    let (sym, l0) = symmetrize(&steady(&g, times, c)).unwrap();
    assert!((&sym.lambda[0] - &cst(&g, 0.8, 0.0)).sup_norm() < 1e-15);
    assert!(l0.coeffs[0].b2.sup_norm() == 0.0 && l0.coeffs[0].b1.sup_norm() < 1e-14);
    assert!(sym.s[0].det().map_values(|z| z - 1.0).sup_norm() < 1e-14);

    let mut c = Coeffs::zeros(&g);
    c.b2 = cst(&g, 0.95, 0.0);
    assert!(matches!(symmetrize(&steady(&g, times, c)), Err(Error::Degeneracy(_))));
}

#[test]
fn straighten_examples() {
    let g = grid(64);
    let times = TimeGrid::new(1.0, 9).unwrap();
    let mut r = rng(3);
    let mut c = Coeffs::zeros(&g);
    c.a0 = band_limited(&g, 3, 1.0, 0.01, &mut r);
    let l0 = steady(&g, times, c.clone());
    let (diffeo, m2, l1) = straighten_space(&l0).unwrap();
    assert!(m2.iter().all(|&m| (m - 1.0).abs() < 1e-15));
    assert!(diffeo.alpha.iter().all(|a| a.sup_norm() < 1e-15));
    assert!((&l1.coeffs[3].a0 - &c.a0).sup_norm() < 1e-14);

    let d = Field::from_real_fn(&g, |x| 1.0 + 0.1 * x.cos());
    let (m, alpha) = homological_space(&d).unwrap();
    let oracle = (quad(|x| (1.0 + 0.1 * x.cos()).powf(-0.5), 0.0, TAU) / TAU).powi(-2);
    assert!((m - oracle).abs() < 1e-12, "{m} vs {oracle}");
    assert!(m > 0.99 && m < 1.01);

    let mut c = Coeffs::zeros(&g);
    c.a2 = Field::from_real_fn(&g, |x| 0.1 * x.cos());
    let (diffeo, m2, l1) = straighten_space(&steady(&g, times, c)).unwrap();
    assert!((m2[0] - oracle).abs() < 1e-12);
    assert!((&diffeo.alpha[0] - &alpha).sup_norm() < 1e-15);
    for (i, ci) in l1.coeffs.iter().enumerate() {
        let principal = ci.a2.map_values(|v| v + 1.0);
        assert!((&principal - &cst(&g, m2[i], 0.0)).sup_norm() < 1e-9);
    }
    let mut c = Coeffs::zeros(&g);
    c.a2 = cst(&g, -0.8, 0.0);
    assert!(matches!(straighten_space(&steady(&g, times, c)), Err(Error::Degeneracy(_))));
}

#[test]
fn invert_diffeo_examples() {
    let g = grid(64);
    assert!(invert_diffeo(&Field::zeros(&g)).unwrap().sup_norm() == 0.0);
    let c = invert_diffeo(&cst(&g, 0.3, 0.0)).unwrap();
    assert!((&c - &cst(&g, -0.3, 0.0)).sup_norm() < 1e-14);

    let alpha = Field::from_real_fn(&g, |x| 0.1 * x.sin());
    let b = invert_diffeo(&alpha).unwrap();
    assert!(composition_residual(&alpha, &b) < 1e-10);
    assert!(derivative_identity_residual(&alpha, &b) < 1e-9);
    // the forward map sampled analytically undoes the inverse at every node
    for (j, bv) in b.values().iter().enumerate() {
        let y = g.node(j);
        let x = y + bv.re;
        assert!((x + 0.1 * x.sin() - y).abs() < 1e-12);
    }
    let steep = Field::from_real_fn(&g, |x| 0.6 * x.sin());
    assert!(matches!(invert_diffeo(&steep), Err(Error::Invertibility(_))));
}

#[test]
fn diffeo_is_isometric_and_invertible() {
    let g = grid(128);
    let mut r = rng(4);
    assert!((&apply_a(&Field::zeros(&g), &cst(&g, 2.0, 1.0)) - &cst(&g, 2.0, 1.0)).sup_norm() < 1e-14);
    let alpha = band_limited_real(&g, 3, 1.0, 0.05, &mut r);
    let b = invert_diffeo(&alpha).unwrap();
    for _ in 0..5 {
        let u = band_limited(&g, 6, 1.0, 1.0, &mut r);
        let au = apply_a(&alpha, &u);
        assert!((au.l2_norm() / u.l2_norm() - 1.0).abs() < 1e-10);
        let back = apply_a_inv(&b, &au);
        assert!((&back - &u).l2_norm() < 1e-9 * u.l2_norm());
    }
}

#[test]
fn reparam_examples() {
    let times = TimeGrid::new(1.0, 129).unwrap();
    let id = TimeReparam::new(times, vec![1.0; 129]).unwrap();
    assert!((id.mu - 1.0).abs() < 1e-14);
    assert!(id.beta.iter().enumerate().all(|(i, &b)| (b - times.t(i)).abs() < 1e-14));
    assert!(id.rho.iter().all(|&r| (r - 1.0).abs() < 1e-14));

    for (horizon, delta) in [(1.0, 0.3), (2.0, 0.2)] {
        let times = TimeGrid::new(horizon, 257).unwrap();
        let w = TAU / horizon;
        let m2: Vec<f64> = times.times().iter().map(|t| 1.0 + delta * (w * t).sin()).collect();
        let r = TimeReparam::new(times, m2).unwrap();
        assert!((r.mu - 1.0).abs() < 1e-9, "{}", r.mu);
        assert_eq!(*r.beta.last().unwrap(), horizon);
        for i in 0..times.n_t {
            let t = times.t(i);
            let closed = t + delta / w * (1.0 - (w * t).cos());
            assert!((r.beta[i] - closed).abs() < 1e-8, "{} {closed}", r.beta[i]);
            assert!((r.beta_at(r.beta_inv[i]) - t).abs() < 1e-10);
            assert!((r.rho[i] - r.m2_at(r.beta_inv[i]) / r.mu).abs() < 1e-10);
        }
    }
    assert!(matches!(TimeReparam::new(times, vec![-1.0; 129]), Err(Error::Degeneracy(_))));
}

#[test]
fn time_transpose_of_reparam() {
    // int u(beta(t)) v(t) dt = int u(tau) v(beta^{-1}(tau)) / rho(tau) dtau
    let times = TimeGrid::new(1.0, 257).unwrap();
    let m2: Vec<f64> = times.times().iter().map(|t| 1.0 + 0.3 * (TAU * t).sin() + 0.1 * t).collect();
    let r = TimeReparam::new(times, m2).unwrap();
    let u = |t: f64| (3.0 * t).sin() + t * t;
    let v = |t: f64| (2.0 * t).cos();
    let lhs = quad(|t| u(r.beta_at(t)) * v(t), 0.0, 1.0);
    let rhs = quad(|tau| u(tau) * v(r.beta_inv_at(tau)) / r.rho_at(tau), 0.0, 1.0);
    assert!((lhs - rhs).abs() < 1e-8, "{lhs} {rhs}");
}

#[test]
fn translate_examples() {
    let g = grid(32);
    let times = TimeGrid::new(1.5, 33).unwrap();
    let (p, _, _) = translate_space(&OperatorL::free(&g, times, 1.0)).unwrap();
    assert!(p.iter().all(|v| *v == 0.0));

    let c0 = 0.7;
    let mut c = Coeffs::zeros(&g);
    c.a1 = Field::from_fn(&g, |x| C64::new(0.0, c0 + 0.2 * x.sin()));
    let (p, pd, l3) = translate_space(&steady(&g, times, c)).unwrap();
    for i in 0..times.n_t {
        assert!((p[i] - c0 * times.t(i)).abs() < 1e-12);
        assert!((pd[i] - c0).abs() < 1e-14);
        assert!(l3.coeffs[i].a1.mean().norm() < 1e-10);
    }
    let mut c = Coeffs::zeros(&g);
    c.a1 = cst(&g, 0.1, 0.0);
    assert!(matches!(translate_space(&steady(&g, times, c)), Err(Error::Structure { .. })));
}

#[test]
fn eliminate_order_one_examples() {
    let g = grid(64);
    let times = TimeGrid::new(1.0, 9).unwrap();
    let mut r = rng(6);
    let mut c = Coeffs::zeros(&g);
    c.a0 = band_limited(&g, 3, 1.0, 0.01, &mut r);
    let (v, l4) = eliminate_order_one(&steady(&g, times, c.clone())).unwrap();
    assert!(v.iter().all(|f| (f - &cst(&g, 1.0, 0.0)).sup_norm() < 1e-15));
    assert!((&l4.coeffs[2].a0 - &c.a0).sup_norm() < 1e-14);

    let a1 = Field::from_fn(&g, |x| C64::new(0.0, x.sin()));
    let want = Field::from_fn(&g, |x| C64::from_polar(1.0, x.cos() / 2.0));
    assert!((&order_one_multiplier(&a1, 1.0) - &want).sup_norm() < 1e-14);

    let mu = 1.3;
    let a1 = Field::from_fn(&g, |x| C64::new(0.0, 0.1 * x.sin() + 0.05 * (2.0 * x).cos()));
    let a0 = Field::from_fn(&g, |x| C64::new(0.02 * x.cos(), 0.0));
    let mut c = Coeffs::zeros(&g);
    c.a1 = a1.clone();
    c.a0 = a0.clone();
    let l3 = OperatorL::new(&g, times, mu, vec![c; times.n_t]).unwrap();
    let (v, l4) = eliminate_order_one(&l3).unwrap();
    let vi = &v[4];
    assert!(vi.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    assert!(l4.coeffs[4].a1.sup_norm() < 1e-9 && l4.coeffs[4].b1.sup_norm() < 1e-9);
    // steady v, so v_t = 0 in a0 + v^{-1}(mu v_xx + a1 v_x - i v_t)
    let corr = (&vi.dxx().scale_re(mu) + &a1.mul_pointwise(&vi.dx())).mul_pointwise(&vi.map_values(|z| 1.0 / z));
    let oracle = &a0 + &corr;
    assert!((&l4.coeffs[4].a0 - &oracle).sup_norm() < 1e-9);

    let mut c = Coeffs::zeros(&g);
    c.a1 = cst(&g, 0.0, 0.2);
    assert!(matches!(eliminate_order_one(&steady(&g, times, c)), Err(Error::Precondition(_))));
}

#[test]
fn trivial_reduction_is_identity() {
    let g = grid(32);
    let times = TimeGrid::new(1.0, 17).unwrap();
    let red = full_reduce(&OperatorL::free(&g, times, 1.0)).unwrap();
    assert!((red.mu - 1.0).abs() < 1e-14);
    assert!(red.p.iter().all(|p| *p == 0.0));
    assert!(red.v.iter().all(|v| (v - &cst(&g, 1.0, 0.0)).sup_norm() < 1e-15));
    assert!(red.r1.iter().chain(&red.r2).all(|r| r.sup_norm() < 1e-14));
    assert!(red.diffeo.alpha.iter().all(|a| a.sup_norm() == 0.0));
    let chi = Field::from_real_fn(&g, |x| (x.sin()).max(0.0).powi(4));
    for k in red.k_field(&chi) {
        assert!((&k - &chi).sup_norm() < 1e-14);
    }
    let mut r = rng(2);
    let h = free_flow(1.0, times, &band_limited(&g, 4, 1.0, 1.0, &mut r));
    let back = red.apply_phi(&red.apply_psi(&h, 1.0), true);
    assert!(back.sub(&h).sup_norm(0.0) < 1e-14);
}

#[test]
fn reduction_rejects_large_coefficients() {
    let g = grid(32);
    let times = TimeGrid::new(1.0, 9).unwrap();
    let mut c = Coeffs::zeros(&g);
    c.a0 = cst(&g, 0.5, 0.0);
    assert!(matches!(full_reduce(&steady(&g, times, c)), Err(Error::Smallness(_))));
}

fn stage_checks(red: &ReductionData, seed: u64) -> (f64, f64, f64, f64) {
    let g = &red.grid;
    let mut r = rng(seed);
    let u = band_limited(g, 6, 1.0, 1.0, &mut r);
    let w = band_limited(g, 6, 1.0, 1.0, &mut r);
    let rows = red.diagnostics(&u, &w);
    let mx = |f: &dyn Fn(&qlnls::reduction::ReductionRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
    let symp = mx(&|x| x.symplectic_s.max(x.symplectic_a).max(x.symplectic_t).max(x.symplectic_m));
    (mx(&|x| x.order2_variance), mx(&|x| x.order1_sup), mx(&|x| x.det_s_deviation), symp)
}

#[test]
fn builtin_reduction_invariants() {
    for name in ["cubic-a", "cubic-b"] {
        let l = background(128, 129, name, 1e-2, 1);
        let red = full_reduce(&l).unwrap();
        for s in &red.structure {
            assert!(s.max() < 1e-8, "{name}: {s:?}");
        }
        assert!(red.stages.iter().all(|s| s.hamiltonian_checked));
        assert!(red.sym.b1_residual < 1e-8);
        let (var, o1, det, symp) = stage_checks(&red, 9);
        assert!(var < 1e-10, "{name} {var}");
        assert!(o1 < 1e-9, "{name} {o1}");
        assert!(det < 1e-10, "{name} {det}");
        assert!(symp < 1e-10, "{name} {symp}");
        assert!(red.p[0] == 0.0);
        assert!(red.reparam.beta.windows(2).all(|w| w[1] > w[0]));
        assert!(red.v.iter().all(|v| v.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12)));
    }
}

#[test]
fn conjugator_adjoints() {
    let l = background(128, 129, "cubic-a", 1e-2, 1);
    let red = full_reduce(&l).unwrap();
    let mut r = rng(10);
    for _ in 0..3 {
        let u = band_limited(&red.grid, 6, 1.0, 1.0, &mut r);
        let w = band_limited(&red.grid, 6, 1.0, 1.0, &mut r);
        let worst = red.adjoint_defects(&u, &w).iter().map(|a| a.max()).fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
    // with an off-diagonal principal term the symmetrizer is symplectic but
    // not unitary; the other three conjugators stay unitary
    let l = background(128, 129, "cubic-b", 1e-2, 1);
    let red = full_reduce(&l).unwrap();
    let u = band_limited(&red.grid, 6, 1.0, 1.0, &mut r);
    let w = band_limited(&red.grid, 6, 1.0, 1.0, &mut r);
    let rows = red.adjoint_defects(&u, &w);
    let others = rows.iter().map(|a| a.a.max(a.t_shift).max(a.m)).fold(0.0f64, f64::max);
    assert!(others < 1e-9, "{others}");
    assert!(rows.iter().map(|a| a.s).fold(0.0f64, f64::max) > 1e-6);
}

#[test]
fn conjugation_residual_is_small() {
    let mut r = rng(77);
    for name in ["cubic-a", "cubic-b"] {
        let l = background(128, 129, name, 1e-2, 1);
        let red = full_reduce(&l).unwrap();
        for _ in 0..10 {
            let h = free_flow(1.0, l.times, &band_limited(&l.grid, 4, 1.0, 1.0, &mut r));
            let res = conjugation_residual(&l, &red, &h);
            assert!(res < 1e-6, "{name} {res}");
        }
    }
}

#[test]
fn phi_and_psi_are_inverse() {
    let l = background(64, 65, "cubic-a", 1e-2, 3);
    let red = full_reduce(&l).unwrap();
    let mut r = rng(4);
    let h = free_flow(1.0, l.times, &band_limited(&l.grid, 4, 1.0, 1.0, &mut r));
    let there = red.apply_psi(&h, 1.0);
    let back = red.apply_phi(&there, false);
    assert!(back.sub(&h).sup_norm(0.0) < 1e-6 * h.sup_norm(0.0));
    let z = &red.psi_end_inv(&red.psi_end(h.last()));
    assert!((z - h.last()).l2_norm() < 1e-10);
}

#[test]
fn k_field_matches_moved_cutoff() {
    let l = background(64, 65, "cubic-a", 1e-2, 3);
    let red = full_reduce(&l).unwrap();
    let chi = Field::from_real_fn(&l.grid, |x| (-(x - PI).powi(2)).exp());
    let ks = red.k_field(&chi);
    // k is chi moved by a small displacement and rescaled by rho^{-1}
    for (i, k) in ks.iter().enumerate() {
        assert!(k.max_imag() == 0.0);
        assert!((k - &chi.scale_re(1.0 / red.reparam.rho[i])).sup_norm() < 0.05);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inverse_diffeo_composes_to_identity(seed in any::<u64>(), amp in 0.0f64..0.08) {
        let g = Grid::new(128).unwrap();
        let mut r = rng(seed);
        let alpha = band_limited_real(&g, 3, 1.0, amp, &mut r);
        prop_assume!(alpha.dx().sup_norm() <= 0.4);
        let b = invert_diffeo(&alpha).unwrap();
        prop_assert!(composition_residual(&alpha, &b) <= 1e-10);
        prop_assert!(derivative_identity_residual(&alpha, &b) <= 1e-9);
    }

    #[test]
    fn diffeo_preserves_l2(seed in any::<u64>(), amp in 0.0f64..0.08) {
        let g = Grid::new(128).unwrap();
        let mut r = rng(seed);
        let alpha = band_limited_real(&g, 3, 1.0, amp, &mut r);
        let u = band_limited(&g, 6, 1.0, 1.0, &mut r);
        prop_assert!((apply_a(&alpha, &u).l2_norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn reparam_endpoints(seed in any::<u64>()) {
        let times = TimeGrid::new(1.0, 65).unwrap();
        let mut r = rng(seed);
        let c = band_limited_real(&Grid::new(8).unwrap(), 2, 0.0, 0.3, &mut r);
        let m2: Vec<f64> = times.times().iter().map(|t| 1.0 + c.interpolate(&[TAU * t])[0].re).collect();
        let rep = TimeReparam::new(times, m2).unwrap();
        prop_assert_eq!(rep.beta[0], 0.0);
        prop_assert!((rep.beta_at(1.0) - 1.0).abs() <= 1e-12);
        prop_assert!(rep.beta.windows(2).all(|w| w[1] > w[0]));
    }
}
